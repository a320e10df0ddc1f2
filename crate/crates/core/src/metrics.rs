// SPDX-License-Identifier: Apache-2.0

//! Pose evaluation protocols: PCK/PCKh for single-person data and OKS-based
//! AP/AR for multi-instance data.
//!
//! Boundary conventions: a PCK hit is `error <= alpha * normalizer`; an OKS
//! match needs `oks >= threshold`.

use crate::error::{Error, Result};
use crate::types::{DecodedPose, PoseInstance};

/// PCKh head size as a fraction of the head-box diagonal.
pub const HEAD_SIZE_FACTOR: f64 = 0.6;

/// Distance normalizer for PCK.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NormalizerSpec {
    /// Distance between the instance's torso endpoints (LSP).
    Torso,
    /// `0.6 x` head-box diagonal (MPII PCKh).
    Head,
    /// Fixed pixel value.
    Explicit(f64),
}

pub fn resolve_normalizer(instance: &PoseInstance, spec: NormalizerSpec) -> Result<f64> {
    match spec {
        NormalizerSpec::Explicit(v) => Ok(v),
        NormalizerSpec::Head => instance
            .norm_meta
            .head_box
            .map(|b| HEAD_SIZE_FACTOR * b.diagonal())
            .ok_or_else(|| Error::Data("instance has no head box".into())),
        NormalizerSpec::Torso => {
            let (a, b) = instance
                .norm_meta
                .torso_endpoints
                .ok_or_else(|| Error::Data("instance has no torso endpoints".into()))?;
            let kps = &instance.keypoints;
            let (pa, pb) = match (kps.get(a), kps.get(b)) {
                (Some(pa), Some(pb)) => (pa, pb),
                _ => {
                    return Err(Error::Data(format!(
                        "torso endpoints ({a}, {b}) out of range for {} keypoints",
                        kps.len()
                    )))
                }
            };
            if !(pa.is_labeled() && pb.is_labeled()) {
                return Err(Error::Data(format!("torso endpoint {a} or {b} is unlabeled")));
            }
            Ok(pa.point().distance(&pb.point()))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PckReport {
    pub alpha: f64,
    /// Fraction of labeled keypoints within the threshold.
    pub overall: f64,
    /// Per keypoint index; `None` when the index is never labeled.
    pub per_keypoint: Vec<Option<f64>>,
    pub correct: usize,
    pub total: usize,
}

pub fn pck(
    predictions: &[DecodedPose],
    ground_truths: &[PoseInstance],
    normalizers: &[f64],
    alpha: f64,
) -> Result<PckReport> {
    if predictions.len() != ground_truths.len() || normalizers.len() != ground_truths.len() {
        return Err(Error::Contract(format!(
            "length mismatch: {} predictions, {} ground truths, {} normalizers",
            predictions.len(),
            ground_truths.len(),
            normalizers.len()
        )));
    }
    let k_count = ground_truths.iter().map(|g| g.num_keypoints()).max().unwrap_or(0);
    let mut hits = vec![0usize; k_count];
    let mut seen = vec![0usize; k_count];
    for (i, ((pred, gt), &norm)) in predictions.iter().zip(ground_truths).zip(normalizers).enumerate() {
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::Data(format!("instance {i}: normalizer {norm} is not positive")));
        }
        if pred.num_keypoints() != gt.num_keypoints() {
            return Err(Error::Contract(format!(
                "instance {i}: prediction has {} keypoints, ground truth {}",
                pred.num_keypoints(),
                gt.num_keypoints()
            )));
        }
        let limit = alpha * norm;
        for (k, (p, g)) in pred.coords.iter().zip(&gt.keypoints).enumerate() {
            if !g.is_labeled() {
                continue;
            }
            seen[k] += 1;
            if p.distance(&g.point()) <= limit {
                hits[k] += 1;
            }
        }
    }
    let correct: usize = hits.iter().sum();
    let total: usize = seen.iter().sum();
    Ok(PckReport {
        alpha,
        overall: if total > 0 { correct as f64 / total as f64 } else { 0.0 },
        per_keypoint: hits
            .iter()
            .zip(&seen)
            .map(|(&h, &n)| (n > 0).then(|| h as f64 / n as f64))
            .collect(),
        correct,
        total,
    })
}

/// COCO keypoint sigmas; the OKS falloff constant is twice the sigma.
const COCO_SIGMAS: [f64; 17] = [
    0.26, 0.25, 0.25, 0.35, 0.35, 0.79, 0.79, 0.72, 0.72, 0.62, 0.62, 1.07, 1.07, 0.87, 0.87,
    0.89, 0.89,
];

/// Per-keypoint OKS falloff constants `kappa`.
#[derive(Debug, Clone, PartialEq)]
pub struct OksConstants {
    kappas: Vec<f64>,
}

impl OksConstants {
    pub fn new(kappas: Vec<f64>) -> Result<Self> {
        if kappas.is_empty() || kappas.iter().any(|k| !(*k > 0.0 && k.is_finite())) {
            return Err(Error::Config("OKS constants must be non-empty and positive".into()));
        }
        Ok(OksConstants { kappas })
    }

    /// The 17 COCO person-keypoint constants.
    pub fn coco() -> Self {
        OksConstants {
            kappas: COCO_SIGMAS.iter().map(|s| 2.0 * s / 10.0).collect(),
        }
    }

    pub fn kappas(&self) -> &[f64] {
        &self.kappas
    }

    pub fn len(&self) -> usize {
        self.kappas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kappas.is_empty()
    }
}

/// Object keypoint similarity: mean over labeled keypoints of
/// `exp(-d^2 / (2 s^2 kappa^2))` with `s^2` the ground-truth area.
pub fn oks(prediction: &DecodedPose, gt: &PoseInstance, constants: &OksConstants) -> Result<f64> {
    let area = gt
        .norm_meta
        .area
        .ok_or_else(|| Error::Data("ground truth has no area".into()))?;
    if !(area > 0.0) {
        return Err(Error::Data(format!("ground-truth area {area} is not positive")));
    }
    if constants.len() != gt.num_keypoints() || prediction.num_keypoints() != gt.num_keypoints() {
        return Err(Error::Contract(format!(
            "keypoint count mismatch: {} constants, {} predicted, {} ground truth",
            constants.len(),
            prediction.num_keypoints(),
            gt.num_keypoints()
        )));
    }
    let (mut sum, mut n) = (0.0, 0usize);
    for ((p, g), kappa) in prediction.coords.iter().zip(&gt.keypoints).zip(constants.kappas()) {
        if !g.is_labeled() {
            continue;
        }
        let d2 = (p.x - g.x).powi(2) + (p.y - g.y).powi(2);
        sum += (-d2 / (2.0 * area * kappa * kappa)).exp();
        n += 1;
    }
    if n == 0 {
        return Err(Error::Data("ground truth has no labeled keypoints".into()));
    }
    Ok(sum / n as f64)
}

/// A scored instance prediction.
#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub pose: DecodedPose,
    pub score: f64,
}

/// `0.50, 0.55, ..., 0.95`
pub fn default_thresholds() -> Vec<f64> {
    (0..10).map(|i| (50 + 5 * i) as f64 / 100.0).collect()
}

/// Detection scores and the detection-by-ground-truth OKS matrix for one image.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageSimilarity {
    pub scores: Vec<f64>,
    pub num_gt: usize,
    /// `similarity[d][g]`
    pub similarity: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdResult {
    pub threshold: f64,
    pub ap: f64,
    pub recall: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OksApReport {
    /// AP averaged over all thresholds.
    pub ap: f64,
    pub ap50: Option<f64>,
    pub ap75: Option<f64>,
    /// Max recall averaged over all thresholds.
    pub ar: f64,
    pub per_threshold: Vec<ThresholdResult>,
}

/// Greedy score-ordered matching for one image at one threshold.
/// Returns the true-positive flag of each detection in input order.
fn match_image(img: &ImageSimilarity, threshold: f64) -> Vec<bool> {
    let mut order: Vec<usize> = (0..img.scores.len()).collect();
    order.sort_by(|&a, &b| img.scores[b].total_cmp(&img.scores[a]));
    let mut taken = vec![false; img.num_gt];
    let mut tp = vec![false; img.scores.len()];
    for d in order {
        let mut best: Option<(usize, f64)> = None;
        for (g, &s) in img.similarity[d].iter().enumerate() {
            if taken[g] || s < threshold {
                continue;
            }
            if best.is_none_or(|(_, b)| s > b) {
                best = Some((g, s));
            }
        }
        if let Some((g, _)) = best {
            taken[g] = true;
            tp[d] = true;
        }
    }
    tp
}

/// 101-point interpolated AP from score-sorted true-positive flags.
fn interpolated_ap(flags: &[bool], num_gt: usize) -> (f64, f64) {
    if num_gt == 0 {
        return (0.0, 0.0);
    }
    let mut recall = Vec::with_capacity(flags.len());
    let mut precision = Vec::with_capacity(flags.len());
    let (mut tp, mut fp) = (0usize, 0usize);
    for &f in flags {
        if f {
            tp += 1;
        } else {
            fp += 1;
        }
        recall.push(tp as f64 / num_gt as f64);
        precision.push(tp as f64 / (tp + fp) as f64);
    }
    for i in (1..precision.len()).rev() {
        if precision[i] > precision[i - 1] {
            precision[i - 1] = precision[i];
        }
    }
    let mut sum = 0.0;
    for j in 0..=100 {
        let r = j as f64 / 100.0;
        let idx = recall.partition_point(|&x| x < r);
        if idx < precision.len() {
            sum += precision[idx];
        }
    }
    (sum / 101.0, recall.last().copied().unwrap_or(0.0))
}

/// AP/AR over precomputed similarity matrices.
pub fn ap_from_similarity(images: &[ImageSimilarity], thresholds: &[f64]) -> Result<OksApReport> {
    if thresholds.is_empty() {
        return Err(Error::Config("at least one OKS threshold is required".into()));
    }
    for (i, img) in images.iter().enumerate() {
        if img.similarity.len() != img.scores.len()
            || img.similarity.iter().any(|row| row.len() != img.num_gt)
        {
            return Err(Error::Contract(format!("image {i}: similarity matrix shape mismatch")));
        }
    }
    let num_gt: usize = images.iter().map(|i| i.num_gt).sum();
    // Global score order; ties keep image order, then detection order.
    let mut events: Vec<(f64, usize, usize)> = images
        .iter()
        .enumerate()
        .flat_map(|(i, img)| img.scores.iter().enumerate().map(move |(d, &s)| (s, i, d)))
        .collect();
    events.sort_by(|a, b| b.0.total_cmp(&a.0));

    let mut per_threshold = Vec::with_capacity(thresholds.len());
    for &t in thresholds {
        let matches: Vec<Vec<bool>> = images.iter().map(|img| match_image(img, t)).collect();
        let flags: Vec<bool> = events.iter().map(|&(_, i, d)| matches[i][d]).collect();
        let (ap, recall) = interpolated_ap(&flags, num_gt);
        per_threshold.push(ThresholdResult { threshold: t, ap, recall });
    }
    let n = per_threshold.len() as f64;
    let at = |x: f64| {
        per_threshold
            .iter()
            .find(|r| (r.threshold - x).abs() < 1e-9)
            .map(|r| r.ap)
    };
    Ok(OksApReport {
        ap: per_threshold.iter().map(|r| r.ap).sum::<f64>() / n,
        ap50: at(0.5),
        ap75: at(0.75),
        ar: per_threshold.iter().map(|r| r.recall).sum::<f64>() / n,
        per_threshold,
    })
}

/// OKS-based AP/AR. Ground truths without labeled keypoints are ignored.
pub fn oks_ap(
    detections: &[Vec<Detection>],
    ground_truths: &[Vec<PoseInstance>],
    constants: &OksConstants,
    thresholds: &[f64],
) -> Result<OksApReport> {
    if detections.len() != ground_truths.len() {
        return Err(Error::Contract(format!(
            "{} detection images vs {} ground-truth images",
            detections.len(),
            ground_truths.len()
        )));
    }
    let mut images = Vec::with_capacity(detections.len());
    for (dets, gts) in detections.iter().zip(ground_truths) {
        let gts: Vec<&PoseInstance> = gts.iter().filter(|g| g.num_labeled() > 0).collect();
        let mut similarity = Vec::with_capacity(dets.len());
        for d in dets {
            let row = gts
                .iter()
                .map(|g| oks(&d.pose, g, constants))
                .collect::<Result<Vec<_>>>()?;
            similarity.push(row);
        }
        images.push(ImageSimilarity {
            scores: dets.iter().map(|d| d.score).collect(),
            num_gt: gts.len(),
            similarity,
        });
    }
    ap_from_similarity(&images, thresholds)
}
