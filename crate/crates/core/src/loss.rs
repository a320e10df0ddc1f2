// SPDX-License-Identifier: Apache-2.0

//! Training objectives over map stacks.
//!
//! The composite loss is
//!
//! ```text
//! L   = w_h * L_h + w_o * (L_oy + L_ox)
//! L_h = mean over valid keypoints of MSE(H_k, H^_k)
//! L_o = mean over keypoints with a non-empty region of
//!       (1 / N_omega) * sum over region cells of smoothL1(O^ - O)
//! ```
//!
//! The region of keypoint `k` is the set of cells whose heatmap activation is
//! at least `tau`; which heatmap is thresholded is chosen by [`RegionSource`].
//! Two alternative objectives are provided for comparison: offsets scored only
//! at the ground-truth peak ([`peak_mse_loss`]) and a disk classification plus
//! positive-cell offset regression ([`grmi_loss`]).

use crate::codec::argmax_cell;
use crate::error::{Error, Result};
use crate::types::{RegionSource, TargetMaps};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossConfig {
    pub omega_h: f64,
    pub omega_o: f64,
    /// Smooth-L1 transition point.
    pub beta: f64,
    pub region_source: RegionSource,
    pub tau: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig {
            omega_h: 0.5,
            omega_o: 2.0,
            beta: 1.0,
            region_source: RegionSource::GroundTruth,
            tau: 0.6,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.omega_h >= 0.0 && self.omega_o >= 0.0) {
            return Err(Error::Config("loss weights must be non-negative".into()));
        }
        if !(self.beta > 0.0) {
            return Err(Error::Config(format!("beta must be > 0, got {}", self.beta)));
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return Err(Error::Config(format!("tau must lie in (0, 1], got {}", self.tau)));
        }
        Ok(())
    }
}

/// Per-keypoint boolean planes marking the cells scored by the offset loss.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegionMask {
    plane_len: usize,
    cells: Vec<bool>,
    n_omega: Vec<usize>,
}

impl RegionMask {
    /// Thresholds every heatmap of `maps` at `tau`. Invalid keypoints get an
    /// empty region.
    pub fn from_heatmaps(maps: &TargetMaps, tau: f64) -> Self {
        Self::build(maps, |k, cell| maps.heatmap(k)[cell] >= tau)
    }

    fn build(maps: &TargetMaps, mut include: impl FnMut(usize, usize) -> bool) -> Self {
        let plane_len = maps.plane_len();
        let k_count = maps.num_keypoints();
        let mut cells = vec![false; k_count * plane_len];
        let mut n_omega = vec![0; k_count];
        for k in 0..k_count {
            if !maps.is_valid(k) {
                continue;
            }
            for cell in 0..plane_len {
                if include(k, cell) {
                    cells[k * plane_len + cell] = true;
                    n_omega[k] += 1;
                }
            }
        }
        RegionMask {
            plane_len,
            cells,
            n_omega,
        }
    }

    pub fn plane(&self, k: usize) -> &[bool] {
        &self.cells[k * self.plane_len..(k + 1) * self.plane_len]
    }

    pub fn contains(&self, k: usize, cell: usize) -> bool {
        self.cells[k * self.plane_len + cell]
    }

    pub fn n_omega(&self) -> &[usize] {
        &self.n_omega
    }
}

/// Region of each keypoint, taken from the heatmap selected by `source`.
/// Validity always follows `target`.
pub fn region_mask(
    target: &TargetMaps,
    predicted: &TargetMaps,
    tau: f64,
    source: RegionSource,
) -> Result<RegionMask> {
    target.check_compatible(predicted)?;
    Ok(match source {
        RegionSource::GroundTruth => RegionMask::from_heatmaps(target, tau),
        RegionSource::Predicted => {
            RegionMask::build(target, |k, cell| predicted.heatmap(k)[cell] >= tau)
        }
        RegionSource::Union => RegionMask::build(target, |k, cell| {
            target.heatmap(k)[cell].max(predicted.heatmap(k)[cell]) >= tau
        }),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossReport {
    pub l_h: f64,
    pub l_oy: f64,
    pub l_ox: f64,
    pub total: f64,
    /// Scored offset cells per keypoint.
    pub n_omega: Vec<usize>,
    /// dL/d(predicted value) for every plane value, when requested.
    pub gradient: Option<TargetMaps>,
}

impl LossReport {
    fn assemble(l_h: f64, l_oy: f64, l_ox: f64, config: &LossConfig, n_omega: Vec<usize>) -> Self {
        LossReport {
            l_h,
            l_oy,
            l_ox,
            total: config.omega_h * l_h + config.omega_o * (l_oy + l_ox),
            n_omega,
            gradient: None,
        }
    }
}

/// Mean squared difference between two planes.
pub fn mse_plane(target: &[f64], predicted: &[f64]) -> Result<f64> {
    if target.len() != predicted.len() {
        return Err(Error::Contract(format!(
            "plane size mismatch: {} vs {}",
            target.len(),
            predicted.len()
        )));
    }
    if target.is_empty() {
        return Ok(0.0);
    }
    let sum: f64 = target
        .iter()
        .zip(predicted)
        .map(|(t, p)| (p - t) * (p - t))
        .sum();
    Ok(sum / target.len() as f64)
}

#[inline]
pub fn smooth_l1(residual: f64, beta: f64) -> f64 {
    let a = residual.abs();
    if a < beta {
        0.5 * residual * residual / beta
    } else {
        a - 0.5 * beta
    }
}

/// Derivative of [`smooth_l1`] with respect to the residual.
#[inline]
pub fn smooth_l1_grad(residual: f64, beta: f64) -> f64 {
    if residual.abs() < beta {
        residual / beta
    } else {
        residual.signum()
    }
}

/// Mean heatmap MSE over valid keypoints, optionally accumulating its gradient.
fn heatmap_term(
    target: &TargetMaps,
    predicted: &TargetMaps,
    weight: f64,
    mut grad: Option<&mut TargetMaps>,
) -> Result<f64> {
    let k_valid = target.num_valid();
    if k_valid == 0 {
        return Ok(0.0);
    }
    let n = target.plane_len() as f64;
    let mut acc = 0.0;
    for k in (0..target.num_keypoints()).filter(|&k| target.is_valid(k)) {
        acc += mse_plane(target.heatmap(k), predicted.heatmap(k))?;
        if let Some(g) = grad.as_deref_mut() {
            let scale = weight * 2.0 / (k_valid as f64 * n);
            for ((gv, t), p) in g
                .heatmap_mut(k)
                .iter_mut()
                .zip(target.heatmap(k))
                .zip(predicted.heatmap(k))
            {
                *gv = scale * (p - t);
            }
        }
    }
    Ok(acc / k_valid as f64)
}

/// Which offset planes an offset term reads.
#[derive(Clone, Copy)]
enum Axis {
    Y,
    X,
}

fn offsets(maps: &TargetMaps, axis: Axis, k: usize) -> &[f64] {
    match axis {
        Axis::Y => maps.y_offsets(k),
        Axis::X => maps.x_offsets(k),
    }
}

fn offsets_mut(maps: &mut TargetMaps, axis: Axis, k: usize) -> &mut [f64] {
    match axis {
        Axis::Y => maps.y_offsets_mut(k),
        Axis::X => maps.x_offsets_mut(k),
    }
}

/// Region-restricted smooth-L1 offset term for one axis.
fn offset_term(
    target: &TargetMaps,
    predicted: &TargetMaps,
    mask: &RegionMask,
    axis: Axis,
    beta: f64,
    weight: f64,
    mut grad: Option<&mut TargetMaps>,
) -> f64 {
    let scored: Vec<usize> = (0..target.num_keypoints())
        .filter(|&k| mask.n_omega()[k] > 0)
        .collect();
    if scored.is_empty() {
        return 0.0;
    }
    let k_scored = scored.len() as f64;
    let mut acc = 0.0;
    for &k in &scored {
        let n_omega = mask.n_omega()[k] as f64;
        let (t, p) = (offsets(target, axis, k), offsets(predicted, axis, k));
        let mut sum = 0.0;
        for (cell, &inside) in mask.plane(k).iter().enumerate() {
            if inside {
                sum += smooth_l1(p[cell] - t[cell], beta);
            }
        }
        acc += sum / n_omega;
        if let Some(g) = grad.as_deref_mut() {
            let scale = weight / (k_scored * n_omega);
            let gp = offsets_mut(g, axis, k);
            for (cell, &inside) in mask.plane(k).iter().enumerate() {
                gp[cell] = if inside {
                    scale * smooth_l1_grad(p[cell] - t[cell], beta)
                } else {
                    0.0
                };
            }
        }
    }
    acc / k_scored
}

fn composite_impl(
    target: &TargetMaps,
    predicted: &TargetMaps,
    config: &LossConfig,
    mask: &RegionMask,
    want_grad: bool,
) -> Result<LossReport> {
    config.validate()?;
    target.check_compatible(predicted)?;
    let mut grad = want_grad.then(|| target.zeros_like());
    let l_h = heatmap_term(target, predicted, config.omega_h, grad.as_mut())?;
    let l_oy = offset_term(target, predicted, mask, Axis::Y, config.beta, config.omega_o, grad.as_mut());
    let l_ox = offset_term(target, predicted, mask, Axis::X, config.beta, config.omega_o, grad.as_mut());
    let mut report = LossReport::assemble(l_h, l_oy, l_ox, config, mask.n_omega().to_vec());
    report.gradient = grad;
    Ok(report)
}

/// Composite loss with an externally supplied region. The region is treated
/// as a constant, which is also how the gradient sees it.
pub fn composite_loss_with_mask(
    target: &TargetMaps,
    predicted: &TargetMaps,
    config: &LossConfig,
    mask: &RegionMask,
    want_grad: bool,
) -> Result<LossReport> {
    if mask.n_omega().len() != target.num_keypoints() || mask.plane_len != target.plane_len() {
        return Err(Error::Contract("region mask shape does not match maps".into()));
    }
    composite_impl(target, predicted, config, mask, want_grad)
}

pub fn composite_loss(
    target: &TargetMaps,
    predicted: &TargetMaps,
    config: &LossConfig,
) -> Result<LossReport> {
    let mask = region_mask(target, predicted, config.tau, config.region_source)?;
    composite_impl(target, predicted, config, &mask, false)
}

/// Loss and gradient in one pass; `report.gradient` is always `Some`.
pub fn composite_loss_and_grad(
    target: &TargetMaps,
    predicted: &TargetMaps,
    config: &LossConfig,
) -> Result<LossReport> {
    let mask = region_mask(target, predicted, config.tau, config.region_source)?;
    composite_impl(target, predicted, config, &mask, true)
}

/// Analytic `dL/d(predicted)` for every plane value.
pub fn composite_loss_grad(
    target: &TargetMaps,
    predicted: &TargetMaps,
    config: &LossConfig,
) -> Result<TargetMaps> {
    Ok(composite_loss_and_grad(target, predicted, config)?
        .gradient
        .expect("gradient requested"))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheck {
    /// Max over compared cells of `|a - f| / max(1, |a|, |f|)`.
    pub max_relative_error: f64,
    pub compared: usize,
    /// Offset cells skipped because the residual sits near the smooth-L1 kink.
    pub skipped: usize,
}

/// Compares the analytic gradient against central differences.
///
/// The region is computed once from the unperturbed inputs and held fixed, so
/// the numerical derivative sees the same piecewise-smooth function the
/// analytic one differentiates. Offset cells whose residual lies within
/// `10 * step` of `+-beta` are excluded.
pub fn finite_diff_check(
    target: &TargetMaps,
    predicted: &TargetMaps,
    config: &LossConfig,
    step: f64,
) -> Result<GradCheck> {
    if !(step > 0.0) {
        return Err(Error::Config(format!("step must be > 0, got {step}")));
    }
    let mask = region_mask(target, predicted, config.tau, config.region_source)?;
    let analytic = composite_impl(target, predicted, config, &mask, true)?
        .gradient
        .expect("gradient requested");

    let n = target.plane_len();
    let k_count = target.num_keypoints();
    let mut probe = predicted.clone();
    let mut worst = 0.0f64;
    let (mut compared, mut skipped) = (0, 0);
    for i in 0..probe.as_slice().len() {
        let plane = i / n;
        if plane >= k_count {
            let k = (plane - k_count) % k_count;
            let r = predicted.as_slice()[i] - target.as_slice()[i];
            if mask.contains(k, i % n) && (r.abs() - config.beta).abs() < 10.0 * step {
                skipped += 1;
                continue;
            }
        }
        let orig = probe.as_slice()[i];
        probe.as_mut_slice()[i] = orig + step;
        let plus = composite_impl(target, &probe, config, &mask, false)?.total;
        probe.as_mut_slice()[i] = orig - step;
        let minus = composite_impl(target, &probe, config, &mask, false)?.total;
        probe.as_mut_slice()[i] = orig;

        let fd = (plus - minus) / (2.0 * step);
        let a = analytic.as_slice()[i];
        let rel = (a - fd).abs() / 1f64.max(a.abs()).max(fd.abs());
        worst = worst.max(rel);
        compared += 1;
    }
    Ok(GradCheck {
        max_relative_error: worst,
        compared,
        skipped,
    })
}

/// Ablation objective: Eq.-4-style heatmap MSE plus squared offset error at the
/// ground-truth peak cell of each valid keypoint only.
pub fn peak_mse_loss(
    target: &TargetMaps,
    predicted: &TargetMaps,
    config: &LossConfig,
) -> Result<LossReport> {
    config.validate()?;
    target.check_compatible(predicted)?;
    let l_h = heatmap_term(target, predicted, config.omega_h, None)?;
    let k_count = target.num_keypoints();
    let mut n_omega = vec![0; k_count];
    let (mut sy, mut sx, mut scored) = (0.0, 0.0, 0usize);
    for k in (0..k_count).filter(|&k| target.is_valid(k)) {
        let peak = argmax_cell(target.heatmap(k));
        let dy = predicted.y_offsets(k)[peak] - target.y_offsets(k)[peak];
        let dx = predicted.x_offsets(k)[peak] - target.x_offsets(k)[peak];
        sy += dy * dy;
        sx += dx * dx;
        n_omega[k] = 1;
        scored += 1;
    }
    let (l_oy, l_ox) = if scored > 0 {
        (sy / scored as f64, sx / scored as f64)
    } else {
        (0.0, 0.0)
    };
    Ok(LossReport::assemble(l_h, l_oy, l_ox, config, n_omega))
}

/// `log(1 + exp(z))` without overflow.
#[inline]
fn softplus(z: f64) -> f64 {
    if z == f64::INFINITY {
        return z;
    }
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

/// Binary cross-entropy of a logit against a 0/1 label.
#[inline]
fn bce_with_logit(label: bool, logit: f64) -> f64 {
    if label {
        softplus(-logit)
    } else {
        softplus(logit)
    }
}

/// Ablation objective: predicted heatmaps are logits of a disk classifier
/// (positive iff the patch center lies within `disk_radius` pixels of the
/// keypoint), scored with mean binary cross-entropy; offsets are scored with
/// smooth-L1 at positive cells. `disk_radius` defaults to the stride.
pub fn grmi_loss(
    target: &TargetMaps,
    predicted: &TargetMaps,
    config: &LossConfig,
    disk_radius: Option<f64>,
) -> Result<LossReport> {
    config.validate()?;
    target.check_compatible(predicted)?;
    let s = target.grid().stride() as f64;
    let radius = disk_radius.unwrap_or(s);
    if !(radius > 0.0) {
        return Err(Error::Config(format!("disk radius must be > 0, got {radius}")));
    }
    // The target offsets are the center-to-keypoint displacement in strides,
    // so the center distance is S * |offset|.
    let positives = RegionMask::build(target, |k, cell| {
        s * target.x_offsets(k)[cell].hypot(target.y_offsets(k)[cell]) <= radius
    });

    let k_valid = target.num_valid();
    let mut l_h = 0.0;
    if k_valid > 0 {
        for k in (0..target.num_keypoints()).filter(|&k| target.is_valid(k)) {
            let plane = predicted.heatmap(k);
            let sum: f64 = positives
                .plane(k)
                .iter()
                .zip(plane)
                .map(|(&pos, &z)| bce_with_logit(pos, z))
                .sum();
            l_h += sum / plane.len() as f64;
        }
        l_h /= k_valid as f64;
    }
    let l_oy = offset_term(target, predicted, &positives, Axis::Y, config.beta, 0.0, None);
    let l_ox = offset_term(target, predicted, &positives, Axis::X, config.beta, 0.0, None);
    Ok(LossReport::assemble(l_h, l_oy, l_ox, config, positives.n_omega.clone()))
}
