// SPDX-License-Identifier: Apache-2.0

//! Decoded keypoint predictions.
//!
//! ```json
//! {"images": [{"instances": [{"score": 0.93,
//!   "keypoints": [{"x": 1.5, "y": 2.0, "confidence": 0.9, "n_cells": 5, "used_fallback": false}]}]}]}
//! ```
//!
//! Images pair with annotation images by position. `score` defaults to the
//! mean keypoint confidence; the per-keypoint diagnostics are optional.

use serde::Serialize;

use super::json;
use crate::error::IngestError;
use crate::metrics::Detection;
use crate::types::{DecodeDiagnostics, DecodedPose, Point};

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PredictionSet {
    /// Detections per image, in input order.
    pub images: Vec<Vec<Detection>>,
}

impl PredictionSet {
    pub fn num_instances(&self) -> usize {
        self.images.iter().map(Vec::len).sum()
    }
}

pub fn ingest_predictions(text: &str) -> Result<PredictionSet, IngestError> {
    let root = json::parse(text)?;
    let obj = json::object(&root, "$")?;
    let images_v = json::array(json::field(obj, "images", "$")?, "images")?;
    let mut images = Vec::with_capacity(images_v.len());
    for (i, iv) in images_v.iter().enumerate() {
        let path = format!("images[{i}]");
        let io = json::object(iv, &path)?;
        let inst_path = format!("{path}.instances");
        let inst_v = json::array(json::field(io, "instances", &path)?, &inst_path)?;
        let mut dets = Vec::with_capacity(inst_v.len());
        for (j, v) in inst_v.iter().enumerate() {
            let p = format!("{inst_path}[{j}]");
            let o = json::object(v, &p)?;
            let kp_path = format!("{p}.keypoints");
            let kps = json::array(json::field(o, "keypoints", &p)?, &kp_path)?;
            let mut pose = DecodedPose { coords: vec![], confidence: vec![], diagnostics: vec![] };
            for (k, kv) in kps.iter().enumerate() {
                let kp = format!("{kp_path}[{k}]");
                let ko = json::object(kv, &kp)?;
                let x = json::f64_at(json::field(ko, "x", &kp)?, &format!("{kp}.x"))?;
                let y = json::f64_at(json::field(ko, "y", &kp)?, &format!("{kp}.y"))?;
                let confidence = json::opt_field(ko, "confidence")
                    .map(|v| json::f64_at(v, &format!("{kp}.confidence")))
                    .transpose()?
                    .unwrap_or(1.0);
                let n_cells = json::opt_field(ko, "n_cells")
                    .map(|v| json::u64_at(v, &format!("{kp}.n_cells")))
                    .transpose()?
                    .unwrap_or(1) as usize;
                let used_fallback = match json::opt_field(ko, "used_fallback") {
                    Some(v) => v.as_bool().ok_or_else(|| {
                        IngestError::schema(format!("{kp}.used_fallback"), "expected a boolean")
                    })?,
                    None => false,
                };
                pose.coords.push(Point { x, y });
                pose.confidence.push(confidence);
                pose.diagnostics.push(DecodeDiagnostics { n_cells, used_fallback });
            }
            if pose.coords.is_empty() {
                return Err(IngestError::schema(kp_path, "no keypoints"));
            }
            let score = match json::opt_field(o, "score") {
                Some(v) => json::f64_at(v, &format!("{p}.score"))?,
                None => pose.mean_confidence(),
            };
            dets.push(Detection { pose, score });
        }
        images.push(dets);
    }
    Ok(PredictionSet { images })
}

#[derive(Serialize)]
struct PredFile {
    images: Vec<PredImage>,
}

#[derive(Serialize)]
struct PredImage {
    instances: Vec<PredInstance>,
}

#[derive(Serialize)]
struct PredInstance {
    score: f64,
    keypoints: Vec<PredKeypoint>,
}

#[derive(Serialize)]
struct PredKeypoint {
    x: f64,
    y: f64,
    confidence: f64,
    n_cells: usize,
    used_fallback: bool,
}

/// Serializes predictions; [`ingest_predictions`] inverts it exactly.
pub fn write_predictions(set: &PredictionSet) -> String {
    let file = PredFile {
        images: set
            .images
            .iter()
            .map(|dets| PredImage {
                instances: dets
                    .iter()
                    .map(|d| PredInstance {
                        score: d.score,
                        keypoints: (0..d.pose.num_keypoints())
                            .map(|k| PredKeypoint {
                                x: d.pose.coords[k].x,
                                y: d.pose.coords[k].y,
                                confidence: d.pose.confidence[k],
                                n_cells: d.pose.diagnostics[k].n_cells,
                                used_fallback: d.pose.diagnostics[k].used_fallback,
                            })
                            .collect(),
                    })
                    .collect(),
            })
            .collect(),
    };
    let mut s = serde_json::to_string_pretty(&file).expect("serializable");
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let pose = DecodedPose {
            coords: vec![Point { x: 1.25, y: -3.0 }, Point { x: 0.1 + 0.2, y: 7.0 }],
            confidence: vec![0.9, 0.61],
            diagnostics: vec![
                DecodeDiagnostics { n_cells: 5, used_fallback: false },
                DecodeDiagnostics { n_cells: 1, used_fallback: true },
            ],
        };
        let set = PredictionSet {
            images: vec![vec![Detection { pose: pose.clone(), score: 0.7 }], vec![]],
        };
        assert_eq!(ingest_predictions(&write_predictions(&set)).unwrap(), set);
    }

    #[test]
    fn defaults_and_errors() {
        let set = ingest_predictions(
            r#"{"images":[{"instances":[{"keypoints":[{"x":1,"y":2,"confidence":0.5},{"x":3,"y":4}]}]}]}"#,
        )
        .unwrap();
        let d = &set.images[0][0];
        assert_eq!(d.score, 0.75);
        assert_eq!(d.pose.diagnostics[1], DecodeDiagnostics { n_cells: 1, used_fallback: false });
        let e = ingest_predictions(r#"{"images":[{"instances":[{"keypoints":[{"x":1}]}]}]}"#)
            .unwrap_err();
        assert!(matches!(&e, IngestError::Schema { path, .. } if path == "images[0].instances[0].keypoints[0].y"));
    }
}
