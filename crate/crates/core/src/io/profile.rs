// SPDX-License-Identifier: Apache-2.0

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, IngestError, Result};
use crate::metrics::OksConstants;

const COCO17: &str = include_str!("../../profiles/coco17.json");
const LSP14: &str = include_str!("../../profiles/lsp14.json");

/// Dataset-level keypoint conventions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetProfile {
    pub name: String,
    #[serde(rename = "K")]
    pub num_keypoints: usize,
    pub keypoint_names: Vec<String>,
    pub oks_kappas: Vec<f64>,
    pub torso_endpoints: (usize, usize),
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flip_pairs: Option<Vec<(usize, usize)>>,
}

impl DatasetProfile {
    pub fn from_json(text: &str) -> Result<Self> {
        let p: DatasetProfile =
            serde_json::from_str(text).map_err(|e| IngestError::Json(e.to_string()))?;
        p.validate()?;
        Ok(p)
    }

    pub fn builtin(name: &str) -> Option<Self> {
        let text = match name {
            "coco17" | "coco" => COCO17,
            "lsp14" | "lsp" => LSP14,
            _ => return None,
        };
        Some(Self::from_json(text).expect("built-in profile is valid"))
    }

    pub fn coco17() -> Self {
        Self::builtin("coco17").expect("built-in")
    }

    /// A built-in profile name or a path to a profile JSON file.
    pub fn resolve(name_or_path: &str) -> Result<Self> {
        if let Some(p) = Self::builtin(name_or_path) {
            return Ok(p);
        }
        let text = std::fs::read_to_string(Path::new(name_or_path)).map_err(|e| {
            Error::Config(format!("profile {name_or_path:?} is neither built-in nor readable: {e}"))
        })?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.num_keypoints;
        if k == 0 {
            return Err(Error::Config(format!("profile {}: K must be >= 1", self.name)));
        }
        if self.keypoint_names.len() != k || self.oks_kappas.len() != k {
            return Err(Error::Config(format!(
                "profile {}: keypoint_names and oks_kappas must have K={k} entries",
                self.name
            )));
        }
        let (a, b) = self.torso_endpoints;
        let pairs = self.flip_pairs.iter().flatten().copied();
        if a >= k || b >= k || pairs.into_iter().any(|(x, y)| x >= k || y >= k) {
            return Err(Error::Config(format!("profile {}: keypoint index out of range", self.name)));
        }
        OksConstants::new(self.oks_kappas.clone())?;
        Ok(())
    }

    pub fn oks_constants(&self) -> OksConstants {
        OksConstants::new(self.oks_kappas.clone()).expect("validated profile")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_load() {
        let c = DatasetProfile::coco17();
        assert_eq!(c.num_keypoints, 17);
        for (a, b) in c.oks_kappas.iter().zip(OksConstants::coco().kappas()) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(c.keypoint_names[c.torso_endpoints.0], "left_shoulder");
        assert_eq!(c.keypoint_names[c.torso_endpoints.1], "right_hip");
        let l = DatasetProfile::builtin("lsp14").unwrap();
        assert_eq!(l.keypoint_names[l.torso_endpoints.0], "left_shoulder");
        assert_eq!(l.keypoint_names[l.torso_endpoints.1], "right_hip");
        assert!(DatasetProfile::builtin("nope").is_none());
    }

    #[test]
    fn invalid_profiles_rejected() {
        let bad = r#"{"name":"x","K":2,"keypoint_names":["a"],"oks_kappas":[0.1,0.1],"torso_endpoints":[0,1]}"#;
        assert!(DatasetProfile::from_json(bad).is_err());
        let bad = r#"{"name":"x","K":2,"keypoint_names":["a","b"],"oks_kappas":[0.1,0.1],"torso_endpoints":[0,2]}"#;
        assert!(DatasetProfile::from_json(bad).is_err());
        let ok = r#"{"name":"x","K":2,"keypoint_names":["a","b"],"oks_kappas":[0.1,0.1],"torso_endpoints":[0,1]}"#;
        assert!(DatasetProfile::from_json(ok).unwrap().flip_pairs.is_none());
    }
}
