// SPDX-License-Identifier: Apache-2.0

//! Ground-truth annotation files.
//!
//! The simple format carries single- or multi-person poses per image:
//!
//! ```json
//! {
//!   "profile": "lsp14",
//!   "images": [
//!     { "width": 256, "height": 256,
//!       "instances": [
//!         { "keypoints": [{"x": 10.5, "y": 20.0, "v": 2}],
//!           "head_box": [x1, y1, x2, y2], "area": 4096.0, "torso": [9, 2] } ] } ]
//! }
//! ```
//!
//! `head_box`, `area`, `torso` and the per-image `id` are optional. COCO
//! person-keypoint files are read-only; only the keypoints task fields are used.

use std::collections::HashMap;

use serde::Serialize;
use serde_json::Value;

use super::json;
use super::profile::DatasetProfile;
use crate::error::{Error, IngestError, Result};
use crate::types::{HeadBox, Keypoint, NormMeta, PoseInstance, Visibility};

#[derive(Debug, Clone, PartialEq)]
pub struct AnnotatedImage {
    pub id: Option<u64>,
    pub width: u32,
    pub height: u32,
    pub instances: Vec<PoseInstance>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnnotationSet {
    /// Profile name or path.
    pub profile: String,
    pub images: Vec<AnnotatedImage>,
}

impl AnnotationSet {
    /// Keypoint count shared by every instance, if any instance exists.
    pub fn num_keypoints(&self) -> Option<usize> {
        self.images
            .iter()
            .flat_map(|i| i.instances.first())
            .map(|p| p.num_keypoints())
            .next()
    }

    pub fn instances(&self) -> impl Iterator<Item = (&AnnotatedImage, &PoseInstance)> {
        self.images
            .iter()
            .flat_map(|img| img.instances.iter().map(move |p| (img, p)))
    }

    /// Checks that every instance has exactly the profile's K keypoints.
    pub fn check_profile(&self, profile: &DatasetProfile) -> Result<()> {
        for (i, img) in self.images.iter().enumerate() {
            for (j, inst) in img.instances.iter().enumerate() {
                if inst.num_keypoints() != profile.num_keypoints {
                    return Err(Error::Data(format!(
                        "images[{i}].instances[{j}] has {} keypoints, profile {} has K={}",
                        inst.num_keypoints(),
                        profile.name,
                        profile.num_keypoints
                    )));
                }
            }
        }
        Ok(())
    }

    /// Fills missing torso endpoints from the profile.
    pub fn apply_profile_defaults(&mut self, profile: &DatasetProfile) {
        for img in &mut self.images {
            for inst in &mut img.instances {
                inst.norm_meta.torso_endpoints.get_or_insert(profile.torso_endpoints);
            }
        }
    }
}

fn parse_visibility(v: &Value, path: &str) -> Result<Visibility, IngestError> {
    let code = json::u64_at(v, path)?;
    u8::try_from(code)
        .ok()
        .and_then(Visibility::from_code)
        .ok_or_else(|| IngestError::schema(path, format!("visibility {code} not in {{0, 1, 2}}")))
}

fn parse_dim(v: &Value, path: &str) -> Result<u32, IngestError> {
    let d = json::u64_at(v, path)?;
    u32::try_from(d)
        .ok()
        .filter(|d| *d > 0)
        .ok_or_else(|| IngestError::schema(path, format!("dimension {d} out of range")))
}

fn parse_simple_instance(v: &Value, path: &str) -> Result<PoseInstance, IngestError> {
    let obj = json::object(v, path)?;
    let kp_path = format!("{path}.keypoints");
    let kps = json::array(json::field(obj, "keypoints", path)?, &kp_path)?;
    let mut keypoints = Vec::with_capacity(kps.len());
    for (k, kv) in kps.iter().enumerate() {
        let p = format!("{kp_path}[{k}]");
        let o = json::object(kv, &p)?;
        keypoints.push(Keypoint {
            x: json::f64_at(json::field(o, "x", &p)?, &format!("{p}.x"))?,
            y: json::f64_at(json::field(o, "y", &p)?, &format!("{p}.y"))?,
            visibility: parse_visibility(json::field(o, "v", &p)?, &format!("{p}.v"))?,
        });
    }
    let mut meta = NormMeta::default();
    if let Some(hb) = json::opt_field(obj, "head_box") {
        let p = format!("{path}.head_box");
        let a = json::array(hb, &p)?;
        if a.len() != 4 {
            return Err(IngestError::schema(p, "expected [x1, y1, x2, y2]"));
        }
        let c = a
            .iter()
            .enumerate()
            .map(|(i, v)| json::f64_at(v, &format!("{p}[{i}]")))
            .collect::<Result<Vec<_>, _>>()?;
        meta.head_box = Some(HeadBox { x1: c[0], y1: c[1], x2: c[2], y2: c[3] });
    }
    if let Some(a) = json::opt_field(obj, "area") {
        meta.area = Some(json::f64_at(a, &format!("{path}.area"))?);
    }
    if let Some(t) = json::opt_field(obj, "torso") {
        let p = format!("{path}.torso");
        let a = json::array(t, &p)?;
        if a.len() != 2 {
            return Err(IngestError::schema(p, "expected two keypoint indices"));
        }
        let i0 = json::u64_at(&a[0], &format!("{p}[0]"))? as usize;
        let i1 = json::u64_at(&a[1], &format!("{p}[1]"))? as usize;
        if i0 >= keypoints.len() || i1 >= keypoints.len() {
            return Err(IngestError::schema(p, "index out of range"));
        }
        meta.torso_endpoints = Some((i0, i1));
    }
    Ok(PoseInstance { keypoints, norm_meta: meta })
}

/// Parses the simple poses format.
pub fn ingest_simple(text: &str) -> Result<AnnotationSet, IngestError> {
    let root = json::parse(text)?;
    let obj = json::object(&root, "$")?;
    let profile = json::field(obj, "profile", "$")?
        .as_str()
        .ok_or_else(|| IngestError::schema("profile", "expected a string"))?
        .to_string();
    let images_v = json::array(json::field(obj, "images", "$")?, "images")?;
    let mut images = Vec::with_capacity(images_v.len());
    let mut k_seen: Option<usize> = None;
    for (i, iv) in images_v.iter().enumerate() {
        let path = format!("images[{i}]");
        let io = json::object(iv, &path)?;
        let width = match io.get("width") {
            Some(v) => parse_dim(v, &format!("{path}.width"))?,
            None => return Err(IngestError::schema(format!("{path}.width"), "missing field")),
        };
        let height = match io.get("height") {
            Some(v) => parse_dim(v, &format!("{path}.height"))?,
            None => return Err(IngestError::schema(format!("{path}.height"), "missing field")),
        };
        let id = json::opt_field(io, "id")
            .map(|v| json::u64_at(v, &format!("{path}.id")))
            .transpose()?;
        let inst_path = format!("{path}.instances");
        let inst_v = json::array(json::field(io, "instances", &path)?, &inst_path)?;
        let mut instances = Vec::with_capacity(inst_v.len());
        for (j, v) in inst_v.iter().enumerate() {
            let p = format!("{inst_path}[{j}]");
            let inst = parse_simple_instance(v, &p)?;
            let k = inst.num_keypoints();
            if k == 0 {
                return Err(IngestError::schema(format!("{p}.keypoints"), "no keypoints"));
            }
            if *k_seen.get_or_insert(k) != k {
                return Err(IngestError::schema(
                    format!("{p}.keypoints"),
                    format!("{k} keypoints, earlier instances have {}", k_seen.unwrap()),
                ));
            }
            instances.push(inst);
        }
        images.push(AnnotatedImage { id, width, height, instances });
    }
    Ok(AnnotationSet { profile, images })
}

#[derive(Serialize)]
struct SimpleFile<'a> {
    profile: &'a str,
    images: Vec<SimpleImage>,
}

#[derive(Serialize)]
struct SimpleImage {
    #[serde(skip_serializing_if = "Option::is_none")]
    id: Option<u64>,
    width: u32,
    height: u32,
    instances: Vec<SimpleInstance>,
}

#[derive(Serialize)]
struct SimpleInstance {
    keypoints: Vec<SimpleKeypoint>,
    #[serde(skip_serializing_if = "Option::is_none")]
    head_box: Option<[f64; 4]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    area: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    torso: Option<[usize; 2]>,
}

#[derive(Serialize)]
struct SimpleKeypoint {
    x: f64,
    y: f64,
    v: u8,
}

/// Serializes `set` in the simple format; [`ingest_simple`] inverts it exactly.
pub fn write_simple(set: &AnnotationSet) -> String {
    let file = SimpleFile {
        profile: &set.profile,
        images: set
            .images
            .iter()
            .map(|img| SimpleImage {
                id: img.id,
                width: img.width,
                height: img.height,
                instances: img
                    .instances
                    .iter()
                    .map(|p| SimpleInstance {
                        keypoints: p
                            .keypoints
                            .iter()
                            .map(|k| SimpleKeypoint { x: k.x, y: k.y, v: k.visibility.code() })
                            .collect(),
                        head_box: p.norm_meta.head_box.map(|b| [b.x1, b.y1, b.x2, b.y2]),
                        area: p.norm_meta.area,
                        torso: p.norm_meta.torso_endpoints.map(|(a, b)| [a, b]),
                    })
                    .collect(),
            })
            .collect(),
    };
    let mut s = serde_json::to_string_pretty(&file).expect("serializable");
    s.push('\n');
    s
}

/// Reads a COCO person-keypoints file. Instances are grouped under their
/// image in the order the images are listed.
pub fn ingest_coco(text: &str, profile: &DatasetProfile) -> Result<AnnotationSet, IngestError> {
    let root = json::parse(text)?;
    let obj = json::object(&root, "$")?;
    let images_v = json::array(json::field(obj, "images", "$")?, "images")?;
    let mut images = Vec::with_capacity(images_v.len());
    let mut by_id = HashMap::new();
    for (i, iv) in images_v.iter().enumerate() {
        let path = format!("images[{i}]");
        let io = json::object(iv, &path)?;
        let id = json::u64_at(json::field(io, "id", &path)?, &format!("{path}.id"))?;
        let width = parse_dim(json::field(io, "width", &path)?, &format!("{path}.width"))?;
        let height = parse_dim(json::field(io, "height", &path)?, &format!("{path}.height"))?;
        by_id.insert(id, images.len());
        images.push(AnnotatedImage { id: Some(id), width, height, instances: Vec::new() });
    }
    let anns = json::array(json::field(obj, "annotations", "$")?, "annotations")?;
    for (i, av) in anns.iter().enumerate() {
        let path = format!("annotations[{i}]");
        let ao = json::object(av, &path)?;
        let annotation_id = json::u64_at(json::field(ao, "id", &path)?, &format!("{path}.id"))?;
        let ann_err = |message: String| IngestError::Annotation { annotation_id, message };
        let image_id = ao
            .get("image_id")
            .and_then(Value::as_u64)
            .ok_or_else(|| ann_err("missing or invalid image_id".into()))?;
        let slot = *by_id
            .get(&image_id)
            .ok_or_else(|| ann_err(format!("unknown image_id {image_id}")))?;
        let raw = ao
            .get("keypoints")
            .and_then(Value::as_array)
            .ok_or(IngestError::MissingKeypoints { annotation_id })?;
        if raw.len() % 3 != 0 || raw.len() / 3 != profile.num_keypoints {
            return Err(IngestError::KeypointCount {
                annotation_id,
                expected: profile.num_keypoints,
                found: raw.len() / 3,
            });
        }
        let mut keypoints = Vec::with_capacity(raw.len() / 3);
        for (k, t) in raw.chunks_exact(3).enumerate() {
            let num = |v: &Value| {
                v.as_f64()
                    .ok_or_else(|| ann_err(format!("keypoint {k}: non-numeric value")))
            };
            let (x, y, v) = (num(&t[0])?, num(&t[1])?, num(&t[2])?);
            let visibility = if v.fract() == 0.0 && (0.0..=2.0).contains(&v) {
                Visibility::from_code(v as u8).expect("0..=2")
            } else {
                return Err(ann_err(format!("keypoint {k}: visibility {v} not in {{0, 1, 2}}")));
            };
            keypoints.push(Keypoint { x, y, visibility });
        }
        let area = ao.get("area").and_then(Value::as_f64);
        images[slot].instances.push(PoseInstance {
            keypoints,
            norm_meta: NormMeta { area, ..NormMeta::default() },
        });
    }
    Ok(AnnotationSet { profile: profile.name.clone(), images })
}
