// SPDX-License-Identifier: Apache-2.0

//! On-disk formats: binary map stacks, annotation and prediction JSON, and
//! dataset profiles.

pub mod annotations;
pub mod maps;
pub mod predictions;
pub mod profile;

use std::io::Write;
use std::path::Path;

pub use annotations::{ingest_coco, ingest_simple, write_simple, AnnotatedImage, AnnotationSet};
pub use maps::{decode_map_bytes, encode_map_bytes, load_maps, read_maps, save_maps, write_maps};
pub use predictions::{ingest_predictions, write_predictions, PredictionSet};
pub use profile::DatasetProfile;

/// Writes `bytes` to `path` via a temporary file in the same directory, so
/// readers never observe a partially written file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        tmp.as_file().set_permissions(std::fs::Permissions::from_mode(0o644))?;
    }
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

/// Helpers for walking `serde_json::Value` trees with path-qualified errors.
pub(crate) mod json {
    use serde_json::{Map, Value};

    use crate::error::IngestError;

    pub fn parse(text: &str) -> Result<Value, IngestError> {
        serde_json::from_str(text).map_err(|e| IngestError::Json(e.to_string()))
    }

    pub fn object<'a>(v: &'a Value, path: &str) -> Result<&'a Map<String, Value>, IngestError> {
        v.as_object()
            .ok_or_else(|| IngestError::schema(path, "expected an object"))
    }

    pub fn array<'a>(v: &'a Value, path: &str) -> Result<&'a Vec<Value>, IngestError> {
        v.as_array()
            .ok_or_else(|| IngestError::schema(path, "expected an array"))
    }

    pub fn field<'a>(
        obj: &'a Map<String, Value>,
        key: &str,
        path: &str,
    ) -> Result<&'a Value, IngestError> {
        obj.get(key)
            .ok_or_else(|| IngestError::schema(format!("{path}.{key}"), "missing field"))
    }

    pub fn f64_at(v: &Value, path: &str) -> Result<f64, IngestError> {
        v.as_f64()
            .ok_or_else(|| IngestError::schema(path, "expected a number"))
    }

    pub fn u64_at(v: &Value, path: &str) -> Result<u64, IngestError> {
        v.as_u64()
            .ok_or_else(|| IngestError::schema(path, "expected a non-negative integer"))
    }

    pub fn opt_field<'a>(obj: &'a Map<String, Value>, key: &str) -> Option<&'a Value> {
        obj.get(key).filter(|v| !v.is_null())
    }
}
