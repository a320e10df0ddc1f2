// SPDX-License-Identifier: Apache-2.0

//! Binary map-stack files.
//!
//! Layout, all integers and floats little-endian:
//!
//! | offset | size | field                                         |
//! |--------|------|-----------------------------------------------|
//! | 0      | 4    | magic `CLM1`                                  |
//! | 4      | 4    | version (u32, currently 1)                    |
//! | 8      | 4    | K, keypoint count (u32)                       |
//! | 12     | 4    | grid width W' (u32)                           |
//! | 16     | 4    | grid height H' (u32)                          |
//! | 20     | 4    | stride S (u32)                                |
//! | 24     | 4    | norm mode (u32, 0 squared, 1 literal)         |
//! | 28     | ...  | 3K planes of W'*H' f32: heatmaps, y, x offsets |
//!
//! Planes are row-major with y outer. Values are stored as f32; a keypoint is
//! marked invalid on read when its heatmap plane is all zero.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, FormatError, Result};
use crate::types::{GridSpec, NormMode, TargetMaps};

pub const MAGIC: [u8; 4] = *b"CLM1";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 28;

/// Serializes `maps` into the file layout.
pub fn encode_map_bytes(maps: &TargetMaps) -> Vec<u8> {
    let grid = maps.grid();
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * maps.as_slice().len());
    out.extend_from_slice(&MAGIC);
    for field in [
        VERSION,
        maps.num_keypoints() as u32,
        grid.grid_width() as u32,
        grid.grid_height() as u32,
        grid.stride(),
        maps.norm_mode().flag(),
    ] {
        out.extend_from_slice(&field.to_le_bytes());
    }
    for &v in maps.as_slice() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    out
}

pub fn write_maps<W: Write>(maps: &TargetMaps, mut dest: W) -> std::io::Result<()> {
    dest.write_all(&encode_map_bytes(maps))
}

fn u32_at(bytes: &[u8], offset: usize) -> u32 {
    u32::from_le_bytes(bytes[offset..offset + 4].try_into().expect("4-byte slice"))
}

/// Parses a complete map file image. Nothing is returned unless the whole
/// buffer validates.
pub fn decode_map_bytes(bytes: &[u8]) -> Result<TargetMaps, FormatError> {
    if bytes.len() < 4 {
        return Err(FormatError::Truncated { expected: HEADER_LEN, actual: bytes.len() });
    }
    let magic: [u8; 4] = bytes[..4].try_into().expect("4-byte slice");
    if magic != MAGIC {
        return Err(FormatError::BadMagic { found: magic });
    }
    if bytes.len() < HEADER_LEN {
        return Err(FormatError::Truncated { expected: HEADER_LEN, actual: bytes.len() });
    }
    let version = u32_at(bytes, 4);
    if version != VERSION {
        return Err(FormatError::UnsupportedVersion { found: version, supported: VERSION });
    }
    let k = u32_at(bytes, 8) as usize;
    let gw = u32_at(bytes, 12);
    let gh = u32_at(bytes, 16);
    let stride = u32_at(bytes, 20);
    let flag = u32_at(bytes, 24);
    let norm_mode = NormMode::from_flag(flag)
        .ok_or_else(|| FormatError::InvalidHeader(format!("unknown norm mode flag {flag}")))?;
    if k == 0 || gw == 0 || gh == 0 || stride == 0 {
        return Err(FormatError::InvalidHeader(format!(
            "zero-sized field: K={k}, W'={gw}, H'={gh}, S={stride}"
        )));
    }
    let too_big = || FormatError::InvalidHeader("declared sizes overflow".into());
    let width = gw.checked_mul(stride).ok_or_else(too_big)?;
    let height = gh.checked_mul(stride).ok_or_else(too_big)?;
    let values = (gw as usize)
        .checked_mul(gh as usize)
        .and_then(|c| c.checked_mul(3 * k))
        .ok_or_else(too_big)?;
    let expected = values
        .checked_mul(4)
        .and_then(|n| n.checked_add(HEADER_LEN))
        .ok_or_else(too_big)?;
    if bytes.len() < expected {
        return Err(FormatError::Truncated { expected, actual: bytes.len() });
    }
    if bytes.len() > expected {
        return Err(FormatError::TrailingBytes { extra: bytes.len() - expected });
    }
    let grid = GridSpec::new(width, height, stride)
        .map_err(|e| FormatError::InvalidHeader(e.to_string()))?;
    let data: Vec<f64> = bytes[HEADER_LEN..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4-byte chunk")) as f64)
        .collect();
    let plane = grid.cells();
    let valid = (0..k)
        .map(|i| data[i * plane..(i + 1) * plane].iter().any(|v| *v != 0.0))
        .collect();
    TargetMaps::from_planes(grid, k, norm_mode, data, valid)
        .map_err(|e| FormatError::InvalidHeader(e.to_string()))
}

pub fn read_maps<R: Read>(mut source: R) -> Result<TargetMaps> {
    let mut buf = Vec::new();
    source.read_to_end(&mut buf)?;
    Ok(decode_map_bytes(&buf)?)
}

pub fn load_maps(path: &Path) -> Result<TargetMaps> {
    let bytes = std::fs::read(path)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
    Ok(decode_map_bytes(&bytes)?)
}

/// Atomically writes `maps` to `path`.
pub fn save_maps(maps: &TargetMaps, path: &Path) -> Result<()> {
    super::write_atomic(path, &encode_map_bytes(maps))?;
    Ok(())
}
