// SPDX-License-Identifier: Apache-2.0

//! Keypoint <-> map-stack conversion.
//!
//! Encoding writes one sparse heatmap and two offsetmaps per keypoint. The
//! heatmap value at a cell is `exp(-D / (2 sigma^2))` where `D` is the
//! (squared, by default) distance from the cell's patch center to the keypoint;
//! the offsetmaps hold the displacement from the patch center to the keypoint
//! in stride units, at every cell.
//!
//! Decoding collects every cell whose activation reaches `tau`, lets each one
//! propose `center + offset * S`, and returns the activation-weighted mean of
//! the proposals. When nothing reaches `tau` the single argmax cell is used.

use crate::error::Result;
use crate::types::{
    CodecConfig, DecodeDiagnostics, DecodedPose, GridSpec, NormMode, Point, PoseInstance,
    TargetMaps,
};

/// Heatmap kernel for a center-to-keypoint displacement `(dx, dy)`.
#[inline]
pub fn heatmap_value(dx: f64, dy: f64, sigma: f64, mode: NormMode) -> f64 {
    let sq = dx * dx + dy * dy;
    let d = match mode {
        NormMode::SquaredDistance => sq,
        NormMode::LiteralL2 => sq.sqrt(),
    };
    (-d / (2.0 * sigma * sigma)).exp()
}

/// One heatmap plane per keypoint. Unlabeled keypoints get an all-zero plane.
pub fn encode_heatmaps(
    pose: &PoseInstance,
    grid: &GridSpec,
    config: &CodecConfig,
) -> Result<Vec<Vec<f64>>> {
    config.validate()?;
    pose.validate_in(grid)?;
    let (gw, gh) = (grid.grid_width(), grid.grid_height());
    Ok(pose
        .keypoints
        .iter()
        .map(|kp| {
            let mut plane = vec![0.0; gw * gh];
            if !kp.is_labeled() {
                return plane;
            }
            for cy in 0..gh {
                let dy = grid.axis_center(cy) - kp.y;
                for cx in 0..gw {
                    let dx = grid.axis_center(cx) - kp.x;
                    plane[cy * gw + cx] = heatmap_value(dx, dy, config.sigma, config.norm_mode);
                }
            }
            plane
        })
        .collect())
}

/// `2K` offset planes: the `K` y-planes followed by the `K` x-planes.
pub fn encode_offsetmaps(pose: &PoseInstance, grid: &GridSpec) -> Result<Vec<Vec<f64>>> {
    pose.validate_in(grid)?;
    let (gw, gh) = (grid.grid_width(), grid.grid_height());
    let s = grid.stride() as f64;
    let mut ys = Vec::with_capacity(pose.keypoints.len());
    let mut xs = Vec::with_capacity(pose.keypoints.len());
    for kp in &pose.keypoints {
        let mut yp = vec![0.0; gw * gh];
        let mut xp = vec![0.0; gw * gh];
        if kp.is_labeled() {
            for cy in 0..gh {
                let oy = (kp.y - grid.axis_center(cy)) / s;
                for cx in 0..gw {
                    yp[cy * gw + cx] = oy;
                    xp[cy * gw + cx] = (kp.x - grid.axis_center(cx)) / s;
                }
            }
        }
        ys.push(yp);
        xs.push(xp);
    }
    ys.extend(xs);
    Ok(ys)
}

/// Full target stack for one pose.
pub fn encode(pose: &PoseInstance, grid: &GridSpec, config: &CodecConfig) -> Result<TargetMaps> {
    let heat = encode_heatmaps(pose, grid, config)?;
    let offs = encode_offsetmaps(pose, grid)?;
    let k = pose.keypoints.len();
    let mut data = Vec::with_capacity(3 * k * grid.cells());
    for plane in heat.into_iter().chain(offs) {
        data.extend(plane);
    }
    let valid = pose.keypoints.iter().map(|kp| kp.is_labeled()).collect();
    TargetMaps::from_planes(*grid, k, config.norm_mode, data, valid)
}

/// Index of the largest finite value; ties go to the smallest row-major index,
/// i.e. the smallest `(y, x)`. Returns 0 for planes without a finite value.
pub(crate) fn argmax_cell(plane: &[f64]) -> usize {
    let mut best = 0;
    let mut best_val = f64::NEG_INFINITY;
    for (i, &v) in plane.iter().enumerate() {
        if v > best_val {
            best = i;
            best_val = v;
        }
    }
    best
}

fn propose(maps: &TargetMaps, k: usize, cell: usize) -> Point {
    let grid = maps.grid();
    let gw = grid.grid_width();
    let center = grid.patch_center(cell % gw, cell / gw);
    let s = grid.stride() as f64;
    let p = Point::new(
        center.x + maps.x_offsets(k)[cell] * s,
        center.y + maps.y_offsets(k)[cell] * s,
    );
    if p.x.is_finite() && p.y.is_finite() {
        p
    } else {
        center
    }
}

/// Composite decode of every keypoint in `maps`.
pub fn decode(maps: &TargetMaps, config: &CodecConfig) -> DecodedPose {
    let k_count = maps.num_keypoints();
    let mut out = DecodedPose {
        coords: Vec::with_capacity(k_count),
        confidence: Vec::with_capacity(k_count),
        diagnostics: Vec::with_capacity(k_count),
    };
    for k in 0..k_count {
        let heat = maps.heatmap(k);
        let (mut wsum, mut sx, mut sy, mut n) = (0.0, 0.0, 0.0, 0usize);
        for (cell, &a) in heat.iter().enumerate() {
            if a >= config.tau {
                let p = propose(maps, k, cell);
                wsum += a;
                sx += a * p.x;
                sy += a * p.y;
                n += 1;
            }
        }
        if n > 0 {
            out.coords.push(Point::new(sx / wsum, sy / wsum));
            out.confidence.push(wsum / n as f64);
            out.diagnostics.push(DecodeDiagnostics {
                n_cells: n,
                used_fallback: false,
            });
        } else {
            let cell = argmax_cell(heat);
            let a = heat.get(cell).copied().unwrap_or(0.0);
            out.coords.push(propose(maps, k, cell));
            out.confidence.push(if a.is_finite() { a } else { 0.0 });
            out.diagnostics.push(DecodeDiagnostics {
                n_cells: 0,
                used_fallback: true,
            });
        }
    }
    out
}

/// Heatmap-only baseline: the patch center of each plane's argmax cell.
pub fn argmax_decode(maps: &TargetMaps) -> DecodedPose {
    let grid = maps.grid();
    let gw = grid.grid_width();
    let mut out = DecodedPose::default();
    for k in 0..maps.num_keypoints() {
        let heat = maps.heatmap(k);
        let cell = argmax_cell(heat);
        let a = heat.get(cell).copied().unwrap_or(0.0);
        out.coords.push(grid.patch_center(cell % gw, cell / gw));
        out.confidence.push(if a.is_finite() { a } else { 0.0 });
        out.diagnostics.push(DecodeDiagnostics {
            n_cells: 1,
            used_fallback: false,
        });
    }
    out
}
