// SPDX-License-Identifier: Apache-2.0

//! Grid geometry and the value types shared by the codec, loss, metrics and
//! experiment modules.
//!
//! Coordinates are continuous pixel positions with the origin at the top-left
//! image corner. Grid cells are 0-based; cell `(cx, cy)` covers the pixel patch
//! `[cx*S, (cx+1)*S) x [cy*S, (cy+1)*S)` and its center sits at
//! `((cx + C) * S, (cy + C) * S)` with `C = 0.5`.

use crate::error::{Error, Result};

/// Deviation constant placing a cell's representative point at the patch center.
pub const DEFAULT_DEVIATION: f64 = 0.5;

/// Image geometry plus the downsampling stride.
///
/// The grid dimensions are always derived from `(width, height, stride)` so
/// they cannot drift out of sync with the image size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    width: u32,
    height: u32,
    stride: u32,
    deviation: f64,
}

impl GridSpec {
    /// Derives the grid for a `width x height` image at the given stride.
    pub fn new(width: u32, height: u32, stride: u32) -> Result<Self> {
        if stride == 0 {
            return Err(Error::Config("stride must be at least 1".into()));
        }
        if stride > width.min(height) {
            return Err(Error::Config(format!(
                "stride {stride} exceeds the smaller image side of {width}x{height}"
            )));
        }
        Ok(GridSpec {
            width,
            height,
            stride,
            deviation: DEFAULT_DEVIATION,
        })
    }

    /// Overrides the deviation constant. Only useful for experiments; every
    /// default path uses 0.5.
    pub fn with_deviation(mut self, deviation: f64) -> Result<Self> {
        if !deviation.is_finite() || !(0.0..1.0).contains(&deviation) {
            return Err(Error::Config(format!(
                "deviation {deviation} must lie in [0, 1)"
            )));
        }
        self.deviation = deviation;
        Ok(self)
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn stride(&self) -> u32 {
        self.stride
    }

    pub fn deviation(&self) -> f64 {
        self.deviation
    }

    /// `floor(W / S)`
    pub fn grid_width(&self) -> usize {
        (self.width / self.stride) as usize
    }

    /// `floor(H / S)`
    pub fn grid_height(&self) -> usize {
        (self.height / self.stride) as usize
    }

    /// Cells per plane.
    pub fn cells(&self) -> usize {
        self.grid_width() * self.grid_height()
    }

    /// Width in pixels of the area tiled by whole cells.
    pub fn covered_width(&self) -> f64 {
        (self.grid_width() as u64 * self.stride as u64) as f64
    }

    pub fn covered_height(&self) -> f64 {
        (self.grid_height() as u64 * self.stride as u64) as f64
    }

    /// Row-major index of a cell, y outer.
    #[inline]
    pub fn cell_index(&self, cx: usize, cy: usize) -> usize {
        cy * self.grid_width() + cx
    }

    /// Image-space center of cell `(cx, cy)`.
    ///
    /// Panics when the cell lies outside the grid.
    #[inline]
    pub fn patch_center(&self, cx: usize, cy: usize) -> Point {
        assert!(
            cx < self.grid_width() && cy < self.grid_height(),
            "cell ({cx}, {cy}) outside {}x{} grid",
            self.grid_width(),
            self.grid_height()
        );
        Point {
            x: self.axis_center(cx),
            y: self.axis_center(cy),
        }
    }

    /// Center coordinate along either axis for cell index `c`.
    #[inline]
    pub(crate) fn axis_center(&self, c: usize) -> f64 {
        (c as f64 + self.deviation) * self.stride as f64
    }

    /// Whether `(x, y)` lies inside the image bounds `[0, W) x [0, H)`.
    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= 0.0 && y >= 0.0 && x < self.width as f64 && y < self.height as f64
    }
}

/// Free-function form of [`GridSpec::new`].
pub fn derive_grid(width: u32, height: u32, stride: u32) -> Result<GridSpec> {
    GridSpec::new(width, height, stride)
}

#[derive(Debug, Clone, Copy, PartialEq, Default, serde::Serialize, serde::Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// COCO-style visibility flag. Numeric values match the COCO `v` field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Visibility {
    Unlabeled = 0,
    Occluded = 1,
    Visible = 2,
}

impl Visibility {
    pub fn is_labeled(self) -> bool {
        !matches!(self, Visibility::Unlabeled)
    }

    pub fn from_code(v: u8) -> Option<Self> {
        match v {
            0 => Some(Visibility::Unlabeled),
            1 => Some(Visibility::Occluded),
            2 => Some(Visibility::Visible),
            _ => None,
        }
    }

    pub fn code(self) -> u8 {
        self as u8
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Keypoint {
    pub x: f64,
    pub y: f64,
    pub visibility: Visibility,
}

impl Keypoint {
    pub fn visible(x: f64, y: f64) -> Self {
        Keypoint {
            x,
            y,
            visibility: Visibility::Visible,
        }
    }

    pub fn unlabeled() -> Self {
        Keypoint {
            x: 0.0,
            y: 0.0,
            visibility: Visibility::Unlabeled,
        }
    }

    pub fn is_labeled(&self) -> bool {
        self.visibility.is_labeled()
    }

    pub fn point(&self) -> Point {
        Point::new(self.x, self.y)
    }
}

/// Axis-aligned box in pixels, corners inclusive of `(x1, y1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeadBox {
    pub x1: f64,
    pub y1: f64,
    pub x2: f64,
    pub y2: f64,
}

impl HeadBox {
    pub fn diagonal(&self) -> f64 {
        (self.x2 - self.x1).hypot(self.y2 - self.y1)
    }
}

/// Per-instance metadata used to normalize distances in the metrics.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct NormMeta {
    pub head_box: Option<HeadBox>,
    pub torso_endpoints: Option<(usize, usize)>,
    /// Object area in square pixels (OKS scale).
    pub area: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PoseInstance {
    pub keypoints: Vec<Keypoint>,
    pub norm_meta: NormMeta,
}

impl PoseInstance {
    pub fn new(keypoints: Vec<Keypoint>) -> Self {
        PoseInstance {
            keypoints,
            norm_meta: NormMeta::default(),
        }
    }

    pub fn num_keypoints(&self) -> usize {
        self.keypoints.len()
    }

    pub fn num_labeled(&self) -> usize {
        self.keypoints.iter().filter(|k| k.is_labeled()).count()
    }

    /// Checks that every labeled keypoint lies inside the image of `grid`.
    pub fn validate_in(&self, grid: &GridSpec) -> Result<()> {
        if self.keypoints.is_empty() {
            return Err(Error::Contract("pose has no keypoints".into()));
        }
        for (k, kp) in self.keypoints.iter().enumerate() {
            if kp.is_labeled() && !grid.contains(kp.x, kp.y) {
                return Err(Error::Contract(format!(
                    "keypoint {k} at ({}, {}) lies outside the {}x{} image",
                    kp.x,
                    kp.y,
                    grid.width(),
                    grid.height()
                )));
            }
        }
        Ok(())
    }
}

/// How the distance enters the heatmap kernel `exp(-D / (2 sigma^2))`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NormMode {
    /// `D = |t(p) - g|^2`, the conventional Gaussian.
    #[default]
    SquaredDistance,
    /// `D = |t(p) - g|`, the kernel with an unsquared norm.
    LiteralL2,
}

impl NormMode {
    pub fn flag(self) -> u32 {
        match self {
            NormMode::SquaredDistance => 0,
            NormMode::LiteralL2 => 1,
        }
    }

    pub fn from_flag(flag: u32) -> Option<Self> {
        match flag {
            0 => Some(NormMode::SquaredDistance),
            1 => Some(NormMode::LiteralL2),
            _ => None,
        }
    }
}

/// Which heatmap defines the offset-regression region.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RegionSource {
    #[default]
    GroundTruth,
    Predicted,
    /// Elementwise max of ground truth and prediction.
    Union,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CodecConfig {
    /// Heatmap spread in pixels.
    pub sigma: f64,
    /// Activation threshold for the decode candidates and the loss region.
    pub tau: f64,
    pub norm_mode: NormMode,
    pub region_source: RegionSource,
}

impl Default for CodecConfig {
    fn default() -> Self {
        CodecConfig {
            sigma: 16.0,
            tau: 0.6,
            norm_mode: NormMode::SquaredDistance,
            region_source: RegionSource::GroundTruth,
        }
    }
}

impl CodecConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::Config(format!("sigma must be > 0, got {}", self.sigma)));
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return Err(Error::Config(format!("tau must lie in (0, 1], got {}", self.tau)));
        }
        Ok(())
    }
}

/// The `3K` map planes for one instance: `K` heatmaps, then `K` y-offsetmaps,
/// then `K` x-offsetmaps. Each plane is row-major with y outer.
///
/// Offsets are stored in stride units. `valid[k]` is false for keypoints that
/// were unlabeled at encode time; such planes are all zero and are skipped by
/// the losses.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetMaps {
    grid: GridSpec,
    num_keypoints: usize,
    norm_mode: NormMode,
    data: Vec<f64>,
    valid: Vec<bool>,
}

impl TargetMaps {
    /// All-zero stack with every keypoint marked valid.
    pub fn zeros(grid: GridSpec, num_keypoints: usize, norm_mode: NormMode) -> Self {
        TargetMaps {
            grid,
            num_keypoints,
            norm_mode,
            data: vec![0.0; 3 * num_keypoints * grid.cells()],
            valid: vec![true; num_keypoints],
        }
    }

    /// Builds a stack from raw plane data laid out as described on the type.
    pub fn from_planes(
        grid: GridSpec,
        num_keypoints: usize,
        norm_mode: NormMode,
        data: Vec<f64>,
        valid: Vec<bool>,
    ) -> Result<Self> {
        let expected = 3 * num_keypoints * grid.cells();
        if data.len() != expected {
            return Err(Error::Contract(format!(
                "plane data has {} values, expected {expected}",
                data.len()
            )));
        }
        if valid.len() != num_keypoints {
            return Err(Error::Contract(format!(
                "validity mask has {} entries, expected {num_keypoints}",
                valid.len()
            )));
        }
        Ok(TargetMaps {
            grid,
            num_keypoints,
            norm_mode,
            data,
            valid,
        })
    }

    /// Same shape, all values zero, same validity mask.
    pub fn zeros_like(&self) -> Self {
        TargetMaps {
            data: vec![0.0; self.data.len()],
            ..self.clone()
        }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn num_keypoints(&self) -> usize {
        self.num_keypoints
    }

    pub fn norm_mode(&self) -> NormMode {
        self.norm_mode
    }

    pub fn plane_len(&self) -> usize {
        self.grid.cells()
    }

    pub fn num_planes(&self) -> usize {
        3 * self.num_keypoints
    }

    pub fn valid(&self) -> &[bool] {
        &self.valid
    }

    pub fn is_valid(&self, k: usize) -> bool {
        self.valid[k]
    }

    pub fn set_valid(&mut self, k: usize, valid: bool) {
        self.valid[k] = valid;
    }

    pub fn num_valid(&self) -> usize {
        self.valid.iter().filter(|v| **v).count()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn plane(&self, i: usize) -> &[f64] {
        let n = self.plane_len();
        &self.data[i * n..(i + 1) * n]
    }

    pub fn plane_mut(&mut self, i: usize) -> &mut [f64] {
        let n = self.plane_len();
        &mut self.data[i * n..(i + 1) * n]
    }

    pub fn heatmap(&self, k: usize) -> &[f64] {
        self.plane(k)
    }

    pub fn heatmap_mut(&mut self, k: usize) -> &mut [f64] {
        self.plane_mut(k)
    }

    pub fn y_offsets(&self, k: usize) -> &[f64] {
        self.plane(self.num_keypoints + k)
    }

    pub fn y_offsets_mut(&mut self, k: usize) -> &mut [f64] {
        let i = self.num_keypoints + k;
        self.plane_mut(i)
    }

    pub fn x_offsets(&self, k: usize) -> &[f64] {
        self.plane(2 * self.num_keypoints + k)
    }

    pub fn x_offsets_mut(&mut self, k: usize) -> &mut [f64] {
        let i = 2 * self.num_keypoints + k;
        self.plane_mut(i)
    }

    /// Errors unless `other` has the same grid dimensions and keypoint count.
    pub fn check_compatible(&self, other: &TargetMaps) -> Result<()> {
        if self.num_keypoints != other.num_keypoints {
            return Err(Error::Contract(format!(
                "keypoint count mismatch: {} vs {}",
                self.num_keypoints, other.num_keypoints
            )));
        }
        let (a, b) = (&self.grid, &other.grid);
        if a.grid_width() != b.grid_width()
            || a.grid_height() != b.grid_height()
            || a.stride() != b.stride()
        {
            return Err(Error::Contract(format!(
                "grid mismatch: {}x{} @ S={} vs {}x{} @ S={}",
                a.grid_width(),
                a.grid_height(),
                a.stride(),
                b.grid_width(),
                b.grid_height(),
                b.stride()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct DecodeDiagnostics {
    /// Cells whose activation reached the threshold.
    pub n_cells: usize,
    /// True when no cell reached the threshold and the argmax cell was used.
    pub used_fallback: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DecodedPose {
    pub coords: Vec<Point>,
    pub confidence: Vec<f64>,
    pub diagnostics: Vec<DecodeDiagnostics>,
}

impl DecodedPose {
    pub fn num_keypoints(&self) -> usize {
        self.coords.len()
    }

    /// Mean per-keypoint confidence, used as an instance score.
    pub fn mean_confidence(&self) -> f64 {
        if self.confidence.is_empty() {
            return 0.0;
        }
        self.confidence.iter().sum::<f64>() / self.confidence.len() as f64
    }

    /// Wraps plain coordinates, e.g. predictions read from a file.
    pub fn from_coords(coords: Vec<Point>) -> Self {
        let n = coords.len();
        DecodedPose {
            coords,
            confidence: vec![1.0; n],
            diagnostics: vec![
                DecodeDiagnostics {
                    n_cells: 1,
                    used_fallback: false,
                };
                n
            ],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn derive_grid_examples() {
        let g = derive_grid(256, 256, 16).unwrap();
        assert_eq!((g.grid_width(), g.grid_height()), (16, 16));
        let g = derive_grid(64, 64, 64).unwrap();
        assert_eq!((g.grid_width(), g.grid_height()), (1, 1));
        let g = derive_grid(100, 60, 16).unwrap();
        assert_eq!((g.grid_width(), g.grid_height()), (100 / 16, 60 / 16));
        assert_eq!((g.grid_width(), g.grid_height()), (6, 3));
        assert_eq!(g.deviation(), 0.5);
    }

    #[test]
    fn derive_grid_rejects_bad_strides() {
        assert!(matches!(derive_grid(64, 64, 0), Err(Error::Config(_))));
        assert!(matches!(derive_grid(64, 32, 33), Err(Error::Config(_))));
        assert!(derive_grid(64, 32, 32).is_ok());
    }

    #[test]
    fn patch_center_examples() {
        let g = derive_grid(256, 256, 16).unwrap();
        assert_eq!(g.patch_center(0, 0), Point::new(8.0, 8.0));
        assert_eq!(g.patch_center(2, 3), Point::new(40.0, 56.0));
        let g1 = derive_grid(4, 4, 1).unwrap();
        assert_eq!(g1.patch_center(0, 0), Point::new(0.5, 0.5));
    }

    #[test]
    #[should_panic(expected = "outside")]
    fn patch_center_out_of_grid_panics() {
        let g = derive_grid(100, 60, 16).unwrap();
        g.patch_center(0, 3);
    }

    #[test]
    fn target_maps_plane_layout() {
        let g = derive_grid(32, 16, 16).unwrap();
        let mut m = TargetMaps::zeros(g, 2, NormMode::SquaredDistance);
        assert_eq!(m.num_planes(), 6);
        m.y_offsets_mut(1)[1] = 3.0;
        m.x_offsets_mut(0)[0] = 4.0;
        // planes: H0 H1 Y0 Y1 X0 X1, two cells each
        assert_eq!(m.as_slice()[3 * 2 + 1], 3.0);
        assert_eq!(m.as_slice()[4 * 2], 4.0);
        assert!(TargetMaps::from_planes(g, 2, NormMode::SquaredDistance, vec![0.0; 11], vec![true; 2]).is_err());
    }

    proptest! {
        #[test]
        fn patch_centers_inside_covered_area_and_spaced_by_stride(
            w in 1u32..300, h in 1u32..300, s in 1u32..40
        ) {
            prop_assume!(s <= w.min(h));
            let g = derive_grid(w, h, s).unwrap();
            prop_assert_eq!(g, derive_grid(w, h, s).unwrap());
            for cy in 0..g.grid_height() {
                for cx in 0..g.grid_width() {
                    let c = g.patch_center(cx, cy);
                    prop_assert!(c.x > 0.0 && c.x < g.covered_width());
                    prop_assert!(c.y > 0.0 && c.y < g.covered_height());
                    if cx + 1 < g.grid_width() {
                        let n = g.patch_center(cx + 1, cy);
                        prop_assert_eq!(n.x - c.x, s as f64);
                        prop_assert_eq!(n.y, c.y);
                    }
                    if cy + 1 < g.grid_height() {
                        let n = g.patch_center(cx, cy + 1);
                        prop_assert_eq!(n.y - c.y, s as f64);
                    }
                }
            }
        }
    }
}
