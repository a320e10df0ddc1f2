// SPDX-License-Identifier: Apache-2.0

//! Desk-scale experiments: seeded synthetic poses, post-encoding noise, direct
//! gradient-descent fitting of map planes, and the stride sweep comparing the
//! composite decoder with the argmax baseline.
//!
//! Every random stream is derived from `(seed, instance index)` so results do
//! not depend on processing order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::codec::{argmax_decode, decode, encode};
use crate::error::{Error, Result};
use crate::loss::{composite_loss_and_grad, LossConfig, RegionMask};
use crate::types::{CodecConfig, GridSpec, HeadBox, Keypoint, NormMeta, PoseInstance, TargetMaps};

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Uniform draw in `[0, limit)`.
fn below(rng: &mut ChaCha8Rng, limit: f64) -> f64 {
    (rng.random::<f64>() * limit).min(limit.next_down())
}

/// `n_instances` poses with `k` visible keypoints each, uniform over the area
/// tiled by whole cells of `grid`. Each instance also carries a head box, a
/// torso segment (first to last keypoint, when `k >= 2`) and an area of a
/// quarter of the covered image.
pub fn gen_dataset(seed: u64, n_instances: usize, k: usize, grid: &GridSpec) -> Vec<PoseInstance> {
    (0..n_instances).map(|i| gen_instance(seed, i as u64, k, grid)).collect()
}

fn gen_instance(seed: u64, index: u64, k: usize, grid: &GridSpec) -> PoseInstance {
    let (cw, ch) = (grid.covered_width(), grid.covered_height());
    let mut rng = stream_rng(seed, index);
    let keypoints = (0..k)
        .map(|_| {
            let x = below(&mut rng, cw);
            let y = below(&mut rng, ch);
            Keypoint::visible(x, y)
        })
        .collect();
    let side = (grid.stride() as f64).max(cw.min(ch) / 8.0).min(cw.min(ch));
    let x1 = below(&mut rng, cw - side + f64::EPSILON);
    let y1 = below(&mut rng, ch - side + f64::EPSILON);
    PoseInstance {
        keypoints,
        norm_meta: NormMeta {
            head_box: Some(HeadBox {
                x1,
                y1,
                x2: x1 + side,
                y2: y1 + side,
            }),
            torso_endpoints: (k >= 2).then(|| (0, k - 1)),
            area: Some(cw * ch / 4.0),
        },
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseKind {
    /// `N(0, m^2)` added to every heatmap cell, clamped at zero.
    GaussianAdditive,
    /// Heatmap cells multiplied by `1 + m*u`, `u ~ U[-1, 1]`.
    ActivationScaling,
    /// `N(0, m^2)` added independently to every offset cell.
    OffsetJitter,
    /// One `N(0, m^2)` draw per keypoint and axis, added to the whole offset
    /// plane: a systematic regression error shared by all cells.
    OffsetShift,
}

impl NoiseKind {
    pub fn touches_offsets(self) -> bool {
        matches!(self, NoiseKind::OffsetJitter | NoiseKind::OffsetShift)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    pub kind: NoiseKind,
    /// Offset kinds are in stride units when passed to [`perturb`].
    pub magnitude: f64,
    pub seed: u64,
}

impl NoiseModel {
    pub fn none() -> Self {
        NoiseModel {
            kind: NoiseKind::GaussianAdditive,
            magnitude: 0.0,
            seed: 0,
        }
    }
}

/// Applies `noise` to a copy of `maps`.
pub fn perturb(maps: &TargetMaps, noise: &NoiseModel) -> Result<TargetMaps> {
    perturb_stream(maps, noise, 0)
}

fn perturb_stream(maps: &TargetMaps, noise: &NoiseModel, stream: u64) -> Result<TargetMaps> {
    if !(noise.magnitude >= 0.0 && noise.magnitude.is_finite()) {
        return Err(Error::Config(format!(
            "noise magnitude must be finite and >= 0, got {}",
            noise.magnitude
        )));
    }
    let mut out = maps.clone();
    if noise.magnitude == 0.0 {
        return Ok(out);
    }
    let mut rng = stream_rng(noise.seed, stream);
    let normal = Normal::new(0.0, noise.magnitude).expect("finite magnitude");
    let k_count = maps.num_keypoints();
    let heat_len = k_count * maps.plane_len();
    match noise.kind {
        NoiseKind::GaussianAdditive => {
            for v in &mut out.as_mut_slice()[..heat_len] {
                *v = (*v + normal.sample(&mut rng)).max(0.0);
            }
        }
        NoiseKind::ActivationScaling => {
            for v in &mut out.as_mut_slice()[..heat_len] {
                let u: f64 = rng.random_range(-1.0..=1.0);
                *v *= 1.0 + noise.magnitude * u;
            }
        }
        NoiseKind::OffsetJitter => {
            for v in &mut out.as_mut_slice()[heat_len..] {
                *v += normal.sample(&mut rng);
            }
        }
        NoiseKind::OffsetShift => {
            for k in 0..k_count {
                let dy = normal.sample(&mut rng);
                let dx = normal.sample(&mut rng);
                out.y_offsets_mut(k).iter_mut().for_each(|v| *v += dy);
                out.x_offsets_mut(k).iter_mut().for_each(|v| *v += dx);
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FitInit {
    Zeros,
    /// Target plus `N(0, magnitude^2)` on every value.
    Noise { magnitude: f64, seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitConfig {
    pub step_size: f64,
    pub max_iters: usize,
    pub stop_loss: f64,
    pub init: FitInit,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            step_size: 0.1,
            max_iters: 5000,
            stop_loss: 1e-6,
            init: FitInit::Zeros,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.step_size > 0.0) {
            return Err(Error::Config(format!("step size must be > 0, got {}", self.step_size)));
        }
        if self.max_iters < 1 {
            return Err(Error::Config("max_iters must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub maps: TargetMaps,
    /// Total loss before each update, plus the final value.
    pub trace: Vec<f64>,
    /// Updates applied.
    pub iterations: usize,
    pub converged: bool,
    /// Loss rose for 10 consecutive iterations.
    pub diverged: bool,
}

impl FitResult {
    pub fn final_loss(&self) -> f64 {
        self.trace.last().copied().unwrap_or(f64::NAN)
    }
}

const DIVERGENCE_RUN: usize = 10;

/// Fits free map planes to `target` by fixed-step gradient descent on the
/// composite loss, starting from `fit_config.init`.
pub fn fit_maps(target: &TargetMaps, loss_config: &LossConfig, fit_config: &FitConfig) -> Result<FitResult> {
    let initial = match fit_config.init {
        FitInit::Zeros => target.zeros_like(),
        FitInit::Noise { magnitude, seed } => {
            let mut m = target.clone();
            let mut rng = stream_rng(seed, 0);
            let normal = Normal::new(0.0, magnitude)
                .map_err(|e| Error::Config(format!("init noise: {e}")))?;
            for v in m.as_mut_slice() {
                *v += normal.sample(&mut rng);
            }
            m
        }
    };
    fit_maps_from(target, initial, loss_config, fit_config)
}

/// [`fit_maps`] from an explicit starting stack.
pub fn fit_maps_from(
    target: &TargetMaps,
    initial: TargetMaps,
    loss_config: &LossConfig,
    fit_config: &FitConfig,
) -> Result<FitResult> {
    fit_config.validate()?;
    loss_config.validate()?;
    target.check_compatible(&initial)?;
    let mut maps = initial;
    let mut trace = Vec::new();
    let mut rising = 0;
    let mut iterations = 0;
    loop {
        let report = composite_loss_and_grad(target, &maps, loss_config)?;
        let total = report.total;
        if let Some(&prev) = trace.last() {
            rising = if total > prev { rising + 1 } else { 0 };
        }
        trace.push(total);
        if total < fit_config.stop_loss {
            return Ok(FitResult { maps, trace, iterations, converged: true, diverged: false });
        }
        if rising >= DIVERGENCE_RUN || !total.is_finite() {
            return Ok(FitResult { maps, trace, iterations, converged: false, diverged: true });
        }
        if iterations == fit_config.max_iters {
            return Ok(FitResult { maps, trace, iterations, converged: false, diverged: false });
        }
        let grad = report.gradient.expect("gradient requested");
        for (v, g) in maps.as_mut_slice().iter_mut().zip(grad.as_slice()) {
            *v -= fit_config.step_size * g;
        }
        iterations += 1;
    }
}

/// A `(target, predicted)` pair for gradient checks: the target encodes one
/// synthetic pose, the prediction adds N(0, 0.25) to heatmap values and
/// N(0, 1) to offsets (stride units), unclamped.
pub fn random_loss_pair(
    seed: u64,
    index: u64,
    k: usize,
    grid: &GridSpec,
    config: &CodecConfig,
) -> Result<(TargetMaps, TargetMaps)> {
    let pose = gen_instance(seed ^ 0x5eed_9a1b, index, k, grid);
    let target = encode(&pose, grid, config)?;
    let mut predicted = target.clone();
    let heat_len = k * target.plane_len();
    let mut rng = stream_rng(seed, index);
    let heat = Normal::new(0.0, 0.25).expect("valid");
    let offs = Normal::new(0.0, 1.0).expect("valid");
    for (i, v) in predicted.as_mut_slice().iter_mut().enumerate() {
        *v += if i < heat_len { heat.sample(&mut rng) } else { offs.sample(&mut rng) };
    }
    Ok((target, predicted))
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct SweepRow {
    pub stride: u32,
    pub composite_mean_error: f64,
    pub argmax_mean_error: f64,
    pub n_omega_mean: f64,
    pub plane_count: usize,
}

/// Encodes every instance at each stride, applies `noise`, decodes with both
/// decoders and reports mean pixel errors over labeled keypoints.
///
/// Offset noise magnitudes are given in pixels here and converted to stride
/// units per stride, so every stride sees the same pixel-space noise. Noise
/// for instance `i` uses stream `i` of `noise.seed` at every stride.
pub fn stride_sweep(
    dataset: &[PoseInstance],
    image_size: (u32, u32),
    strides: &[u32],
    noise: &NoiseModel,
    config: &CodecConfig,
) -> Result<Vec<SweepRow>> {
    config.validate()?;
    let mut rows = Vec::with_capacity(strides.len());
    for &s in strides {
        let grid = GridSpec::new(image_size.0, image_size.1, s)?;
        let noise_here = if noise.kind.touches_offsets() {
            NoiseModel { magnitude: noise.magnitude / s as f64, ..*noise }
        } else {
            *noise
        };
        let (mut comp, mut arg, mut omega, mut n) = (0.0, 0.0, 0.0, 0usize);
        for (i, pose) in dataset.iter().enumerate() {
            let target = encode(pose, &grid, config)?;
            let region = RegionMask::from_heatmaps(&target, config.tau);
            let noisy = perturb_stream(&target, &noise_here, i as u64)?;
            let c = decode(&noisy, config);
            let a = argmax_decode(&noisy);
            for (k, kp) in pose.keypoints.iter().enumerate() {
                if !kp.is_labeled() {
                    continue;
                }
                comp += c.coords[k].distance(&kp.point());
                arg += a.coords[k].distance(&kp.point());
                omega += region.n_omega()[k] as f64;
                n += 1;
            }
        }
        let denom = n.max(1) as f64;
        rows.push(SweepRow {
            stride: s,
            composite_mean_error: comp / denom,
            argmax_mean_error: arg / denom,
            n_omega_mean: omega / denom,
            plane_count: 3,
        });
    }
    Ok(rows)
}
