// SPDX-License-Identifier: Apache-2.0

//! Python bindings. Maps cross the boundary as flat lists of floats; poses as
//! lists of `(x, y, v)` tuples.

use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyIndexError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use compoloc::codec;
use compoloc::io;
use compoloc::loss::{self, LossReport};
use compoloc::metrics::{self, Detection, NormalizerSpec, OksConstants};
use compoloc::synthfit;
use compoloc::{
    HeadBox, Keypoint, NormMeta, NormMode, Point, PoseInstance, RegionSource, Visibility,
};

fn to_py(e: compoloc::Error) -> PyErr {
    match e {
        compoloc::Error::Io(io) => PyIOError::new_err(io.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn norm_mode(name: &str) -> PyResult<NormMode> {
    match name {
        "squared" => Ok(NormMode::SquaredDistance),
        "literal" => Ok(NormMode::LiteralL2),
        _ => Err(PyValueError::new_err(format!("norm_mode must be 'squared' or 'literal', got {name:?}"))),
    }
}

fn norm_mode_name(m: NormMode) -> &'static str {
    match m {
        NormMode::SquaredDistance => "squared",
        NormMode::LiteralL2 => "literal",
    }
}

fn region_source(name: &str) -> PyResult<RegionSource> {
    match name {
        "gt" => Ok(RegionSource::GroundTruth),
        "pred" => Ok(RegionSource::Predicted),
        "union" => Ok(RegionSource::Union),
        _ => Err(PyValueError::new_err(format!("region_source must be 'gt', 'pred' or 'union', got {name:?}"))),
    }
}

#[pyclass(frozen, skip_from_py_object, name = "GridSpec", module = "pycompoloc")]
#[derive(Clone)]
struct PyGridSpec(compoloc::GridSpec);

#[pymethods]
impl PyGridSpec {
    #[new]
    fn new(width: u32, height: u32, stride: u32) -> PyResult<Self> {
        compoloc::GridSpec::new(width, height, stride).map(Self).map_err(to_py)
    }

    #[getter]
    fn grid_width(&self) -> usize {
        self.0.grid_width()
    }

    #[getter]
    fn grid_height(&self) -> usize {
        self.0.grid_height()
    }

    #[getter]
    fn stride(&self) -> u32 {
        self.0.stride()
    }

    fn patch_center(&self, cx: usize, cy: usize) -> PyResult<(f64, f64)> {
        if cx >= self.0.grid_width() || cy >= self.0.grid_height() {
            return Err(PyIndexError::new_err(format!("cell ({cx}, {cy}) outside the grid")));
        }
        let p = self.0.patch_center(cx, cy);
        Ok((p.x, p.y))
    }

    fn __repr__(&self) -> String {
        format!(
            "GridSpec({}x{} cells, stride {})",
            self.0.grid_width(),
            self.0.grid_height(),
            self.0.stride()
        )
    }
}

#[pyclass(frozen, skip_from_py_object, name = "CodecConfig", module = "pycompoloc")]
#[derive(Clone)]
struct PyCodecConfig(compoloc::CodecConfig);

#[pymethods]
impl PyCodecConfig {
    #[new]
    #[pyo3(signature = (sigma = 16.0, tau = 0.6, norm_mode = "squared", region_source = "gt"))]
    fn new(sigma: f64, tau: f64, norm_mode: &str, region_source: &str) -> PyResult<Self> {
        let c = compoloc::CodecConfig {
            sigma,
            tau,
            norm_mode: self::norm_mode(norm_mode)?,
            region_source: self::region_source(region_source)?,
        };
        c.validate().map_err(to_py)?;
        Ok(Self(c))
    }

    #[getter]
    fn sigma(&self) -> f64 {
        self.0.sigma
    }

    #[getter]
    fn tau(&self) -> f64 {
        self.0.tau
    }
}

#[pyclass(frozen, skip_from_py_object, name = "LossConfig", module = "pycompoloc")]
#[derive(Clone)]
struct PyLossConfig(loss::LossConfig);

#[pymethods]
impl PyLossConfig {
    #[new]
    #[pyo3(signature = (omega_h = 0.5, omega_o = 2.0, beta = 1.0, tau = 0.6, region_source = "gt"))]
    fn new(omega_h: f64, omega_o: f64, beta: f64, tau: f64, region_source: &str) -> PyResult<Self> {
        let c = loss::LossConfig {
            omega_h,
            omega_o,
            beta,
            tau,
            region_source: self::region_source(region_source)?,
        };
        c.validate().map_err(to_py)?;
        Ok(Self(c))
    }
}

/// A labeled pose: keypoints as `(x, y, v)` with v in {0, 1, 2}.
#[pyclass(frozen, from_py_object, name = "Pose", module = "pycompoloc")]
#[derive(Clone)]
struct PyPose(PoseInstance);

#[pymethods]
impl PyPose {
    #[new]
    #[pyo3(signature = (keypoints, head_box = None, area = None, torso = None))]
    fn new(
        keypoints: Vec<(f64, f64, u8)>,
        head_box: Option<(f64, f64, f64, f64)>,
        area: Option<f64>,
        torso: Option<(usize, usize)>,
    ) -> PyResult<Self> {
        let kps = keypoints
            .into_iter()
            .map(|(x, y, v)| {
                Visibility::from_code(v)
                    .map(|visibility| Keypoint { x, y, visibility })
                    .ok_or_else(|| PyValueError::new_err(format!("visibility {v} not in {{0, 1, 2}}")))
            })
            .collect::<PyResult<Vec<_>>>()?;
        Ok(Self(PoseInstance {
            keypoints: kps,
            norm_meta: NormMeta {
                head_box: head_box.map(|(x1, y1, x2, y2)| HeadBox { x1, y1, x2, y2 }),
                torso_endpoints: torso,
                area,
            },
        }))
    }

    #[getter]
    fn keypoints(&self) -> Vec<(f64, f64, u8)> {
        self.0.keypoints.iter().map(|k| (k.x, k.y, k.visibility.code())).collect()
    }

    fn __len__(&self) -> usize {
        self.0.num_keypoints()
    }
}

/// Decoder output: coordinates plus per-keypoint confidence and diagnostics.
#[pyclass(frozen, from_py_object, name = "DecodedPose", module = "pycompoloc")]
#[derive(Clone)]
struct PyDecodedPose(compoloc::DecodedPose);

#[pymethods]
impl PyDecodedPose {
    #[new]
    fn new(coords: Vec<(f64, f64)>) -> Self {
        Self(compoloc::DecodedPose::from_coords(
            coords.into_iter().map(|(x, y)| Point { x, y }).collect(),
        ))
    }

    #[getter]
    fn coords(&self) -> Vec<(f64, f64)> {
        self.0.coords.iter().map(|p| (p.x, p.y)).collect()
    }

    #[getter]
    fn confidence(&self) -> Vec<f64> {
        self.0.confidence.clone()
    }

    #[getter]
    fn n_cells(&self) -> Vec<usize> {
        self.0.diagnostics.iter().map(|d| d.n_cells).collect()
    }

    #[getter]
    fn used_fallback(&self) -> Vec<bool> {
        self.0.diagnostics.iter().map(|d| d.used_fallback).collect()
    }

    fn __len__(&self) -> usize {
        self.0.num_keypoints()
    }
}

/// K heatmaps, K y-offset and K x-offset planes on one grid.
#[pyclass(skip_from_py_object, name = "TargetMaps", module = "pycompoloc")]
#[derive(Clone)]
struct PyTargetMaps(compoloc::TargetMaps);

impl PyTargetMaps {
    fn check_k(&self, k: usize) -> PyResult<()> {
        if k >= self.0.num_keypoints() {
            return Err(PyIndexError::new_err(format!("keypoint {k} out of range")));
        }
        Ok(())
    }
}

#[pymethods]
impl PyTargetMaps {
    /// Builds maps from a flat list in file plane order.
    #[staticmethod]
    #[pyo3(signature = (grid, num_keypoints, data, valid = None, norm_mode = "squared"))]
    fn from_flat(
        grid: &PyGridSpec,
        num_keypoints: usize,
        data: Vec<f64>,
        valid: Option<Vec<bool>>,
        norm_mode: &str,
    ) -> PyResult<Self> {
        let valid = valid.unwrap_or_else(|| vec![true; num_keypoints]);
        compoloc::TargetMaps::from_planes(grid.0, num_keypoints, self::norm_mode(norm_mode)?, data, valid)
            .map(Self)
            .map_err(to_py)
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        io::load_maps(&path).map(Self).map_err(to_py)
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        io::save_maps(&self.0, &path).map_err(to_py)
    }

    #[staticmethod]
    fn from_bytes(data: &[u8]) -> PyResult<Self> {
        io::decode_map_bytes(data)
            .map(Self)
            .map_err(|e| PyValueError::new_err(e.to_string()))
    }

    fn to_bytes(&self) -> Vec<u8> {
        io::encode_map_bytes(&self.0)
    }

    #[getter]
    fn num_keypoints(&self) -> usize {
        self.0.num_keypoints()
    }

    #[getter]
    fn grid(&self) -> PyGridSpec {
        PyGridSpec(*self.0.grid())
    }

    #[getter]
    fn valid(&self) -> Vec<bool> {
        self.0.valid().to_vec()
    }

    #[getter]
    fn norm_mode(&self) -> &'static str {
        norm_mode_name(self.0.norm_mode())
    }

    fn to_list(&self) -> Vec<f64> {
        self.0.as_slice().to_vec()
    }

    fn heatmap(&self, k: usize) -> PyResult<Vec<f64>> {
        self.check_k(k)?;
        Ok(self.0.heatmap(k).to_vec())
    }

    fn y_offsets(&self, k: usize) -> PyResult<Vec<f64>> {
        self.check_k(k)?;
        Ok(self.0.y_offsets(k).to_vec())
    }

    fn x_offsets(&self, k: usize) -> PyResult<Vec<f64>> {
        self.check_k(k)?;
        Ok(self.0.x_offsets(k).to_vec())
    }

    fn __repr__(&self) -> String {
        let g = self.0.grid();
        format!(
            "TargetMaps(K={}, {}x{} cells, stride {})",
            self.0.num_keypoints(),
            g.grid_width(),
            g.grid_height(),
            g.stride()
        )
    }
}

fn codec_or_default(config: Option<&PyCodecConfig>) -> compoloc::CodecConfig {
    config.map(|c| c.0).unwrap_or_default()
}

fn loss_or_default(config: Option<&PyLossConfig>) -> loss::LossConfig {
    config.map(|c| c.0).unwrap_or_default()
}

#[pyfunction]
#[pyo3(signature = (pose, grid, config = None))]
fn encode(pose: &PyPose, grid: &PyGridSpec, config: Option<&PyCodecConfig>) -> PyResult<PyTargetMaps> {
    codec::encode(&pose.0, &grid.0, &codec_or_default(config))
        .map(PyTargetMaps)
        .map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (maps, config = None))]
fn decode(maps: &PyTargetMaps, config: Option<&PyCodecConfig>) -> PyDecodedPose {
    PyDecodedPose(codec::decode(&maps.0, &codec_or_default(config)))
}

#[pyfunction]
fn argmax_decode(maps: &PyTargetMaps) -> PyDecodedPose {
    PyDecodedPose(codec::argmax_decode(&maps.0))
}

fn report_dict<'py>(py: Python<'py>, r: &LossReport) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("l_h", r.l_h)?;
    d.set_item("l_oy", r.l_oy)?;
    d.set_item("l_ox", r.l_ox)?;
    d.set_item("total", r.total)?;
    d.set_item("n_omega", r.n_omega.clone())?;
    Ok(d)
}

#[pyfunction]
#[pyo3(signature = (target, predicted, config = None))]
fn composite_loss<'py>(
    py: Python<'py>,
    target: &PyTargetMaps,
    predicted: &PyTargetMaps,
    config: Option<&PyLossConfig>,
) -> PyResult<Bound<'py, PyDict>> {
    let r = loss::composite_loss(&target.0, &predicted.0, &loss_or_default(config)).map_err(to_py)?;
    report_dict(py, &r)
}

/// Analytic gradient of the composite loss with respect to `predicted`.
#[pyfunction]
#[pyo3(signature = (target, predicted, config = None))]
fn composite_loss_grad(
    target: &PyTargetMaps,
    predicted: &PyTargetMaps,
    config: Option<&PyLossConfig>,
) -> PyResult<PyTargetMaps> {
    loss::composite_loss_grad(&target.0, &predicted.0, &loss_or_default(config))
        .map(PyTargetMaps)
        .map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (target, predicted, config = None))]
fn peak_mse_loss<'py>(
    py: Python<'py>,
    target: &PyTargetMaps,
    predicted: &PyTargetMaps,
    config: Option<&PyLossConfig>,
) -> PyResult<Bound<'py, PyDict>> {
    let r = loss::peak_mse_loss(&target.0, &predicted.0, &loss_or_default(config)).map_err(to_py)?;
    report_dict(py, &r)
}

#[pyfunction]
#[pyo3(signature = (target, predicted, config = None, disk_radius = None))]
fn grmi_loss<'py>(
    py: Python<'py>,
    target: &PyTargetMaps,
    predicted: &PyTargetMaps,
    config: Option<&PyLossConfig>,
    disk_radius: Option<f64>,
) -> PyResult<Bound<'py, PyDict>> {
    let r = loss::grmi_loss(&target.0, &predicted.0, &loss_or_default(config), disk_radius)
        .map_err(to_py)?;
    report_dict(py, &r)
}

/// Returns `(max_relative_error, compared, skipped)`.
#[pyfunction]
#[pyo3(signature = (target, predicted, config = None, step = 1e-5))]
fn finite_diff_check(
    target: &PyTargetMaps,
    predicted: &PyTargetMaps,
    config: Option<&PyLossConfig>,
    step: f64,
) -> PyResult<(f64, usize, usize)> {
    let c = loss::finite_diff_check(&target.0, &predicted.0, &loss_or_default(config), step)
        .map_err(to_py)?;
    Ok((c.max_relative_error, c.compared, c.skipped))
}

/// `normalizer` is "head", "torso" or a pixel length applied to every pose.
#[pyfunction]
#[pyo3(signature = (predictions, ground_truths, alpha = 0.5, normalizer = None))]
fn pck<'py>(
    py: Python<'py>,
    predictions: Vec<PyDecodedPose>,
    ground_truths: Vec<PyPose>,
    alpha: f64,
    normalizer: Option<Bound<'py, PyAny>>,
) -> PyResult<Bound<'py, PyDict>> {
    let spec = match normalizer {
        None => NormalizerSpec::Head,
        Some(v) => {
            if let Ok(px) = v.extract::<f64>() {
                NormalizerSpec::Explicit(px)
            } else {
                match v.extract::<String>()?.as_str() {
                    "head" => NormalizerSpec::Head,
                    "torso" => NormalizerSpec::Torso,
                    other => return Err(PyValueError::new_err(format!("unknown normalizer {other:?}"))),
                }
            }
        }
    };
    let gts: Vec<PoseInstance> = ground_truths.into_iter().map(|p| p.0).collect();
    let preds: Vec<_> = predictions.into_iter().map(|p| p.0).collect();
    let norms = gts
        .iter()
        .map(|g| metrics::resolve_normalizer(g, spec))
        .collect::<compoloc::Result<Vec<_>>>()
        .map_err(to_py)?;
    let r = metrics::pck(&preds, &gts, &norms, alpha).map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("overall", r.overall)?;
    d.set_item("per_keypoint", r.per_keypoint)?;
    d.set_item("correct", r.correct)?;
    d.set_item("total", r.total)?;
    Ok(d)
}

fn constants(kappas: Option<Vec<f64>>) -> PyResult<OksConstants> {
    match kappas {
        Some(k) => OksConstants::new(k).map_err(to_py),
        None => Ok(OksConstants::coco()),
    }
}

/// Object keypoint similarity; `kappas` default to the COCO constants.
#[pyfunction]
#[pyo3(signature = (prediction, ground_truth, kappas = None))]
fn oks(prediction: &PyDecodedPose, ground_truth: &PyPose, kappas: Option<Vec<f64>>) -> PyResult<f64> {
    metrics::oks(&prediction.0, &ground_truth.0, &constants(kappas)?).map_err(to_py)
}

/// `detections[i]` is a list of `(DecodedPose, score)` for image `i`.
#[pyfunction]
#[pyo3(signature = (detections, ground_truths, kappas = None))]
fn oks_ap<'py>(
    py: Python<'py>,
    detections: Vec<Vec<(PyDecodedPose, f64)>>,
    ground_truths: Vec<Vec<PyPose>>,
    kappas: Option<Vec<f64>>,
) -> PyResult<Bound<'py, PyDict>> {
    let dets: Vec<Vec<Detection>> = detections
        .into_iter()
        .map(|img| img.into_iter().map(|(p, score)| Detection { pose: p.0, score }).collect())
        .collect();
    let gts: Vec<Vec<PoseInstance>> = ground_truths
        .into_iter()
        .map(|img| img.into_iter().map(|p| p.0).collect())
        .collect();
    let r = metrics::oks_ap(&dets, &gts, &constants(kappas)?, &metrics::default_thresholds())
        .map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("ap", r.ap)?;
    d.set_item("ap50", r.ap50)?;
    d.set_item("ap75", r.ap75)?;
    d.set_item("ar", r.ar)?;
    let per: Vec<(f64, f64, f64)> = r.per_threshold.iter().map(|t| (t.threshold, t.ap, t.recall)).collect();
    d.set_item("per_threshold", per)?;
    Ok(d)
}

#[pyfunction]
fn gen_dataset(seed: u64, n_instances: usize, num_keypoints: usize, grid: &PyGridSpec) -> Vec<PyPose> {
    synthfit::gen_dataset(seed, n_instances, num_keypoints, &grid.0)
        .into_iter()
        .map(PyPose)
        .collect()
}

/// Gradient-descent fit from zeros. Returns `(maps, final_loss, iterations, converged)`.
#[pyfunction]
#[pyo3(signature = (target, config = None, step_size = 0.1, max_iters = 5000, stop_loss = 1e-6))]
fn fit_maps(
    target: &PyTargetMaps,
    config: Option<&PyLossConfig>,
    step_size: f64,
    max_iters: usize,
    stop_loss: f64,
) -> PyResult<(PyTargetMaps, f64, usize, bool)> {
    let fc = synthfit::FitConfig { step_size, max_iters, stop_loss, init: synthfit::FitInit::Zeros };
    let r = synthfit::fit_maps(&target.0, &loss_or_default(config), &fc).map_err(to_py)?;
    let final_loss = r.final_loss();
    Ok((PyTargetMaps(r.maps), final_loss, r.iterations, r.converged))
}

#[pymodule]
fn pycompoloc(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGridSpec>()?;
    m.add_class::<PyCodecConfig>()?;
    m.add_class::<PyLossConfig>()?;
    m.add_class::<PyPose>()?;
    m.add_class::<PyDecodedPose>()?;
    m.add_class::<PyTargetMaps>()?;
    m.add_function(wrap_pyfunction!(encode, m)?)?;
    m.add_function(wrap_pyfunction!(decode, m)?)?;
    m.add_function(wrap_pyfunction!(argmax_decode, m)?)?;
    m.add_function(wrap_pyfunction!(composite_loss, m)?)?;
    m.add_function(wrap_pyfunction!(composite_loss_grad, m)?)?;
    m.add_function(wrap_pyfunction!(peak_mse_loss, m)?)?;
    m.add_function(wrap_pyfunction!(grmi_loss, m)?)?;
    m.add_function(wrap_pyfunction!(finite_diff_check, m)?)?;
    m.add_function(wrap_pyfunction!(pck, m)?)?;
    m.add_function(wrap_pyfunction!(oks, m)?)?;
    m.add_function(wrap_pyfunction!(oks_ap, m)?)?;
    m.add_function(wrap_pyfunction!(gen_dataset, m)?)?;
    m.add_function(wrap_pyfunction!(fit_maps, m)?)?;
    Ok(())
}
