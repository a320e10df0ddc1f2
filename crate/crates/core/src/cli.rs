// SPDX-License-Identifier: Apache-2.0

//! The `compoloc` command line.
//!
//! Reports go to `--out` (written atomically) or stdout. Exit codes: 0 on
//! success, 1 on operational errors (message on stderr), 2 on usage errors.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use crate::codec::{argmax_decode, decode, encode};
use crate::error::{Error, Result};
use crate::io::{self, AnnotationSet, DatasetProfile, PredictionSet};
use crate::loss::{composite_loss, finite_diff_check, grmi_loss, peak_mse_loss, LossConfig, LossReport};
use crate::metrics::{default_thresholds, oks_ap, pck, resolve_normalizer, Detection, NormalizerSpec};
use crate::synthfit::{
    fit_maps, gen_dataset, random_loss_pair, stride_sweep, FitConfig, FitInit, NoiseKind, NoiseModel,
};
use crate::types::{CodecConfig, DecodedPose, GridSpec, NormMode, RegionSource, TargetMaps};

#[derive(Parser, Debug)]
#[command(name = "compoloc", version, about = "Composite heatmap + offset keypoint codec")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalOpts,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct GlobalOpts {
    /// Heatmap spread in pixels
    #[arg(long, global = true, default_value_t = 16.0)]
    pub sigma: f64,
    /// Activation threshold for decoding and the offset region
    #[arg(long, global = true, default_value_t = 0.6)]
    pub tau: f64,
    #[arg(long, global = true, default_value_t = 16)]
    pub stride: u32,
    #[arg(long, global = true, value_enum, default_value_t = NormArg::Squared)]
    pub norm_mode: NormArg,
    #[arg(long, global = true, value_enum, default_value_t = RegionArg::Gt)]
    pub region_source: RegionArg,
    #[arg(long, global = true, default_value_t = 0.5)]
    pub omega_h: f64,
    #[arg(long, global = true, default_value_t = 2.0)]
    pub omega_o: f64,
    #[arg(long, global = true, default_value_t = 1.0)]
    pub beta: f64,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Built-in profile name (coco17, lsp14) or path to a profile JSON
    #[arg(long, global = true)]
    pub profile: Option<String>,
    /// Output file (directory for `encode`); stdout when omitted
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormArg {
    Squared,
    Literal,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegionArg {
    Gt,
    Pred,
    Union,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnnotationFormat {
    Simple,
    Coco,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    Composite,
    PeakMse,
    Grmi,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormalizerArg {
    Head,
    Torso,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseArg {
    Gaussian,
    Scaling,
    Jitter,
    Shift,
}

#[derive(Args, Debug, Clone)]
pub struct AnnotationArgs {
    /// Annotation file
    #[arg(long, short = 'a')]
    pub annotations: PathBuf,
    #[arg(long, value_enum, default_value_t = AnnotationFormat::Simple)]
    pub format: AnnotationFormat,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Encode annotations into map files, one per instance
    Encode {
        #[command(flatten)]
        input: AnnotationArgs,
    },
    /// Decode map files into keypoint predictions
    Decode {
        #[arg(required = true)]
        maps: Vec<PathBuf>,
        /// Use the argmax baseline instead of the composite decoder
        #[arg(long)]
        argmax: bool,
    },
    /// Encode then decode, reporting the coordinate error
    Roundtrip {
        /// Annotation file; synthetic data when omitted
        #[arg(long, short = 'a')]
        annotations: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = AnnotationFormat::Simple)]
        format: AnnotationFormat,
        #[command(flatten)]
        synth: SynthShape,
    },
    /// Evaluate a loss between target and predicted map files
    Loss {
        target: PathBuf,
        predicted: PathBuf,
        #[arg(long, value_enum, default_value_t = LossKind::Composite)]
        kind: LossKind,
        /// Disk radius in pixels for grmi (default: the stride)
        #[arg(long)]
        disk_radius: Option<f64>,
    },
    /// Compare analytic and central-difference gradients
    Gradcheck {
        #[arg(long, requires = "predicted")]
        target: Option<PathBuf>,
        #[arg(long, requires = "target")]
        predicted: Option<PathBuf>,
        /// Random pairs when no files are given
        #[arg(long, default_value_t = 10)]
        pairs: u64,
        /// Random grid side in cells
        #[arg(long, default_value_t = 16)]
        cells: u32,
        #[arg(long, default_value_t = 3)]
        keypoints: usize,
        #[arg(long, default_value_t = 1e-5)]
        step: f64,
        #[arg(long, default_value_t = 1e-4)]
        tolerance: f64,
    },
    /// PCK / PCKh of predictions against annotations
    EvalPck {
        #[arg(long, short = 'p')]
        predictions: PathBuf,
        #[command(flatten)]
        input: AnnotationArgs,
        #[arg(long, default_value_t = 0.5)]
        alpha: f64,
        #[arg(long, value_enum, default_value_t = NormalizerArg::Head)]
        normalizer: NormalizerArg,
    },
    /// OKS AP/AR of predictions against annotations
    EvalOks {
        #[arg(long, short = 'p')]
        predictions: PathBuf,
        #[command(flatten)]
        input: AnnotationArgs,
    },
    /// Generate a synthetic dataset in the simple format
    Synth {
        #[command(flatten)]
        shape: SynthShape,
    },
    /// Fit free maps to each encoded instance and report the error
    Fit {
        #[command(flatten)]
        input: AnnotationArgs,
        #[arg(long, default_value_t = 0.1)]
        step_size: f64,
        #[arg(long, default_value_t = 5000)]
        max_iters: usize,
        #[arg(long, default_value_t = 1e-6)]
        stop_loss: f64,
    },
    /// Composite vs argmax decode error across strides, as CSV
    SweepStride {
        #[command(flatten)]
        input: AnnotationArgs,
        #[arg(long, value_delimiter = ',', default_value = "4,8,16,32")]
        strides: Vec<u32>,
        #[arg(long, value_enum, default_value_t = NoiseArg::Jitter)]
        noise: NoiseArg,
        /// Noise magnitude; offset noise is in pixels
        #[arg(long, default_value_t = 0.0)]
        noise_magnitude: f64,
    },
}

#[derive(Args, Debug, Clone)]
pub struct SynthShape {
    #[arg(long, default_value_t = 100)]
    pub count: usize,
    /// Keypoints per instance (default: the profile's K, else 17)
    #[arg(long)]
    pub keypoints: Option<usize>,
    #[arg(long, default_value_t = 256)]
    pub width: u32,
    #[arg(long, default_value_t = 256)]
    pub height: u32,
}

impl GlobalOpts {
    pub fn codec_config(&self) -> Result<CodecConfig> {
        let c = CodecConfig {
            sigma: self.sigma,
            tau: self.tau,
            norm_mode: match self.norm_mode {
                NormArg::Squared => NormMode::SquaredDistance,
                NormArg::Literal => NormMode::LiteralL2,
            },
            region_source: self.region(),
        };
        c.validate()?;
        Ok(c)
    }

    fn region(&self) -> RegionSource {
        match self.region_source {
            RegionArg::Gt => RegionSource::GroundTruth,
            RegionArg::Pred => RegionSource::Predicted,
            RegionArg::Union => RegionSource::Union,
        }
    }

    pub fn loss_config(&self) -> Result<LossConfig> {
        let c = LossConfig {
            omega_h: self.omega_h,
            omega_o: self.omega_o,
            beta: self.beta,
            region_source: self.region(),
            tau: self.tau,
        };
        c.validate()?;
        Ok(c)
    }

    fn profile(&self) -> Result<Option<DatasetProfile>> {
        self.profile.as_deref().map(DatasetProfile::resolve).transpose()
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

pub fn execute(cli: &Cli) -> Result<()> {
    let g = &cli.global;
    match &cli.command {
        Command::Encode { input } => cmd_encode(g, input),
        Command::Decode { maps, argmax } => cmd_decode(g, maps, *argmax),
        Command::Roundtrip { annotations, format, synth } => {
            cmd_roundtrip(g, annotations.as_deref(), *format, synth)
        }
        Command::Loss { target, predicted, kind, disk_radius } => {
            cmd_loss(g, target, predicted, *kind, *disk_radius)
        }
        Command::Gradcheck { target, predicted, pairs, cells, keypoints, step, tolerance } => {
            let files = target.as_deref().zip(predicted.as_deref());
            cmd_gradcheck(g, files, *pairs, *cells, *keypoints, *step, *tolerance)
        }
        Command::EvalPck { predictions, input, alpha, normalizer } => {
            cmd_eval_pck(g, predictions, input, *alpha, *normalizer)
        }
        Command::EvalOks { predictions, input } => cmd_eval_oks(g, predictions, input),
        Command::Synth { shape } => cmd_synth(g, shape),
        Command::Fit { input, step_size, max_iters, stop_loss } => {
            let fc = FitConfig {
                step_size: *step_size,
                max_iters: *max_iters,
                stop_loss: *stop_loss,
                init: FitInit::Zeros,
            };
            cmd_fit(g, input, &fc)
        }
        Command::SweepStride { input, strides, noise, noise_magnitude } => {
            cmd_sweep(g, input, strides, *noise, *noise_magnitude)
        }
    }
}

fn emit(out: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match out {
        Some(p) => io::write_atomic(p, bytes)?,
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(bytes)?;
            stdout.flush()?;
        }
    }
    Ok(())
}

fn emit_json(g: &GlobalOpts, v: &Value) -> Result<()> {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    emit(g.out.as_deref(), s.as_bytes())
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

/// Loads annotations and the profile that applies to them: `--profile` if
/// given, else the set's own profile reference when it resolves.
fn load_annotations(
    g: &GlobalOpts,
    input: &AnnotationArgs,
) -> Result<(AnnotationSet, Option<DatasetProfile>)> {
    let text = read_text(&input.annotations)?;
    let flag = g.profile()?;
    let (mut set, profile) = match input.format {
        AnnotationFormat::Simple => {
            let set = io::ingest_simple(&text)?;
            let profile = match flag {
                Some(p) => Some(p),
                None => DatasetProfile::builtin(&set.profile),
            };
            (set, profile)
        }
        AnnotationFormat::Coco => {
            let p = flag.unwrap_or_else(DatasetProfile::coco17);
            (io::ingest_coco(&text, &p)?, Some(p))
        }
    };
    if let Some(p) = &profile {
        set.check_profile(p)?;
        set.apply_profile_defaults(p);
    }
    Ok((set, profile))
}

fn image_grid(width: u32, height: u32, stride: u32) -> Result<GridSpec> {
    GridSpec::new(width, height, stride)
}

fn cmd_encode(g: &GlobalOpts, input: &AnnotationArgs) -> Result<()> {
    let dir = g
        .out
        .as_deref()
        .ok_or_else(|| Error::Config("encode requires --out <directory>".into()))?;
    let cfg = g.codec_config()?;
    let (set, _) = load_annotations(g, input)?;
    // Everything is encoded before the first write.
    let mut files = Vec::new();
    for (i, img) in set.images.iter().enumerate() {
        let grid = image_grid(img.width, img.height, g.stride)?;
        for (j, inst) in img.instances.iter().enumerate() {
            let maps = encode(inst, &grid, &cfg)?;
            files.push((format!("img{i:05}_inst{j:03}.clm"), io::encode_map_bytes(&maps)));
        }
    }
    std::fs::create_dir_all(dir)?;
    for (name, bytes) in &files {
        io::write_atomic(&dir.join(name), bytes)?;
    }
    let names: Vec<&str> = files.iter().map(|(n, _)| n.as_str()).collect();
    let mut s = serde_json::to_string_pretty(&json!({ "files": names })).expect("serializable");
    s.push('\n');
    emit(None, s.as_bytes())
}

fn cmd_decode(g: &GlobalOpts, paths: &[PathBuf], argmax: bool) -> Result<()> {
    let cfg = g.codec_config()?;
    let mut set = PredictionSet::default();
    for p in paths {
        let maps = io::load_maps(p)?;
        let pose = if argmax { argmax_decode(&maps) } else { decode(&maps, &cfg) };
        let score = pose.mean_confidence();
        set.images.push(vec![Detection { pose, score }]);
    }
    emit(g.out.as_deref(), io::write_predictions(&set).as_bytes())
}

fn synth_k(g: &GlobalOpts, shape: &SynthShape) -> Result<usize> {
    let k = match (shape.keypoints, g.profile()?) {
        (Some(k), _) => k,
        (None, Some(p)) => p.num_keypoints,
        (None, None) => 17,
    };
    if k == 0 {
        return Err(Error::Config("--keypoints must be >= 1".into()));
    }
    Ok(k)
}

fn synth_set(g: &GlobalOpts, shape: &SynthShape) -> Result<AnnotationSet> {
    let k = synth_k(g, shape)?;
    let grid = image_grid(shape.width, shape.height, g.stride)?;
    let poses = gen_dataset(g.seed, shape.count, k, &grid);
    Ok(AnnotationSet {
        profile: g.profile.clone().unwrap_or_else(|| "synthetic".into()),
        images: poses
            .into_iter()
            .enumerate()
            .map(|(i, p)| io::AnnotatedImage {
                id: Some(i as u64),
                width: shape.width,
                height: shape.height,
                instances: vec![p],
            })
            .collect(),
    })
}

fn cmd_roundtrip(
    g: &GlobalOpts,
    annotations: Option<&Path>,
    format: AnnotationFormat,
    shape: &SynthShape,
) -> Result<()> {
    let cfg = g.codec_config()?;
    let set = match annotations {
        Some(a) => load_annotations(g, &AnnotationArgs { annotations: a.to_path_buf(), format })?.0,
        None => synth_set(g, shape)?,
    };
    let (mut max_err, mut sum, mut n, mut instances) = (0.0f64, 0.0, 0usize, 0usize);
    for img in &set.images {
        let grid = image_grid(img.width, img.height, g.stride)?;
        for inst in &img.instances {
            instances += 1;
            let decoded = decode(&encode(inst, &grid, &cfg)?, &cfg);
            for (k, kp) in inst.keypoints.iter().enumerate().filter(|(_, kp)| kp.is_labeled()) {
                let e = decoded.coords[k].distance(&kp.point());
                max_err = max_err.max(e);
                sum += e;
                n += 1;
            }
        }
    }
    emit_json(
        g,
        &json!({
            "stride": g.stride,
            "instances": instances,
            "keypoints": n,
            "max_error_px": max_err,
            "mean_error_px": if n > 0 { sum / n as f64 } else { 0.0 },
        }),
    )
}

fn loss_json(kind: &str, r: &LossReport) -> Value {
    json!({
        "kind": kind,
        "l_h": r.l_h,
        "l_oy": r.l_oy,
        "l_ox": r.l_ox,
        "total": r.total,
        "n_omega": r.n_omega,
    })
}

fn cmd_loss(
    g: &GlobalOpts,
    target: &Path,
    predicted: &Path,
    kind: LossKind,
    disk_radius: Option<f64>,
) -> Result<()> {
    let cfg = g.loss_config()?;
    let t = io::load_maps(target)?;
    let p = io::load_maps(predicted)?;
    let (name, report) = match kind {
        LossKind::Composite => ("composite", composite_loss(&t, &p, &cfg)?),
        LossKind::PeakMse => ("peak-mse", peak_mse_loss(&t, &p, &cfg)?),
        LossKind::Grmi => ("grmi", grmi_loss(&t, &p, &cfg, disk_radius)?),
    };
    emit_json(g, &loss_json(name, &report))
}

fn cmd_gradcheck(
    g: &GlobalOpts,
    files: Option<(&Path, &Path)>,
    pairs: u64,
    cells: u32,
    k: usize,
    step: f64,
    tolerance: f64,
) -> Result<()> {
    let cfg = g.loss_config()?;
    let codec = g.codec_config()?;
    let mut inputs: Vec<(TargetMaps, TargetMaps)> = Vec::new();
    match files {
        Some((t, p)) => inputs.push((io::load_maps(t)?, io::load_maps(p)?)),
        None => {
            if k == 0 || cells == 0 {
                return Err(Error::Config("--keypoints and --cells must be >= 1".into()));
            }
            let side = cells
                .checked_mul(g.stride)
                .ok_or_else(|| Error::Config("grid too large".into()))?;
            let grid = image_grid(side, side, g.stride)?;
            for i in 0..pairs {
                inputs.push(random_loss_pair(g.seed, i, k, &grid, &codec)?);
            }
        }
    }
    let (mut worst, mut compared, mut skipped) = (0.0f64, 0usize, 0usize);
    for (t, p) in &inputs {
        let c = finite_diff_check(t, p, &cfg, step)?;
        worst = worst.max(c.max_relative_error);
        compared += c.compared;
        skipped += c.skipped;
    }
    let pass = worst < tolerance;
    emit_json(
        g,
        &json!({
            "pairs": inputs.len(),
            "step": step,
            "tolerance": tolerance,
            "max_relative_error": worst,
            "compared": compared,
            "skipped": skipped,
            "pass": pass,
        }),
    )?;
    if !pass {
        return Err(Error::Data(format!(
            "max relative error {worst:e} exceeds tolerance {tolerance:e}"
        )));
    }
    Ok(())
}

fn load_predictions(path: &Path) -> Result<PredictionSet> {
    Ok(io::ingest_predictions(&read_text(path)?)?)
}

/// Flattens predictions and annotations into aligned instance lists.
fn paired(
    preds: &PredictionSet,
    set: &AnnotationSet,
) -> Result<(Vec<DecodedPose>, Vec<crate::types::PoseInstance>)> {
    if preds.images.len() != set.images.len() {
        return Err(Error::Data(format!(
            "{} prediction images vs {} annotation images",
            preds.images.len(),
            set.images.len()
        )));
    }
    let (mut p, mut t) = (Vec::new(), Vec::new());
    for (i, (dets, img)) in preds.images.iter().zip(&set.images).enumerate() {
        if dets.len() != img.instances.len() {
            return Err(Error::Data(format!(
                "image {i}: {} predicted instances vs {} annotated",
                dets.len(),
                img.instances.len()
            )));
        }
        p.extend(dets.iter().map(|d| d.pose.clone()));
        t.extend(img.instances.iter().cloned());
    }
    Ok((p, t))
}

fn cmd_eval_pck(
    g: &GlobalOpts,
    predictions: &Path,
    input: &AnnotationArgs,
    alpha: f64,
    normalizer: NormalizerArg,
) -> Result<()> {
    let preds = load_predictions(predictions)?;
    let (set, _) = load_annotations(g, input)?;
    let (p, t) = paired(&preds, &set)?;
    let spec = match normalizer {
        NormalizerArg::Head => NormalizerSpec::Head,
        NormalizerArg::Torso => NormalizerSpec::Torso,
    };
    let norms = t
        .iter()
        .map(|inst| resolve_normalizer(inst, spec))
        .collect::<Result<Vec<_>>>()?;
    let r = pck(&p, &t, &norms, alpha)?;
    emit_json(
        g,
        &json!({
            "metric": match normalizer { NormalizerArg::Head => "pckh", NormalizerArg::Torso => "pck" },
            "alpha": r.alpha,
            "overall": r.overall,
            "per_keypoint": r.per_keypoint,
            "correct": r.correct,
            "total": r.total,
        }),
    )
}

fn cmd_eval_oks(g: &GlobalOpts, predictions: &Path, input: &AnnotationArgs) -> Result<()> {
    let preds = load_predictions(predictions)?;
    let (set, profile) = load_annotations(g, input)?;
    let constants = match profile {
        Some(p) => p.oks_constants(),
        None => {
            return Err(Error::Config(format!(
                "annotation profile {:?} is not built in; pass --profile",
                set.profile
            )))
        }
    };
    let gts: Vec<_> = set.images.iter().map(|i| i.instances.clone()).collect();
    let r = oks_ap(&preds.images, &gts, &constants, &default_thresholds())?;
    let per: Vec<Value> = r
        .per_threshold
        .iter()
        .map(|t| json!({ "threshold": t.threshold, "ap": t.ap, "recall": t.recall }))
        .collect();
    emit_json(
        g,
        &json!({ "ap": r.ap, "ap50": r.ap50, "ap75": r.ap75, "ar": r.ar, "per_threshold": per }),
    )
}

fn cmd_synth(g: &GlobalOpts, shape: &SynthShape) -> Result<()> {
    let set = synth_set(g, shape)?;
    emit(g.out.as_deref(), io::write_simple(&set).as_bytes())
}

fn cmd_fit(g: &GlobalOpts, input: &AnnotationArgs, fc: &FitConfig) -> Result<()> {
    let codec = g.codec_config()?;
    let lc = g.loss_config()?;
    let (set, _) = load_annotations(g, input)?;
    let mut rows = Vec::new();
    let (mut converged, mut worst) = (0usize, 0.0f64);
    for (i, img) in set.images.iter().enumerate() {
        let grid = image_grid(img.width, img.height, g.stride)?;
        for (j, inst) in img.instances.iter().enumerate() {
            let target = encode(inst, &grid, &codec)?;
            let fit = fit_maps(&target, &lc, fc)?;
            let decoded = decode(&fit.maps, &codec);
            let err = inst
                .keypoints
                .iter()
                .enumerate()
                .filter(|(_, kp)| kp.is_labeled())
                .map(|(k, kp)| decoded.coords[k].distance(&kp.point()))
                .fold(0.0f64, f64::max);
            converged += fit.converged as usize;
            worst = worst.max(err);
            rows.push(json!({
                "image": i,
                "instance": j,
                "final_loss": fit.final_loss(),
                "iterations": fit.iterations,
                "converged": fit.converged,
                "diverged": fit.diverged,
                "max_error_px": err,
            }));
        }
    }
    let n = rows.len();
    emit_json(
        g,
        &json!({
            "instances": n,
            "converged": converged,
            "converged_fraction": if n > 0 { converged as f64 / n as f64 } else { 0.0 },
            "max_error_px": worst,
            "fits": rows,
        }),
    )
}

fn cmd_sweep(
    g: &GlobalOpts,
    input: &AnnotationArgs,
    strides: &[u32],
    noise: NoiseArg,
    magnitude: f64,
) -> Result<()> {
    let cfg = g.codec_config()?;
    let (set, _) = load_annotations(g, input)?;
    let first = set
        .images
        .first()
        .ok_or_else(|| Error::Data("annotation set has no images".into()))?;
    let size = (first.width, first.height);
    if set.images.iter().any(|i| (i.width, i.height) != size) {
        return Err(Error::Data("sweep-stride needs every image to share one size".into()));
    }
    let dataset: Vec<_> = set.images.iter().flat_map(|i| i.instances.iter().cloned()).collect();
    let kind = match noise {
        NoiseArg::Gaussian => NoiseKind::GaussianAdditive,
        NoiseArg::Scaling => NoiseKind::ActivationScaling,
        NoiseArg::Jitter => NoiseKind::OffsetJitter,
        NoiseArg::Shift => NoiseKind::OffsetShift,
    };
    let model = NoiseModel { kind, magnitude, seed: g.seed };
    let rows = stride_sweep(&dataset, size, strides, &model, &cfg)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in &rows {
        w.serialize(r).map_err(|e| Error::Data(format!("csv: {e}")))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Data(format!("csv: {e}")))?;
    emit(g.out.as_deref(), &bytes)
}
