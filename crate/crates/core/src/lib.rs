// SPDX-License-Identifier: Apache-2.0

//! Composite keypoint localization: a coarse sparse heatmap finds the cell a
//! keypoint falls near, and two short-distance offsetmaps carry the remaining
//! sub-stride displacement.
//!
//! - [`types`]: grid geometry and shared value types
//! - [`codec`]: keypoints to map stacks and back
//! - [`loss`]: composite loss, analytic gradient, finite-difference check, ablation losses
//! - [`metrics`]: PCK/PCKh and OKS AP/AR
//! - [`synthfit`]: synthetic data, noise models, direct map fitting, stride sweeps
//! - [`io`]: map files, annotation/prediction JSON, dataset profiles
//! - [`cli`]: the `compoloc` command line

// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod codec;
pub mod error;
pub mod io;
pub mod loss;
pub mod metrics;
pub mod synthfit;
pub mod types;

pub use error::{Error, FormatError, IngestError, Result};
pub use types::{
    derive_grid, CodecConfig, DecodeDiagnostics, DecodedPose, GridSpec, HeadBox, Keypoint,
    NormMeta, NormMode, Point, PoseInstance, RegionSource, TargetMaps, Visibility,
};
