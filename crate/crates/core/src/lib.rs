//! Random-matrix-theory denoising of DP-SGD gradients.
//!
//! The crate is split into three layers:
//!
//! * [`rmt`] holds the spectral mathematics: bulk edge, the forward and
//!   inverse spiked-model maps, singular-vector alignment predictors, the
//!   optimal shrinker, and the optimal and gated matrix denoisers.
//! * [`dp`] implements the DP-SGD mechanism (per-example clipping, Poisson
//!   sampling, Gaussian noise) with a per-layer denoising hook and cosine
//!   improvement telemetry.
//! * [`harness`] provides desk-scale toy models, synthetic tasks, planted
//!   signal generators and the experiment drivers (races, spectra, kappa
//!   tuning, Monte-Carlo validation suites).
//!
//! Data-parallel loops go through [`exec::Execution`]. With the default
//! `parallel` feature they run on rayon; without it every call falls back to
//! a sequential loop producing identical results.

// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dp;
pub mod error;
pub mod exec;
pub mod harness;
pub mod rmt;
pub mod rng;

pub use error::{Error, Result};
pub use exec::Execution;
pub use rmt::{
    alignment_left, alignment_right, bbp_threshold, bulk_edge, denoise_gated, denoise_optimal,
    forward_map, invert_map, optimal_shrinker, svd, DenoiseConfig, DenoiseReport, DenseMatrix,
    NoiseSpec, SvdFactors,
};
