//! Spectral mathematics for the spiked signal-plus-noise model.

mod denoise;
pub mod io;
mod matrix;
mod spectral;
mod svd;

pub use denoise::{
    denoise_gated, denoise_optimal, hard_truncate, DenoiseConfig, DenoiseReport, ShrunkValue,
};
pub use matrix::DenseMatrix;
pub use spectral::{
    alignment_left, alignment_right, bbp_threshold, bulk_edge, forward_map, invert_map,
    optimal_shrinker, NoiseSpec,
};
pub use svd::{singular_values, svd, SvdFactors};
