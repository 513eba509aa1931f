use serde::{Deserialize, Serialize};

use super::spectral::{bulk_edge, invert_map, optimal_shrinker, NoiseSpec};
use super::svd::{singular_values, svd, SvdFactors};
use super::DenseMatrix;
use crate::error::{Error, Result};

/// Layer-level gate and post-processing options for [`denoise_gated`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DenoiseConfig {
    /// Gate opens when the top noisy singular value reaches `kappa` bulk edges.
    pub kappa: f64,
    /// Rescale the denoised matrix back to the input's Frobenius norm.
    pub norm_correction: bool,
    /// Both matrix dimensions must be at least this large to denoise.
    pub min_dim: usize,
}

impl DenoiseConfig {
    /// Gate multiple selected by `tune_kappa` on the default synthetic race.
    pub const DEFAULT_KAPPA: f64 = 1.1;
    pub const DEFAULT_MIN_DIM: usize = 16;

    pub fn validate(&self) -> Result<()> {
        if !(self.kappa.is_finite() && self.kappa >= 1.0) {
            return Err(Error::invalid("kappa", format!("must be >= 1, got {}", self.kappa)));
        }
        if self.min_dim == 0 {
            return Err(Error::invalid("min_dim", "must be positive"));
        }
        Ok(())
    }

    pub fn with_kappa(mut self, kappa: f64) -> Self {
        self.kappa = kappa;
        self
    }
}

impl Default for DenoiseConfig {
    fn default() -> Self {
        Self { kappa: Self::DEFAULT_KAPPA, norm_correction: true, min_dim: Self::DEFAULT_MIN_DIM }
    }
}

/// One shrunk component: noisy value, recovered planted value, coefficient.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShrunkValue {
    pub noisy: f64,
    pub recovered: f64,
    pub shrunk: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DenoiseReport {
    pub applied: bool,
    /// Top noisy singular value over the bulk edge. Infinite when the noise
    /// level is zero and the matrix is not.
    pub gate_ratio: f64,
    pub retained_rank: Option<usize>,
    pub shrunk_values: Vec<ShrunkValue>,
    pub norm_rescale_factor: Option<f64>,
}

impl DenoiseReport {
    fn passthrough(gate_ratio: f64) -> Self {
        Self {
            applied: false,
            gate_ratio,
            retained_rank: None,
            shrunk_values: Vec::new(),
            norm_rescale_factor: None,
        }
    }
}

fn ratio(top: f64, edge: f64) -> f64 {
    if edge > 0.0 {
        top / edge
    } else if top > 0.0 {
        f64::INFINITY
    } else {
        0.0
    }
}

/// Shrinks every component strictly above the bulk edge.
fn shrink(factors: &SvdFactors, noise: NoiseSpec, m: usize, n: usize) -> (DenseMatrix, Vec<ShrunkValue>) {
    let edge = bulk_edge(noise, m, n);
    let shrunk: Vec<ShrunkValue> = factors
        .singular_values
        .iter()
        .take_while(|&&y| y > edge)
        .filter_map(|&y| {
            let recovered = invert_map(y, noise, m, n).ok()?;
            Some(ShrunkValue { noisy: y, recovered, shrunk: optimal_shrinker(y, noise, m, n) })
        })
        .collect();
    let coeffs: Vec<f64> = shrunk.iter().map(|s| s.shrunk).collect();
    (factors.reconstruct_with(&coeffs), shrunk)
}

/// Optimal singular value shrinkage: `sum_i eta_i u_i v_i^T` over noisy
/// components above the bulk edge.
pub fn denoise_optimal(matrix: &DenseMatrix, noise: NoiseSpec) -> Result<DenseMatrix> {
    let (m, n) = matrix.shape();
    let factors = svd(matrix)?;
    Ok(shrink(&factors, noise, m, n).0)
}

/// Keeps the top `rank` components with their noisy singular values.
pub fn hard_truncate(matrix: &DenseMatrix, rank: usize) -> Result<DenseMatrix> {
    let factors = svd(matrix)?;
    let keep = rank.min(factors.rank_capacity());
    Ok(factors.reconstruct_with(&factors.singular_values[..keep]))
}

/// Layer denoiser with a kappa gate and optional norm correction.
///
/// The input is returned unchanged when either dimension is below
/// `config.min_dim`, when the noise level is zero, or when the top noisy
/// singular value is below `kappa * bulk_edge`. Otherwise the optimal
/// shrinkage is applied to every component above one bulk edge and, with
/// norm correction, rescaled to the input's Frobenius norm. A denoised result
/// that is exactly zero cannot be rescaled and also yields the input.
pub fn denoise_gated(
    matrix: &DenseMatrix,
    noise: NoiseSpec,
    config: &DenoiseConfig,
) -> Result<(DenseMatrix, DenoiseReport)> {
    config.validate()?;
    let (m, n) = matrix.shape();
    let edge = bulk_edge(noise, m, n);

    if noise.is_noiseless() {
        let gate_ratio = if matrix.is_zero() { 0.0 } else { f64::INFINITY };
        return Ok((matrix.clone(), DenoiseReport::passthrough(gate_ratio)));
    }
    if m < config.min_dim || n < config.min_dim {
        let top = singular_values(matrix)?.first().copied().unwrap_or(0.0);
        return Ok((matrix.clone(), DenoiseReport::passthrough(ratio(top, edge))));
    }

    let factors = svd(matrix)?;
    let top = factors.singular_values[0];
    let gate_ratio = ratio(top, edge);
    if top < config.kappa * edge {
        return Ok((matrix.clone(), DenoiseReport::passthrough(gate_ratio)));
    }

    let (denoised, shrunk_values) = shrink(&factors, noise, m, n);
    let retained_rank = shrunk_values.iter().filter(|s| s.shrunk > 0.0).count();

    if !config.norm_correction {
        let report = DenoiseReport {
            applied: true,
            gate_ratio,
            retained_rank: Some(retained_rank),
            shrunk_values,
            norm_rescale_factor: None,
        };
        return Ok((denoised, report));
    }

    let denoised_norm = denoised.frobenius_norm();
    if denoised_norm == 0.0 {
        return Ok((matrix.clone(), DenoiseReport::passthrough(gate_ratio)));
    }
    let factor = matrix.frobenius_norm() / denoised_norm;
    let report = DenoiseReport {
        applied: true,
        gate_ratio,
        retained_rank: Some(retained_rank),
        shrunk_values,
        norm_rescale_factor: Some(factor),
    };
    Ok((denoised.scaled(factor), report))
}
