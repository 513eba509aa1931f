use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rmt::NoiseSpec;

/// Clipping norm, noise multiplier, sampling rate, step budget and root seed.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrivacyMechanismConfig {
    pub clip_norm: f64,
    pub noise_multiplier: f64,
    pub sampling_rate: f64,
    pub steps: usize,
    pub seed: u64,
}

impl PrivacyMechanismConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.clip_norm > 0.0) {
            return Err(Error::invalid("clip_norm", format!("must be > 0, got {}", self.clip_norm)));
        }
        if !(self.noise_multiplier.is_finite() && self.noise_multiplier >= 0.0) {
            return Err(Error::invalid(
                "noise_multiplier",
                format!("must be finite and >= 0, got {}", self.noise_multiplier),
            ));
        }
        if !(self.sampling_rate > 0.0 && self.sampling_rate <= 1.0) {
            return Err(Error::invalid(
                "sampling_rate",
                format!("must lie in (0, 1], got {}", self.sampling_rate),
            ));
        }
        if self.noise_multiplier > 0.0 && self.clip_norm.is_infinite() {
            return Err(Error::invalid("clip_norm", "must be finite when noise is added"));
        }
        if self.steps == 0 {
            return Err(Error::invalid("steps", "must be positive"));
        }
        Ok(())
    }

    /// Standard deviation of each entry of the noise added to the clipped sum.
    pub fn noise_std(&self) -> f64 {
        if self.noise_multiplier == 0.0 {
            0.0
        } else {
            self.noise_multiplier * self.clip_norm
        }
    }
}

/// Scales `g` by `1 / max(1, |g| / C)`. An infinite `C` never binds.
pub fn clip_gradient(g: &[f64], clip_norm: f64) -> Vec<f64> {
    let norm = g.iter().map(|x| x * x).sum::<f64>().sqrt();
    let divisor = (norm / clip_norm).max(1.0);
    if divisor == 1.0 {
        g.to_vec()
    } else {
        g.iter().map(|x| x / divisor).collect()
    }
}

/// Includes each index independently with probability `rate`. Always draws
/// exactly `dataset_size` uniforms so the stream position depends only on
/// the number of calls.
pub fn poisson_sample<R: Rng + ?Sized>(dataset_size: usize, rate: f64, rng: &mut R) -> Vec<usize> {
    (0..dataset_size).filter(|_| rng.random::<f64>() < rate).collect()
}

/// Entrywise sum in list order.
pub fn sum_gradients(gradients: &[Vec<f64>], dim: usize) -> Result<Vec<f64>> {
    let mut sum = vec![0.0; dim];
    for g in gradients {
        if g.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, found: g.len() });
        }
        for (s, x) in sum.iter_mut().zip(g) {
            *s += x;
        }
    }
    Ok(sum)
}

/// `dim` i.i.d. `N(0, std^2)` entries, drawn as `std * z` so the stream is
/// consumed identically for every `std`, including zero.
pub fn draw_noise<R: Rng + ?Sized>(dim: usize, std: f64, rng: &mut R) -> Vec<f64> {
    (0..dim)
        .map(|_| {
            let z: f64 = rng.sample(StandardNormal);
            if std == 0.0 {
                0.0
            } else {
                std * z
            }
        })
        .collect()
}

/// `(sum(clipped) + w) / divisor` with `w_j ~ N(0, (sigma C)^2)`.
pub fn noisy_aggregate<R: Rng + ?Sized>(
    clipped: &[Vec<f64>],
    dim: usize,
    config: &PrivacyMechanismConfig,
    divisor: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if divisor == 0 {
        return Err(Error::invalid("divisor", "must be positive"));
    }
    let sum = sum_gradients(clipped, dim)?;
    let noise = draw_noise(dim, config.noise_std(), rng);
    let d = divisor as f64;
    Ok(sum.iter().zip(&noise).map(|(s, w)| (s + w) / d).collect())
}

/// Per-entry noise level of the averaged gradient, `sigma C / divisor`.
pub fn effective_sigma(config: &PrivacyMechanismConfig, divisor: usize) -> NoiseSpec {
    let sigma = config.noise_std() / divisor.max(1) as f64;
    NoiseSpec::new(sigma).expect("validated mechanism yields a finite non-negative sigma")
}
