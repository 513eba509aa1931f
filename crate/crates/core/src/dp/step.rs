use rand::Rng;

use super::improvement::{improvement_metric, ImprovementRecord};
use super::mechanism::{clip_gradient, draw_noise, effective_sigma, sum_gradients, PrivacyMechanismConfig};
use super::optimizer::OptimizerState;
use super::partition::{denoise_partition, LayerDenoise, PartitionLayout};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::rmt::DenoiseConfig;

#[derive(Clone, Copy, Debug)]
pub struct Example<'a> {
    pub features: &'a [f64],
    pub label: usize,
}

/// A differentiable classifier over a flat parameter vector.
pub trait Model: Sync {
    fn layout(&self) -> &PartitionLayout;

    /// Cross-entropy loss and its gradient for one example.
    fn loss_and_gradient(&self, params: &[f64], example: Example<'_>) -> (f64, Vec<f64>);

    fn predict(&self, params: &[f64], features: &[f64]) -> usize;
}

/// Everything a step produced, for telemetry and paired-run checks.
#[derive(Clone, Debug)]
pub struct StepOutcome {
    pub batch_size: usize,
    pub mean_loss: f64,
    /// Sum of clipped per-example gradients.
    pub clipped_sum: Vec<f64>,
    /// Gaussian noise added to the sum.
    pub noise: Vec<f64>,
    /// Noisy average handed to the denoiser.
    pub noisy: Vec<f64>,
    /// Gradient actually passed to the optimizer.
    pub update: Vec<f64>,
    pub noise_checksum: f64,
    pub layer_reports: Vec<LayerDenoise>,
    pub improvement: Option<ImprovementRecord>,
}

fn per_example<M: Model>(
    model: &M,
    params: &[f64],
    batch: &[Example<'_>],
    exec: Execution,
    step: usize,
) -> Result<Vec<(f64, Vec<f64>)>> {
    let results = exec.map_slice(batch, |&ex| model.loss_and_gradient(params, ex));
    for (loss, grad) in &results {
        if !loss.is_finite() {
            return Err(Error::NonFiniteStep { what: "loss", step });
        }
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFiniteStep { what: "gradient", step });
        }
    }
    Ok(results)
}

/// One DP-SGD step, optionally followed by denoising before the optimizer.
///
/// Per-example gradients may be computed in parallel; they are clipped and
/// summed in batch order so the result does not depend on the worker count.
/// Noise is always drawn for the full parameter dimension (an empty batch
/// yields a noise-only update with divisor 1). On a non-finite loss or
/// gradient the step is aborted before any randomness is consumed and
/// `params` is left untouched.
#[allow(clippy::too_many_arguments)]
pub fn dp_sgd_step<M: Model, R: Rng + ?Sized>(
    model: &M,
    params: &mut [f64],
    batch: &[Example<'_>],
    mechanism: &PrivacyMechanismConfig,
    optimizer: &mut OptimizerState,
    denoise: Option<&DenoiseConfig>,
    telemetry: bool,
    noise_rng: &mut R,
    exec: Execution,
    step: usize,
) -> Result<StepOutcome> {
    let layout = model.layout();
    let dim = layout.total_dim();
    if params.len() != dim {
        return Err(Error::DimensionMismatch { expected: dim, found: params.len() });
    }

    let results = per_example(model, params, batch, exec, step)?;
    let mean_loss = if results.is_empty() {
        0.0
    } else {
        results.iter().map(|(l, _)| l).sum::<f64>() / results.len() as f64
    };
    let clipped: Vec<Vec<f64>> = results.iter().map(|(_, g)| clip_gradient(g, mechanism.clip_norm)).collect();
    debug_assert!(clipped
        .iter()
        .all(|g| g.iter().map(|x| x * x).sum::<f64>().sqrt() <= mechanism.clip_norm * (1.0 + 1e-12)));

    let clipped_sum = sum_gradients(&clipped, dim)?;
    let noise = draw_noise(dim, mechanism.noise_std(), noise_rng);
    let noise_checksum = noise.iter().sum();
    let divisor = batch.len().max(1);
    let d = divisor as f64;
    let noisy: Vec<f64> = clipped_sum.iter().zip(&noise).map(|(s, w)| (s + w) / d).collect();

    let (update, layer_reports) = match denoise {
        Some(config) => {
            let partition = layout.partition(noisy.clone())?;
            let (denoised, reports) = denoise_partition(&partition, effective_sigma(mechanism, divisor), config)?;
            (denoised.flatten(), reports)
        }
        None => (noisy.clone(), Vec::new()),
    };

    let improvement = if telemetry {
        let d = layout.partition(update.clone())?;
        let n = layout.partition(noisy.clone())?;
        let c = layout.partition(clipped_sum.clone())?;
        improvement_metric(step, &d, &n, &c, &layer_reports)
    } else {
        None
    };

    optimizer.apply(params, &update);

    Ok(StepOutcome {
        batch_size: batch.len(),
        mean_loss,
        clipped_sum,
        noise,
        noisy,
        update,
        noise_checksum,
        layer_reports,
        improvement,
    })
}

/// Non-private minibatch step on the mean per-example gradient.
pub fn sgd_step<M: Model>(
    model: &M,
    params: &mut [f64],
    batch: &[Example<'_>],
    optimizer: &mut OptimizerState,
    exec: Execution,
    step: usize,
) -> Result<f64> {
    let dim = model.layout().total_dim();
    let results = per_example(model, params, batch, exec, step)?;
    let grads: Vec<Vec<f64>> = results.iter().map(|(_, g)| g.clone()).collect();
    let sum = sum_gradients(&grads, dim)?;
    let d = batch.len().max(1) as f64;
    let mean: Vec<f64> = sum.iter().map(|s| s / d).collect();
    optimizer.apply(params, &mean);
    Ok(results.iter().map(|(l, _)| l).sum::<f64>() / d)
}
