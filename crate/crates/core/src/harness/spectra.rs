use serde::{Deserialize, Serialize};

use crate::dp::{dp_sgd_step, poisson_sample, LayerRole, Model, OptimizerConfig, OptimizerState, PrivacyMechanismConfig};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::rmt::{bulk_edge, singular_values, DenseMatrix, NoiseSpec};
use crate::rng::{SeedStreams, INIT, NOISE, SAMPLING};

use super::models::{ModelSpec, ToyModel};
use super::task::SyntheticTask;

/// Spectra of one layer's summed clipped gradient and of the same sum with
/// the mechanism's noise added (before averaging), plus the bulk edge for
/// noise level `sigma * C`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumSnapshot {
    pub step: usize,
    pub layer: String,
    pub rows: usize,
    pub cols: usize,
    pub clipped: Vec<f64>,
    pub noisy: Vec<f64>,
    pub bulk_edge: f64,
}

/// Trains the DP-SGD baseline from `mechanism.seed` and records spectra for
/// every matrix layer at the scheduled (1-based) steps.
pub fn snapshot_spectra(
    model_spec: ModelSpec,
    task: &SyntheticTask,
    mechanism: &PrivacyMechanismConfig,
    optimizer: &OptimizerConfig,
    schedule: &[usize],
    exec: Execution,
) -> Result<Vec<SpectrumSnapshot>> {
    mechanism.validate()?;
    if let Some(&bad) = schedule.iter().find(|&&s| s == 0 || s > mechanism.steps) {
        return Err(Error::invalid("schedule", format!("step {bad} outside 1..={}", mechanism.steps)));
    }
    let model = ToyModel::new(model_spec)?;
    let (train, _) = task.generate()?;
    let streams = SeedStreams::new(mechanism.seed);
    let mut params = model.init_params(&mut streams.stream(INIT));
    let mut sampling = streams.stream(SAMPLING);
    let mut noise = streams.stream(NOISE);
    let mut state = OptimizerState::new(*optimizer, params.len());
    let sum_noise = NoiseSpec::new(mechanism.noise_std())?;
    let last = schedule.iter().copied().max().unwrap_or(0);

    let mut snapshots = Vec::new();
    for step in 1..=last {
        let indices = poisson_sample(train.len(), mechanism.sampling_rate, &mut sampling);
        let batch = train.batch(&indices);
        let outcome =
            dp_sgd_step(&model, &mut params, &batch, mechanism, &mut state, None, false, &mut noise, exec, step)?;
        if !schedule.contains(&step) {
            continue;
        }
        for (i, layer) in model.layout().layers().iter().enumerate() {
            if layer.role != LayerRole::Matrix {
                continue;
            }
            let range = model.layout().range(i);
            let clipped = DenseMatrix::new(layer.rows, layer.cols, outcome.clipped_sum[range.clone()].to_vec())?;
            let noisy_sum: Vec<f64> =
                outcome.clipped_sum[range.clone()].iter().zip(&outcome.noise[range]).map(|(c, w)| c + w).collect();
            let noisy = DenseMatrix::new(layer.rows, layer.cols, noisy_sum)?;
            snapshots.push(SpectrumSnapshot {
                step,
                layer: layer.id.clone(),
                rows: layer.rows,
                cols: layer.cols,
                clipped: singular_values(&clipped)?,
                noisy: singular_values(&noisy)?,
                bulk_edge: bulk_edge(sum_noise, layer.rows, layer.cols),
            });
        }
    }
    Ok(snapshots)
}
