use serde::{Deserialize, Serialize};

use crate::dp::ImprovementRecord;
use crate::error::Result;
use crate::exec::Execution;

use super::models::ToyModel;
use super::race::{train_run, Method, RaceConfig};

/// Per-layer improvement against the gate ratio for one step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScatterRow {
    pub step: usize,
    pub layer: String,
    pub rows: usize,
    pub cols: usize,
    pub gate_ratio: f64,
    pub improvement: f64,
    pub applied: bool,
}

/// Flattens telemetry into one row per (step, matrix layer). Layers whose
/// improvement is undefined are skipped.
pub fn scatter_rows(records: &[ImprovementRecord]) -> Vec<ScatterRow> {
    records
        .iter()
        .flat_map(|r| {
            r.per_layer.iter().filter_map(move |l| {
                Some(ScatterRow {
                    step: r.step,
                    layer: l.layer.clone(),
                    rows: l.rows,
                    cols: l.cols,
                    gate_ratio: l.gate_ratio,
                    improvement: l.improvement?,
                    applied: l.applied,
                })
            })
        })
        .collect()
}

/// Trains the denoised variant with telemetry from `config.mechanism.seed`.
pub fn improvement_scatter(config: &RaceConfig, exec: Execution) -> Result<Vec<ScatterRow>> {
    config.validate()?;
    let model = ToyModel::new(config.model)?;
    let (train, validation) = config.task.generate()?;
    let denoise = config.denoise.unwrap_or_default();
    let run = train_run(
        &model,
        &train,
        &validation,
        &config.mechanism,
        &config.optimizer,
        Some(&denoise),
        true,
        config.eval_every,
        config.mechanism.seed,
        Method::Denoised,
        exec,
    );
    Ok(scatter_rows(&run.improvements))
}
