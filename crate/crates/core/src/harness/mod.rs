//! Desk-scale models, synthetic data and experiment drivers.

mod models;
mod planted;
mod race;
pub mod report;
mod scatter;
mod spectra;
mod task;
pub mod validate;

pub use models::{ModelSpec, ToyModel};
pub use planted::{make_planted_matrix, random_orthonormal, PlantedMatrix};
pub use race::{
    mean_applied_improvement, steps_to, train_race, train_run, tune_kappa, KappaRow, KappaTuning, Method, RaceConfig,
    RacePair, RaceResult, StepTrace, ThresholdHit, TrainingRun,
};
pub use scatter::{improvement_scatter, scatter_rows, ScatterRow};
pub use spectra::{snapshot_spectra, SpectrumSnapshot};
pub use task::{Dataset, SyntheticTask, TaskKind};
