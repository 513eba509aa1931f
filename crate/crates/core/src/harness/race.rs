use serde::{Deserialize, Serialize};

use crate::dp::{
    dp_sgd_step, poisson_sample, ImprovementRecord, LayerDenoise, OptimizerConfig, OptimizerState,
    PrivacyMechanismConfig,
};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::rmt::DenoiseConfig;
use crate::rng::{SeedStreams, INIT, NOISE, SAMPLING};

use super::models::{ModelSpec, ToyModel};
use super::task::{Dataset, SyntheticTask};

/// Everything a race needs. `mechanism.seed` is ignored in favour of `seeds`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RaceConfig {
    pub model: ModelSpec,
    pub task: SyntheticTask,
    pub mechanism: PrivacyMechanismConfig,
    pub optimizer: OptimizerConfig,
    /// `None` runs the baseline only.
    pub denoise: Option<DenoiseConfig>,
    /// Fractions of the noiseless run's final accuracy.
    pub thresholds: Vec<f64>,
    pub seeds: Vec<u64>,
    pub eval_every: usize,
    pub telemetry: bool,
}

impl RaceConfig {
    /// Desk-scale default: two-layer MLP on the low-rank-gradient task.
    pub fn desk_default() -> Self {
        use super::task::TaskKind;
        Self {
            model: ModelSpec::Mlp2Layer { input_dim: 64, hidden_dim: 32, num_classes: 10 },
            task: SyntheticTask {
                kind: TaskKind::PlantedLowrankGradient,
                dataset_size: 5000,
                validation_size: 1000,
                input_dim: 64,
                num_classes: 10,
                latent_dim: 4,
                label_noise: 0.05,
                seed: 0,
            },
            mechanism: PrivacyMechanismConfig {
                clip_norm: 1.0,
                noise_multiplier: 1.0,
                sampling_rate: 0.05,
                steps: 400,
                seed: 0,
            },
            optimizer: OptimizerConfig::default(),
            denoise: Some(DenoiseConfig::default()),
            thresholds: vec![0.9, 0.95],
            seeds: vec![1, 2, 3, 4, 5],
            eval_every: 10,
            telemetry: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.mechanism.validate()?;
        self.optimizer.validate()?;
        self.task.validate()?;
        if let Some(d) = &self.denoise {
            d.validate()?;
        }
        if self.model.input_dim() != self.task.input_dim || self.model.num_classes() != self.task.num_classes {
            return Err(Error::invalid("model", "input_dim and num_classes must match the task"));
        }
        if self.thresholds.iter().any(|t| !(0.0..=1.0).contains(t)) {
            return Err(Error::invalid("thresholds", "must lie in [0, 1]"));
        }
        if self.seeds.is_empty() {
            return Err(Error::invalid("seeds", "at least one seed is required"));
        }
        if self.eval_every == 0 {
            return Err(Error::invalid("eval_every", "must be positive"));
        }
        ToyModel::new(self.model)?;
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// DP-SGD with the noise multiplier forced to zero; sets the accuracy scale.
    Noiseless,
    Baseline,
    Denoised,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Noiseless => "noiseless",
            Method::Baseline => "baseline",
            Method::Denoised => "denoised",
        }
    }
}

/// Randomness consumed by one step, for paired-run replay checks.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepTrace {
    pub batch_size: usize,
    pub batch_checksum: u64,
    pub noise_checksum: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainingRun {
    pub method: Method,
    pub seed: u64,
    /// `(step, validation accuracy)`, starting at step 0.
    pub trace: Vec<(usize, f64)>,
    pub steps: Vec<StepTrace>,
    pub improvements: Vec<ImprovementRecord>,
    pub layer_reports: Vec<(usize, Vec<LayerDenoise>)>,
    pub failure: Option<String>,
    pub final_params: Vec<f64>,
}

/// Runs DP-SGD (optionally denoised) from the seed's `init`, `sampling` and
/// `noise` substreams, evaluating every `eval_every` steps and at the end.
#[allow(clippy::too_many_arguments)]
pub fn train_run(
    model: &ToyModel,
    train: &Dataset,
    validation: &Dataset,
    mechanism: &PrivacyMechanismConfig,
    optimizer: &OptimizerConfig,
    denoise: Option<&DenoiseConfig>,
    telemetry: bool,
    eval_every: usize,
    seed: u64,
    method: Method,
    exec: Execution,
) -> TrainingRun {
    let streams = SeedStreams::new(seed);
    let mut params = model.init_params(&mut streams.stream(INIT));
    let mut sampling = streams.stream(SAMPLING);
    let mut noise = streams.stream(NOISE);
    let mut state = OptimizerState::new(*optimizer, params.len());

    let mut run = TrainingRun {
        method,
        seed,
        trace: vec![(0, model.accuracy(&params, validation))],
        steps: Vec::with_capacity(mechanism.steps),
        improvements: Vec::new(),
        layer_reports: Vec::new(),
        failure: None,
        final_params: Vec::new(),
    };

    for step in 1..=mechanism.steps {
        let indices = poisson_sample(train.len(), mechanism.sampling_rate, &mut sampling);
        let batch = train.batch(&indices);
        let outcome = match dp_sgd_step(
            model,
            &mut params,
            &batch,
            mechanism,
            &mut state,
            denoise,
            telemetry,
            &mut noise,
            exec,
            step,
        ) {
            Ok(o) => o,
            Err(e) => {
                run.failure = Some(e.to_string());
                break;
            }
        };
        run.steps.push(StepTrace {
            batch_size: outcome.batch_size,
            batch_checksum: indices.iter().fold(0u64, |acc, &i| acc.wrapping_mul(31).wrapping_add(i as u64 + 1)),
            noise_checksum: outcome.noise_checksum,
        });
        if let Some(record) = outcome.improvement {
            run.improvements.push(record);
        }
        if telemetry && !outcome.layer_reports.is_empty() {
            run.layer_reports.push((step, outcome.layer_reports));
        }
        if step % eval_every == 0 || step == mechanism.steps {
            run.trace.push((step, model.accuracy(&params, validation)));
        }
    }
    run.final_params = params;
    run
}

/// First evaluation step whose accuracy reaches `target`.
pub fn steps_to(trace: &[(usize, f64)], target: f64) -> Option<usize> {
    trace.iter().find(|(_, acc)| *acc >= target).map(|(step, _)| *step)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdHit {
    pub fraction: f64,
    pub target_accuracy: f64,
    pub steps_to: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RaceResult {
    pub method: Method,
    pub seed: u64,
    pub trace: Vec<(usize, f64)>,
    pub hits: Vec<ThresholdHit>,
    pub final_accuracy: f64,
    pub failure: Option<String>,
}

impl RaceResult {
    fn from_run(run: &TrainingRun, reference: f64, fractions: &[f64]) -> Self {
        let hits = fractions
            .iter()
            .map(|&fraction| {
                let target = fraction * reference;
                ThresholdHit {
                    fraction,
                    target_accuracy: target,
                    steps_to: if run.failure.is_some() { None } else { steps_to(&run.trace, target) },
                }
            })
            .collect();
        Self {
            method: run.method,
            seed: run.seed,
            trace: run.trace.clone(),
            hits,
            final_accuracy: run.trace.last().map(|t| t.1).unwrap_or(0.0),
            failure: run.failure.clone(),
        }
    }

    pub fn steps_to_fraction(&self, fraction: f64) -> Option<usize> {
        self.hits.iter().find(|h| h.fraction == fraction).and_then(|h| h.steps_to)
    }
}

/// Baseline and denoised runs sharing one seed, plus the noiseless reference.
#[derive(Clone, Debug)]
pub struct RacePair {
    pub seed: u64,
    pub reference_accuracy: f64,
    pub noiseless: RaceResult,
    pub baseline: RaceResult,
    pub denoised: Option<RaceResult>,
    pub baseline_run: TrainingRun,
    pub denoised_run: Option<TrainingRun>,
}

impl RacePair {
    pub fn failed(&self) -> bool {
        self.baseline.failure.is_some()
            || self.noiseless.failure.is_some()
            || self.denoised.as_ref().is_some_and(|d| d.failure.is_some())
    }

    /// Both runs drew identical batches and noise at every step.
    pub fn paired(&self) -> bool {
        match &self.denoised_run {
            Some(d) => d.steps == self.baseline_run.steps,
            None => true,
        }
    }
}

/// Runs the noiseless reference, the DP-SGD baseline and (if configured) the
/// denoised variant for every seed. Jobs run concurrently under `exec`; each
/// training run is sequential.
pub fn train_race(config: &RaceConfig, exec: Execution) -> Result<Vec<RacePair>> {
    config.validate()?;
    let model = ToyModel::new(config.model)?;
    let (train, validation) = config.task.generate()?;

    let methods: &[Method] = if config.denoise.is_some() {
        &[Method::Noiseless, Method::Baseline, Method::Denoised]
    } else {
        &[Method::Noiseless, Method::Baseline]
    };
    let jobs: Vec<(u64, Method)> =
        config.seeds.iter().flat_map(|&s| methods.iter().map(move |&m| (s, m))).collect();

    let runs = exec.map_slice(&jobs, |&(seed, method)| {
        let mut mechanism = config.mechanism;
        mechanism.seed = seed;
        if method == Method::Noiseless {
            mechanism.noise_multiplier = 0.0;
        }
        let denoise = if method == Method::Denoised { config.denoise.as_ref() } else { None };
        let telemetry = config.telemetry && method == Method::Denoised;
        train_run(
            &model,
            &train,
            &validation,
            &mechanism,
            &config.optimizer,
            denoise,
            telemetry,
            config.eval_every,
            seed,
            method,
            Execution::Sequential,
        )
    });

    let mut runs = runs.into_iter();
    let mut pairs = Vec::with_capacity(config.seeds.len());
    for &seed in &config.seeds {
        let noiseless = runs.next().unwrap();
        let baseline = runs.next().unwrap();
        let denoised = if config.denoise.is_some() { runs.next() } else { None };
        let reference = noiseless.trace.last().map(|t| t.1).unwrap_or(0.0);
        let result = |run: &TrainingRun| RaceResult::from_run(run, reference, &config.thresholds);
        pairs.push(RacePair {
            seed,
            reference_accuracy: reference,
            noiseless: result(&noiseless),
            baseline: result(&baseline),
            denoised: denoised.as_ref().map(result),
            baseline_run: baseline,
            denoised_run: denoised,
        });
    }
    Ok(pairs)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KappaRow {
    pub kappa: f64,
    /// Mean denoised steps to the first threshold; misses count as
    /// `steps + eval_every`.
    pub mean_steps_to: f64,
    pub per_seed: Vec<Option<usize>>,
    pub baseline_mean_steps_to: f64,
    pub mean_improvement: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct KappaTuning {
    pub best: f64,
    pub rows: Vec<KappaRow>,
    pub races: Vec<(f64, Vec<RacePair>)>,
}

/// Mean `Improvement(t)` over telemetry steps where at least one layer was
/// denoised.
pub fn mean_applied_improvement(pairs: &[RacePair]) -> Option<f64> {
    let values: Vec<f64> = pairs
        .iter()
        .filter_map(|p| p.denoised_run.as_ref())
        .flat_map(|run| run.improvements.iter())
        .filter(|r| r.per_layer.iter().any(|l| l.applied))
        .map(|r| r.improvement)
        .collect();
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

/// Races every candidate and keeps the one with the smallest mean
/// steps-to-threshold on the first threshold; ties go to the smaller kappa.
pub fn tune_kappa(candidates: &[f64], config: &RaceConfig, exec: Execution) -> Result<KappaTuning> {
    if candidates.is_empty() {
        return Err(Error::invalid("candidates", "at least one kappa is required"));
    }
    let fraction = *config
        .thresholds
        .first()
        .ok_or_else(|| Error::invalid("thresholds", "tuning needs at least one threshold"))?;
    let base = config.denoise.unwrap_or_default();
    let penalty = config.mechanism.steps + config.eval_every;
    let mean_steps = |hits: Vec<Option<usize>>| {
        hits.iter().map(|h| h.unwrap_or(penalty) as f64).sum::<f64>() / hits.len() as f64
    };

    let mut rows = Vec::with_capacity(candidates.len());
    let mut races = Vec::with_capacity(candidates.len());
    for &kappa in candidates {
        let cfg = RaceConfig { denoise: Some(base.with_kappa(kappa)), ..config.clone() };
        let pairs = train_race(&cfg, exec)?;
        let per_seed: Vec<Option<usize>> = pairs
            .iter()
            .map(|p| p.denoised.as_ref().and_then(|d| d.steps_to_fraction(fraction)))
            .collect();
        let baseline: Vec<Option<usize>> = pairs.iter().map(|p| p.baseline.steps_to_fraction(fraction)).collect();
        rows.push(KappaRow {
            kappa,
            mean_steps_to: mean_steps(per_seed.clone()),
            per_seed,
            baseline_mean_steps_to: mean_steps(baseline),
            mean_improvement: mean_applied_improvement(&pairs),
        });
        races.push((kappa, pairs));
    }
    let best = rows
        .iter()
        .min_by(|a, b| a.mean_steps_to.total_cmp(&b.mean_steps_to).then(a.kappa.total_cmp(&b.kappa)))
        .map(|r| r.kappa)
        .unwrap();
    Ok(KappaTuning { best, rows, races })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn steps_to_is_first_crossing() {
        let trace = vec![(0, 0.1), (10, 0.5), (20, 0.4), (30, 0.8)];
        assert_eq!(steps_to(&trace, 0.0), Some(0));
        assert_eq!(steps_to(&trace, 0.45), Some(10));
        assert_eq!(steps_to(&trace, 0.7), Some(30));
        assert_eq!(steps_to(&trace, 0.9), None);
    }

    #[test]
    fn desk_default_is_valid() {
        RaceConfig::desk_default().validate().unwrap();
    }
}
