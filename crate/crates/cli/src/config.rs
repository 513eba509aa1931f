//! Run configuration: a JSON document merged over the built-in defaults.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use rmtdp::dp::{OptimizerConfig, PrivacyMechanismConfig};
use rmtdp::harness::{ModelSpec, RaceConfig, SyntheticTask};
use rmtdp::DenoiseConfig;

use crate::failure::Failure;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DenoiseSection {
    pub enabled: bool,
    pub kappa: f64,
    pub norm_correction: bool,
    pub min_dim: usize,
}

impl DenoiseSection {
    pub fn to_config(&self) -> DenoiseConfig {
        DenoiseConfig { kappa: self.kappa, norm_correction: self.norm_correction, min_dim: self.min_dim }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TelemetrySection {
    pub improvement: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RaceSection {
    pub thresholds: Vec<f64>,
    pub seeds: Vec<u64>,
    pub eval_every: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectraSection {
    pub schedule: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TuneSection {
    pub candidates: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidateSection {
    pub seed: u64,
    /// Overrides the suite's default trial count.
    pub trials: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub model: ModelSpec,
    pub task: SyntheticTask,
    pub mechanism: PrivacyMechanismConfig,
    pub denoise: DenoiseSection,
    pub optimizer: OptimizerConfig,
    pub telemetry: TelemetrySection,
    pub race: RaceSection,
    pub spectra: SpectraSection,
    pub tune: TuneSection,
    pub validate: ValidateSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        let race = RaceConfig::desk_default();
        let denoise = race.denoise.unwrap_or_default();
        let steps = race.mechanism.steps;
        Self {
            model: race.model,
            task: race.task,
            mechanism: race.mechanism,
            denoise: DenoiseSection {
                enabled: true,
                kappa: denoise.kappa,
                norm_correction: denoise.norm_correction,
                min_dim: denoise.min_dim,
            },
            optimizer: race.optimizer,
            telemetry: TelemetrySection { improvement: race.telemetry },
            race: RaceSection { thresholds: race.thresholds, seeds: race.seeds, eval_every: race.eval_every },
            spectra: SpectraSection { schedule: vec![1, steps / 2, steps] },
            tune: TuneSection { candidates: vec![1.01, 1.02, 1.05, 1.1] },
            validate: ValidateSection { seed: 0, trials: None },
        }
    }
}

fn escape(segment: &str) -> String {
    segment.replace('~', "~0").replace('/', "~1")
}

/// Overlays `user` on `base`. Keys absent from `base` are rejected, except
/// inside `/model`, which is replaced wholesale because its fields depend on
/// the model kind.
fn merge(base: &mut Value, user: Value, pointer: &str) -> Result<(), Failure> {
    match (base, user) {
        (Value::Object(base), Value::Object(user)) => {
            for (key, value) in user {
                let child = format!("{pointer}/{}", escape(&key));
                match base.get_mut(&key) {
                    Some(slot) if child == "/model" => *slot = value,
                    Some(slot) => merge(slot, value, &child)?,
                    None => return Err(Failure::usage(format!("config {child}: unknown field `{key}`"))),
                }
            }
            Ok(())
        }
        (slot, value) => {
            *slot = value;
            Ok(())
        }
    }
}

fn pointer_of(path: &serde_path_to_error::Path) -> String {
    use serde_path_to_error::Segment;
    let mut out = String::new();
    for segment in path.iter() {
        match segment {
            Segment::Seq { index } => out.push_str(&format!("/{index}")),
            Segment::Map { key } => out.push_str(&format!("/{}", escape(key))),
            Segment::Enum { variant } => out.push_str(&format!("/{}", escape(variant))),
            Segment::Unknown => out.push_str("/?"),
        }
    }
    out
}

fn invalid_at(prefix: &str, err: rmtdp::Error) -> Failure {
    let pointer = match &err {
        rmtdp::Error::InvalidParameter { name, .. } => format!("{prefix}/{name}"),
        _ => prefix.to_string(),
    };
    Failure::usage(format!("config {pointer}: {err}"))
}

impl RunConfig {
    /// Parses `text` over the defaults and validates every section.
    pub fn from_json(text: &str) -> Result<Self, Failure> {
        let user: Value =
            serde_json::from_str(text).map_err(|e| Failure::usage(format!("config is not valid JSON: {e}")))?;
        if !user.is_object() {
            return Err(Failure::usage("config: top level must be a JSON object"));
        }
        let mut merged = serde_json::to_value(RunConfig::default()).expect("defaults serialize");
        merge(&mut merged, user, "")?;
        let config: RunConfig = serde_path_to_error::deserialize(merged).map_err(|e| {
            let pointer = pointer_of(e.path());
            Failure::usage(format!("config {pointer}: {}", e.inner()))
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), Failure> {
        self.mechanism.validate().map_err(|e| invalid_at("/mechanism", e))?;
        self.optimizer.validate().map_err(|e| invalid_at("/optimizer", e))?;
        self.denoise.to_config().validate().map_err(|e| invalid_at("/denoise", e))?;
        self.task.validate().map_err(|e| invalid_at("/task", e))?;
        self.race_config().validate().map_err(|e| match &e {
            rmtdp::Error::InvalidParameter { name: "model", .. } => invalid_at("", e),
            _ => invalid_at("/race", e),
        })?;
        if let Some(&bad) = self.spectra.schedule.iter().find(|&&s| s == 0 || s > self.mechanism.steps) {
            return Err(Failure::usage(format!(
                "config /spectra/schedule: step {bad} outside 1..={}",
                self.mechanism.steps
            )));
        }
        if self.tune.candidates.is_empty() {
            return Err(Failure::usage("config /tune/candidates: at least one kappa is required"));
        }
        if let Some(i) = self.tune.candidates.iter().position(|&k| !(k.is_finite() && k >= 1.0)) {
            return Err(Failure::usage(format!("config /tune/candidates/{i}: kappa must be >= 1")));
        }
        if self.validate.trials == Some(0) {
            return Err(Failure::usage("config /validate/trials: must be at least 1"));
        }
        Ok(())
    }

    pub fn race_config(&self) -> RaceConfig {
        RaceConfig {
            model: self.model,
            task: self.task,
            mechanism: self.mechanism,
            optimizer: self.optimizer,
            denoise: self.denoise.enabled.then(|| self.denoise.to_config()),
            thresholds: self.race.thresholds.clone(),
            seeds: self.race.seeds.clone(),
            eval_every: self.race.eval_every,
            telemetry: self.telemetry.improvement,
        }
    }

    /// Applies `--seed`: the mechanism seed, consecutive race seeds starting
    /// at `seed`, and the validation root seed.
    pub fn apply_seed(&mut self, seed: u64) {
        self.mechanism.seed = seed;
        let count = self.race.seeds.len() as u64;
        self.race.seeds = (0..count).map(|i| seed + i).collect();
        self.validate.seed = seed;
    }

    pub fn to_pretty_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("config serializes");
        text.push('\n');
        text
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_gives_defaults() {
        assert_eq!(RunConfig::from_json("{}").unwrap(), RunConfig::default());
    }

    #[test]
    fn resolved_config_round_trips() {
        let config = RunConfig::default();
        assert_eq!(RunConfig::from_json(&config.to_pretty_json()).unwrap(), config);
    }

    #[test]
    fn bundled_config_matches_defaults() {
        let text = include_str!("../configs/default.json");
        assert_eq!(RunConfig::from_json(text).unwrap(), RunConfig::default());
    }

    #[test]
    fn partial_sections_keep_other_defaults() {
        let config = RunConfig::from_json(r#"{"mechanism": {"noise_multiplier": 2.5}}"#).unwrap();
        assert_eq!(config.mechanism.noise_multiplier, 2.5);
        assert_eq!(config.mechanism.clip_norm, RunConfig::default().mechanism.clip_norm);
    }

    #[test]
    fn errors_name_the_offending_field() {
        let cases = [
            (r#"{"mechanism": {"clip_norm": "big"}}"#, "/mechanism/clip_norm"),
            (r#"{"mechanism": {"sampling_rate": 1.5}}"#, "/mechanism/sampling_rate"),
            (r#"{"denoise": {"kappa": 0.5}}"#, "/denoise/kappa"),
            (r#"{"optimizer": {"kind": "sgd"}}"#, "/optimizer/kind"),
            (r#"{"race": {"seeds": [1, -2]}}"#, "/race/seeds/1"),
            (r#"{"denoise": {"kapa": 1.1}}"#, "/denoise/kapa"),
            (r#"{"spectra": {"schedule": [0]}}"#, "/spectra/schedule"),
            (r#"{"tune": {"candidates": [1.01, 0.9]}}"#, "/tune/candidates/1"),
            (r#"{"model": {"kind": "mlp-2layer", "input_dim": 32, "hidden_dim": 32, "num_classes": 10}}"#, "/model"),
        ];
        for (text, pointer) in cases {
            let err = RunConfig::from_json(text).unwrap_err();
            assert_eq!(err.code(), 2);
            assert!(err.to_string().contains(pointer), "{text} -> {err}");
        }
    }

    #[test]
    fn seed_override_shifts_every_seed() {
        let mut config = RunConfig::default();
        config.apply_seed(40);
        assert_eq!(config.race.seeds, vec![40, 41, 42, 43, 44]);
        assert_eq!(config.mechanism.seed, 40);
        assert_eq!(config.validate.seed, 40);
    }
}
