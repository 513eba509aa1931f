//! Acceptance criteria, one PASS/FAIL line each. Exits non-zero if any fail.

use std::time::{Duration, Instant};

use rand::Rng;
use rmtdp::dp::{dp_sgd_step, poisson_sample, sgd_step, OptimizerConfig, OptimizerState, PrivacyMechanismConfig};
use rmtdp::harness::report::{
    improvement_csv, races_csv, scatter_csv, spectra_csv, steps_csv, suite_csv,
};
use rmtdp::harness::validate::{run_suite, Suite, SuiteReport};
use rmtdp::harness::{
    mean_applied_improvement, scatter_rows, snapshot_spectra, train_race, ModelSpec, RaceConfig, RacePair,
    SyntheticTask, TaskKind, ToyModel,
};
use rmtdp::rng::{SeedStreams, INIT, NOISE, SAMPLING};
use rmtdp::{bulk_edge, forward_map, invert_map, Execution, NoiseSpec};

const SEED: u64 = 20240917;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome { passed, detail: detail.into() }
}

fn gates(report: &SuiteReport) -> String {
    report
        .gates
        .iter()
        .map(|g| format!("{}={:.5} ({})", g.name, g.statistic, g.requirement))
        .collect::<Vec<_>>()
        .join(", ")
}

fn timed_suite(suite: Suite, trials: usize, budget: Option<Duration>) -> Outcome {
    let start = Instant::now();
    let report = match run_suite(suite, trials, SEED, Execution::Parallel) {
        Ok(r) => r,
        Err(e) => return outcome(false, e.to_string()),
    };
    let elapsed = start.elapsed();
    let in_time = budget.is_none_or(|b| elapsed < b);
    outcome(report.passed() && in_time, format!("{}; {} trials in {:.1?}", gates(&report), trials, elapsed))
}

fn bbp_law() -> Outcome {
    let noise = NoiseSpec::new(0.1).unwrap();
    let hand = ((3.0 + 4.0 / 3.0) * (3.0f64 + 2.0 / 3.0)).sqrt();
    let value = forward_map(3.0, noise, 200, 400).unwrap();
    let hand_ok = (value - hand).abs() < 1e-12 && (value - 3.986).abs() < 5e-4;
    let suite = timed_suite(Suite::Bbp, 30, Some(Duration::from_secs(30)));
    outcome(suite.passed && hand_ok, format!("forward_map(3)={value:.6}; {}", suite.detail))
}

fn inverse_identity() -> Outcome {
    let mut rng = SeedStreams::new(SEED).stream("inverse");
    let mut worst = 0.0f64;
    for _ in 0..10 {
        let sigma = 10f64.powf(rng.random_range(-3.0..1.0));
        let m = rng.random_range(2..2000);
        let n = rng.random_range(2..2000);
        let noise = NoiseSpec::new(sigma).unwrap();
        let edge = bulk_edge(noise, m, n);
        for k in 1..=100 {
            let y = edge * 100f64.powf(k as f64 / 100.0);
            let back = invert_map(y, noise, m, n).and_then(|l| forward_map(l, noise, m, n));
            match back {
                Ok(v) => worst = worst.max((v - y).abs() / y),
                Err(e) => return outcome(false, format!("y={y} sigma={sigma} m={m} n={n}: {e}")),
            }
        }
    }
    outcome(worst <= 1e-9, format!("max relative error {worst:.3e} over 10 triples x 100 points"))
}

fn mechanism_reduction() -> Outcome {
    let model = ToyModel::new(ModelSpec::Mlp2Layer { input_dim: 24, hidden_dim: 16, num_classes: 5 }).unwrap();
    let task = SyntheticTask {
        kind: TaskKind::PlantedClassifier,
        dataset_size: 500,
        validation_size: 10,
        input_dim: 24,
        num_classes: 5,
        latent_dim: 4,
        label_noise: 0.1,
        seed: SEED,
    };
    let (train, _) = task.generate().unwrap();
    let mech = PrivacyMechanismConfig {
        clip_norm: f64::INFINITY,
        noise_multiplier: 0.0,
        sampling_rate: 0.08,
        steps: 100,
        seed: SEED,
    };
    let streams = SeedStreams::new(SEED);
    let mut private = model.init_params(&mut streams.stream(INIT));
    let mut plain = private.clone();
    let opt = OptimizerConfig::default();
    let mut sp = OptimizerState::new(opt, private.len());
    let mut sq = OptimizerState::new(opt, plain.len());
    let mut sampling = streams.stream(SAMPLING);
    let mut noise = streams.stream(NOISE);
    let mut worst = 0.0f64;
    for step in 1..=100 {
        let batch = train.batch(&poisson_sample(train.len(), mech.sampling_rate, &mut sampling));
        let a = dp_sgd_step(&model, &mut private, &batch, &mech, &mut sp, None, false, &mut noise, Execution::Parallel, step);
        let b = sgd_step(&model, &mut plain, &batch, &mut sq, Execution::Parallel, step);
        if let Err(e) = a.map(|_| ()).and(b.map(|_| ())) {
            return outcome(false, e.to_string());
        }
        let gap = private.iter().zip(&plain).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        worst = worst.max(gap);
    }
    outcome(worst <= 1e-12, format!("max parameter gap {worst:.3e} over 100 steps"))
}

fn race_verdict(pairs: &[RacePair], elapsed: Duration) -> Outcome {
    let paired = pairs.iter().all(|p| p.paired() && !p.failed());
    let improvement = mean_applied_improvement(pairs);
    let wins = pairs
        .iter()
        .filter(|p| {
            let denoised = p.denoised.as_ref().and_then(|d| d.steps_to_fraction(0.9));
            match (denoised, p.baseline.steps_to_fraction(0.9)) {
                (Some(d), Some(b)) => d <= b,
                (Some(_), None) => true,
                (None, _) => false,
            }
        })
        .count();
    let per_seed: Vec<String> = pairs
        .iter()
        .map(|p| {
            let d = p.denoised.as_ref().and_then(|d| d.steps_to_fraction(0.9));
            format!("seed {}: {:?} vs {:?}", p.seed, d, p.baseline.steps_to_fraction(0.9))
        })
        .collect();
    let passed = paired
        && pairs.len() >= 5
        && improvement.is_some_and(|i| i > 0.0)
        && 2 * wins > pairs.len()
        && elapsed < Duration::from_secs(600);
    outcome(
        passed,
        format!(
            "mean applied improvement {:?}; denoised <= baseline steps to 90% in {wins}/{} seeds [{}]; paired={paired}; {:.1?}",
            improvement,
            pairs.len(),
            per_seed.join(", "),
            elapsed
        ),
    )
}

fn race_csvs(pairs: &[RacePair]) -> Vec<String> {
    let mut out = vec![races_csv(pairs), steps_csv(pairs)];
    for p in pairs {
        if let Some(run) = &p.denoised_run {
            out.push(improvement_csv(&run.improvements));
            out.push(scatter_csv(&scatter_rows(&run.improvements)));
        }
    }
    out
}

fn determinism(config: &RaceConfig, first: &[RacePair]) -> Outcome {
    let json = serde_json::to_string(config).unwrap();
    let resolved: RaceConfig = serde_json::from_str(&json).unwrap();
    let replay = match train_race(&resolved, Execution::Parallel) {
        Ok(p) => p,
        Err(e) => return outcome(false, e.to_string()),
    };
    let races_equal = race_csvs(first) == race_csvs(&replay);

    let spectra = || {
        snapshot_spectra(
            resolved.model,
            &resolved.task,
            &resolved.mechanism,
            &resolved.optimizer,
            &[1, 50, 100],
            Execution::Parallel,
        )
        .map(|s| spectra_csv(&s))
    };
    let spectra_equal = matches!((spectra(), spectra()), (Ok(a), Ok(b)) if a == b);

    let suite = || run_suite(Suite::ShrinkerMse, 5, SEED, Execution::Parallel).map(|r| suite_csv(&r));
    let suite_equal = matches!((suite(), suite()), (Ok(a), Ok(b)) if a == b);

    outcome(
        races_equal && spectra_equal && suite_equal,
        format!("race/telemetry/scatter CSVs identical={races_equal}, spectra={spectra_equal}, suite={suite_equal}"),
    )
}

fn report(index: usize, title: &str, result: Outcome, failures: &mut usize) {
    let verdict = if result.passed { "PASS" } else { "FAIL" };
    if !result.passed {
        *failures += 1;
    }
    println!("criterion {index} [{verdict}] {title}: {}", result.detail);
}

fn main() {
    let mut failures = 0;
    let secs = |s| Some(Duration::from_secs(s));
    report(1, "bulk edge", timed_suite(Suite::BulkEdge, 50, secs(30)), &mut failures);
    report(2, "supercritical spike law", bbp_law(), &mut failures);
    report(3, "alignment laws", timed_suite(Suite::Alignment, 30, None), &mut failures);
    report(4, "inverse-map identity", inverse_identity(), &mut failures);
    report(5, "shrinker MSE dominance", timed_suite(Suite::ShrinkerMse, 20, None), &mut failures);
    report(6, "equal-norm block lemma", timed_suite(Suite::Lemma, 1000, None), &mut failures);
    report(7, "mechanism reduction", mechanism_reduction(), &mut failures);

    let config = RaceConfig::desk_default();
    let start = Instant::now();
    match train_race(&config, Execution::Parallel) {
        Ok(pairs) => {
            report(8, "desk-scale race", race_verdict(&pairs, start.elapsed()), &mut failures);
            report(9, "determinism", determinism(&config, &pairs), &mut failures);
        }
        Err(e) => {
            report(8, "desk-scale race", outcome(false, e.to_string()), &mut failures);
            report(9, "determinism", outcome(false, "race did not run"), &mut failures);
        }
    }

    println!("acceptance: {} of 9 criteria passed", 9 - failures);
    if failures > 0 {
        std::process::exit(1);
    }
}
