use std::path::Path;

use serde_json::json;

use rmtdp::harness::report::{
    gates_csv, improvement_csv, kappa_csv, races_csv, scatter_csv, spectra_csv, steps_csv, suite_csv,
};
use rmtdp::harness::validate::{run_suite, Suite};
use rmtdp::harness::{self, mean_applied_improvement, scatter_rows, snapshot_spectra, train_race};
use rmtdp::rmt::io::{self, MatrixFormat};
use rmtdp::{denoise_gated, Execution, NoiseSpec};

use crate::config::RunConfig;
use crate::failure::Failure;
use crate::output::OutputDir;

pub struct Context<'a> {
    pub out: &'a Path,
    pub quiet: bool,
}

impl Context<'_> {
    fn say(&self, line: impl AsRef<str>) {
        if !self.quiet {
            println!("{}", line.as_ref());
        }
    }
}

pub fn denoise(ctx: &Context, config: &RunConfig, input: &Path, sigma: f64, output: &Path) -> Result<(), Failure> {
    let matrix = io::read(input).map_err(|e| Failure::usage(format!("{}: {e}", input.display())))?;
    let noise = NoiseSpec::new(sigma).map_err(|e| Failure::usage(format!("--sigma: {e}")))?;
    let (denoised, report) = denoise_gated(&matrix, noise, &config.denoise.to_config())?;

    let dir = OutputDir::create(ctx.out, "denoise")?;
    let target = dir.path(&output.to_string_lossy());
    dir.write_bytes(&target, &io::encode(&denoised, MatrixFormat::from_path(&target)))?;
    dir.write_json(
        "denoise_report.json",
        &json!({
            "input": input,
            "output": target,
            "sigma": sigma,
            "shape": [matrix.rows(), matrix.cols()],
            "report": report,
        }),
    )?;
    dir.write_config(config)?;
    ctx.say(format!(
        "{}x{} matrix: applied={} gate_ratio={:.4} retained_rank={:?} -> {}",
        matrix.rows(),
        matrix.cols(),
        report.applied,
        report.gate_ratio,
        report.retained_rank,
        target.display()
    ));
    Ok(())
}

pub fn validate(ctx: &Context, config: &RunConfig, suite: Suite) -> Result<(), Failure> {
    let trials = config.validate.trials.unwrap_or(suite.default_trials());
    let report = run_suite(suite, trials, config.validate.seed, Execution::Parallel)?;

    let dir = OutputDir::create(ctx.out, "validate")?;
    let seeds = [config.validate.seed];
    dir.write_table(&format!("validate_{suite}.csv"), &suite_csv(&report), config, &seeds)?;
    dir.write_table(&format!("gates_{suite}.csv"), &gates_csv(&report), config, &seeds)?;
    dir.write_config(config)?;

    for g in &report.gates {
        let verdict = if g.passed { "pass" } else { "FAIL" };
        ctx.say(format!("{suite} {}: {:?} (required {}) {verdict}", g.name, g.statistic, g.requirement));
    }
    match report.gates.iter().find(|g| !g.passed) {
        None => Ok(()),
        Some(g) => Err(Failure::gate(format!(
            "suite {suite} failed gate {}: statistic {:?}, required {}",
            g.name, g.statistic, g.requirement
        ))),
    }
}

pub fn race(ctx: &Context, config: &RunConfig) -> Result<(), Failure> {
    let race = config.race_config();
    let seeds = &race.seeds;
    ctx.say(format!("racing {} seeds x {} steps", seeds.len(), race.mechanism.steps));
    let pairs = train_race(&race, Execution::Parallel)?;

    let dir = OutputDir::create(ctx.out, "race")?;
    dir.write_table("races.csv", &races_csv(&pairs), config, seeds)?;
    dir.write_table("steps_to_threshold.csv", &steps_csv(&pairs), config, seeds)?;
    for pair in &pairs {
        let Some(run) = pair.denoised_run.as_ref().filter(|_| race.telemetry) else { continue };
        let seed = [pair.seed];
        dir.write_table(&format!("improvement_seed{}.csv", pair.seed), &improvement_csv(&run.improvements), config, &seed)?;
        let scatter = scatter_csv(&scatter_rows(&run.improvements));
        dir.write_table(&format!("scatter_seed{}.csv", pair.seed), &scatter, config, &seed)?;
    }

    let mut spectra_mechanism = race.mechanism;
    spectra_mechanism.seed = seeds[0];
    let snapshots = snapshot_spectra(
        race.model,
        &race.task,
        &spectra_mechanism,
        &race.optimizer,
        &config.spectra.schedule,
        Execution::Parallel,
    )?;
    dir.write_table("spectra.csv", &spectra_csv(&snapshots), config, &seeds[..1])?;

    let summary: Vec<_> = pairs
        .iter()
        .map(|p| {
            json!({
                "seed": p.seed,
                "reference_accuracy": p.reference_accuracy,
                "baseline": p.baseline.hits,
                "denoised": p.denoised.as_ref().map(|d| &d.hits),
                "failures": [&p.baseline.failure, &p.denoised.as_ref().and_then(|d| d.failure.clone())],
            })
        })
        .collect();
    let improvement = mean_applied_improvement(&pairs);
    dir.write_json("race_summary.json", &json!({ "seeds": summary, "mean_applied_improvement": improvement }))?;
    dir.write_config(config)?;

    if let Some(&fraction) = race.thresholds.first() {
        for p in &pairs {
            ctx.say(format!(
                "seed {}: steps to {:.0}% baseline={} denoised={}",
                p.seed,
                fraction * 100.0,
                fmt_steps(p.baseline.steps_to_fraction(fraction)),
                fmt_steps(p.denoised.as_ref().and_then(|d| d.steps_to_fraction(fraction))),
            ));
        }
    }
    if let Some(i) = improvement {
        ctx.say(format!("mean improvement over applied steps: {i:.4}"));
    }
    ctx.say(format!("wrote {}", ctx.out.display()));
    Ok(())
}

fn fmt_steps(steps: Option<usize>) -> String {
    steps.map_or_else(|| "-".to_string(), |s| s.to_string())
}

pub fn tune_kappa(ctx: &Context, config: &RunConfig) -> Result<(), Failure> {
    let race = config.race_config();
    let tuning = harness::tune_kappa(&config.tune.candidates, &race, Execution::Parallel)?;

    let dir = OutputDir::create(ctx.out, "tune-kappa")?;
    dir.write_table("kappa_tuning.csv", &kappa_csv(&tuning.rows, &race.seeds), config, &race.seeds)?;
    dir.write_json("tuning.json", &json!({ "best": tuning.best, "rows": tuning.rows }))?;
    dir.write_config(config)?;
    for row in &tuning.rows {
        ctx.say(format!(
            "kappa {:?}: mean steps {:.1} (baseline {:.1})",
            row.kappa, row.mean_steps_to, row.baseline_mean_steps_to
        ));
    }
    ctx.say(format!("best kappa {:?}", tuning.best));
    Ok(())
}

pub fn spectra(ctx: &Context, config: &RunConfig) -> Result<(), Failure> {
    let snapshots = snapshot_spectra(
        config.model,
        &config.task,
        &config.mechanism,
        &config.optimizer,
        &config.spectra.schedule,
        Execution::Parallel,
    )?;
    let dir = OutputDir::create(ctx.out, "spectra")?;
    dir.write_table("spectra.csv", &spectra_csv(&snapshots), config, &[config.mechanism.seed])?;
    dir.write_config(config)?;
    for s in &snapshots {
        ctx.say(format!(
            "step {} {}: top noisy {:.4} / edge {:.4} = {:.3}",
            s.step,
            s.layer,
            s.noisy[0],
            s.bulk_edge,
            s.noisy[0] / s.bulk_edge
        ));
    }
    Ok(())
}
