use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use rmtdp::harness::validate::Suite;

mod commands;
mod config;
mod failure;
mod output;

use config::RunConfig;
use failure::Failure;

#[derive(Parser, Debug)]
#[command(name = "rmtdp", version, about = "Spectral denoising of DP-SGD gradients: validation, races and reports")]
struct Cli {
    /// JSON run configuration; omitted fields take the built-in defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Root seed overriding the configuration's seeds.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory.
    #[arg(long, global = true, default_value = "rmtdp-out")]
    out: PathBuf,

    /// Suppress progress and summaries on stdout.
    #[arg(long, short, global = true)]
    quiet: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Denoise one matrix file (CSV, or binary for any other extension).
    Denoise {
        #[arg(long)]
        input: PathBuf,
        /// Per-entry noise standard deviation.
        #[arg(long)]
        sigma: f64,
        #[arg(long)]
        kappa: Option<f64>,
        #[arg(long)]
        no_norm_correction: bool,
        #[arg(long)]
        min_dim: Option<usize>,
        /// Output matrix path, relative to the output directory.
        #[arg(long, default_value = "denoised.csv")]
        output: PathBuf,
    },
    /// Run a Monte-Carlo validation suite; exit 1 if any gate fails.
    Validate {
        #[arg(long, value_parser = parse_suite)]
        suite: Suite,
        #[arg(long)]
        trials: Option<usize>,
    },
    /// Noiseless, baseline and denoised training runs for every seed.
    Race,
    /// Race each kappa candidate and report the best.
    TuneKappa {
        #[arg(long, value_delimiter = ',')]
        candidates: Option<Vec<f64>>,
    },
    /// Singular-value spectra of clipped and noisy layer gradients.
    Spectra {
        #[arg(long, value_delimiter = ',')]
        schedule: Option<Vec<usize>>,
    },
}

fn parse_suite(s: &str) -> Result<Suite, String> {
    s.parse().map_err(|e: rmtdp::Error| e.to_string())
}

fn load_config(cli: &Cli) -> Result<RunConfig, Failure> {
    let mut config = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Failure::usage(format!("cannot read config {}: {e}", path.display())))?;
            RunConfig::from_json(&text)?
        }
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.apply_seed(seed);
    }
    Ok(config)
}

fn run(cli: Cli) -> Result<(), Failure> {
    let mut config = load_config(&cli)?;
    let ctx = commands::Context { out: &cli.out, quiet: cli.quiet };
    match cli.command {
        Command::Denoise { input, sigma, kappa, no_norm_correction, min_dim, output } => {
            if let Some(k) = kappa {
                config.denoise.kappa = k;
            }
            if no_norm_correction {
                config.denoise.norm_correction = false;
            }
            if let Some(d) = min_dim {
                config.denoise.min_dim = d;
            }
            config.validate()?;
            commands::denoise(&ctx, &config, &input, sigma, &output)
        }
        Command::Validate { suite, trials } => {
            if trials.is_some() {
                config.validate.trials = trials;
            }
            config.validate()?;
            commands::validate(&ctx, &config, suite)
        }
        Command::Race => commands::race(&ctx, &config),
        Command::TuneKappa { candidates } => {
            if let Some(c) = candidates {
                config.tune.candidates = c;
            }
            config.validate()?;
            commands::tune_kappa(&ctx, &config)
        }
        Command::Spectra { schedule } => {
            if let Some(s) = schedule {
                config.spectra.schedule = s;
            }
            config.validate()?;
            commands::spectra(&ctx, &config)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("rmtdp: {failure}");
            ExitCode::from(failure.code())
        }
    }
}
