use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use markovopt_cli::config::{resolve_config, CONFIG_KEYS_HELP};
use markovopt_cli::{runner, summarize, verify, HarnessError};

/// Stochastic optimization benchmarks over Markovian data streams.
#[derive(Parser)]
#[command(name = "markovopt", version, after_long_help = CONFIG_KEYS_HELP)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment preset and write the per-seed metric CSV.
    Run(RunArgs),
    /// Aggregate a run CSV over seeds (mean and 95% confidence half-width).
    Summarize(SummarizeArgs),
    /// Run the invariant suites with fixed seeds; exits 1 on any failure.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Experiment preset: fig1|fig2|nonconvex|td|custom.
    #[arg(long)]
    experiment: Option<String>,
    /// Problem scale: desk|full (default desk).
    #[arg(long)]
    scale: Option<String>,
    /// Base seed (MARKOVOPT_SEED overrides this flag).
    #[arg(long)]
    seed: Option<u64>,
    /// Number of seeds to run.
    #[arg(long)]
    seeds: Option<u32>,
    /// Output CSV path.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Parallel runs (0 = all cores).
    #[arg(long)]
    jobs: Option<usize>,
    /// Flat key=value config file (flags and trailing overrides win).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Trailing KEY=VALUE overrides; see --help for the key list.
    #[arg(value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Args)]
struct SummarizeArgs {
    /// Input run CSV.
    #[arg(long = "in")]
    input: PathBuf,
    /// Output summary CSV.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct VerifyArgs {
    /// Suite: chains|estimators|optim|problems|all.
    #[arg(long, default_value = "all")]
    suite: String,
}

fn run(args: &RunArgs) -> Result<(), HarnessError> {
    let mut pairs: Vec<(String, String)> = Vec::new();
    for item in &args.overrides {
        let (k, v) = item.split_once('=').ok_or_else(|| {
            HarnessError::Config(format!("override {item:?} is not of the form KEY=VALUE"))
        })?;
        pairs.push((k.trim().to_string(), v.trim().to_string()));
    }
    let mut config = resolve_config(
        args.experiment.as_deref(),
        args.scale.as_deref(),
        args.config.as_deref(),
        &pairs,
    )?;
    if let Some(seed) = args.seed {
        config.base_seed = seed;
    }
    if let Ok(env_seed) = std::env::var("MARKOVOPT_SEED") {
        config.base_seed = env_seed
            .parse()
            .map_err(|e| HarnessError::Config(format!("bad MARKOVOPT_SEED {env_seed:?}: {e}")))?;
    }
    if let Some(seeds) = args.seeds {
        config.seeds = seeds;
    }
    if let Some(out) = &args.out {
        config.out = out.clone();
    }
    if let Some(jobs) = args.jobs {
        config.jobs = jobs;
    }
    config.validate()?;
    runner::run_experiment(&config)?;
    println!("wrote {}", config.out.display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome: Result<bool, HarnessError> = match &cli.command {
        Command::Run(args) => run(args).map(|()| true),
        Command::Summarize(args) => {
            summarize::summarize_file(&args.input, &args.out).map(|report| {
                println!(
                    "summarized {} rows into {} groups -> {}",
                    report.input_rows,
                    report.groups,
                    args.out.display()
                );
                true
            })
        }
        Command::Verify(args) => verify::run_and_report(&args.suite),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
