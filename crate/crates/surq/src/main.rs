use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use surq::bench;
use surq::config::{self, BenchmarkConfig, ConfigError, PRESETS};
use surq::engine::Criterion;

const EXIT_CONFIG: u8 = 1;
const EXIT_RUNTIME: u8 = 2;

/// Sequential design for estimating quantiles of an expensive function of
/// random inputs.
#[derive(Parser)]
#[command(name = "surq", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a benchmark described by a JSON config.
    Run {
        config: PathBuf,
        /// Output directory.
        #[arg(long, default_value = "results")]
        out: PathBuf,
        /// prob, var, rs or all.
        #[arg(long, default_value = "all")]
        criterion: String,
        #[arg(long)]
        replications: Option<usize>,
        /// Master seed; replication r uses seed + r.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Print the ground-truth quantile of a preset.
    Oracle { preset: String },
    /// List the built-in presets.
    Presets,
}

enum Failure {
    Config(String),
    Runtime(String),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.to_string())
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_CONFIG) } else { ExitCode::SUCCESS };
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_RUNTIME)
        }
    }
}

fn init_threads() -> Result<(), Failure> {
    let Ok(raw) = std::env::var("SURQ_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Failure::Config(format!("SURQ_THREADS must be a positive integer, got `{raw}`")))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| Failure::Runtime(e.to_string()))
}

fn dispatch(cli: Cli) -> Result<(), Failure> {
    init_threads()?;
    match cli.command {
        Command::Presets => {
            for name in PRESETS {
                let c = config::preset(name).expect("listed preset exists");
                println!(
                    "{name:<16} d={:<2} alpha={:<5} N0={:<3} N={:<3} cloud={}",
                    c.experiment.function.dim(),
                    c.experiment.alpha,
                    c.sur.n_initial,
                    c.sur.budget,
                    c.sur.cloud_size
                );
            }
            Ok(())
        }
        Command::Oracle { preset } => {
            let c = config::preset(&preset).ok_or(ConfigError::UnknownPreset(preset))?;
            let oracle = bench::oracle(&c).map_err(|e| Failure::Runtime(e.to_string()))?;
            println!("{}", serde_json::to_string_pretty(&oracle).expect("oracle serializes"));
            Ok(())
        }
        Command::Run { config, out, criterion, replications, seed } => {
            let mut c = config::parse_config(&config)?;
            apply_overrides(&mut c, &criterion, replications, seed)?;
            run(&c, &out)
        }
    }
}

fn apply_overrides(
    c: &mut BenchmarkConfig,
    criterion: &str,
    replications: Option<usize>,
    seed: Option<u64>,
) -> Result<(), Failure> {
    if criterion != "all" {
        let parsed = Criterion::parse(criterion)
            .ok_or_else(|| Failure::Config(format!("unknown criterion `{criterion}` (prob, var, rs or all)")))?;
        c.criteria = vec![parsed];
    }
    if let Some(r) = replications {
        c.experiment.replications = r;
    }
    if let Some(s) = seed {
        c.sur.seed = s;
    }
    c.validate()?;
    Ok(())
}

fn run(c: &BenchmarkConfig, out: &std::path::Path) -> Result<(), Failure> {
    let outcome = bench::run_benchmark(c).map_err(|e| Failure::Runtime(e.to_string()))?;
    let files = bench::write_outputs(out, c, &outcome).map_err(|e| Failure::Runtime(e.to_string()))?;
    for curve in &outcome.summary.curves {
        if let (Some(it), Some(err)) = (curve.iterations.last(), curve.mean.last()) {
            println!("{:<5} iteration {it:>3}: mean error {err:.3}%", curve.criterion.name());
        }
    }
    println!("results: {}", files.results.display());
    println!("summary: {}", files.summary.display());
    if outcome.failed() {
        for f in &outcome.summary.failures {
            eprintln!("replication {} ({}, seed {}) failed: {}", f.replication, f.criterion.name(), f.seed, f.message);
        }
        return Err(Failure::Runtime(format!("{} replication(s) failed", outcome.summary.failures.len())));
    }
    Ok(())
}
