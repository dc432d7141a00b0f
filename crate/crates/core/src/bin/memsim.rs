use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use memsim::{parse_config, run_experiment, Error, ExperimentKind, RunOptions};

/// Meminductor emulator simulator.
#[derive(Debug, Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Single transient run: trace.csv and loop metrics.
    Run(Args),
    /// Area-frequency sweep: sweep.csv.
    Sweep(Args),
    /// Monte Carlo batch: mc_records.csv and histograms.
    Mc(Args),
    /// AM modulation and demodulation: spectrum.csv, demod.csv, am.csv.
    Am(Args),
    /// Two-element composition: composite.csv and branch traces.
    Compose(Args),
}

#[derive(Debug, clap::Args)]
struct Args {
    /// JSON experiment document.
    #[arg(long)]
    config: PathBuf,
    /// Output directory, created if missing.
    #[arg(long)]
    out: PathBuf,
    /// Overrides the Monte Carlo seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (0 = all cores).
    #[arg(long, env = "MEMSIM_THREADS")]
    threads: Option<usize>,
}

fn execute(kind: ExperimentKind, args: &Args) -> Result<(), Error> {
    let text = std::fs::read(&args.config).map_err(|e| Error::io(&args.config, e))?;
    let cfg = parse_config(&text)?;
    let opts = RunOptions { seed: args.seed };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.threads.unwrap_or(0))
        .build()
        .map_err(|e| Error::Domain(format!("thread pool: {e}")))?;
    let outcome = pool.install(|| run_experiment(&cfg, kind, &args.out, &opts))?;
    for f in &outcome.files {
        println!("{}", Path::new(&args.out).join(f).display());
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let (kind, args) = match &cli.command {
        Command::Run(a) => (ExperimentKind::Run, a),
        Command::Sweep(a) => (ExperimentKind::Sweep, a),
        Command::Mc(a) => (ExperimentKind::Mc, a),
        Command::Am(a) => (ExperimentKind::Am, a),
        Command::Compose(a) => (ExperimentKind::Compose, a),
    };
    match execute(kind, args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("memsim: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
