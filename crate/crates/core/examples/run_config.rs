//! Runs an experiment document the same way the `memsim` binary does.
//!
//! `cargo run --release --example run_config -- configs/sweep.json /tmp/sweep`

use std::path::PathBuf;

use memsim::{parse_config, run_experiment, Error, RunOptions};

fn main() -> memsim::Result<()> {
    let mut args = std::env::args().skip(1);
    let config = PathBuf::from(args.next().unwrap_or_else(|| "configs/run.json".into()));
    let out = PathBuf::from(args.next().unwrap_or_else(|| "out".into()));
    let text = std::fs::read(&config).map_err(|e| Error::io(&config, e))?;
    let cfg = parse_config(&text)?;
    println!(
        "{} experiment, config hash {}",
        cfg.kind().name(),
        cfg.hash()
    );
    let outcome = run_experiment(&cfg, cfg.kind(), &out, &RunOptions::default())?;
    for f in &outcome.files {
        println!("wrote {}", out.join(f).display());
    }
    println!(
        "{}",
        serde_json::to_string_pretty(&outcome.summary["metrics"]).expect("json")
    );
    Ok(())
}
