//! 200-run process/mismatch batch: threshold spread and how often the loop
//! stays pinched.

use std::time::Instant;

use memsim::montecarlo::{run_batch, DeviationSpec};
use memsim::{EmulatorConfig, SourceSpec};

fn main() -> memsim::Result<()> {
    let start = Instant::now();
    let spec = DeviationSpec::default();
    let r = run_batch(
        &EmulatorConfig::grounded(),
        &SourceSpec::sine(0.14, 1e6),
        &spec,
    )?;
    println!(
        "{} runs, seed {}, {:.2?}",
        r.records.len(),
        spec.seed,
        start.elapsed()
    );
    println!(
        "Vth   mean {:.4} V  sigma {:.4} V (configured {:.4} V)",
        r.vth.mean, r.vth.sigma, r.vth_sigma_configured
    );
    println!("k     mean {:.4e}  sigma {:.4e} A/V²", r.k.mean, r.k.sigma);
    println!(
        "pinch mean {:.3e}  sigma {:.3e}",
        r.pinch_residual.mean, r.pinch_residual.sigma
    );
    println!(
        "pinched fraction {:.3}, failed runs {}",
        r.pinched_fraction, r.failed_runs
    );
    println!("\nVth histogram");
    let peak = *r.hist_vth.counts.iter().max().unwrap_or(&1);
    for (lo, hi, c) in r.hist_vth.rows() {
        let bar = "#".repeat((40 * c / peak.max(1)) as usize);
        println!("  {lo:.4}..{hi:.4} {c:>4} {bar}");
    }
    Ok(())
}
