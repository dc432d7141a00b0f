//! Loop area against drive frequency, with C1 held fixed and with C1·f held
//! constant.

use memsim::fingerprint::{analytic_lobe_area, area_frequency_profile, Hold, RunSettings};
use memsim::{derive_coefficients, EmulatorConfig, Fidelity};

fn main() -> memsim::Result<()> {
    let settings = RunSettings::default();

    let cfg = EmulatorConfig::grounded().with_fidelity(Fidelity::Simplified);
    let b = derive_coefficients(&cfg)?.b;
    let fixed = area_frequency_profile(
        &cfg,
        0.14,
        &[250e3, 500e3, 1e6, 2e6, 4e6],
        Hold::CFixed,
        &settings,
    )?;
    println!(
        "C1 fixed at 75 pF (monotone decreasing: {})",
        fixed.monotone
    );
    println!(
        "{:>10} {:>12} {:>12} {:>12}",
        "f [Hz]", "normalized", "lobe [Wb·A]", "analytic"
    );
    for p in &fixed.points {
        println!(
            "{:>10.3e} {:>12.5} {:>12.4e} {:>12.4e}",
            p.f,
            p.area_normalized,
            p.lobe_area_pos,
            analytic_lobe_area(b, 0.14, p.f)
        );
    }

    let ladder = [100.0, 500e3, 1e6, 5e6, 8e6, 10e6];
    let held = area_frequency_profile(
        &cfg.with_fidelity(Fidelity::FullIdeal),
        0.14,
        &ladder,
        Hold::c1f_default(),
        &settings,
    )?;
    println!("\nC1·f = 75e-6 F·Hz");
    println!(
        "{:>10} {:>12} {:>12} {:>12}",
        "f [Hz]", "C1 [F]", "normalized", "pinch"
    );
    for p in &held.points {
        println!(
            "{:>10.3e} {:>12.3e} {:>12.5} {:>12.3e}",
            p.f, p.c1, p.area_normalized, p.pinch_residual
        );
    }
    Ok(())
}
