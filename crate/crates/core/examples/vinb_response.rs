//! Sine-probes the linear Vin → VinB path of the time-domain model and
//! compares it with the analytic transfer function.

use std::f64::consts::PI;

use memsim::emulator::vinb_transfer;
use memsim::{integrate, EmulatorConfig, SourceSpec};
use num_complex::Complex64;

fn main() -> memsim::Result<()> {
    let cfg = EmulatorConfig::grounded();
    println!(
        "{:>10} {:>12} {:>12} {:>10} {:>10}",
        "f [Hz]", "|H| sim", "|H| formula", "deg sim", "deg form."
    );
    for k in 0..=8 {
        let f = 1e3 * 10f64.powf(k as f64 / 2.0);
        let dt = 1.0 / (2000.0 * f);
        let tr = integrate(&cfg, &SourceSpec::sine(1e-3, f), 4.0 / f, dt)?;
        let n = 4000;
        let start = tr.len() - 1 - n;
        let project = |x: &[f64]| -> Complex64 {
            (start..start + n)
                .map(|j| x[j] * Complex64::from_polar(1.0, -2.0 * PI * f * tr.t[j]))
                .sum()
        };
        let h = project(&tr.vinb) / project(&tr.vin);
        let want = vinb_transfer(&cfg, 2.0 * PI * f);
        println!(
            "{f:>10.3e} {:>12.5e} {:>12.5e} {:>10.4} {:>10.4}",
            h.norm(),
            want.norm(),
            h.arg().to_degrees(),
            want.arg().to_degrees()
        );
    }
    Ok(())
}
