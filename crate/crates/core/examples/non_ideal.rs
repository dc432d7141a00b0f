//! Non-ideal tier against the ideal one: OTA poles and delay, conveyor
//! tracking errors and the X-port resistance of the input conveyor.

use memsim::fingerprint::loop_metrics;
use memsim::{integrate, steady_window, EmulatorConfig, Fidelity, SourceSpec};

fn main() -> memsim::Result<()> {
    let f = 1e6;
    let src = SourceSpec::sine(0.14, f);
    let (t_end, dt) = (10.0 / f, 1.0 / (2000.0 * f));
    let full = integrate(&EmulatorConfig::grounded(), &src, t_end, dt)?;
    let peak = full.i.iter().fold(0.0f64, |m, v| m.max(v.abs()));

    let mut ideal_limit = EmulatorConfig::grounded().with_fidelity(Fidelity::NonIdeal);
    for o in [&mut ideal_limit.ota3, &mut ideal_limit.ota4] {
        o.omega_a = 1e12;
        o.tau = 0.0;
        o.ro = 1e12;
    }
    for c in [&mut ideal_limit.ccii1, &mut ideal_limit.cccii2] {
        c.omega_beta = 1e12;
        c.omega_alpha = 1e12;
    }
    ideal_limit.ccii1.rx = 0.0;
    let mut no_rx1 = EmulatorConfig::grounded().with_fidelity(Fidelity::NonIdeal);
    no_rx1.ccii1.rx = 0.0;
    let defaults = EmulatorConfig::grounded().with_fidelity(Fidelity::NonIdeal);

    println!(
        "{:<28} {:>12} {:>10} {:>10}",
        "variant", "rms err/peak", "pinch", "norm area"
    );
    for (name, cfg) in [
        ("ideal limit", ideal_limit),
        ("default parasitics, Rx1=0", no_rx1),
        ("default parasitics", defaults),
    ] {
        let tr = integrate(&cfg, &src, t_end, dt)?;
        let rms = (tr
            .i
            .iter()
            .zip(&full.i)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            / tr.len() as f64)
            .sqrt();
        let m = loop_metrics(&steady_window(&tr, f, 1)?)?;
        println!(
            "{name:<28} {:>12.3e} {:>10.3e} {:>10.4}",
            rms / peak,
            m.pinch_residual,
            m.area_normalized
        );
    }
    Ok(())
}
