//! The Gm4 bias voltage sets b, and with it the loop area.

use memsim::fingerprint::{loop_metrics, single_tone_run, RunSettings};
use memsim::{derive_coefficients, EmulatorConfig};

fn main() -> memsim::Result<()> {
    println!(
        "{:>8} {:>14} {:>14} {:>12}",
        "Vb4 [V]", "b", "area [Wb·A]", "normalized"
    );
    for vb4 in [0.35, 0.40, 0.45, 0.50] {
        let mut cfg = EmulatorConfig::grounded().with_vb4(vb4);
        cfg.c1 = 150e-12;
        let (_, w) = single_tone_run(&cfg, 0.14, 500e3, &RunSettings::default())?;
        let m = loop_metrics(&w)?;
        println!(
            "{vb4:>8.2} {:>14.4e} {:>14.4e} {:>12.5}",
            derive_coefficients(&cfg)?.b,
            m.lobe_area_pos + m.lobe_area_neg,
            m.area_normalized
        );
    }
    Ok(())
}
