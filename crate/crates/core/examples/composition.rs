//! Two identical emulators in parallel (shared voltage) and in series
//! (shared current).

use memsim::fingerprint::loop_metrics;
use memsim::network::{simulate, CompositeSpec, Wiring};
use memsim::{steady_window, EmulatorConfig, Fidelity, SourceSpec};

fn main() -> memsim::Result<()> {
    let el = EmulatorConfig::grounded().with_fidelity(Fidelity::Simplified);
    let f = 1e6;
    let (t_end, dt) = (6.0 / f, 1.0 / (2000.0 * f));

    for (wiring, drive) in [
        (Wiring::ParallelSamePolarity, SourceSpec::sine(0.14, f)),
        (Wiring::SeriesSamePolarity, SourceSpec::sine(1e-5, f)),
    ] {
        let spec = CompositeSpec {
            elements: vec![el, el],
            wiring,
            drive,
        };
        let ct = simulate(&spec, t_end, dt)?;
        let m = loop_metrics(&steady_window(&ct.composite, f, 1)?)?;
        let last = ct.composite.len() - 1;
        println!("{wiring:?}");
        println!(
            "  composite  phi {:+.4e} Wb  i {:+.4e} A  linv {:.4e} 1/H",
            ct.composite.phi[last], ct.composite.i[last], ct.composite.linv[last]
        );
        for (k, b) in ct.branches.iter().enumerate() {
            println!(
                "  branch {}   phi {:+.4e} Wb  i {:+.4e} A  linv {:.4e} 1/H",
                k + 1,
                b.phi[last],
                b.i[last],
                b.linv[last]
            );
        }
        println!(
            "  pinch residual {:.2e}, normalized area {:.4}",
            m.pinch_residual, m.area_normalized
        );
    }
    Ok(())
}
