use memsim::config::{parse_config, EmulatorDoc, ExperimentConfig, RunDoc, SimDoc};
use memsim::fingerprint::{charge_law_error, lobe_areas, pinch_residual};
use memsim::network::{simulate, CompositeSpec, Wiring};
use memsim::{
    derive_coefficients, integrate, steady_window, EmulatorConfig, Fidelity, Mode, SourceSpec, Tone,
};
use proptest::prelude::*;

fn simplified(mode: Mode) -> EmulatorConfig {
    EmulatorConfig::grounded()
        .with_fidelity(Fidelity::Simplified)
        .with_mode(mode)
}

fn mode() -> impl Strategy<Value = Mode> {
    prop_oneof![Just(Mode::Incremental), Just(Mode::Decremental)]
}

fn max_abs(x: &[f64]) -> f64 {
    x.iter().fold(0.0, |m, v| m.max(v.abs()))
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 12, ..ProptestConfig::default() })]

    #[test]
    fn charge_law_holds_for_any_tone(amp in 0.02f64..0.2, f in 2e5f64..5e6, mode in mode()) {
        let cfg = simplified(mode);
        let tr = integrate(&cfg, &SourceSpec::sine(amp, f), 6.0 / f, 1.0 / (2000.0 * f)).unwrap();
        let co = derive_coefficients(&cfg).unwrap();
        prop_assert!(charge_law_error(&tr, &co) < 1e-6);
    }

    #[test]
    fn charge_law_holds_for_irregular_drive(
        parts in prop::collection::vec((0.005f64..0.05, 1e5f64..2e6, 0.0f64..std::f64::consts::TAU), 2..5),
    ) {
        let tones: Vec<Tone> = parts
            .iter()
            .map(|&(amplitude, frequency, phase)| Tone { amplitude, frequency, phase })
            .collect();
        let src = SourceSpec::multi_tone(tones).with_dc_flux_removal(false);
        let f_max = src.f_max().unwrap();
        let cfg = simplified(Mode::Incremental);
        let tr = integrate(&cfg, &src, 1e-5, 1.0 / (2000.0 * f_max)).unwrap();
        let co = derive_coefficients(&cfg).unwrap();
        prop_assert!(charge_law_error(&tr, &co) < 1e-6);
    }

    #[test]
    fn current_vanishes_with_flux(amp in 0.02f64..0.2, f in 2e5f64..5e6, mode in mode()) {
        let tr = integrate(&simplified(mode), &SourceSpec::sine(amp, f), 4.0 / f, 1.0 / (2000.0 * f)).unwrap();
        for k in 0..tr.len() {
            if tr.phi[k] == 0.0 {
                prop_assert_eq!(tr.i[k], 0.0);
            }
        }
        let w = steady_window(&tr, f, 1).unwrap();
        prop_assert!(pinch_residual(&w).unwrap() < 1e-9);
    }

    #[test]
    fn mirror_negates_memory_term(amp in 0.02f64..0.2, f in 2e5f64..5e6) {
        let src = SourceSpec::sine(amp, f);
        let (t_end, dt) = (4.0 / f, 1.0 / (2000.0 * f));
        let inc = integrate(&simplified(Mode::Incremental), &src, t_end, dt).unwrap();
        let dec = integrate(&simplified(Mode::Decremental), &src, t_end, dt).unwrap();
        let a = derive_coefficients(&simplified(Mode::Incremental)).unwrap().a;
        for k in 0..inc.len() {
            prop_assert!((inc.linv[k] + dec.linv[k] - 2.0 * a).abs() < 1e-9 * a);
        }
        let (wi, wd) = (steady_window(&inc, f, 1).unwrap(), steady_window(&dec, f, 1).unwrap());
        let (ip, in_) = lobe_areas(&wi).unwrap();
        let (dp, dn) = lobe_areas(&wd).unwrap();
        prop_assert!(((ip.abs() - dp.abs()) / ip.abs()).abs() < 5e-3);
        prop_assert!(((in_.abs() - dn.abs()) / in_.abs()).abs() < 5e-3);
    }

    #[test]
    fn trace_columns_are_consistent(amp in 0.02f64..0.2, f in 2e5f64..5e6, fid in prop_oneof![
        Just(Fidelity::Simplified), Just(Fidelity::FullIdeal)
    ]) {
        let cfg = EmulatorConfig::grounded().with_fidelity(fid);
        let dt = 1.0 / (2000.0 * f);
        let tr = integrate(&cfg, &SourceSpec::sine(amp, f), 3.0 / f, dt).unwrap();
        for (x, dx) in [(&tr.phi, &tr.vin), (&tr.rho, &tr.phi), (&tr.q, &tr.i)] {
            let err = (1..tr.len() - 1)
                .map(|k| ((x[k + 1] - x[k - 1]) / (2.0 * dt) - dx[k]).abs())
                .fold(0.0, f64::max);
            prop_assert!(err < 1e-3 * max_abs(dx), "err {err}");
        }
    }

    #[test]
    fn parallel_current_is_branch_sum(amp in 0.02f64..0.2, f in 2e5f64..5e6, vb4 in 0.3f64..0.6) {
        let spec = CompositeSpec {
            elements: vec![simplified(Mode::Incremental), simplified(Mode::Decremental).with_vb4(vb4)],
            wiring: Wiring::ParallelSamePolarity,
            drive: SourceSpec::sine(amp, f),
        };
        let (t_end, dt) = (3.0 / f, 1.0 / (2000.0 * f));
        let ct = simulate(&spec, t_end, dt).unwrap();
        for k in 0..ct.composite.len() {
            prop_assert_eq!(ct.composite.i[k], ct.branches[0].i[k] + ct.branches[1].i[k]);
        }
        for (el, br) in spec.elements.iter().zip(&ct.branches) {
            let alone = integrate(el, &spec.drive, t_end, dt).unwrap();
            let scale = max_abs(&alone.i);
            for k in 0..alone.len() {
                prop_assert!((alone.i[k] - br.i[k]).abs() <= 1e-12 * scale);
            }
        }
    }

    #[test]
    fn config_round_trips(
        r1 in 1.0f64..100.0,
        c1 in 1e-11f64..1e-9,
        c2 in 1e-11f64..1e-9,
        vb4 in 0.3f64..0.6,
        ib in 1e-6f64..1e-4,
        mode in mode(),
        periods in 3usize..40,
    ) {
        let cfg = ExperimentConfig {
            emulator: EmulatorDoc { r1, c1, c2, vb4, ib, mode, ..EmulatorDoc::default() },
            source: SourceSpec::sine(0.1, 1e6),
            sim: SimDoc { periods, ..SimDoc::default() },
            run: Some(RunDoc {}),
            sweep: None,
            mc: None,
            am: None,
            compose: None,
        };
        let back = parse_config(cfg.to_json().as_bytes()).unwrap();
        prop_assert_eq!(&back, &cfg);
        prop_assert_eq!(back.hash(), cfg.hash());
    }
}

#[test]
fn identical_inputs_identical_traces() {
    let cfg = EmulatorConfig::grounded().with_fidelity(Fidelity::NonIdeal);
    let src = SourceSpec::sine(0.14, 1e6);
    let a = integrate(&cfg, &src, 5e-6, 5e-10).unwrap();
    let b = integrate(&cfg, &src, 5e-6, 5e-10).unwrap();
    for (x, y) in [(&a.i, &b.i), (&a.q, &b.q), (&a.linv, &b.linv)] {
        assert!(x.iter().zip(y).all(|(p, q)| p.to_bits() == q.to_bits()));
    }
}
