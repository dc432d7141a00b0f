use std::f64::consts::FRAC_1_SQRT_2;

use memsim::am::{envelope, run_pipeline, sideband_coefficients, AmConfig, BiquadSpec};

#[test]
fn measured_sidebands_track_phasor_prediction() {
    let cfg = AmConfig::default();
    let r = run_pipeline(&cfg).unwrap();
    let predicted = sideband_coefficients(&cfg).unwrap();
    let rel = (r.sideband_to_carrier() / predicted.sideband_to_carrier() - 1.0).abs();
    assert!(
        rel < 0.25,
        "measured {} predicted {}",
        r.sideband_to_carrier(),
        predicted.sideband_to_carrier()
    );
    assert!(r.margin_db.iter().all(|m| *m >= 20.0));
    assert!(!r.spectrum.leakage);
}

#[test]
fn correlation_degrades_as_lpf_cutoff_drops() {
    let base = AmConfig::default();
    let fm = base.message.frequency;
    let corr: Vec<f64> = [1.0, 0.5, 0.25]
        .iter()
        .map(|scale| {
            let mut cfg = base;
            cfg.lpf = BiquadSpec::low_pass(scale * fm, FRAC_1_SQRT_2);
            run_pipeline(&cfg).unwrap().demod.correlation
        })
        .collect();
    assert!(corr[0] >= 0.95, "{corr:?}");
    assert!(corr[0] > corr[1] && corr[1] > corr[2], "{corr:?}");
}

#[test]
fn envelope_follows_the_message_period() {
    let cfg = AmConfig::default();
    let r = run_pipeline(&cfg).unwrap();
    let tm = 1.0 / cfg.message.frequency;
    let tail = r.signal.s_am.tail(4.0 * tm);
    let env = envelope(&tail, cfg.carrier.frequency);
    let peak_times: Vec<f64> = env
        .windows(3)
        .filter(|w| w[1].1 > w[0].1 && w[1].1 >= w[2].1)
        .map(|w| w[1].0)
        .collect();
    let (lo, hi) = env.iter().fold((f64::INFINITY, 0.0f64), |(l, h), (_, v)| {
        (l.min(*v), h.max(*v))
    });
    assert!(hi > 1.2 * lo, "envelope barely modulated: {lo} .. {hi}");
    // one envelope maximum per message period
    let big: Vec<f64> = peak_times
        .into_iter()
        .filter(|t| env.iter().find(|(x, _)| x == t).unwrap().1 > 0.5 * (lo + hi))
        .collect();
    let gaps: Vec<f64> = big.windows(2).map(|w| w[1] - w[0]).collect();
    assert!(!gaps.is_empty());
    for g in gaps {
        assert!((g / tm - 1.0).abs() < 0.05, "gap {g:e}");
    }
}
