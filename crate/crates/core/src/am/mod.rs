//! Amplitude modulation with the grounded emulator, band-pass extraction,
//! spectrum and coherent demodulation.
//!
//! The message and carrier are applied together as the emulator's terminal
//! voltage. The ρ-dependent transconductance multiplies the carrier part of
//! the node-B voltage by the doubly integrated message, and a band-pass
//! biquad centred on the carrier keeps the carrier and both sidebands.

mod biquad;
mod spectrum;

use std::f64::consts::{FRAC_1_SQRT_2, PI, SQRT_2};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub use biquad::{biquad_response, Biquad, BiquadKind, BiquadSpec};
pub use spectrum::{db, spectrum, Spectrum};

use crate::device::ota_gm;
use crate::emulator::{vinb_transfer, Emulator, EmulatorConfig, Fidelity, Mode};
use crate::error::{Error, Result};
use crate::sim::{check_finite, Rk4, Trace};
use crate::source::{SourceSpec, Tone};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToneSpec {
    /// V.
    pub amplitude: f64,
    /// Hz.
    pub frequency: f64,
    /// rad.
    #[serde(default)]
    pub phase: f64,
}

impl ToneSpec {
    pub fn new(amplitude: f64, frequency: f64) -> Self {
        Self {
            amplitude,
            frequency,
            phase: 0.0,
        }
    }

    pub fn omega(&self) -> f64 {
        2.0 * PI * self.frequency
    }
}

/// Run length and analysis windows, in message periods.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AmSettings {
    pub dt: f64,
    pub message_periods: usize,
    /// Final periods used for the spectrum.
    pub spectrum_periods: usize,
    /// Final periods used for the correlation.
    pub correlation_periods: usize,
    /// Upper frequency of the emitted spectrum, in carrier multiples.
    pub spectrum_span: f64,
}

impl Default for AmSettings {
    fn default() -> Self {
        Self {
            dt: 5e-10,
            message_periods: 12,
            spectrum_periods: 8,
            correlation_periods: 4,
            spectrum_span: 3.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AmConfig {
    pub message: ToneSpec,
    pub carrier: ToneSpec,
    /// The demodulator multiplies by `A_L·cos(ω_c·t + phase)`.
    pub local_carrier: ToneSpec,
    pub bpf: BiquadSpec,
    pub lpf: BiquadSpec,
    pub emulator: EmulatorConfig,
    pub settings: AmSettings,
}

impl Default for AmConfig {
    /// Message 120 mV at 50 kHz, carrier 370 mV at 1 MHz, local carrier
    /// 450 mV, band-pass Q = 5 at the carrier, 50 kHz Butterworth low-pass,
    /// grounded emulator with C1 = 32 pF, C2 = 150 pF.
    fn default() -> Self {
        let mut emulator = EmulatorConfig::grounded()
            .with_fidelity(Fidelity::FullIdeal)
            .with_mode(Mode::Decremental);
        emulator.c1 = 32e-12;
        emulator.c2 = 150e-12;
        Self {
            message: ToneSpec::new(0.12, 50e3),
            carrier: ToneSpec::new(0.37, 1e6),
            local_carrier: ToneSpec {
                amplitude: 0.45,
                frequency: 1e6,
                phase: -PI / 2.0,
            },
            bpf: BiquadSpec::band_pass(1e6, 5.0),
            lpf: BiquadSpec::low_pass(50e3, FRAC_1_SQRT_2),
            emulator,
            settings: AmSettings::default(),
        }
    }
}

impl AmConfig {
    pub fn validate(&self) -> Result<()> {
        self.bpf.validate()?;
        self.lpf.validate()?;
        self.emulator.validate()?;
        if self.bpf.kind != BiquadKind::BandPass || self.lpf.kind != BiquadKind::LowPass {
            return Err(Error::Domain(
                "bpf must be band_pass and lpf low_pass".into(),
            ));
        }
        let (fm, fc) = (self.message.frequency, self.carrier.frequency);
        if !(fm > 0.0 && fc > 10.0 * fm) {
            return Err(Error::Domain(format!(
                "carrier {fc} Hz must exceed 10x message {fm} Hz"
            )));
        }
        if self.message.amplitude < 0.0 || self.carrier.amplitude < 0.0 {
            return Err(Error::Domain("tone amplitudes must be >= 0".into()));
        }
        if (self.bpf.f0 - fc).abs() > 1e-9 * fc {
            return Err(Error::Domain(format!(
                "band-pass centre {} Hz must equal the carrier",
                self.bpf.f0
            )));
        }
        if self.lpf.f0 < fm * (1.0 - 1e-12) {
            log::warn!(
                "low-pass cutoff {} Hz is below the message frequency {fm} Hz",
                self.lpf.f0
            );
        }
        let s = &self.settings;
        if !(s.dt > 0.0) || s.message_periods < s.spectrum_periods.max(s.correlation_periods) + 2 {
            return Err(Error::Domain(
                "AM run needs dt > 0 and two settling message periods before the analysis windows"
                    .into(),
            ));
        }
        if s.spectrum_periods == 0 || s.correlation_periods == 0 {
            return Err(Error::Domain(
                "analysis windows must be >= 1 message period".into(),
            ));
        }
        Ok(())
    }

    /// Message plus carrier as one drive.
    pub fn drive(&self) -> SourceSpec {
        SourceSpec::multi_tone(vec![
            Tone::new(
                self.message.amplitude,
                self.message.frequency,
                self.message.phase,
            ),
            Tone::new(
                self.carrier.amplitude,
                self.carrier.frequency,
                self.carrier.phase,
            ),
        ])
    }

    fn message_at(&self, t: f64) -> f64 {
        self.message.amplitude * (self.message.omega() * t + self.message.phase).cos()
    }
}

/// Uniformly sampled scalar signal.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Signal {
    pub dt: f64,
    pub t0: f64,
    pub values: Vec<f64>,
}

impl Signal {
    pub fn time(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.dt
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// The final `duration` seconds (rounded to whole samples).
    pub fn tail(&self, duration: f64) -> Signal {
        let n = ((duration / self.dt).round() as usize).min(self.len());
        let start = self.len() - n;
        Signal {
            dt: self.dt,
            t0: self.time(start),
            values: self.values[start..].to_vec(),
        }
    }

    fn rms(&self) -> f64 {
        (self.values.iter().map(|v| v * v).sum::<f64>() / self.len().max(1) as f64).sqrt()
    }

    fn interp(&self, t: f64) -> f64 {
        let x = ((t - self.t0) / self.dt).max(0.0);
        let n = self.len() - 1;
        let k = (x.floor() as usize).min(n.saturating_sub(1));
        let frac = (x - k as f64).min(1.0);
        self.values[k] + frac * (self.values[(k + 1).min(n)] - self.values[k])
    }
}

/// Output of [`modulate`].
#[derive(Debug, Clone, PartialEq)]
pub struct AmSignal {
    /// Band-pass output, A.
    pub s_am: Signal,
    /// Emulator trace under the combined drive.
    pub emulator: Trace,
    /// Delay of the envelope through the extraction filter, s.
    pub envelope_delay: f64,
}

/// Drives the emulator with message plus carrier and band-passes its
/// current, integrating emulator and filter in one fixed-step loop.
pub fn modulate(cfg: &AmConfig, t_end: f64, dt: f64) -> Result<AmSignal> {
    cfg.validate()?;
    let src = cfg.drive();
    let steps = crate::sim::check_span(&src, t_end, dt)?;
    let emu = Emulator::new(&cfg.emulator, Some(dt))?;
    let bpf = Biquad::new(&cfg.bpf)?;
    let ne = emu.state_len();
    let n = ne + Biquad::STATES;

    let f = |t: f64, y: &[f64], dy: &mut [f64]| {
        let vin = src.value(t);
        let out = emu.rhs(&y[..ne], vin, &mut dy[..ne]);
        bpf.deriv(&y[ne..], out.i, &mut dy[ne..]);
        (vin, out)
    };

    let mut y = vec![0.0; n];
    let mut rk = Rk4::new(n);
    let mut trace = Trace::with_capacity(dt, steps + 1, true);
    trace.meta.source = src.describe();
    let mut s_am = Vec::with_capacity(steps + 1);
    for step in 0..=steps {
        let t = step as f64 * dt;
        let (vin, out) = f(t, &y, &mut rk.k1);
        trace.push(t, vin, y[0], y[1], y[2], &out, true);
        s_am.push(bpf.output(&y[ne..]));
        if step == steps {
            break;
        }
        rk.step_with_k1(
            |t, y, dy| {
                f(t, y, dy);
            },
            t,
            &mut y,
            dt,
        );
        check_finite(&y, step + 1, t + dt)?;
    }
    Ok(AmSignal {
        s_am: Signal {
            dt,
            t0: 0.0,
            values: s_am,
        },
        emulator: trace,
        envelope_delay: cfg.bpf.group_delay(),
    })
}

/// `(1 + m·cos ω_m t)·A_c·cos ω_c t`, the reference AM wave.
pub fn textbook_am(cfg: &AmConfig, index: f64, t_end: f64, dt: f64) -> AmSignal {
    let n = (t_end / dt).round() as usize + 1;
    let (wm, wc) = (cfg.message.omega(), cfg.carrier.omega());
    let values = (0..n)
        .map(|k| {
            let t = k as f64 * dt;
            cfg.carrier.amplitude
                * (1.0 + index * (wm * t + cfg.message.phase).cos())
                * (wc * t).cos()
        })
        .collect();
    AmSignal {
        s_am: Signal {
            dt,
            t0: 0.0,
            values,
        },
        emulator: Trace::default(),
        envelope_delay: 0.0,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Demodulated {
    /// Low-pass output with its mean over the correlation window removed.
    pub message_estimate: Signal,
    /// Message delayed by the filter chain's envelope delay.
    pub reference: Signal,
    /// Pearson correlation over the final correlation periods.
    pub correlation: f64,
    /// Total delay applied to the reference, s.
    pub delay: f64,
}

/// Product detection: multiply by the local carrier, low-pass, remove DC and
/// correlate with the message delayed by the band-pass and low-pass group
/// delays.
pub fn demodulate(am: &AmSignal, cfg: &AmConfig) -> Result<Demodulated> {
    cfg.lpf.validate()?;
    let s = &am.s_am;
    if s.len() < 4 {
        return Err(Error::InsufficientLength("AM signal too short".into()));
    }
    let lpf = Biquad::new(&cfg.lpf)?;
    let lo = cfg.local_carrier;
    let wl = lo.omega();
    let dt = s.dt;
    let input = |t: f64| s.interp(t) * lo.amplitude * (wl * t + lo.phase).cos();

    let mut x = [0.0; 2];
    let mut rk = Rk4::new(2);
    let mut out = Vec::with_capacity(s.len());
    for k in 0..s.len() {
        let t = s.time(k);
        out.push(lpf.output(&x));
        if k + 1 == s.len() {
            break;
        }
        lpf.deriv(
            &x,
            s.values[k] * lo.amplitude * (wl * t + lo.phase).cos(),
            &mut rk.k1,
        );
        rk.step_with_k1(|t, x, dx| lpf.deriv(x, input(t), dx), t, &mut x, dt);
        check_finite(&x, k + 1, t + dt)?;
    }
    let full = Signal {
        dt,
        t0: s.t0,
        values: out,
    };
    let in_rms = s.rms();
    if full.rms() < 1e-12 * in_rms || in_rms == 0.0 {
        return Err(Error::Degenerate("demodulated output vanishes".into()));
    }

    let window = cfg.settings.correlation_periods as f64 / cfg.message.frequency;
    let mut est = full.tail(window);
    let mean = est.values.iter().sum::<f64>() / est.len() as f64;
    est.values.iter_mut().for_each(|v| *v -= mean);
    let delay = am.envelope_delay + cfg.lpf.group_delay();
    let reference = Signal {
        dt,
        t0: est.t0,
        values: (0..est.len())
            .map(|k| cfg.message_at(est.time(k) - delay))
            .collect(),
    };
    let correlation = pearson(&est.values, &reference.values);
    Ok(Demodulated {
        message_estimate: est,
        reference,
        correlation,
        delay,
    })
}

pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len()) as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma).powi(2);
        sbb += (y - mb).powi(2);
    }
    if saa == 0.0 || sbb == 0.0 {
        0.0
    } else {
        sab / (saa * sbb).sqrt()
    }
}

/// Phasor prediction of the carrier and sideband amplitudes.
///
/// With `V(ω) = T(jω)·A` the node-B phasor of each tone, `X = V/(jω)` its
/// integral and `x₀` the DC of the integrated node-B voltage from rest, the
/// emulator current `(k/√2)(Λ ± (Gm4/C1)·x)·V_B` contains
///
/// * carrier: `(k/√2)(Λ ± g·x₀)·V_c` (`β₇`),
/// * sidebands: `±(k/√2)·g·½(X_m·V_c + X_c·V_m)` at `ω_c + ω_m` and
///   `±(k/√2)·g·½(X_m*·V_c + X_c·V_m*)` at `ω_c − ω_m`.
///
/// `β₈` is the symmetric part (`X_m·V_c`), `β₈'` the part from the carrier's
/// own integral (`X_c·V_m`), which adds to one sideband and subtracts from
/// the other.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AmSidebandCoeffs {
    /// Carrier amplitude of the emulator current, A.
    pub beta7: f64,
    /// Symmetric sideband amplitude, A.
    pub beta8: f64,
    /// Asymmetric sideband amplitude, A.
    pub beta8p: f64,
    /// `β₈/β₇`
    pub ratio: f64,
    /// Predicted amplitudes after the band-pass, A.
    pub carrier_out: f64,
    pub usb_out: f64,
    pub lsb_out: f64,
    /// `|USB − LSB|/max(USB, LSB)` after the band-pass.
    pub asymmetry: f64,
}

impl AmSidebandCoeffs {
    /// Mean sideband over carrier after the band-pass.
    pub fn sideband_to_carrier(&self) -> f64 {
        0.5 * (self.usb_out + self.lsb_out) / self.carrier_out
    }
}

pub fn sideband_coefficients(cfg: &AmConfig) -> Result<AmSidebandCoeffs> {
    let e = &cfg.emulator;
    let kk = e.ota3.k / SQRT_2;
    let lambda = -e.ota3.vss - 2.0 * e.ota3.vth;
    let g = ota_gm(&e.ota4)? / e.c1;
    let sign = e.mode.sign();
    let (wm, wc) = (cfg.message.omega(), cfg.carrier.omega());
    let phasor = |t: &ToneSpec| Complex64::from_polar(t.amplitude, t.phase);
    let vm = vinb_transfer(e, wm) * phasor(&cfg.message);
    let vc = vinb_transfer(e, wc) * phasor(&cfg.carrier);
    let j = Complex64::i();
    let xm = vm / (j * wm);
    let xc = vc / (j * wc);
    let x0 = -(xm.re + xc.re);

    let beta7 = (kk * (lambda + sign * g * x0) * vc).norm();
    let beta8 = kk * g * 0.5 * (xm.norm() * vc.norm());
    let beta8p = kk * g * 0.5 * (xc.norm() * vm.norm());
    let usb = kk * g * 0.5 * (xm * vc + xc * vm) * biquad_response(&cfg.bpf, wc + wm);
    let lsb = kk * g * 0.5 * (xm.conj() * vc + xc * vm.conj()) * biquad_response(&cfg.bpf, wc - wm);
    let carrier_out = beta7 * biquad_response(&cfg.bpf, wc).norm();
    let (u, l) = (usb.norm(), lsb.norm());
    Ok(AmSidebandCoeffs {
        beta7,
        beta8,
        beta8p,
        ratio: if beta7 > 0.0 { beta8 / beta7 } else { 0.0 },
        carrier_out,
        usb_out: u,
        lsb_out: l,
        asymmetry: if u.max(l) > 0.0 {
            (u - l).abs() / u.max(l)
        } else {
            0.0
        },
    })
}

/// Per-carrier-period peak `|s_am|`, with the period midpoints.
pub fn envelope(s: &Signal, carrier_hz: f64) -> Vec<(f64, f64)> {
    let per = (1.0 / (carrier_hz * s.dt)).round().max(1.0) as usize;
    s.values
        .chunks(per)
        .enumerate()
        .filter(|(_, c)| c.len() == per)
        .map(|(k, c)| {
            let t = s.time(k * per) + 0.5 * per as f64 * s.dt;
            (t, c.iter().fold(0.0f64, |m, v| m.max(v.abs())))
        })
        .collect()
}

/// Everything the AM experiment reports.
#[derive(Debug, Clone, PartialEq)]
pub struct AmReport {
    pub signal: AmSignal,
    pub spectrum: Spectrum,
    pub demod: Demodulated,
    pub predicted: AmSidebandCoeffs,
    pub carrier: f64,
    pub usb: f64,
    pub lsb: f64,
    /// Peak heights over the median floor (up to twice the carrier), dB.
    pub margin_db: [f64; 3],
    pub asymmetry: f64,
}

impl AmReport {
    pub fn sideband_to_carrier(&self) -> f64 {
        0.5 * (self.usb + self.lsb) / self.carrier
    }

    /// Allowed sideband asymmetry: 10 %, or twice the phasor prediction when
    /// the carrier's own integral makes the sidebands unequal.
    pub fn asymmetry_bound(&self) -> f64 {
        0.10f64.max(2.0 * self.predicted.asymmetry)
    }
}

/// Modulate, analyse and demodulate with the configured settings.
pub fn run_pipeline(cfg: &AmConfig) -> Result<AmReport> {
    cfg.validate()?;
    let st = &cfg.settings;
    let tm = 1.0 / cfg.message.frequency;
    let signal = modulate(cfg, st.message_periods as f64 * tm, st.dt)?;
    let window = signal.s_am.tail(st.spectrum_periods as f64 * tm);
    let spec = spectrum(&window.values, window.dt, cfg.message.frequency)?;
    let demod = demodulate(&signal, cfg)?;
    let predicted = sideband_coefficients(cfg)?;
    let (fm, fc) = (cfg.message.frequency, cfg.carrier.frequency);
    let floor = spec.median_floor(2.0 * fc);
    let (lsb, carrier, usb) = (spec.at(fc - fm), spec.at(fc), spec.at(fc + fm));
    let margin = |x: f64| db(x) - db(floor);
    Ok(AmReport {
        margin_db: [margin(lsb), margin(carrier), margin(usb)],
        asymmetry: if usb.max(lsb) > 0.0 {
            (usb - lsb).abs() / usb.max(lsb)
        } else {
            0.0
        },
        signal,
        spectrum: spec,
        demod,
        predicted,
        carrier,
        usb,
        lsb,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn no_message_no_sidebands() {
        let mut cfg = AmConfig::default();
        cfg.message.amplitude = 0.0;
        let c = sideband_coefficients(&cfg).unwrap();
        assert_eq!((c.beta8, c.beta8p), (0.0, 0.0));
    }

    #[test]
    fn textbook_wave_demodulates() {
        let mut cfg = AmConfig::default();
        cfg.local_carrier.phase = 0.0;
        cfg.lpf = BiquadSpec::low_pass(200e3, FRAC_1_SQRT_2);
        let tm = 1.0 / cfg.message.frequency;
        let am = textbook_am(&cfg, 0.5, 8.0 * tm, 5e-10);
        assert!(demodulate(&am, &cfg).unwrap().correlation > 0.999);
    }

    #[test]
    fn quadrature_carrier_loses_message() {
        let mut cfg = AmConfig::default();
        cfg.local_carrier.phase = PI / 2.0;
        cfg.lpf = BiquadSpec::low_pass(200e3, FRAC_1_SQRT_2);
        let tm = 1.0 / cfg.message.frequency;
        let am = textbook_am(&cfg, 0.5, 8.0 * tm, 5e-10);
        assert!(demodulate(&am, &cfg).unwrap().correlation.abs() < 0.1);
    }

    #[test]
    fn rejects_close_carrier() {
        let mut cfg = AmConfig::default();
        cfg.carrier.frequency = 200e3;
        cfg.bpf.f0 = 200e3;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn pearson_basics() {
        assert!((pearson(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]) - 1.0).abs() < 1e-15);
        assert!((pearson(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]) + 1.0).abs() < 1e-15);
    }
}
