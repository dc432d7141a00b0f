//! Drive waveforms.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tone {
    /// V (or A for current drives).
    pub amplitude: f64,
    /// Hz.
    pub frequency: f64,
    /// rad.
    #[serde(default)]
    pub phase: f64,
}

impl Tone {
    pub fn new(amplitude: f64, frequency: f64, phase: f64) -> Self {
        Self {
            amplitude,
            frequency,
            phase,
        }
    }

    fn omega(&self) -> f64 {
        2.0 * PI * self.frequency
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SourceKind {
    Sine {
        amplitude: f64,
        frequency: f64,
        #[serde(default)]
        phase: f64,
    },
    MultiTone {
        tones: Vec<Tone>,
    },
    /// Uniformly sampled waveform, linearly interpolated.
    Samples {
        dt: f64,
        values: Vec<f64>,
    },
}

/// A drive waveform.
///
/// Periodic tones are cosines `A·cos(ωt + phase)` when `dc_flux_removal` is
/// set (the default), so that the flux `∫v dt` is zero-mean from `t = 0`.
/// Without it they are sines `A·sin(ωt + phase)`, whose flux carries a DC
/// offset `A/ω`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceSpec {
    #[serde(rename = "waveform")]
    pub kind: SourceKind,
    #[serde(default = "default_true")]
    pub dc_flux_removal: bool,
}

fn default_true() -> bool {
    true
}

impl SourceSpec {
    pub fn sine(amplitude: f64, frequency: f64) -> Self {
        Self {
            kind: SourceKind::Sine {
                amplitude,
                frequency,
                phase: 0.0,
            },
            dc_flux_removal: true,
        }
    }

    pub fn multi_tone(tones: Vec<Tone>) -> Self {
        Self {
            kind: SourceKind::MultiTone { tones },
            dc_flux_removal: true,
        }
    }

    pub fn samples(dt: f64, values: Vec<f64>) -> Self {
        Self {
            kind: SourceKind::Samples { dt, values },
            dc_flux_removal: true,
        }
    }

    pub fn zero() -> Self {
        Self::multi_tone(Vec::new())
    }

    pub fn with_phase(mut self, new_phase: f64) -> Self {
        if let SourceKind::Sine { phase, .. } = &mut self.kind {
            *phase = new_phase;
        }
        self
    }

    pub fn with_dc_flux_removal(mut self, on: bool) -> Self {
        self.dc_flux_removal = on;
        self
    }

    /// Tones of a periodic source; empty for sampled sources.
    pub fn tones(&self) -> Vec<Tone> {
        match &self.kind {
            SourceKind::Sine {
                amplitude,
                frequency,
                phase,
            } => vec![Tone::new(*amplitude, *frequency, *phase)],
            SourceKind::MultiTone { tones } => tones.clone(),
            SourceKind::Samples { .. } => Vec::new(),
        }
    }

    /// Highest tone frequency, if any.
    pub fn f_max(&self) -> Option<f64> {
        self.tones()
            .iter()
            .filter(|t| t.amplitude != 0.0)
            .map(|t| t.frequency)
            .fold(None, |m, f| Some(m.map_or(f, |m: f64| m.max(f))))
    }

    /// Lowest tone frequency, if any.
    pub fn f_min(&self) -> Option<f64> {
        self.tones()
            .iter()
            .filter(|t| t.amplitude != 0.0)
            .map(|t| t.frequency)
            .fold(None, |m, f| Some(m.map_or(f, |m: f64| m.min(f))))
    }

    /// End of the sampled range, if the source is sampled.
    pub fn span(&self) -> Option<f64> {
        match &self.kind {
            SourceKind::Samples { dt, values } => {
                Some(*dt * (values.len().saturating_sub(1)) as f64)
            }
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match &self.kind {
            SourceKind::Samples { dt, values } => {
                if !(*dt > 0.0) {
                    return Err(Error::Domain(format!("sample dt must be > 0, got {dt}")));
                }
                if values.len() < 2 {
                    return Err(Error::Domain(
                        "sampled source needs at least 2 values".into(),
                    ));
                }
                if values.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Domain(
                        "sampled source contains non-finite values".into(),
                    ));
                }
            }
            _ => {
                for t in self.tones() {
                    if !(t.frequency > 0.0 && t.frequency.is_finite()) {
                        return Err(Error::Domain(format!(
                            "tone frequency must be > 0, got {}",
                            t.frequency
                        )));
                    }
                    if !(t.amplitude >= 0.0 && t.amplitude.is_finite()) {
                        return Err(Error::Domain(format!(
                            "tone amplitude must be >= 0, got {}",
                            t.amplitude
                        )));
                    }
                    if !t.phase.is_finite() {
                        return Err(Error::Domain("tone phase must be finite".into()));
                    }
                }
            }
        }
        Ok(())
    }

    /// Value at `t`; sampled sources are clamped to their range.
    pub fn value(&self, t: f64) -> f64 {
        match &self.kind {
            SourceKind::Samples { dt, values } => {
                let x = (t / dt).max(0.0);
                let n = values.len() - 1;
                let i = (x.floor() as usize).min(n - 1);
                let frac = (x - i as f64).min(1.0);
                values[i] + frac * (values[i + 1] - values[i])
            }
            _ => self.tone_sum(t, false),
        }
    }

    /// Time derivative at `t`; sampled sources use the slope of the
    /// enclosing segment.
    pub fn derivative(&self, t: f64) -> f64 {
        match &self.kind {
            SourceKind::Samples { dt, values } => {
                let x = (t / dt).max(0.0);
                let n = values.len() - 1;
                let i = (x.floor() as usize).min(n - 1);
                (values[i + 1] - values[i]) / dt
            }
            _ => self.tone_sum(t, true),
        }
    }

    fn tone_sum(&self, t: f64, derivative: bool) -> f64 {
        let mut acc = 0.0;
        let tones: &[Tone] = match &self.kind {
            SourceKind::MultiTone { tones } => tones,
            SourceKind::Sine {
                amplitude,
                frequency,
                phase,
            } => {
                let tone = Tone::new(*amplitude, *frequency, *phase);
                return self.one_tone(&tone, t, derivative);
            }
            SourceKind::Samples { .. } => unreachable!(),
        };
        for tone in tones {
            acc += self.one_tone(tone, t, derivative);
        }
        acc
    }

    fn one_tone(&self, tone: &Tone, t: f64, derivative: bool) -> f64 {
        let w = tone.omega();
        let arg = w * t + tone.phase;
        match (self.dc_flux_removal, derivative) {
            (true, false) => tone.amplitude * arg.cos(),
            (true, true) => -tone.amplitude * w * arg.sin(),
            (false, false) => tone.amplitude * arg.sin(),
            (false, true) => tone.amplitude * w * arg.cos(),
        }
    }

    pub fn describe(&self) -> String {
        let shape = if self.dc_flux_removal { "cos" } else { "sin" };
        match &self.kind {
            SourceKind::Sine {
                amplitude,
                frequency,
                phase,
            } => format!("{amplitude:e}*{shape}(2pi*{frequency:e}*t+{phase:e})"),
            SourceKind::MultiTone { tones } => {
                if tones.is_empty() {
                    return "0".into();
                }
                tones
                    .iter()
                    .map(|t| {
                        format!(
                            "{:e}*{shape}(2pi*{:e}*t+{:e})",
                            t.amplitude, t.frequency, t.phase
                        )
                    })
                    .collect::<Vec<_>>()
                    .join("+")
            }
            SourceKind::Samples { dt, values } => format!("samples(dt={dt:e}, n={})", values.len()),
        }
    }
}

/// Value of `spec` at `t`, with range checking for sampled sources.
pub fn source_eval(spec: &SourceSpec, t: f64) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::OutOfRange(t));
    }
    if let Some(end) = spec.span() {
        if t > end * (1.0 + 1e-12) {
            return Err(Error::OutOfRange(t));
        }
    }
    Ok(spec.value(t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn cosine_at_origin() {
        assert_eq!(
            source_eval(&SourceSpec::sine(0.14, 1e6), 0.0).unwrap(),
            0.14
        );
    }

    #[test]
    fn quadrature_phase_is_zero_at_origin() {
        let s = SourceSpec::sine(0.14, 1e6).with_phase(PI / 2.0);
        assert_abs_diff_eq!(source_eval(&s, 0.0).unwrap(), 0.0, epsilon = 1e-16);
    }

    #[test]
    fn am_message_plus_carrier_at_origin() {
        let s = SourceSpec::multi_tone(vec![Tone::new(0.12, 50e3, 0.0), Tone::new(0.37, 1e6, 0.0)]);
        assert_abs_diff_eq!(source_eval(&s, 0.0).unwrap(), 0.49, epsilon = 1e-15);
    }

    #[test]
    fn sine_convention_without_flux_removal() {
        let s = SourceSpec::sine(1.0, 1.0).with_dc_flux_removal(false);
        assert_eq!(s.value(0.0), 0.0);
        assert_abs_diff_eq!(s.value(0.25), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn samples_interpolate_and_check_range() {
        let s = SourceSpec::samples(1.0, vec![0.0, 2.0, 0.0]);
        assert_eq!(source_eval(&s, 0.5).unwrap(), 1.0);
        assert_eq!(source_eval(&s, 1.5).unwrap(), 1.0);
        assert_eq!(s.derivative(1.5), -2.0);
        assert!(matches!(source_eval(&s, 2.5), Err(Error::OutOfRange(_))));
        assert!(source_eval(&s, -1.0).is_err());
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let s = SourceSpec::multi_tone(vec![Tone::new(0.3, 2.0, 0.4), Tone::new(0.1, 7.0, -1.0)]);
        let h = 1e-6;
        for t in [0.0, 0.13, 0.71] {
            let fd = (s.value(t + h) - s.value(t - h)) / (2.0 * h);
            assert_abs_diff_eq!(s.derivative(t), fd, epsilon = 1e-6);
        }
    }

    #[test]
    fn frequency_bounds() {
        let s = SourceSpec::multi_tone(vec![Tone::new(0.12, 50e3, 0.0), Tone::new(0.37, 1e6, 0.0)]);
        assert_eq!(s.f_max(), Some(1e6));
        assert_eq!(s.f_min(), Some(50e3));
        assert_eq!(SourceSpec::zero().f_max(), None);
    }

    #[test]
    fn rejects_bad_tones() {
        assert!(SourceSpec::sine(0.1, 0.0).validate().is_err());
        assert!(SourceSpec::sine(-0.1, 1.0).validate().is_err());
        assert!(SourceSpec::samples(1.0, vec![1.0]).validate().is_err());
    }
}
