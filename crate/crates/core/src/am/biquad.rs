use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BiquadKind {
    BandPass,
    LowPass,
}

/// Second-order section given by its kind, natural frequency and quality
/// factor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BiquadSpec {
    pub kind: BiquadKind,
    /// Hz.
    pub f0: f64,
    #[serde(rename = "Q")]
    pub q: f64,
}

impl BiquadSpec {
    pub fn band_pass(f0: f64, q: f64) -> Self {
        Self {
            kind: BiquadKind::BandPass,
            f0,
            q,
        }
    }

    pub fn low_pass(f0: f64, q: f64) -> Self {
        Self {
            kind: BiquadKind::LowPass,
            f0,
            q,
        }
    }

    pub fn omega0(&self) -> f64 {
        2.0 * std::f64::consts::PI * self.f0
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.f0 > 0.0 && self.f0.is_finite() && self.q > 0.0 && self.q.is_finite()) {
            return Err(Error::Domain(format!(
                "biquad needs f0 > 0 and Q > 0, got f0={} Q={}",
                self.f0, self.q
            )));
        }
        Ok(())
    }

    /// Envelope delay: `2Q/ω0` for a band-pass at its centre, `1/(Q·ω0)`
    /// for a low-pass near DC.
    pub fn group_delay(&self) -> f64 {
        match self.kind {
            BiquadKind::BandPass => 2.0 * self.q / self.omega0(),
            BiquadKind::LowPass => 1.0 / (self.q * self.omega0()),
        }
    }
}

/// `H(jω)`: band-pass `(ω0/Q)s/(s² + (ω0/Q)s + ω0²)`, low-pass
/// `ω0²/(s² + (ω0/Q)s + ω0²)`.
pub fn biquad_response(spec: &BiquadSpec, omega: f64) -> Complex64 {
    let w0 = spec.omega0();
    let s = Complex64::new(0.0, omega);
    let den = s * s + s * (w0 / spec.q) + w0 * w0;
    match spec.kind {
        BiquadKind::BandPass => s * (w0 / spec.q) / den,
        BiquadKind::LowPass => Complex64::new(w0 * w0, 0.0) / den,
    }
}

/// Controllable-canonical realization `x1' = x2`,
/// `x2' = u − ω0²·x1 − (ω0/Q)·x2`.
#[derive(Debug, Clone, Copy)]
pub struct Biquad {
    kind: BiquadKind,
    w0: f64,
    bw: f64,
}

impl Biquad {
    pub const STATES: usize = 2;

    pub fn new(spec: &BiquadSpec) -> Result<Self> {
        spec.validate()?;
        let w0 = spec.omega0();
        Ok(Self {
            kind: spec.kind,
            w0,
            bw: w0 / spec.q,
        })
    }

    pub fn deriv(&self, x: &[f64], u: f64, dx: &mut [f64]) {
        dx[0] = x[1];
        dx[1] = u - self.w0 * self.w0 * x[0] - self.bw * x[1];
    }

    pub fn output(&self, x: &[f64]) -> f64 {
        match self.kind {
            BiquadKind::BandPass => self.bw * x[1],
            BiquadKind::LowPass => self.w0 * self.w0 * x[0],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::Rk4;
    use approx::assert_relative_eq;

    #[test]
    fn band_pass_unity_at_centre() {
        let s = BiquadSpec::band_pass(1e6, 5.0);
        let h = biquad_response(&s, s.omega0());
        assert_relative_eq!(h.re, 1.0, max_relative = 1e-15);
        assert!(h.im.abs() < 1e-15);
    }

    #[test]
    fn low_pass_unity_at_dc() {
        assert_eq!(
            biquad_response(&BiquadSpec::low_pass(5e4, 0.7), 0.0),
            Complex64::new(1.0, 0.0)
        );
    }

    #[test]
    fn band_pass_tenth_of_centre() {
        // scalar complex evaluation: (j·0.1/5)/(1 − 0.01 + j·0.1/5)
        let s = BiquadSpec::band_pass(1e6, 5.0);
        let h = biquad_response(&s, s.omega0() / 10.0);
        assert_relative_eq!(h.norm(), 0.020197899022825545, max_relative = 1e-12);
        assert_relative_eq!(h.arg(), 1.5505970542138288, max_relative = 1e-12);
    }

    /// `(∫h dt, ∫|h| dt)` of the impulse response.
    fn impulse_area(spec: &BiquadSpec) -> (f64, f64) {
        let f = Biquad::new(spec).unwrap();
        let dt = 1.0 / (2000.0 * spec.f0);
        let mut x = vec![0.0, 1.0];
        let mut rk = Rk4::new(2);
        let steps = (60.0 * spec.q / spec.f0 / dt) as usize;
        let (mut area, mut abs_area) = (0.0, 0.0);
        let mut prev = f.output(&x);
        for _ in 0..steps {
            f.deriv(&x, 0.0, &mut rk.k1);
            rk.step_with_k1(|_, x, dx| f.deriv(x, 0.0, dx), 0.0, &mut x, dt);
            let y = f.output(&x);
            area += 0.5 * (prev + y) * dt;
            abs_area += 0.5 * (prev.abs() + y.abs()) * dt;
            prev = y;
        }
        (area, abs_area)
    }

    #[test]
    fn impulse_response_integrates_to_dc_gain() {
        let (lp, _) = impulse_area(&BiquadSpec::low_pass(5e4, std::f64::consts::FRAC_1_SQRT_2));
        assert!((lp - 1.0).abs() < 0.01);
        let (bp, bp_abs) = impulse_area(&BiquadSpec::band_pass(1e6, 5.0));
        assert!(bp.abs() < 0.01 * bp_abs);
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(BiquadSpec::band_pass(0.0, 1.0).validate().is_err());
        assert!(BiquadSpec::low_pass(1.0, -1.0).validate().is_err());
    }
}
