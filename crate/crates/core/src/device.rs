//! Behavioral port models of the active blocks: OTA, CCII and CCCII.
//!
//! Static laws (transconductance, X-port resistance) and the first-order
//! frequency-dependent gains used by the non-ideal tier.

use std::f64::consts::{PI, SQRT_2};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// OTA device and bias parameters.
///
/// `k` is the lumped device gain μn·Cox·W/L. `vb` is the bias voltage that
/// sets the transconductance; for the Gm3 stage it is ignored because the
/// bias node is driven by the C1 integrator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OtaParams {
    /// Device gain, A/V².
    pub k: f64,
    #[serde(rename = "Vth")]
    pub vth: f64,
    #[serde(rename = "Vss")]
    pub vss: f64,
    #[serde(rename = "Vdd")]
    pub vdd: f64,
    #[serde(rename = "Vb")]
    pub vb: f64,
    /// First-corner angular frequency of the transconductance, rad/s.
    pub omega_a: f64,
    /// Excess phase delay, s.
    pub tau: f64,
    #[serde(rename = "Ro")]
    pub ro: f64,
    #[serde(rename = "Co")]
    pub co: f64,
    #[serde(rename = "Ci")]
    pub ci: f64,
}

impl Default for OtaParams {
    fn default() -> Self {
        Self {
            k: 1e-3,
            vth: 0.45,
            vss: -1.2,
            vdd: 1.2,
            vb: 0.45,
            omega_a: 2.0 * PI * 200e6,
            tau: 1.25e-9,
            ro: 1e6,
            co: 100e-15,
            ci: 50e-15,
        }
    }
}

impl OtaParams {
    /// Gate overdrive `Vb − Vss − 2·Vth` at the configured bias.
    pub fn overdrive(&self) -> f64 {
        self.vb - self.vss - 2.0 * self.vth
    }

    /// Checks the parameter invariants that do not depend on the bias point.
    pub fn validate(&self) -> Result<()> {
        if !(self.k > 0.0) {
            return Err(Error::Domain(format!("OTA k must be > 0, got {}", self.k)));
        }
        if !(self.vdd > 0.0 && self.vss < 0.0) {
            return Err(Error::Domain(format!(
                "OTA rails must satisfy Vdd > 0 > Vss, got Vdd={} Vss={}",
                self.vdd, self.vss
            )));
        }
        if !(self.tau >= 0.0) {
            return Err(Error::Domain(format!(
                "OTA tau must be >= 0, got {}",
                self.tau
            )));
        }
        if !(self.omega_a > 0.0) {
            return Err(Error::Domain(format!(
                "OTA omega_a must be > 0, got {}",
                self.omega_a
            )));
        }
        if !(self.ro > 0.0) || self.co < 0.0 || self.ci < 0.0 {
            return Err(Error::Domain(
                "OTA parasitics must be Ro > 0, Co >= 0, Ci >= 0".into(),
            ));
        }
        Ok(())
    }
}

/// Current-conveyor transfer gains and port parasitics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CcciiParams {
    #[serde(rename = "Rx")]
    pub rx: f64,
    #[serde(rename = "Lx")]
    pub lx: f64,
    #[serde(rename = "Ry")]
    pub ry: f64,
    #[serde(rename = "Cy")]
    pub cy: f64,
    #[serde(rename = "Rz")]
    pub rz: f64,
    #[serde(rename = "Cz")]
    pub cz: f64,
    pub beta0: f64,
    pub alpha0: f64,
    pub omega_beta: f64,
    pub omega_alpha: f64,
}

impl Default for CcciiParams {
    fn default() -> Self {
        Self {
            rx: 5.0,
            lx: 150e-6,
            ry: 1e9,
            cy: 10e-15,
            rz: 1e6,
            cz: 10e-15,
            beta0: 1.0,
            alpha0: 1.0,
            omega_beta: 2.0 * PI * 500e6,
            omega_alpha: 2.0 * PI * 500e6,
        }
    }
}

impl CcciiParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.rx >= 0.0) {
            return Err(Error::Domain(format!(
                "conveyor Rx must be >= 0, got {}",
                self.rx
            )));
        }
        for (name, g) in [("beta0", self.beta0), ("alpha0", self.alpha0)] {
            if !(g > 0.0 && g <= 1.1) {
                return Err(Error::Domain(format!(
                    "conveyor {name} must be in (0, 1.1], got {g}"
                )));
            }
        }
        if !(self.omega_beta > 0.0 && self.omega_alpha > 0.0) {
            return Err(Error::Domain("conveyor poles must be > 0".into()));
        }
        Ok(())
    }
}

/// Complementary MOS pair that sets the CCCII X-port resistance.
///
/// `mu_cox_*` are the process transconductance parameters (A/V²) and
/// `aspect_*` the W/L ratios of the translinear pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MosPair {
    pub mu_cox_n: f64,
    pub aspect_n: f64,
    pub mu_cox_p: f64,
    pub aspect_p: f64,
}

/// Process transconductance parameters of a generic 180 nm process.
pub const MU_COX_N_180NM: f64 = 340e-6;
pub const MU_COX_P_180NM: f64 = 70e-6;

impl MosPair {
    /// Pair with the 180 nm mobilities and a common aspect ratio chosen so
    /// that `cccii_rx(ib_ref) == rx_ref`.
    pub fn calibrated(rx_ref: f64, ib_ref: f64) -> Self {
        let sum = 1.0 / (rx_ref * (2.0 * ib_ref).sqrt());
        let root = sum / (MU_COX_P_180NM.sqrt() + MU_COX_N_180NM.sqrt());
        let aspect = root * root;
        Self {
            mu_cox_n: MU_COX_N_180NM,
            aspect_n: aspect,
            mu_cox_p: MU_COX_P_180NM,
            aspect_p: aspect,
        }
    }

    /// Same pair with every μCox scaled by `ratio` (oxide capacitance shift).
    pub fn scaled(&self, ratio: f64) -> Self {
        Self {
            mu_cox_n: self.mu_cox_n * ratio,
            mu_cox_p: self.mu_cox_p * ratio,
            ..*self
        }
    }
}

impl Default for MosPair {
    /// Effective pair giving Rx = 2 Ω at Ib = 20 µA.
    fn default() -> Self {
        Self::calibrated(2.0, 20e-6)
    }
}

/// Operating regime for [`ota_gamma`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// Single-pole roll-off only.
    Low,
    /// Single pole plus excess phase delay.
    High,
}

/// Output polarity of an OTA port.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Port {
    Positive,
    Negative,
}

/// Square-law OTA transconductance `(k/√2)·(Vb − Vss − 2·Vth)`.
pub fn ota_gm(p: &OtaParams) -> Result<f64> {
    let od = p.overdrive();
    if od < 0.0 {
        return Err(Error::Domain(format!(
            "OTA out of saturation: Vb - Vss - 2Vth = {od} < 0"
        )));
    }
    Ok(p.k / SQRT_2 * od)
}

pub fn ota_current(gm: f64, v_plus: f64, v_minus: f64, port: Port) -> f64 {
    let i = gm * (v_plus - v_minus);
    match port {
        Port::Positive => i,
        Port::Negative => -i,
    }
}

/// X-port resistance of the CCCII as a function of its bias current.
pub fn cccii_rx(ib: f64, pair: &MosPair) -> Result<f64> {
    if !(ib > 0.0) {
        return Err(Error::Domain(format!(
            "CCCII bias current must be > 0, got {ib}"
        )));
    }
    let g = (2.0 * ib).sqrt()
        * ((pair.mu_cox_p * pair.aspect_p).sqrt() + (pair.mu_cox_n * pair.aspect_n).sqrt());
    Ok(1.0 / g)
}

/// Transconductance gain coefficient γ(jω).
pub fn ota_gamma(p: &OtaParams, omega: f64, regime: Regime) -> Complex64 {
    let pole = Complex64::new(p.omega_a, 0.0) / Complex64::new(p.omega_a, omega);
    match regime {
        Regime::Low => pole,
        Regime::High => pole * Complex64::from_polar(1.0, -omega * p.tau),
    }
}

/// Single-pole conveyor transfer `g0 / (1 + jω/ω_p)`; used for both β and α.
pub fn ccii_transfer(g0: f64, omega_pole: f64, omega: f64) -> Complex64 {
    Complex64::new(g0, 0.0) / Complex64::new(1.0, omega / omega_pole)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn bias(vb: f64) -> OtaParams {
        OtaParams {
            k: 1e-3,
            vb,
            vss: -1.2,
            vth: 0.45,
            ..OtaParams::default()
        }
    }

    #[test]
    fn gm_zero_at_zero_overdrive() {
        let mut p = bias(0.0);
        p.vb = p.vss + 2.0 * p.vth;
        assert_eq!(ota_gm(&p).unwrap(), 0.0);
    }

    #[test]
    fn gm_at_grounded_bias_point() {
        assert_relative_eq!(
            ota_gm(&bias(0.45)).unwrap(),
            5.303300858899106e-4,
            max_relative = 1e-12
        );
    }

    #[test]
    fn gm_rejects_cutoff() {
        assert!(matches!(ota_gm(&bias(-0.4)), Err(Error::Domain(_))));
    }

    #[test]
    fn gm_affine_in_bias() {
        let p1 = bias(0.40);
        let p2 = bias(0.45);
        let slope = (ota_gm(&p2).unwrap() - ota_gm(&p1).unwrap()) / 0.05;
        assert_relative_eq!(slope, 1e-3 / SQRT_2, max_relative = 1e-12);
    }

    #[test]
    fn ota_current_values() {
        let gm = 5.3033e-4;
        assert_eq!(ota_current(gm, 0.3, 0.3, Port::Positive), 0.0);
        assert_relative_eq!(
            ota_current(gm, 0.14, 0.0, Port::Positive),
            7.42462e-5,
            max_relative = 1e-9
        );
        assert_eq!(
            ota_current(gm, 0.14, 0.02, Port::Negative),
            -ota_current(gm, 0.14, 0.02, Port::Positive)
        );
    }

    #[test]
    fn rx_physical_constants_regression() {
        let pair = MosPair {
            mu_cox_n: MU_COX_N_180NM,
            aspect_n: 24.0,
            mu_cox_p: MU_COX_P_180NM,
            aspect_p: 24.0,
        };
        assert_relative_eq!(
            cccii_rx(20e-6, &pair).unwrap(),
            1204.0302714009013,
            max_relative = 1e-12
        );
    }

    #[test]
    fn rx_default_pair_is_calibrated() {
        assert_relative_eq!(
            cccii_rx(20e-6, &MosPair::default()).unwrap(),
            2.0,
            max_relative = 1e-12
        );
    }

    #[test]
    fn rx_rejects_nonpositive_bias() {
        assert!(cccii_rx(0.0, &MosPair::default()).is_err());
        assert!(cccii_rx(-1e-6, &MosPair::default()).is_err());
    }

    #[test]
    fn gamma_limits() {
        let p = OtaParams::default();
        let g0 = ota_gamma(&p, 0.0, Regime::High);
        assert_eq!(g0, Complex64::new(1.0, 0.0));
        let gc = ota_gamma(&p, p.omega_a, Regime::Low);
        assert_relative_eq!(gc.norm(), 1.0 / SQRT_2, max_relative = 1e-12);
        assert_eq!(p.tau, 1.25e-9);
    }

    #[test]
    fn transfer_limits() {
        assert_eq!(ccii_transfer(0.98, 1e9, 0.0), Complex64::new(0.98, 0.0));
        assert_relative_eq!(
            ccii_transfer(0.98, 1e9, 1e9).norm(),
            0.98 / SQRT_2,
            max_relative = 1e-12
        );
        assert_eq!(ccii_transfer(1.0, 1e9, 0.0).re, 1.0);
    }

    proptest! {
        #[test]
        fn rx_times_sqrt_ib_constant(ib in 1e-7f64..1e-3) {
            let pair = MosPair::default();
            let c0 = cccii_rx(20e-6, &pair).unwrap() * 20e-6f64.sqrt();
            let c = cccii_rx(ib, &pair).unwrap() * ib.sqrt();
            prop_assert!(((c - c0) / c0).abs() < 1e-12);
            prop_assert!(cccii_rx(2.0 * ib, &pair).unwrap() < cccii_rx(ib, &pair).unwrap());
        }

        #[test]
        fn gamma_magnitude_monotone(w1 in 0.0f64..1e10, dw in 0.0f64..1e10) {
            let p = OtaParams::default();
            let lo = ota_gamma(&p, w1, Regime::High).norm();
            let hi = ota_gamma(&p, w1 + dw, Regime::High).norm();
            prop_assert!(hi <= lo + 1e-15);
            prop_assert!(lo <= 1.0 + 1e-15);
        }

        // below ωτ ≈ π/2 so the delayed phase does not wrap
        #[test]
        fn gamma_delay_adds_lag(w in 1.0f64..1e9) {
            let p = OtaParams::default();
            prop_assert!(ota_gamma(&p, w, Regime::High).arg() <= ota_gamma(&p, w, Regime::Low).arg());
        }
    }
}
