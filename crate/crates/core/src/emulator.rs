//! State-space realization of the grounded and floating meminductor
//! emulators.
//!
//! Three fidelity tiers share one state layout `[φ, ρ, q, aux…]`:
//!
//! * `Simplified` — the affine law `L⁻¹ = a ± b·ρ`, `I = L⁻¹·φ`.
//! * `FullIdeal` — the ideal signal path through the C2 stage (including the
//!   `R_X2` zero), the C1 integrator driving the Gm3 bias node, and the Gm3
//!   square-law stage.
//! * `NonIdeal` — `FullIdeal` plus single-pole OTA and conveyor transfers,
//!   Padé excess-phase stages, the series `R_X1` drop and finite `R_o`.
//!
//! The closed-form frequency-domain expressions are kept separately in
//! [`closed_form_linv`]; they are never used for time stepping.

use std::f64::consts::SQRT_2;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::device::{
    cccii_rx, ccii_transfer, ota_gamma, ota_gm, CcciiParams, MosPair, OtaParams, Regime,
};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Topology {
    Grounded,
    Floating,
}

/// Switch wiring of the w/x/y/z pins.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// w-x, y-z
    Incremental,
    /// w-z, y-x
    Decremental,
}

impl Mode {
    pub fn sign(self) -> f64 {
        match self {
            Mode::Incremental => 1.0,
            Mode::Decremental => -1.0,
        }
    }

    pub fn mirrored(self) -> Self {
        match self {
            Mode::Incremental => Mode::Decremental,
            Mode::Decremental => Mode::Incremental,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fidelity {
    Simplified,
    FullIdeal,
    NonIdeal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmulatorConfig {
    pub topology: Topology,
    pub mode: Mode,
    pub fidelity: Fidelity,
    pub r1: f64,
    pub c1: f64,
    pub c2: f64,
    /// Gm3 stage; its bias node is the C1 integrator.
    pub ota3: OtaParams,
    /// Gm4 stage, biased by `Vb4`.
    pub ota4: OtaParams,
    /// Input conveyor (X-port carries `R_X1`).
    pub ccii1: CcciiParams,
    /// Current-controlled conveyor carrying `R_X2`.
    pub cccii2: CcciiParams,
}

impl EmulatorConfig {
    /// Grounded operating point: R1 = 10 Ω, C1 = 75 pF, C2 = 150 pF,
    /// Vb4 = 0.45 V, Ib = 20 µA.
    pub fn grounded() -> Self {
        let ota4 = OtaParams {
            vb: 0.45,
            ..OtaParams::default()
        };
        Self {
            topology: Topology::Grounded,
            mode: Mode::Incremental,
            fidelity: Fidelity::FullIdeal,
            r1: 10.0,
            c1: 75e-12,
            c2: 150e-12,
            ota3: OtaParams {
                vb: 0.0,
                ..OtaParams::default()
            },
            ota4,
            ccii1: CcciiParams::default(),
            cccii2: CcciiParams::default(),
        }
        .with_ib(20e-6)
        .expect("positive bias current")
    }

    /// Floating operating point: R1 = 5 Ω, C1 = 75 pF, C2 = 150 pF,
    /// Vb4 = 0.5 V, Ib = 7 µA.
    pub fn floating() -> Self {
        Self {
            topology: Topology::Floating,
            r1: 5.0,
            ..Self::grounded()
        }
        .with_vb4(0.5)
        .with_ib(7e-6)
        .expect("positive bias current")
    }

    pub fn with_fidelity(mut self, fidelity: Fidelity) -> Self {
        self.fidelity = fidelity;
        self
    }

    pub fn with_mode(mut self, mode: Mode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_vb4(mut self, vb4: f64) -> Self {
        self.ota4.vb = vb4;
        self
    }

    /// Sets `R_X2` from the CCCII bias current using the default MOS pair.
    pub fn with_ib(self, ib: f64) -> Result<Self> {
        self.with_ib_pair(ib, &MosPair::default())
    }

    pub fn with_ib_pair(mut self, ib: f64, pair: &MosPair) -> Result<Self> {
        self.cccii2.rx = cccii_rx(ib, pair)?;
        Ok(self)
    }

    /// Applies `k`, `Vth`, `Vss` to both OTAs.
    pub fn with_device(mut self, k: f64, vth: f64, vss: f64) -> Self {
        for o in [&mut self.ota3, &mut self.ota4] {
            o.k = k;
            o.vth = vth;
            o.vss = vss;
        }
        self
    }

    pub fn rx2(&self) -> f64 {
        self.cccii2.rx
    }

    /// Resistance multiplying `vin` in the C2 stage: `R_X2` (grounded) or
    /// `R_X2 − R1` (floating).
    pub fn rp(&self) -> f64 {
        match self.topology {
            Topology::Grounded => self.cccii2.rx,
            Topology::Floating => self.cccii2.rx - self.r1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("R1", self.r1), ("C1", self.c1), ("C2", self.c2)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Domain(format!("{name} must be > 0, got {v}")));
            }
        }
        self.ota3.validate()?;
        self.ota4.validate()?;
        self.ccii1.validate()?;
        self.cccii2.validate()?;
        Ok(())
    }

    /// Floating-stage stability at the highest drive frequency:
    /// `R1 < R_X2 + 1/(ω_max·C2)`.
    pub fn check_stability(&self, omega_max: f64) -> Result<()> {
        if self.topology == Topology::Floating && self.fidelity != Fidelity::Simplified {
            let limit = self.cccii2.rx + 1.0 / (omega_max * self.c2);
            if !(self.r1 < limit) {
                return Err(Error::Domain(format!(
                    "floating stage unstable: R1 = {} >= R_X2 + 1/(ω·C2) = {limit}",
                    self.r1
                )));
            }
        }
        Ok(())
    }
}

/// The two terms of the inverse meminductance `L⁻¹ = a + mode_sign·b·ρ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Coefficients {
    /// Baseline inverse meminductance, 1/H.
    pub a: f64,
    /// Sensitivity to the time integral of flux, 1/(H·Wb·s).
    pub b: f64,
    pub mode_sign: f64,
}

impl Coefficients {
    pub fn linv(&self, rho: f64) -> f64 {
        self.a + self.mode_sign * self.b * rho
    }
}

pub fn derive_coefficients(cfg: &EmulatorConfig) -> Result<Coefficients> {
    let gm4 = ota_gm(&cfg.ota4)?;
    let o3 = &cfg.ota3;
    let a = o3.k * (-o3.vss - 2.0 * o3.vth) / (SQRT_2 * cfg.r1 * cfg.c2);
    let b = o3.k * gm4 / (SQRT_2 * cfg.c1 * cfg.r1 * cfg.r1 * cfg.c2 * cfg.c2);
    Ok(Coefficients {
        a,
        b,
        mode_sign: cfg.mode.sign(),
    })
}

/// Integrator state of one emulator.
#[derive(Debug, Clone, PartialEq)]
pub struct MeminductorState {
    pub t: f64,
    /// Flux ∫vin dt, Wb.
    pub phi: f64,
    /// Time integral of flux ∫φ dt, Wb·s.
    pub rho: f64,
    /// Charge ∫I dt, C.
    pub q: f64,
    pub aux: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Derivatives {
    pub dphi: f64,
    pub drho: f64,
    pub dq: f64,
    pub daux: Vec<f64>,
}

/// Algebraic outputs at one evaluation point.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Outputs {
    /// Terminal current, A.
    pub i: f64,
    /// Voltage at node B (input of Gm3/Gm4), V.
    pub vinb: f64,
    /// Gm3 bias-node voltage, V.
    pub vb3: f64,
    /// Inverse meminductance I/φ, 1/H.
    pub linv: f64,
}

/// A lag or delay stage is folded into its static gain when its pole times
/// the step exceeds this.
pub const FOLD_LIMIT: f64 = 1.0;

// NonIdeal aux layout
const V1: usize = 0;
const PHI1: usize = 1;
const VB2: usize = 2;
const VB3: usize = 3;
const I4: usize = 4;
const D4: usize = 5;
const I3: usize = 6;
const D3: usize = 7;
const IOUT: usize = 8;
const NONIDEAL_AUX: usize = 9;

/// First-order stage `y' = pole·(gain·u − y)`, or `y = gain·u` when folded.
#[derive(Debug, Clone, Copy)]
struct Lag {
    pole: f64,
    gain: f64,
    dynamic: bool,
}

impl Lag {
    fn new(pole: f64, gain: f64, dt: Option<f64>) -> Self {
        let dynamic = match dt {
            Some(dt) => pole * dt <= FOLD_LIMIT,
            None => true,
        };
        Self {
            pole,
            gain,
            dynamic,
        }
    }

    fn out(&self, state: f64, input: f64) -> f64 {
        if self.dynamic {
            state
        } else {
            self.gain * input
        }
    }

    fn deriv(&self, state: f64, input: f64) -> f64 {
        if self.dynamic {
            self.pole * (self.gain * input - state)
        } else {
            0.0
        }
    }
}

/// Padé(1,1) delay `(1 − sτ/2)/(1 + sτ/2)` realized as `y = 2d − u`,
/// `d' = (2/τ)(u − d)`.
#[derive(Debug, Clone, Copy)]
struct Pade {
    rate: f64,
    dynamic: bool,
}

impl Pade {
    fn new(tau: f64, dt: Option<f64>) -> Self {
        if tau <= 0.0 {
            return Self {
                rate: 0.0,
                dynamic: false,
            };
        }
        let rate = 2.0 / tau;
        let dynamic = match dt {
            Some(dt) => rate * dt <= FOLD_LIMIT,
            None => true,
        };
        Self { rate, dynamic }
    }

    fn out(&self, state: f64, input: f64) -> f64 {
        if self.dynamic {
            2.0 * state - input
        } else {
            input
        }
    }

    fn deriv(&self, state: f64, input: f64) -> f64 {
        if self.dynamic {
            self.rate * (input - state)
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct NonIdealStages {
    beta1: Lag,
    beta2: Lag,
    gamma4: Lag,
    pade4: Pade,
    gamma3: Lag,
    pade3: Pade,
    alpha: Lag,
}

/// Values along the non-ideal signal chain for one input voltage.
#[derive(Debug, Clone, Copy)]
struct Chain {
    v1: f64,
    vinb_raw: f64,
    vinb: f64,
    i3_raw: f64,
    i3_lag: f64,
    i_raw: f64,
    i: f64,
}

/// A configured emulator ready for time stepping.
#[derive(Debug, Clone)]
pub struct Emulator {
    cfg: EmulatorConfig,
    coeffs: Coefficients,
    gm4: f64,
    /// k3/√2
    kk3: f64,
    /// −Vss − 2·Vth of the Gm3 stage
    lambda3: f64,
    rp: f64,
    stages: NonIdealStages,
}

impl Emulator {
    /// Prepares the realization. `dt` decides which non-ideal poles are fast
    /// enough to be folded into their static gains; `None` keeps all stages
    /// dynamic.
    pub fn new(cfg: &EmulatorConfig, dt: Option<f64>) -> Result<Self> {
        cfg.validate()?;
        let coeffs = derive_coefficients(cfg)?;
        let lambda3 = -cfg.ota3.vss - 2.0 * cfg.ota3.vth;
        if lambda3 < 0.0 {
            return Err(Error::Domain(format!(
                "Gm3 stage out of saturation at zero bias: -Vss - 2Vth = {lambda3} < 0"
            )));
        }
        let stages = NonIdealStages {
            beta1: Lag::new(cfg.ccii1.omega_beta, cfg.ccii1.beta0, dt),
            beta2: Lag::new(cfg.cccii2.omega_beta, cfg.cccii2.beta0, dt),
            gamma4: Lag::new(cfg.ota4.omega_a, 1.0, dt),
            pade4: Pade::new(cfg.ota4.tau, dt),
            gamma3: Lag::new(cfg.ota3.omega_a, 1.0, dt),
            pade3: Pade::new(cfg.ota3.tau, dt),
            alpha: Lag::new(cfg.ccii1.omega_alpha, cfg.ccii1.alpha0, dt),
        };
        Ok(Self {
            cfg: *cfg,
            coeffs,
            gm4: ota_gm(&cfg.ota4)?,
            kk3: cfg.ota3.k / SQRT_2,
            lambda3,
            rp: cfg.rp(),
            stages,
        })
    }

    pub fn config(&self) -> &EmulatorConfig {
        &self.cfg
    }

    pub fn coefficients(&self) -> Coefficients {
        self.coeffs
    }

    pub fn aux_len(&self) -> usize {
        match self.cfg.fidelity {
            Fidelity::Simplified => 0,
            Fidelity::FullIdeal => 1,
            Fidelity::NonIdeal => NONIDEAL_AUX,
        }
    }

    pub fn state_len(&self) -> usize {
        3 + self.aux_len()
    }

    pub fn rest_state(&self) -> MeminductorState {
        MeminductorState {
            t: 0.0,
            phi: 0.0,
            rho: 0.0,
            q: 0.0,
            aux: vec![0.0; self.aux_len()],
        }
    }

    /// Derivatives and outputs at `state` under terminal voltage `vin`.
    pub fn eval_rhs(&self, state: &MeminductorState, vin: f64) -> (Derivatives, Outputs) {
        let mut y = Vec::with_capacity(self.state_len());
        y.extend_from_slice(&[state.phi, state.rho, state.q]);
        y.extend_from_slice(&state.aux);
        let mut dy = vec![0.0; y.len()];
        let out = self.rhs(&y, vin, &mut dy);
        let d = Derivatives {
            dphi: dy[0],
            drho: dy[1],
            dq: dy[2],
            daux: dy[3..].to_vec(),
        };
        (d, out)
    }

    /// Slice form of [`eval_rhs`](Self::eval_rhs): `y = [φ, ρ, q, aux…]`.
    pub fn rhs(&self, y: &[f64], vin: f64, dy: &mut [f64]) -> Outputs {
        let (phi, rho) = (y[0], y[1]);
        let out = match self.cfg.fidelity {
            Fidelity::Simplified => {
                let linv = self.coeffs.linv(rho);
                Outputs {
                    i: linv * phi,
                    vinb: phi / (self.cfg.r1 * self.cfg.c2),
                    vb3: self.gm4 * rho / (self.cfg.c1 * self.cfg.r1 * self.cfg.c2),
                    linv,
                }
            }
            Fidelity::FullIdeal => {
                let x = y[3];
                let vinb = phi / (self.cfg.r1 * self.cfg.c2) + self.rp / self.cfg.r1 * vin;
                let vb3 = self.gm4 / self.cfg.c1 * x;
                let i = self.kk3 * (self.lambda3 + self.coeffs.mode_sign * vb3) * vinb;
                dy[3] = vinb;
                Outputs {
                    i,
                    vinb,
                    vb3,
                    linv: self.linv_of(i, phi),
                }
            }
            Fidelity::NonIdeal => self.nonideal_rhs(y, vin, dy),
        };
        dy[0] = vin;
        dy[1] = phi;
        dy[2] = out.i;
        out
    }

    fn linv_of(&self, i: f64, phi: f64) -> f64 {
        if phi != 0.0 {
            i / phi
        } else {
            self.coeffs.a
        }
    }

    fn chain(&self, aux: &[f64], v_int: f64) -> Chain {
        let s = &self.stages;
        let c = &self.cfg;
        let v1 = s.beta1.out(aux[V1], v_int);
        let vinb_raw = aux[PHI1] / (c.r1 * c.c2) + self.rp / c.r1 * v1;
        let vinb = s.beta2.out(aux[VB2], vinb_raw);
        // the tail device cuts off instead of the transconductance turning negative
        let gm3 = self.kk3 * (self.lambda3 + self.coeffs.mode_sign * aux[VB3]).max(0.0);
        let i3_raw = gm3 * vinb + vinb / c.ota3.ro;
        let i3_lag = s.gamma3.out(aux[I3], i3_raw);
        let i_raw = s.pade3.out(aux[D3], i3_lag);
        let i = s.alpha.out(aux[IOUT], i_raw);
        Chain {
            v1,
            vinb_raw,
            vinb,
            i3_raw,
            i3_lag,
            i_raw,
            i,
        }
    }

    fn nonideal_rhs(&self, y: &[f64], vin: f64, dy: &mut [f64]) -> Outputs {
        let c = &self.cfg;
        let s = &self.stages;
        let aux = &y[3..];
        let rx1 = c.ccii1.rx;
        // The terminal current is affine in the internal voltage behind R_X1.
        let v_int = if rx1 > 0.0 {
            let c0 = self.chain(aux, 0.0).i;
            let c1 = self.chain(aux, 1.0).i - c0;
            let den = 1.0 + rx1 * c1;
            if den.abs() < 1e-12 {
                f64::NAN
            } else {
                (vin - rx1 * c0) / den
            }
        } else {
            vin
        };
        let ch = self.chain(aux, v_int);

        let i4_raw = self.gm4 * ch.vinb;
        let i4_lag = s.gamma4.out(aux[I4], i4_raw);
        let i4 = s.pade4.out(aux[D4], i4_lag);

        let d = &mut dy[3..];
        d[V1] = s.beta1.deriv(aux[V1], v_int);
        d[PHI1] = ch.v1;
        d[VB2] = s.beta2.deriv(aux[VB2], ch.vinb_raw);
        d[VB3] = (i4 - aux[VB3] / c.ota4.ro) / (c.c1 + c.ota4.co);
        d[I4] = s.gamma4.deriv(aux[I4], i4_raw);
        d[D4] = s.pade4.deriv(aux[D4], i4_lag);
        d[I3] = s.gamma3.deriv(aux[I3], ch.i3_raw);
        d[D3] = s.pade3.deriv(aux[D3], ch.i3_lag);
        d[IOUT] = s.alpha.deriv(aux[IOUT], ch.i_raw);

        Outputs {
            i: ch.i,
            vinb: ch.vinb,
            vb3: aux[VB3],
            linv: self.linv_of(ch.i, y[0]),
        }
    }
}

/// Convenience wrapper around [`Emulator::eval_rhs`] with every stage dynamic.
pub fn eval_rhs(
    state: &MeminductorState,
    vin: f64,
    cfg: &EmulatorConfig,
) -> Result<(Derivatives, Outputs)> {
    let emu = Emulator::new(cfg, None)?;
    Ok(emu.eval_rhs(state, vin))
}

/// `(1 + jωC2·R_p)/(jω·R1·C2)`: transfer of the C2 stage from `vin` to node B.
pub fn vinb_transfer(cfg: &EmulatorConfig, omega: f64) -> Complex64 {
    let s = Complex64::new(0.0, omega);
    (1.0 + s * cfg.c2 * cfg.rp()) / (s * cfg.r1 * cfg.c2)
}

/// Frequency-domain inverse meminductance at `s = jω` with the flux taken as
/// the phasor amplitude `phi_amplitude`.
///
/// Simplified: `a ± b·φ/s`. FullIdeal: `(k/√2)(Λ ± (Gm4/C1)·T(s)·φ)·(1 + sC2R_p)/(R1C2)`
/// with `T` from [`vinb_transfer`]. NonIdeal adds γ on the baseline, γ² on the
/// ρ term, β² (grounded) or β (floating) on the C2 stage and the series
/// `R_X1` impedance.
pub fn closed_form_linv(cfg: &EmulatorConfig, omega: f64, phi_amplitude: f64) -> Result<Complex64> {
    if !(omega > 0.0) {
        return Err(Error::Domain(format!("omega must be > 0, got {omega}")));
    }
    let co = derive_coefficients(cfg)?;
    let s = Complex64::new(0.0, omega);
    let sign = co.mode_sign;
    let kk = cfg.ota3.k / SQRT_2;
    let lambda = -cfg.ota3.vss - 2.0 * cfg.ota3.vth;
    let g = ota_gm(&cfg.ota4)? / cfg.c1;
    let (r1, c2) = (cfg.r1, cfg.c2);

    let check = |den: Complex64| -> Result<()> {
        if den.norm() < 1e-12 {
            Err(Error::Singular(format!(
                "C2-stage denominator vanishes at ω = {omega:e} rad/s"
            )))
        } else {
            Ok(())
        }
    };

    match cfg.fidelity {
        Fidelity::Simplified => Ok(co.a + sign * co.b * phi_amplitude / s),
        Fidelity::FullIdeal => {
            let zero = 1.0 + s * c2 * cfg.rp();
            if cfg.topology == Topology::Floating {
                check(zero)?;
            }
            let t = zero / (s * r1 * c2);
            Ok(kk * (lambda + sign * g * t * phi_amplitude) * zero / (r1 * c2))
        }
        Fidelity::NonIdeal => {
            let gamma3 = ota_gamma(&cfg.ota3, omega, Regime::High);
            let gamma4 = ota_gamma(&cfg.ota4, omega, Regime::High);
            let beta1 = ccii_transfer(cfg.ccii1.beta0, cfg.ccii1.omega_beta, omega);
            let beta2 = ccii_transfer(cfg.cccii2.beta0, cfg.cccii2.omega_beta, omega);
            let zx1 = cfg.ccii1.rx;
            let zx2 = cfg.cccii2.rx;
            match cfg.topology {
                Topology::Grounded => {
                    let zero = 1.0 + s * c2 * zx2;
                    let t = zero / (s * r1 * c2);
                    let d =
                        kk * gamma3 * lambda + sign * kk * gamma3 * gamma4 * g * t * phi_amplitude;
                    let inner = d * zero / (r1 * c2 * beta1 * beta2);
                    Ok(inner / (1.0 + zx1 * inner / s))
                }
                Topology::Floating => {
                    let beta = beta1;
                    let den = 1.0 + beta * s * c2 * zx2 - beta * s * c2 * r1;
                    check(den)?;
                    let t = (1.0 + s * c2 * (zx2 - r1)) / (s * r1 * c2);
                    let d = kk * gamma3 * lambda / beta
                        + sign * kk * gamma3 * gamma4 * g * t * phi_amplitude / beta;
                    let inner = d * den / (r1 * c2);
                    let series = zx1 * (1.0 + zx2 * beta * s * c2) / den;
                    Ok(inner / (1.0 + series * inner / s))
                }
            }
        }
    }
}
