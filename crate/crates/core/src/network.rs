//! Series and parallel composition of two emulators.
//!
//! Parallel pairs share the terminal voltage (and hence the flux) and are
//! voltage driven; series pairs share the current (and hence the charge) and
//! are current driven, so neither case needs an implicit solve.

use std::cell::Cell;

use serde::{Deserialize, Serialize};

use crate::emulator::{derive_coefficients, Coefficients, Emulator, EmulatorConfig, Outputs};
use crate::error::{Error, Result};
use crate::sim::{check_finite, check_span, Rk4, Trace};
use crate::source::SourceSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Wiring {
    ParallelSamePolarity,
    SeriesSamePolarity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompositeSpec {
    pub elements: Vec<EmulatorConfig>,
    pub wiring: Wiring,
    /// Voltage for parallel wiring, current (A) for series wiring.
    pub drive: SourceSpec,
}

impl CompositeSpec {
    pub fn validate(&self) -> Result<()> {
        if self.elements.len() != 2 {
            return Err(Error::Domain(format!(
                "composition needs exactly 2 elements, got {}",
                self.elements.len()
            )));
        }
        for e in &self.elements {
            e.validate()?;
        }
        self.drive.validate()
    }
}

/// Composite trace plus one trace per element.
#[derive(Debug, Clone, PartialEq)]
pub struct CompositeTrace {
    pub composite: Trace,
    pub branches: Vec<Trace>,
}

/// Both elements integrated jointly under the shared voltage drive.
///
/// The composite current and charge are the branch sums; the composite
/// inverse meminductance is the sum of the branch values.
pub fn simulate_parallel(spec: &CompositeSpec, t_end: f64, dt: f64) -> Result<CompositeTrace> {
    if spec.wiring != Wiring::ParallelSamePolarity {
        return Err(Error::Domain(
            "simulate_parallel needs parallel wiring".into(),
        ));
    }
    spec.validate()?;
    let steps = check_span(&spec.drive, t_end, dt)?;
    let src = &spec.drive;
    if let Some(f) = src.f_max() {
        for e in &spec.elements {
            e.check_stability(2.0 * std::f64::consts::PI * f)?;
        }
    }
    let emus = spec
        .elements
        .iter()
        .map(|c| Emulator::new(c, Some(dt)))
        .collect::<Result<Vec<_>>>()?;
    let offsets: Vec<usize> = emus
        .iter()
        .scan(0, |acc, e| {
            let o = *acc;
            *acc += e.state_len();
            Some(o)
        })
        .collect();
    let n: usize = emus.iter().map(Emulator::state_len).sum();

    let eval = |t: f64, y: &[f64], dy: &mut [f64], outs: &mut [Outputs]| {
        let vin = src.value(t);
        for (k, emu) in emus.iter().enumerate() {
            let r = offsets[k]..offsets[k] + emu.state_len();
            outs[k] = emu.rhs(&y[r.clone()], vin, &mut dy[r]);
        }
        vin
    };

    let mut y = vec![0.0; n];
    let mut rk = Rk4::new(n);
    let mut outs = vec![Outputs::default(); emus.len()];
    let mut composite = Trace::with_capacity(dt, steps + 1, false);
    let mut branches: Vec<Trace> = emus
        .iter()
        .map(|_| Trace::with_capacity(dt, steps + 1, true))
        .collect();
    composite.meta.source = src.describe();

    let mut f = |t: f64, y: &[f64], dy: &mut [f64]| {
        let mut scratch = [Outputs::default(); 2];
        eval(t, y, dy, &mut scratch);
    };
    for step in 0..=steps {
        let t = step as f64 * dt;
        let vin = eval(t, &y, &mut rk.k1, &mut outs);
        let mut total = Outputs::default();
        for (k, o) in outs.iter().enumerate() {
            let s = offsets[k];
            branches[k].push(t, vin, y[s], y[s + 1], y[s + 2], o, true);
            total.i += o.i;
            total.linv += o.linv;
        }
        let q: f64 = offsets.iter().map(|&s| y[s + 2]).sum();
        composite.push(t, vin, y[0], y[1], q, &total, false);
        if step == steps {
            break;
        }
        rk.step_with_k1(&mut f, t, &mut y, dt);
        check_finite(&y, step + 1, t + dt)?;
    }
    Ok(CompositeTrace {
        composite,
        branches,
    })
}

/// Current-driven elements in series, each following `L⁻¹ = a ± b·ρ`.
///
/// Per element `φᵢ = I/L⁻¹ᵢ(ρᵢ)` and `dρᵢ/dt = φᵢ`; the shared charge is
/// `∫I dt`. The terminal voltage is `dφ/dt` evaluated analytically from the
/// drive derivative.
pub fn simulate_series(spec: &CompositeSpec, t_end: f64, dt: f64) -> Result<CompositeTrace> {
    if spec.wiring != Wiring::SeriesSamePolarity {
        return Err(Error::Domain("simulate_series needs series wiring".into()));
    }
    spec.validate()?;
    let coeffs = spec
        .elements
        .iter()
        .map(derive_coefficients)
        .collect::<Result<Vec<_>>>()?;
    current_driven(&coeffs, &spec.drive, t_end, dt)
}

/// One element under current drive: the single-branch case of
/// [`simulate_series`].
pub fn integrate_current_driven(
    cfg: &EmulatorConfig,
    drive: &SourceSpec,
    t_end: f64,
    dt: f64,
) -> Result<Trace> {
    cfg.validate()?;
    let co = derive_coefficients(cfg)?;
    Ok(current_driven(&[co], drive, t_end, dt)?.branches.remove(0))
}

fn current_driven(
    coeffs: &[Coefficients],
    src: &SourceSpec,
    t_end: f64,
    dt: f64,
) -> Result<CompositeTrace> {
    let steps = check_span(src, t_end, dt)?;
    let m = coeffs.len();
    // y = [ρ₁ … ρₘ, q]
    let n = m + 1;
    let singular: Cell<Option<(f64, usize, f64)>> = Cell::new(None);
    let mut f = |t: f64, y: &[f64], dy: &mut [f64]| {
        let i = src.value(t);
        for (k, co) in coeffs.iter().enumerate() {
            let l = co.linv(y[k]);
            if l <= 0.0 && singular.get().is_none() {
                singular.set(Some((t, k, y[k])));
            }
            dy[k] = i / l;
        }
        dy[m] = i;
    };

    let mut y = vec![0.0; n];
    let mut rk = Rk4::new(n);
    let mut composite = Trace::with_capacity(dt, steps + 1, false);
    let mut branches: Vec<Trace> = coeffs
        .iter()
        .map(|_| Trace::with_capacity(dt, steps + 1, false))
        .collect();
    composite.meta.source = src.describe();

    let report = |t: f64, k: usize, rho: f64| {
        Error::Singular(format!(
            "inverse meminductance of element {k} reached {:e} 1/H at t = {t:e} s (rho = {rho:e} Wb·s)",
            coeffs[k].linv(rho)
        ))
    };

    for step in 0..=steps {
        let t = step as f64 * dt;
        let i = src.value(t);
        let di = src.derivative(t);
        let (mut phi, mut rho, mut vin, mut resistance) = (0.0, 0.0, 0.0, 0.0);
        for (k, co) in coeffs.iter().enumerate() {
            let l = co.linv(y[k]);
            if l <= 0.0 {
                return Err(report(t, k, y[k]));
            }
            let phik = i / l;
            // d(I/L)/dt with dL/dt = s·b·φ
            let vk = di / l - i * co.mode_sign * co.b * phik / (l * l);
            phi += phik;
            rho += y[k];
            vin += vk;
            resistance += 1.0 / l;
            let out = Outputs {
                i,
                linv: l,
                ..Outputs::default()
            };
            branches[k].push(t, vk, phik, y[k], y[m], &out, false);
        }
        let out = Outputs {
            i,
            linv: 1.0 / resistance,
            ..Outputs::default()
        };
        composite.push(t, vin, phi, rho, y[m], &out, false);
        if step == steps {
            break;
        }
        f(t, &y, &mut rk.k1);
        rk.step_with_k1(&mut f, t, &mut y, dt);
        if let Some((ts, k, r)) = singular.get() {
            return Err(report(ts, k, r));
        }
        check_finite(&y, step + 1, t + dt)?;
    }
    Ok(CompositeTrace {
        composite,
        branches,
    })
}

/// Dispatches on the wiring.
pub fn simulate(spec: &CompositeSpec, t_end: f64, dt: f64) -> Result<CompositeTrace> {
    match spec.wiring {
        Wiring::ParallelSamePolarity => simulate_parallel(spec, t_end, dt),
        Wiring::SeriesSamePolarity => simulate_series(spec, t_end, dt),
    }
}
