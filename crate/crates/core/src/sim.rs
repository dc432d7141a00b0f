//! Fixed-step RK4 integration and uniformly sampled traces.

use serde::Serialize;

use crate::emulator::{Emulator, EmulatorConfig, Outputs};
use crate::error::{Error, Result};
use crate::source::SourceSpec;

/// Default number of steps per period of the highest source frequency.
pub const STEPS_PER_PERIOD: usize = 2000;

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct TraceMeta {
    pub config_hash: Option<String>,
    pub source: String,
}

/// Time-aligned columns sampled every `dt`.
///
/// `vinb` and `vb3` are internal probe columns of the emulator; they are
/// empty for traces that do not come from a single emulator.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trace {
    pub dt: f64,
    pub t: Vec<f64>,
    pub vin: Vec<f64>,
    pub phi: Vec<f64>,
    pub rho: Vec<f64>,
    pub q: Vec<f64>,
    pub i: Vec<f64>,
    pub linv: Vec<f64>,
    pub vinb: Vec<f64>,
    pub vb3: Vec<f64>,
    pub meta: TraceMeta,
}

impl Trace {
    pub fn with_capacity(dt: f64, n: usize, probes: bool) -> Self {
        let col = || Vec::with_capacity(n);
        let probe = || {
            if probes {
                Vec::with_capacity(n)
            } else {
                Vec::new()
            }
        };
        Self {
            dt,
            t: col(),
            vin: col(),
            phi: col(),
            rho: col(),
            q: col(),
            i: col(),
            linv: col(),
            vinb: probe(),
            vb3: probe(),
            meta: TraceMeta::default(),
        }
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn has_probes(&self) -> bool {
        !self.vinb.is_empty()
    }

    /// Appends one sample; probe values are dropped when the trace has no
    /// probe columns.
    #[allow(clippy::too_many_arguments)]
    pub fn push(
        &mut self,
        t: f64,
        vin: f64,
        phi: f64,
        rho: f64,
        q: f64,
        out: &Outputs,
        probes: bool,
    ) {
        self.t.push(t);
        self.vin.push(vin);
        self.phi.push(phi);
        self.rho.push(rho);
        self.q.push(q);
        self.i.push(out.i);
        self.linv.push(out.linv);
        if probes {
            self.vinb.push(out.vinb);
            self.vb3.push(out.vb3);
        }
    }

    /// Samples `start..end`.
    pub fn slice(&self, start: usize, end: usize) -> Trace {
        let cut = |v: &Vec<f64>| {
            if v.is_empty() {
                Vec::new()
            } else {
                v[start..end].to_vec()
            }
        };
        Trace {
            dt: self.dt,
            t: cut(&self.t),
            vin: cut(&self.vin),
            phi: cut(&self.phi),
            rho: cut(&self.rho),
            q: cut(&self.q),
            i: cut(&self.i),
            linv: cut(&self.linv),
            vinb: cut(&self.vinb),
            vb3: cut(&self.vb3),
            meta: self.meta.clone(),
        }
    }

    /// Checks the structural invariants: equal column lengths ≥ 2, `dt > 0`.
    pub fn validate(&self) -> Result<()> {
        let n = self.len();
        if n < 2 {
            return Err(Error::InsufficientLength(format!("trace has {n} samples")));
        }
        if !(self.dt > 0.0) {
            return Err(Error::Domain(format!(
                "trace dt must be > 0, got {}",
                self.dt
            )));
        }
        let cols = [
            &self.vin, &self.phi, &self.rho, &self.q, &self.i, &self.linv,
        ];
        if cols.iter().any(|c| c.len() != n) {
            return Err(Error::Domain("trace columns differ in length".into()));
        }
        Ok(())
    }
}

/// Classical fourth-order Runge–Kutta stepper with reusable buffers.
#[derive(Debug, Clone)]
pub struct Rk4 {
    pub k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

impl Rk4 {
    pub fn new(n: usize) -> Self {
        Self {
            k1: vec![0.0; n],
            k2: vec![0.0; n],
            k3: vec![0.0; n],
            k4: vec![0.0; n],
            tmp: vec![0.0; n],
        }
    }

    /// Advances `y` from `t` to `t + h`; `self.k1` must already hold
    /// `f(t, y)`.
    #[allow(clippy::needless_range_loop)]
    pub fn step_with_k1<F>(&mut self, mut f: F, t: f64, y: &mut [f64], h: f64)
    where
        F: FnMut(f64, &[f64], &mut [f64]),
    {
        let n = y.len();
        for j in 0..n {
            self.tmp[j] = y[j] + 0.5 * h * self.k1[j];
        }
        f(t + 0.5 * h, &self.tmp, &mut self.k2);
        for j in 0..n {
            self.tmp[j] = y[j] + 0.5 * h * self.k2[j];
        }
        f(t + 0.5 * h, &self.tmp, &mut self.k3);
        for j in 0..n {
            self.tmp[j] = y[j] + h * self.k3[j];
        }
        f(t + h, &self.tmp, &mut self.k4);
        for j in 0..n {
            y[j] += h / 6.0 * (self.k1[j] + 2.0 * self.k2[j] + 2.0 * self.k3[j] + self.k4[j]);
        }
    }
}

pub(crate) fn check_finite(y: &[f64], step: usize, t: f64) -> Result<()> {
    if let Some(j) = y.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            step,
            t,
            detail: format!("state component {j} = {}", y[j]),
        });
    }
    Ok(())
}

/// Default step for a source: `1/(2000·f_max)`, or the sample spacing of a
/// sampled source.
pub fn default_dt(src: &SourceSpec) -> Option<f64> {
    match (src.f_max(), src.span()) {
        (Some(f), _) => Some(1.0 / (STEPS_PER_PERIOD as f64 * f)),
        (None, Some(_)) => match &src.kind {
            crate::source::SourceKind::Samples { dt, .. } => Some(*dt),
            _ => None,
        },
        _ => None,
    }
}

pub(crate) fn check_span(src: &SourceSpec, t_end: f64, dt: f64) -> Result<usize> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::Domain(format!("dt must be > 0, got {dt}")));
    }
    if !(t_end >= 100.0 * dt * (1.0 - 1e-12)) {
        return Err(Error::Domain(format!(
            "t_end = {t_end:e} s must cover at least 100 steps of {dt:e} s"
        )));
    }
    src.validate()?;
    if let Some(span) = src.span() {
        if t_end > span * (1.0 + 1e-12) {
            return Err(Error::OutOfRange(t_end));
        }
    }
    Ok((t_end / dt).round() as usize)
}

/// Integrates one emulator under voltage drive `src` from rest.
///
/// Every step is recorded, so the trace has `round(t_end/dt) + 1` samples.
/// Identical inputs give bit-identical traces.
pub fn integrate(cfg: &EmulatorConfig, src: &SourceSpec, t_end: f64, dt: f64) -> Result<Trace> {
    let steps = check_span(src, t_end, dt)?;
    if let Some(f) = src.f_max() {
        cfg.check_stability(2.0 * std::f64::consts::PI * f)?;
    }
    let emu = Emulator::new(cfg, Some(dt))?;
    let n = emu.state_len();
    let mut y = vec![0.0; n];
    let mut rk = Rk4::new(n);
    let mut trace = Trace::with_capacity(dt, steps + 1, true);
    trace.meta.source = src.describe();

    let mut f = |t: f64, y: &[f64], dy: &mut [f64]| {
        emu.rhs(y, src.value(t), dy);
    };
    for step in 0..=steps {
        let t = step as f64 * dt;
        let vin = src.value(t);
        let out = emu.rhs(&y, vin, &mut rk.k1);
        trace.push(t, vin, y[0], y[1], y[2], &out, true);
        if !out.i.is_finite() {
            return Err(Error::NonFinite {
                step,
                t,
                detail: format!("current = {}", out.i),
            });
        }
        if step == steps {
            break;
        }
        rk.step_with_k1(&mut f, t, &mut y, dt);
        check_finite(&y, step + 1, t + dt)?;
    }
    Ok(trace)
}

/// Integrates with the default step for `src`.
pub fn integrate_default(cfg: &EmulatorConfig, src: &SourceSpec, t_end: f64) -> Result<Trace> {
    let dt = default_dt(src).ok_or_else(|| {
        Error::Domain("source has no frequency content to derive a step from".into())
    })?;
    integrate(cfg, src, t_end, dt)
}

/// Linear-interpolated zero crossings of `x`: `(fractional index, upward)`.
pub fn zero_crossings(x: &[f64]) -> Vec<(f64, bool)> {
    let mut out = Vec::new();
    for n in 0..x.len().saturating_sub(1) {
        let (a, b) = (x[n], x[n + 1]);
        if a == 0.0 {
            // exact zero: count it once, judged by its neighbours
            let prev = if n > 0 { x[n - 1] } else { a };
            if (prev < 0.0 && b > 0.0) || (prev > 0.0 && b < 0.0) {
                out.push((n as f64, b > 0.0));
            }
        } else if (a < 0.0 && b > 0.0) || (a > 0.0 && b < 0.0) {
            out.push((n as f64 + a / (a - b), b > 0.0));
        }
    }
    out
}

/// The final `n_periods` of `trace`, starting at the sample nearest to an
/// upward zero crossing of φ, with `round(n_periods/(f·dt)) + 1` samples so
/// the window closes on itself.
pub fn steady_window(trace: &Trace, f: f64, n_periods: usize) -> Result<Trace> {
    if !(f > 0.0) || n_periods == 0 {
        return Err(Error::Domain(format!(
            "window needs f > 0 and n_periods >= 1, got f={f}, n={n_periods}"
        )));
    }
    trace.validate()?;
    let period = 1.0 / f;
    let span = trace.dt * (trace.len() - 1) as f64;
    if span < (n_periods as f64 + 2.0) * period * (1.0 - 1e-9) {
        return Err(Error::InsufficientLength(format!(
            "trace spans {span:e} s, window of {n_periods} periods needs {:e} s",
            (n_periods as f64 + 2.0) * period
        )));
    }
    let len = (n_periods as f64 * period / trace.dt).round() as usize;
    let last_start = trace.len() - 1 - len;
    let start = zero_crossings(&trace.phi)
        .into_iter()
        .filter(|(_, up)| *up)
        .map(|(x, _)| x.round() as usize)
        .rfind(|&s| s <= last_start)
        .ok_or(Error::NoCrossing)?;
    Ok(trace.slice(start, start + len + 1))
}
