//! Loop fingerprints: pinch residual, lobe areas, q–ρ single-valuedness.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::emulator::{Coefficients, EmulatorConfig};
use crate::error::{Error, Result};
use crate::sim::{integrate, steady_window, zero_crossings, Trace};
use crate::source::SourceSpec;

/// Pinch threshold for tiers other than `Simplified`.
pub const PINCH_THRESHOLD: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LoopMetrics {
    pub pinch_residual: f64,
    /// Magnitude of ∫I dφ over the φ > 0 half, Wb·A.
    pub lobe_area_pos: f64,
    /// Magnitude of ∫I dφ over the φ < 0 half, Wb·A.
    pub lobe_area_neg: f64,
    /// Mean lobe magnitude over `φ_max·I_max`.
    pub area_normalized: f64,
    pub qr_spread: f64,
}

fn abs_max(x: &[f64]) -> f64 {
    x.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

/// Largest interpolated `|I|` at a φ zero crossing over `max |I|`.
pub fn pinch_residual(w: &Trace) -> Result<f64> {
    let crossings = zero_crossings(&w.phi);
    if crossings.is_empty() {
        return Err(Error::NoCrossing);
    }
    let imax = abs_max(&w.i);
    if imax == 0.0 {
        return Ok(0.0);
    }
    let worst = crossings
        .iter()
        .map(|&(x, _)| {
            let n = x.floor() as usize;
            let frac = x - n as f64;
            if frac == 0.0 {
                w.i[n].abs()
            } else {
                (w.i[n] + frac * (w.i[n + 1] - w.i[n])).abs()
            }
        })
        .fold(0.0f64, f64::max);
    Ok((worst / imax).min(1.0))
}

/// Signed `∫I dφ` (trapezoid rule) over the φ > 0 and φ < 0 parts of the
/// loop, split at the interpolated crossings.
pub fn lobe_areas(w: &Trace) -> Result<(f64, f64)> {
    if zero_crossings(&w.phi).is_empty() {
        return Err(Error::NoCrossing);
    }
    let (mut pos, mut neg) = (0.0, 0.0);
    let mut add = |sign: f64, v: f64| {
        if sign > 0.0 {
            pos += v;
        } else if sign < 0.0 {
            neg += v;
        }
    };
    for n in 0..w.len() - 1 {
        let (p0, p1) = (w.phi[n], w.phi[n + 1]);
        let (i0, i1) = (w.i[n], w.i[n + 1]);
        if p0 * p1 < 0.0 {
            let theta = p0 / (p0 - p1);
            let ic = i0 + theta * (i1 - i0);
            add(p0, 0.5 * (i0 + ic) * (0.0 - p0));
            add(p1, 0.5 * (ic + i1) * p1);
        } else {
            add(p0 + p1, 0.5 * (i0 + i1) * (p1 - p0));
        }
    }
    Ok((pos, neg))
}

/// Largest within-bin spread of `q` around a per-bin linear fit in ρ,
/// relative to the global `q` range. 100 equal ρ bins.
///
/// A single-valued smooth `q(ρ)` gives a value near zero; two branches of a
/// hysteretic `q–ρ` curve give their separation.
pub fn q_rho_single_valuedness(w: &Trace) -> Result<f64> {
    const BINS: usize = 100;
    let (rmin, rmax) = w
        .rho
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    if !(rmax - rmin >= 1e-18) {
        return Err(Error::Degenerate(format!(
            "rho range {:e} Wb·s is below 1e-18",
            rmax - rmin
        )));
    }
    let (qmin, qmax) =
        w.q.iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            });
    let qrange = qmax - qmin;
    if !(qrange > 0.0) {
        return Err(Error::Degenerate("charge range is zero".into()));
    }
    let width = (rmax - rmin) / BINS as f64;
    let mut bins: Vec<Vec<(f64, f64)>> = vec![Vec::new(); BINS];
    for (&r, &q) in w.rho.iter().zip(&w.q) {
        let k = (((r - rmin) / width) as usize).min(BINS - 1);
        bins[k].push((r, q));
    }
    let mut worst = 0.0f64;
    for pts in bins.iter().filter(|p| p.len() >= 2) {
        let n = pts.len() as f64;
        let mr = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let mq = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxx: f64 = pts.iter().map(|p| (p.0 - mr).powi(2)).sum();
        let sxy: f64 = pts.iter().map(|p| (p.0 - mr) * (p.1 - mq)).sum();
        let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
        let (lo, hi) = pts
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
                let r = p.1 - mq - slope * (p.0 - mr);
                (lo.min(r), hi.max(r))
            });
        worst = worst.max(hi - lo);
    }
    Ok(worst / qrange)
}

/// `max_t |q − (aρ + s·bρ²/2)| / max|q|` for a run started from rest.
pub fn charge_law_error(trace: &Trace, co: &Coefficients) -> f64 {
    let qmax = abs_max(&trace.q);
    let err = trace
        .rho
        .iter()
        .zip(&trace.q)
        .map(|(&r, &q)| (q - (co.a * r + co.mode_sign * 0.5 * co.b * r * r)).abs())
        .fold(0.0f64, f64::max);
    if qmax == 0.0 {
        err
    } else {
        err / qmax
    }
}

pub fn loop_metrics(w: &Trace) -> Result<LoopMetrics> {
    let pinch = pinch_residual(w)?;
    let (pos, neg) = lobe_areas(w)?;
    let scale = abs_max(&w.phi) * abs_max(&w.i);
    let area_normalized = if scale > 0.0 {
        0.5 * (pos.abs() + neg.abs()) / scale
    } else {
        0.0
    };
    Ok(LoopMetrics {
        pinch_residual: pinch,
        lobe_area_pos: pos.abs(),
        lobe_area_neg: neg.abs(),
        area_normalized,
        qr_spread: q_rho_single_valuedness(w)?,
    })
}

/// How the capacitors follow the drive frequency in a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Hold {
    /// `C1 = product / f`.
    C1fConst {
        #[serde(default = "default_c1f")]
        product: f64,
    },
    CFixed,
}

fn default_c1f() -> f64 {
    75e-6
}

impl Hold {
    pub fn c1f_default() -> Self {
        Hold::C1fConst {
            product: default_c1f(),
        }
    }
}

/// Simulation length and resolution for one fingerprint run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSettings {
    /// Periods simulated from rest; the last one is analysed.
    pub periods: usize,
    pub steps_per_period: usize,
}

impl Default for RunSettings {
    fn default() -> Self {
        Self {
            periods: 4,
            steps_per_period: crate::sim::STEPS_PER_PERIOD,
        }
    }
}

/// Simulates `periods` periods of a single-tone cosine drive and returns
/// the full trace and the final one-period window.
pub fn single_tone_run(
    cfg: &EmulatorConfig,
    amplitude: f64,
    f: f64,
    settings: &RunSettings,
) -> Result<(Trace, Trace)> {
    if settings.periods < 3 || settings.steps_per_period < 50 {
        return Err(Error::Domain(
            "fingerprint runs need >= 3 periods and >= 50 steps per period".into(),
        ));
    }
    let src = SourceSpec::sine(amplitude, f);
    let dt = 1.0 / (f * settings.steps_per_period as f64);
    let trace = integrate(cfg, &src, settings.periods as f64 / f, dt)?;
    let w = steady_window(&trace, f, 1)?;
    Ok((trace, w))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProfilePoint {
    pub f: f64,
    pub c1: f64,
    pub area_normalized: f64,
    pub pinch_residual: f64,
    pub lobe_area_pos: f64,
    pub lobe_area_neg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AreaProfile {
    pub points: Vec<ProfilePoint>,
    /// Normalized area strictly decreases with frequency.
    pub monotone: bool,
}

/// Runs one fingerprint per frequency (in parallel) and checks the area
/// trend.
pub fn area_frequency_profile(
    cfg: &EmulatorConfig,
    amplitude: f64,
    freqs: &[f64],
    hold: Hold,
    settings: &RunSettings,
) -> Result<AreaProfile> {
    if freqs.len() < 3 {
        return Err(Error::Domain(
            "frequency profile needs at least 3 points".into(),
        ));
    }
    if freqs.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Domain(
            "frequencies must be strictly increasing".into(),
        ));
    }
    let points = freqs
        .par_iter()
        .map(|&f| {
            let mut c = *cfg;
            if let Hold::C1fConst { product } = hold {
                c.c1 = product / f;
            }
            let (_, w) = single_tone_run(&c, amplitude, f, settings)?;
            let m = loop_metrics(&w)?;
            Ok(ProfilePoint {
                f,
                c1: c.c1,
                area_normalized: m.area_normalized,
                pinch_residual: m.pinch_residual,
                lobe_area_pos: m.lobe_area_pos,
                lobe_area_neg: m.lobe_area_neg,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let monotone = points
        .windows(2)
        .all(|w| w[1].area_normalized < w[0].area_normalized);
    Ok(AreaProfile { points, monotone })
}

/// `(2/3)·b·Φ³/ω` with `Φ = A/ω`: lobe magnitude of the affine law under
/// cosine drive.
pub fn analytic_lobe_area(b: f64, amplitude: f64, f: f64) -> f64 {
    let w = 2.0 * std::f64::consts::PI * f;
    let phi = amplitude / w;
    2.0 / 3.0 * b * phi.powi(3) / w
}
