//! Gaussian process and mismatch variation with batch statistics.
//!
//! Each run draws one process deviation per parameter, shared by all blocks,
//! and one independent mismatch deviation per block. Oxide thickness, width
//! and length perturb the lumped `k = μ·(ε_ox/t_ox)·(W/L)` relative to the
//! nominal geometry; threshold deviations are added directly. Runs use their
//! own ChaCha stream keyed by `(seed, run_index)`, so a batch is reproducible
//! regardless of scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::device::ota_gm;
use crate::emulator::EmulatorConfig;
use crate::error::{Error, Result};
use crate::fingerprint::{loop_metrics, PINCH_THRESHOLD};
use crate::sim::{integrate, steady_window};
use crate::source::SourceSpec;

/// Standard deviations of one parameter: shared per run, and per block.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sigma {
    pub process: f64,
    pub mismatch: f64,
}

impl Sigma {
    pub const fn new(process: f64, mismatch: f64) -> Self {
        Self { process, mismatch }
    }

    /// `√(process² + mismatch²)`
    pub fn combined(&self) -> f64 {
        self.process.hypot(self.mismatch)
    }
}

/// Nominal device geometry the deviations are applied to.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Geometry {
    pub tox: f64,
    #[serde(rename = "W")]
    pub w: f64,
    #[serde(rename = "L")]
    pub l: f64,
}

impl Default for Geometry {
    fn default() -> Self {
        Self {
            tox: 4e-9,
            w: 12e-6,
            l: 500e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DeviationSpec {
    pub tox: Sigma,
    #[serde(rename = "Vth")]
    pub vth: Sigma,
    #[serde(rename = "L")]
    pub l: Sigma,
    #[serde(rename = "W")]
    pub w: Sigma,
    pub n_runs: usize,
    pub seed: u64,
    pub nominal: Geometry,
    /// Junction-capacitance rows; accepted but not modeled.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cjn: Option<Sigma>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cjswn: Option<Sigma>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cjswgn: Option<Sigma>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cgon: Option<Sigma>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hdifn: Option<Sigma>,
}

impl Default for DeviationSpec {
    /// 180 nm process and mismatch deviations, 200 runs, seed 42.
    fn default() -> Self {
        Self {
            tox: Sigma::new(0.2e-9, 0.02e-9),
            vth: Sigma::new(0.04, 0.004),
            l: Sigma::new(2e-9, 0.2e-9),
            w: Sigma::new(2e-9, 0.2e-9),
            n_runs: 200,
            seed: 42,
            nominal: Geometry::default(),
            cjn: None,
            cjswn: None,
            cjswgn: None,
            cgon: None,
            hdifn: None,
        }
    }
}

impl DeviationSpec {
    pub fn zero(n_runs: usize, seed: u64) -> Self {
        Self {
            tox: Sigma::default(),
            vth: Sigma::default(),
            l: Sigma::default(),
            w: Sigma::default(),
            n_runs,
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, s) in [
            ("tox", self.tox),
            ("Vth", self.vth),
            ("L", self.l),
            ("W", self.w),
        ] {
            if !(s.process >= 0.0
                && s.mismatch >= 0.0
                && s.process.is_finite()
                && s.mismatch.is_finite())
            {
                return Err(Error::Domain(format!(
                    "{name} sigmas must be finite and >= 0"
                )));
            }
        }
        if self.n_runs == 0 {
            return Err(Error::Domain("n_runs must be >= 1".into()));
        }
        let g = self.nominal;
        if !(g.tox > 0.0 && g.w > 0.0 && g.l > 0.0) {
            return Err(Error::Domain("nominal geometry must be positive".into()));
        }
        Ok(())
    }

    /// Names of the junction rows that were supplied and will be ignored.
    pub fn ignored_rows(&self) -> Vec<&'static str> {
        [
            ("cjn", self.cjn),
            ("cjswn", self.cjswn),
            ("cjswgn", self.cjswgn),
            ("cgon", self.cgon),
            ("hdifn", self.hdifn),
        ]
        .into_iter()
        .filter(|(_, v)| v.is_some())
        .map(|(n, _)| n)
        .collect()
    }
}

/// Draws per attempt before a run is declared invalid.
pub const MAX_REDRAWS: usize = 100;

/// One accepted draw.
#[derive(Debug, Clone, PartialEq)]
pub struct Variation {
    pub cfg: EmulatorConfig,
    /// Gm3-stage threshold, V.
    pub vth: f64,
    /// Gm3-stage device gain, A/V².
    pub k: f64,
    pub attempts: usize,
}

struct Deviations {
    tox: f64,
    vth: f64,
    l: f64,
    w: f64,
}

fn normal(sigma: f64) -> Normal<f64> {
    Normal::new(0.0, sigma).expect("validated sigma")
}

fn rng_for(seed: u64, run_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(run_index);
    rng
}

/// Relative change of `k` for perturbed geometry.
fn k_ratio(nom: &Geometry, d: &Deviations) -> f64 {
    (nom.tox / (nom.tox + d.tox)) * ((nom.w + d.w) / nom.w) * (nom.l / (nom.l + d.l))
}

/// Draws a perturbed configuration for `run_index`. Deterministic in
/// `(spec.seed, run_index)`.
pub fn sample_variation_detailed(
    base: &EmulatorConfig,
    spec: &DeviationSpec,
    run_index: u64,
) -> Result<Variation> {
    spec.validate()?;
    let mut rng = rng_for(spec.seed, run_index);
    let dists = |s: Sigma| (normal(s.process), normal(s.mismatch));
    let (tox, vth, l, w) = (
        dists(spec.tox),
        dists(spec.vth),
        dists(spec.l),
        dists(spec.w),
    );
    let nom = spec.nominal;

    for attempt in 1..=MAX_REDRAWS {
        let process = Deviations {
            tox: tox.0.sample(&mut rng),
            vth: vth.0.sample(&mut rng),
            l: l.0.sample(&mut rng),
            w: w.0.sample(&mut rng),
        };
        let mut block = || Deviations {
            tox: process.tox + tox.1.sample(&mut rng),
            vth: process.vth + vth.1.sample(&mut rng),
            l: process.l + l.1.sample(&mut rng),
            w: process.w + w.1.sample(&mut rng),
        };
        let (d3, d4, d2) = (block(), block(), block());

        let mut cfg = *base;
        cfg.ota3.vth += d3.vth;
        cfg.ota3.k *= k_ratio(&nom, &d3);
        cfg.ota4.vth += d4.vth;
        cfg.ota4.k *= k_ratio(&nom, &d4);
        // Rx ∝ 1/√(μ·Cox·W/L)
        cfg.cccii2.rx /= k_ratio(&nom, &d2).sqrt();

        let geometry_ok = [&d3, &d4, &d2]
            .iter()
            .all(|d| nom.tox + d.tox > 0.0 && nom.w + d.w > 0.0 && nom.l + d.l > 0.0);
        let saturated = -cfg.ota3.vss - 2.0 * cfg.ota3.vth >= 0.0 && ota_gm(&cfg.ota4).is_ok();
        if geometry_ok && saturated && cfg.validate().is_ok() {
            return Ok(Variation {
                vth: cfg.ota3.vth,
                k: cfg.ota3.k,
                cfg,
                attempts: attempt,
            });
        }
    }
    Err(Error::Domain(format!(
        "run {run_index}: no valid draw in {MAX_REDRAWS} attempts"
    )))
}

/// The perturbed configuration for `run_index`.
pub fn sample_variation(
    base: &EmulatorConfig,
    spec: &DeviationSpec,
    run_index: u64,
) -> Result<EmulatorConfig> {
    sample_variation_detailed(base, spec, run_index).map(|v| v.cfg)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BatchSettings {
    /// Periods simulated per run; the final one is analysed.
    pub periods: usize,
    pub steps_per_period: usize,
    pub pinch_threshold: f64,
}

impl Default for BatchSettings {
    fn default() -> Self {
        Self {
            periods: 4,
            steps_per_period: crate::sim::STEPS_PER_PERIOD,
            pinch_threshold: PINCH_THRESHOLD,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunRecord {
    pub run_index: u64,
    pub vth: f64,
    pub k: f64,
    pub pinch_residual: f64,
    pub lobe_area_pos: f64,
    pub lobe_area_neg: f64,
    pub area_normalized: f64,
    pub error: Option<String>,
}

impl RunRecord {
    pub fn ok(&self) -> bool {
        self.error.is_none()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Stat {
    pub mean: f64,
    pub sigma: f64,
}

impl Stat {
    /// Mean and sample standard deviation (`n − 1`).
    pub fn of(x: &[f64]) -> Stat {
        let n = x.len() as f64;
        if x.is_empty() {
            return Stat {
                mean: f64::NAN,
                sigma: f64::NAN,
            };
        }
        if x.iter().all(|v| *v == x[0]) {
            return Stat {
                mean: x[0],
                sigma: 0.0,
            };
        }
        let mean = x.iter().sum::<f64>() / n;
        let sigma = if x.len() > 1 {
            (x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Stat { mean, sigma }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub counts: Vec<u64>,
}

impl Histogram {
    pub fn build(x: &[f64], bins: usize) -> Histogram {
        let lo = x.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut counts = vec![0u64; bins];
        if x.is_empty() {
            return Histogram {
                lo: 0.0,
                hi: 0.0,
                counts,
            };
        }
        let width = (hi - lo) / bins as f64;
        for &v in x {
            let k = if width > 0.0 {
                (((v - lo) / width) as usize).min(bins - 1)
            } else {
                bins / 2
            };
            counts[k] += 1;
        }
        Histogram { lo, hi, counts }
    }

    /// `(lower edge, upper edge, count)` per bin.
    pub fn rows(&self) -> Vec<(f64, f64, u64)> {
        let n = self.counts.len();
        let width = (self.hi - self.lo) / n as f64;
        self.counts
            .iter()
            .enumerate()
            .map(|(k, &c)| {
                (
                    self.lo + k as f64 * width,
                    self.lo + (k + 1) as f64 * width,
                    c,
                )
            })
            .collect()
    }
}

pub const HISTOGRAM_BINS: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McReport {
    pub records: Vec<RunRecord>,
    pub vth: Stat,
    pub k: Stat,
    pub pinch_residual: Stat,
    pub area_normalized: Stat,
    /// Share of all runs whose pinch residual is below the threshold.
    pub pinched_fraction: f64,
    pub failed_runs: usize,
    pub hist_vth: Histogram,
    pub hist_k: Histogram,
    /// Configured combined threshold sigma, V.
    pub vth_sigma_configured: f64,
}

fn run_one(
    base: &EmulatorConfig,
    src: &SourceSpec,
    spec: &DeviationSpec,
    settings: &BatchSettings,
    idx: u64,
) -> RunRecord {
    let mut rec = RunRecord {
        run_index: idx,
        vth: f64::NAN,
        k: f64::NAN,
        pinch_residual: f64::NAN,
        lobe_area_pos: f64::NAN,
        lobe_area_neg: f64::NAN,
        area_normalized: f64::NAN,
        error: None,
    };
    let result = (|| -> Result<()> {
        let v = sample_variation_detailed(base, spec, idx)?;
        rec.vth = v.vth;
        rec.k = v.k;
        let f = src
            .f_max()
            .ok_or_else(|| Error::Domain("Monte Carlo needs a periodic source".into()))?;
        let dt = 1.0 / (f * settings.steps_per_period as f64);
        let trace = integrate(&v.cfg, src, settings.periods as f64 / f, dt)?;
        let w = steady_window(&trace, f, 1)?;
        let m = loop_metrics(&w)?;
        rec.pinch_residual = m.pinch_residual;
        rec.lobe_area_pos = m.lobe_area_pos;
        rec.lobe_area_neg = m.lobe_area_neg;
        rec.area_normalized = m.area_normalized;
        Ok(())
    })();
    if let Err(e) = result {
        rec.error = Some(e.to_string());
    }
    rec
}

pub fn run_batch(
    base: &EmulatorConfig,
    src: &SourceSpec,
    spec: &DeviationSpec,
) -> Result<McReport> {
    run_batch_with(base, src, spec, &BatchSettings::default())
}

/// Runs `spec.n_runs` perturbed simulations in parallel. Failed runs are
/// kept in the records with their error and excluded from the statistics.
pub fn run_batch_with(
    base: &EmulatorConfig,
    src: &SourceSpec,
    spec: &DeviationSpec,
    settings: &BatchSettings,
) -> Result<McReport> {
    spec.validate()?;
    base.validate()?;
    src.validate()?;
    if settings.periods < 3 {
        return Err(Error::Domain("Monte Carlo runs need >= 3 periods".into()));
    }
    for row in spec.ignored_rows() {
        log::warn!("deviation row `{row}` has no carrier in the behavioral model and is ignored");
    }
    let records: Vec<RunRecord> = (0..spec.n_runs as u64)
        .into_par_iter()
        .map(|idx| run_one(base, src, spec, settings, idx))
        .collect();

    let ok: Vec<&RunRecord> = records.iter().filter(|r| r.ok()).collect();
    let col = |f: fn(&RunRecord) -> f64| ok.iter().map(|r| f(r)).collect::<Vec<f64>>();
    let vths = col(|r| r.vth);
    let ks = col(|r| r.k);
    let pinched = ok
        .iter()
        .filter(|r| r.pinch_residual < settings.pinch_threshold)
        .count();
    Ok(McReport {
        vth: Stat::of(&vths),
        k: Stat::of(&ks),
        pinch_residual: Stat::of(&col(|r| r.pinch_residual)),
        area_normalized: Stat::of(&col(|r| r.area_normalized)),
        pinched_fraction: pinched as f64 / records.len() as f64,
        failed_runs: records.len() - ok.len(),
        hist_vth: Histogram::build(&vths, HISTOGRAM_BINS),
        hist_k: Histogram::build(&ks, HISTOGRAM_BINS),
        vth_sigma_configured: spec.vth.combined(),
        records,
    })
}
