use rustfft::{num_complex::Complex, FftPlanner};
use serde::Serialize;

use crate::error::{Error, Result};

/// One-sided amplitude spectrum of a real record.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Spectrum {
    /// Bin spacing, Hz.
    pub df: f64,
    /// Peak amplitude per bin (`2|X|/N`, DC as `|X|/N`).
    pub magnitude: Vec<f64>,
    /// The record does not span an integer number of fundamental periods.
    pub leakage: bool,
}

impl Spectrum {
    pub fn frequency(&self, bin: usize) -> f64 {
        bin as f64 * self.df
    }

    pub fn bin_of(&self, f: f64) -> usize {
        ((f / self.df).round() as usize).min(self.magnitude.len() - 1)
    }

    /// Magnitude at the bin nearest `f`.
    pub fn at(&self, f: f64) -> f64 {
        self.magnitude[self.bin_of(f)]
    }

    /// Median magnitude over the bins up to `f_max`.
    pub fn median_floor(&self, f_max: f64) -> f64 {
        let mut m: Vec<f64> = self.magnitude[..=self.bin_of(f_max)].to_vec();
        m.sort_by(f64::total_cmp);
        let n = m.len();
        if n % 2 == 1 {
            m[n / 2]
        } else {
            0.5 * (m[n / 2 - 1] + m[n / 2])
        }
    }

    /// `(f, 20·log10(magnitude))` up to `f_max`.
    pub fn rows_db(&self, f_max: f64) -> Vec<(f64, f64)> {
        (0..=self.bin_of(f_max))
            .map(|k| (self.frequency(k), db(self.magnitude[k])))
            .collect()
    }
}

pub fn db(x: f64) -> f64 {
    20.0 * x.max(1e-300).log10()
}

/// Rectangular-window DFT magnitude of `values` sampled every `dt`.
///
/// `fundamental` is the lowest frequency the record should contain a whole
/// number of periods of; a mismatch is flagged and logged, not rejected.
pub fn spectrum(values: &[f64], dt: f64, fundamental: f64) -> Result<Spectrum> {
    let n = values.len();
    if n < 2 || !(dt > 0.0) {
        return Err(Error::InsufficientLength(format!(
            "spectrum needs >= 2 samples, got {n}"
        )));
    }
    let duration = n as f64 * dt;
    let periods = duration * fundamental;
    let leakage = (periods - periods.round()).abs() > 1e-6 * periods.max(1.0);
    if leakage {
        log::warn!("spectrum window spans {periods} periods of {fundamental} Hz; expect leakage");
    }
    let mut buf: Vec<Complex<f64>> = values.iter().map(|&v| Complex::new(v, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let magnitude = buf[..=n / 2]
        .iter()
        .enumerate()
        .map(|(k, c)| {
            let scale = if k == 0 || (n.is_multiple_of(2) && k == n / 2) {
                1.0
            } else {
                2.0
            };
            scale * c.norm() / n as f64
        })
        .collect();
    Ok(Spectrum {
        df: 1.0 / duration,
        magnitude,
        leakage,
    })
}
