//! Runs a parsed experiment document and writes its artifacts.
//!
//! Every experiment writes `summary.json` (metrics, config hash, tool
//! version) plus CSV tables with an `f64` written as `{:.16e}`, which reads
//! back bit-exactly.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use crate::am::{run_pipeline, AmReport};
use crate::config::{ExperimentConfig, ExperimentKind};
use crate::emulator::{derive_coefficients, Fidelity};
use crate::error::{Error, Result};
use crate::fingerprint::{
    area_frequency_profile, charge_law_error, loop_metrics, q_rho_single_valuedness, RunSettings,
};
use crate::montecarlo::{run_batch_with, BatchSettings, Histogram, McReport};
use crate::network::{simulate, CompositeSpec};
use crate::sim::{integrate, steady_window, Trace};
use crate::source::SourceKind;

pub const TRACE_HEADER: &str = "time_s,vin_V,phi_Wb,rho_Wbs,q_C,i_A,linv_perH";

/// Command-line overrides applied on top of the document.
#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    /// Replaces the Monte Carlo seed.
    pub seed: Option<u64>,
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub kind: ExperimentKind,
    pub summary: Value,
    /// Files written, relative to the output directory.
    pub files: Vec<PathBuf>,
}

/// Runs the experiment block of `cfg` and writes its artifacts to `out`.
///
/// `kind` is the requested subcommand and must match the block in the
/// document.
pub fn run_experiment(
    cfg: &ExperimentConfig,
    kind: ExperimentKind,
    out: &Path,
    opts: &RunOptions,
) -> Result<Outcome> {
    if cfg.kind() != kind {
        return Err(Error::Schema(vec![crate::error::Violation {
            path: format!("/{}", kind.name()),
            message: format!(
                "subcommand `{}` needs a `{}` block, the document has `{}`",
                kind.name(),
                kind.name(),
                cfg.kind().name()
            ),
        }]));
    }
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let mut w = Writer {
        out,
        files: Vec::new(),
    };
    let metrics = match kind {
        ExperimentKind::Run => run(cfg, &mut w)?,
        ExperimentKind::Sweep => sweep(cfg, &mut w)?,
        ExperimentKind::Mc => mc(cfg, opts, &mut w)?,
        ExperimentKind::Am => am(cfg, &mut w)?,
        ExperimentKind::Compose => compose(cfg, &mut w)?,
    };
    let summary = json!({
        "tool": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "experiment": kind.name(),
        "config_hash": cfg.hash(),
        "seed": opts.seed,
        "metrics": metrics,
    });
    let text = serde_json::to_string_pretty(&summary).expect("serializable") + "\n";
    w.text("summary.json", &text)?;
    Ok(Outcome {
        kind,
        summary,
        files: w.files,
    })
}

struct Writer<'a> {
    out: &'a Path,
    files: Vec<PathBuf>,
}

impl Writer<'_> {
    fn text(&mut self, name: &str, text: &str) -> Result<()> {
        let path = self.out.join(name);
        fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        self.files.push(name.into());
        Ok(())
    }

    fn csv<I>(&mut self, name: &str, header: &str, rows: I) -> Result<()>
    where
        I: IntoIterator<Item = Vec<String>>,
    {
        let path = self.out.join(name);
        let io = |e| Error::io(&path, e);
        let mut f = BufWriter::new(File::create(&path).map_err(io)?);
        writeln!(f, "{header}").map_err(io)?;
        for row in rows {
            writeln!(f, "{}", row.join(",")).map_err(io)?;
        }
        f.flush().map_err(io)?;
        self.files.push(name.into());
        Ok(())
    }

    fn trace(&mut self, name: &str, t: &Trace) -> Result<()> {
        self.csv(
            name,
            TRACE_HEADER,
            (0..t.len()).map(|k| {
                nums(&[
                    t.t[k], t.vin[k], t.phi[k], t.rho[k], t.q[k], t.i[k], t.linv[k],
                ])
            }),
        )
    }
}

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn nums(v: &[f64]) -> Vec<String> {
    v.iter().map(|&x| num(x)).collect()
}

/// Reads a trace CSV written by this module.
pub fn read_trace_csv(path: &Path) -> Result<Trace> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut lines = BufReader::new(file).lines();
    let header = lines
        .next()
        .transpose()
        .map_err(|e| Error::io(path, e))?
        .unwrap_or_default();
    if header != TRACE_HEADER {
        return Err(Error::Parse {
            line: 1,
            column: 1,
            message: format!("unexpected trace header `{header}`"),
        });
    }
    let mut tr = Trace::default();
    for (n, line) in lines.enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let v: Vec<f64> = line
            .split(',')
            .map(|x| x.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Parse {
                line: n + 2,
                column: 1,
                message: e.to_string(),
            })?;
        if v.len() != 7 {
            return Err(Error::Parse {
                line: n + 2,
                column: 1,
                message: format!("expected 7 columns, got {}", v.len()),
            });
        }
        for (col, x) in [
            &mut tr.t,
            &mut tr.vin,
            &mut tr.phi,
            &mut tr.rho,
            &mut tr.q,
            &mut tr.i,
            &mut tr.linv,
        ]
        .into_iter()
        .zip(v)
        {
            col.push(x);
        }
    }
    if tr.t.len() > 1 {
        tr.dt = tr.t[1] - tr.t[0];
    }
    Ok(tr)
}

fn window_metrics(cfg: &ExperimentConfig, trace: &Trace) -> Result<Value> {
    let Some(f) = cfg.fundamental() else {
        return Ok(Value::Null);
    };
    let w = steady_window(trace, f, cfg.sim.steady_periods)?;
    let m = loop_metrics(&w)?;
    Ok(json!({
        "window_start_s": w.t[0],
        "window_samples": w.len(),
        "pinch_residual": m.pinch_residual,
        "lobe_area_pos": m.lobe_area_pos,
        "lobe_area_neg": m.lobe_area_neg,
        "area_normalized": m.area_normalized,
        "q_rho_spread": q_rho_single_valuedness(&w)?,
    }))
}

fn run(cfg: &ExperimentConfig, w: &mut Writer) -> Result<Value> {
    let emu = cfg.emulator.build()?;
    let (t_end, dt) = cfg.clock()?;
    let mut trace = integrate(&emu, &cfg.source, t_end, dt)?;
    trace.meta.config_hash = Some(cfg.hash());
    w.trace("trace.csv", &trace)?;
    let co = derive_coefficients(&emu)?;
    let charge = (emu.fidelity == Fidelity::Simplified).then(|| charge_law_error(&trace, &co));
    Ok(json!({
        "samples": trace.len(),
        "dt": dt,
        "t_end": t_end,
        "a": co.a,
        "b": co.b,
        "mode_sign": co.mode_sign,
        "rx2": emu.rx2(),
        "charge_law_error": charge,
        "loop": window_metrics(cfg, &trace)?,
    }))
}

fn sweep(cfg: &ExperimentConfig, w: &mut Writer) -> Result<Value> {
    let block = cfg.sweep.as_ref().expect("sweep block");
    let SourceKind::Sine { amplitude, .. } = cfg.source.kind else {
        unreachable!("validated as sine")
    };
    let settings = RunSettings {
        periods: cfg.sim.periods,
        steps_per_period: cfg.sim.steps_per_period,
    };
    let emu = cfg.emulator.build()?;
    let p = area_frequency_profile(&emu, amplitude, &block.frequencies, block.hold, &settings)?;
    w.csv(
        "sweep.csv",
        "f,area_normalized,pinch_residual",
        p.points
            .iter()
            .map(|x| nums(&[x.f, x.area_normalized, x.pinch_residual])),
    )?;
    Ok(json!({
        "monotone_decreasing": p.monotone,
        "points": p.points,
    }))
}

fn mc(cfg: &ExperimentConfig, opts: &RunOptions, w: &mut Writer) -> Result<Value> {
    let block = cfg.mc.as_ref().expect("mc block");
    let mut spec = block.deviations.clone();
    if let Some(seed) = opts.seed {
        spec.seed = seed;
    }
    let settings = BatchSettings {
        periods: cfg.sim.periods,
        steps_per_period: cfg.sim.steps_per_period,
        pinch_threshold: block.pinch_threshold,
    };
    let r: McReport = run_batch_with(&cfg.emulator.build()?, &cfg.source, &spec, &settings)?;
    w.csv(
        "mc_records.csv",
        "run_index,vth_V,k_AperV2,pinch_residual,lobe_area_pos,lobe_area_neg,area_normalized,failed",
        r.records.iter().map(|x| {
            let mut row = vec![x.run_index.to_string()];
            row.extend(nums(&[
                x.vth,
                x.k,
                x.pinch_residual,
                x.lobe_area_pos,
                x.lobe_area_neg,
                x.area_normalized,
            ]));
            row.push(u8::from(!x.ok()).to_string());
            row
        }),
    )?;
    let hist = |h: &Histogram| {
        h.rows()
            .into_iter()
            .map(|(lo, hi, c)| vec![num(lo), num(hi), c.to_string()])
    };
    w.csv("hist_vth.csv", "bin_lo,bin_hi,count", hist(&r.hist_vth))?;
    w.csv("hist_k.csv", "bin_lo,bin_hi,count", hist(&r.hist_k))?;
    let errors: Vec<Value> = r
        .records
        .iter()
        .filter_map(|x| {
            x.error
                .as_ref()
                .map(|e| json!({"run_index": x.run_index, "error": e}))
        })
        .collect();
    Ok(json!({
        "n_runs": r.records.len(),
        "seed": spec.seed,
        "failed_runs": r.failed_runs,
        "pinched_fraction": r.pinched_fraction,
        "vth": r.vth,
        "k": r.k,
        "vth_sigma_configured": r.vth_sigma_configured,
        "pinch_residual": r.pinch_residual,
        "area_normalized": r.area_normalized,
        "errors": errors,
    }))
}

fn am(cfg: &ExperimentConfig, w: &mut Writer) -> Result<Value> {
    let am_cfg = cfg.am_config()?;
    let stride = cfg.am.map(|a| a.output_stride).unwrap_or(1);
    let r: AmReport = run_pipeline(&am_cfg)?;
    let span = am_cfg.settings.spectrum_span * am_cfg.carrier.frequency;
    w.csv(
        "spectrum.csv",
        "f,magnitude_db",
        r.spectrum
            .rows_db(span)
            .into_iter()
            .map(|(f, m)| nums(&[f, m])),
    )?;
    let d = &r.demod;
    w.csv(
        "demod.csv",
        "time_s,message_estimate,reference",
        (0..d.message_estimate.len()).step_by(stride).map(|k| {
            nums(&[
                d.message_estimate.time(k),
                d.message_estimate.values[k],
                d.reference.values[k],
            ])
        }),
    )?;
    let (s, e) = (&r.signal.s_am, &r.signal.emulator);
    w.csv(
        "am.csv",
        "time_s,vin_V,i_A,s_am_A",
        (0..s.len().min(e.len()))
            .step_by(stride)
            .map(|k| nums(&[e.t[k], e.vin[k], e.i[k], s.values[k]])),
    )?;
    Ok(json!({
        "carrier": r.carrier,
        "usb": r.usb,
        "lsb": r.lsb,
        "margin_db": r.margin_db,
        "sideband_to_carrier": r.sideband_to_carrier(),
        "asymmetry": r.asymmetry,
        "asymmetry_bound": r.asymmetry_bound(),
        "predicted": r.predicted,
        "correlation": d.correlation,
        "reference_delay_s": d.delay,
        "spectrum_leakage": r.spectrum.leakage,
        "output_stride": stride,
    }))
}

fn compose(cfg: &ExperimentConfig, w: &mut Writer) -> Result<Value> {
    let block = cfg.compose.as_ref().expect("compose block");
    let first = cfg.emulator.build()?;
    let second = block.second.as_ref().unwrap_or(&cfg.emulator).build()?;
    let spec = CompositeSpec {
        elements: vec![first, second],
        wiring: block.wiring,
        drive: cfg.source.clone(),
    };
    let (t_end, dt) = cfg.clock()?;
    let ct = simulate(&spec, t_end, dt)?;
    w.trace("composite.csv", &ct.composite)?;
    for (k, b) in ct.branches.iter().enumerate() {
        w.trace(&format!("branch_{}.csv", k + 1), b)?;
    }
    Ok(json!({
        "wiring": block.wiring,
        "samples": ct.composite.len(),
        "dt": dt,
        "t_end": t_end,
        "loop": window_metrics(cfg, &ct.composite)?,
    }))
}
