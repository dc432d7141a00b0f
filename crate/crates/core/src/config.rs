//! JSON experiment documents.
//!
//! One document holds the emulator, the drive, the simulation clock and
//! exactly one experiment block (`run`, `sweep`, `mc`, `am` or `compose`).
//! Every quantity is in SI base units. Unknown keys are rejected.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::am::{AmConfig, AmSettings, BiquadSpec, ToneSpec};
use crate::device::{CcciiParams, MosPair, OtaParams};
use crate::emulator::{EmulatorConfig, Fidelity, Mode, Topology};
use crate::error::{Error, Result, Violation};
use crate::fingerprint::{Hold, PINCH_THRESHOLD};
use crate::montecarlo::DeviationSpec;
use crate::network::Wiring;
use crate::sim::STEPS_PER_PERIOD;
use crate::source::{SourceKind, SourceSpec};

/// Emulator block. The two OTAs share `ota`; the Gm4 stage is biased at
/// `Vb4` and `R_X2` follows from `Ib` through `mos_pair`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmulatorDoc {
    pub topology: Topology,
    pub mode: Mode,
    pub fidelity: Fidelity,
    #[serde(rename = "R1")]
    pub r1: f64,
    #[serde(rename = "C1")]
    pub c1: f64,
    #[serde(rename = "C2")]
    pub c2: f64,
    #[serde(rename = "Vb4")]
    pub vb4: f64,
    #[serde(rename = "Ib")]
    pub ib: f64,
    pub ota: OtaParams,
    pub ccii1: CcciiParams,
    pub cccii2: CcciiParams,
    pub mos_pair: MosPair,
}

impl Default for EmulatorDoc {
    fn default() -> Self {
        Self {
            topology: Topology::Grounded,
            mode: Mode::Incremental,
            fidelity: Fidelity::FullIdeal,
            r1: 10.0,
            c1: 75e-12,
            c2: 150e-12,
            vb4: 0.45,
            ib: 20e-6,
            ota: OtaParams::default(),
            ccii1: CcciiParams::default(),
            cccii2: CcciiParams::default(),
            mos_pair: MosPair::default(),
        }
    }
}

impl EmulatorDoc {
    pub fn build(&self) -> Result<EmulatorConfig> {
        let cfg = EmulatorConfig {
            topology: self.topology,
            mode: self.mode,
            fidelity: self.fidelity,
            r1: self.r1,
            c1: self.c1,
            c2: self.c2,
            ota3: OtaParams {
                vb: 0.0,
                ..self.ota
            },
            ota4: OtaParams {
                vb: self.vb4,
                ..self.ota
            },
            ccii1: self.ccii1,
            cccii2: self.cccii2,
        };
        cfg.with_ib_pair(self.ib, &self.mos_pair)
    }

    fn check(&self, at: &str, v: &mut Vec<Violation>) {
        let mut need = |ok: bool, field: &str, msg: &str| {
            if !ok {
                v.push(Violation {
                    path: format!("{at}/{field}"),
                    message: msg.into(),
                });
            }
        };
        for (name, x) in [
            ("R1", self.r1),
            ("C1", self.c1),
            ("C2", self.c2),
            ("Ib", self.ib),
        ] {
            need(x > 0.0 && x.is_finite(), name, "must be > 0");
        }
        let o = &self.ota;
        need(o.k > 0.0, "ota/k", "must be > 0");
        need(o.vdd > 0.0, "ota/Vdd", "must be > 0");
        need(o.vss < 0.0, "ota/Vss", "must be < 0");
        need(o.tau >= 0.0, "ota/tau", "must be >= 0");
        need(o.omega_a > 0.0, "ota/omega_a", "must be > 0");
        need(o.ro > 0.0, "ota/Ro", "must be > 0");
        need(
            -o.vss - 2.0 * o.vth >= 0.0,
            "ota/Vth",
            "Gm3 stage out of saturation: -Vss - 2*Vth must be >= 0",
        );
        need(
            self.vb4 - o.vss - 2.0 * o.vth >= 0.0,
            "Vb4",
            "Gm4 stage out of saturation: Vb4 - Vss - 2*Vth must be >= 0",
        );
        for (name, c) in [("ccii1", &self.ccii1), ("cccii2", &self.cccii2)] {
            need(c.rx >= 0.0, &format!("{name}/Rx"), "must be >= 0");
            need(
                c.beta0 > 0.0 && c.beta0 <= 1.1,
                &format!("{name}/beta0"),
                "must be in (0, 1.1]",
            );
            need(
                c.alpha0 > 0.0 && c.alpha0 <= 1.1,
                &format!("{name}/alpha0"),
                "must be in (0, 1.1]",
            );
            need(
                c.omega_beta > 0.0,
                &format!("{name}/omega_beta"),
                "must be > 0",
            );
            need(
                c.omega_alpha > 0.0,
                &format!("{name}/omega_alpha"),
                "must be > 0",
            );
        }
        let p = &self.mos_pair;
        for (name, x) in [
            ("mu_cox_n", p.mu_cox_n),
            ("aspect_n", p.aspect_n),
            ("mu_cox_p", p.mu_cox_p),
            ("aspect_p", p.aspect_p),
        ] {
            need(x > 0.0, &format!("mos_pair/{name}"), "must be > 0");
        }
    }
}

/// Simulation clock. Without `t_end`, `periods` periods of the lowest tone
/// are simulated; without `dt`, `steps_per_period` steps per period of the
/// highest tone are taken.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimDoc {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_end: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    pub periods: usize,
    pub steps_per_period: usize,
    /// Periods in the analysis window.
    pub steady_periods: usize,
}

impl Default for SimDoc {
    fn default() -> Self {
        Self {
            t_end: None,
            dt: None,
            periods: 20,
            steps_per_period: STEPS_PER_PERIOD,
            steady_periods: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunDoc {}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepDoc {
    /// Hz, strictly increasing.
    pub frequencies: Vec<f64>,
    #[serde(default = "default_hold")]
    pub hold: Hold,
}

fn default_hold() -> Hold {
    Hold::CFixed
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McDoc {
    pub deviations: DeviationSpec,
    pub pinch_threshold: f64,
}

impl Default for McDoc {
    fn default() -> Self {
        Self {
            deviations: DeviationSpec::default(),
            pinch_threshold: PINCH_THRESHOLD,
        }
    }
}

/// AM block. Message and carrier are the two tones of the `source`
/// (the lower one is the message).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AmDoc {
    pub local_carrier: ToneSpec,
    pub bpf: BiquadSpec,
    pub lpf: BiquadSpec,
    pub settings: AmSettings,
    /// Write every n-th sample to the time-series CSVs.
    pub output_stride: usize,
}

impl Default for AmDoc {
    fn default() -> Self {
        let d = AmConfig::default();
        Self {
            local_carrier: d.local_carrier,
            bpf: d.bpf,
            lpf: d.lpf,
            settings: d.settings,
            output_stride: 10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComposeDoc {
    pub wiring: Wiring,
    /// Second element; defaults to a copy of `emulator`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub second: Option<EmulatorDoc>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    Run,
    Sweep,
    Mc,
    Am,
    Compose,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Run => "run",
            ExperimentKind::Sweep => "sweep",
            ExperimentKind::Mc => "mc",
            ExperimentKind::Am => "am",
            ExperimentKind::Compose => "compose",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub emulator: EmulatorDoc,
    pub source: SourceSpec,
    #[serde(default)]
    pub sim: SimDoc,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub run: Option<RunDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mc: Option<McDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub am: Option<AmDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub compose: Option<ComposeDoc>,
}

impl ExperimentConfig {
    pub fn kind(&self) -> ExperimentKind {
        if self.sweep.is_some() {
            ExperimentKind::Sweep
        } else if self.mc.is_some() {
            ExperimentKind::Mc
        } else if self.am.is_some() {
            ExperimentKind::Am
        } else if self.compose.is_some() {
            ExperimentKind::Compose
        } else {
            ExperimentKind::Run
        }
    }

    /// sha256 of the canonical (sorted-key, defaults-applied) JSON.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_value(self)
            .expect("serializable")
            .to_string();
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable")
    }

    /// `(t_end, dt)` from the clock block and the source.
    pub fn clock(&self) -> Result<(f64, f64)> {
        let src = &self.source;
        let dt = match (self.sim.dt, src.f_max(), &src.kind) {
            (Some(dt), _, _) => dt,
            (None, Some(f), _) => 1.0 / (self.sim.steps_per_period as f64 * f),
            (None, None, SourceKind::Samples { dt, .. }) => *dt,
            _ => return Err(schema("/sim/dt", "required for a silent source")),
        };
        let t_end = match (self.sim.t_end, src.f_min(), src.span()) {
            (Some(t), _, _) => t,
            (None, Some(f), _) => self.sim.periods as f64 / f,
            (None, None, Some(span)) => span,
            _ => return Err(schema("/sim/t_end", "required for a silent source")),
        };
        Ok((t_end, dt))
    }

    /// Single analysis frequency: the lowest tone.
    pub fn fundamental(&self) -> Option<f64> {
        self.source.f_min()
    }

    /// AM configuration assembled from the source tones and the `am` block.
    pub fn am_config(&self) -> Result<AmConfig> {
        let block = self.am.unwrap_or_default();
        let mut tones = self.source.tones();
        if tones.len() != 2 || !matches!(self.source.kind, SourceKind::MultiTone { .. }) {
            return Err(schema(
                "/source/waveform",
                "am needs a multi_tone source with exactly two tones (message, carrier)",
            ));
        }
        tones.sort_by(|a, b| a.frequency.total_cmp(&b.frequency));
        let tone = |t: &crate::source::Tone| ToneSpec {
            amplitude: t.amplitude,
            frequency: t.frequency,
            phase: t.phase,
        };
        Ok(AmConfig {
            message: tone(&tones[0]),
            carrier: tone(&tones[1]),
            local_carrier: block.local_carrier,
            bpf: block.bpf,
            lpf: block.lpf,
            emulator: self.emulator.build()?,
            settings: block.settings,
        })
    }

    fn check(&self) -> Vec<Violation> {
        let mut v = Vec::new();
        self.emulator.check("/emulator", &mut v);
        if let Some(c) = &self.compose {
            if let Some(second) = &c.second {
                second.check("/compose/second", &mut v);
            }
        }
        let mut push = |path: &str, msg: &str| {
            v.push(Violation {
                path: path.into(),
                message: msg.into(),
            })
        };

        let blocks = [
            self.run.is_some(),
            self.sweep.is_some(),
            self.mc.is_some(),
            self.am.is_some(),
            self.compose.is_some(),
        ];
        if blocks.iter().filter(|b| **b).count() != 1 {
            push("", "exactly one of run, sweep, mc, am, compose is required");
        }

        match &self.source.kind {
            SourceKind::Samples { dt, values } => {
                if !(*dt > 0.0) {
                    push("/source/waveform/dt", "must be > 0");
                }
                if values.len() < 2 {
                    push("/source/waveform/values", "needs at least 2 samples");
                }
            }
            SourceKind::Sine {
                amplitude,
                frequency,
                ..
            } => {
                if !(*amplitude >= 0.0) {
                    push("/source/waveform/amplitude", "must be >= 0");
                }
                if !(*frequency > 0.0) {
                    push("/source/waveform/frequency", "must be > 0");
                }
            }
            SourceKind::MultiTone { tones } => {
                for (k, t) in tones.iter().enumerate() {
                    if !(t.amplitude >= 0.0) {
                        push(
                            &format!("/source/waveform/tones/{k}/amplitude"),
                            "must be >= 0",
                        );
                    }
                    if !(t.frequency > 0.0) {
                        push(
                            &format!("/source/waveform/tones/{k}/frequency"),
                            "must be > 0",
                        );
                    }
                }
            }
        }

        let s = &self.sim;
        if let Some(dt) = s.dt {
            if !(dt > 0.0) {
                push("/sim/dt", "must be > 0");
            }
        }
        if let Some(t) = s.t_end {
            if !(t > 0.0) {
                push("/sim/t_end", "must be > 0");
            }
        }
        if s.steps_per_period < 50 {
            push("/sim/steps_per_period", "must be >= 50");
        }
        if s.steady_periods == 0 {
            push("/sim/steady_periods", "must be >= 1");
        }
        if s.periods < s.steady_periods + 2 {
            push("/sim/periods", "must exceed steady_periods by at least 2");
        }

        if let Some(sw) = &self.sweep {
            if sw.frequencies.len() < 3 {
                push("/sweep/frequencies", "needs at least 3 entries");
            }
            if sw.frequencies.windows(2).any(|w| !(w[1] > w[0]))
                || sw.frequencies.iter().any(|f| !(*f > 0.0))
            {
                push(
                    "/sweep/frequencies",
                    "must be positive and strictly increasing",
                );
            }
            if let Hold::C1fConst { product } = sw.hold {
                if !(product > 0.0) {
                    push("/sweep/hold/product", "must be > 0");
                }
            }
            if !matches!(self.source.kind, SourceKind::Sine { .. }) {
                push(
                    "/source/waveform",
                    "sweep needs a sine source (its amplitude is swept)",
                );
            }
        }
        if let Some(mc) = &self.mc {
            let d = &mc.deviations;
            for (name, sg) in [("tox", d.tox), ("Vth", d.vth), ("L", d.l), ("W", d.w)] {
                if !(sg.process >= 0.0 && sg.mismatch >= 0.0) {
                    push(&format!("/mc/deviations/{name}"), "sigmas must be >= 0");
                }
            }
            if d.n_runs == 0 {
                push("/mc/deviations/n_runs", "must be >= 1");
            }
            if !(mc.pinch_threshold > 0.0 && mc.pinch_threshold <= 1.0) {
                push("/mc/pinch_threshold", "must be in (0, 1]");
            }
            if self.source.f_max().is_none() {
                push("/source/waveform", "mc needs a periodic source");
            }
        }
        if let Some(am) = &self.am {
            if am.output_stride == 0 {
                push("/am/output_stride", "must be >= 1");
            }
            if let Err(e) = self.am_config().and_then(|c| c.validate()) {
                push("/am", &e.to_string());
            }
        }
        if self.compose.is_some() && self.source.f_max().is_none() && self.sim.dt.is_none() {
            push("/sim/dt", "required for a non-periodic drive");
        }

        if v.is_empty() {
            if let Err(Error::Schema(mut vs)) = self.clock() {
                v.append(&mut vs);
            }
        }
        if v.is_empty() {
            if let (Ok(cfg), Some(f)) = (self.emulator.build(), self.source.f_max()) {
                if cfg.check_stability(2.0 * std::f64::consts::PI * f).is_err() {
                    v.push(Violation {
                        path: "/emulator/R1".into(),
                        message: "floating stage unstable: R1 must be < R_X2 + 1/(omega_max*C2)"
                            .into(),
                    });
                }
            }
        }
        v
    }
}

fn schema(path: &str, message: &str) -> Error {
    Error::Schema(vec![Violation {
        path: path.into(),
        message: message.into(),
    }])
}

/// Parses and validates a document.
///
/// Syntax errors carry their line and column; type errors and range
/// violations are reported with the JSON pointer of the offending value.
pub fn parse_config(text: &[u8]) -> Result<ExperimentConfig> {
    let mut de = serde_json::Deserializer::from_slice(text);
    let cfg: ExperimentConfig = match serde_path_to_error::deserialize(&mut de) {
        Ok(c) => c,
        Err(e) => {
            let path = pointer(&e.path().to_string());
            return Err(classify(e.into_inner(), path));
        }
    };
    de.end().map_err(|e| classify(e, String::new()))?;
    let violations = cfg.check();
    if violations.is_empty() {
        Ok(cfg)
    } else {
        Err(Error::Schema(violations))
    }
}

fn classify(inner: serde_json::Error, path: String) -> Error {
    match inner.classify() {
        serde_json::error::Category::Data => Error::Schema(vec![Violation {
            path,
            message: strip_position(&inner.to_string()),
        }]),
        _ => Error::Parse {
            line: inner.line(),
            column: inner.column(),
            message: strip_position(&inner.to_string()),
        },
    }
}

/// `emulator.C2` / `source.waveform.tones[1].amplitude` → JSON pointer.
fn pointer(dotted: &str) -> String {
    if dotted == "." || dotted.is_empty() {
        return String::new();
    }
    let mut out = String::new();
    for part in dotted.split('.') {
        let mut rest = part;
        while let Some(open) = rest.find('[') {
            let (head, tail) = rest.split_at(open);
            if !head.is_empty() {
                out.push('/');
                out.push_str(head);
            }
            let close = tail.find(']').unwrap_or(tail.len());
            out.push('/');
            out.push_str(&tail[1..close]);
            rest = &tail[(close + 1).min(tail.len())..];
        }
        if !rest.is_empty() {
            out.push('/');
            out.push_str(rest);
        }
    }
    out
}

fn strip_position(msg: &str) -> String {
    match msg.rfind(" at line ") {
        Some(i) => msg[..i].to_string(),
        None => msg.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "source": {"waveform": {"kind": "sine", "amplitude": 0.14, "frequency": 1e6}},
        "run": {}
    }"#;

    #[test]
    fn minimal_document_gets_defaults() {
        let c = parse_config(MINIMAL.as_bytes()).unwrap();
        assert_eq!(c.kind(), ExperimentKind::Run);
        assert_eq!(c.emulator, EmulatorDoc::default());
        assert!(c.source.dc_flux_removal);
        let (t_end, dt) = c.clock().unwrap();
        assert!((t_end - 20e-6).abs() < 1e-18);
        assert!((dt - 5e-10).abs() < 1e-24);
        assert_eq!(c.emulator.build().unwrap(), EmulatorConfig::grounded());
    }

    #[test]
    fn negative_capacitor_reports_path() {
        let doc = r#"{"emulator": {"C2": -1}, "source": {"waveform": {"kind": "sine", "amplitude": 0.1, "frequency": 1e6}}, "run": {}}"#;
        match parse_config(doc.as_bytes()) {
            Err(Error::Schema(v)) => {
                assert!(
                    v.iter()
                        .any(|x| x.to_string() == "/emulator/C2: must be > 0"),
                    "{v:?}"
                );
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_key_rejected_with_path() {
        let doc = r#"{"emulator": {"C3": 1}, "source": {"waveform": {"kind": "sine", "amplitude": 0.1, "frequency": 1e6}}, "run": {}}"#;
        match parse_config(doc.as_bytes()) {
            Err(Error::Schema(v)) => assert_eq!(v[0].path, "/emulator/C3"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn wrong_type_reports_path() {
        let doc = r#"{"source": {"waveform": {"kind": "sine", "amplitude": 0.1, "frequency": 1e6}}, "sim": {"periods": "x"}, "run": {}}"#;
        match parse_config(doc.as_bytes()) {
            Err(Error::Schema(v)) => assert_eq!(v[0].path, "/sim/periods"),
            other => panic!("{other:?}"),
        }
        // tagged waveforms are buffered, so the path stops at the tag
        let doc = r#"{"source": {"waveform": {"kind": "multi_tone", "tones": [{"amplitude": 0.1, "frequency": "x"}]}}, "run": {}}"#;
        match parse_config(doc.as_bytes()) {
            Err(Error::Schema(v)) => assert!(v[0].path.starts_with("/source/waveform"), "{v:?}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn syntax_error_has_position() {
        match parse_config(b"{\n  \"run\": {,\n}") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn exactly_one_block() {
        let two = r#"{"source": {"waveform": {"kind": "sine", "amplitude": 0.1, "frequency": 1e6}}, "run": {}, "mc": {}}"#;
        let none =
            r#"{"source": {"waveform": {"kind": "sine", "amplitude": 0.1, "frequency": 1e6}}}"#;
        assert!(matches!(
            parse_config(two.as_bytes()),
            Err(Error::Schema(_))
        ));
        assert!(matches!(
            parse_config(none.as_bytes()),
            Err(Error::Schema(_))
        ));
    }

    #[test]
    fn operating_point_document_round_trips() {
        let doc = r#"{
            "emulator": {"topology": "grounded", "mode": "incremental", "fidelity": "full_ideal",
                         "R1": 10, "C1": 7.5e-11, "C2": 1.5e-10, "Vb4": 0.45, "Ib": 2e-5},
            "source": {"waveform": {"kind": "sine", "amplitude": 0.14, "frequency": 1e6}},
            "run": {}
        }"#;
        let a = parse_config(doc.as_bytes()).unwrap();
        let b = parse_config(a.to_json().as_bytes()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.hash(), b.hash());
        let mut c = a.clone();
        c.emulator.c2 = 1.6e-10;
        assert_ne!(a.hash(), c.hash());
    }

    #[test]
    fn am_needs_two_tones() {
        let doc = r#"{"source": {"waveform": {"kind": "sine", "amplitude": 0.1, "frequency": 1e6}}, "am": {}}"#;
        assert!(matches!(
            parse_config(doc.as_bytes()),
            Err(Error::Schema(_))
        ));
    }

    #[test]
    fn unstable_floating_stage_rejected() {
        let doc = r#"{"emulator": {"topology": "floating", "R1": 1e4},
            "source": {"waveform": {"kind": "sine", "amplitude": 0.1, "frequency": 1e7}}, "run": {}}"#;
        match parse_config(doc.as_bytes()) {
            Err(Error::Schema(v)) => assert_eq!(v[0].path, "/emulator/R1"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn pointer_conversion() {
        assert_eq!(pointer("emulator.C2"), "/emulator/C2");
        assert_eq!(
            pointer("source.waveform.tones[1].amplitude"),
            "/source/waveform/tones/1/amplitude"
        );
        assert_eq!(pointer("."), "");
    }
}
