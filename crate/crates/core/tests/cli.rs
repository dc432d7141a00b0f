use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use memsim::experiment::read_trace_csv;
use memsim::fingerprint::loop_metrics;
use memsim::steady_window;
use serde_json::Value;

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn memsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_memsim"))
        .args(args)
        .env_remove("MEMSIM_THREADS")
        .output()
        .expect("spawn memsim")
}

fn run_ok(sub: &str, config: &Path, out: &Path, extra: &[&str]) {
    let mut args = vec![
        sub,
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ];
    args.extend_from_slice(extra);
    let o = memsim(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}

fn summary(dir: &Path) -> Value {
    serde_json::from_slice(&fs::read(dir.join("summary.json")).unwrap()).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

#[test]
fn every_subcommand_writes_its_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let cases: [(&str, &str, &[&str]); 6] = [
        ("run", "run.json", &["trace.csv"]),
        ("sweep", "sweep.json", &["sweep.csv"]),
        (
            "mc",
            "mc.json",
            &["mc_records.csv", "hist_vth.csv", "hist_k.csv"],
        ),
        ("am", "am.json", &["spectrum.csv", "demod.csv", "am.csv"]),
        (
            "compose",
            "compose_parallel.json",
            &["composite.csv", "branch_1.csv", "branch_2.csv"],
        ),
        ("compose", "compose_series.json", &["composite.csv"]),
    ];
    for (sub, file, outputs) in cases {
        let out = tmp.path().join(file);
        run_ok(sub, &configs().join(file), &out, &[]);
        for f in outputs.iter().chain(&["summary.json"]) {
            assert!(out.join(f).is_file(), "{sub}: missing {f}");
        }
        let s = summary(&out);
        assert_eq!(s["experiment"], sub);
        assert_eq!(s["config_hash"].as_str().unwrap().len(), 64);
    }
}

#[test]
fn mc_records_have_one_row_per_run() {
    let tmp = tempfile::tempdir().unwrap();
    run_ok("mc", &configs().join("mc.json"), tmp.path(), &[]);
    let text = fs::read_to_string(tmp.path().join("mc_records.csv")).unwrap();
    assert_eq!(text.lines().count(), 201);
    let s = summary(tmp.path());
    assert_eq!(s["metrics"]["pinched_fraction"], 1.0);
}

#[test]
fn spectrum_csv_layout() {
    let tmp = tempfile::tempdir().unwrap();
    run_ok("am", &configs().join("am.json"), tmp.path(), &[]);
    let text = fs::read_to_string(tmp.path().join("spectrum.csv")).unwrap();
    assert_eq!(text.lines().next(), Some("f,magnitude_db"));
    assert!(!text.contains('\r'));
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let out = d.join("out");
    let out = out.to_str().unwrap();
    let code = |args: &[&str]| memsim(args).status.code();

    let syntax = write(d, "syntax.json", "{\n  \"run\": {,\n}");
    assert_eq!(
        code(&["run", "--config", syntax.to_str().unwrap(), "--out", out]),
        Some(1)
    );

    let neg = write(
        d,
        "neg.json",
        r#"{"emulator": {"C2": -1}, "source": {"waveform": {"kind": "sine", "amplitude": 0.1, "frequency": 1e6}}, "run": {}}"#,
    );
    let o = memsim(&["run", "--config", neg.to_str().unwrap(), "--out", out]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("/emulator/C2: must be > 0"));

    let run = configs().join("run.json");
    assert_eq!(
        code(&["mc", "--config", run.to_str().unwrap(), "--out", out]),
        Some(1)
    );

    let singular = write(
        d,
        "singular.json",
        r#"{"emulator": {"fidelity": "simplified"}, "sim": {"dt": 1e-9},
            "source": {"waveform": {"kind": "sine", "amplitude": 0.02, "frequency": 1e6}},
            "compose": {"wiring": "series_same_polarity"}}"#,
    );
    assert_eq!(
        code(&[
            "compose",
            "--config",
            singular.to_str().unwrap(),
            "--out",
            out
        ]),
        Some(2)
    );

    let missing = d.join("missing.json");
    assert_eq!(
        code(&["run", "--config", missing.to_str().unwrap(), "--out", out]),
        Some(3)
    );

    let blocker = write(d, "file", "");
    let under_file = blocker.join("sub");
    assert_eq!(
        code(&[
            "run",
            "--config",
            run.to_str().unwrap(),
            "--out",
            under_file.to_str().unwrap()
        ]),
        Some(3)
    );
}

#[test]
fn reruns_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    run_ok("run", &configs().join("run.json"), &a, &[]);
    run_ok("run", &configs().join("run.json"), &b, &[]);
    for f in ["trace.csv", "summary.json"] {
        assert_eq!(
            fs::read(a.join(f)).unwrap(),
            fs::read(b.join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn mc_output_independent_of_thread_count() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b, c) = (
        tmp.path().join("a"),
        tmp.path().join("b"),
        tmp.path().join("c"),
    );
    run_ok("mc", &configs().join("mc.json"), &a, &["--threads", "1"]);
    run_ok("mc", &configs().join("mc.json"), &b, &["--threads", "4"]);
    let o = Command::new(env!("CARGO_BIN_EXE_memsim"))
        .args([
            "mc",
            "--config",
            configs().join("mc.json").to_str().unwrap(),
            "--out",
            c.to_str().unwrap(),
        ])
        .env("MEMSIM_THREADS", "3")
        .output()
        .unwrap();
    assert!(o.status.success());
    for f in [
        "mc_records.csv",
        "hist_vth.csv",
        "hist_k.csv",
        "summary.json",
    ] {
        let x = fs::read(a.join(f)).unwrap();
        assert_eq!(x, fs::read(b.join(f)).unwrap(), "{f}");
        assert_eq!(x, fs::read(c.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn seed_override_changes_samples() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    run_ok("mc", &configs().join("mc.json"), &a, &[]);
    run_ok("mc", &configs().join("mc.json"), &b, &["--seed", "7"]);
    assert_ne!(
        fs::read(a.join("mc_records.csv")).unwrap(),
        fs::read(b.join("mc_records.csv")).unwrap()
    );
    assert_eq!(summary(&b)["metrics"]["seed"], 7);
    assert_eq!(summary(&a)["metrics"]["seed"], 42);
}

#[test]
fn edited_config_changes_hash() {
    let tmp = tempfile::tempdir().unwrap();
    let edited = fs::read_to_string(configs().join("run.json"))
        .unwrap()
        .replace("\"C2\": 1.5e-10", "\"C2\": 1.6e-10");
    let edited = write(tmp.path(), "edited.json", &edited);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    run_ok("run", &configs().join("run.json"), &a, &[]);
    run_ok("run", &edited, &b, &[]);
    assert_ne!(summary(&a)["config_hash"], summary(&b)["config_hash"]);
}

#[test]
fn whitespace_does_not_change_hash() {
    let tmp = tempfile::tempdir().unwrap();
    let compact: Value =
        serde_json::from_slice(&fs::read(configs().join("run.json")).unwrap()).unwrap();
    let compact = write(tmp.path(), "compact.json", &compact.to_string());
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    run_ok("run", &configs().join("run.json"), &a, &[]);
    run_ok("run", &compact, &b, &[]);
    assert_eq!(summary(&a)["config_hash"], summary(&b)["config_hash"]);
}

#[test]
fn trace_csv_reproduces_summary_metrics() {
    let tmp = tempfile::tempdir().unwrap();
    run_ok("run", &configs().join("run.json"), tmp.path(), &[]);
    let s = summary(tmp.path());
    let m = &s["metrics"];
    let mut tr = read_trace_csv(&tmp.path().join("trace.csv")).unwrap();
    tr.dt = m["dt"].as_f64().unwrap();
    assert_eq!(tr.len() as u64, m["samples"].as_u64().unwrap());
    let w = steady_window(&tr, 1e6, 1).unwrap();
    let lm = loop_metrics(&w).unwrap();
    let l = &m["loop"];
    assert_eq!(w.t[0], l["window_start_s"].as_f64().unwrap());
    assert_eq!(lm.pinch_residual, l["pinch_residual"].as_f64().unwrap());
    assert_eq!(lm.lobe_area_pos, l["lobe_area_pos"].as_f64().unwrap());
    assert_eq!(lm.lobe_area_neg, l["lobe_area_neg"].as_f64().unwrap());
    assert_eq!(lm.area_normalized, l["area_normalized"].as_f64().unwrap());
}

#[test]
fn threads_env_rejects_garbage() {
    let o = Command::new(env!("CARGO_BIN_EXE_memsim"))
        .args(["run", "--config", "x.json", "--out", "x"])
        .env("MEMSIM_THREADS", "many")
        .output()
        .unwrap();
    assert!(!o.status.success());
}
