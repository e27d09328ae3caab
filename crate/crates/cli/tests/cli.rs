use serde_json::Value;
use std::path::Path;
use std::process::{Command, Output};

const QUICK: &str = r#"
seed = 11

[estimate]
trials = 40
snapshots = 1

[sampling]
trials = 60

[closed_loop]
duration = 0.05
"#;

fn st0sim(dir: &Path, args: &[&str]) -> Output {
    let cfg = dir.join("quick.toml");
    if !cfg.exists() {
        std::fs::write(&cfg, QUICK).unwrap();
    }
    Command::new(env!("CARGO_BIN_EXE_st0sim"))
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.join("out"))
        .args(args)
        .output()
        .unwrap()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn same_seed_gives_identical_files() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let o = st0sim(d.path(), &["estimate", "--threads", "2"]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for name in ["estimate_errors.csv", "estimate_posteriors.csv", "estimate_summary.json"] {
        let x = std::fs::read(a.path().join("out").join(name)).unwrap();
        let y = std::fs::read(b.path().join("out").join(name)).unwrap();
        assert_eq!(x, y, "{name} differs");
    }
}

#[test]
fn thread_count_does_not_change_results() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert!(st0sim(a.path(), &["estimate", "--threads", "1"]).status.success());
    assert!(st0sim(b.path(), &["estimate", "--threads", "3"]).status.success());
    let x = std::fs::read(a.path().join("out/estimate_errors.csv")).unwrap();
    let y = std::fs::read(b.path().join("out/estimate_errors.csv")).unwrap();
    assert_eq!(x, y);
}

#[test]
fn refit_of_a_written_trace_reproduces_the_run() {
    let d = tempfile::tempdir().unwrap();
    let o = st0sim(d.path(), &["coupling"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = d.path().join("out");
    let trace = out.join("coupling_singlet.csv");
    let text = std::fs::read_to_string(&trace).unwrap();
    assert!(text.starts_with("# "));
    assert!(text.contains("# seed: 11"));
    assert!(text.contains("t_exch_ns,p_triplet"));

    let o = st0sim(d.path(), &["fit", "--input", trace.to_str().unwrap(), "--x-unit", "ns"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let refit = json(&out.join("fit_coupling_singlet.json"));
    let run = json(&out.join("coupling_summary.json"));
    let (a, b) = (&refit["fit"]["params"], &run["results"]["fit_singlet"]["params"]);
    for name in ["A", "f", "phi", "T", "a", "B"] {
        let (x, y) = (a[name].as_f64().unwrap(), b[name].as_f64().unwrap());
        assert!((x - y).abs() <= 1e-9 * y.abs().max(1.0), "{name}: {x} vs {y}");
    }
    assert_eq!(refit["input_config_hash"], run["config_hash"]);
}

#[test]
fn report_lists_the_formula_checks() {
    let d = tempfile::tempdir().unwrap();
    let o = st0sim(d.path(), &["report"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r = json(&d.path().join("out/report.json"));
    let metrics = r["results"]["metrics"].as_array().unwrap();
    let get = |name: &str| metrics.iter().find(|m| m["name"] == name).unwrap_or_else(|| panic!("no {name}"));
    let q16 = get("cphase_fidelity_q16");
    assert!((q16["value"].as_f64().unwrap() - 0.9394).abs() < 5e-5);
    assert_eq!(q16["pass"], true);
    assert_eq!(get("estimation_time_single_ms")["pass"], true);
    assert_eq!(get("rabi_q_right")["pass"], true);
    assert_eq!(r["config_hash"].as_str().unwrap().len(), 64);
}

#[test]
fn malformed_config_exits_with_a_line_diagnostic() {
    let d = tempfile::tempdir().unwrap();
    let cfg = d.path().join("bad.toml");
    std::fs::write(&cfg, "seed = 3\n\n[readout]\nnot_a_field = 1\n").unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_st0sim")).arg("--config").arg(&cfg).arg("estimate").output().unwrap();
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("bad.toml:4"), "{err}");
}

#[test]
fn invalid_values_name_their_section() {
    let d = tempfile::tempdir().unwrap();
    let cfg = d.path().join("neg.toml");
    std::fs::write(&cfg, "[estimate]\ntrials = 0\n").unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_st0sim")).arg("--config").arg(&cfg).arg("estimate").output().unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("[estimate]"));
}

#[test]
fn missing_input_is_an_error() {
    let d = tempfile::tempdir().unwrap();
    let o = st0sim(d.path(), &["fit", "--input", "does/not/exist.csv"]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("does not exist"));
}

#[test]
fn unit_mismatch_is_refused() {
    let d = tempfile::tempdir().unwrap();
    let f = d.path().join("trace.csv");
    std::fs::write(&f, "t_us,p_triplet\n0,0.5\n0.01,0.6\n0.02,0.4\n").unwrap();
    let o = st0sim(d.path(), &["fit", "--input", f.to_str().unwrap(), "--x-unit", "ns"]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("unit mismatch"));

    std::fs::write(&f, "time,p_triplet\n0,0.5\n").unwrap();
    let o = st0sim(d.path(), &["fit", "--input", f.to_str().unwrap()]);
    assert!(!o.status.success());
}

#[test]
fn zero_threads_is_rejected() {
    let d = tempfile::tempdir().unwrap();
    assert_eq!(st0sim(d.path(), &["estimate", "--threads", "0"]).status.code(), Some(1));
}

#[test]
fn json_format_writes_json_tables() {
    let d = tempfile::tempdir().unwrap();
    let o = st0sim(d.path(), &["--format", "json", "bell"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let t = json(&d.path().join("out/bell_sweep.json"));
    assert_eq!(t["columns"][0], "j_left_mhz");
}
