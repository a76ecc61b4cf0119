use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ist_lab::output::Manifest;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ist-lab"))
}

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("configs")
        .join(format!("{name}.json"))
}

fn run(args: &[&str]) -> Output {
    bin()
        .args(args)
        .env_remove("IST_LAB_THREADS")
        .output()
        .expect("binary runs")
}

fn run_config(sub: &str, cfg: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![
        sub,
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ];
    args.extend_from_slice(extra);
    run(&args)
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

#[test]
fn scale_table_starts_at_one() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_config("scale", &config("scale"), dir.path(), &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(dir.path().join("scale.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("t,S"));
    assert_eq!(lines.next(), Some("0.0,1.0"));
    assert_eq!(csv.lines().count(), 514);
    assert!(!csv.contains('\r'));
    let meta: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("scale_meta.json")).unwrap())
            .unwrap();
    assert_eq!(meta["M"], 512);
    assert!(meta["residual"].as_f64().unwrap() < 1e-9);
}

#[test]
fn classify_pareto_is_supercritical() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_config("classify", &config("classify"), dir.path(), &[]);
    assert!(o.status.success());
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("classify.json")).unwrap())
            .unwrap();
    assert_eq!(report["verdict"], "SupercriticalSufficient");
    assert!(report["extinction"]["value"].as_f64().unwrap() < 0.95);
}

#[test]
fn rerun_from_manifest_reproduces_every_hash() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("first");
    let o = run_config(
        "population",
        &config("population"),
        &first,
        &["--seed", "17"],
    );
    assert!(o.status.success());
    let again = dir.path().join("again");
    let manifest = first.join("manifest.json");
    let o = run(&[
        "rerun",
        manifest.to_str().unwrap(),
        "--out",
        again.to_str().unwrap(),
        "--threads",
        "2",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let a = Manifest::load(&manifest).unwrap();
    let b = Manifest::load(&again.join("manifest.json")).unwrap();
    assert_eq!(a, b);
    for art in &a.artifacts {
        assert_eq!(
            fs::read(first.join(&art.file)).unwrap(),
            fs::read(again.join(&art.file)).unwrap()
        );
    }
}

#[test]
fn rerun_reports_tampered_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("first");
    assert!(run_config("scale", &config("scale"), &first, &[])
        .status
        .success());
    let path = first.join("manifest.json");
    let mut m = Manifest::load(&path).unwrap();
    m.artifacts[0].sha256 = "0".repeat(64);
    fs::write(&path, serde_json::to_string(&m).unwrap()).unwrap();
    let o = run(&[
        "rerun",
        path.to_str().unwrap(),
        "--out",
        dir.path().join("x").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("scale.csv"));
}

#[test]
fn outputs_do_not_depend_on_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert!(run_config(
        "contour",
        &config("contour"),
        &a,
        &["--threads", "1", "--seed", "5"]
    )
    .status
    .success());
    let o = bin()
        .args([
            "contour",
            "--config",
            config("contour").to_str().unwrap(),
            "--out",
            b.to_str().unwrap(),
            "--seed",
            "5",
        ])
        .env("IST_LAB_THREADS", "4")
        .output()
        .unwrap();
    assert!(o.status.success());
    for f in ["path.csv", "paths.csv", "manifest.json"] {
        assert_eq!(
            fs::read(a.join(f)).unwrap(),
            fs::read(b.join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn json_format_writes_tables_as_arrays() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_config("scale", &config("scale"), dir.path(), &["--format", "json"]);
    assert!(o.status.success());
    let rows: Vec<serde_json::Value> =
        serde_json::from_str(&fs::read_to_string(dir.path().join("scale.json")).unwrap()).unwrap();
    assert_eq!(rows.len(), 513);
    assert_eq!(rows[0]["t"], 0.0);
    assert_eq!(rows[0]["S"], 1.0);
}

#[test]
fn invalid_field_is_a_usage_error_naming_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.json",
        r#"{"model":{"rate":{"kind":"constant","beta":1},"kernel":{"kind":"pareto","k":"three"}},"t_max":1}"#,
    );
    let o = run_config("scale", &cfg, &dir.path().join("o"), &[]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("model.kernel"), "{err}");
}

#[test]
fn unknown_field_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.json",
        r#"{"model":{"rate":{"kind":"constant","beta":1},"kernel":{"kind":"dirac","a":1}},"t_max":1,"meshh":4}"#,
    );
    let o = run_config("scale", &cfg, &dir.path().join("o"), &[]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn invalid_parameter_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.json",
        r#"{"model":{"rate":{"kind":"constant","beta":-1},"kernel":{"kind":"dirac","a":1}},"t_max":1}"#,
    );
    let o = run_config("scale", &cfg, &dir.path().join("o"), &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("invalid_parameter"));
}

#[test]
fn non_convergence_exits_with_numeric_code() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.json",
        r#"{"model":{"rate":{"kind":"constant","beta":1},"kernel":{"kind":"exponential","death":{"kind":"constant","beta":2}}},"t_max":1,"max_sweeps":2}"#,
    );
    let o = run_config("scale", &cfg, &dir.path().join("o"), &[]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("convergence"));
}

#[test]
fn regime_refusal_exits_with_code_four() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.json",
        r#"{"model":{"rate":{"kind":"constant","beta":1},"kernel":{"kind":"pareto","k":3}},"x0":1,"t_max":50,"replicas":10,"thresholds":[1,2]}"#,
    );
    let o = run_config("tails", &cfg, &dir.path().join("o"), &[]);
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn missing_config_and_bad_flags_are_usage_errors() {
    assert_eq!(run(&["scale"]).status.code(), Some(2));
    assert_eq!(run(&["scale", "--threads", "many"]).status.code(), Some(2));
    assert_eq!(run(&["nonsense"]).status.code(), Some(2));
    assert_eq!(
        run(&["scale", "--config", "/nonexistent/c.json"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn schema_is_published_for_every_subcommand() {
    for sub in ist_lab::commands::SUBCOMMANDS {
        let o = run(&["schema", sub]);
        assert!(o.status.success(), "{sub}");
        let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
        assert!(
            v.get("properties").is_some() || v.get("$defs").is_some(),
            "{sub}"
        );
    }
}

#[test]
fn shipped_configs_run() {
    for sub in ["tree", "contour", "extinction", "tails", "condition"] {
        let dir = tempfile::tempdir().unwrap();
        let o = run_config(sub, &config(sub), dir.path(), &[]);
        assert!(
            o.status.success(),
            "{sub}: {}",
            String::from_utf8_lossy(&o.stderr)
        );
        let m = Manifest::load(&dir.path().join("manifest.json")).unwrap();
        assert_eq!(m.subcommand, sub);
        assert!(!m.artifacts.is_empty());
    }
}

#[test]
fn verify_runs_selected_criteria() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "v.json", r#"{"criteria":[1,3]}"#);
    let o = run_config("verify", &cfg, &dir.path().join("o"), &[]);
    assert!(o.status.success());
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(
        text.contains("PASS [1]") && text.contains("PASS [3]"),
        "{text}"
    );
    let cfg = write(dir.path(), "w.json", r#"{"criteria":[11]}"#);
    assert_eq!(
        run_config("verify", &cfg, &dir.path().join("p"), &[])
            .status
            .code(),
        Some(2)
    );
}
