use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn gode(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gode"))
        .args(args)
        .output()
        .expect("spawn gode")
}

fn config(name: &str) -> String {
    let p: PathBuf = [env!("CARGO_MANIFEST_DIR"), "..", "..", "configs", name]
        .iter()
        .collect();
    p.to_string_lossy().into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn solve_prints_json_summary() {
    let o = gode(&["solve", &config("exp.json")]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["converged"], true);
    let x1 = v["final_state"][0].as_f64().unwrap();
    assert!((x1 - std::f64::consts::E).abs() < 2e-3, "{x1}");
    assert!(stderr(&o).contains("converged=true"));
}

#[test]
fn csv_format_has_header_and_rows() {
    let o = gode(&["solve", &config("exp.json"), "--format", "csv"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    let mut lines = out.lines();
    assert_eq!(lines.next(), Some("t,x"));
    assert_eq!(lines.next(), Some("0,1"));
    assert_eq!(out.lines().count(), 1002);
}

#[test]
fn not_converged_exits_with_two() {
    let o = gode(&["solve", &config("exp.json"), "--levels", "1", "--tol", "1e-12"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("not converged"));
}

#[test]
fn unknown_field_reports_line_and_column() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "bad.json", "{\"version\": 1,\n  \"problme\": 3}");
    let o = gode(&["solve", &p]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.contains("problme") && err.contains("line 2 column"), "{err}");
}

#[test]
fn malformed_json_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "broken.json", "{\"version\": 1,");
    let o = gode(&["solve", &p]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("line 1"));
}

#[test]
fn unknown_preset_and_version_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "preset.json", r#"{"version": 1, "problem": {"preset": "nope"}}"#);
    let o = gode(&["solve", &p]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("nope"));
    let p = write(dir.path(), "v2.json", r#"{"version": 2}"#);
    assert_eq!(gode(&["solve", &p]).status.code(), Some(1));
}

#[test]
fn missing_file_exits_with_one() {
    let o = gode(&["solve", "/nonexistent/config.json"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn bad_arguments_are_rejected() {
    let o = gode(&["solve"]);
    assert_ne!(o.status.code(), Some(0));
    let o = gode(&["frobnicate", &config("exp.json")]);
    assert_ne!(o.status.code(), Some(0));
}

#[test]
fn input_errors_take_precedence_in_batches() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.json", "{}");
    let o = gode(&["solve", &config("exp.json"), &bad, "--levels", "1", "--tol", "1e-12"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn out_dir_receives_json_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("artifacts");
    let o = gode(&[
        "integrate",
        &config("step_stieltjes.json"),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let json = std::fs::read_to_string(out.join("step_stieltjes.integrate.json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert!(v.is_object());
    let csv = std::fs::read_to_string(out.join("step_stieltjes.integrate.csv")).unwrap();
    assert!(csv.starts_with("k,cells,mesh,sum"), "{csv}");
}

#[test]
fn check_reports_osgood_verdicts() {
    let o = gode(&["check", &config("osgood_sqrt.json")]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("not osgood"), "{out}");
}

#[test]
fn parallel_batch_preserves_order() {
    let cfgs = [config("exp.json"), config("impulse.json"), config("circle.json")];
    let mut args = vec!["solve"];
    args.extend(cfgs.iter().map(String::as_str));
    let seq = gode(&args);
    args.extend(["--jobs", "3"]);
    let par = gode(&args);
    assert_eq!(seq.status.code(), Some(0));
    assert_eq!(stdout(&seq), stdout(&par));
    assert_eq!(stdout(&seq).matches("# ").count(), 3);
}
