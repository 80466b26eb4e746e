use std::path::Path;
use std::process::{Command, Output};

use geope::analysis::records::read_table;
use geope::analysis::Value;

fn geope(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_geope")).args(args).output().unwrap()
}

fn geope_with_out(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_geope")).args(args).arg("--out").arg(out).output().unwrap()
}

fn float(v: &Value) -> f64 {
    match v {
        Value::Float(x) => *x,
        Value::Int(i) => *i as f64,
        Value::Text(t) => panic!("expected a number, got {t}"),
    }
}

#[test]
fn config_errors_exit_2() {
    assert_eq!(geope(&["verify", "--dim", "64"]).status.code(), Some(2));
    assert_eq!(geope(&["table", "--mode", "rope1d"]).status.code(), Some(2));
    assert_eq!(geope(&["table", "--grid", "0x4"]).status.code(), Some(2));
    assert_eq!(geope(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(geope(&["attn", "--grid", "2x2"]).status.code(), Some(2));
}

#[test]
fn io_errors_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("plain");
    std::fs::write(&file, "x").unwrap();
    let out = geope_with_out(&["table", "--dim", "6", "--grid", "2x2"], &file.join("t.csv"));
    assert_eq!(out.status.code(), Some(3));
    let missing = geope(&["table", "--config", dir.path().join("nope.cfg").to_str().unwrap()]);
    assert_eq!(missing.status.code(), Some(3));
}

#[test]
fn config_file_merges_under_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "# table setup\ndim = 6\ngrid=3x2\nindex_convention = one\n").unwrap();
    let out = dir.path().join("t.csv");
    let o = geope_with_out(&["table", "--config", cfg.to_str().unwrap(), "--grid", "2x2"], &out);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(read_table(&out).unwrap().len(), 2 * 2 * 2);

    std::fs::write(&cfg, "dim = 6\ncolour = blue\n").unwrap();
    assert_eq!(geope(&["table", "--config", cfg.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn table_layout_and_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("t.csv");
    assert!(geope_with_out(&["table", "--dim", "48", "--grid", "3x4"], &out).status.success());
    let t = read_table(&out).unwrap();
    assert_eq!(t.columns, ["mode", "p_h", "p_w", "i", "theta_h", "theta_w", "qw", "qx", "qy", "qz"]);
    assert_eq!(t.len(), 3 * 4 * 16);
    let qw = t.column("qw").unwrap();
    assert_eq!(t.rows[0][qw], Value::Float(1.0));
    // unit rotors throughout
    for row in &t.rows {
        let n: f64 = row[qw..].iter().map(|v| float(v).powi(2)).sum();
        assert!((n - 1.0).abs() < 1e-14);
    }
    // written text reproduces exactly
    assert_eq!(t.to_csv_string(), std::fs::read_to_string(&out).unwrap());
}

#[test]
fn three_d_table_has_depth_columns() {
    let o = geope(&["table", "--dim", "6", "--grid", "2x2x2", "--mode", "geope3d"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.starts_with("mode,p_d,p_h,p_w,i,theta_d,theta_h,theta_w,"));
    assert_eq!(text.lines().count(), 1 + 8 * 2);
}

#[test]
fn json_output_has_meta_and_records() {
    let o = geope(&["decay", "--dmax", "3", "--draws", "5", "--format", "json"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["meta"]["command"], "decay");
    assert_eq!(v["records"].as_array().unwrap().len(), 4);
    assert_eq!(v["records"][0]["mean_abs_score"], 16.0);
}

#[test]
fn repeated_runs_are_byte_identical() {
    for args in [
        &["decay", "--dmax", "8", "--draws", "20", "--seed", "3"][..],
        &["table", "--grid", "4x4", "--base", "10000"][..],
        &["verify", "--seed", "11"][..],
    ] {
        let (a, b) = (geope(args), geope(args));
        assert!(a.status.success());
        assert_eq!(a.stdout, b.stdout, "{args:?}");
    }
}

#[test]
fn decay_falls_with_distance() {
    let o = geope(&["decay", "--dmax", "32", "--draws", "50", "--exp-sign", "pos"]);
    let text = String::from_utf8(o.stdout).unwrap();
    let rows: Vec<Vec<&str>> = text.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 33);
    let at = |d: usize| rows[d][1].parse::<f64>().unwrap();
    assert!(at(32) < at(1));
}

fn attn(dir: &Path, extra: &[&str]) -> (String, String) {
    let mut args = vec!["attn", "--dim", "12", "--heads", "2", "--seed", "4"];
    args.extend_from_slice(extra);
    let o = geope_with_out(&args, dir);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    (
        std::fs::read_to_string(dir.join("trace.csv")).unwrap(),
        std::fs::read_to_string(dir.join("metrics.csv")).unwrap(),
    )
}

#[test]
fn attn_writes_trace_metrics_and_meta() {
    let dir = tempfile::tempdir().unwrap();
    let (trace, metrics) = attn(dir.path(), &["--grid", "3x3", "--mode", "geope2d"]);
    assert!(trace.starts_with("head,query_index,key_index,weight\n"));
    assert_eq!(trace.lines().count(), 1 + 2 * 81);
    assert!(metrics.starts_with("head,mean_attention_distance\n"));
    let meta: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("meta.json")).unwrap()).unwrap();
    assert_eq!(meta["command"], "attn");

    let t = read_table(&dir.path().join("trace.csv")).unwrap();
    let w = t.column("weight").unwrap();
    for q in 0..9 {
        let row: f64 = t.rows[q * 9..q * 9 + 9].iter().map(|r| float(&r[w])).sum();
        assert!((row - 1.0).abs() < 1e-12);
    }
}

#[test]
fn single_token_distance_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    let (_, metrics) = attn(dir.path(), &["--grid", "1x1"]);
    let t = read_table(&dir.path().join("metrics.csv")).unwrap();
    assert_eq!(t.len(), 2, "{metrics}");
    assert!(t.rows.iter().all(|r| float(&r[1]) == 0.0));
}

#[test]
fn linear_mode_ignores_translation() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let base = attn(a.path(), &["--grid", "5x5", "--mode", "lingeope2d"]);
    let moved = attn(b.path(), &["--grid", "5x5", "--mode", "lingeope2d", "--offset", "-37,1200"]);
    assert_eq!(base, moved);
}

#[test]
fn encoding_changes_the_trace() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let plain = attn(a.path(), &["--grid", "4x4", "--mode", "none"]);
    let encoded = attn(b.path(), &["--grid", "4x4", "--mode", "geope2d"]);
    assert_ne!(plain.0, encoded.0);
}

#[test]
fn bench_reports_every_mode() {
    let o = geope(&["bench", "--grid", "4x4", "--dim", "12", "--heads", "1", "--reps", "2", "--warmup", "0"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = String::from_utf8(o.stdout).unwrap();
    assert_eq!(text.lines().count(), 1 + 6);
    let lin = text.lines().find(|l| l.starts_with("lingeope2d")).unwrap();
    assert!(lin.contains(",49,"), "{lin}");
}
