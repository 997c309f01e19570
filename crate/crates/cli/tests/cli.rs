use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn freqbias(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_freqbias"))
        .arg("--out-dir")
        .arg(out)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(out: &Path, args: &[&str]) {
    let o = freqbias(out, args);
    assert!(
        o.status.success(),
        "freqbias {args:?} failed: {}",
        String::from_utf8_lossy(&o.stderr)
    );
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn csv_rows(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut rdr = csv::Reader::from_path(path).unwrap();
    let header = rdr.headers().unwrap().iter().map(String::from).collect();
    let rows = rdr
        .records()
        .map(|r| r.unwrap().iter().map(String::from).collect())
        .collect();
    (header, rows)
}

fn write_model(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn landscape_two_by_two_has_four_rows_and_a_manifest() {
    let dir = TempDir::new().unwrap();
    ok(
        dir.path(),
        &["landscape", "--resolution", "2:2", "--y-range", "-60:-40", "--xi-range", "0:5"],
    );
    let (header, rows) = csv_rows(&dir.path().join("landscape.csv"));
    assert_eq!(header, ["y", "xi", "loss"]);
    assert_eq!(rows.len(), 4);
    assert_eq!(rows[0][0].parse::<f64>().unwrap(), -60.0);
    assert!(rows[0][0].contains('e'), "doubles use scientific notation: {}", rows[0][0]);

    let m = json(&dir.path().join("landscape.manifest.json"));
    assert_eq!(m["subcommand"], "landscape");
    assert_eq!(m["config"]["resolution"], serde_json::json!([2, 2]));
    assert_eq!(m["seed"], 0);
    assert_eq!(m["artifacts"].as_array().unwrap().len(), 1);
    assert!(m["duration_s"].as_f64().unwrap() >= 0.0);
    assert!(m["version"].is_string());
}

#[test]
fn analyze_pure_skip_model_reports_zero() {
    let dir = TempDir::new().unwrap();
    let model = write_model(dir.path(), "skip.json", r#"{"x":[],"y":[],"xi":[],"zeta":[],"d":2.0}"#);
    ok(dir.path(), &["analyze", &model, "--b", "1", "--grid", "2000"]);
    let r = json(&dir.path().join("analyze.json"));
    for side in ["left", "right"] {
        assert_eq!(r[side]["numeric_tv"], 0.0);
        assert_eq!(r[side]["bound"], 0.0);
        assert_eq!(r[side]["satisfied"], true);
    }
    assert_eq!(r["hippo_bound"], 0.0);
}

#[test]
fn analyze_single_pole_bound_is_one_half() {
    let dir = TempDir::new().unwrap();
    let model = write_model(dir.path(), "pole.json", r#"{"x":[-1.0],"y":[0.0],"xi":[1.0],"zeta":[0.0],"d":0.0}"#);
    ok(dir.path(), &["analyze", &model, "--b", "2", "--grid", "20000"]);
    let r = json(&dir.path().join("analyze.json"));
    assert_eq!(r["right"]["bound"], 0.5);
    assert_eq!(r["left"]["bound"], 0.5);
    assert_eq!(r["right"]["satisfied"], true);
    assert_eq!(r["left"]["satisfied"], true);
}

#[test]
fn analyze_rejects_cutoff_inside_the_poles() {
    let dir = TempDir::new().unwrap();
    let model = write_model(dir.path(), "pole.json", r#"{"x":[-1.0],"y":[5.0],"xi":[1.0],"zeta":[0.0],"d":0.0}"#);
    let o = freqbias(dir.path(), &["analyze", &model, "--b", "3"]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("must exceed max |y_j|"), "{err}");
    assert!(!dir.path().join("analyze.manifest.json").exists());
}

#[test]
fn bad_inputs_exit_with_two() {
    let dir = TempDir::new().unwrap();
    let bad = write_model(dir.path(), "bad.json", r#"{"model": {"channels": "many"}}"#);
    let o = freqbias(dir.path(), &["waves", "--config", &bad]);
    assert_eq!(o.status.code(), Some(2));

    let o = freqbias(dir.path(), &["flow", "--y0-grid", "5:1:3"]);
    assert_eq!(o.status.code(), Some(2));

    let unstable = write_model(dir.path(), "unstable.json", r#"{"x":[1.0],"y":[0.0],"xi":[1.0],"zeta":[0.0],"d":0.0}"#);
    let o = freqbias(dir.path(), &["analyze", &unstable, "--b", "3"]);
    assert_eq!(o.status.code(), Some(2));

    let o = freqbias(dir.path(), &["analyze", "missing.json", "--b", "3"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn divergence_exits_with_three() {
    let dir = TempDir::new().unwrap();
    let cfg = write_model(
        dir.path(),
        "waves.json",
        r#"{"train": {"epochs": 2, "batch_size": 8, "optimizer": "sgd", "rates": {"fast": 1e300, "slow": 1e300}}}"#,
    );
    let o = freqbias(dir.path(), &["waves", "--config", &cfg, "--seq-len", "64", "--samples", "16", "--freqs", "1,4,16"]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn flow_writes_one_row_per_trajectory() {
    let dir = TempDir::new().unwrap();
    ok(dir.path(), &["flow", "--variant", "main", "--beta", "0", "--y0-grid", "-60:0:2", "--xi0", "3", "--paths"]);
    let (header, rows) = csv_rows(&dir.path().join("flow.csv"));
    assert_eq!(header, ["y0", "xi0", "tau", "y", "xi", "loss", "terminal_class"]);
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0][6], "LeftMode");
    assert_eq!(rows[1][6], "Stuck");

    let (header, rows) = csv_rows(&dir.path().join("flow_paths.csv"));
    assert_eq!(header, ["y0", "tau", "y", "xi", "loss"]);
    assert!(rows.len() > 2);
    let s = json(&dir.path().join("flow.json"));
    assert_eq!(s["left_mode"], 1);
    assert_eq!(s["stuck"], 1);
}

#[test]
fn apply_skip_model_scales_the_input() {
    let dir = TempDir::new().unwrap();
    let model = write_model(dir.path(), "skip.json", r#"{"x":[],"y":[],"xi":[],"zeta":[],"d":2.0}"#);
    let input = dir.path().join("u.csv");
    fs::write(&input, "u\n1.0\n-0.5\n0.25\n3.0\n").unwrap();
    ok(dir.path(), &["apply", &model, input.to_str().unwrap(), "--dt", "0.1"]);
    let (header, rows) = csv_rows(&dir.path().join("apply.csv"));
    assert_eq!(header, ["t", "u", "y"]);
    let y: Vec<f64> = rows.iter().map(|r| r[2].parse().unwrap()).collect();
    for (got, want) in y.iter().zip([2.0, -1.0, 0.5, 6.0]) {
        assert!((got - want).abs() < 1e-14, "{got} vs {want}");
    }
    let (_, mult) = csv_rows(&dir.path().join("multiplier.csv"));
    assert_eq!(mult.len(), 4);
}

#[test]
fn scaling_reports_the_requested_pole() {
    let dir = TempDir::new().unwrap();
    ok(dir.path(), &["scaling", "--n", "4", "--alpha", "1", "--dt", "0.01", "--len", "1000", "--pole", "2"]);
    let r = json(&dir.path().join("scaling.json"));
    assert_eq!(r["pole_index"], 2);
    assert_eq!(r["seq_len"], 1000);
    assert_eq!(r["poles"].as_array().unwrap().len(), 4);
}

#[test]
fn replay_reproduces_artifacts_bit_identically() {
    let first = TempDir::new().unwrap();
    ok(
        first.path(),
        &["--seed", "3", "waves", "--seq-len", "128", "--samples", "64", "--epochs", "3", "--freqs", "1,4,32"],
    );
    let second = TempDir::new().unwrap();
    let manifest = first.path().join("waves.manifest.json");
    ok(second.path(), &["replay", manifest.to_str().unwrap()]);
    for name in ["waves.csv", "waves.json", "waves_checkpoint.json"] {
        let a = fs::read(first.path().join(name)).unwrap();
        let b = fs::read(second.path().join(name)).unwrap();
        assert_eq!(a, b, "{name} differs after replay");
    }
    let m = json(&second.path().join("waves.manifest.json"));
    assert_eq!(m["seed"], 3);
    assert_eq!(m["config"]["model"]["seed"], 3);

    let (header, rows) = csv_rows(&first.path().join("waves.csv"));
    assert_eq!(header, ["epoch", "err_f1", "err_f4", "err_f32", "loss"]);
    assert_eq!(rows.len(), 4);
}

#[test]
fn serial_and_parallel_runs_match() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    let args = ["waves", "--seq-len", "128", "--samples", "64", "--epochs", "2", "--freqs", "1,4,32"];
    ok(a.path(), &[&["--threads", "1"][..], &args].concat());
    ok(b.path(), &[&["--threads", "3"][..], &args].concat());
    assert_eq!(fs::read(a.path().join("waves.csv")).unwrap(), fs::read(b.path().join("waves.csv")).unwrap());
}

#[test]
fn waves_default_config_orders_errors() {
    let dir = TempDir::new().unwrap();
    ok(dir.path(), &["waves"]);
    let s = json(&dir.path().join("waves.json"));
    assert_eq!(s["low_below_high"], true, "{s}");
    let (header, rows) = csv_rows(&dir.path().join("waves.csv"));
    assert_eq!(header, ["epoch", "err_f1", "err_f16", "err_f256", "loss"]);
    assert_eq!(rows.len(), 31);
}

#[test]
fn passrate_small_grid_writes_every_cell() {
    let dir = TempDir::new().unwrap();
    ok(
        dir.path(),
        &["passrate", "--alphas", "1", "--betas", "-1,1", "--steps", "20", "--images", "4", "--channels", "2", "--states", "4"],
    );
    let (header, rows) = csv_rows(&dir.path().join("passrate.csv"));
    assert_eq!(header, ["alpha", "beta", "low", "high", "ratio", "train_loss"]);
    assert_eq!(rows.len(), 2);
    let s = json(&dir.path().join("passrate.json"));
    assert_eq!(s["ratios"].as_array().unwrap().len(), 1);
}
