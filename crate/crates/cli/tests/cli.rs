use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use totient_core::regress::{fit_provable, load_model, save_model};
use totient_core::{FitMode, Rational};

fn totient(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_totient"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn generate(dir: &Path, name: &str, bits: u64, count: u64, seed: u64) -> std::path::PathBuf {
    let path = dir.join(name);
    let out = totient(&[
        "generate",
        "--bits",
        &bits.to_string(),
        "--count",
        &count.to_string(),
        "--seed",
        &seed.to_string(),
        "--out",
        p(&path),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    path
}

#[test]
fn generate_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let a = generate(dir.path(), "a.csv", 64, 1000, 1);
    let b = generate(dir.path(), "b.csv", 64, 1000, 1);
    let text = fs::read_to_string(&a).unwrap();
    assert_eq!(text, fs::read_to_string(b).unwrap());
    assert_eq!(text.lines().count(), 1002);
    assert!(text.starts_with("# totient-dataset v1 bits=64 count=1000 seed=1\np,q,n,epsilon\n"));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = totient(&["generate", "--bits", "63", "--out", p(&dir.path().join("x.csv"))]);
    assert_eq!(code(&out), 1);
    assert_eq!(code(&totient(&["generate", "--bogus"])), 1);
    assert_eq!(code(&totient(&["frobnicate"])), 1);
    assert_eq!(code(&totient(&["--help"])), 0);
    let missing = dir.path().join("missing.csv");
    let out = totient(&["fit", "--data", p(&missing), "--out", p(&dir.path().join("m.json"))]);
    assert_eq!(code(&out), 2);
    let out = totient(&["generate", "--bits", "16", "--count", "0", "--out", p(&dir.path().join("x.csv"))]);
    assert_eq!(code(&out), 1);
    let out = totient(&["generate", "--bits", "16", "--threads", "0", "--out", p(&dir.path().join("x.csv"))]);
    assert_eq!(code(&out), 1);
}

#[test]
fn fit_modes_and_model_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let data = generate(dir.path(), "d.csv", 64, 2000, 3);
    let free = dir.path().join("free.json");
    let out = totient(&["fit", "--data", p(&data), "--mode", "free_ols", "--out", p(&free)]);
    assert_eq!(code(&out), 0);
    let model = load_model(&free).unwrap();
    assert_eq!(model.mode, FitMode::FreeOls);
    let half = Rational::new(1.into(), 2.into());
    let gap = if model.slope > half { &model.slope - &half } else { &half - &model.slope };
    assert!(gap <= Rational::new(1.into(), 1_000_000.into()));
    assert!(model.metrics.is_some());

    let cons = dir.path().join("cons.json");
    let out = totient(&["fit", "--data", p(&data), "--mode", "conservative", "--out", p(&cons)]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).contains("training violations 0"));

    let out = totient(&["fit", "--data", p(&data), "--mode", "nonsense", "--out", p(&cons)]);
    assert_eq!(code(&out), 1);
}

#[test]
fn eval_reports_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let data = generate(dir.path(), "d.csv", 64, 1000, 4);
    let model = dir.path().join("m.json");
    assert_eq!(code(&totient(&["fit", "--data", p(&data), "--out", p(&model)])), 0);
    let out = totient(&["eval", "--data", p(&data), "--model", p(&model)]);
    assert_eq!(code(&out), 0);
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["split"], "test");
    let r2 = v["metrics"]["rendered"]["r2"].as_str().unwrap();
    assert!(r2.starts_with("1.0") || r2.starts_with("0.99999999"), "{r2}");
    // same split as fit, so the same report
    let stored = load_model(&model).unwrap().metrics.unwrap();
    assert_eq!(v["metrics"], stored.to_json());
}

#[test]
fn bounds_for_one_modulus_and_a_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("p8.json");
    save_model(&fit_provable(8).unwrap(), &model).unwrap();
    let out = totient(&["bounds", "--modulus", "143", "--model", p(&model)]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    let row = text.lines().nth(1).unwrap();
    assert!(row.starts_with("143,,113,27,"), "{row}");

    let data = generate(dir.path(), "d.csv", 32, 50, 2);
    let csv = dir.path().join("b.csv");
    assert_eq!(code(&totient(&["bounds", "--data", p(&data), "--out", p(&csv)])), 0);
    let text = fs::read_to_string(csv).unwrap();
    assert_eq!(text.lines().count(), 51);
    for line in text.lines().skip(1) {
        assert!(line.ends_with(",true,true,true,"), "{line}");
    }
}

#[test]
fn attack_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("p8.json");
    save_model(&fit_provable(8).unwrap(), &model).unwrap();
    let data = generate(dir.path(), "d.csv", 8, 3, 0);

    let out = totient(&["attack", "--data", p(&data), "--model", p(&model), "--budget", "10"]);
    assert_eq!(code(&out), 0);
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["success"], true);
    assert_eq!(v["iterations_used"], 8);
    assert_eq!(v["window"], "7");
    assert_eq!((v["p"].as_str(), v["q"].as_str()), (Some("11"), Some("13")));

    let out = totient(&["attack", "--data", p(&data), "--model", p(&model), "--budget", "7"]);
    assert_eq!(code(&out), 3);

    let out = totient(&["attack", "--modulus", "143", "--baseline", "--budget", "1"]);
    assert_eq!(code(&out), 0);

    let out = totient(&["attack", "--modulus", "14x3", "--baseline"]);
    assert_eq!(code(&out), 1);
}

#[test]
fn plot_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let data = generate(dir.path(), "d.csv", 64, 500, 5);
    let model = dir.path().join("m.json");
    assert_eq!(code(&totient(&["fit", "--data", p(&data), "--out", p(&model)])), 0);
    let mut texts = Vec::new();
    for run in ["a", "b"] {
        let out_dir = dir.path().join(run);
        let out = totient(&["plot", "--data", p(&data), "--model", p(&model), "--out", p(&out_dir)]);
        assert_eq!(code(&out), 0);
        let names = ["scatter.svg", "scatter.csv", "residual_hist.svg", "residual_hist.csv"];
        texts.push(names.map(|n| fs::read_to_string(out_dir.join(n)).unwrap()));
    }
    assert_eq!(texts[0], texts[1]);
    assert!(texts[0][0].starts_with("<svg "));
}

#[test]
fn pipeline_with_target_modulus() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("run");
    // 2147483647 · 4294967291, a 63-bit product
    let out = totient(&["pipeline", "--modulus", "9223372021822390277", "--out", p(&out_dir)]);
    assert_eq!(code(&out), 1, "odd bit length is a usage error");

    // 4294967279 · 4294967291
    let n = "18446743979220271189";
    let out = totient(&[
        "pipeline", "--modulus", n, "--count", "500", "--seed", "2", "--budget", "1000", "--out", p(&out_dir),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    for name in [
        "dataset.csv",
        "model.json",
        "metrics.json",
        "bounds.csv",
        "window.csv",
        "window_summary.json",
        "scatter.svg",
        "scatter.csv",
        "residual_hist.svg",
        "residual_hist.csv",
        "target.json",
    ] {
        assert!(out_dir.join(name).is_file(), "{name}");
    }
    let target: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("target.json")).unwrap()).unwrap();
    assert_eq!(target["bits"], 64);
    assert_eq!(target["modulus"], n);

    let out = totient(&["pipeline", "--bits", "62", "--modulus", n, "--out", p(&out_dir)]);
    assert_eq!(code(&out), 1);
}

#[test]
fn config_file_supplies_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "# shared settings\nbits = 16\ncount = 7\nseed = 9\nmode = provable\n").unwrap();
    let data = dir.path().join("d.csv");
    let out = totient(&["generate", "--config", p(&cfg), "--count", "5", "--out", p(&data)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(&data).unwrap();
    assert!(text.starts_with("# totient-dataset v1 bits=16 count=5 seed=9\n"));

    let out = totient(&["generate", "--paper-scale", "--count", "3", "--bits", "8", "--out", p(&data)]);
    assert_eq!(code(&out), 1);

    fs::write(&cfg, "colour = blue\n").unwrap();
    let out = totient(&["generate", "--config", p(&cfg), "--bits", "16", "--out", p(&data)]);
    assert_eq!(code(&out), 1);
}
