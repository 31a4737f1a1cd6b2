//! End-to-end runs of the `stm` binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const QUICK: &str = "iterations = 40\nburn_in = 10\nseed = 5\n";

fn stm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stm")).args(args).output().expect("run stm")
}

fn ok(args: &[&str]) -> Output {
    let out = stm(args);
    assert!(
        out.status.success(),
        "stm {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn simulate(dir: &Path, seed: &str) {
    ok(&["simulate", "--seed", seed, "--out", s(dir), "--dims", "6,5", "--n", "30"]);
}

fn read(p: &Path) -> Vec<u8> {
    fs::read(p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

fn same_files(a: &Path, b: &Path, names: &[&str]) {
    for n in names {
        assert_eq!(read(&a.join(n)), read(&b.join(n)), "{n} differs");
    }
}

fn chain_files(dir: &Path) -> Vec<String> {
    let mut v: Vec<String> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n.ends_with(".stmv") || n == "index.json")
        .collect();
    v.sort();
    v
}

#[test]
fn simulate_is_byte_identical() {
    let t = tempfile::tempdir().unwrap();
    let (a, b) = (t.path().join("a"), t.path().join("b"));
    simulate(&a, "7");
    simulate(&b, "7");
    same_files(&a, &b, &["data.stmv", "covariates.csv", "beta_true.stmv", "lambda_true.stmv", "truth.json"]);
    let c = t.path().join("c");
    simulate(&c, "8");
    assert_ne!(read(&a.join("data.stmv")), read(&c.join("data.stmv")));
    assert!(a.join("metadata.json").exists());
}

#[test]
fn fit_summarize_compare_pipeline() {
    let t = tempfile::tempdir().unwrap();
    let sim = t.path().join("sim");
    simulate(&sim, "3");
    let cfg = t.path().join("run.cfg");
    fs::write(&cfg, QUICK).unwrap();
    let data = sim.join("data.stmv");
    let cov = sim.join("covariates.csv");

    let fit = |name: &str| {
        let out = t.path().join(name);
        ok(&["fit", "--data", s(&data), "--covariates", s(&cov), "--config", s(&cfg), "--out", s(&out)]);
        out
    };
    let f1 = fit("fit1");
    let f2 = fit("fit2");
    let files = chain_files(&f1);
    assert!(files.contains(&"beta_0000.stmv".to_string()));
    same_files(&f1, &f2, &files.iter().map(String::as_str).collect::<Vec<_>>());
    let meta: serde_json::Value = serde_json::from_slice(&read(&f1.join("metadata.json"))).unwrap();
    assert_eq!(meta["seed"], 5);
    assert!(meta["mean_sweep_seconds"].as_f64().unwrap() > 0.0);
    let index: serde_json::Value = serde_json::from_slice(&read(&f1.join("index.json"))).unwrap();
    assert_eq!(index["n_draws"], 30);

    // The metadata alone reproduces the run.
    let f3 = t.path().join("fit3");
    ok(&["fit", "--from-metadata", s(&f1.join("metadata.json")), "--out", s(&f3)]);
    same_files(&f1, &f3, &files.iter().map(String::as_str).collect::<Vec<_>>());
    // So does the echoed config.
    let f4 = t.path().join("fit4");
    let echo = f1.join("run_config.cfg");
    ok(&["fit", "--data", s(&data), "--covariates", s(&cov), "--config", s(&echo), "--out", s(&f4)]);
    same_files(&f1, &f4, &files.iter().map(String::as_str).collect::<Vec<_>>());

    let summ = |chain: &Path, name: &str| {
        let out = t.path().join(name);
        ok(&["summarize", "--chain", s(chain), "--level", "0.9", "--out", s(&out), "--trace-voxels", "0,4"]);
        out
    };
    let s1 = summ(&f1, "sum1");
    let s2 = summ(&f2, "sum2");
    let maps = [
        "beta_mean.stmv",
        "beta_ci_lo.stmv",
        "beta_ci_hi.stmv",
        "beta_signif.stmv",
        "lambda_mean.stmv",
        "lambda_not_one.stmv",
        "tau_mean.stmv",
        "accept_rate.stmv",
        "summary.json",
        "trace.csv",
    ];
    same_files(&s1, &s2, &maps);
    let trace = String::from_utf8(read(&s1.join("trace.csv"))).unwrap();
    assert_eq!(trace.lines().count(), 1 + 2 * 30);

    let ols = t.path().join("ols");
    ok(&["baseline", "--method", "ols", "--data", s(&data), "--covariates", s(&cov), "--out", s(&ols)]);
    let fixed = t.path().join("fixed");
    ok(&[
        "baseline", "--method", "gmrf-fixed-lambda", "--data", s(&data), "--covariates", s(&cov), "--config",
        s(&cfg), "--out", s(&fixed),
    ]);

    let out = ok(&["compare", "--truth", s(&sim), "--estimates", s(&s1), s(&ols), s(&fixed)]);
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("method,coefficient,rmse"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 12);
    for (i, m) in ["stm", "ols", "gmrf-fixed-lambda"].iter().enumerate() {
        for k in 0..4 {
            assert!(rows[4 * i + k].starts_with(&format!("{m},{k},")), "{}", rows[4 * i + k]);
        }
    }
}

#[test]
fn errors_are_single_lines_with_nonzero_status() {
    let t = tempfile::tempdir().unwrap();
    let sim = t.path().join("sim");
    simulate(&sim, "1");
    let bad = t.path().join("bad.cfg");
    fs::write(&bad, "iteratons = 10\n").unwrap();
    let out = stm(&[
        "fit",
        "--data",
        s(&sim.join("data.stmv")),
        "--covariates",
        s(&sim.join("covariates.csv")),
        "--config",
        s(&bad),
        "--out",
        s(&t.path().join("o")),
    ]);
    assert!(!out.status.success());
    let err = String::from_utf8(out.stderr).unwrap();
    assert_eq!(err.lines().count(), 1, "{err}");
    assert!(err.starts_with("stm: error[config]: "), "{err}");

    let missing = stm(&["summarize", "--chain", s(&t.path().join("nope")), "--out", s(t.path())]);
    assert!(!missing.status.success());
    assert!(String::from_utf8(missing.stderr).unwrap().starts_with("stm: error[io]: "));
}

#[test]
fn help_documents_config_keys() {
    let out = ok(&["fit", "--help"]);
    let text = String::from_utf8(out.stdout).unwrap();
    for key in ["c0", "delta0", "gamma0", "n_nu", "s_nu_sq", "phi", "delta_lambda", "r0", "burn_in", "thin", "level"] {
        assert!(text.contains(key), "missing {key}");
    }
}
