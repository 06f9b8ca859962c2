use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

use rashgam_core::eval::synthetic_steps;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_rashgam"))
}

fn rashgam(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).env_remove("RASHGAM_THREADS").output().unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let o = rashgam(dir, args);
    assert_eq!(o.status.code(), Some(0), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout).unwrap()
}

fn json(path: PathBuf) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

/// Writes a small synthetic dataset into a fresh directory.
fn workspace(n: usize, p: usize) -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    let raw = synthetic_steps(n, p, 3, 0.8, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
    let mut s = raw.feature_names().join(",") + ",y\n";
    for (row, y) in raw.rows().iter().zip(raw.labels()) {
        let cells: Vec<String> = row.iter().map(f64::to_string).collect();
        s += &format!("{},{y}\n", cells.join(","));
    }
    fs::write(dir.path().join("data.csv"), s).unwrap();
    dir
}

const FAST: [&str; 4] = ["--iters", "100", "--eval-every", "25"];

fn fit_and_rset(dir: &Path) {
    ok(dir, &["fit", "--data", "data.csv", "--bins", "4", "--lambda2", "0.001", "--lambdas", "0.001"]);
    let mut args = vec!["rset", "--model", "out/model.json", "--theta-mult", "1.01"];
    args.extend(FAST);
    ok(dir, &args);
}

#[test]
fn every_subcommand_writes_its_artifacts() {
    let w = workspace(400, 3);
    let d = w.path();
    fit_and_rset(d);
    let out = d.join("out");
    let model = json(out.join("model.json"));
    for key in ["feature_names", "bin_edges", "omega0", "omega", "lambda2", "lambda_s", "support_runs"] {
        assert!(model.get(key).is_some(), "{key}");
    }
    let e = json(out.join("ellipsoid.json"));
    let dim = e["dim"].as_u64().unwrap() as usize;
    assert_eq!(e["center"].as_array().unwrap().len(), dim);
    assert!(fs::read_to_string(out.join("trace.csv")).unwrap().starts_with("iter,objective"));

    let me = ["--model", "out/model.json", "--ellipsoid", "out/ellipsoid.json"];
    let with = |extra: &[&'static str], cmd: &'static str| {
        let mut a = vec![cmd];
        a.extend(me);
        a.extend(extra);
        a
    };
    let vi_line = ok(d, &with(&[], "vi"));
    assert!(vi_line.starts_with("vi (free)"));
    let csv = fs::read_to_string(out.join("vi.csv")).unwrap();
    assert!(csv.starts_with("feature,vi_minus,vi_center,vi_plus,mode"));
    assert_eq!(csv.lines().count(), 4);

    ok(d, &with(&["--feature", "x0", "--also", "x1:decreasing"], "monotone"));
    let m = json(out.join("monotone.json"));
    let sf = &m["shape_functions"][0]["steps"];
    let vals: Vec<f64> = sf.as_array().unwrap().iter().map(|s| s["value"].as_f64().unwrap()).collect();
    assert!(vals.windows(2).all(|p| p[0] <= p[1] + 1e-10), "{vals:?}");

    fs::write(d.join("edit.json"), e["center"].to_string()).unwrap();
    let line = ok(d, &["project", "--ellipsoid", "out/ellipsoid.json", "--request", "edit.json"]);
    assert!(line.contains("inside_already=true"), "{line}");
    assert_eq!(json(out.join("projected.json"))["distance"], 0.0);

    ok(d, &["sample", "--ellipsoid", "out/ellipsoid.json", "--n", "7"]);
    assert_eq!(fs::read_to_string(out.join("samples.csv")).unwrap().lines().count(), 8);

    ok(d, &with(&["--feature", "x2", "--k", "1", "--n", "500"], "jumps"));
    let j = json(out.join("jumps.json"));
    let total: f64 = ["fraction_down", "fraction_up", "fraction_flat"].iter().map(|k| j[k].as_f64().unwrap()).sum();
    assert!((total - 1.0).abs() < 1e-12);

    let data_e = ["--model", "out/model.json", "--ellipsoid", "out/ellipsoid.json"];
    let mut a = vec!["precision", "--n", "500"];
    a.extend(data_e);
    ok(d, &a);
    let p = json(out.join("precision.json"))["precision"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&p));

    let mut a = vec!["tradeoff", "--n", "300", "--ratios", "0.5,1,2"];
    a.extend(data_e);
    ok(d, &a);
    let t = fs::read_to_string(out.join("tradeoff.csv")).unwrap();
    let prec: Vec<f64> = t.lines().skip(1).map(|l| l.split(',').nth(2).unwrap().parse().unwrap()).collect();
    assert_eq!(prec.len(), 3);
    assert!(prec[0] >= prec[2]);

    let mut a = vec!["block", "--candidates", "100"];
    a.extend(data_e);
    ok(d, &a);
    assert!(fs::read_to_string(out.join("block.csv")).unwrap().starts_with("plan,u,loss_bound,log_volume"));
    if out.join("block_best_ellipsoid.json").exists() {
        // the best slice is itself a valid model/ellipsoid pair
        ok(d, &["vi", "--model", "out/block_best_model.json", "--ellipsoid", "out/block_best_ellipsoid.json", "--out", "out/best"]);
    }

    let mut a = vec!["box-volume"];
    a.extend(data_e);
    ok(d, &a);
    let b = json(out.join("box.json"));
    assert!(b["axis_violations"].as_u64().is_some());
    ok(d, &["box-volume", "--model", "out/model.json"]);
    assert!(json(out.join("box.json"))["axis_violations"].is_null());

    let mut a = vec!["ratios", "--plans", "1", "--candidates", "50", "--n", "200", "--iters", "50", "--eval-every", "25"];
    a.extend(data_e);
    ok(d, &a);
    assert!(json(out.join("ratios.json"))["plans"].as_u64().unwrap() <= 1);

    for cmd in ["fit", "rset", "vi", "monotone", "project", "sample", "jumps", "precision", "tradeoff", "block", "box-volume", "ratios"] {
        let m = json(out.join(format!("{cmd}.manifest.json")));
        assert_eq!(m["command"], cmd);
        assert_eq!(m["seed"], 42);
    }
    let fm = json(out.join("fit.manifest.json"));
    assert_eq!(fm["inputs"][0]["role"], "data");
    assert_eq!(fm["inputs"][0]["sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn identical_invocations_give_identical_bytes() {
    let w = workspace(300, 2);
    let d = w.path();
    let names = ["model.json", "ellipsoid.json", "ellipsoid_init.json", "trace.csv", "fit.manifest.json", "rset.manifest.json"];
    fit_and_rset(d);
    ok(d, &["sample", "--ellipsoid", "out/ellipsoid.json", "--n", "20", "--seed", "3"]);
    let first: Vec<Vec<u8>> = names.iter().chain(&["samples.csv"]).map(|n| fs::read(d.join("out").join(n)).unwrap()).collect();
    fit_and_rset(d);
    let o = bin()
        .current_dir(d)
        .args(["sample", "--ellipsoid", "out/ellipsoid.json", "--n", "20", "--seed", "3"])
        .env("RASHGAM_THREADS", "1")
        .output()
        .unwrap();
    assert!(o.status.success());
    let second: Vec<Vec<u8>> = names.iter().chain(&["samples.csv"]).map(|n| fs::read(d.join("out").join(n)).unwrap()).collect();
    assert_eq!(first, second);

    // a different seed changes the fit
    let mut args = vec!["rset", "--model", "out/model.json", "--seed", "7"];
    args.extend(FAST);
    ok(d, &args);
    assert_ne!(fs::read(d.join("out/ellipsoid.json")).unwrap(), first[1]);
}

#[test]
fn exit_codes() {
    let w = workspace(300, 2);
    let d = w.path();
    assert_eq!(rashgam(d, &["--help"]).status.code(), Some(0));
    assert_eq!(rashgam(d, &["frobnicate"]).status.code(), Some(2));
    assert_eq!(rashgam(d, &["fit", "--data", "data.csv", "--bogus"]).status.code(), Some(2));
    let o = rashgam(d, &["fit", "--data", "missing.csv"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("missing.csv"));
    assert_eq!(rashgam(d, &["--threads", "0", "fit", "--data", "data.csv"]).status.code(), Some(2));

    fs::write(d.join("bad.csv"), "a,y\n1,3\n").unwrap();
    assert_eq!(rashgam(d, &["fit", "--data", "bad.csv"]).status.code(), Some(2));

    ok(d, &["fit", "--data", "data.csv", "--bins", "24"]);
    assert_eq!(rashgam(d, &["rset", "--model", "out/model.json", "--theta-mult", "1.0"]).status.code(), Some(2));
    ok(d, &["rset", "--model", "out/model.json", "--iters", "2", "--eval-every", "1"]);
    // 24 bins exceed the sign-enumeration guard: a domain error
    let o = rashgam(d, &["vi", "--model", "out/model.json", "--ellipsoid", "out/ellipsoid.json"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("enumeration"));
    // edits of the wrong length are rejected before any work
    fs::write(d.join("short.json"), "{\"omega_req\": [1.0, 2.0]}").unwrap();
    let o = rashgam(d, &["project", "--ellipsoid", "out/ellipsoid.json", "--request", "short.json"]);
    assert_eq!(o.status.code(), Some(2));
}
