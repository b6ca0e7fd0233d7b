//! End-to-end runs of the `privlr` binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use nalgebra::DMatrix;
use privlr_core::evaluation::spearman_rho;
use privlr_core::data::{drug_dataset, parse_responses, parse_table, read_dataset_csv, select_genes};
use privlr_core::mechanism::diffpriss;
use privlr_core::regression::posterior_fixed;
use privlr_core::stats::{sufficient_stats, StatsWire};
use privlr_core::tuning::generate_auxiliary;
use privlr_core::{Bounds, Dataset, FixedPrecisionPrior, PrivacyBudget, RngStream, SufficientStats};
use serde_json::Value;

fn privlr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_privlr")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> Output {
    let out = privlr(args);
    assert!(
        out.status.success(),
        "privlr {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write_dataset(path: &Path, d: &Dataset) {
    let mut text = String::from("label");
    for j in 0..d.d() {
        text.push_str(&format!(",g{j}"));
    }
    text.push_str(",target\n");
    for i in 0..d.n() {
        text.push_str(&format!("r{i}"));
        for j in 0..d.d() {
            text.push_str(&format!(",{:?}", d.inputs()[(i, j)]));
        }
        text.push_str(&format!(",{:?}\n", d.targets()[i]));
    }
    fs::write(path, text).unwrap();
}

fn synthetic(n: usize, d: usize, seed: u64) -> Dataset {
    generate_auxiliary(n, d, 1.0, 1.0, &mut RngStream::new(seed, 0)).unwrap()
}

// ---------------------------------------------------------------- preprocess

struct Fixture {
    expression: PathBuf,
    responses: PathBuf,
    order: PathBuf,
}

/// 8 cell lines x 64 genes; drug A misses two responses, drug B none.
fn fixture(dir: &Path) -> Fixture {
    let genes: Vec<String> = (0..64).map(|g| format!("G{g}")).collect();
    let mut expr = format!("cell,{}\n", genes.join(","));
    for c in 0..8 {
        let vals: Vec<String> = (0..64).map(|g| format!("{}", (c * 64 + g) as f64 / 10.0)).collect();
        expr.push_str(&format!("C{c},{}\n", vals.join(",")));
    }
    let mut resp = String::from("cell,drug,ln_ic50\n");
    for c in 0..8 {
        let a = if c == 2 || c == 5 { "NA".to_string() } else { format!("{}", c as f64 * 0.5) };
        resp.push_str(&format!("C{c},A,{a}\nC{c},B,{}\n", -(c as f64)));
    }
    let order: Vec<String> = (0..64).rev().map(|g| format!("G{}", (g * 7) % 64)).collect();
    let f = Fixture {
        expression: dir.join("expr.csv"),
        responses: dir.join("resp.csv"),
        order: dir.join("order.txt"),
    };
    fs::write(&f.expression, expr).unwrap();
    fs::write(&f.responses, resp).unwrap();
    fs::write(&f.order, order.join("\n")).unwrap();
    f
}

#[test]
fn preprocess_writes_parseable_datasets_and_drops_missing() {
    let dir = tempfile::tempdir().unwrap();
    let f = fixture(dir.path());
    let out = dir.path().join("clean");
    let run = ok(&[
        "preprocess",
        "--expression",
        s(&f.expression),
        "--responses",
        s(&f.responses),
        "--gene-order",
        s(&f.order),
        "--dims",
        "10",
        "--out",
        s(&out),
    ]);
    let stdout = String::from_utf8(run.stdout).unwrap();
    assert!(stdout.contains("A\tn=6") && stdout.contains("B\tn=8"), "{stdout}");

    let manifest = json(&out.join("manifest.json"));
    assert_eq!(manifest["result"]["drugs"]["A"]["n"], 6);
    assert_eq!(manifest["result"]["drugs"]["B"]["n"], 8);

    // oracle: the same cleaning done in-process
    let expr = parse_table(fs::File::open(&f.expression).unwrap(), b',').unwrap();
    let order: Vec<String> = fs::read_to_string(&f.order).unwrap().lines().map(String::from).collect();
    let expr = select_genes(&expr, &order, 10).unwrap();
    let resp = parse_responses(fs::File::open(&f.responses).unwrap(), b',').unwrap();
    for drug in ["A", "B"] {
        let (labels, genes, ds) = read_dataset_csv(fs::File::open(out.join(format!("{drug}.csv"))).unwrap(), b',').unwrap();
        let expect = drug_dataset(&expr, &resp, drug).unwrap();
        assert_eq!(genes.len(), 10);
        assert_eq!(genes, order[..10].to_vec());
        assert_eq!(labels, expect.labels);
        assert_eq!(ds, expect.dataset);
    }
}

// ---------------------------------------------------------------------- tune

fn split_grid_size() -> usize {
    // brute force over multiples of 0.05 in [0.05, 0.9] summing to one
    let mut count = 0;
    for a in 1..=18 {
        for b in 1..=18 {
            for c in 1..=18 {
                if a + b + c == 20 {
                    count += 1;
                }
            }
        }
    }
    count
}

fn quick_tune(out: &Path, epsilon: &str, extra: &[&str]) -> Output {
    let mut args = vec![
        "tune",
        "--n-aux",
        "40",
        "--dims",
        "2",
        "--epsilon",
        epsilon,
        "--seed",
        "11",
        "--scoring",
        "fixed",
        "--split-replicates",
        "1,1",
        "--replicates",
        "1,1",
        "--out",
        s(out),
    ];
    args.extend_from_slice(extra);
    ok(&args)
}

#[test]
fn tune_scores_full_default_grids() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("tune.json");
    quick_tune(&out, "2", &["--format", "csv"]);
    let r = json(&out);
    assert_eq!(r["result"]["splits_scored"], split_grid_size());
    assert_eq!(r["result"]["pairs_scored"], 400);
    assert!(dir.path().join("tune.csv").exists());
    assert!(dir.path().join("tune.splits.csv").exists());
}

#[test]
fn tune_is_byte_identical_for_a_fixed_seed_and_from_its_own_config() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b, c) = (dir.path().join("a.json"), dir.path().join("b.json"), dir.path().join("c.json"));
    quick_tune(&a, "2", &["--omega", "0.5,1,2"]);
    quick_tune(&b, "2", &["--omega", "0.5,1,2"]);
    ok(&["tune", "--config", s(&a), "--out", s(&c)]);
    let bytes = fs::read(&a).unwrap();
    assert_eq!(bytes, fs::read(&b).unwrap());
    assert_eq!(bytes, fs::read(&c).unwrap());
}

#[test]
fn tune_noise_free_limit_gives_valid_split() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("t.json");
    quick_tune(&out, "1e12", &["--omega", "0.5,2"]);
    let split: Vec<f64> = serde_json::from_value(json(&out)["result"]["split"].clone()).unwrap();
    assert_eq!(split.len(), 3);
    assert!((split.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    assert!(split.iter().all(|p| *p >= 0.05 - 1e-12));
}

// ----------------------------------------------------------- release and fit

fn release_stats(path: &Path) -> SufficientStats {
    let wire: StatsWire = serde_json::from_value(json(path)["result"]["stats"].clone()).unwrap();
    SufficientStats::try_from(wire).unwrap()
}

#[test]
fn huge_epsilon_release_is_exact_stats() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("ds.csv");
    let ds = synthetic(30, 3, 1);
    write_dataset(&data, &ds);
    let out = dir.path().join("rel.json");
    ok(&["release", "--data", s(&data), "--epsilon", "1e12", "--bounds", "100,100", "--out", s(&out)]);
    let noisy = release_stats(&out);
    let exact = sufficient_stats(&ds);
    // noise scales are below 1e-6 here
    assert!((noisy.xx() - exact.xx()).abs().max() < 1e-4);
    assert!((noisy.xy() - exact.xy()).abs().max() < 1e-4);
    assert!((noisy.yy() - exact.yy()).abs() < 1e-4);
    assert_eq!(noisy.xx(), &noisy.xx().transpose());
    // the seed never reaches the artifact
    assert!(json(&out)["config"]["seed"].is_null());
}

#[test]
fn release_then_fit_matches_in_process_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let (data, np) = (dir.path().join("ds.csv"), dir.path().join("np.csv"));
    let ds = synthetic(200, 4, 2);
    let public = synthetic(15, 4, 3);
    write_dataset(&data, &ds);
    write_dataset(&np, &public);
    let (rel, post) = (dir.path().join("rel.json"), dir.path().join("post.json"));
    ok(&[
        "release", "--data", s(&data), "--epsilon", "2", "--split", "0.3,0.6,0.1", "--bounds", "1.5,2", "--seed", "77",
        "--out", s(&rel),
    ]);
    ok(&[
        "fit", "--stats", s(&rel), "--nonprivate", s(&np), "--lambda", "2", "--lambda0", "0.5", "--out", s(&post),
    ]);

    let bounds = Bounds::new(1.5, 2.0).unwrap();
    let budget = PrivacyBudget::new(2.0, 0.3, 0.6, 0.1).unwrap();
    let release = diffpriss(&ds, bounds, budget, &mut RngStream::derive(77, "release", &[])).unwrap();
    let stats = privlr_core::stats::combine_stats(&release.stats().unwrap(), &sufficient_stats(&public)).unwrap();
    let expect = posterior_fixed(&stats, &FixedPrecisionPrior::centered(4, 2.0, 0.5).unwrap()).unwrap();
    let got: Vec<f64> = serde_json::from_value(json(&post)["result"]["mean"].clone()).unwrap();
    for (g, e) in got.iter().zip(expect.mean.iter()) {
        assert!((g - e).abs() <= 1e-12 * e.abs().max(1.0), "{g} vs {e}");
    }
}

#[test]
fn second_release_to_same_receipt_fails() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("ds.csv");
    write_dataset(&data, &synthetic(20, 2, 4));
    let out = dir.path().join("rel.json");
    let args = ["release", "--data", s(&data), "--epsilon", "1", "--bounds", "1,1", "--out", s(&out)];
    ok(&args);
    let before = fs::read(&out).unwrap();
    let again = privlr(&args);
    assert!(!again.status.success());
    let err: Value = serde_json::from_slice(&again.stderr).unwrap();
    assert_eq!(err["error"]["kind"], "already_released");
    assert_eq!(fs::read(&out).unwrap(), before);
}

#[test]
fn fit_on_empty_stats_is_the_prior() {
    let dir = tempfile::tempdir().unwrap();
    let stats = dir.path().join("zero.json");
    fs::write(
        &stats,
        serde_json::to_string(&StatsWire::from(SufficientStats::zero(3))).unwrap(),
    )
    .unwrap();
    let post = dir.path().join("post.json");
    ok(&["fit", "--stats", s(&stats), "--lambda0", "2.5", "--out", s(&post)]);
    let r = json(&post)["result"].clone();
    assert_eq!(r["mean"], serde_json::json!([0.0, 0.0, 0.0]));
    assert_eq!(
        r["posterior"]["precision_upper"],
        serde_json::json!([2.5, 0.0, 0.0, 2.5, 0.0, 2.5])
    );
}

#[test]
fn gibbs_fit_writes_samples() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("ds.csv");
    write_dataset(&data, &synthetic(100, 2, 5));
    let rel = dir.path().join("rel.json");
    ok(&["release", "--data", s(&data), "--epsilon", "5", "--multipliers", "2,2", "--seed", "1", "--out", s(&rel)]);
    let post = dir.path().join("g.json");
    ok(&["fit", "--stats", s(&rel), "--method", "gibbs", "--gibbs-m", "50", "--burn-in", "10", "--out", s(&post)]);
    let samples = fs::read_to_string(dir.path().join("g.samples.csv")).unwrap();
    assert_eq!(samples.lines().count(), 51);
    assert_eq!(json(&post)["result"]["gibbs"]["m"], 50);
}

#[test]
fn predict_zero_rows_gives_zero_and_scores_targets() {
    let dir = tempfile::tempdir().unwrap();
    let post = dir.path().join("post.json");
    let stats = dir.path().join("s.json");
    let ds = synthetic(50, 2, 6);
    fs::write(&stats, serde_json::to_string(&StatsWire::from(sufficient_stats(&ds))).unwrap()).unwrap();
    ok(&["fit", "--stats", s(&stats), "--out", s(&post)]);

    let zeros = dir.path().join("zeros.csv");
    fs::write(&zeros, "label,a,b\nz1,0,0\nz2,0,0\n").unwrap();
    let pred = dir.path().join("pred.json");
    ok(&["predict", "--posterior", s(&post), "--data", s(&zeros), "--out", s(&pred), "--format", "csv"]);
    assert_eq!(json(&pred)["result"]["predictions"], serde_json::json!([0.0, 0.0]));
    assert!(json(&pred)["result"]["spearman"].is_null());
    assert_eq!(fs::read_to_string(dir.path().join("pred.csv")).unwrap(), "label,prediction\nz1,0.0\nz2,0.0\n");

    let scored = dir.path().join("ds.csv");
    write_dataset(&scored, &ds);
    ok(&["predict", "--posterior", s(&post), "--data", s(&scored), "--out", s(&pred)]);
    let rho = json(&pred)["result"]["spearman"].as_f64().unwrap();
    let mean = posterior_fixed(&sufficient_stats(&ds), &FixedPrecisionPrior::centered(2, 1.0, 1.0).unwrap())
        .unwrap()
        .mean;
    let fitted: Vec<f64> = (ds.inputs() * mean).iter().copied().collect();
    let targets: Vec<f64> = ds.targets().iter().copied().collect();
    assert_eq!(rho, spearman_rho(&fitted, &targets).unwrap());
}

// --------------------------------------------------------------- experiments

#[test]
fn convergence_csv_has_one_row_per_n_and_a_slope() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("conv.json");
    ok(&["experiment", "convergence", "--n-grid", "100,1000,10000", "--seeds", "20", "--out", s(&out)]);
    let csv = fs::read_to_string(dir.path().join("conv.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 4);
    assert!(lines[0].ends_with(",slope"));
    assert!(json(&out)["result"]["slope"].is_number());
}

fn curves_args<'a>(out: &'a Path) -> Vec<&'a str> {
    vec![
        "--repeats", "2", "--dims", "3", "--n-private", "60", "--n-nonprivate", "10", "--n-test", "40", "--epsilon", "2",
        "--multipliers", "1,1", "--seed", "9", "--out", s(out),
    ]
}

#[test]
fn curves_reports_each_repeat_per_variant() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("curves.json");
    let mut args = vec!["experiment", "curves"];
    args.extend(curves_args(&out));
    ok(&args);
    let r = json(&out);
    let variants = r["result"]["cells"][0]["result"]["variants"].as_array().unwrap();
    assert_eq!(variants.len(), 4);
    for v in variants {
        assert_eq!(v["rhos"].as_array().unwrap().len(), 2);
    }
    assert!(dir.path().join("curves.csv").exists());
    assert!(dir.path().join("curves.improvement.csv").exists());
}

#[test]
fn single_cell_sweep_equals_curves() {
    let dir = tempfile::tempdir().unwrap();
    let (c, w) = (dir.path().join("c.json"), dir.path().join("w.json"));
    let mut args = vec!["experiment", "curves"];
    args.extend(curves_args(&c));
    ok(&args);
    let mut args = vec!["experiment", "sweep"];
    args.extend(curves_args(&w));
    ok(&args);
    assert_eq!(json(&c)["result"], json(&w)["result"]);
    assert_eq!(fs::read(dir.path().join("c.csv")).unwrap(), fs::read(dir.path().join("w.csv")).unwrap());
}

#[test]
fn curves_on_a_dataset_file() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("ds.csv");
    write_dataset(&data, &synthetic(150, 4, 8));
    let out = dir.path().join("c.json");
    ok(&[
        "experiment", "curves", "--data", s(&data), "--dims", "3", "--n-private", "80", "--n-test", "30",
        "--repeats", "2", "--bounds", "1,2", "--preprocess", "true", "--out", s(&out),
    ]);
    assert_eq!(json(&out)["result"]["cells"][0]["result"]["d"], 3);
}

// ------------------------------------------------------------ configuration

#[test]
fn unknown_flags_and_keys_are_rejected_with_json_errors() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x.json");
    let bad = privlr(&["tune", "--n-aux", "10", "--frobnicate", "--out", s(&out)]);
    assert_eq!(bad.status.code(), Some(2));
    let err: Value = serde_json::from_slice(&bad.stderr).unwrap();
    assert_eq!(err["error"]["kind"], "usage");

    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"n_aux": 10, "dims": 2, "epsilon": 1, "frobnicate": 3}"#).unwrap();
    let bad = privlr(&["tune", "--config", s(&cfg), "--out", s(&out)]);
    assert_eq!(bad.status.code(), Some(1));
    let err: Value = serde_json::from_slice(&bad.stderr).unwrap();
    assert_eq!(err["error"]["kind"], "config");
    assert!(!out.exists());
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(
        &cfg,
        r#"{"mechanism": "linreg_suffstat", "n_grid": [50, 500, 5000], "seeds": 3, "dims": 2, "epsilon": 0.5}"#,
    )
    .unwrap();
    let out = dir.path().join("conv.json");
    ok(&["experiment", "convergence", "--config", s(&cfg), "--epsilon", "4", "--out", s(&out)]);
    let c = json(&out)["config"].clone();
    assert_eq!(c["epsilon"], 4.0);
    assert_eq!(c["seeds"], 3);
    assert_eq!(c["mechanism"], "linreg_suffstat");
    // untouched defaults survive
    assert_eq!(c["b"], 1.0);
}

#[test]
fn bounds_flag_replaces_multipliers_from_config() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("ds.csv");
    write_dataset(&data, &synthetic(20, 2, 9));
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, format!(r#"{{"data": {:?}, "epsilon": 1, "multipliers": [1, 1]}}"#, s(&data))).unwrap();
    let out = dir.path().join("rel.json");
    ok(&["release", "--config", s(&cfg), "--bounds", "3,3", "--out", s(&out)]);
    let r = json(&out);
    assert!(r["config"]["multipliers"].is_null());
    assert_eq!(r["result"]["receipt"]["bounds"]["b_x"], 3.0);
}

#[test]
fn malformed_input_reports_parse_error() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("bad.csv");
    fs::write(&data, "label,a,target\nr0,1,2\nr1,x,3\n").unwrap();
    let out = privlr(&["release", "--data", s(&data), "--epsilon", "1", "--bounds", "1,1", "--out", s(&dir.path().join("r.json"))]);
    assert!(!out.status.success());
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"]["kind"], "parse");
    assert!(err["error"]["message"].as_str().unwrap().contains("bad.csv"));
}

#[test]
fn dataset_written_by_helper_round_trips() {
    // guards the fixture writer used above
    let ds = synthetic(5, 2, 10);
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("d.csv");
    write_dataset(&p, &ds);
    let (_, _, back) = read_dataset_csv(fs::File::open(&p).unwrap(), b',').unwrap();
    assert_eq!(back, ds);
    let _: DMatrix<f64> = back.inputs().clone();
}
