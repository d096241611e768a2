use std::path::Path;
use std::process::Command;

use newton_infer::cli::{RunManifest, MANIFEST_FILE};
use newton_infer::inference::{exact_solver, plugin_sandwich_lowdim, CoverageReport};
use newton_infer::model::{Dataset, LossModel};
use newton_infer::presets::{preset, PresetName};
use newton_infer::rng::{derive_seed, tag};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_newton-infer"))
}

fn exit_code(args: &[&str], dir: &Path) -> i32 {
    let out = bin().args(args).current_dir(dir).output().unwrap();
    out.status.code().unwrap()
}

fn run(args: &[&str]) -> i32 {
    let mut full = vec!["newton-infer"];
    full.extend_from_slice(args);
    newton_infer::cli::run(full)
}

fn read_csv(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records().map(|rec| rec.unwrap().iter().map(String::from).collect()).collect()
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(exit_code(&["--help"], d), 0);
    assert_eq!(exit_code(&["--version"], d), 0);
    assert_eq!(exit_code(&[], d), 2);
    assert_eq!(exit_code(&["infer", "--preset", "lin7"], d), 2);
    assert_eq!(exit_code(&["infer", "--d-o", "0.4"], d), 2);
    assert_eq!(exit_code(&["infer", "--level", "1.5"], d), 2);
    assert_eq!(exit_code(&["highdim", "--method", "sgd"], d), 2);
    assert_eq!(exit_code(&["infer", "--parallel", "0"], d), 2);
    assert_eq!(exit_code(&["infer", "--data", "missing.csv"], d), 1);

    std::fs::write(d.join("bad.json"), r#"{"newton": {"rho_0": 0.1}}"#).unwrap();
    assert_eq!(exit_code(&["infer", "--config", "bad.json"], d), 2);

    std::fs::write(d.join("nan.csv"), "x1,y\n1.0,2.0\nnan,1.0\n3.0,0.5\n").unwrap();
    assert_eq!(exit_code(&["infer", "--data", "nan.csv", "--method", "oracle"], d), 3);

    // every simulation diverges
    std::fs::write(
        d.join("diverge.json"),
        r#"{"newton": {"tau0": 1e6, "step_cap": "off", "d_i": 0.6}}"#,
    )
    .unwrap();
    let out = bin()
        .args(["coverage", "--config", "diverge.json", "--sims", "5", "--parallel", "1"])
        .current_dir(d)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(4), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("error:"));
}

#[test]
fn infer_writes_consistent_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    assert_eq!(run(&["infer", "--seed", "3", "--oracle", "--out", out.to_str().unwrap()]), 0);

    let m = RunManifest::load(&out.join(MANIFEST_FILE)).unwrap();
    assert_eq!(m.preset, "lin1");
    assert_eq!(m.seed, 3);
    assert_eq!(m.config.newton.seed, 3);
    for f in ["intervals.csv", "replicates.csv", "covariance.csv", "oracle_covariance.csv"] {
        assert!(m.outputs.iter().any(|o| o == f), "{f} missing from {:?}", m.outputs);
        assert!(out.join(f).exists());
    }
    assert_eq!(read_csv(&out.join("replicates.csv")).len(), 100);
    assert_eq!(read_csv(&out.join("intervals.csv")).len(), 10);

    // the oracle file is the plug-in sandwich at the exact minimizer
    let data = preset(PresetName::Lin1).data.generate(derive_seed(3, 0, tag::DATA)).unwrap();
    let theta = exact_solver(LossModel::SquaredLinear, &data, &[0.0; 10]).unwrap();
    let cov = plugin_sandwich_lowdim(LossModel::SquaredLinear, &data, &theta).unwrap();
    // headerless matrix, one row per line
    let text = std::fs::read_to_string(out.join("oracle_covariance.csv")).unwrap();
    let rows: Vec<Vec<f64>> = text.lines().map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 10);
    for (a, row) in rows.iter().enumerate() {
        assert_eq!(row.len(), 10);
        for (b, v) in row.iter().enumerate() {
            assert_eq!(*v, cov.matrix[(a, b)]);
        }
    }
}

#[test]
fn csv_data_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let data = preset(PresetName::Lin1).data.generate(11).unwrap();
    let path = dir.path().join("data.csv");
    data.save_csv(&path).unwrap();
    let out = dir.path().join("o");
    let code = run(&[
        "infer",
        "--data",
        path.to_str().unwrap(),
        "--loss",
        "squared_linear",
        "--method",
        "oracle",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let reloaded = Dataset::load_csv(&path).unwrap();
    assert_eq!(reloaded, data);
    let theta = exact_solver(LossModel::SquaredLinear, &data, &[0.0; 10]).unwrap();
    let rows = read_csv(&out.join("intervals.csv"));
    let header = csv::Reader::from_path(out.join("intervals.csv")).unwrap().headers().unwrap().clone();
    let col = header.iter().position(|h| h == "center").unwrap();
    for (j, row) in rows.iter().enumerate() {
        assert_eq!(row[col].parse::<f64>().unwrap(), theta[j]);
    }
}

fn coverage_json(args: &[&str]) -> (CoverageReport, String) {
    let dir = tempfile::tempdir().unwrap();
    let mut full = vec!["coverage", "--out", dir.path().to_str().unwrap()];
    full.extend_from_slice(args);
    assert_eq!(run(&full), 0);
    let text = std::fs::read_to_string(dir.path().join("coverage.json")).unwrap();
    (serde_json::from_str(&text).unwrap(), text)
}

#[test]
fn single_simulation_is_a_valid_report() {
    let (r, _) = coverage_json(&["--sims", "1", "--seed", "5"]);
    assert_eq!(r.n_sims, 1);
    assert_eq!(r.failures, 0);
    assert!((0.0..=1.0).contains(&r.coverage));
    assert_eq!((r.coverage * 10.0).round(), r.coverage * 10.0);
    assert!(r.avg_length > 0.0);
}

#[test]
fn coverage_is_thread_independent() {
    let (_, one) = coverage_json(&["--preset", "log1", "--sims", "16", "--parallel", "1", "--seed", "2"]);
    let (_, eight) = coverage_json(&["--preset", "log1", "--sims", "16", "--parallel", "8", "--seed", "2"]);
    assert_eq!(one, eight);
}

#[test]
fn thread_environment_variable() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["coverage", "--sims", "2", "--method", "oracle", "--out", "o"])
        .env("NEWTON_INFER_THREADS", "3")
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success());
    let m = RunManifest::load(&dir.path().join("o").join(MANIFEST_FILE)).unwrap();
    assert_eq!(m.threads, 3);
    let bad = bin()
        .args(["coverage", "--sims", "2", "--out", "o"])
        .env("NEWTON_INFER_THREADS", "many")
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(2));
}

const SMALL_HIGHDIM: &str =
    r#"{"data": {"kind": "sparse_high_dim", "n": 100, "p": 50, "s": 3, "amplitude": 0.5, "sigma": 0.7}, "highdim": {"outer_iterations": 50}}"#;

#[test]
fn huge_penalty_gives_zero_estimate() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("hd.json");
    std::fs::write(&cfg, SMALL_HIGHDIM).unwrap();
    let out = dir.path().join("o");
    let code = run(&["highdim", "--config", cfg.to_str().unwrap(), "--lambda", "1e9", "--out", out.to_str().unwrap()]);
    assert_eq!(code, 0);
    let rows = read_csv(&out.join("highdim.csv"));
    assert_eq!(rows.len(), 50);
    for row in &rows {
        assert_eq!(row[1].parse::<f64>().unwrap(), 0.0);
        let pv: f64 = row[5].parse().unwrap();
        assert!((0.0..=1.0).contains(&pv));
    }
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["nonzeros"], 0);
    assert_eq!(summary["lambda"], 1e9);
}

#[test]
fn dense_limit_reports_debias_agreement() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("hd.json");
    std::fs::write(&cfg, SMALL_HIGHDIM).unwrap();
    let out = dir.path().join("o");
    let code = run(&[
        "highdim",
        "--config",
        cfg.to_str().unwrap(),
        "--dense-limit",
        "64",
        "--oracle",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["storage"], "dense");
    let gap = summary["debias_gap"].as_f64().unwrap();
    assert!(gap <= 1e-6, "{gap}");
    assert_eq!(read_csv(&out.join("oracle_variance.csv")).len(), 50);

    // above the limit nothing dense is formed and no gap is reported
    let out2 = dir.path().join("o2");
    let code = run(&[
        "highdim",
        "--config",
        cfg.to_str().unwrap(),
        "--dense-limit",
        "20",
        "--out",
        out2.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out2.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["storage"], "sparse");
    assert!(summary["debias_gap"].is_null());
}

#[test]
fn flags_override_config_file_and_survive_rerun() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    std::fs::write(&cfg, r#"{"preset": "lin2", "lag": 4, "newton": {"outer_iterations": 30}, "seed": 1}"#).unwrap();
    let out = dir.path().join("o");
    let code = run(&[
        "timeseries",
        "--config",
        cfg.to_str().unwrap(),
        "--lag",
        "5",
        "--seed",
        "8",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let m = RunManifest::load(&out.join(MANIFEST_FILE)).unwrap();
    assert_eq!((m.config.lag, m.seed, m.config.newton.outer_iterations), (Some(5), 8, 30));
    assert_eq!(m.preset, "lin2");
    let rows = read_csv(&out.join("replicates.csv"));
    assert_eq!(rows.len(), 30);

    // rerun into the manifest's own directory rewrites identical bytes
    let before = std::fs::read(out.join("replicates.csv")).unwrap();
    assert_eq!(run(&["rerun", "--manifest", out.join(MANIFEST_FILE).to_str().unwrap()]), 0);
    assert_eq!(std::fs::read(out.join("replicates.csv")).unwrap(), before);
}

#[test]
fn coverage_rejects_csv_data() {
    let dir = tempfile::tempdir().unwrap();
    let data = preset(PresetName::Lin1).data.generate(1).unwrap();
    let path = dir.path().join("d.csv");
    data.save_csv(&path).unwrap();
    let code = run(&["coverage", "--data", path.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code, 2);
}
