use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn qdt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qdt"))
        .args(args)
        .env_remove("QDT_SEED")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn table(path: &Path) -> Vec<Vec<f64>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn simulate(dir: &Path, seed: &str) {
    let out = qdt(&["simulate", "--seed", seed, "--out", s(dir)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn help_and_usage_errors() {
    assert_eq!(code(&qdt(&["--help"])), 0);
    assert_eq!(code(&qdt(&["simulate", "--help"])), 0);
    assert_eq!(code(&qdt(&["simulate", "--shots", "0"])), 1);
    assert_eq!(code(&qdt(&["simulate", "--bogus"])), 1);
    assert_eq!(
        code(&qdt(&[
            "--jobs",
            "0",
            "simulate",
            "--out",
            "/nonexistent/x"
        ])),
        1
    );
    assert_eq!(code(&qdt(&["metrology", "--ideal", "--synthetic"])), 1);
}

#[test]
fn simulate_is_reproducible() {
    let tmp = TempDir::new().unwrap();
    let (a, b, c) = (
        tmp.path().join("a"),
        tmp.path().join("b"),
        tmp.path().join("c"),
    );
    simulate(&a, "7");
    simulate(&b, "7");
    let via_env = Command::new(env!("CARGO_BIN_EXE_qdt"))
        .args(["simulate", "--out", s(&c)])
        .env("QDT_SEED", "7")
        .output()
        .unwrap();
    assert_eq!(code(&via_env), 0);
    for file in ["dataset.csv", "v_true.csv", "rho_true.csv", "truth.json"] {
        let first = fs::read(a.join(file)).unwrap();
        assert_eq!(first, fs::read(b.join(file)).unwrap(), "{file}");
        assert_eq!(first, fs::read(c.join(file)).unwrap(), "{file}");
    }
    let manifest = json(&a.join("manifest.json"));
    assert_eq!(manifest[0]["command"], "simulate");
    assert_eq!(manifest[0]["seed"], 7);

    let d = tmp.path().join("d");
    simulate(&d, "8");
    assert_ne!(
        fs::read(a.join("dataset.csv")).unwrap(),
        fs::read(d.join("dataset.csv")).unwrap()
    );
}

#[test]
fn pipeline_composes_through_files() {
    let tmp = TempDir::new().unwrap();
    let sim = tmp.path().join("sim");
    let res = tmp.path().join("res");
    simulate(&sim, "3");
    let data = sim.join("dataset.csv");
    let out = qdt(&[
        "reconstruct",
        "--data",
        s(&data),
        "--out",
        s(&res),
        "--learn-test",
        "0,1,2",
        "--seed",
        "3",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let report = json(&res.join("report.json"));
    assert!(report["final_cost"].as_f64().unwrap() <= 0.01);
    assert_eq!(report["converged"], true);
    let khz = report["cyclic_khz"].as_f64().unwrap();
    assert!((khz - 8.2).abs() < 1.0, "{khz}");
    assert!(
        (report["omega_r_rad_per_s"].as_f64().unwrap() - 2e3 * std::f64::consts::PI * khz).abs()
            < 1e-6
    );
    for row in report["learning"].as_array().unwrap() {
        assert!(row["fidelity"].as_f64().unwrap() > 0.99, "{row}");
    }

    let again = tmp.path().join("again");
    assert_eq!(
        code(&qdt(&[
            "reconstruct",
            "--data",
            s(&data),
            "--out",
            s(&again),
            "--learn-test",
            "0,1,2",
            "--seed",
            "3"
        ])),
        0
    );
    for file in ["v.csv", "rho.csv", "predicted.csv", "report.json"] {
        assert_eq!(
            fs::read(res.join(file)).unwrap(),
            fs::read(again.join(file)).unwrap(),
            "{file}"
        );
    }

    assert_eq!(code(&qdt(&["analyze", "--result", s(&res)])), 0);
    let analysis = json(&res.join("analysis.json"));
    let mass = analysis["diagonal_mass"].as_f64().unwrap();
    assert!(mass > 0.4 && mass < 0.9, "{mass}");
    let sigma = analysis["sigma"].as_f64().unwrap();
    assert!(sigma > 0.2 && sigma < 0.7, "{sigma}");
    for w in analysis["wigner"].as_array().unwrap() {
        let n = w["n"].as_u64().unwrap();
        assert!(res.join(format!("wigner_n{n}.csv")).is_file());
        if n >= 1 {
            assert!(w["min"].as_f64().unwrap() < 0.0, "{w}");
        }
    }
    let fisher = table(&res.join("fisher.csv"));
    assert_eq!(fisher.len(), 121);
    assert!(fisher.iter().all(|r| r[1].is_finite() && r[1] >= 0.0));

    let manifest = json(&res.join("manifest.json"));
    let commands: Vec<&str> = manifest
        .as_array()
        .unwrap()
        .iter()
        .map(|m| m["command"].as_str().unwrap())
        .collect();
    assert_eq!(commands, ["reconstruct", "analyze"]);
}

#[test]
fn reconstruct_missing_input_leaves_no_outputs() {
    let tmp = TempDir::new().unwrap();
    let res = tmp.path().join("res");
    let out = qdt(&[
        "reconstruct",
        "--data",
        s(&tmp.path().join("missing.csv")),
        "--out",
        s(&res),
    ]);
    assert_eq!(code(&out), 1);
    assert!(!res.exists());
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.csv"));
}

#[test]
fn non_convergence_exits_two_with_report() {
    let tmp = TempDir::new().unwrap();
    let sim = tmp.path().join("sim");
    let res = tmp.path().join("res");
    simulate(&sim, "1");
    let out = qdt(&[
        "reconstruct",
        "--data",
        s(&sim.join("dataset.csv")),
        "--out",
        s(&res),
        "--cutoff",
        "1e-9",
        "--max-outer",
        "2",
    ]);
    assert_eq!(code(&out), 2);
    let report = json(&res.join("report.json"));
    assert_eq!(report["converged"], false);
    assert_eq!(report["outer_iterations"], 2);
    assert!(res.join("v.csv").is_file());
}

/// A hand-written result directory with a perfect detector and a
/// Poissonian atom number.
fn identity_result(dir: &Path, n_max: usize, mean: f64) {
    fs::create_dir_all(dir).unwrap();
    let rows: Vec<String> = (0..=n_max)
        .map(|n| {
            (0..=n_max)
                .map(|m| if n == m { "1" } else { "0" })
                .collect::<Vec<_>>()
                .join(",")
        })
        .collect();
    fs::write(dir.join("v.csv"), rows.join("\n") + "\n").unwrap();
    let rho = qdt::DiagonalState::poisson(mean).unwrap();
    let mut text = String::from("N,rho\n");
    for (n, w) in rho.as_slice().iter().enumerate() {
        text.push_str(&format!("{n},{w:e}\n"));
    }
    fs::write(dir.join("rho.csv"), text).unwrap();
    let report = serde_json::json!({ "omega_r_rad_per_s": 51522.0, "times_us": [0.0, 5.0, 10.0] });
    fs::write(dir.join("report.json"), report.to_string()).unwrap();
}

#[test]
fn analyze_identity_detector() {
    let tmp = TempDir::new().unwrap();
    let res = tmp.path().join("ideal");
    identity_result(&res, 80, 20.0);
    let out = qdt(&[
        "analyze",
        "--result",
        s(&res),
        "--ideal",
        "--wigner",
        "0,1",
        "--theta-min",
        "0.2",
        "--theta-max",
        "3.0",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let analysis = json(&res.join("analysis.json"));
    assert!((analysis["diagonal_mass"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    let w = analysis["wigner"].as_array().unwrap();
    assert!(w[0]["min"].as_f64().unwrap() >= 0.0);
    assert!((w[1]["min"].as_f64().unwrap() + std::f64::consts::FRAC_1_PI).abs() < 1e-9);
    for row in table(&res.join("fisher.csv")) {
        assert!((row[1] - row[2]).abs() <= 1e-8 * row[2].max(1.0), "{row:?}");
    }
}

#[test]
fn analyze_reports_missing_files() {
    let tmp = TempDir::new().unwrap();
    let out = qdt(&["analyze", "--result", s(tmp.path())]);
    assert_eq!(code(&out), 1);
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(
        err.contains("v.csv") && err.contains("report.json"),
        "{err}"
    );
}

#[test]
fn metrology_working_points() {
    let tmp = TempDir::new().unwrap();
    let ideal = tmp.path().join("ideal");
    let out = qdt(&[
        "metrology",
        "--ideal",
        "--s",
        "1",
        "--dn",
        "0",
        "--no-map",
        "--scaling-n",
        "30,60,120",
        "--out",
        s(&ideal),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let row = &table(&ideal.join("gain_vs_s.csv"))[0];
    assert!((row[1] - 1.0).abs() < 1e-3, "{row:?}");
    let report = json(&ideal.join("report.json"));
    let exponent = report["scaling"]["exponent_ideal"].as_f64().unwrap();
    assert!(exponent > 0.1 && exponent < 0.4, "{exponent}");
    assert_eq!(table(&ideal.join("gain_scaling.csv")).len(), 3);

    let noisy = tmp.path().join("noisy");
    let out = qdt(&[
        "metrology",
        "--synthetic",
        "--s",
        "1",
        "--n-mean",
        "36",
        "--dn",
        "6",
        "--no-scaling",
        "--map-s-points",
        "3",
        "--map-dn-points",
        "2",
        "--out",
        s(&noisy),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let row = &table(&noisy.join("gain_vs_s.csv"))[0];
    assert!(row[2] > 0.6 && row[2] < 0.9, "{row:?}");
    assert!(row[2] < row[1]);
    assert_eq!(table(&noisy.join("gain_map.csv")).len(), 6);
}

#[test]
fn metrology_rejects_bad_grid() {
    let tmp = TempDir::new().unwrap();
    let out = qdt(&[
        "metrology",
        "--ideal",
        "--map-dn-points",
        "0",
        "--out",
        s(&tmp.path().join("m")),
    ]);
    assert_eq!(code(&out), 1);
    assert!(!tmp.path().join("m").exists());
}

#[test]
fn learn_test_command() {
    let tmp = TempDir::new().unwrap();
    let sim = tmp.path().join("sim");
    simulate(&sim, "2");
    let lt = tmp.path().join("lt");
    let out = qdt(&[
        "learn-test",
        "--data",
        s(&sim.join("dataset.csv")),
        "--held-out",
        "0,2",
        "--out",
        s(&lt),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let rows = table(&lt.join("learning.csv"));
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[1][0], 2.0);
    assert!(rows.iter().all(|r| r[2] > 0.99), "{rows:?}");
    assert_eq!(
        code(&qdt(&[
            "learn-test",
            "--data",
            s(&sim.join("dataset.csv")),
            "--held-out",
            "9"
        ])),
        1
    );
}
