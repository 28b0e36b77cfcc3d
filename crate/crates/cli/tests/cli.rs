use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn data_file(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../data")
        .join(name)
        .to_string_lossy()
        .into_owned()
}

fn wce(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wce")).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

const FITTED: &str = "5.016811675,1.6038754972,0.54823712035,0.94405402879";

#[test]
fn fit_writes_report_with_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("fit.json");
    let o = wce(&["fit", "--data", &data_file("table2.csv"), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let r: Value = serde_json::from_slice(&std::fs::read(out).unwrap()).unwrap();
    for key in ["beta", "n", "zeta", "v_th", "loglik", "converged", "iterations", "profile"] {
        assert!(r.get(key).is_some(), "{key}");
    }
    assert_eq!(r["manifest"]["command"], "fit");
    assert!((r["loglik"].as_f64().unwrap() + 244.4626).abs() < 1e-4);
}

#[test]
fn fit_from_the_estimates_is_immediate() {
    let o = wce(&[
        "fit", "--data", &data_file("table2.csv"), "--init", FITTED, "--profile", "0.94405402879,0.94405402879,0.001",
    ]);
    assert_eq!(code(&o), 0);
    let r: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(r["iterations"].as_u64().unwrap() <= 2);
}

#[test]
fn narrow_profile_is_flagged_by_exit_status() {
    let o = wce(&["fit", "--data", &data_file("table2.csv"), "--profile", "0.9,0.95,0.01"]);
    let r: Value = serde_json::from_slice(&o.stdout).unwrap();
    let beta = r["beta"].as_f64().unwrap();
    match code(&o) {
        0 => assert!(beta > 1.0 && r["converged"] == true),
        5 => assert_eq!(r["converged"], false),
        6 => assert!(beta < 1.0),
        c => panic!("unexpected exit code {c}"),
    }
}

#[test]
fn error_classes_have_distinct_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "ts_tilde,stage_start,excluded\n100,-1,0\n").unwrap();
    let o = wce(&["fit", "--data", bad.to_str().unwrap()]);
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"));

    let empty = dir.path().join("empty.csv");
    std::fs::write(&empty, "ts_tilde,stage_start,excluded\n").unwrap();
    assert_eq!(code(&wce(&["fit", "--data", empty.to_str().unwrap()])), 4);

    let bins = dir.path().join("bins.json");
    std::fs::write(&bins, r#"{"788400": [14, 12]}"#).unwrap();
    let o = wce(&["gof", "--data", &data_file("table2.csv"), "--params", FITTED, "--bins", bins.to_str().unwrap()]);
    assert_eq!(code(&o), 4);

    assert_eq!(code(&wce(&["fit"])), 2);
    assert_eq!(code(&wce(&["fit", "--data", &data_file("table2.csv"), "--init", "1,2"])), 2);
}

#[test]
fn gof_without_replicates_reports_observed_statistics() {
    let o = wce(&[
        "gof", "--data", &data_file("table2.csv"), "--params", FITTED, "--bins", &data_file("table3_bins.json"),
        "--replicates", "0",
    ]);
    assert_eq!(code(&o), 0);
    let r: Value = serde_json::from_slice(&o.stdout).unwrap();
    let t: Vec<f64> = r["observed"].as_array().unwrap().iter().map(|g| g["statistic"].as_f64().unwrap()).collect();
    for (a, b) in t.iter().zip([26.22508, 3.572318, 13.19004]) {
        assert!((a - b).abs() < 1e-3);
    }
    assert_eq!(r["replicates_used"], 0);
}

#[test]
fn simulate_round_trips_into_fit() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sim.csv");
    let o = wce(&[
        "simulate", "--params", FITTED, "--template", &data_file("table2_template.csv"), "--seed", "3", "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0);
    let text = std::fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().count(), 75);
    assert!(text.starts_with("ts_tilde,stage_start,excluded\n"));
    assert!(dir.path().join("sim.csv.manifest.json").exists());
    let o = wce(&["fit", "--data", out.to_str().unwrap(), "--profile", "0.85,0.999,0.001", "--init", FITTED]);
    let r: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(r["converged"], true);
}

#[test]
fn curves_cover_the_reference_grid() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("curves.csv");
    let plots = dir.path().join("plots");
    let o = wce(&[
        "curves", "--table1", "--grid", "1e3:1e7:50log", "--out", out.to_str().unwrap(), "--emit-plot-data",
        plots.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0);
    let mut rdr = csv::Reader::from_path(&out).unwrap();
    assert_eq!(
        rdr.headers().unwrap().iter().collect::<Vec<_>>(),
        ["k_tilde", "dv", "v_th", "beta", "n", "ts_tilde", "mean_norm", "sd_norm"]
    );
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 54 * 50);
    assert!(rows.iter().all(|r| r.iter().all(|f| f.parse::<f64>().unwrap().is_finite())));
    let csvs = std::fs::read_dir(&plots).unwrap().filter(|e| e.as_ref().unwrap().path().extension().unwrap() == "csv").count();
    assert_eq!(csvs, 54);
}

#[test]
fn exponential_curve_is_flat() {
    let o = wce(&["curves", "--params", "1,2,1,0.5", "--grid", "0:1e6:5lin"]);
    assert_eq!(code(&o), 0);
    let mut rdr = csv::Reader::from_reader(o.stdout.as_slice());
    let means: Vec<f64> = rdr.records().map(|r| r.unwrap()[6].parse().unwrap()).collect();
    assert_eq!(means.len(), 5);
    assert!(means.iter().all(|m| (m - means[0]).abs() < 1e-12 * means[0]));
}
