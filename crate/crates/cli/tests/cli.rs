use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use biphoton::fixtures::{Reference, TABLE_JSON};
use biphoton::fringe::{read_csv, write_csv, FringeData};
use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_biphoton"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stderr_json(out: &Output) -> Value {
    let text = String::from_utf8(out.stderr.clone()).unwrap();
    assert_eq!(text.trim_end().lines().count(), 1, "{text}");
    serde_json::from_str(text.trim_end()).unwrap()
}

fn table_file(dir: &Path) -> PathBuf {
    let p = dir.join("table.json");
    std::fs::write(&p, TABLE_JSON).unwrap();
    p
}

#[test]
fn simulate_fringe_four_steps() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("fringe.csv");
    let o = run(&[
        "simulate-fringe",
        "--R",
        "0",
        "--V",
        "1",
        "--theta",
        "1.5707963",
        "--steps",
        "4",
        "--phi-start",
        "0",
        "--phi-end",
        "3.14159265358979",
        "--out",
        path_str(&out),
    ]);
    assert!(o.status.success(), "{o:?}");
    let text = std::fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("phi,p20,p11,p02"));
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 4);
    for r in &rows {
        assert!((r[1] + r[2] + r[3] - 1.0).abs() < 1e-12);
    }
    let manifest: Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("fringe.csv.manifest.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(manifest["command"], "simulate-fringe");
    assert!(manifest["versions"]["biphoton"].is_string());
}

#[test]
fn outputs_round_trip_through_parsers() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("p.csv");
    assert!(run(&[
        "simulate-fringe",
        "--R",
        "0.1",
        "--V",
        "0.9",
        "--out",
        path_str(&out)
    ])
    .status
    .success());
    let bytes = std::fs::read(&out).unwrap();
    let scan = read_csv(bytes.as_slice(), std::f64::consts::FRAC_PI_2).unwrap();
    assert!(matches!(scan.data(), FringeData::Probabilities(p) if p.len() == 50));
    let mut again = Vec::new();
    write_csv(&scan, &mut again).unwrap();
    assert_eq!(again, bytes);
}

#[test]
fn synth_counts_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    let c = dir.path().join("c.csv");
    for (p, seed) in [(&a, "7"), (&b, "7"), (&c, "8")] {
        let o = run(&[
            "synth-counts",
            "--R",
            "0.024",
            "--V",
            "0.98",
            "--seed",
            seed,
            "--out",
            path_str(p),
        ]);
        assert!(o.status.success(), "{o:?}");
    }
    let (a, b, c) = (
        std::fs::read(a).unwrap(),
        std::fs::read(b).unwrap(),
        std::fs::read(c).unwrap(),
    );
    assert_eq!(a, b);
    assert_ne!(a, c);
    assert!(String::from_utf8(a)
        .unwrap()
        .starts_with("phi,count20,count11,count02\n"));
}

#[test]
fn synth_counts_requires_seed() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("a.csv");
    let o = run(&["synth-counts", "--out", path_str(&out)]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(stderr_json(&o)["error"], "validation");
    assert!(!out.exists());
}

#[test]
fn simulate_synthesize_fit_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let probs = dir.path().join("p.csv");
    let counts = dir.path().join("c.csv");
    let fit = dir.path().join("fit.json");
    assert!(run(&[
        "simulate-fringe",
        "--R",
        "0.024",
        "--V",
        "0.98",
        "--out",
        path_str(&probs)
    ])
    .status
    .success());
    let o = run(&[
        "synth-counts",
        "--in",
        path_str(&probs),
        "--seed",
        "3",
        "--out",
        path_str(&counts),
    ]);
    assert!(o.status.success(), "{o:?}");
    let o = run(&[
        "fit-fringe",
        "--in",
        path_str(&counts),
        "--out",
        path_str(&fit),
    ]);
    assert!(o.status.success(), "{o:?}");
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&fit).unwrap()).unwrap();
    assert!((v["V"].as_f64().unwrap() - 0.98).abs() < 0.02, "{v}");
    assert!((v["R"].as_f64().unwrap() - 0.024).abs() < 0.02, "{v}");
    assert_eq!(v["converged"], true);
    assert_eq!(v["visibility"].as_array().unwrap().len(), 3);
}

#[test]
fn linear_reconstruction_of_reference_table() {
    let dir = tempfile::tempdir().unwrap();
    let input = table_file(dir.path());
    let out = dir.path().join("rho.json");
    let o = run(&[
        "tomo-reconstruct",
        "--in",
        path_str(&input),
        "--method",
        "linear",
        "--out",
        path_str(&out),
    ]);
    assert!(o.status.success(), "{o:?}");
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert!(v.get("rho_ml").is_none());
    let want = Reference::load().unwrap().rho_raw_printed();
    let mut worst: f64 = 0.0;
    for r in 0..3 {
        for c in 0..3 {
            let re = v["rho_raw"]["re"][r][c].as_f64().unwrap();
            let im = v["rho_raw"]["im"][r][c].as_f64().unwrap();
            worst = worst
                .max((re - want[(r, c)].re).abs())
                .max((im - want[(r, c)].im).abs());
        }
    }
    assert!(worst <= 0.015, "largest entry deviation {worst}");
}

#[test]
fn both_methods_report_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let input = table_file(dir.path());
    let out = dir.path().join("rho.json");
    let o = run(&[
        "tomo-reconstruct",
        "--in",
        path_str(&input),
        "--out",
        path_str(&out),
        "--shots",
        "10000",
    ]);
    assert!(o.status.success(), "{o:?}");
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    let ev = v["eigenvalues_ml"].as_array().unwrap();
    assert!(ev.iter().all(|x| x.as_f64().unwrap() > -1e-12));
    assert!(v["eigenvalues_raw"][2].as_f64().unwrap() < 0.0);
    assert_eq!(v["converged"], true);
    let d = v["trace_norm_distance"].as_f64().unwrap();
    assert!((d - 2.0 * v["trace_distance"].as_f64().unwrap()).abs() < 1e-12);
}

#[test]
fn tomo_verify_reports_residuals() {
    let dir = tempfile::tempdir().unwrap();
    let input = table_file(dir.path());
    let out = dir.path().join("verify.json");
    let o = run(&[
        "tomo-verify",
        "--in",
        path_str(&input),
        "--out",
        path_str(&out),
        "--tolerance-report",
    ]);
    assert!(o.status.success(), "{o:?}");
    let stdout = String::from_utf8(o.stdout).unwrap();
    assert_eq!(
        stdout.lines().filter(|l| l.starts_with("PASS")).count(),
        3,
        "{stdout}"
    );
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(v["within_limit"], true);
    assert!(v["residuals"]["residual_lz"].as_f64().unwrap() <= 0.05);
}

#[test]
fn malformed_json_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("bad.json");
    std::fs::write(&input, "{\"directions\": [").unwrap();
    let out = dir.path().join("rho.json");
    let o = run(&[
        "tomo-reconstruct",
        "--in",
        path_str(&input),
        "--out",
        path_str(&out),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(stderr_json(&o)["exit"], 1);
    assert!(!out.exists());
    assert!(!dir.path().join("rho.json.manifest.json").exists());
}

#[test]
fn error_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x.json");
    let o = run(&["no-such-command"]);
    assert_eq!(o.status.code(), Some(1));
    stderr_json(&o);
    let o = run(&["simulate-fringe", "--R", "1.5", "--out", path_str(&out)]);
    assert_eq!(o.status.code(), Some(1));
    let o = run(&[
        "tomo-verify",
        "--in",
        path_str(&dir.path().join("missing.json")),
        "--out",
        path_str(&out),
    ]);
    assert_eq!(o.status.code(), Some(3));
    assert_eq!(stderr_json(&o)["error"], "io");
    let o = run(&[
        "simulate-fringe",
        "--out",
        path_str(&dir.path().join("nodir").join("x.csv")),
    ]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn replicate_report_names_failures() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("report.json");
    let o = run(&["replicate-paper", "--seed", "5", "--out", path_str(&out)]);
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    let criteria = v["criteria"].as_array().unwrap();
    assert_eq!(criteria.len(), 11);
    let stdout = String::from_utf8(o.stdout.clone()).unwrap();
    assert_eq!(
        stdout
            .lines()
            .filter(|l| l.starts_with("criterion"))
            .count(),
        11
    );
    let eig = &criteria[1]["checks"];
    assert_eq!(eig[0]["bound"]["expected"], 1.017);
    let failed: Vec<u64> = criteria
        .iter()
        .filter(|c| c["passed"] == false)
        .map(|c| c["id"].as_u64().unwrap())
        .collect();
    if failed.is_empty() {
        assert!(o.status.success());
    } else {
        assert_eq!(o.status.code(), Some(2));
        let msg = stderr_json(&o)["message"].as_str().unwrap().to_string();
        for id in failed {
            assert!(msg.contains(&format!("criterion {id}")), "{msg}");
        }
    }
}
