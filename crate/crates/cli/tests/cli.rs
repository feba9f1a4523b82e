use std::path::PathBuf;
use std::process::{Command, Output};

fn lpimprove(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lpimprove"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("lpimprove-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

#[test]
fn kernel_dump_square() {
    let out = lpimprove(&["kernel", "dump", "--kind", "poly", "--d", "2", "--n", "3"]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    // weights 1/3 at -9, -4, -1
    assert_eq!(v["offset"], -9);
    let values: Vec<f64> = serde_json::from_value(v["values"].clone()).unwrap();
    assert_eq!(values.len(), 9);
    for (i, w) in values.iter().enumerate() {
        let expected = if [0, 5, 8].contains(&i) { 1.0 / 3.0 } else { 0.0 };
        assert!((w - expected).abs() < 1e-15);
    }

    let csv = lpimprove(&["kernel", "dump", "--kind", "primes", "--n", "10", "--format", "csv"]);
    let text = stdout(&csv);
    assert!(text.starts_with("index,value\n2,"));
}

#[test]
fn apply_delta_and_random() {
    let out = lpimprove(&["apply", "--kind", "poly", "--n", "2", "--delta", "5"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let s: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    // mass 1/2 at 5 - 4 and 5 - 1
    assert_eq!(s["offset"], 1);
    assert_eq!(s["values"], serde_json::json!([0.5, 0.0, 0.0, 0.5]));

    let a = lpimprove(&["--seed", "3", "apply", "--kind", "primes", "--n", "50", "--random", "40"]);
    let b = lpimprove(&["--seed", "3", "apply", "--kind", "primes", "--n", "50", "--random", "40"]);
    let c = lpimprove(&["--seed", "4", "apply", "--kind", "primes", "--n", "50", "--random", "40"]);
    assert_eq!(a.stdout, b.stdout);
    assert_ne!(a.stdout, c.stdout);
}

#[test]
fn ratio_delta_square() {
    let out = lpimprove(&["ratio", "--kind", "poly", "--d", "2", "--n", "4", "--p", "2"]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert!((v["ratio"].as_f64().unwrap() - 0.5).abs() < 1e-14);
    let bad = lpimprove(&["ratio", "--kind", "fracint", "--n", "4", "--p", "2", "--lambda", "0.5"]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn sweep_config_with_overrides() {
    let config = scratch("sweep.json");
    let csv = scratch("sweep.csv");
    let gp = scratch("sweep.dat");
    let json = scratch("report.json");
    std::fs::write(
        &config,
        r#"{"operator": {"kind": "poly", "d": 2}, "p": [2.0], "nGrid": {"start": 16, "factor": 2, "count": 5}, "input": {"family": "delta"}}"#,
    )
    .unwrap();
    let out = lpimprove(&[
        "sweep",
        "--config",
        config.to_str().unwrap(),
        "--p",
        "1.4,2",
        "--csv",
        csv.to_str().unwrap(),
        "--gnuplot",
        gp.to_str().unwrap(),
        "--json",
        json.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let table = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(table.lines().count(), 11);
    assert!(table.lines().nth(1).unwrap().starts_with("poly,2,1.4,3.5000000000000004,16,"));
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(report["fits"][0]["verdict"], "growing");
    assert_eq!(report["fits"][1]["verdict"], "shrinking");
    assert!(std::fs::read_to_string(&gp).unwrap().contains("# p = 1.4"));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("p = 1.4: slope +0.1429"));
}

#[test]
fn sweep_rejects_bad_config() {
    let out = lpimprove(&["sweep", "--kind", "quadratic", "--abc", "0,1,1", "--p", "2"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("a >= 1"));
    let out = lpimprove(&["sweep", "--p", "2.5"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn extremize_small_window() {
    let out = lpimprove(&["extremize", "--kind", "poly", "--n", "2", "--p", "2", "--window=-64,64", "--tol", "1e-14", "--max-iter", "100000"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    let ratio = v["ratio"].as_f64().unwrap();
    // two-point average: the top singular value approaches the mass 1 from below
    assert!(ratio < 1.0 && ratio > 0.99);
    assert_eq!(v["window"], serde_json::json!([-64, 64]));
}

#[test]
fn primes_check_passes() {
    let out = lpimprove(&["primes", "check", "--limit", "2000", "--nth-max", "5000"]);
    assert!(out.status.success());
    assert!(stdout(&out).contains("303 primes, 0 mismatches"));
}

#[test]
fn check_all_subset_and_fault_injection() {
    let out = lpimprove(&["check-all", "--only", "1,7"]);
    assert!(out.status.success(), "{}", stdout(&out));
    let text = stdout(&out);
    assert!(text.contains("[PASS]  1 ") && text.contains("[PASS]  7 "));

    let broken = lpimprove(&["check-all", "--only", "1", "--inject-mass-scale", "2"]);
    assert_eq!(broken.status.code(), Some(1));
    assert!(stdout(&broken).contains("[FAIL]  1 "));
}
