use std::io::Write;
use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_microtwin"))
        .args(args)
        .env_remove("MICROTWIN_WORKERS")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn csv_rows(o: &Output) -> Vec<Vec<String>> {
    stdout(o)
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_owned).collect())
        .collect()
}

fn config(text: &str) -> tempfile::NamedTempFile {
    let mut f = tempfile::Builder::new().suffix(".toml").tempfile().unwrap();
    f.write_all(text.as_bytes()).unwrap();
    f
}

#[test]
fn am_table_rows() {
    let o = run(&["am-table", "--m", "2,19"]);
    assert!(o.status.success());
    let rows = csv_rows(&o);
    assert_eq!(rows.len(), 2);
    let a2: f64 = rows[0][1].parse().unwrap();
    let a19: f64 = rows[1][1].parse().unwrap();
    assert!((a2 - 1.24362).abs() < 1e-4);
    assert!((a19 - 1.24105).abs() < 1e-4);
    assert!(a19 < a2);
}

#[test]
fn g_table_marks_six() {
    let o = run(&["g-table"]);
    assert!(o.status.success());
    let rows = csv_rows(&o);
    let marked: Vec<&Vec<String>> = rows.iter().filter(|r| r[3] == "*").collect();
    assert_eq!(marked.len(), 1);
    assert_eq!(marked[0][0], "6");
    let m3 = rows.iter().find(|r| r[0] == "3").unwrap();
    assert!((m3[1].parse::<f64>().unwrap() + 0.0657517).abs() < 1e-6);
    let m50 = rows.iter().find(|r| r[0] == "50").unwrap();
    assert!((m50[1].parse::<f64>().unwrap() + 0.0454861).abs() < 1e-6);
}

#[test]
fn constants_json() {
    let o = run(&["constants", "--format", "json"]);
    assert!(o.status.success());
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["schema"], "microtwin/1");
    assert_eq!(v["pass"], true);
    let rows = v["rows"].as_array().unwrap();
    let well = rows.iter().find(|r| r["name"].as_str().unwrap().starts_with("lj_well")).unwrap();
    assert_eq!(well["published"], 1.12246);
    assert!((well["computed"].as_f64().unwrap() - 2f64.powf(1.0 / 6.0)).abs() < 1e-10);
}

#[test]
fn jump_threshold_and_sigma_scaling() {
    let o = run(&["jump-threshold", "--sigma", "2"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for row in csv_rows(&o) {
        assert!((row[1].parse::<f64>().unwrap() - 0.603431).abs() < 1e-5);
    }
}

#[test]
fn taylor_verify_one_jump_passes() {
    let o = run(&["taylor-verify", "--mode", "one-jump", "--format", "json"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["rows"].as_array().unwrap().len(), 5);
    assert!(v["checks"].as_array().unwrap().iter().all(|c| c["pass"] == true));
}

#[test]
fn taylor_verify_linear_smooth_residual_tiny() {
    let cfg = config("[deformation]\nbreakpoints = [-1.0, 1.0]\npieces = [[0.0, 1.1]]\n");
    let o = run(&["taylor-verify", "--mode", "smooth", "--config", cfg.path().to_str().unwrap()]);
    let rows = csv_rows(&o);
    let last: f64 = rows.last().unwrap()[5].parse().unwrap();
    assert!(last < 1e-8, "{last}");
}

#[test]
fn microtwin_equal_slopes_qm_has_no_interaction_terms() {
    let cfg = config(
        "[deformation]\nbreakpoints = [-1.0, 0.0, 1.0]\npieces = [[0.0, 1.1193, 0.025], [0.0, 1.1193, 0.025]]\n",
    );
    let o = run(&["taylor-verify", "--mode", "microtwin", "--m", "3", "--format", "json", "--config", cfg.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    let interaction = v["checks"].as_array().unwrap().iter().find(|c| c["name"] == "interaction").unwrap();
    assert_eq!(interaction["pass"], true);
}

#[test]
fn output_is_identical_across_worker_counts() {
    for args in [&["g-table"][..], &["taylor-verify", "--mode", "microtwin"][..], &["invert-potential"][..]] {
        let one = run(&[args, &["--workers", "1"]].concat());
        let three = Command::new(env!("CARGO_BIN_EXE_microtwin"))
            .args(args)
            .env("MICROTWIN_WORKERS", "3")
            .output()
            .unwrap();
        assert!(one.status.success());
        assert_eq!(one.stdout, three.stdout, "{args:?}");
    }
}

#[test]
fn out_flag_and_config_values() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("table.json");
    let cfg = config(&format!("format = \"json\"\nm = [4]\nout = {:?}\n", path.to_str().unwrap()));
    let o = run(&["am-table", "--config", cfg.path().to_str().unwrap()]);
    assert!(o.status.success());
    assert!(o.stdout.is_empty());
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(v["rows"][0]["m"], 4);
    // flags win over the file
    let o = run(&["am-table", "--config", cfg.path().to_str().unwrap(), "--m", "5", "--format", "csv", "--out", path.to_str().unwrap()]);
    assert!(o.status.success());
    assert!(std::fs::read_to_string(&path).unwrap().starts_with("m,a_m,published\r\n5,"));
}

#[test]
fn bad_input_exits_nonzero() {
    let cfg = config("tolerance = 1e-3\n");
    let o = run(&["constants", "--config", cfg.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("unknown field"));
    assert_eq!(run(&["am-table", "--m", "1"]).status.code(), Some(2));
    assert_eq!(run(&["g-table", "--tol", "-1"]).status.code(), Some(2));
}

#[test]
fn failing_check_exits_one() {
    // a loose bisection tolerance cannot reproduce the published a_m
    let o = run(&["am-table", "--m", "2", "--tol", "0.01"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("FAIL: table"));
}

#[test]
fn profile_min_unequal_slopes() {
    let o = run(&["profile-min", "--m", "3", "--a", "1.0", "--b", "1.2", "--starts", "3"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = csv_rows(&o);
    let dist: f64 = rows[0][5].parse().unwrap();
    assert!(dist > 1e-4, "unequal slopes should move the chain off q_m");
}
