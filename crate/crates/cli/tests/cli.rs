use std::path::Path;
use std::process::{Command, Output};

use bbem_core::kernels::{brinkman_velocity_tensor, BrinkmanParams, Vec3};

fn bbem(args: &[&str], threads: Option<usize>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_bbem"));
    cmd.args(args);
    match threads {
        Some(n) => cmd.env("BBEM_THREADS", n.to_string()),
        None => cmd.env_remove("BBEM_THREADS"),
    };
    cmd.output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_config(dir: &Path, name: &str, json: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, json).unwrap();
    path.to_str().unwrap().to_string()
}

const NEUMANN: &str = r#"{
    "problem": "NEUMANN",
    "geometry": {"type": "icosphere", "level": 1, "radius": 1.0},
    "params": {"alpha": 1.0},
    "data": {"type": "manufactured", "source_point": [0.96, 1.2, 1.28], "column": 2},
    "volume_resolution": 8
}"#;

#[test]
fn kernels_command_prints_the_tensor() {
    let o = bbem(&["kernels", "--eval", "0.3,-0.4,1.2", "--alpha", "2"], None);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let g = brinkman_velocity_tensor(&Vec3::new(0.3, -0.4, 1.2), &BrinkmanParams::brinkman(2.0)).unwrap();
    for i in 0..3 {
        for j in 0..3 {
            let got = v["G"][i][j].as_f64().unwrap();
            assert!((got - g[(i, j)]).abs() <= 1e-15 * g[(i, j)].abs().max(1e-300));
        }
    }
    assert_eq!(v["Pi"].as_array().unwrap().len(), 3);
}

#[test]
fn kernels_at_the_origin_is_a_numerical_failure() {
    let o = bbem(&["kernels", "--eval", "0,0,0"], None);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("coincident"));
}

#[test]
fn malformed_point_and_negative_alpha_are_usage_errors() {
    assert_eq!(code(&bbem(&["kernels", "--eval", "1,2"], None)), 2);
    assert_eq!(code(&bbem(&["kernels", "--eval", "1,2,3", "--alpha", "-1"], None)), 2);
}

#[test]
fn unknown_suite_is_a_usage_error() {
    let o = bbem(&["verify", "--suite", "nope"], None);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("nope"));
}

#[test]
fn kernel_suite_passes_and_prints_one_line_per_check() {
    let o = bbem(&["verify", "--suite", "kernels"], None);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    let out = stdout(&o);
    assert!(out.lines().filter(|l| l.starts_with("pass ")).count() >= 10);
    assert!(!out.contains("FAIL"));
    assert!(out.lines().last().unwrap().contains("passed"));
}

#[test]
fn missing_key_names_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", &NEUMANN.replace(r#""params": {"alpha": 1.0},"#, ""));
    let o = bbem(&["solve", "--config", &cfg], None);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("params"), "{}", stderr(&o));
}

#[test]
fn source_inside_the_domain_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", &NEUMANN.replace("[0.96, 1.2, 1.28]", "[0.1, 0.0, 0.0]"));
    let o = bbem(&["solve", "--config", &cfg], None);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("manufactured source"), "{}", stderr(&o));
}

#[test]
fn solve_writes_deterministic_reports() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", NEUMANN);
    let mut reports = Vec::new();
    for (k, threads) in [(0, 1), (1, 4), (2, 4)] {
        let out = dir.path().join(format!("run{k}"));
        let o = bbem(&["solve", "--config", &cfg, "--out", out.to_str().unwrap()], Some(threads));
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        let report = std::fs::read(out.join("report.json")).unwrap();
        let fields = std::fs::read(out.join("fields.csv")).unwrap();
        reports.push((report, fields));
    }
    assert_eq!(reports[0], reports[1]);
    assert_eq!(reports[1], reports[2]);
    let v: serde_json::Value = serde_json::from_slice(&reports[0].0).unwrap();
    assert_eq!(v["problem"], "NEUMANN");
    assert!(v["residual_l2"].as_f64().unwrap() < 1e-8);
    assert!(v["errors"]["interior_l2"].as_f64().unwrap() < 0.1);
    let csv = String::from_utf8(reports[0].1.clone()).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "x,y,z,u,v,w,p");
}

#[test]
fn single_level_convergence_has_an_empty_ratio() {
    let dir = tempfile::tempdir().unwrap();
    let text = NEUMANN.replace(r#""volume_resolution": 8"#, r#""levels": [1]"#);
    let cfg = write_config(dir.path(), "c.json", &text);
    let out = dir.path().join("conv");
    let o = bbem(&["converge", "--config", &cfg, "--out", out.to_str().unwrap()], None);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let csv = std::fs::read_to_string(out.join("convergence.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[0].starts_with("level,n_panels,"));
    assert!(lines[1].starts_with("1,80,"));
    assert!(lines[1].ends_with(','));
}

#[test]
fn oversized_study_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    let text = NEUMANN.replace(r#""volume_resolution": 8"#, r#""levels": [1, 5]"#);
    let cfg = write_config(dir.path(), "c.json", &text);
    let o = bbem(&["converge", "--config", &cfg], None);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("budget"), "{}", stderr(&o));
}
