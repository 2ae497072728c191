use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

const INSTANCE: &str = r#"{
    "operator": {"kind": "identity", "dim": 1},
    "multimap": {"matrix": [[1.0]], "offset": [0.0], "shape": {"kind": "box", "half_width": [1.0]}},
    "control": {"radius": 1.0},
    "cost": {"q_control": 1.0, "lin_control": [0.2], "lin_terminal": [1.0]},
    "parameters": {"kind": "interval", "lo": 0.0, "hi": 1.0},
    "grid": {"horizon": 1.0, "steps": 25},
    "xi": [0.2]
}"#;

struct Run {
    code: i32,
    out: PathBuf,
    stderr: String,
}

fn evinc(dir: &Path, command: &str, config: &str, extra: &[&str], env: &[(&str, &str)]) -> Run {
    fs::write(dir.join("instance.json"), INSTANCE).unwrap();
    let cfg = dir.join(format!("{command}.json"));
    fs::write(&cfg, config).unwrap();
    let out = dir.join(format!("out-{command}-{}", extra.join("_").replace('-', "")));
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_evinc"));
    cmd.arg(command).arg(&cfg).arg("--out").arg(&out).args(extra);
    for (k, v) in env {
        cmd.env(k, v);
    }
    let o = cmd.output().unwrap();
    Run {
        code: o.status.code().unwrap(),
        out,
        stderr: String::from_utf8_lossy(&o.stderr).into_owned(),
    }
}

fn read(p: &Path) -> String {
    fs::read_to_string(p).unwrap()
}

#[test]
fn solve_writes_one_row_per_node() {
    let dir = tempfile::tempdir().unwrap();
    let r = evinc(dir.path(), "solve", r#"{"instance": "instance.json"}"#, &[], &[]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let csv = read(&r.out.join("trajectory.csv"));
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "t,x_0,f_0");
    assert_eq!(lines.len() - 1, 26);
    let meta: serde_json::Value = serde_json::from_str(&read(&r.out.join("metadata.json"))).unwrap();
    assert_eq!(meta["command"], "solve");
    assert_eq!(meta["outputs"][0], "trajectory.csv");
}

#[test]
fn filippov_with_zero_defect_passes_everywhere() {
    let dir = tempfile::tempdir().unwrap();
    // h ≡ 0.5 lies in [x − 1, x + 1] along the reference, so the defect vanishes
    let cfg = r#"{"instance": "instance.json", "filippov": {"forcing": [0.5], "epsilon": 0.01}}"#;
    let r = evinc(dir.path(), "filippov", cfg, &[], &[]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let csv = read(&r.out.join("certificate.csv"));
    let mut rows = csv.lines();
    assert_eq!(rows.next().unwrap(), "t,tau,defect,bound,deviation,pass");
    for row in rows {
        let cols: Vec<&str> = row.split(',').collect();
        assert_eq!(cols[2].parse::<f64>().unwrap(), 0.0);
        assert_eq!(cols[5], "true");
    }
    assert!(r.out.join("iterates.csv").exists());
}

#[test]
fn sweep_is_byte_identical_across_runs_and_worker_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"{"instance": "instance.json", "seed": 4, "budget": 2,
        "xi_grid": [[0.0], [0.5], [1.0]], "lambda_grid": [0.0, 0.5, 1.0]}"#;
    let a = evinc(dir.path(), "sweep", cfg, &[], &[("EVINC_WORKERS", "1")]);
    assert_eq!(a.code, 0, "{}", a.stderr);
    let first = (read(&a.out.join("surface.csv")), read(&a.out.join("metadata.json")));
    fs::remove_dir_all(&a.out).unwrap();
    let b = evinc(dir.path(), "sweep", cfg, &[], &[("EVINC_WORKERS", "4")]);
    assert_eq!(b.code, 0, "{}", b.stderr);
    assert_eq!(first.0, read(&b.out.join("surface.csv")));
    assert_eq!(first.1, read(&b.out.join("metadata.json")));
    assert_eq!(first.0.lines().count(), 10);
}

#[test]
fn seed_override_lands_in_metadata() {
    let dir = tempfile::tempdir().unwrap();
    let r = evinc(dir.path(), "optimize", r#"{"instance": "instance.json", "seed": 1}"#, &["--seed", "99"], &[]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let meta: serde_json::Value = serde_json::from_str(&read(&r.out.join("metadata.json"))).unwrap();
    assert_eq!(meta["seed"], 99);
    assert_eq!(meta["run"]["seed"], 99);
    assert_eq!(meta["summary"]["admissible"], true);
}

#[test]
fn invalid_input_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let unknown_field = evinc(dir.path(), "solve", r#"{"instance": "instance.json", "bogus": 1}"#, &[], &[]);
    assert_eq!(unknown_field.code, 1);
    let wrong_command = evinc(dir.path(), "solve", r#"{"command": "sweep", "instance": "instance.json"}"#, &[], &[]);
    assert_eq!(wrong_command.code, 1);
    let no_command = evinc(dir.path(), "frobnicate", r#"{}"#, &[], &[]);
    assert_eq!(no_command.code, 1);
    let workers = evinc(dir.path(), "solve", r#"{"instance": "instance.json"}"#, &[], &[("EVINC_WORKERS", "zero")]);
    assert_eq!(workers.code, 1);
}

#[test]
fn failed_check_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    // a tolerance of zero on the set distance cannot be met by a moving sequence
    let cfg = r#"{"instance": "instance.json", "budget": 2, "tolerances": {"set": 0.0},
        "sequence": {"count": 3, "xi_direction": [1.0]}}"#;
    let r = evinc(dir.path(), "usc", cfg, &[], &[]);
    assert_eq!(r.code, 3, "{}", r.stderr);
    let meta: serde_json::Value = serde_json::from_str(&read(&r.out.join("metadata.json"))).unwrap();
    assert_eq!(meta["outcome"], "fail");
}

#[test]
fn validate_reports_checks() {
    let dir = tempfile::tempdir().unwrap();
    // F has linear growth 1 against coercivity 1, so only the smallness row fails
    let r = evinc(dir.path(), "validate", r#"{"instance": "instance.json", "samples": 200}"#, &[], &[]);
    assert_eq!(r.code, 3, "{}", r.stderr);
    let csv = read(&r.out.join("checks.csv"));
    assert!(csv.starts_with("check,value,pass\n"));
    let failing: Vec<&str> = csv.lines().filter(|l| l.ends_with(",false")).collect();
    assert_eq!(failing.len(), 1);
    assert!(failing[0].starts_with("smallness_c3,"));
    assert_eq!(csv.lines().count(), 7);
}

#[test]
fn numerical_failure_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    // one Filippov iteration cannot close a defect of size 4
    let cfg = r#"{"instance": "instance.json", "filippov": {"forcing": [5.0], "epsilon": 1e-9, "max_iter": 1}}"#;
    let r = evinc(dir.path(), "filippov", cfg, &[], &[]);
    assert_eq!(r.code, 2, "{}", r.stderr);
}
