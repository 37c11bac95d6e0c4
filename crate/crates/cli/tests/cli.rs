use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = "[time]\nt_end = 1.0\ndt = 0.05\n\n[mesh]\nh = 0.05\n";

fn run(dir: &Path, args: &[&str]) -> Output {
    let cfg = dir.join("small.ini");
    if !cfg.exists() {
        fs::write(&cfg, SMALL).unwrap();
    }
    Command::new(env!("CARGO_BIN_EXE_elastocontrol"))
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.join("out"))
        .args(args)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn value_of(text: &str, key: &str) -> f64 {
    text.lines()
        .find_map(|l| l.strip_prefix(key).and_then(|r| r.trim().strip_prefix('=')))
        .unwrap_or_else(|| panic!("no {key} in {text}"))
        .trim()
        .parse()
        .unwrap()
}

#[test]
fn forward_with_zero_control_is_at_rest() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["forward"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = dir.path().join("out");
    let state = fs::read_to_string(out.join("state.csv")).unwrap();
    let mut lines = state.lines();
    assert!(lines.next().unwrap().starts_with("t,"));
    for line in lines {
        assert!(line.split(',').skip(1).all(|v| v.parse::<f64>().unwrap() == 0.0), "{line}");
    }
    for f in ["pressure.csv", "u_snapshots.csv", "udot_snapshots.csv", "config.ini"] {
        assert!(out.join(f).exists(), "{f}");
    }
    assert_eq!(value_of(&stdout(&o), "J"), 0.0);
}

#[test]
fn invalid_value_names_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["--set", "physics.kappa=-1", "forward"]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("physics.kappa"));
    let o = run(dir.path(), &["--set", "physics.nonsense=1", "forward"]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("physics.nonsense"));
}

#[test]
fn written_config_reproduces_itself() {
    let dir = tempfile::tempdir().unwrap();
    assert!(run(dir.path(), &["--set", "physics.alpha=0.004", "forward"]).status.success());
    let first = fs::read_to_string(dir.path().join("out/config.ini")).unwrap();
    let copy = dir.path().join("copy.ini");
    fs::write(&copy, &first).unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_elastocontrol"))
        .args(["--config", copy.to_str().unwrap(), "--out", dir.path().join("out2").to_str().unwrap(), "forward"])
        .output()
        .unwrap();
    assert!(o.status.success());
    let second = fs::read_to_string(dir.path().join("out2/config.ini")).unwrap();
    assert_eq!(first.replace("out2", "out"), second.replace("out2", "out"));
}

#[test]
fn seedless_gradcheck_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["--seedless", "gradcheck", "--directions", "2", "--tau", "0.5"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let worst = value_of(&stdout(&o), "worst best relative error");
    assert!(worst <= 5e-2, "{worst}");
    let report = fs::read_to_string(dir.path().join("out/gradcheck.csv")).unwrap();
    assert!(report.starts_with("direction,h,analytic,fd,abs_error,rel_error\n"));
}

#[test]
fn optimized_control_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["--set", "optimizer.max_iters=3", "optimize"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = dir.path().join("out");
    let summary = fs::read_to_string(out.join("summary.txt")).unwrap();
    let j = value_of(&summary, "J");
    assert!(j > 0.0);
    for f in ["iterations.csv", "control.csv", "xi_snapshots.csv", "pressure.csv"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let control = out.join("control.csv");
    let o = run(dir.path(), &["forward", "--control", control.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(value_of(&stdout(&o), "J"), j);
}

#[test]
fn adjoint_writes_trajectory() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["adjoint", "--tau", "0.5"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(dir.path().join("out/adjoint.csv")).unwrap();
    assert!(text.starts_with("t,"));
    assert_eq!(text.lines().count(), 22);
}

#[test]
fn selftest_passes() {
    let o = Command::new(env!("CARGO_BIN_EXE_elastocontrol")).arg("selftest").output().unwrap();
    assert!(o.status.success(), "{}", stdout(&o));
    assert!(stdout(&o).lines().all(|l| l.starts_with("PASS")));
}
