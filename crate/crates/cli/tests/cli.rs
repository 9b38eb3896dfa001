use std::fs;
use std::process::Command;

fn vgnep() -> Command {
    Command::new(env!("CARGO_BIN_EXE_vgnep"))
}

#[test]
fn cycles_run_writes_trace_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let prefix = dir.path().join("c");
    let out = vgnep()
        .args(["cycles", "--iters", "200", "--seed", "3", "--out"])
        .arg(&prefix)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("c_hsdm_init0.csv")).unwrap();
    assert!(csv.starts_with("iter,fix_residual,cycle_residual,cost_1"));
    let summary = fs::read_to_string(dir.path().join("c_summary.txt")).unwrap();
    assert!(summary.contains("family = cycles"));
    assert!(summary.contains("seed = 3"));
}

#[test]
fn coupled_game_flags_override_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "iters = 50\ninits = 3\nselector = \"consensus\"\n").unwrap();
    let prefix = dir.path().join("g");
    let out = vgnep()
        .arg("coupled-game")
        .arg("--config")
        .arg(&cfg)
        .args(["--inits", "2", "--algo", "fbf", "--selector", "cycle", "--literal-line6", "--out"])
        .arg(&prefix)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("g_fbf_init1.csv").exists());
    assert!(!dir.path().join("g_fbf_init2.csv").exists());
    assert!(!dir.path().join("g_hsdm_init0.csv").exists());
    let summary = fs::read_to_string(dir.path().join("g_summary.txt")).unwrap();
    assert!(summary.contains("selector = cycle"));
    assert!(summary.contains("literal_line6 = true"));
    assert!(summary.contains("iters = 50"));
}

#[test]
fn bad_config_reports_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "seed = 1\nalpha = 1.5\n").unwrap();
    let out = vgnep().arg("cycles").arg("--config").arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("bad.toml:2"), "{err}");
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["a", "b"] {
        let status = vgnep()
            .args(["coupled-game", "--iters", "300", "--seed", "5", "--out"])
            .arg(dir.path().join(name))
            .status()
            .unwrap();
        assert!(status.success());
    }
    for file in ["fbf_init0.csv", "hsdm_init2.csv"] {
        let a = fs::read(dir.path().join(format!("a_{file}"))).unwrap();
        let b = fs::read(dir.path().join(format!("b_{file}"))).unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn unknown_selector_is_rejected() {
    let out = vgnep().args(["cycles", "--selector", "median"]).output().unwrap();
    assert!(!out.status.success());
}
