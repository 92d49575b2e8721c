use std::path::PathBuf;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_leo-ris"))
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("leo-ris-cli-{name}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn exit_codes_follow_the_failure_kind() {
    let dir = scratch("codes");
    let bad = dir.join("bad.toml");
    std::fs::write(&bad, "ue.count = 100\n").unwrap();
    let out = bin().args(["validate", "--paper-scale", "--config"]).arg(&bad).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let out = bin().args(["validate", "--config"]).arg(dir.join("absent.toml")).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = bin().args(["run", "--preset", "nope", "--out"]).arg(&dir).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let out = bin().args(["validate"]).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn run_then_report_regenerates_the_same_csv() {
    let dir = scratch("run");
    let cfg = dir.join("small.toml");
    std::fs::write(&cfg, "frame.slots = 2\nframe.duration_s = 2.0\nsolver.ao_max_iterations = 2\n").unwrap();
    let out = bin()
        .args(["run", "--mode", "fixed_uav", "--seed", "4", "--jobs", "1", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&dir)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = dir.join("single.csv");
    let first = std::fs::read(&csv).unwrap();
    assert!(String::from_utf8_lossy(&first).contains(",4\n"));
    std::fs::remove_file(&csv).unwrap();
    let out = bin().args(["report", "--out"]).arg(&dir).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(std::fs::read(&csv).unwrap(), first);
}
