use std::path::Path;
use std::process::{Command, Output};

const TINY: &str = r#"
[dataset]
trajectories = 4
steps = 6

[train]
epochs = 5
hidden = 16

[reach]
horizon = 4

[validate]
samples = 50
"#;

fn nnreach(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nnreach"))
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap()
}

#[test]
fn stages_run_in_order_from_the_command_line() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("tiny.toml"), TINY).unwrap();
    let common = ["--config", "tiny.toml", "--out", "run"];

    for stage in ["generate", "train", "reach"] {
        let out = nnreach(dir.path(), &[&common[..], &[stage]].concat());
        assert!(out.status.success(), "{stage}: {}", String::from_utf8_lossy(&out.stderr));
    }
    let run = dir.path().join("run");
    assert!(run.join("model/model.json").exists());
    assert!(run.join("reach/nominal/reach_4.json").exists());

    // An undertrained network may miss the containment threshold; anything
    // else than pass or validation failure is a bug.
    let out = nnreach(dir.path(), &[&common[..], &["validate"]].concat());
    assert!(matches!(out.status.code(), Some(0 | 1)));
    assert!(String::from_utf8_lossy(&out.stdout).contains("double_integrator"));
    assert!(run.join("validate/nominal/mc_report.json").exists());

    let out = nnreach(dir.path(), &[&common[..], &["report"]].concat());
    assert!(out.status.success());
    assert!(run.join("report/summary.txt").exists());
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.toml"), "[dataset]\ntrajectories = 0\n").unwrap();
    let out = nnreach(dir.path(), &["--config", "bad.toml", "generate"]);
    assert_eq!(out.status.code(), Some(2));

    let out = nnreach(dir.path(), &["--scenario", "sideways", "generate"]);
    assert_eq!(out.status.code(), Some(2));

    let out = nnreach(dir.path(), &["--out", "empty", "report"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
}
