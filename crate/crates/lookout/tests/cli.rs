mod common;

use std::path::Path;
use std::process::{Command, Output};

fn lookout(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lookout"))
        .args(args)
        .current_dir(cwd)
        .output()
        .unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn full_command_cycle() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("tiny.toml"), common::TINY_TOML).unwrap();

    let o = lookout(&["train", "--config", "tiny.toml", "--out", "run", "--quiet"], d);
    assert!(o.status.success(), "{}", stderr(&o));
    let ckpts: Vec<_> = std::fs::read_dir(d.join("run/checkpoints")).unwrap().collect();
    assert_eq!(ckpts.len(), 3);
    let ckpt = d.join("run/checkpoints/ckpt-000000001206.bin");
    assert!(ckpt.exists());

    let o = lookout(
        &[
            "eval",
            "--checkpoint",
            ckpt.to_str().unwrap(),
            "--scenario",
            "run/scenario.toml",
            "--out",
            "ev",
        ],
        d,
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(d.join("ev/eval.json")).unwrap()).unwrap();
    assert_eq!(summary["episodes"], 2);
    assert_eq!(summary["policy"], "multi_agent");
    let rows = std::fs::read_to_string(d.join("ev/eval_episodes.csv")).unwrap();
    assert_eq!(rows.lines().count(), 1 + 4);

    let o = lookout(
        &["replay", "--checkpoint", ckpt.to_str().unwrap(), "--out", "rp", "--episode", "1"],
        d,
    );
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(d.join("rp/steps.csv").exists() && d.join("rp/comms.csv").exists());

    let o = lookout(&["plot", "run", "--out", "charts"], d);
    assert!(o.status.success(), "{}", stderr(&o));
    for f in ["reward_vs_step.svg", "performance_vs_episode.svg"] {
        let svg = std::fs::read_to_string(d.join("charts").join(f)).unwrap();
        assert!(svg.starts_with("<svg"));
    }
}

#[test]
fn greedy_eval_from_flags() {
    let dir = tempfile::tempdir().unwrap();
    let o = lookout(
        &[
            "eval",
            "--setup",
            "greedy",
            "--seed",
            "3",
            "--difficulty",
            "2",
            "--episodes",
            "1",
            "--out",
            "g",
        ],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("g/eval.json")).unwrap()).unwrap();
    assert_eq!(summary["seed"], "3");
    assert_eq!(summary["difficulty"], 2);
    assert_eq!(summary["fixed_reward_std"], 0.0);
}

#[test]
fn failures_exit_nonzero_with_a_diagnostic() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let o = lookout(&["eval", "--setup", "multi_agent"], d);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("needs a --checkpoint"));

    std::fs::write(d.join("bad.toml"), "setup = \"multi_agent_ac\"\nseed = 1\n").unwrap();
    let o = lookout(&["train", "--config", "bad.toml"], d);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("error:"));

    let o = lookout(&["train", "--difficulty", "11"], d);
    assert!(!o.status.success());

    let o = lookout(&["eval", "--setup", "greedy", "--episodes", "0"], d);
    assert!(!o.status.success());

    std::fs::write(d.join("junk.bin"), b"junk").unwrap();
    let o = lookout(&["eval", "--checkpoint", "junk.bin"], d);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("not a checkpoint"));

    let o = lookout(&["plot", "missing"], d);
    assert!(!o.status.success());
}
