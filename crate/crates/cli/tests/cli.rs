use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn taskgrasp(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_taskgrasp"))
        .args(args)
        .current_dir(dir)
        .env_remove("TASKGRASP_SEED")
        .env_remove("TASKGRASP_TRACE_DIR")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn scene_render_and_run_chain_together() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert!(taskgrasp(d, &["gen-scene", "--classes", "spoon,bowl", "--scene-seed", "4", "--out", "s.json"]).status.success());
    assert!(taskgrasp(d, &["render", "--scene", "s.json", "--out", "obs"]).status.success());
    for f in ["rgb.png", "depth.png", "intrinsics.toml", "labels.png", "objects.json", "camera_pose.json"] {
        assert!(d.join("obs").join(f).exists(), "{f}");
    }

    let out = taskgrasp(d, &["run", "-i", "I want to scoop something", "--observation", "obs", "--json"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let trace: Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(trace["stages"][0]["reasoning"]["object"], "spoon");
    assert_eq!(trace["stages"].as_array().unwrap().len(), 3);

    let out = taskgrasp(d, &["run", "-i", "I want to scoop something", "--scene", "s.json", "--execute", "--trace-dir", "runs"]);
    let text = stdout(&out);
    assert!(text.contains("execution: "), "{text}");
    let run_id = text.lines().next().unwrap().strip_prefix("run ").unwrap();
    let saved: Value = serde_json::from_str(&std::fs::read_to_string(d.join("runs").join(run_id).join("trace.json")).unwrap()).unwrap();
    assert_eq!(saved["stages"][3]["stage"], "execution");
}

#[test]
fn failed_stages_exit_with_two_and_bad_config_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = taskgrasp(dir.path(), &["run", "-i", "fly me to the moon", "--classes", "mug"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stdout(&out).contains("reasoning failed: NoRelevantObject"));

    let out = taskgrasp(dir.path(), &["--grounding", "psychic", "run", "-i", "x", "--classes", "mug"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("psychic"));

    // exactly one input source
    let out = taskgrasp(dir.path(), &["run", "-i", "x", "--classes", "mug", "--scene", "s.json"]);
    assert!(!out.status.success());
}

#[test]
fn flags_override_environment_which_overrides_the_file() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("cfg.toml"), "epsilon = 0.002\n[grasp.sampler]\nseed = 5\nbudget = 40\n").unwrap();
    let seed = |extra: &[&str], env: Option<&str>| {
        let mut args = vec!["--config", "cfg.toml", "run", "-i", "I am thirsty", "--classes", "mug", "--json"];
        args.extend_from_slice(extra);
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_taskgrasp"));
        cmd.args(&args).current_dir(dir.path()).env_remove("TASKGRASP_SEED");
        if let Some(v) = env {
            cmd.env("TASKGRASP_SEED", v);
        }
        let trace: Value = serde_json::from_slice(&cmd.output().unwrap().stdout).unwrap();
        assert_eq!(trace["config"]["epsilon"], 0.002);
        assert_eq!(trace["config"]["grasp"]["sampler"]["budget"], 40);
        trace["config"]["grasp"]["sampler"]["seed"].as_u64().unwrap()
    };
    assert_eq!(seed(&[], None), 5);
    assert_eq!(seed(&[], Some("6")), 6);
    assert_eq!(seed(&["--seed", "7"], Some("6")), 7);
}

#[test]
fn eval_prints_the_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = taskgrasp(dir.path(), &["eval", "--classes", "bottle", "--scenario", "single", "--runs", "2"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.starts_with("| Scenario | bottle | Average GSR |"), "{text}");
    assert!(text.contains("| single |"));
}
