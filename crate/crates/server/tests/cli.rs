use std::path::{Path, PathBuf};
use std::process::Command;

use stage_bus::Value;
use stage_server::read_packet_log;

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

fn server() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_stage-server"));
    cmd.env("RUST_LOG", "error");
    cmd
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("stage-cli-{}-{name}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn replay_with_the_built_in_scene_is_repeatable() {
    let dir = scratch("builtin");
    let mut logs = Vec::new();
    for run in 0..2 {
        let out = dir.join(format!("{run}.log"));
        let status = server()
            .arg("--replay")
            .arg(fixtures().join("fixture.bvh"))
            .arg("--script")
            .arg(fixtures().join("cmds.txt"))
            .arg("--record")
            .arg(&out)
            .status()
            .unwrap();
        assert!(status.success());
        logs.push(std::fs::read(&out).unwrap());
    }
    assert_eq!(logs[0], logs[1]);
    let records = read_packet_log(&logs[0][..]).unwrap();
    assert_eq!(records.len(), 600);
    // the built-in scene has no presets, so the scripted release is refused
    let outcomes = records[400].get("outcomes").unwrap();
    let Value::Map(entries) = outcomes else {
        panic!("outcomes is a map")
    };
    let first = entries.values().next().unwrap();
    assert_eq!(first.get("ok"), Some(&Value::Bool(false)));
    std::fs::remove_dir_all(dir).unwrap();
}

#[test]
fn tick_limit_and_scene() {
    let dir = scratch("limit");
    let out = dir.join("short.log");
    let status = server()
        .arg("--scene")
        .arg(fixtures().join("scene.toml"))
        .args(["--ticks", "25", "--tick-rate", "30", "--record"])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let records = read_packet_log(&std::fs::read(&out).unwrap()[..]).unwrap();
    assert_eq!(records.len(), 25);
    assert_eq!(records[24].get("tick"), Some(&Value::Int64(24)));
    assert_eq!(records[3].get("time"), Some(&Value::Float64(0.1)));
    std::fs::remove_dir_all(dir).unwrap();
}

#[test]
fn bad_inputs_fail_cleanly() {
    let dir = scratch("bad");
    let scene = dir.join("scene.toml");
    std::fs::write(&scene, "version = 3\n").unwrap();
    let script = dir.join("cmds.txt");
    std::fs::write(&script, "10 fly-away\n").unwrap();

    for args in [
        vec!["--scene".into(), scene.display().to_string()],
        vec!["--script".into(), script.display().to_string()],
        vec!["--replay".into(), dir.join("missing.bvh").display().to_string()],
        vec!["--tick-rate".into(), "1000".into()],
    ] {
        let out = server().args(&args).arg("--ticks").arg("1").output().unwrap();
        assert!(!out.status.success(), "{args:?} succeeded");
        assert!(!out.stderr.is_empty());
    }
    std::fs::remove_dir_all(dir).unwrap();
}
