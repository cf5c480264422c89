use std::fs;
use std::process::{Command, Output};

use hostsym::config::{load_preset, ExperimentConfig};

fn hostsym(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hostsym")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn lists_every_preset() {
    let o = hostsym(&["list-presets"]);
    assert!(o.status.success());
    let names: Vec<String> = stdout(&o).lines().map(str::to_string).collect();
    assert_eq!(names.len(), 11);
    assert!(names.iter().any(|n| n == "thm3"));
}

#[test]
fn preset_then_manifest_rerun_is_identical() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let o = hostsym(&["preset", "fig1-right", "--set", "experiment.t_end=10.0", "--out", a.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let manifest = a.join("manifest.toml");
    let o = hostsym(&["run", manifest.to_str().unwrap(), "--out", b.to_str().unwrap(), "--threads", "2"]);
    assert!(o.status.success(), "{}", stderr(&o));
    for f in ["trajectory.csv", "manifest.toml"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    let text = fs::read_to_string(&manifest).unwrap();
    assert!(text.contains("version = \"hostsym 0.1.0\""));
    assert!(text.contains("chacha8:1:0"));
}

#[test]
fn seed_and_replicate_flags_reach_the_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("p");
    let o = hostsym(&[
        "preset", "percolation", "--set", "experiment.height=10", "--seed", "77", "--replicates", "3", "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(out.join("manifest.toml")).unwrap();
    assert!(text.contains("seed = 77"));
    assert!(text.contains("chacha8:77:2"));
    assert!(!text.contains("chacha8:77:3"));
}

#[test]
fn validation_errors_list_every_violation() {
    let o = hostsym(&["preset", "thm3", "--set", "replicates=0", "--set", "experiment.guard=5000"]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.starts_with("error [validation]"), "{err}");
    assert!(err.contains("replicates"), "{err}");
    assert!(err.contains("guard"), "{err}");
}

#[test]
fn error_categories_and_exit_codes() {
    let o = hostsym(&["run", "/nonexistent/config.toml"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("[io]"));
    let o = hostsym(&["preset", "no-such-preset"]);
    assert_eq!(o.status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "seed = \"x\"").unwrap();
    let o = hostsym(&["run", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("[parse]"));
}

#[test]
fn printed_preset_parses_back() {
    let o = hostsym(&["preset", "coupling", "--print", "--set", "experiment.beta=3.5"]);
    assert!(o.status.success());
    let parsed = ExperimentConfig::from_toml(&stdout(&o)).unwrap();
    assert_eq!(parsed, load_preset("coupling", &["experiment.beta=3.5".into()]).unwrap());
}
