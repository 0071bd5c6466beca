use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const TINY: &str = "\
# small enough to train in well under a second
activities = 2
cameras_per_activity = 2
test_cameras_per_activity = 1
videos_per_pair = 1
node_dim = 8
edge_dim = 8
ecc_hidden = 4
head_hidden = 4
lstm_hidden = 4
lstm_layers = 1
epochs = 2
";

fn gazegraph(dir: &Path, args: &[&str]) -> Output {
    let config = dir.join("tiny.conf");
    if !config.exists() {
        fs::write(&config, TINY).unwrap();
    }
    Command::new(env!("CARGO_BIN_EXE_gazegraph"))
        .arg("--config")
        .arg(&config)
        .args(args)
        .env_remove("RUST_LOG")
        .output()
        .unwrap()
}

fn out_arg(dir: &Path, name: &str) -> String {
    dir.join(name).to_string_lossy().into_owned()
}

#[test]
fn train_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["a", "b"] {
        let o = gazegraph(dir.path(), &["train", "--seed", "7", "--out", &out_arg(dir.path(), name)]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for file in ["model.ckpt", "train_log.csv"] {
        let a = fs::read(dir.path().join("a").join(file)).unwrap();
        let b = fs::read(dir.path().join("b").join(file)).unwrap();
        assert!(!a.is_empty());
        assert_eq!(a, b, "{file} differs");
    }
    let manifest = fs::read_to_string(dir.path().join("a/train.manifest")).unwrap();
    assert!(manifest.contains("seed = 7"), "{manifest}");
    assert!(manifest.contains("model.ckpt"));
}

#[test]
fn eval_without_checkpoint_fails_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let o = gazegraph(dir.path(), &["eval", "--out", &out_arg(dir.path(), "empty")]);
    assert_eq!(o.status.code(), Some(3));
    let err = String::from_utf8_lossy(&o.stderr);
    assert_eq!(err.trim().lines().count(), 1, "{err}");
    assert!(err.contains("model.ckpt"), "{err}");
}

#[test]
fn train_then_eval_writes_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let out = out_arg(dir.path(), "run");
    assert!(gazegraph(dir.path(), &["train", "--out", &out]).status.success());
    let o = gazegraph(dir.path(), &["eval", "--out", &out, "--fraction", "0.5"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(dir.path().join("run/metrics.csv")).unwrap();
    let mut lines = csv.lines();
    assert!(lines.next().unwrap().starts_with("variant,"));
    assert!(lines.next().unwrap().starts_with("full,0.5,"));
}

#[test]
fn ablate_writes_tagged_report() {
    let dir = tempfile::tempdir().unwrap();
    let o = gazegraph(dir.path(), &["ablate", "--variant", "random_fixation", "--out", &out_arg(dir.path(), "ab")]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(dir.path().join("ab/ablate_random_fixation.csv")).unwrap();
    assert!(csv.lines().nth(1).unwrap().starts_with("random_fixation,"));
    assert!(dir.path().join("ab/ablate_random_fixation_log.csv").exists());
}

#[test]
fn unknown_variant_and_key_are_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    let out = out_arg(dir.path(), "x");
    let o = gazegraph(dir.path(), &["ablate", "--variant", "bogus", "--out", &out]);
    assert_eq!(o.status.code(), Some(2));
    let o = gazegraph(dir.path(), &["train", "--set", "dropout=0.1", "--out", &out]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("dropout"));
    let o = gazegraph(dir.path(), &["no-such-command"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn gen_data_and_graph_exports() {
    let dir = tempfile::tempdir().unwrap();
    let out = out_arg(dir.path(), "d");
    assert!(gazegraph(dir.path(), &["gen-data", "--out", &out]).status.success());
    let manifest = fs::read_to_string(dir.path().join("d/dataset/manifest.csv")).unwrap();
    let id = manifest.lines().nth(1).unwrap().split(',').nth(1).unwrap().to_string();
    assert!(dir.path().join(format!("d/dataset/programs/{id}.prog")).exists());
    assert!(dir.path().join(format!("d/dataset/gaze/{id}.csv")).exists());

    let o = gazegraph(dir.path(), &["export-graph", "--video", &id, "--format", "dot", "--out", &out]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let dot = fs::read_to_string(dir.path().join(format!("d/graphs/{id}.dot"))).unwrap();
    assert!(dot.starts_with("digraph") || dot.starts_with("graph"), "{dot}");

    assert!(gazegraph(dir.path(), &["build-graphs", "--out", &out]).status.success());
    assert!(fs::read_dir(dir.path().join("d/graphs/train")).unwrap().count() > 0);

    assert!(gazegraph(dir.path(), &["hist", "--bins", "5", "--out", &out]).status.success());
    let hist = fs::read_to_string(dir.path().join("d/hist.csv")).unwrap();
    assert!(hist.lines().count() > 1);
}

#[test]
fn env_overrides_file_and_flags_override_env() {
    let dir = tempfile::tempdir().unwrap();
    let out = out_arg(dir.path(), "e");
    let config = dir.path().join("tiny.conf");
    fs::write(&config, TINY).unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_gazegraph"))
        .args(["--config", config.to_str().unwrap(), "gen-data", "--out", &out, "--seed", "5"])
        .env("GAZEGRAPH_SEED", "9")
        .env("GAZEGRAPH_VIDEOS_PER_PAIR", "2")
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let manifest = fs::read_to_string(dir.path().join("e/gen-data.manifest")).unwrap();
    assert!(manifest.contains("seed = 5"), "{manifest}");
    assert!(manifest.contains("videos_per_pair = 2"), "{manifest}");
}
