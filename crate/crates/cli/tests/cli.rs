use std::path::Path;
use std::process::{Command, Output};
use std::time::{Duration, Instant};

fn saa(args: &[&str], out_dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_saa"))
        .args(args)
        .env("SAA_OUT_DIR", out_dir)
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

/// A run small enough for a unit-test budget.
const TINY: &[&str] = &[
    "--set", "iters_per_epoch=2",
    "--set", "labeled_batch=4",
    "--set", "unlabeled_ratio=2",
    "--set", "dataset.train=40",
    "--set", "dataset.test=20",
    "--set", "dataset.side=8",
    "--set", "labels_per_class=2",
];

fn train_tiny(out: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["train"];
    args.extend_from_slice(TINY);
    args.extend_from_slice(extra);
    saa(&args, out)
}

#[test]
fn missing_config_exits_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let o = saa(&["train", "--config", "/nonexistent/run.cfg"], dir.path());
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn unknown_key_reports_its_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    std::fs::write(&cfg, "seed = 1\n# comment\nlearning_rate = 0.1\n").unwrap();
    let o = saa(&["train", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("line 3") && err.contains("learning_rate"), "{err}");
}

#[test]
fn unknown_policy_exits_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let o = saa(&["train", "--policy", "median"], dir.path());
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    let o = saa(&["ablate", "--policies", "otsu,sometimes"], dir.path());
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn one_epoch_smoke_run() {
    let dir = tempfile::tempdir().unwrap();
    let started = Instant::now();
    let o = saa(&["train", "--seed", "7", "--epochs", "1", "--name", "smoke"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(started.elapsed() < Duration::from_secs(60));
    let run = dir.path().join("smoke");
    let metrics = std::fs::read_to_string(run.join("metrics.csv")).unwrap();
    assert_eq!(metrics.lines().count(), 2);
    let manifest = std::fs::read_to_string(run.join("manifest.txt")).unwrap();
    assert!(manifest.contains("seed = 7") && manifest.contains("epochs = 1"), "{manifest}");
    assert!(run.join("checkpoints/epoch_0001.ckpt").exists());
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "seed = 1\nepochs = 5\nwarmup_epochs = 1\npolicy = all\nname = fromfile\n").unwrap();
    let o = train_tiny(dir.path(), &["--config", cfg.to_str().unwrap(), "--seed", "9", "--epochs", "1", "--policy", "none"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let manifest = std::fs::read_to_string(dir.path().join("fromfile/manifest.txt")).unwrap();
    for line in ["seed = 9", "epochs = 1", "policy = none", "warmup_epochs = 1", "iters_per_epoch = 2"] {
        assert!(manifest.lines().any(|l| l == line), "missing `{line}` in\n{manifest}");
    }
}

#[test]
fn resume_eval_inspect_and_plots() {
    let dir = tempfile::tempdir().unwrap();
    let o = train_tiny(dir.path(), &["--epochs", "4", "--warmup", "1", "--set", "checkpoint_every=2", "--name", "r"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let run = dir.path().join("r");
    let full = std::fs::read(run.join("metrics.csv")).unwrap();

    let ckpt = run.join("checkpoints/epoch_0002.ckpt");
    let mut args = vec!["train"];
    args.extend_from_slice(TINY);
    args.extend_from_slice(&["--epochs", "4", "--warmup", "1", "--set", "checkpoint_every=2", "--name", "r"]);
    args.extend_from_slice(&["--resume", ckpt.to_str().unwrap()]);
    let o = saa(&args, dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(std::fs::read(run.join("metrics.csv")).unwrap(), full);

    let last = run.join("checkpoints/epoch_0004.ckpt");
    let o = saa(&["eval", "--checkpoint", last.to_str().unwrap()], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let acc: f64 = stdout(&o).trim().strip_prefix("accuracy ").unwrap().parse().unwrap();
    assert!((0.0..=1.0).contains(&acc));

    let o = saa(&["inspect-history", run.to_str().unwrap()], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("epochs done     4"), "{}", stdout(&o));

    let o = saa(&["export-plots", run.to_str().unwrap()], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).starts_with("4 points"));
    assert!(run.join("plots/naive_fraction.png").exists());
}

#[test]
fn ablate_writes_one_row_per_policy() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["ablate"];
    args.extend_from_slice(TINY);
    args.extend_from_slice(&["--epochs", "2", "--warmup", "1", "--name", "abl", "--policies", "otsu,none,prop:0.5"]);
    let o = saa(&args, dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = std::fs::read_to_string(dir.path().join("abl/ablation.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4, "{csv}");
    assert!(csv.contains("OTSU threshold") && csv.contains("Baseline-1") && csv.contains("Fixed proportion (0.5)"));
}

#[test]
fn eval_without_checkpoint_fails() {
    let dir = tempfile::tempdir().unwrap();
    let o = saa(&["eval", "--checkpoint", dir.path().join("nope.ckpt").to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
}
