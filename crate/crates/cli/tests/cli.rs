use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const DATA: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../core/tests/data/");

fn rankembed(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rankembed"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = rankembed(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn stderr_of_failure(dir: &Path, args: &[&str]) -> String {
    let out = rankembed(dir, args);
    assert_eq!(out.status.code(), Some(1), "{args:?} should fail");
    String::from_utf8(out.stderr).unwrap()
}

/// Ingested 500-image test split plus a quick run config.
fn workspace() -> TempDir {
    let dir = TempDir::new().unwrap();
    ok(
        dir.path(),
        &[
            "ingest",
            "--format",
            "idx",
            &format!("{DATA}fmnist-test-images-idx3-ubyte.gz"),
            &format!("{DATA}fmnist-test-labels-idx1-ubyte.gz"),
            "-o",
            "test.ds",
        ],
    );
    fs::write(
        dir.path().join("quick.json"),
        r#"{"sampler": {"n_candidates": 20},
            "train": {"steps_per_epoch": 2, "batch_size": 8, "validation_triplets": 20, "validation_batches": 1}}"#,
    )
    .unwrap();
    dir
}

fn path(dir: &TempDir, name: &str) -> PathBuf {
    dir.path().join(name)
}

#[test]
fn ingest_reports_counts() {
    let dir = workspace();
    let out = ok(
        dir.path(),
        &["ingest", "--format", "internal", "test.ds", "-o", "copy.ds", "--pretty"],
    );
    assert!(out.contains("items") && out.contains("500"), "{out}");
    assert_eq!(fs::read(path(&dir, "test.ds")).unwrap(), fs::read(path(&dir, "copy.ds")).unwrap());
}

#[test]
fn zero_learning_rate_training_embeds_identically() {
    let dir = workspace();
    let train = |out: &str| {
        ok(
            dir.path(),
            &["train", "--train", "test.ds", "--config", "quick.json", "--epochs", "1", "--lr", "0", "-o", out],
        )
    };
    train("a.ckpt");
    train("b.ckpt");
    assert_eq!(fs::read(path(&dir, "a.ckpt")).unwrap(), fs::read(path(&dir, "b.ckpt")).unwrap());
    let log = fs::read_to_string(path(&dir, "a.ckpt.log.csv")).unwrap();
    assert!(log.starts_with("epoch,train_loss,val_loss,triplet_acc,seconds\n1,"), "{log}");

    ok(dir.path(), &["embed", "--checkpoint", "a.ckpt", "--dataset", "test.ds", "-o", "a.emb"]);
    ok(dir.path(), &["embed", "--checkpoint", "b.ckpt", "--dataset", "test.ds", "-o", "b.emb"]);
    assert_eq!(fs::read(path(&dir, "a.emb")).unwrap(), fs::read(path(&dir, "b.emb")).unwrap());

    let hits = ok(dir.path(), &["query", "--embeddings", "a.emb", "--id", "7", "-k", "5"]);
    let lines: Vec<&str> = hits.lines().collect();
    assert_eq!(lines.len(), 5);
    assert!(lines[0].starts_with("1,7,0"), "{hits}");

    // Self matches are always found.
    fs::write(path(&dir, "gt.csv"), "7,7\n8,8\n9,9\n").unwrap();
    let out = ok(dir.path(), &["eval", "--embeddings", "a.emb", "--ground-truth", "gt.csv"]);
    assert!(out.contains("top20_recall=1.000000"), "{out}");
}

#[test]
fn refuses_to_overwrite_without_force() {
    let dir = workspace();
    fs::write(path(&dir, "taken.ds"), b"x").unwrap();
    let args = ["ingest", "--format", "internal", "test.ds", "-o", "taken.ds"];
    let err = stderr_of_failure(dir.path(), &args);
    assert!(err.starts_with("error: kind=exists msg=\""), "{err}");
    assert_eq!(fs::read(path(&dir, "taken.ds")).unwrap(), b"x");
    let mut forced = args.to_vec();
    forced.push("--force");
    ok(dir.path(), &forced);
}

#[test]
fn errors_are_single_structured_lines() {
    let dir = workspace();
    let err = stderr_of_failure(dir.path(), &["query", "--embeddings", "missing.emb", "--id", "0"]);
    assert!(err.starts_with("error: kind=io msg=\""), "{err}");
    assert_eq!(err.lines().count(), 1);

    fs::write(path(&dir, "junk.ds"), b"not a container").unwrap();
    let err = stderr_of_failure(dir.path(), &["ingest", "--format", "internal", "junk.ds", "-o", "o.ds"]);
    assert!(err.starts_with("error: kind=format"), "{err}");
}

#[test]
fn config_lists_every_unknown_key() {
    let dir = workspace();
    fs::write(path(&dir, "bad.json"), r#"{"trian": {}, "train": {"epoch": 3, "learning_rate": -1}}"#).unwrap();
    let err = stderr_of_failure(
        dir.path(),
        &["train", "--train", "test.ds", "--config", "bad.json", "-o", "m.ckpt"],
    );
    assert!(err.contains("`trian`") && err.contains("`train.epoch`"), "{err}");
    assert!(!path(&dir, "m.ckpt").exists());
}

#[test]
fn diag_contrast_emits_one_row_per_setting() {
    let dir = TempDir::new().unwrap();
    let out = ok(
        dir.path(),
        &["diag-contrast", "--dims", "2,50", "--ks", "0.5,2", "--points", "200", "--trials", "3", "--seed", "4"],
    );
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], "dimension,k,contrast_mean,contrast_std");
    assert_eq!(lines.len(), 5);
    let again = ok(
        dir.path(),
        &["diag-contrast", "--dims", "2,50", "--ks", "0.5,2", "--points", "200", "--trials", "3", "--seed", "4"],
    );
    assert_eq!(out, again);
}

#[test]
fn sample_pairs_is_seeded() {
    let dir = workspace();
    let args = ["sample-pairs", "--dataset", "test.ds", "--config", "quick.json", "--count", "10", "--seed", "3"];
    let a = ok(dir.path(), &args);
    assert_eq!(a, ok(dir.path(), &args));
    let labels: Vec<&str> = a.lines().map(|l| l.rsplit(',').next().unwrap()).collect();
    assert_eq!(labels.len(), 10);
    assert_eq!(labels.iter().filter(|&&l| l == "1").count(), 5);
}

#[test]
fn cross_validation_prints_fold_lines() {
    let dir = workspace();
    let out = ok(
        dir.path(),
        &["train", "--train", "test.ds", "--config", "quick.json", "--epochs", "1", "--folds", "2"],
    );
    for key in ["fold0_val_loss=", "fold1_triplet_accuracy=", "mean_triplet_accuracy="] {
        assert!(out.contains(key), "{out}");
    }
}
