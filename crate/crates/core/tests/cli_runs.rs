use std::fs;
use std::io;
use std::path::Path;
use std::process::Command;

use lgae::cli::{
    cmd_eval, cmd_generate, cmd_gradcheck, cmd_train, Checkpoint, CliError, DatasetKind,
    TrainConfig, CHECKPOINT_FILE, LOSS_CSV_FILE,
};
use lgae::eval::{nearest_centroid_accuracy, read_loss_csv};
use lgae::models::{ModelVariant, RepresentationKind};

fn blobs(variant: ModelVariant, epochs: usize, out: &Path) -> TrainConfig {
    TrainConfig {
        variant,
        k: 2,
        hidden: 16,
        batch_size: 32,
        epochs,
        seed: 7,
        dataset: DatasetKind::Blobs,
        blob_n: 96,
        blob_test_n: 32,
        blob_dim: 16,
        blob_classes: 3,
        out_dir: Some(out.to_path_buf()),
        ..TrainConfig::default()
    }
}

fn train(c: &TrainConfig) -> lgae::cli::TrainOutcome {
    cmd_train(c, None, &mut io::sink()).unwrap()
}

fn read(dir: &Path, name: &str) -> Vec<u8> {
    fs::read(dir.join(name)).unwrap()
}

#[test]
fn two_epochs_give_two_csv_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out = train(&blobs(ModelVariant::Lgae, 2, dir.path()));
    let curve = read_loss_csv(&out.csv_path).unwrap();
    assert_eq!(curve.len(), 2);
    assert_eq!(curve, out.curve);
    for r in curve.rows() {
        // epoch means of the parts recombine up to rounding
        let recombined = 0.5 * r.train_reg + r.train_rec;
        assert!((r.train_total - recombined).abs() < 1e-12 * r.train_total);
    }
}

#[test]
fn zero_epochs_store_the_initial_parameters() {
    let dir = tempfile::tempdir().unwrap();
    let out = train(&blobs(ModelVariant::Vae, 0, dir.path()));
    let ck = Checkpoint::load(&out.checkpoint_path).unwrap();
    assert_eq!(ck.epoch, 0);
    assert!(ck.history.is_empty());
    assert!(ck.optimizer.acc.is_empty());
    assert_eq!(ck.model().unwrap(), out.model);
}

#[test]
fn identical_runs_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    train(&blobs(ModelVariant::LgaeKl, 3, a.path()));
    train(&blobs(ModelVariant::LgaeKl, 3, b.path()));
    for f in [CHECKPOINT_FILE, LOSS_CSV_FILE] {
        assert_eq!(read(a.path(), f), read(b.path(), f), "{f}");
    }
}

#[test]
fn resuming_matches_an_uninterrupted_run() {
    for v in ModelVariant::ALL {
        let full = tempfile::tempdir().unwrap();
        let split = tempfile::tempdir().unwrap();
        train(&blobs(v, 4, full.path()));
        let first = train(&blobs(v, 2, split.path()));
        let resumed = blobs(v, 4, split.path());
        cmd_train(&resumed, Some(&first.checkpoint_path), &mut io::sink()).unwrap();
        for f in [CHECKPOINT_FILE, LOSS_CSV_FILE] {
            assert_eq!(read(full.path(), f), read(split.path(), f), "{v} {f}");
        }
    }
}

#[test]
fn resume_rejects_a_different_configuration() {
    let dir = tempfile::tempdir().unwrap();
    let first = train(&blobs(ModelVariant::Lgae, 1, dir.path()));
    let other = TrainConfig {
        lambda: 0.25,
        ..blobs(ModelVariant::Lgae, 2, dir.path())
    };
    let err = cmd_train(&other, Some(&first.checkpoint_path), &mut io::sink()).unwrap_err();
    assert!(matches!(err, CliError::Usage(_)));
    assert_eq!(err.exit_code(), 1);
}

#[test]
fn checkpoint_save_load_save_is_idempotent() {
    let dir = tempfile::tempdir().unwrap();
    let out = train(&blobs(ModelVariant::Lgae, 2, dir.path()));
    let text = fs::read_to_string(&out.checkpoint_path).unwrap();
    let again = Checkpoint::from_json(&text).unwrap().to_json();
    assert_eq!(text, again);
}

#[test]
fn unknown_checkpoint_version_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = train(&blobs(ModelVariant::Lgae, 0, dir.path()));
    let text = fs::read_to_string(&out.checkpoint_path).unwrap().replacen(
        "\"format_version\": 1",
        "\"format_version\": 99",
        1,
    );
    assert!(matches!(
        Checkpoint::from_json(&text),
        Err(CliError::Checkpoint(_))
    ));
}

#[test]
fn trained_representations_stay_close_to_raw_pixels() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = blobs(ModelVariant::Lgae, 40, dir.path());
    c.k = 3;
    let out = train(&c);
    let (train_set, test_set) = c.load_data().unwrap();
    let raw = nearest_centroid_accuracy(
        &train_set.x,
        &train_set.labels,
        &test_set.x,
        &test_set.labels,
        3,
    )
    .unwrap();
    assert_eq!(raw, 100.0);
    for kind in RepresentationKind::ALL {
        let report = cmd_eval(&out.checkpoint_path, kind, None).unwrap();
        assert!(report.accuracy >= raw - 5.0, "{kind}: {report:?}");
    }
}

#[test]
fn untrained_model_still_reports_an_accuracy() {
    let dir = tempfile::tempdir().unwrap();
    let c = TrainConfig {
        lambda: 0.0,
        ..blobs(ModelVariant::Lgae, 0, dir.path())
    };
    let out = train(&c);
    let report = cmd_eval(&out.checkpoint_path, RepresentationKind::Mu, None).unwrap();
    assert!((0.0..=100.0).contains(&report.accuracy));
}

#[test]
fn vae_has_no_lie_algebra_representation() {
    let dir = tempfile::tempdir().unwrap();
    let out = train(&blobs(ModelVariant::Vae, 0, dir.path()));
    let err = cmd_eval(&out.checkpoint_path, RepresentationKind::LieAlgebra, None).unwrap_err();
    assert_eq!(err.exit_code(), 1);
}

#[test]
fn generation_is_seeded() {
    let dir = tempfile::tempdir().unwrap();
    let out = train(&blobs(ModelVariant::Lgae, 1, dir.path()));
    let (imgs, a) = cmd_generate(&out.checkpoint_path, 9, 3).unwrap();
    let (_, b) = cmd_generate(&out.checkpoint_path, 9, 3).unwrap();
    let (_, c) = cmd_generate(&out.checkpoint_path, 9, 4).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
    assert!(imgs.as_slice().iter().all(|&p| p > 0.0 && p < 1.0));
    // 3x3 grid of 4x4 tiles
    assert!(a.starts_with(b"P5\n12 12\n255\n"));

    let (_, single) = cmd_generate(&out.checkpoint_path, 1, 0).unwrap();
    assert!(single.starts_with(b"P5\n4 4\n255\n"));
    assert_eq!(single.len(), b"P5\n4 4\n255\n".len() + 16);
}

#[test]
fn gradcheck_passes_and_reports_every_variant() {
    let report = cmd_gradcheck(false).unwrap();
    assert!(report.passed());
    assert_eq!(report.entries.len(), 3);
    for e in &report.entries {
        assert!(e.report.max_rel_error < 1e-4, "{:?}", e);
    }
    assert!(!cmd_gradcheck(true).unwrap().passed());
}

fn lgae_bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_lgae"));
    c.env_remove("LGAE_DATA_DIR");
    c
}

#[test]
fn binary_exit_codes() {
    let status = |c: &mut Command| c.output().unwrap().status.code();
    assert_eq!(status(lgae_bin().arg("gradcheck")), Some(0));
    assert_eq!(status(lgae_bin().args(["gradcheck", "--corrupt"])), Some(3));
    assert_eq!(status(lgae_bin().arg("frobnicate")), Some(1));
    assert_eq!(status(lgae_bin().args(["train", "--k", "0"])), Some(1));
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nowhere");
    assert_eq!(
        status(
            lgae_bin()
                .args(["train", "--epochs", "1", "--data-dir"])
                .arg(&missing)
        ),
        Some(2)
    );
}

#[test]
fn binary_train_eval_generate_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("config.json");
    fs::write(
        &cfg,
        r#"{"dataset":"blobs","k":2,"hidden":8,"epochs":5,"blob_n":60,"blob_test_n":30,"blob_dim":9,"blob_classes":3}"#,
    )
    .unwrap();
    let run = dir.path().join("run");
    let out = lgae_bin()
        .args(["train", "--config"])
        .arg(&cfg)
        .args(["--variant", "lgae_kl", "--epochs", "2", "--out-dir"])
        .arg(&run)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let ck = Checkpoint::load(&run.join(CHECKPOINT_FILE)).unwrap();
    assert_eq!(ck.config.variant, ModelVariant::LgaeKl);
    assert_eq!((ck.epoch, ck.config.hidden), (2, 8));

    let out = lgae_bin()
        .args(["eval", "--repr", "lie_algebra", "--checkpoint"])
        .arg(run.join(CHECKPOINT_FILE))
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("test accuracy"));
    assert!(run.join("eval_lie_algebra.json").exists());

    let pgm = dir.path().join("s.pgm");
    let out = lgae_bin()
        .args(["generate", "--count", "4", "--checkpoint"])
        .arg(run.join(CHECKPOINT_FILE))
        .arg("--out")
        .arg(&pgm)
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(fs::read(&pgm).unwrap().starts_with(b"P5\n6 6\n255\n"));
}
