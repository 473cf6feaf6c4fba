use std::fs;
use std::path::Path;
use std::process::Command;

use prunefield::checkpoint;
use prunefield::cli::{
    cmd_eval, cmd_experiment, cmd_prune, cmd_retrain, cmd_train, fixture_image, PruneKind,
    RunConfig,
};
use prunefield::image::RgbImage;
use prunefield::mlp::{render_image, ArchSpec, MlpModel};
use prunefield::metrics::{psnr, ImagePair};
use prunefield::pruning::Strategy;
use prunefield::report::{read_reports, Format};
use prunefield::tensor::RngStream;

fn small_config(out: &Path) -> RunConfig {
    let mut cfg = RunConfig::from_json(
        r#"{"arch": {"depth": 3, "width": 16, "skip_at": 1, "n_freqs": 2},
            "train": {"iterations": 30, "batch_size": 64, "warmup": 5, "log_every": 10},
            "experiment": {"widths": [8, 4]},
            "record_timing": false}"#,
    )
    .unwrap();
    cfg.out_dir = out.to_path_buf();
    cfg
}

#[test]
fn bundled_fixture_matches_generator() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/scene64.ppm");
    let stored = RgbImage::read_ppm(path).unwrap();
    assert_eq!(stored, fixture_image());
    assert_eq!(fs::read(path).unwrap(), fixture_image().to_ppm());
}

#[test]
fn zero_iteration_training_reports_the_init_render() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_config(dir.path());
    cfg.train.iterations = 0;
    let out = cmd_train(&cfg, "train").unwrap();
    let init = MlpModel::init(cfg.arch.spec(), &mut RngStream::new(cfg.seed)).unwrap();
    let reference = fixture_image();
    let render = render_image(&init, 64, 64).unwrap().quantized();
    let expected = psnr(&ImagePair::new(&reference, &render).unwrap(), 1.0).unwrap();
    assert_eq!(out.report.psnr, expected);
    assert_eq!(out.report.sec_per_iter, None);
}

#[test]
fn same_seed_gives_identical_checkpoints() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let pa = cmd_train(&small_config(a.path()), "train").unwrap().checkpoint.unwrap();
    let pb = cmd_train(&small_config(b.path()), "train").unwrap().checkpoint.unwrap();
    assert_eq!(fs::read(pa).unwrap(), fs::read(pb).unwrap());
}

#[test]
fn eval_against_own_render_is_infinite() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_config(dir.path());
    let trained = cmd_train(&cfg, "train").unwrap();
    cfg.image = Some(trained.render.clone());
    let ckpt = trained.checkpoint.unwrap();
    let eval = cmd_eval(&ckpt, &cfg, "eval").unwrap();
    assert!(eval.report.psnr.is_infinite());
    assert_eq!(eval.report.params, trained.model.param_count());
    assert_eq!(eval.report.size_bytes, fs::metadata(&ckpt).unwrap().len() as usize);
    let rows = read_reports(&eval.report_path).unwrap();
    assert_eq!(rows, vec![eval.report]);
}

#[test]
fn prune_stage_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_config(dir.path());
    let ckpt = cmd_train(&cfg, "train").unwrap().checkpoint.unwrap();

    cfg.prune.strategy = Some(PruneKind::Edge);
    cfg.prune.threshold = Some(0.0);
    let (edge0, report) = cmd_prune(&ckpt, &cfg, "edge0").unwrap();
    assert_eq!(fs::read(&edge0).unwrap(), fs::read(&ckpt).unwrap());
    assert_eq!(report.remaining_edge_pct(), 100.0);

    cfg.prune.strategy = Some(PruneKind::Uniform);
    cfg.prune.target_width = Some(4);
    let (uni, report) = cmd_prune(&ckpt, &cfg, "uniform4").unwrap();
    assert_eq!(checkpoint::load(&uni).unwrap().arch.widths, vec![4, 4, 4]);
    assert_eq!(report.strategy, Strategy::Uniform);
    assert!(dir.path().join("uniform4.json").exists());

    cfg.prune.target_width = Some(17);
    assert!(cmd_prune(&ckpt, &cfg, "too_wide").is_err());
}

#[test]
fn coreset_prune_of_full_geometry_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let full = MlpModel::init(ArchSpec::radiance_field(), &mut RngStream::new(0)).unwrap();
    let input = dir.path().join("full.ckpt");
    checkpoint::save(&full, &input).unwrap();
    let mut cfg = small_config(dir.path());
    cfg.prune.strategy = Some(PruneKind::Coreset);
    cfg.prune.target_width = Some(128);
    let (_, report) = cmd_prune(&input, &cfg, "coreset128").unwrap();
    assert_eq!(report.params_before, 595_844);
    assert!((report.params_after as f64 / 288_000.0 - 1.0).abs() < 0.02);
}

#[test]
fn retrain_zero_iterations_is_unchanged() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_config(dir.path());
    let ckpt = cmd_train(&cfg, "train").unwrap().checkpoint.unwrap();
    cfg.retrain_iterations = Some(0);
    let out = cmd_retrain(&ckpt, &cfg, "retrain").unwrap();
    assert_eq!(fs::read(out.checkpoint.unwrap()).unwrap(), fs::read(&ckpt).unwrap());
}

#[test]
fn retrain_continues_from_pruned_weights() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_config(dir.path());
    cfg.train.iterations = 200;
    let ckpt = cmd_train(&cfg, "train").unwrap().checkpoint.unwrap();
    cfg.prune.strategy = Some(PruneKind::Coreset);
    cfg.prune.target_width = Some(8);
    let (pruned, _) = cmd_prune(&ckpt, &cfg, "pruned").unwrap();
    let before = cmd_eval(&pruned, &cfg, "pruned_eval").unwrap().report.psnr;
    cfg.retrain_iterations = Some(100);
    let a = cmd_retrain(&pruned, &cfg, "retrain_a").unwrap();
    let b = cmd_retrain(&pruned, &cfg, "retrain_b").unwrap();
    assert!(a.report.psnr > before, "{} vs {before}", a.report.psnr);
    assert_eq!(
        fs::read(a.checkpoint.unwrap()).unwrap(),
        fs::read(b.checkpoint.unwrap()).unwrap()
    );
}

#[test]
fn experiment_grid_rows_and_determinism() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let ra = cmd_experiment(&small_config(a.path())).unwrap();
    let rb = cmd_experiment(&small_config(b.path())).unwrap();
    assert_eq!(ra.reports.len(), 7);
    let labels: Vec<&str> = ra.reports.iter().map(|r| r.label.as_str()).collect();
    assert_eq!(
        labels,
        [
            "baseline",
            "uniform-8",
            "uniform-4",
            "importance_out-8",
            "importance_out-4",
            "coreset-8",
            "coreset-4"
        ]
    );
    assert_eq!(fs::read(&ra.report_path).unwrap(), fs::read(&rb.report_path).unwrap());
    assert!(ra.reports.iter().all(|r| r.is_consistent()));
}

#[test]
fn experiment_failure_keeps_partial_rows() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_config(dir.path());
    cfg.format = Format::Json;
    cfg.experiment.edge_thresholds = vec![0.01, -1.0];
    assert!(cmd_experiment(&cfg).is_err());
    assert!(!dir.path().join("report.json").exists());
    let partial = read_reports(dir.path().join("report.partial.json")).unwrap();
    assert_eq!(partial.len(), 8);
    assert!(partial[7].remaining_edge_pct.is_some());
}

#[test]
fn binary_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_prunefield");
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(Command::new(bin).output().unwrap().status.code(), Some(2));
    let missing = Command::new(bin)
        .args(["eval", "nope.ckpt", "--out-dir"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(missing.status.code(), Some(1));

    let config = dir.path().join("run.json");
    fs::write(
        &config,
        r#"{"arch": {"depth": 2, "width": 8, "skip_at": 1, "n_freqs": 1}, "train": {"batch_size": 32}}"#,
    )
    .unwrap();
    let out_dir = dir.path().join("out");
    let ok = Command::new(bin)
        .args(["train", "--iterations", "5", "--config"])
        .arg(&config)
        .arg("--out-dir")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert_eq!(ok.status.code(), Some(0), "{}", String::from_utf8_lossy(&ok.stderr));
    assert!(out_dir.join("train.ckpt").exists());
    assert!(out_dir.join("train.ppm").exists());
    assert!(out_dir.join("train.csv").exists());

    let no_width = Command::new(bin)
        .args(["prune", "--strategy", "uniform"])
        .arg(out_dir.join("train.ckpt"))
        .arg("--out-dir")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert_eq!(no_width.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&no_width.stderr).contains("--target-width"));
}

#[test]
fn checkpoint_round_trip_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let ckpt = cmd_train(&cfg, "train").unwrap().checkpoint.unwrap();
    let bytes = fs::read(&ckpt).unwrap();
    let again = dir.path().join("again.ckpt");
    checkpoint::save(&checkpoint::load(&ckpt).unwrap(), &again).unwrap();
    assert_eq!(fs::read(again).unwrap(), bytes);
}

#[test]
#[ignore = "long calibration run (about 20 minutes on one core)"]
fn long_training_reaches_25_db() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = RunConfig::default();
    cfg.out_dir = dir.path().to_path_buf();
    cfg.arch.depth = 4;
    cfg.arch.skip_at = 2;
    cfg.train.iterations = 20_000;
    let out = cmd_train(&cfg, "train").unwrap();
    assert!(out.report.psnr.db().unwrap() >= 25.0, "{}", out.report.psnr);
}
