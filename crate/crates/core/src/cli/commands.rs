use std::fs;
use std::path::{Path, PathBuf};

use crate::checkpoint;
use crate::error::{Error, Result};
use crate::image::RgbImage;
use crate::mlp::{render_image, train, MlpModel, PixelDataset, TrainConfig};
use crate::pruning::{prune_edges, prune_model, NeuronStrategy, PruneReport, Strategy};
use crate::report::{emit_report, ExperimentReport, Format};
use crate::tensor::RngStream;

use super::config::{PrunePlan, RunConfig};

/// Files and numbers produced by one pipeline stage.
#[derive(Debug, Clone)]
pub struct StageOutput {
    pub model: MlpModel,
    pub report: ExperimentReport,
    pub checkpoint: Option<PathBuf>,
    pub render: PathBuf,
    pub report_path: PathBuf,
}

fn ext(format: Format) -> &'static str {
    match format {
        Format::Csv => "csv",
        Format::Json => "json",
    }
}

fn prepare_out_dir(cfg: &RunConfig) -> Result<&Path> {
    let dir = cfg.out_dir.as_path();
    fs::create_dir_all(dir).map_err(|e| Error::file(dir, e))?;
    Ok(dir)
}

/// Trains `model` on `reference`, keeping weights at checkpoint precision so
/// the in-memory model and the saved one agree.
fn fit(model: MlpModel, reference: &RgbImage, train_cfg: &TrainConfig) -> Result<(MlpModel, f64)> {
    let dataset = PixelDataset::from_image(reference);
    let outcome = train(model, &dataset, train_cfg)?;
    Ok((outcome.model.round_to_f32(), outcome.sec_per_iter))
}

fn evaluate(
    label: &str,
    strategy: &str,
    model: &MlpModel,
    reference: &RgbImage,
) -> Result<(ExperimentReport, RgbImage)> {
    // Scored at the 8-bit precision it is saved with.
    let render = render_image(model, reference.width(), reference.height())?.quantized();
    let report = ExperimentReport::measure(label, strategy, model, reference, &render)?;
    Ok((report, render))
}

fn write_stage(
    cfg: &RunConfig,
    name: &str,
    model: MlpModel,
    report: ExperimentReport,
    render: &RgbImage,
    save_model: bool,
) -> Result<StageOutput> {
    let dir = prepare_out_dir(cfg)?;
    let checkpoint = if save_model {
        let p = dir.join(format!("{name}.ckpt"));
        checkpoint::save(&model, &p)?;
        Some(p)
    } else {
        None
    };
    let render_path = dir.join(format!("{name}.ppm"));
    render.write_ppm(&render_path)?;
    let report_path = dir.join(format!("{name}.{}", ext(cfg.format)));
    emit_report(std::slice::from_ref(&report), cfg.format, &report_path)?;
    Ok(StageOutput {
        model,
        report,
        checkpoint,
        render: render_path,
        report_path,
    })
}

fn timing(cfg: &RunConfig, sec_per_iter: f64, iterations: usize) -> Option<f64> {
    (cfg.record_timing && iterations > 0).then_some(sec_per_iter)
}

/// Fresh initialization from `seed`, then training.
pub fn cmd_train(cfg: &RunConfig, name: &str) -> Result<StageOutput> {
    cfg.validate()?;
    let reference = cfg.image()?;
    let init = MlpModel::init(cfg.arch.spec(), &mut RngStream::new(cfg.seed))?;
    let train_cfg = cfg.train_config();
    let (model, spi) = fit(init, &reference, &train_cfg)?;
    let (mut report, render) = evaluate(name, "baseline", &model, &reference)?;
    report.sec_per_iter = timing(cfg, spi, train_cfg.iterations);
    write_stage(cfg, name, model, report, &render, true)
}

/// Applies the configured pruning step to an in-memory model.
pub fn apply_prune(model: &MlpModel, cfg: &RunConfig) -> Result<(MlpModel, PruneReport)> {
    match cfg.prune.plan()? {
        PrunePlan::Edge { threshold } => prune_edges(model, threshold),
        PrunePlan::Neurons {
            strategy,
            target_width,
        } => prune_model(model, strategy, target_width, cfg.seed),
    }
}

/// Prunes a checkpoint; writes `<name>.ckpt` and the prune report as JSON.
pub fn cmd_prune(input: &Path, cfg: &RunConfig, name: &str) -> Result<(PathBuf, PruneReport)> {
    let model = checkpoint::load(input)?;
    let (pruned, report) = apply_prune(&model, cfg)?;
    let dir = prepare_out_dir(cfg)?;
    let out = dir.join(format!("{name}.ckpt"));
    checkpoint::save(&pruned, &out)?;
    let report_path = dir.join(format!("{name}.json"));
    let mut text = serde_json::to_string_pretty(&report)?;
    text.push('\n');
    fs::write(&report_path, text).map_err(|e| Error::file(&report_path, e))?;
    Ok((out, report))
}

/// Continues training a checkpoint's weights.
pub fn cmd_retrain(input: &Path, cfg: &RunConfig, name: &str) -> Result<StageOutput> {
    cfg.validate()?;
    let reference = cfg.image()?;
    let model = checkpoint::load(input)?;
    let retrain_cfg = cfg.retrain_config();
    let (model, spi) = fit(model, &reference, &retrain_cfg)?;
    let (mut report, render) = evaluate(name, "retrain", &model, &reference)?;
    report.sec_per_iter = timing(cfg, spi, retrain_cfg.iterations);
    write_stage(cfg, name, model, report, &render, true)
}

/// Renders a checkpoint at the reference image's size and scores it.
pub fn cmd_eval(input: &Path, cfg: &RunConfig, name: &str) -> Result<StageOutput> {
    let reference = cfg.image()?;
    let model = checkpoint::load(input)?;
    let (report, render) = evaluate(name, "eval", &model, &reference)?;
    write_stage(cfg, name, model, report, &render, false)
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub report_path: PathBuf,
    pub reports: Vec<ExperimentReport>,
}

/// Baseline, then every (strategy, width) pair pruned from that baseline and
/// retrained with the same budget and seed, then any edge thresholds.
///
/// On failure the rows finished so far are written to `report.partial.<ext>`
/// before the error is returned.
pub fn cmd_experiment(cfg: &RunConfig) -> Result<ExperimentOutput> {
    cfg.validate_experiment()?;
    let dir = prepare_out_dir(cfg)?.to_path_buf();
    let mut reports = Vec::new();
    match run_grid(cfg, &dir, &mut reports) {
        Ok(()) => {
            let report_path = dir.join(format!("report.{}", ext(cfg.format)));
            emit_report(&reports, cfg.format, &report_path)?;
            Ok(ExperimentOutput {
                report_path,
                reports,
            })
        }
        Err(e) => {
            if !reports.is_empty() {
                let partial = dir.join(format!("report.partial.{}", ext(cfg.format)));
                emit_report(&reports, cfg.format, &partial)?;
            }
            Err(e)
        }
    }
}

fn run_grid(cfg: &RunConfig, dir: &Path, reports: &mut Vec<ExperimentReport>) -> Result<()> {
    let reference = cfg.image()?;
    let train_cfg = cfg.train_config();
    let retrain_cfg = cfg.retrain_config();
    let beta = cfg.prune.beta;
    let reweight = cfg.prune.reweight;

    let init = MlpModel::init(cfg.arch.spec(), &mut RngStream::new(cfg.seed))?;
    let (baseline, spi) = fit(init, &reference, &train_cfg)?;
    let (mut row, _) = evaluate("baseline", "baseline", &baseline, &reference)?;
    row.sec_per_iter = timing(cfg, spi, train_cfg.iterations);
    reports.push(row);
    if cfg.experiment.save_checkpoints {
        checkpoint::save(&baseline, dir.join("baseline.ckpt"))?;
    }

    for &kind in &cfg.experiment.strategies {
        let strategy = NeuronStrategy::from_kind(kind, beta, reweight)?;
        for &width in &cfg.experiment.widths {
            let label = format!("{kind}-{width}");
            let (pruned, _) = prune_model(&baseline, strategy, width, cfg.seed)?;
            let (model, spi) = fit(pruned.round_to_f32(), &reference, &retrain_cfg)?;
            let (mut row, _) = evaluate(&label, kind.as_str(), &model, &reference)?;
            row.sec_per_iter = timing(cfg, spi, retrain_cfg.iterations);
            reports.push(row);
            if cfg.experiment.save_checkpoints {
                checkpoint::save(&model, dir.join(format!("{label}.ckpt")))?;
            }
        }
    }

    for &threshold in &cfg.experiment.edge_thresholds {
        let (pruned, prune_report) = prune_edges(&baseline, threshold)?;
        let label = format!("{}-{threshold}", Strategy::Edge);
        let (mut row, _) = evaluate(&label, Strategy::Edge.as_str(), &pruned, &reference)?;
        row.remaining_edge_pct = Some(prune_report.remaining_edge_pct());
        reports.push(row);
    }
    Ok(())
}
