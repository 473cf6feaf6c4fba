//! Command-line driver: configuration, pipeline stages and argument parsing.

mod commands;
mod config;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use commands::{
    apply_prune, cmd_eval, cmd_experiment, cmd_prune, cmd_retrain, cmd_train, ExperimentOutput,
    StageOutput,
};
pub use config::{
    fixture_image, ArchConfig, ExperimentConfig, PruneConfig, PruneKind, PrunePlan, RunConfig,
    FIXTURE_GRAIN, FIXTURE_SIZE,
};

use crate::error::Result;
use crate::pruning::Criterion;
use crate::report::Format;

#[derive(Debug, Parser)]
#[command(name = "prunefield", version, about = "Train and prune coordinate MLPs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a fresh model on the task image.
    Train {
        #[command(flatten)]
        common: Common,
    },
    /// Prune a checkpoint by edge threshold or to a target width.
    Prune {
        checkpoint: PathBuf,
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        prune: PruneFlags,
    },
    /// Continue training a (pruned) checkpoint.
    Retrain {
        checkpoint: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Render a checkpoint and score it against the task image.
    Eval {
        checkpoint: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Baseline plus every configured strategy and width, in one report.
    Experiment {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        prune: PruneFlags,
    },
}

#[derive(Debug, Args)]
pub struct Common {
    /// JSON run configuration; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Task image (binary PPM); defaults to the bundled 64×64 scene.
    #[arg(long)]
    pub image: Option<PathBuf>,
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long, value_parser = parse_format)]
    pub format: Option<Format>,
    /// Stem of the files this command writes.
    #[arg(long)]
    pub name: Option<String>,
    /// Leave iteration time out of reports.
    #[arg(long)]
    pub no_timing: bool,
}

#[derive(Debug, Args)]
pub struct PruneFlags {
    #[arg(long, value_enum)]
    pub strategy: Option<PruneKind>,
    #[arg(long, value_parser = parse_criterion)]
    pub criterion: Option<Criterion>,
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long)]
    pub target_width: Option<usize>,
    #[arg(long)]
    pub beta: Option<f64>,
    /// Keep sampled neurons' outgoing weights as they are.
    #[arg(long)]
    pub no_reweight: bool,
}

fn parse_format(s: &str) -> Result<Format, String> {
    s.parse().map_err(|e: crate::Error| e.to_string())
}

fn parse_criterion(s: &str) -> Result<Criterion, String> {
    s.parse().map_err(|e: crate::Error| e.to_string())
}

impl Common {
    fn config(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(d) = &self.out_dir {
            cfg.out_dir = d.clone();
        }
        if let Some(i) = &self.image {
            cfg.image = Some(i.clone());
        }
        if let Some(n) = self.iterations {
            cfg.train.iterations = n;
            cfg.retrain_iterations = Some(n);
        }
        if let Some(f) = self.format {
            cfg.format = f;
        }
        if self.no_timing {
            cfg.record_timing = false;
        }
        Ok(cfg)
    }

    fn name<'a>(&'a self, default: &'a str) -> &'a str {
        self.name.as_deref().unwrap_or(default)
    }
}

impl PruneFlags {
    fn apply(&self, cfg: &mut RunConfig) {
        let p = &mut cfg.prune;
        if let Some(s) = self.strategy {
            p.strategy = Some(s);
        }
        if let Some(c) = self.criterion {
            p.criterion = c;
        }
        if let Some(t) = self.threshold {
            p.threshold = Some(t);
        }
        if let Some(w) = self.target_width {
            p.target_width = Some(w);
        }
        if let Some(b) = self.beta {
            p.beta = b;
        }
        if self.no_reweight {
            p.reweight = false;
        }
    }
}

/// Runs one parsed invocation and returns the lines to print.
pub fn execute(cli: Cli) -> Result<Vec<String>> {
    let mut lines = Vec::new();
    match cli.command {
        Command::Train { common } => {
            let cfg = common.config()?;
            let out = cmd_train(&cfg, common.name("train"))?;
            lines.push(stage_line(&out));
        }
        Command::Prune {
            checkpoint,
            common,
            prune,
        } => {
            let mut cfg = common.config()?;
            prune.apply(&mut cfg);
            let (path, report) = cmd_prune(&checkpoint, &cfg, common.name("prune"))?;
            lines.push(format!(
                "{}: {} params {} -> {}, edges {:.2}% remaining",
                path.display(),
                report.strategy,
                report.params_before,
                report.params_after,
                report.remaining_edge_pct()
            ));
        }
        Command::Retrain { checkpoint, common } => {
            let cfg = common.config()?;
            let out = cmd_retrain(&checkpoint, &cfg, common.name("retrain"))?;
            lines.push(stage_line(&out));
        }
        Command::Eval { checkpoint, common } => {
            let cfg = common.config()?;
            let out = cmd_eval(&checkpoint, &cfg, common.name("eval"))?;
            lines.push(stage_line(&out));
        }
        Command::Experiment { common, prune } => {
            let mut cfg = common.config()?;
            prune.apply(&mut cfg);
            let out = cmd_experiment(&cfg)?;
            for r in &out.reports {
                lines.push(format!("{:<24} params {:>8}  psnr {:.3}", r.label, r.params, r.psnr));
            }
            lines.push(format!("wrote {}", out.report_path.display()));
        }
    }
    Ok(lines)
}

fn stage_line(out: &StageOutput) -> String {
    let r = &out.report;
    format!(
        "{}: psnr {} mse {} params {} size {} B -> {}",
        r.label,
        r.psnr,
        r.mse,
        r.params,
        r.size_bytes,
        out.report_path.display()
    )
}

/// Parses `args`, runs the command and returns the process exit code:
/// 0 on success, 2 for usage errors, 1 for everything else.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(cli) {
        Ok(lines) => {
            for l in lines {
                println!("{l}");
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}
