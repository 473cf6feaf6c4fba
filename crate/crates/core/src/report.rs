//! Experiment result rows and their CSV/JSON files.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::RgbImage;
use crate::metrics::{self, psnr_from_mse, ImagePair, Psnr};
use crate::mlp::MlpModel;

/// Column order shared by both file formats.
pub const COLUMNS: [&str; 8] = [
    "label",
    "strategy",
    "params",
    "size_bytes",
    "psnr",
    "mse",
    "sec_per_iter",
    "remaining_edge_pct",
];

/// PSNR reference peak for images held in `[0, 1]`.
pub const MAX_VALUE: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    /// Guesses the format from a file extension.
    pub fn from_path(path: &Path) -> Result<Self> {
        match path.extension().and_then(|e| e.to_str()) {
            Some("csv") => Ok(Format::Csv),
            Some("json") => Ok(Format::Json),
            _ => Err(Error::InvalidArgument(format!(
                "cannot tell report format of {}",
                path.display()
            ))),
        }
    }
}

impl std::str::FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(Error::InvalidArgument(format!("unknown report format {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub label: String,
    /// `baseline`, or the name of the pruning strategy that produced the model.
    pub strategy: String,
    pub params: usize,
    pub size_bytes: usize,
    pub psnr: Psnr,
    pub mse: f64,
    /// Mean training time per iteration; `None` when timing was not recorded.
    pub sec_per_iter: Option<f64>,
    pub remaining_edge_pct: Option<f64>,
}

impl ExperimentReport {
    /// Scores `render` against `reference` and records the model's size.
    pub fn measure(
        label: impl Into<String>,
        strategy: impl Into<String>,
        model: &MlpModel,
        reference: &RgbImage,
        render: &RgbImage,
    ) -> Result<Self> {
        let pair = ImagePair::new(reference, render)?;
        let mse = metrics::mse(&pair);
        Ok(Self {
            label: label.into(),
            strategy: strategy.into(),
            params: metrics::param_count(model),
            size_bytes: metrics::model_size_bytes(model),
            psnr: metrics::psnr(&pair, MAX_VALUE)?,
            mse,
            sec_per_iter: None,
            remaining_edge_pct: None,
        })
    }

    /// Whether `psnr` is what `mse` implies, to within 1e-9 dB.
    pub fn is_consistent(&self) -> bool {
        match (self.psnr, psnr_from_mse(self.mse, MAX_VALUE)) {
            (Psnr::Infinite, Psnr::Infinite) => true,
            (Psnr::Finite(a), Psnr::Finite(b)) => (a - b).abs() <= 1e-9,
            _ => false,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct JsonRow {
    label: String,
    strategy: String,
    params: usize,
    size_bytes: usize,
    psnr: Option<f64>,
    psnr_infinite: bool,
    mse: f64,
    sec_per_iter: Option<f64>,
    remaining_edge_pct: Option<f64>,
}

impl From<&ExperimentReport> for JsonRow {
    fn from(r: &ExperimentReport) -> Self {
        Self {
            label: r.label.clone(),
            strategy: r.strategy.clone(),
            params: r.params,
            size_bytes: r.size_bytes,
            psnr: r.psnr.db(),
            psnr_infinite: r.psnr.is_infinite(),
            mse: r.mse,
            sec_per_iter: r.sec_per_iter,
            remaining_edge_pct: r.remaining_edge_pct,
        }
    }
}

impl TryFrom<JsonRow> for ExperimentReport {
    type Error = Error;

    fn try_from(row: JsonRow) -> Result<Self> {
        let psnr = match (row.psnr, row.psnr_infinite) {
            (None, true) => Psnr::Infinite,
            (Some(v), false) => Psnr::Finite(v),
            _ => {
                return Err(Error::Config(format!(
                    "report {:?}: psnr and psnr_infinite disagree",
                    row.label
                )))
            }
        };
        Ok(Self {
            label: row.label,
            strategy: row.strategy,
            params: row.params,
            size_bytes: row.size_bytes,
            psnr,
            mse: row.mse,
            sec_per_iter: row.sec_per_iter,
            remaining_edge_pct: row.remaining_edge_pct,
        })
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

/// Renders reports in the given format. Floats use the shortest text that
/// parses back to the same value.
pub fn render_reports(reports: &[ExperimentReport], format: Format) -> Result<Vec<u8>> {
    if reports.is_empty() {
        return Err(Error::InvalidArgument("no reports to emit".into()));
    }
    match format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(COLUMNS)?;
            for r in reports {
                w.write_record([
                    r.label.clone(),
                    r.strategy.clone(),
                    r.params.to_string(),
                    r.size_bytes.to_string(),
                    r.psnr.to_string(),
                    r.mse.to_string(),
                    fmt_opt(r.sec_per_iter),
                    fmt_opt(r.remaining_edge_pct),
                ])?;
            }
            w.into_inner().map_err(|e| Error::Io(e.into_error()))
        }
        Format::Json => {
            let rows: Vec<JsonRow> = reports.iter().map(JsonRow::from).collect();
            let mut out = serde_json::to_vec_pretty(&rows)?;
            out.push(b'\n');
            Ok(out)
        }
    }
}

pub fn emit_report(reports: &[ExperimentReport], format: Format, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = render_reports(reports, format)?;
    fs::write(path, bytes).map_err(|e| Error::file(path, e))
}

fn parse_opt(field: &str, what: &str) -> Result<Option<f64>> {
    if field.is_empty() {
        return Ok(None);
    }
    parse_f64(field, what).map(Some)
}

fn parse_f64(field: &str, what: &str) -> Result<f64> {
    field
        .parse()
        .map_err(|_| Error::Config(format!("bad {what} value {field:?}")))
}

fn parse_usize(field: &str, what: &str) -> Result<usize> {
    field
        .parse()
        .map_err(|_| Error::Config(format!("bad {what} value {field:?}")))
}

pub fn parse_reports(bytes: &[u8], format: Format) -> Result<Vec<ExperimentReport>> {
    match format {
        Format::Json => {
            let rows: Vec<JsonRow> = serde_json::from_slice(bytes)?;
            rows.into_iter().map(ExperimentReport::try_from).collect()
        }
        Format::Csv => {
            let mut r = csv::Reader::from_reader(bytes);
            let header = r.headers()?.clone();
            if header.iter().ne(COLUMNS) {
                return Err(Error::Config(format!("unexpected report columns {header:?}")));
            }
            let mut out = Vec::new();
            for rec in r.records() {
                let rec = rec?;
                let psnr = match &rec[4] {
                    "inf" => Psnr::Infinite,
                    v => Psnr::Finite(parse_f64(v, "psnr")?),
                };
                out.push(ExperimentReport {
                    label: rec[0].to_string(),
                    strategy: rec[1].to_string(),
                    params: parse_usize(&rec[2], "params")?,
                    size_bytes: parse_usize(&rec[3], "size_bytes")?,
                    psnr,
                    mse: parse_f64(&rec[5], "mse")?,
                    sec_per_iter: parse_opt(&rec[6], "sec_per_iter")?,
                    remaining_edge_pct: parse_opt(&rec[7], "remaining_edge_pct")?,
                });
            }
            Ok(out)
        }
    }
}

pub fn read_reports(path: impl AsRef<Path>) -> Result<Vec<ExperimentReport>> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::file(path, e))?;
    parse_reports(&bytes, Format::from_path(path)?)
}
