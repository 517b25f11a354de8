//! Result records and their append-only JSONL and CSV sinks.

use std::fs::OpenOptions;
use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Simulated,
    Analytic,
}

/// One measured or computed quantity, before it is stamped with the
/// experiment id and config hash.
#[derive(Debug, Clone, PartialEq)]
pub struct Metric {
    pub name: String,
    pub value: f64,
    pub std_error: Option<f64>,
    pub episodes: Option<u64>,
    pub truncated: Option<u64>,
    pub provenance: Provenance,
}

impl Metric {
    pub fn analytic(name: impl Into<String>, value: f64) -> Self {
        Metric {
            name: name.into(),
            value,
            std_error: None,
            episodes: None,
            truncated: None,
            provenance: Provenance::Analytic,
        }
    }

    pub fn simulated(
        name: impl Into<String>,
        value: f64,
        std_error: f64,
        episodes: u64,
        truncated: u64,
    ) -> Self {
        Metric {
            name: name.into(),
            value,
            std_error: Some(std_error),
            episodes: Some(episodes),
            truncated: Some(truncated),
            provenance: Provenance::Simulated,
        }
    }

    /// More runs were discarded at the horizon than completed.
    pub fn truncation_dominated(&self) -> bool {
        matches!((self.episodes, self.truncated), (Some(e), Some(t)) if t > e)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRecord {
    pub experiment_id: String,
    pub config_hash: String,
    pub metric: String,
    pub value: f64,
    pub std_error: Option<f64>,
    pub episodes: Option<u64>,
    pub truncated: Option<u64>,
    /// Wall time of the whole experiment; only filled when timing is
    /// requested so that default output is reproducible byte for byte.
    pub seconds: Option<f64>,
    pub provenance: Provenance,
}

impl ResultRecord {
    pub fn new(experiment_id: &str, config_hash: &str, m: Metric, seconds: Option<f64>) -> Self {
        ResultRecord {
            experiment_id: experiment_id.to_string(),
            config_hash: config_hash.to_string(),
            metric: m.name,
            value: m.value,
            std_error: m.std_error,
            episodes: m.episodes,
            truncated: m.truncated,
            seconds,
            provenance: m.provenance,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Jsonl,
    Csv,
}

impl std::str::FromStr for Format {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, HarnessError> {
        match s {
            "jsonl" => Ok(Format::Jsonl),
            "csv" => Ok(Format::Csv),
            other => Err(HarnessError::Config(format!(
                "unknown format `{other}`; use jsonl or csv"
            ))),
        }
    }
}

/// Serialises records; CSV gets a header row when `header` is set.
pub fn render(
    records: &[ResultRecord],
    format: Format,
    header: bool,
) -> Result<Vec<u8>, HarnessError> {
    let mut buf = Vec::new();
    match format {
        Format::Jsonl => {
            for r in records {
                serde_json::to_writer(&mut buf, r).map_err(|e| HarnessError::Io(e.to_string()))?;
                buf.push(b'\n');
            }
        }
        Format::Csv => {
            let mut w = csv::WriterBuilder::new()
                .has_headers(header)
                .from_writer(&mut buf);
            for r in records {
                w.serialize(r)
                    .map_err(|e| HarnessError::Io(e.to_string()))?;
            }
            w.flush().map_err(|e| HarnessError::Io(e.to_string()))?;
        }
    }
    Ok(buf)
}

/// Appends records to `path`. Existing content is never rewritten; a CSV
/// header is written only into an empty file.
pub fn append(path: &Path, records: &[ResultRecord], format: Format) -> Result<(), HarnessError> {
    let io = |e: std::io::Error| HarnessError::Io(format!("{}: {e}", path.display()));
    let mut file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(io)?;
    let empty = file.metadata().map_err(io)?.len() == 0;
    let bytes = render(records, format, empty)?;
    file.write_all(&bytes).map_err(io)
}
