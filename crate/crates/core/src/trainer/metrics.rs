use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One line of `metrics.jsonl`, written after every iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub iteration: usize,
    pub global_step: u64,
    /// Mean and std of undiscounted returns of episodes finished this iteration.
    pub episodic_return_mean: Option<f64>,
    pub episodic_return_std: Option<f64>,
    pub episodes: usize,
    pub policy_loss: Option<f64>,
    pub value_loss: Option<f64>,
    pub entropy: Option<f64>,
    pub iqn_loss: Option<f64>,
    pub clip_fraction: Option<f64>,
    pub approx_kl: Option<f64>,
    pub learning_rate: f64,
    pub gate_open: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_time: Option<f64>,
}

/// First line of a metrics file: the full run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsHeader {
    pub config: BTreeMap<String, String>,
}

/// Writes the header line followed by records, one JSON object per line.
pub struct MetricsWriter<W: Write> {
    out: W,
}

impl<W: Write> MetricsWriter<W> {
    pub fn new(mut out: W, header: &MetricsHeader) -> Result<Self> {
        serde_json::to_writer(&mut out, header)?;
        out.write_all(b"\n")?;
        Ok(Self { out })
    }

    pub fn write(&mut self, record: &MetricsRecord) -> Result<()> {
        serde_json::to_writer(&mut self.out, record)?;
        self.out.write_all(b"\n")?;
        self.out.flush()?;
        Ok(())
    }
}

/// A parsed metrics file.
#[derive(Debug, Clone, Default)]
pub struct MetricsLog {
    pub header: Option<MetricsHeader>,
    pub records: Vec<MetricsRecord>,
}

impl MetricsLog {
    pub fn read<R: BufRead>(reader: R, path: &Path) -> Result<Self> {
        let mut log = MetricsLog::default();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let err = |msg: String| Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                msg,
            };
            let value: serde_json::Value = serde_json::from_str(&line).map_err(|e| err(e.to_string()))?;
            if value.get("config").is_some() {
                log.header = Some(serde_json::from_value(value).map_err(|e| err(e.to_string()))?);
            } else {
                log.records
                    .push(serde_json::from_value(value).map_err(|e| err(e.to_string()))?);
            }
        }
        Ok(log)
    }

    pub fn read_file(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::read(std::io::BufReader::new(file), path)
    }

    pub fn config_value(&self, key: &str) -> Option<&str> {
        self.header.as_ref()?.config.get(key).map(String::as_str)
    }
}
