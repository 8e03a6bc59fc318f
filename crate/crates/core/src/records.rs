//! JSON-lines telemetry and reweighting records.

use std::io::{BufRead, Write};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::reweighting::Reweighting;
use crate::sampler::StepRecord;

/// The clique reweighting applied at one step: `(u, v, c_uv)` for every pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReweightingRecord {
    #[serde(rename = "i")]
    pub step: usize,
    #[serde(rename = "w")]
    pub weight: f64,
    pub pairs: Vec<(usize, usize, f64)>,
}

impl ReweightingRecord {
    pub fn new(step: usize, weight: f64, rw: &Reweighting) -> Self {
        Self {
            step,
            weight,
            pairs: rw.pairs().iter().map(|&((u, v), c)| (u, v, c)).collect(),
        }
    }
}

/// Writes one value as a JSON line.
pub fn write_json_line<W: Write, T: Serialize>(out: &mut W, value: &T) -> Result<()> {
    serde_json::to_writer(&mut *out, value).map_err(std::io::Error::from)?;
    out.write_all(b"\n")?;
    Ok(())
}

/// Reads every non-blank line as a JSON value.
pub fn read_json_lines<R: BufRead, T: DeserializeOwned>(reader: R) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let value = serde_json::from_str(&line).map_err(|e| Error::Record {
            line: idx + 1,
            reason: e.to_string(),
        })?;
        out.push(value);
    }
    Ok(out)
}

pub fn read_step_records<R: BufRead>(reader: R) -> Result<Vec<StepRecord>> {
    read_json_lines(reader)
}

pub fn read_reweighting_records<R: BufRead>(reader: R) -> Result<Vec<ReweightingRecord>> {
    read_json_lines(reader)
}
