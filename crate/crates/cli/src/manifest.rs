use std::path::{Path, PathBuf};

use hypersparse::{OptimizerConfig, SparsifierConfig, Summary};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsMode {
    pub wmin: f64,
    pub wmax: f64,
    /// δ was clamped to the smallest normal double.
    pub underflow: bool,
}

/// Every parameter that influences the output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub epsilon: f64,
    pub delta: f64,
    pub eps_mode: Option<EpsMode>,
    pub kappa: f64,
    pub seed: u64,
    pub rank_bound: usize,
    pub gap_tol: f64,
    pub max_iters: usize,
    pub line_search_tol: f64,
    pub refresh_period: usize,
}

impl ConfigEcho {
    pub fn sparsifier_config(&self) -> SparsifierConfig {
        SparsifierConfig {
            epsilon: self.epsilon,
            delta: self.delta,
            kappa: self.kappa,
            seed: self.seed,
            rank_bound: self.rank_bound,
            optimizer: OptimizerConfig {
                gap_tol: self.gap_tol,
                max_iters: self.max_iters,
                line_search_tol: self.line_search_tol,
            },
            refresh_period: self.refresh_period,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileRecord {
    pub path: PathBuf,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputRecord {
    pub path: PathBuf,
    pub sha256: String,
    pub n: usize,
    pub m_hint: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Outputs {
    pub sparsifier: FileRecord,
    pub telemetry: Option<FileRecord>,
    pub reweightings: Option<FileRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunStats {
    pub summary: Summary,
    /// `4 c n ln(1 + 2W/(ηn))`.
    pub size_bound: f64,
    pub elapsed_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub config: ConfigEcho,
    pub input: InputRecord,
    pub outputs: Outputs,
    pub stats: RunStats,
}

impl RunManifest {
    pub fn write(&self, path: &Path) -> CliResult<()> {
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        std::fs::write(path, text + "\n").map_err(CliError::file(path))
    }

    pub fn read(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(CliError::file(path))?;
        serde_json::from_str(&text).map_err(|e| CliError::File {
            path: path.to_path_buf(),
            source: e.into(),
        })
    }
}
