//! Report structures and file writers. Every numeric CSV cell is printed
//! with `{:.17e}` so that repeated runs are byte-identical.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use piecewise_cm::CMatrix;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::CliError;

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// One pass/fail entry. `skipped` marks checks that could not be evaluated
/// (for instance an order fit on errors at the noise floor); they do not fail
/// the run but are never silently dropped.
#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub skipped: bool,
    pub value: f64,
    pub tolerance: f64,
    pub detail: String,
}

impl Check {
    /// Passes when `value ≤ tolerance`.
    pub fn at_most(name: impl Into<String>, value: f64, tolerance: f64, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed: value <= tolerance,
            skipped: false,
            value,
            tolerance,
            detail: detail.into(),
        }
    }

    /// Passes when `value ≥ bound`.
    pub fn at_least(name: impl Into<String>, value: f64, bound: f64, detail: impl Into<String>) -> Self {
        Self {
            passed: value >= bound,
            ..Self::at_most(name, value, bound, detail)
        }
    }

    pub fn flag(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed,
            skipped: false,
            value: if passed { 0.0 } else { 1.0 },
            tolerance: 0.0,
            detail: detail.into(),
        }
    }

    pub fn skipped(name: impl Into<String>, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed: true,
            skipped: true,
            value: 0.0,
            tolerance: 0.0,
            detail: detail.into(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RunEntry {
    pub id: String,
    pub kind: String,
    pub status: String,
    pub output: Option<String>,
    pub metrics: serde_json::Value,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunReport {
    pub command: String,
    pub version: String,
    pub config_sha256: String,
    pub scenario: Option<String>,
    pub seed: Option<u64>,
    pub passed: bool,
    pub runs: Vec<RunEntry>,
    pub checks: Vec<Check>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub convergence: Option<serde_json::Value>,
}

impl RunReport {
    pub fn new(command: &str, config_sha256: &str, scenario: Option<String>, seed: Option<u64>) -> Self {
        Self {
            command: command.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            config_sha256: config_sha256.into(),
            scenario,
            seed,
            passed: true,
            runs: Vec::new(),
            checks: Vec::new(),
            convergence: None,
        }
    }

    pub fn finish(&mut self) {
        self.passed = self.checks.iter().all(|c| c.passed) && self.runs.iter().all(|r| r.status == "ok");
    }
}

/// Wall-clock timings, kept out of the report so that it stays reproducible.
#[derive(Debug, Default, Serialize)]
pub struct Timings {
    pub seconds: Vec<(String, f64)>,
}

/// A numeric table written as CSV.
#[derive(Clone, Debug, Default)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(columns: Vec<String>) -> Self {
        Self {
            columns,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self, config_sha256: &str) -> String {
        let mut s = format!("# config_sha256={config_sha256}\n");
        s.push_str(&self.columns.join(","));
        s.push('\n');
        for row in &self.rows {
            for (i, v) in row.iter().enumerate() {
                if i > 0 {
                    s.push(',');
                }
                let _ = write!(s, "{v:.17e}");
            }
            s.push('\n');
        }
        s
    }
}

/// Column names for the real and imaginary parts of a `d × d` matrix.
pub fn matrix_columns(prefix: &str, d: usize) -> Vec<String> {
    let mut out = Vec::with_capacity(2 * d * d);
    for i in 0..d {
        for j in 0..d {
            out.push(format!("{prefix}_{i}{j}_re"));
            out.push(format!("{prefix}_{i}{j}_im"));
        }
    }
    out
}

pub fn matrix_values(m: &CMatrix) -> impl Iterator<Item = f64> + '_ {
    m.as_slice().iter().flat_map(|z| [z.re, z.im])
}

/// Owns the output directory; each file is written once, whole.
pub struct OutputDir {
    pub dir: PathBuf,
}

impl OutputDir {
    pub fn create(dir: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
        Ok(Self { dir: dir.to_path_buf() })
    }

    pub fn write(&self, name: &str, contents: &str) -> Result<(), CliError> {
        let path = self.dir.join(name);
        std::fs::write(&path, contents).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
    }

    pub fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
        text.push('\n');
        self.write(name, &text)
    }
}
