//! Run records: everything needed to repeat a command and check its
//! outputs.

use std::path::{Path, PathBuf};

use lsir_core::causal::{EngineConfig, InferenceConfig};
use lsir_core::data::{ColumnRef, Family};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::{CliError, CliResult};

pub const SCHEMA_VERSION: u32 = 1;
pub const ARTIFACT: &str = "lsir";
pub const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Where and how a two-column data set is read.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputSpec {
    pub path: PathBuf,
    pub x_col: ColumnRef,
    pub y_col: ColumnRef,
    pub header: bool,
}

/// Resolved configuration of one command, without its seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum CommandConfig {
    Synth {
        family: Family,
        n: usize,
        out: PathBuf,
    },
    Fit {
        input: InputSpec,
        engine: EngineConfig,
        swap: bool,
        curve: Option<PathBuf>,
        grid_points: usize,
    },
    Direction {
        input: InputSpec,
        inference: InferenceConfig,
    },
    Benchmark {
        manifest: PathBuf,
        inference: InferenceConfig,
        out: PathBuf,
    },
}

impl CommandConfig {
    pub fn name(&self) -> &'static str {
        match self {
            CommandConfig::Synth { .. } => "synth",
            CommandConfig::Fit { .. } => "fit",
            CommandConfig::Direction { .. } => "direction",
            CommandConfig::Benchmark { .. } => "benchmark",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub wall_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub schema_version: u32,
    pub artifact: String,
    pub artifact_version: String,
    pub config: CommandConfig,
    pub seed: u64,
    /// Not part of the replay comparison.
    pub timings: Timings,
    pub outputs: Value,
}

impl RunRecord {
    pub fn new(config: CommandConfig, seed: u64, wall_seconds: f64, outputs: Value) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            artifact: ARTIFACT.to_string(),
            artifact_version: ARTIFACT_VERSION.to_string(),
            config,
            seed,
            timings: Timings { wall_seconds },
            outputs,
        }
    }

    pub fn save(&self, path: &Path) -> CliResult<()> {
        let file = std::fs::File::create(path)?;
        let mut w = std::io::BufWriter::new(file);
        crate::write_json(&mut w, self)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)?;
        let record: RunRecord = serde_json::from_str(&text)?;
        if record.artifact != ARTIFACT {
            return Err(CliError::Config(format!("record was written by {:?}, not {ARTIFACT}", record.artifact)));
        }
        if record.schema_version != SCHEMA_VERSION {
            return Err(CliError::Config(format!(
                "record schema version {} is not supported (expected {SCHEMA_VERSION})",
                record.schema_version
            )));
        }
        Ok(record)
    }
}

/// JSON pointer of the first place where `a` and `b` differ.
pub fn first_difference(a: &Value, b: &Value) -> Option<String> {
    fn walk(a: &Value, b: &Value, at: &mut String) -> bool {
        match (a, b) {
            (Value::Object(x), Value::Object(y)) => {
                if x.len() != y.len() || x.keys().any(|k| !y.contains_key(k)) {
                    return false;
                }
                for (k, v) in x {
                    let len = at.len();
                    at.push('/');
                    at.push_str(k);
                    if !walk(v, &y[k], at) {
                        return false;
                    }
                    at.truncate(len);
                }
                true
            }
            (Value::Array(x), Value::Array(y)) => {
                if x.len() != y.len() {
                    return false;
                }
                for (i, (u, v)) in x.iter().zip(y).enumerate() {
                    let len = at.len();
                    at.push_str(&format!("/{i}"));
                    if !walk(u, v, at) {
                        return false;
                    }
                    at.truncate(len);
                }
                true
            }
            _ => a == b,
        }
    }
    let mut at = String::new();
    if walk(a, b, &mut at) {
        None
    } else if at.is_empty() {
        Some("/".to_string())
    } else {
        Some(at)
    }
}
