use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use lsir_core::causal::{EngineConfig, EngineKind, PermutationMode, DEFAULT_PERMUTATIONS};
use lsir_core::data::ColumnRef;
use lsir_core::hsicr::HsicrConfig;
use lsir_core::lsir::{BetaInit, GradientForm, LsirConfig};
use lsir_core::lsmi::WidthGrid;
use serde::{Deserialize, Serialize};

#[derive(Parser, Debug, Clone)]
#[command(name = "lsir", version, about = "Cause-effect direction inference by least-squares independence regression")]
pub struct Cli {
    /// Worker threads; all cores when unset.
    #[arg(long, global = true, env = "LSIR_THREADS")]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug, Clone)]
pub enum Command {
    /// Draw a synthetic cause-effect sample and write it as CSV.
    Synth(SynthArgs),
    /// Fit one regression and optionally export the fitted curve.
    Fit(FitArgs),
    /// Test both causal orientations of a two-column data set.
    Direction(DirectionArgs),
    /// Run direction inference over every data set in a manifest.
    Benchmark(BenchmarkArgs),
    /// Re-run a recorded command and check that every number matches.
    Replay(ReplayArgs),
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutputFormat {
    #[default]
    Text,
    Json,
}

#[derive(Args, Debug, Clone)]
pub struct SynthArgs {
    /// cubic-exp, linear-gaussian or poly:c0,c1,...
    #[arg(long)]
    pub family: String,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the run record to this file.
    #[arg(long)]
    pub record: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct InputArgs {
    #[arg(long, short)]
    pub input: PathBuf,
    /// Cause column, by zero-based index or header name.
    #[arg(long, default_value = "0")]
    pub x_col: ColumnRef,
    /// Effect column, by zero-based index or header name.
    #[arg(long, default_value = "1")]
    pub y_col: ColumnRef,
    /// The file has no header row.
    #[arg(long)]
    pub no_header: bool,
}

#[derive(Args, Debug, Clone, Default)]
pub struct EngineArgs {
    #[arg(long, default_value = "lsir")]
    pub engine: EngineKind,
    /// Regression basis widths, as multiples of the median input distance.
    #[arg(long, value_delimiter = ',')]
    pub tau_grid: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub gamma_grid: Option<Vec<f64>>,
    /// Ratio basis widths, as multiples of the median joint distance.
    #[arg(long, value_delimiter = ',')]
    pub sigma_grid: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub lambda_grid: Option<Vec<f64>>,
    /// HSICR penalties.
    #[arg(long, value_delimiter = ',')]
    pub xi_grid: Option<Vec<f64>>,
    #[arg(long)]
    pub restarts: Option<usize>,
    #[arg(long)]
    pub max_iterations: Option<usize>,
    /// Redo LSMI model selection every this many descent steps.
    #[arg(long)]
    pub reselect_every: Option<usize>,
    /// Use `-1 / (2 sigma^2)` as the kernel derivative constant.
    #[arg(long)]
    pub literal_gradient: bool,
    /// Start the descent from zero instead of a ridge fit.
    #[arg(long)]
    pub zero_init: bool,
    /// Fit on the raw scale instead of standardized coordinates.
    #[arg(long)]
    pub no_standardize: bool,
}

impl EngineArgs {
    pub fn config(&self) -> EngineConfig {
        match self.engine {
            EngineKind::Lsir => {
                let mut c = LsirConfig::default();
                if let Some(g) = &self.tau_grid {
                    c.tau_grid = WidthGrid::MedianScaled(g.clone());
                }
                if let Some(g) = &self.gamma_grid {
                    c.gamma_grid = g.clone();
                }
                if let Some(g) = &self.sigma_grid {
                    c.lsmi.sigma_grid = WidthGrid::MedianScaled(g.clone());
                }
                if let Some(g) = &self.lambda_grid {
                    c.lsmi.lambda_grid = g.clone();
                }
                if let Some(r) = self.restarts {
                    c.restarts = r;
                }
                if let Some(m) = self.max_iterations {
                    c.max_iterations = m;
                }
                if let Some(r) = self.reselect_every {
                    c.reselect_every = r;
                }
                if self.literal_gradient {
                    c.gradient = GradientForm::Literal;
                }
                if self.zero_init {
                    c.init = BetaInit::Zero;
                }
                if self.no_standardize {
                    c.standardize = false;
                    c.lsmi.standardize = false;
                }
                EngineConfig::Lsir(c)
            }
            EngineKind::Hsicr => {
                let mut c = HsicrConfig::default();
                if let Some(g) = &self.xi_grid {
                    c.xi_grid = g.clone();
                }
                if let Some(m) = self.max_iterations {
                    c.max_iterations = m;
                }
                if self.no_standardize {
                    c.standardize = false;
                }
                EngineConfig::Hsicr(c)
            }
        }
    }
}

#[derive(Args, Debug, Clone)]
pub struct TestArgs {
    #[arg(long, default_value_t = 0.05)]
    pub delta: f64,
    /// Permutations per orientation; 0 skips the test.
    #[arg(long, default_value_t = DEFAULT_PERMUTATIONS)]
    pub permutations: usize,
    /// fast keeps the observed-data LSMI selection, literal repeats it per permutation.
    #[arg(long, default_value = "fast")]
    pub mode: PermutationMode,
}

#[derive(Args, Debug, Clone)]
pub struct FitArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub engine: EngineArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Regress x on y instead of y on x.
    #[arg(long)]
    pub swap: bool,
    /// Write `x,fitted` over an even grid spanning the inputs.
    #[arg(long)]
    pub curve: Option<PathBuf>,
    #[arg(long, default_value_t = 200)]
    pub grid_points: usize,
    #[arg(long, value_enum, default_value_t)]
    pub output: OutputFormat,
    #[arg(long)]
    pub record: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct DirectionArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub engine: EngineArgs,
    #[command(flatten)]
    pub test: TestArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// json prints the full run record.
    #[arg(long, value_enum, default_value_t)]
    pub output: OutputFormat,
    #[arg(long)]
    pub record: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct BenchmarkArgs {
    /// CSV with columns name,path,truth and optional x_col,y_col,header.
    #[arg(long)]
    pub manifest: PathBuf,
    #[command(flatten)]
    pub engine: EngineArgs,
    #[command(flatten)]
    pub test: TestArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Report table destination.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t)]
    pub output: OutputFormat,
    #[arg(long)]
    pub record: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct ReplayArgs {
    /// Run record written by an earlier command.
    pub record: PathBuf,
    #[arg(long, value_enum, default_value_t)]
    pub output: OutputFormat,
}

/// Default engine settings when no overrides are given.
pub fn default_engine(kind: EngineKind) -> EngineConfig {
    EngineArgs {
        engine: kind,
        ..EngineArgs::default()
    }
    .config()
}
