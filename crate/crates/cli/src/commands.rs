use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use lsir_core::causal::{fit_engine, infer_direction, DirectionReport, EngineConfig, EngineFit, InferenceConfig};
use lsir_core::data::{generate, load_csv, save_csv, SynthSpec};
use lsir_core::{Direction, RngStream, SamplePairs};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::args::{Cli, Command, InputArgs, OutputFormat, TestArgs};
use crate::benchmark::{read_manifest, render_text, run_benchmark, write_report, BenchmarkReport};
use crate::format::{optional, p_value, sig12};
use crate::record::{first_difference, CommandConfig, InputSpec, RunRecord};
use crate::{write_json, CliError, CliResult};

/// Runs a parsed command line on its own worker pool.
pub fn run<W: Write>(cli: &Cli, out: &mut W) -> CliResult<()> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(CliError::Config("--threads must be at least 1".into()));
        }
        builder = builder.num_threads(t);
    }
    let pool = builder
        .build()
        .map_err(|e| CliError::Config(format!("cannot start worker threads: {e}")))?;
    let mut buffer = Vec::new();
    let result = pool.install(|| dispatch(&cli.command, &mut buffer));
    out.write_all(&buffer)?;
    result
}

fn dispatch<W: Write>(command: &Command, out: &mut W) -> CliResult<()> {
    let (config, seed, format, record_path) = match command {
        Command::Replay(a) => return replay(&a.record, a.output, out),
        Command::Synth(a) => {
            let family = a.family.parse::<lsir_core::data::Family>()?;
            let config = CommandConfig::Synth {
                family,
                n: a.n,
                out: a.out.clone(),
            };
            (config, a.seed, OutputFormat::Text, a.record.as_ref())
        }
        Command::Fit(a) => {
            let config = CommandConfig::Fit {
                input: input_spec(&a.input),
                engine: a.engine.config(),
                swap: a.swap,
                curve: a.curve.clone(),
                grid_points: a.grid_points,
            };
            (config, a.seed, a.output, a.record.as_ref())
        }
        Command::Direction(a) => {
            let config = CommandConfig::Direction {
                input: input_spec(&a.input),
                inference: inference(a.engine.config(), &a.test),
            };
            (config, a.seed, a.output, a.record.as_ref())
        }
        Command::Benchmark(a) => {
            let config = CommandConfig::Benchmark {
                manifest: absolute(&a.manifest),
                inference: inference(a.engine.config(), &a.test),
                out: a.out.clone(),
            };
            (config, a.seed, a.output, a.record.as_ref())
        }
    };
    let start = Instant::now();
    let outputs = execute(&config, seed, true)?;
    let record = RunRecord::new(config, seed, start.elapsed().as_secs_f64(), outputs.to_value()?);
    if let Some(path) = record_path {
        record.save(path)?;
    }
    match format {
        OutputFormat::Json => write_json(out, &record),
        OutputFormat::Text => {
            out.write_all(render(&record.config, &outputs).as_bytes())?;
            Ok(())
        }
    }
}

fn absolute(path: &Path) -> PathBuf {
    std::fs::canonicalize(path).unwrap_or_else(|_| path.to_path_buf())
}

fn input_spec(a: &InputArgs) -> InputSpec {
    InputSpec {
        path: absolute(&a.input),
        x_col: a.x_col.clone(),
        y_col: a.y_col.clone(),
        header: !a.no_header,
    }
}

fn inference(engine: EngineConfig, t: &TestArgs) -> InferenceConfig {
    InferenceConfig {
        engine,
        delta: t.delta,
        permutations: t.permutations,
        mode: t.mode,
    }
}

fn load(input: &InputSpec) -> CliResult<SamplePairs> {
    Ok(load_csv(&input.path, &input.x_col, &input.y_col, input.header)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthOutput {
    pub rows: usize,
    pub samples: SamplePairs,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitOutput {
    pub n: usize,
    /// Which column was treated as the cause.
    pub orientation: Direction,
    pub score: f64,
    pub fit: EngineFit,
    /// `(x, fitted)` pairs over an even grid, when requested.
    pub curve: Option<Vec<(f64, f64)>>,
}

/// Results of one command.
#[derive(Debug, Clone, PartialEq)]
pub enum Outputs {
    Synth(SynthOutput),
    Fit(Box<FitOutput>),
    Direction(Box<DirectionReport>),
    Benchmark(BenchmarkReport),
}

impl Outputs {
    pub fn to_value(&self) -> CliResult<Value> {
        Ok(match self {
            Outputs::Synth(o) => serde_json::to_value(o)?,
            Outputs::Fit(o) => serde_json::to_value(o)?,
            Outputs::Direction(o) => serde_json::to_value(o)?,
            Outputs::Benchmark(o) => serde_json::to_value(o)?,
        })
    }
}

fn curve_grid(fit: &EngineFit, inputs: &[f64], points: usize) -> Vec<(f64, f64)> {
    let lo = inputs.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = inputs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (0..points)
        .map(|i| {
            let t = if points > 1 { i as f64 / (points - 1) as f64 } else { 0.5 };
            let x = lo + t * (hi - lo);
            (x, fit.predict(x))
        })
        .collect()
}

fn write_curve(curve: &[(f64, f64)], path: &Path) -> CliResult<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "x,fitted")?;
    for (x, f) in curve {
        writeln!(w, "{x:?},{f:?}")?;
    }
    w.flush()?;
    Ok(())
}

/// Computes a command's outputs. With `write_files` unset nothing is
/// written to disk, which is how replays run.
pub fn execute(config: &CommandConfig, seed: u64, write_files: bool) -> CliResult<Outputs> {
    let mut rng = RngStream::new(seed);
    match config {
        CommandConfig::Synth { family, n, out } => {
            let samples = generate(&SynthSpec {
                family: family.clone(),
                n: *n,
                seed,
            })?;
            if write_files {
                save_csv(&samples, out)?;
            }
            Ok(Outputs::Synth(SynthOutput { rows: samples.len(), samples }))
        }
        CommandConfig::Fit {
            input,
            engine,
            swap,
            curve,
            grid_points,
        } => {
            let raw = load(input)?;
            let samples = if *swap { raw.swapped() } else { raw };
            let fit = fit_engine(&samples, engine, &mut rng)?;
            let points = curve.as_ref().map(|_| curve_grid(&fit, samples.x(), *grid_points));
            if let (Some(path), Some(points), true) = (curve, &points, write_files) {
                write_curve(points, path)?;
            }
            Ok(Outputs::Fit(Box::new(FitOutput {
                n: samples.len(),
                orientation: if *swap { Direction::Backward } else { Direction::Forward },
                score: fit.score(),
                fit,
                curve: points,
            })))
        }
        CommandConfig::Direction { input, inference } => {
            let samples = load(input)?;
            Ok(Outputs::Direction(Box::new(infer_direction(&samples, inference, &mut rng)?)))
        }
        CommandConfig::Benchmark {
            manifest,
            inference,
            out,
        } => {
            let entries = read_manifest(manifest)?;
            let base = manifest.parent().unwrap_or(Path::new("."));
            let report = run_benchmark(&entries, base, inference, &mut rng)?;
            if write_files {
                write_report(&report, out)?;
            }
            Ok(Outputs::Benchmark(report))
        }
    }
}

fn line(out: &mut String, key: &str, value: impl std::fmt::Display) {
    out.push_str(&format!("{key:<20}{value}\n"));
}

/// Text rendering of a command's outputs.
pub fn render(config: &CommandConfig, outputs: &Outputs) -> String {
    let mut s = String::new();
    match (config, outputs) {
        (CommandConfig::Synth { out, .. }, Outputs::Synth(o)) => {
            s.push_str(&format!("wrote {} rows to {}\n", o.rows, out.display()));
        }
        (CommandConfig::Fit { curve, .. }, Outputs::Fit(o)) => {
            line(&mut s, "engine", engine_name(&o.fit));
            line(&mut s, "orientation", o.orientation);
            line(&mut s, "n", o.n);
            line(&mut s, "score", sig12(o.score));
            match &o.fit {
                EngineFit::Lsir(f) => {
                    line(&mut s, "tau", sig12(f.model.basis.tau));
                    line(&mut s, "gamma", sig12(f.trace.gamma));
                    line(&mut s, "sigma", sig12(f.smi.sigma));
                    line(&mut s, "lambda", sig12(f.smi.lambda));
                    line(&mut s, "cv_score", sig12(f.cv_score));
                    line(&mut s, "iterations", f.trace.iterations);
                    line(&mut s, "restart", f.trace.restart);
                }
                EngineFit::Hsicr(f) => {
                    line(&mut s, "xi", sig12(f.xi));
                    line(&mut s, "cv_score", optional(f.cv_score.as_ref(), |v| sig12(*v)));
                    line(&mut s, "iterations", f.trace.iterations);
                }
            }
            if let (Some(path), Some(points)) = (curve, &o.curve) {
                line(&mut s, "curve", format!("{} points in {}", points.len(), path.display()));
            }
        }
        (_, Outputs::Direction(r)) => {
            let p = |v: Option<f64>| optional(v.as_ref(), |v| p_value(*v));
            let d = |v: Option<String>| v.unwrap_or_else(|| "-".to_string());
            line(&mut s, "engine", r.engine);
            line(&mut s, "n", r.n);
            line(&mut s, "permutations", r.permutations);
            line(&mut s, "p_forward", p(r.p_forward));
            line(&mut s, "p_backward", p(r.p_backward));
            line(&mut s, "score_forward", sig12(r.score_forward));
            line(&mut s, "score_backward", sig12(r.score_backward));
            line(&mut s, "decision", d(r.decision.map(|v| v.to_string())));
            line(&mut s, "table_decision", d(r.table_decision.map(|v| v.to_string())));
            line(&mut s, "simplified_decision", d(r.simplified_decision.map(|v| v.to_string())));
            line(&mut s, "score_decision", r.score_decision);
        }
        (_, Outputs::Benchmark(report)) => s.push_str(&render_text(report)),
        _ => {}
    }
    s
}

fn engine_name(fit: &EngineFit) -> &'static str {
    match fit {
        EngineFit::Lsir(_) => "lsir",
        EngineFit::Hsicr(_) => "hsicr",
    }
}

fn replay<W: Write>(path: &Path, format: OutputFormat, out: &mut W) -> CliResult<()> {
    let recorded = RunRecord::load(path)?;
    let start = Instant::now();
    let outputs = execute(&recorded.config, recorded.seed, false)?;
    let fresh = RunRecord::new(
        recorded.config.clone(),
        recorded.seed,
        start.elapsed().as_secs_f64(),
        outputs.to_value()?,
    );
    if let Some(at) = first_difference(&recorded.outputs, &fresh.outputs) {
        return Err(CliError::Mismatch(format!("outputs differ at {at}")));
    }
    match format {
        OutputFormat::Json => write_json(out, &fresh),
        OutputFormat::Text => {
            writeln!(
                out,
                "replayed {} (seed {}): outputs identical to the record",
                recorded.config.name(),
                recorded.seed
            )?;
            Ok(())
        }
    }
}
