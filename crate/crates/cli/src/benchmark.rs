//! Batch direction inference over a manifest of data sets.

use std::path::{Path, PathBuf};

use lsir_core::causal::{infer_direction, Decision, DirectionReport, InferenceConfig};
use lsir_core::data::{load_csv, ColumnRef};
use lsir_core::{Direction, RngStream};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::format::{p_value, sig12};
use crate::{CliError, CliResult};

/// One manifest line. Paths are relative to the manifest's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub name: String,
    pub path: PathBuf,
    pub truth: String,
    #[serde(default)]
    pub x_col: Option<String>,
    #[serde(default)]
    pub y_col: Option<String>,
    #[serde(default)]
    pub header: Option<bool>,
}

pub fn read_manifest(path: &Path) -> CliResult<Vec<ManifestEntry>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| CliError::Config(format!("cannot read manifest {}: {e}", path.display())))?;
    let entries = reader
        .deserialize()
        .collect::<Result<Vec<ManifestEntry>, _>>()
        .map_err(|e| CliError::Config(format!("malformed manifest {}: {e}", path.display())))?;
    if entries.is_empty() {
        return Err(CliError::Config(format!("manifest {} lists no data sets", path.display())));
    }
    Ok(entries)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRow {
    pub name: String,
    pub n: Option<usize>,
    pub p_forward: Option<f64>,
    pub p_backward: Option<f64>,
    pub score_forward: Option<f64>,
    pub score_backward: Option<f64>,
    pub decision: Option<Decision>,
    pub table_decision: Option<Decision>,
    pub simplified_decision: Option<Direction>,
    pub score_decision: Option<Direction>,
    pub truth: Option<Direction>,
    pub correct_decision: bool,
    pub correct_table: bool,
    pub correct_simplified: bool,
    pub correct_score: bool,
    pub error: Option<String>,
}

impl BenchmarkRow {
    fn failed(name: &str, truth: Option<Direction>, error: String) -> Self {
        Self {
            name: name.to_string(),
            n: None,
            p_forward: None,
            p_backward: None,
            score_forward: None,
            score_backward: None,
            decision: None,
            table_decision: None,
            simplified_decision: None,
            score_decision: None,
            truth,
            correct_decision: false,
            correct_table: false,
            correct_simplified: false,
            correct_score: false,
            error: Some(error),
        }
    }

    fn from_report(name: &str, truth: Direction, r: &DirectionReport) -> Self {
        let hit = |d: Option<Decision>| d.and_then(Decision::direction) == Some(truth);
        Self {
            name: name.to_string(),
            n: Some(r.n),
            p_forward: r.p_forward,
            p_backward: r.p_backward,
            score_forward: Some(r.score_forward),
            score_backward: Some(r.score_backward),
            decision: r.decision,
            table_decision: r.table_decision,
            simplified_decision: r.simplified_decision,
            score_decision: Some(r.score_decision),
            truth: Some(truth),
            correct_decision: hit(r.decision),
            correct_table: hit(r.table_decision),
            correct_simplified: r.simplified_decision == Some(truth),
            correct_score: r.score_decision == truth,
            error: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tally {
    pub correct: usize,
    pub total: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Summary {
    pub decision: Tally,
    pub table: Tally,
    pub simplified: Tally,
    pub score: Tally,
}

impl Summary {
    fn of(rows: &[BenchmarkRow]) -> Self {
        let tally = |f: fn(&BenchmarkRow) -> bool| Tally {
            correct: rows.iter().filter(|r| f(r)).count(),
            total: rows.len(),
        };
        Self {
            decision: tally(|r| r.correct_decision),
            table: tally(|r| r.correct_table),
            simplified: tally(|r| r.correct_simplified),
            score: tally(|r| r.correct_score),
        }
    }

    pub fn lines(&self) -> Vec<String> {
        [
            ("decision", self.decision),
            ("table", self.table),
            ("simplified", self.simplified),
            ("score", self.score),
        ]
        .iter()
        .map(|(name, t)| format!("{name:<10} correct {} / {}", t.correct, t.total))
        .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub rows: Vec<BenchmarkRow>,
    pub summary: Summary,
}

fn run_entry(entry: &ManifestEntry, base: &Path, config: &InferenceConfig, mut rng: RngStream) -> BenchmarkRow {
    let truth = match entry.truth.parse::<Direction>() {
        Ok(t) => t,
        Err(e) => return BenchmarkRow::failed(&entry.name, None, e.to_string()),
    };
    let column = |c: &Option<String>, default: usize| {
        c.as_deref()
            .map(|s| s.parse::<ColumnRef>().unwrap_or_else(|never| match never {}))
            .unwrap_or(ColumnRef::Index(default))
    };
    let path = base.join(&entry.path);
    let result = load_csv(
        &path,
        &column(&entry.x_col, 0),
        &column(&entry.y_col, 1),
        entry.header.unwrap_or(true),
    )
    .and_then(|samples| infer_direction(&samples, config, &mut rng));
    match result {
        Ok(report) => BenchmarkRow::from_report(&entry.name, truth, &report),
        Err(e) => BenchmarkRow::failed(&entry.name, Some(truth), e.to_string()),
    }
}

/// Runs every entry in parallel. Entry `i` uses the `i`-th child of `rng`,
/// and rows come back in manifest order.
pub fn run_benchmark(
    entries: &[ManifestEntry],
    base: &Path,
    config: &InferenceConfig,
    rng: &mut RngStream,
) -> CliResult<BenchmarkReport> {
    config.validate()?;
    let rows: Vec<BenchmarkRow> = entries
        .par_iter()
        .zip(rng.children(entries.len()))
        .map(|(entry, stream)| run_entry(entry, base, config, stream))
        .collect();
    let summary = Summary::of(&rows);
    Ok(BenchmarkReport { rows, summary })
}

const HEADER: [&str; 16] = [
    "name",
    "n",
    "p_forward",
    "p_backward",
    "score_forward",
    "score_backward",
    "decision",
    "table_decision",
    "simplified_decision",
    "score_decision",
    "truth",
    "correct_decision",
    "correct_table",
    "correct_simplified",
    "correct_score",
    "error",
];

fn cells(r: &BenchmarkRow, num: fn(f64) -> String, p: fn(f64) -> String) -> Vec<String> {
    let text = |v: Option<String>| v.unwrap_or_default();
    vec![
        r.name.clone(),
        text(r.n.map(|n| n.to_string())),
        text(r.p_forward.map(p)),
        text(r.p_backward.map(p)),
        text(r.score_forward.map(num)),
        text(r.score_backward.map(num)),
        text(r.decision.map(|d| d.to_string())),
        text(r.table_decision.map(|d| d.to_string())),
        text(r.simplified_decision.map(|d| d.to_string())),
        text(r.score_decision.map(|d| d.to_string())),
        text(r.truth.map(|d| d.to_string())),
        r.correct_decision.to_string(),
        r.correct_table.to_string(),
        r.correct_simplified.to_string(),
        r.correct_score.to_string(),
        text(r.error.clone()),
    ]
}

/// Writes the report as CSV at full precision, followed by `#` summary
/// lines.
pub fn write_report(report: &BenchmarkReport, path: &Path) -> CliResult<()> {
    let full = |v: f64| format!("{v:?}");
    let mut w = csv::Writer::from_path(path).map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))?;
    let csv_err = |e: csv::Error| CliError::Config(format!("cannot write {}: {e}", path.display()));
    w.write_record(HEADER).map_err(csv_err)?;
    for r in &report.rows {
        w.write_record(cells(r, full, full)).map_err(csv_err)?;
    }
    let mut inner = w.into_inner().map_err(|e| CliError::Output(e.into_error()))?;
    use std::io::Write;
    for line in report.summary.lines() {
        writeln!(inner, "# {line}")?;
    }
    Ok(())
}

/// Aligned text table with 12-digit numbers and floored p-values.
pub fn render_text(report: &BenchmarkReport) -> String {
    let header: Vec<String> = [
        "name", "n", "p_fwd", "p_bwd", "score_fwd", "score_bwd", "decision", "table", "simplified", "score", "truth",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    let mut table = vec![header];
    for r in &report.rows {
        let mut c = cells(r, sig12, p_value);
        c.truncate(11);
        for cell in c.iter_mut().skip(1) {
            if cell.is_empty() {
                *cell = "-".to_string();
            }
        }
        table.push(c);
    }
    let widths: Vec<usize> = (0..table[0].len())
        .map(|j| table.iter().map(|row| row[j].len()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for row in &table {
        let line: Vec<String> = row.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
        out.push_str(line.join("  ").trim_end());
        out.push('\n');
    }
    for r in &report.rows {
        if let Some(e) = &r.error {
            out.push_str(&format!("{}: {e}\n", r.name));
        }
    }
    for line in report.summary.lines() {
        out.push_str(&line);
        out.push('\n');
    }
    out
}
