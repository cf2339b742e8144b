//! Paired observations, synthetic generators, CSV ingestion and
//! standardization.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::RngStream;

/// Which coordinate of a sample pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Axis::X => "x",
            Axis::Y => "y",
        })
    }
}

/// Orientation of a cause-effect relation between the two columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    /// X causes Y.
    Forward,
    /// Y causes X.
    Backward,
}

impl Direction {
    pub fn flipped(self) -> Self {
        match self {
            Direction::Forward => Direction::Backward,
            Direction::Backward => Direction::Forward,
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::Forward => "x->y",
            Direction::Backward => "y->x",
        })
    }
}

impl FromStr for Direction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "x->y" | "forward" | "xy" | "1" => Ok(Direction::Forward),
            "y->x" | "backward" | "yx" | "-1" => Ok(Direction::Backward),
            other => Err(Error::InvalidConfig(format!("unknown direction '{other}'"))),
        }
    }
}

/// Paired scalar observations `(x_i, y_i)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplePairs {
    x: Vec<f64>,
    y: Vec<f64>,
    #[serde(default)]
    pub x_label: Option<String>,
    #[serde(default)]
    pub y_label: Option<String>,
    #[serde(default)]
    pub truth: Option<Direction>,
}

impl SamplePairs {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::LengthMismatch(x.len(), y.len()));
        }
        if x.len() < 2 {
            return Err(Error::InsufficientData { needed: 2, got: x.len() });
        }
        for (axis, values) in [(Axis::X, &x), (Axis::Y, &y)] {
            if let Some(index) = values.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFiniteInput { axis, index });
            }
        }
        Ok(Self {
            x,
            y,
            x_label: None,
            y_label: None,
            truth: None,
        })
    }

    pub fn with_truth(mut self, truth: Direction) -> Self {
        self.truth = Some(truth);
        self
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// The same data with the roles of X and Y exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            x: self.y.clone(),
            y: self.x.clone(),
            x_label: self.y_label.clone(),
            y_label: self.x_label.clone(),
            truth: self.truth.map(Direction::flipped),
        }
    }
}

/// Synthetic cause-effect families. All draw `x ~ Uniform(-1, 1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Family {
    /// `y = x^3 + e`, `e ~ Exp(1) - 1`.
    CubicExponential,
    /// `y = slope * x + e`, `e ~ N(0, noise_sd^2)`.
    LinearGaussian { slope: f64, noise_sd: f64 },
    /// `y = sum_k c_k x^k + e`, `e ~ Exp(1) - 1`.
    Polynomial { coefficients: Vec<f64> },
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cubic-exp" | "cubic-exponential" => Ok(Family::CubicExponential),
            "linear-gaussian" => Ok(Family::LinearGaussian {
                slope: 2.0,
                noise_sd: 0.3,
            }),
            other => {
                if let Some(list) = other.strip_prefix("poly:") {
                    let coefficients = list
                        .split(',')
                        .map(|c| c.trim().parse::<f64>())
                        .collect::<std::result::Result<Vec<_>, _>>()
                        .map_err(|_| Error::UnknownFamily(other.to_string()))?;
                    if coefficients.is_empty() || coefficients.iter().any(|c| !c.is_finite()) {
                        return Err(Error::UnknownFamily(other.to_string()));
                    }
                    Ok(Family::Polynomial { coefficients })
                } else {
                    Err(Error::UnknownFamily(other.to_string()))
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub family: Family,
    pub n: usize,
    pub seed: u64,
}

fn open_unit_uniform(rng: &mut RngStream) -> f64 {
    loop {
        let v: f64 = rng.random_range(-1.0..1.0);
        if v > -1.0 {
            return v;
        }
    }
}

/// Draws `spec.n` pairs from the family. Ground truth is always X -> Y.
pub fn generate(spec: &SynthSpec) -> Result<SamplePairs> {
    if spec.n < 2 {
        return Err(Error::InsufficientData { needed: 2, got: spec.n });
    }
    let mut rng = RngStream::new(spec.seed);
    let mut x = Vec::with_capacity(spec.n);
    let mut y = Vec::with_capacity(spec.n);
    for _ in 0..spec.n {
        let xi = open_unit_uniform(&mut rng);
        let yi = match &spec.family {
            Family::CubicExponential => {
                let e: f64 = Exp1.sample(&mut rng);
                xi * xi * xi + (e - 1.0)
            }
            Family::LinearGaussian { slope, noise_sd } => {
                let z: f64 = StandardNormal.sample(&mut rng);
                slope * xi + noise_sd * z
            }
            Family::Polynomial { coefficients } => {
                let e: f64 = Exp1.sample(&mut rng);
                let f = coefficients.iter().rev().fold(0.0, |acc, c| acc * xi + c);
                f + (e - 1.0)
            }
        };
        x.push(xi);
        y.push(yi);
    }
    Ok(SamplePairs::new(x, y)?.with_truth(Direction::Forward))
}

/// Column selector for CSV ingestion.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ColumnRef {
    Index(usize),
    Name(String),
}

impl FromStr for ColumnRef {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Ok(match s.parse::<usize>() {
            Ok(i) => ColumnRef::Index(i),
            Err(_) => ColumnRef::Name(s.to_string()),
        })
    }
}

fn resolve_column(col: &ColumnRef, headers: Option<&csv::StringRecord>) -> Result<usize> {
    match (col, headers) {
        (ColumnRef::Index(i), _) => Ok(*i),
        (ColumnRef::Name(name), Some(h)) => h
            .iter()
            .position(|f| f.trim() == name)
            .ok_or_else(|| Error::MissingColumn(name.clone())),
        (ColumnRef::Name(name), None) => Err(Error::MissingColumn(name.clone())),
    }
}

/// Reads two columns of a comma-separated file. Rows are numbered from 1,
/// counting data rows only.
pub fn load_csv(path: &Path, x_column: &ColumnRef, y_column: &ColumnRef, has_header: bool) -> Result<SamplePairs> {
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(csv_err)?;
    let headers = if has_header {
        Some(reader.headers().map_err(csv_err)?.clone())
    } else {
        None
    };
    let xi = resolve_column(x_column, headers.as_ref())?;
    let yi = resolve_column(y_column, headers.as_ref())?;
    let (mut x, mut y) = (Vec::new(), Vec::new());
    for (r, record) in reader.records().enumerate() {
        let record = record.map_err(csv_err)?;
        let row = r + 1;
        for (axis, idx, out) in [(Axis::X, xi, &mut x), (Axis::Y, yi, &mut y)] {
            let field = record.get(idx).ok_or_else(|| Error::MissingColumn(format!("{idx} (row {row})")))?;
            match field.parse::<f64>() {
                Ok(v) if v.is_finite() => out.push(v),
                _ => return Err(Error::ParseError { row, column: axis }),
            }
        }
    }
    let mut pairs = SamplePairs::new(x, y)?;
    if let Some(h) = headers {
        pairs.x_label = h.get(xi).map(str::to_string);
        pairs.y_label = h.get(yi).map(str::to_string);
    }
    Ok(pairs)
}

/// Writes `x,y` rows with a header, using shortest round-trip formatting.
pub fn save_csv(samples: &SamplePairs, path: &Path) -> Result<()> {
    let mut writer = csv::Writer::from_path(path).map_err(|source| Error::Csv {
        path: path.to_path_buf(),
        source,
    })?;
    let x_name = samples.x_label.as_deref().unwrap_or("x");
    let y_name = samples.y_label.as_deref().unwrap_or("y");
    let write = |w: &mut csv::Writer<std::fs::File>, rec: [String; 2]| {
        w.write_record(&rec).map_err(|source| Error::Csv {
            path: path.to_path_buf(),
            source,
        })
    };
    write(&mut writer, [x_name.to_string(), y_name.to_string()])?;
    for (a, b) in samples.x.iter().zip(&samples.y) {
        write(&mut writer, [format!("{a:?}"), format!("{b:?}")])?;
    }
    writer.flush()?;
    Ok(())
}

/// Affine map `v -> (v - mean) / scale` for one coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Affine {
    pub mean: f64,
    pub scale: f64,
}

impl Affine {
    pub const IDENTITY: Affine = Affine { mean: 0.0, scale: 1.0 };

    /// Population (1/n) standard deviation.
    pub fn fit(values: &[f64]) -> Option<Affine> {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let scale = var.sqrt();
        (scale > 0.0 && scale.is_finite()).then_some(Affine { mean, scale })
    }

    pub fn apply(&self, v: f64) -> f64 {
        (v - self.mean) / self.scale
    }

    pub fn invert(&self, v: f64) -> f64 {
        v * self.scale + self.mean
    }

    pub fn apply_all(&self, values: &[f64]) -> Vec<f64> {
        values.iter().map(|&v| self.apply(v)).collect()
    }
}

/// Per-coordinate standardization of a [`SamplePairs`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub x: Affine,
    pub y: Affine,
}

impl Standardization {
    pub const IDENTITY: Standardization = Standardization {
        x: Affine::IDENTITY,
        y: Affine::IDENTITY,
    };

    pub fn destandardize(&self, samples: &SamplePairs) -> SamplePairs {
        let mut out = samples.clone();
        out.x = samples.x.iter().map(|&v| self.x.invert(v)).collect();
        out.y = samples.y.iter().map(|&v| self.y.invert(v)).collect();
        out
    }
}

/// Shifts and scales each coordinate to mean 0 and population variance 1.
pub fn standardize(samples: &SamplePairs) -> Result<(SamplePairs, Standardization)> {
    let x = Affine::fit(&samples.x).ok_or(Error::ZeroVariance(Axis::X))?;
    let y = Affine::fit(&samples.y).ok_or(Error::ZeroVariance(Axis::Y))?;
    let mut out = samples.clone();
    out.x = x.apply_all(&samples.x);
    out.y = y.apply_all(&samples.y);
    Ok((out, Standardization { x, y }))
}
