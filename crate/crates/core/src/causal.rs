//! Permutation tests for input/residual independence and the direction
//! decisions built on them.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Direction, SamplePairs};
use crate::error::{Error, Result};
use crate::hsicr::{fit_hsicr, HsicStatistic, HsicrConfig, HsicrFit};
use crate::lsir::{fit_lsir, LsirConfig, LsirFit};
use crate::lsmi::{fit_lsmi, FrozenRatioStatistic};
use crate::numerics::RngStream;

/// Default permutation count.
pub const DEFAULT_PERMUTATIONS: usize = 1000;

/// p-values below this are reported as indistinguishable from zero in
/// table-style decisions.
pub const TABLE_FLOOR: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PermutationTestResult {
    pub observed: f64,
    /// Statistics of the re-paired samples, in permutation index order.
    pub permuted: Vec<f64>,
    pub p_value: f64,
    pub permutations: usize,
}

/// `(1 + #{permuted >= observed}) / (1 + P)`.
pub fn permutation_p_value(observed: f64, permuted: &[f64]) -> f64 {
    let count = permuted.iter().filter(|&&s| s >= observed).count();
    (1 + count) as f64 / (1 + permuted.len()) as f64
}

/// Permutation test of independence between the two halves of `n` pairs.
///
/// `statistic(None, rng)` is the observed value and `statistic(Some(k),
/// rng)` the value on the pairs `(x_i, e_k(i))`. Every permutation gets its
/// own child stream, which draws `k` and is then handed to the statistic,
/// so results do not depend on scheduling.
pub fn permutation_test<S>(n: usize, statistic: S, permutations: usize, rng: &mut RngStream) -> Result<PermutationTestResult>
where
    S: Fn(Option<&[usize]>, &mut RngStream) -> Result<f64> + Sync,
{
    if permutations == 0 {
        return Err(Error::InvalidConfig("a permutation test needs at least one permutation".into()));
    }
    let observed = statistic(None, &mut rng.child())?;
    let permuted = rng
        .children(permutations)
        .into_par_iter()
        .map(|mut stream| {
            let perm = stream.permutation(n);
            statistic(Some(&perm), &mut stream)
        })
        .collect::<Result<Vec<f64>>>()?;
    if !observed.is_finite() || permuted.iter().any(|s| !s.is_finite()) {
        return Err(Error::NonFiniteEvaluation);
    }
    Ok(PermutationTestResult {
        observed,
        p_value: permutation_p_value(observed, &permuted),
        permuted,
        permutations,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Decision {
    Forward,
    Backward,
    NoCausalRelation,
    ModelMismatch,
    Undetermined,
}

impl Decision {
    pub fn direction(self) -> Option<Direction> {
        match self {
            Decision::Forward => Some(Direction::Forward),
            Decision::Backward => Some(Direction::Backward),
            _ => None,
        }
    }
}

impl From<Direction> for Decision {
    fn from(d: Direction) -> Self {
        match d {
            Direction::Forward => Decision::Forward,
            Direction::Backward => Decision::Backward,
        }
    }
}

impl fmt::Display for Decision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Decision::Forward => "x->y",
            Decision::Backward => "y->x",
            Decision::NoCausalRelation => "no-causal-relation",
            Decision::ModelMismatch => "model-mismatch",
            Decision::Undetermined => "?",
        };
        f.write_str(s)
    }
}

/// Significance-level rule on the two orientation p-values.
pub fn delta_decision(p_forward: f64, p_backward: f64, delta: f64) -> Decision {
    match (p_forward > delta, p_backward > delta) {
        (true, false) => Decision::Forward,
        (false, true) => Decision::Backward,
        (false, false) => Decision::NoCausalRelation,
        (true, true) => Decision::ModelMismatch,
    }
}

/// Forward iff `p_forward > p_backward`.
pub fn p_value_decision(p_forward: f64, p_backward: f64) -> Direction {
    if p_forward > p_backward {
        Direction::Forward
    } else {
        Direction::Backward
    }
}

/// Forward iff the forward dependence score is the smaller one.
pub fn score_decision(score_forward: f64, score_backward: f64) -> Direction {
    if score_forward < score_backward {
        Direction::Forward
    } else {
        Direction::Backward
    }
}

/// Larger p-value wins unless both fall below [`TABLE_FLOOR`].
pub fn table_decision(p_forward: f64, p_backward: f64) -> Decision {
    if p_forward < TABLE_FLOOR && p_backward < TABLE_FLOOR {
        Decision::Undetermined
    } else {
        p_value_decision(p_forward, p_backward).into()
    }
}

/// Whether the LSMI permutation statistic keeps the observed-data model
/// selection or repeats it for every permutation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PermutationMode {
    #[default]
    Fast,
    Literal,
}

impl FromStr for PermutationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fast" => Ok(PermutationMode::Fast),
            "literal" => Ok(PermutationMode::Literal),
            other => Err(Error::InvalidConfig(format!("unknown permutation mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "engine", rename_all = "kebab-case")]
pub enum EngineConfig {
    Lsir(LsirConfig),
    Hsicr(HsicrConfig),
}

impl EngineConfig {
    pub fn kind(&self) -> EngineKind {
        match self {
            EngineConfig::Lsir(_) => EngineKind::Lsir,
            EngineConfig::Hsicr(_) => EngineKind::Hsicr,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EngineKind {
    #[default]
    Lsir,
    Hsicr,
}

impl fmt::Display for EngineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EngineKind::Lsir => "lsir",
            EngineKind::Hsicr => "hsicr",
        })
    }
}

impl FromStr for EngineKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "lsir" => Ok(EngineKind::Lsir),
            "hsicr" => Ok(EngineKind::Hsicr),
            other => Err(Error::InvalidConfig(format!("unknown engine {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "engine", rename_all = "kebab-case")]
pub enum EngineFit {
    Lsir(Box<LsirFit>),
    Hsicr(Box<HsicrFit>),
}

impl EngineFit {
    /// SMI estimate for LSIR, HSIC for HSICR; lower means closer to
    /// independence.
    pub fn score(&self) -> f64 {
        match self {
            EngineFit::Lsir(f) => f.smi.value,
            EngineFit::Hsicr(f) => f.hsic,
        }
    }

    /// Raw-scale prediction of the fitted regressor.
    pub fn predict(&self, x: f64) -> f64 {
        match self {
            EngineFit::Lsir(f) => f.predict(x),
            EngineFit::Hsicr(f) => f.predict(x),
        }
    }
}

/// Fits the engine on `samples` as given (x as cause).
pub fn fit_engine(samples: &SamplePairs, engine: &EngineConfig, rng: &mut RngStream) -> Result<EngineFit> {
    match engine {
        EngineConfig::Lsir(c) => Ok(EngineFit::Lsir(Box::new(fit_lsir(samples, c, rng)?))),
        EngineConfig::Hsicr(c) => Ok(EngineFit::Hsicr(Box::new(fit_hsicr(samples, c, rng)?))),
    }
}

/// Permutation test of the fitted regressor's residuals against its inputs.
pub fn residual_permutation_test(
    samples: &SamplePairs,
    fit: &EngineFit,
    engine: &EngineConfig,
    mode: PermutationMode,
    permutations: usize,
    rng: &mut RngStream,
) -> Result<PermutationTestResult> {
    let n = samples.len();
    match (fit, engine) {
        (EngineFit::Lsir(f), EngineConfig::Lsir(c)) => {
            let (x, e) = f.working_residuals(samples);
            match mode {
                PermutationMode::Fast => {
                    let frozen = FrozenRatioStatistic::new(&x, &e, &f.ratio)?;
                    permutation_test(n, |perm, _| Ok(frozen.evaluate(perm)), permutations, rng)
                }
                PermutationMode::Literal => {
                    let observed = f.smi.value;
                    permutation_test(
                        n,
                        |perm, stream| match perm {
                            None => Ok(observed),
                            Some(p) => {
                                let shuffled: Vec<f64> = p.iter().map(|&j| e[j]).collect();
                                Ok(fit_lsmi(&x, &shuffled, &c.lsmi, stream)?.1.value)
                            }
                        },
                        permutations,
                        rng,
                    )
                }
            }
        }
        (EngineFit::Hsicr(f), EngineConfig::Hsicr(_)) => {
            let (x, e) = f.working_residuals(samples);
            let stat = HsicStatistic::new(&x, f.widths.sigma_x, f.widths.sigma_e)?;
            permutation_test(
                n,
                |perm, _| {
                    Ok(match perm {
                        None => stat.value(&e),
                        Some(p) => stat.permuted(&e, p),
                    })
                },
                permutations,
                rng,
            )
        }
        _ => Err(Error::InvalidConfig("fit and engine configuration disagree".into())),
    }
}

/// One orientation of a direction analysis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrientationResult {
    pub direction: Direction,
    pub fit: EngineFit,
    pub score: f64,
    pub test: Option<PermutationTestResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectionReport {
    pub engine: EngineKind,
    pub n: usize,
    pub delta: f64,
    pub permutations: usize,
    pub mode: PermutationMode,
    /// Absent when no permutations were run.
    pub p_forward: Option<f64>,
    pub p_backward: Option<f64>,
    pub score_forward: f64,
    pub score_backward: f64,
    /// Significance-level rule; needs p-values.
    pub decision: Option<Decision>,
    /// Larger p-value wins; needs p-values.
    pub simplified_decision: Option<Direction>,
    /// Smaller dependence score wins.
    pub score_decision: Direction,
    /// Like `simplified_decision` but undetermined when both p-values are
    /// below [`TABLE_FLOOR`].
    pub table_decision: Option<Decision>,
    pub forward: OrientationResult,
    pub backward: OrientationResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InferenceConfig {
    pub engine: EngineConfig,
    pub delta: f64,
    pub permutations: usize,
    pub mode: PermutationMode,
}

impl InferenceConfig {
    pub fn new(engine: EngineConfig) -> Self {
        Self {
            engine,
            delta: 0.05,
            permutations: DEFAULT_PERMUTATIONS,
            mode: PermutationMode::Fast,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::InvalidConfig(format!("delta must lie in (0, 1), got {}", self.delta)));
        }
        match &self.engine {
            EngineConfig::Lsir(c) => c.validate(),
            EngineConfig::Hsicr(c) => c.validate(),
        }
    }
}

fn orientation(
    samples: &SamplePairs,
    direction: Direction,
    config: &InferenceConfig,
    mut stream: RngStream,
) -> Result<OrientationResult> {
    let fit = fit_engine(samples, &config.engine, &mut stream.child())?;
    let test = if config.permutations > 0 {
        Some(residual_permutation_test(
            samples,
            &fit,
            &config.engine,
            config.mode,
            config.permutations,
            &mut stream.child(),
        )?)
    } else {
        None
    };
    Ok(OrientationResult {
        direction,
        score: fit.score(),
        fit,
        test,
    })
}

/// Fits the engine with `x` as cause and with `y` as cause, tests both sets
/// of residuals and applies the decision rules. Both orientations start
/// from the same stream, so swapping the columns swaps the results.
pub fn infer_direction(samples: &SamplePairs, config: &InferenceConfig, rng: &mut RngStream) -> Result<DirectionReport> {
    config.validate()?;
    if samples.len() < 8 {
        return Err(Error::InsufficientData {
            needed: 8,
            got: samples.len(),
        });
    }
    let stream = rng.child();
    let swapped = samples.swapped();
    let (forward, backward) = rayon::join(
        || orientation(samples, Direction::Forward, config, stream.clone()),
        || orientation(&swapped, Direction::Backward, config, stream.clone()),
    );
    let (forward, backward) = (forward?, backward?);
    let p_forward = forward.test.as_ref().map(|t| t.p_value);
    let p_backward = backward.test.as_ref().map(|t| t.p_value);
    let both = p_forward.zip(p_backward);
    Ok(DirectionReport {
        engine: config.engine.kind(),
        n: samples.len(),
        delta: config.delta,
        permutations: config.permutations,
        mode: config.mode,
        p_forward,
        p_backward,
        score_forward: forward.score,
        score_backward: backward.score,
        decision: both.map(|(f, b)| delta_decision(f, b, config.delta)),
        simplified_decision: both.map(|(f, b)| p_value_decision(f, b)),
        score_decision: score_decision(forward.score, backward.score),
        table_decision: both.map(|(f, b)| table_decision(f, b)),
        forward,
        backward,
    })
}
