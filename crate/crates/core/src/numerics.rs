//! Shared numerical kernels: regularized SPD solves, median pairwise
//! distances, central finite differences and a seedable random stream.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::seq::SliceRandom;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Cholesky factor of `G + lambda * I`, reusable across right-hand sides.
#[derive(Debug, Clone)]
pub struct RegularizedCholesky {
    factor: Cholesky<f64, Dyn>,
}

impl RegularizedCholesky {
    pub fn new(gram: &Matrix, lambda: f64) -> Result<Self> {
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "regularization must be finite and nonnegative, got {lambda}"
            )));
        }
        if gram.nrows() != gram.ncols() {
            return Err(Error::LengthMismatch(gram.nrows(), gram.ncols()));
        }
        if gram.iter().any(|v| !v.is_finite()) {
            return Err(Error::SingularSystem);
        }
        let mut system = gram.clone();
        for k in 0..system.nrows() {
            system[(k, k)] += lambda;
        }
        let factor = Cholesky::new(system).ok_or(Error::SingularSystem)?;
        // Positive pivots that are tiny relative to the diagonal mean the
        // solve is numerically meaningless.
        let l = factor.l_dirty();
        let max_diag = (0..l.nrows()).map(|k| l[(k, k)]).fold(0.0_f64, f64::max);
        if (0..l.nrows()).any(|k| !(l[(k, k)] > max_diag * 1e-12)) {
            return Err(Error::SingularSystem);
        }
        Ok(Self { factor })
    }

    pub fn solve(&self, rhs: &Vector) -> Vector {
        self.factor.solve(rhs)
    }

    pub fn dim(&self) -> usize {
        self.factor.l_dirty().nrows()
    }
}

/// Solves `(G + lambda * I) v = rhs` for symmetric `G`.
pub fn solve_regularized(gram: &Matrix, rhs: &Vector, lambda: f64) -> Result<Vector> {
    if gram.nrows() != rhs.len() {
        return Err(Error::LengthMismatch(gram.nrows(), rhs.len()));
    }
    Ok(RegularizedCholesky::new(gram, lambda)?.solve(rhs))
}

/// Whether the zero self-distances `|p_i - p_i|` enter the median.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DiagonalMode {
    /// All `n^2` ordered pairs, zeros on the diagonal included.
    #[default]
    Include,
    /// Only pairs with `i != j`.
    Exclude,
}

/// A point with a Euclidean distance.
pub trait PairwiseDistance {
    fn distance(&self, other: &Self) -> f64;
}

impl PairwiseDistance for f64 {
    fn distance(&self, other: &Self) -> f64 {
        (self - other).abs()
    }
}

impl PairwiseDistance for [f64; 2] {
    fn distance(&self, other: &Self) -> f64 {
        (self[0] - other[0]).hypot(self[1] - other[1])
    }
}

/// Median of `|p_i - p_j|` over ordered pairs; even counts take the
/// lower-middle element.
pub fn median_pairwise_distance<P: PairwiseDistance>(points: &[P], mode: DiagonalMode) -> Result<f64> {
    let n = points.len();
    if n < 2 {
        return Err(Error::InsufficientData { needed: 2, got: n });
    }
    let mut upper = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            upper.push(points[i].distance(&points[j]));
        }
    }
    if upper.iter().any(|d| d.is_nan()) {
        return Err(Error::NonFiniteEvaluation);
    }
    // Ordered pairs are the upper triangle counted twice, plus `n` zeros in
    // `Include` mode. Zeros sort first, so the k-th element is recovered
    // without materializing the full multiset.
    let (total, zeros) = match mode {
        DiagonalMode::Include => (n * n, n),
        DiagonalMode::Exclude => (n * (n - 1), 0),
    };
    let k = (total - 1) / 2;
    if k < zeros {
        return Ok(0.0);
    }
    let idx = (k - zeros) / 2;
    let (_, nth, _) = upper.select_nth_unstable_by(idx, |a, b| a.total_cmp(b));
    Ok(*nth)
}

/// Central-difference gradient of `f` at `at`.
pub fn finite_difference_gradient<F>(f: F, at: &[f64], step: f64) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> f64,
{
    if !(step > 0.0) {
        return Err(Error::InvalidConfig(format!("step must be positive, got {step}")));
    }
    let mut probe = at.to_vec();
    let mut grad = Vec::with_capacity(at.len());
    for k in 0..at.len() {
        probe[k] = at[k] + step;
        let plus = f(&probe);
        probe[k] = at[k] - step;
        let minus = f(&probe);
        probe[k] = at[k];
        if !plus.is_finite() || !minus.is_finite() {
            return Err(Error::NonFiniteEvaluation);
        }
        grad.push((plus - minus) / (2.0 * step));
    }
    Ok(grad)
}

/// Seeded ChaCha8 stream. Equal seeds give identical draws on every platform.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    inner: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Independent child stream seeded from the next draw of this one.
    pub fn child(&mut self) -> RngStream {
        RngStream::new(self.inner.next_u64())
    }

    /// `count` child streams, in index order.
    pub fn children(&mut self, count: usize) -> Vec<RngStream> {
        (0..count).map(|_| self.child()).collect()
    }

    /// Uniformly random permutation of `0..n`.
    pub fn permutation(&mut self, n: usize) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut self.inner);
        idx
    }

    /// `k` distinct indices from `0..n`; all of `0..n` in order when `k == n`.
    pub fn sample_without_replacement(&mut self, n: usize, k: usize) -> Vec<usize> {
        assert!(k <= n, "cannot draw {k} of {n} without replacement");
        if k == n {
            return (0..n).collect();
        }
        let mut idx = self.permutation(n);
        idx.truncate(k);
        idx
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

pub(crate) fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Gaussian basis matrix `exp(-(p_i - c_l)^2 / (2 w^2))`, one row per point.
pub(crate) fn gaussian_design(points: &[f64], centers: &[f64], width: f64) -> Matrix {
    let scale = -0.5 / (width * width);
    Matrix::from_fn(points.len(), centers.len(), |i, l| {
        let d = points[i] - centers[l];
        (scale * d * d).exp()
    })
}

pub(crate) fn check_width(width: f64) -> Result<()> {
    if width > 0.0 && width.is_finite() {
        Ok(())
    } else {
        Err(Error::DegenerateWidth(width))
    }
}

/// Splits a shuffled `0..n` into `k` contiguous near-equal folds.
pub(crate) fn shuffled_folds(n: usize, k: usize, rng: &mut RngStream) -> Vec<Vec<usize>> {
    let order = rng.permutation(n);
    let base = n / k;
    let extra = n % k;
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let len = base + usize::from(f < extra);
        folds.push(order[start..start + len].to_vec());
        start += len;
    }
    folds
}

/// Indices not in `fold`, in ascending order.
pub(crate) fn complement(n: usize, fold: &[usize]) -> Vec<usize> {
    let mut held = vec![false; n];
    for &i in fold {
        held[i] = true;
    }
    (0..n).filter(|&i| !held[i]).collect()
}

pub(crate) fn gather(values: &[f64], idx: &[usize]) -> Vec<f64> {
    idx.iter().map(|&i| values[i]).collect()
}
