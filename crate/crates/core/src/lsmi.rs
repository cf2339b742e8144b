//! Least-squares mutual information.
//!
//! The density ratio `r(x, e) = p(x, e) / (p(x) p(e))` is modeled as a
//! linear combination of `b` product Gaussian kernels centred on sample
//! pairs. Because each kernel factorizes as `k_x(x) k_e(e)`, the
//! cross-pairing average
//!
//! ```text
//! H = 1/n^2 sum_{i,j} phi(x_i, e_j) phi(x_i, e_j)^T
//! ```
//!
//! equals `(Phi_x^T Phi_x) .* (Phi_e^T Phi_e) / n^2`, so no `n^2` loop is
//! ever needed. The squared-loss mutual information estimate is
//! `h^T a - a^T H a / 2 - 1/2` with `a = (H + lambda I)^-1 h`.

use serde::{Deserialize, Serialize};

use crate::data::{Affine, Axis};
use crate::error::{Error, Result};
use crate::numerics::{
    check_width, complement, gaussian_design, median_pairwise_distance, shuffled_folds, DiagonalMode,
    Matrix, RegularizedCholesky, RngStream, Vector,
};

pub const DEFAULT_BASIS_CAP: usize = 200;

/// Candidate kernel widths, either absolute or as multiples of a median
/// pairwise distance of the data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WidthGrid {
    MedianScaled(Vec<f64>),
    Absolute(Vec<f64>),
}

impl WidthGrid {
    /// Ascending, deduplicated absolute widths.
    pub fn resolve(&self, median: impl FnOnce() -> Result<f64>) -> Result<Vec<f64>> {
        let mut widths = match self {
            WidthGrid::Absolute(w) => w.clone(),
            WidthGrid::MedianScaled(f) => {
                let m = median()?;
                f.iter().map(|v| v * m).collect()
            }
        };
        if widths.is_empty() {
            return Err(Error::InvalidConfig("width grid is empty".into()));
        }
        if let Some(&w) = widths.iter().find(|w| !(**w > 0.0 && w.is_finite())) {
            return Err(Error::DegenerateWidth(w));
        }
        widths.sort_by(f64::total_cmp);
        widths.dedup();
        Ok(widths)
    }
}

/// Ascending, deduplicated regularization grid.
pub(crate) fn resolve_regularizers(grid: &[f64], what: &str) -> Result<Vec<f64>> {
    if grid.is_empty() {
        return Err(Error::InvalidConfig(format!("{what} grid is empty")));
    }
    if grid.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
        return Err(Error::InvalidConfig(format!("{what} grid must be finite and nonnegative")));
    }
    let mut g = grid.to_vec();
    g.sort_by(f64::total_cmp);
    g.dedup();
    Ok(g)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LsmiConfig {
    /// Upper bound on the number of kernels; `b = min(b_cap, n)`.
    pub b_cap: usize,
    pub sigma_grid: WidthGrid,
    pub lambda_grid: Vec<f64>,
    pub folds: usize,
    /// Standardize `x` and `e` separately before estimation.
    pub standardize: bool,
}

impl Default for LsmiConfig {
    fn default() -> Self {
        Self {
            b_cap: DEFAULT_BASIS_CAP,
            sigma_grid: WidthGrid::MedianScaled(vec![0.2, 0.4, 0.6, 0.8, 1.0, 1.5, 2.0]),
            lambda_grid: vec![1e-3, 1e-2, 1e-1, 1.0],
            folds: 2,
            standardize: true,
        }
    }
}

impl LsmiConfig {
    pub fn validate(&self) -> Result<()> {
        if self.folds < 2 {
            return Err(Error::InvalidConfig(format!("need at least 2 folds, got {}", self.folds)));
        }
        if self.b_cap == 0 {
            return Err(Error::InvalidConfig("b_cap must be positive".into()));
        }
        resolve_regularizers(&self.lambda_grid, "lambda")?;
        match &self.sigma_grid {
            WidthGrid::MedianScaled(v) | WidthGrid::Absolute(v) if v.is_empty() => {
                Err(Error::InvalidConfig("sigma grid is empty".into()))
            }
            _ => Ok(()),
        }
    }
}

/// Kernel centres `(u_l, v_l)` and shared width, in the estimator's
/// working coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioBasis {
    pub centers: Vec<[f64; 2]>,
    pub sigma: f64,
}

impl RatioBasis {
    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub(crate) fn x_centers(&self) -> Vec<f64> {
        self.centers.iter().map(|c| c[0]).collect()
    }

    pub(crate) fn e_centers(&self) -> Vec<f64> {
        self.centers.iter().map(|c| c[1]).collect()
    }
}

/// Fitted density-ratio model `r(x, e) = alpha^T phi(x, e)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioModel {
    pub basis: RatioBasis,
    pub alpha: Vec<f64>,
    pub lambda: f64,
    /// Maps raw `x` to working coordinates.
    pub x_transform: Affine,
    /// Maps raw `e` to working coordinates, as fitted.
    pub e_transform: Affine,
    /// Whether `e` is re-standardized whenever the model is re-evaluated
    /// on new residuals.
    pub standardized: bool,
    /// Sample rows the centres were taken from, when known.
    #[serde(default)]
    pub center_idx: Vec<usize>,
}

impl RatioModel {
    /// Ratio estimate at a raw `(x, e)` point. May be negative.
    pub fn evaluate(&self, x: f64, e: f64) -> f64 {
        let u = self.x_transform.apply(x);
        let v = self.e_transform.apply(e);
        let scale = -0.5 / (self.basis.sigma * self.basis.sigma);
        self.basis
            .centers
            .iter()
            .zip(&self.alpha)
            .map(|(c, a)| a * (scale * ((u - c[0]).powi(2) + (v - c[1]).powi(2))).exp())
            .sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmiEstimate {
    pub value: f64,
    pub sigma: f64,
    pub lambda: f64,
    pub cv_score: f64,
}

/// Basis evaluations split into the `x` and `e` factors, each `n x b`.
/// The matched design is their elementwise product.
#[derive(Debug, Clone, PartialEq)]
pub struct RatioDesign {
    pub x_part: Matrix,
    pub e_part: Matrix,
}

impl RatioDesign {
    /// Entry `(i, l)` is `phi_l(x_i, e_i)`.
    pub fn matched(&self) -> Matrix {
        self.x_part.component_mul(&self.e_part)
    }

    pub fn rows(&self) -> usize {
        self.x_part.nrows()
    }

    fn select_rows(&self, idx: &[usize]) -> RatioDesign {
        RatioDesign {
            x_part: self.x_part.select_rows(idx),
            e_part: self.e_part.select_rows(idx),
        }
    }
}

pub fn build_ratio_design(x: &[f64], e: &[f64], basis: &RatioBasis) -> Result<RatioDesign> {
    check_width(basis.sigma)?;
    if x.len() != e.len() {
        return Err(Error::LengthMismatch(x.len(), e.len()));
    }
    Ok(RatioDesign {
        x_part: gaussian_design(x, &basis.x_centers(), basis.sigma),
        e_part: gaussian_design(e, &basis.e_centers(), basis.sigma),
    })
}

pub(crate) fn gram(m: &Matrix) -> Matrix {
    m.transpose() * m
}

pub(crate) fn column_means_of_product(a: &Matrix, b: &Matrix) -> Vector {
    let n = a.nrows() as f64;
    Vector::from_fn(a.ncols(), |l, _| a.column(l).dot(&b.column(l)) / n)
}

/// Empirical `H` (over all `n^2` cross pairings) and `h` (matched pairs).
pub fn compute_h_hat(design: &RatioDesign) -> (Matrix, Vector) {
    let gx = gram(&design.x_part);
    h_hat_with_x_gram(design, &gx)
}

pub(crate) fn h_hat_with_x_gram(design: &RatioDesign, gram_x: &Matrix) -> (Matrix, Vector) {
    let n = design.rows() as f64;
    let ge = gram(&design.e_part);
    let big_h = gram_x.component_mul(&ge) / (n * n);
    let small_h = column_means_of_product(&design.x_part, &design.e_part);
    (big_h, small_h)
}

/// `(H + lambda I)^-1 h`.
pub fn fit_alpha(big_h: &Matrix, small_h: &Vector, lambda: f64) -> Result<Vector> {
    crate::numerics::solve_regularized(big_h, small_h, lambda)
}

/// `h^T a - a^T H a / 2 - 1/2`.
pub fn estimate_smi(big_h: &Matrix, small_h: &Vector, alpha: &Vector) -> f64 {
    small_h.dot(alpha) - 0.5 * alpha.dot(&(big_h * alpha)) - 0.5
}

/// Held-out least-squares objective `a^T H a / 2 - h^T a`.
fn holdout_objective(big_h: &Matrix, small_h: &Vector, alpha: &Vector) -> f64 {
    0.5 * alpha.dot(&(big_h * alpha)) - small_h.dot(alpha)
}

/// Prepared fold geometry: training and held-out row sets.
pub(crate) struct FoldPlan {
    pub train: Vec<Vec<usize>>,
    pub test: Vec<Vec<usize>>,
}

impl FoldPlan {
    pub fn new(n: usize, k: usize, rng: &mut RngStream) -> Result<Self> {
        if k < 2 {
            return Err(Error::InvalidConfig(format!("need at least 2 folds, got {k}")));
        }
        if n < 2 * k {
            return Err(Error::InsufficientData { needed: 2 * k, got: n });
        }
        let test = shuffled_folds(n, k, rng);
        let train = test.iter().map(|f| complement(n, f)).collect();
        Ok(Self { train, test })
    }
}

/// K-fold scores for one width across a list of regularizers; a grid point
/// whose training system is singular scores `+inf`.
fn cv_scores_for_width(design: &RatioDesign, folds: &FoldPlan, lambdas: &[f64]) -> Vec<f64> {
    // Gram matrices are sums over rows, so each training Gram is the total
    // minus the held-out fold's.
    let parts: Vec<(Matrix, Matrix, Vector)> = folds
        .test
        .iter()
        .map(|test| {
            let d = design.select_rows(test);
            let hv = column_means_of_product(&d.x_part, &d.e_part);
            (gram(&d.x_part), gram(&d.e_part), hv)
        })
        .collect();
    let n = design.rows();
    let mut gx_all = Matrix::zeros(design.x_part.ncols(), design.x_part.ncols());
    let mut ge_all = gx_all.clone();
    let mut hv_all = Vector::zeros(design.x_part.ncols());
    for ((gx, ge, hv), test) in parts.iter().zip(&folds.test) {
        gx_all += gx;
        ge_all += ge;
        hv_all += hv * test.len() as f64;
    }
    let mut totals = vec![0.0; lambdas.len()];
    for ((gx_te, ge_te, hv_te), test) in parts.iter().zip(&folds.test) {
        let n_te = test.len() as f64;
        let n_tr = (n - test.len()) as f64;
        let h_te = gx_te.component_mul(ge_te) / (n_te * n_te);
        let h_tr = (&gx_all - gx_te).component_mul(&(&ge_all - ge_te)) / (n_tr * n_tr);
        let hv_tr = (&hv_all - hv_te * n_te) / n_tr;
        for (total, &lambda) in totals.iter_mut().zip(lambdas) {
            let score = match RegularizedCholesky::new(&h_tr, lambda) {
                Ok(chol) => holdout_objective(&h_te, hv_te, &chol.solve(&hv_tr)),
                Err(_) => f64::INFINITY,
            };
            *total += if score.is_finite() { score } else { f64::INFINITY };
        }
    }
    let k = folds.test.len() as f64;
    totals.into_iter().map(|t| t / k).collect()
}

/// Working-frame copy of the data with the transforms that produced it.
pub(crate) struct WorkingPairs {
    pub x: Vec<f64>,
    pub e: Vec<f64>,
    pub x_transform: Affine,
    pub e_transform: Affine,
}

impl WorkingPairs {
    pub fn new(x: &[f64], e: &[f64], standardize: bool) -> Result<Self> {
        if x.len() != e.len() {
            return Err(Error::LengthMismatch(x.len(), e.len()));
        }
        let (xt, et) = if standardize {
            (
                Affine::fit(x).ok_or(Error::ZeroVariance(Axis::X))?,
                Affine::fit(e).ok_or(Error::ZeroVariance(Axis::Y))?,
            )
        } else {
            (Affine::IDENTITY, Affine::IDENTITY)
        };
        Ok(Self {
            x: xt.apply_all(x),
            e: et.apply_all(e),
            x_transform: xt,
            e_transform: et,
        })
    }

    pub fn basis(&self, centers: &[usize], sigma: f64) -> RatioBasis {
        RatioBasis {
            centers: centers.iter().map(|&i| [self.x[i], self.e[i]]).collect(),
            sigma,
        }
    }

    fn joint_median(&self) -> Result<f64> {
        let pts: Vec<[f64; 2]> = self.x.iter().zip(&self.e).map(|(&a, &b)| [a, b]).collect();
        Ok(median_pairwise_distance(&pts, DiagonalMode::Exclude)?.max(1e-3))
    }
}

/// Average held-out `J` over `folds` folds for one `(sigma, lambda)`, on
/// the coordinates as given. Draws `min(200, n)` centres, then the fold
/// split, from `rng`.
pub fn lsmi_cv_score(x: &[f64], e: &[f64], sigma: f64, lambda: f64, folds: usize, rng: &mut RngStream) -> Result<f64> {
    let pairs = WorkingPairs::new(x, e, false)?;
    let n = x.len();
    let idx = rng.sample_without_replacement(n, DEFAULT_BASIS_CAP.min(n));
    let plan = FoldPlan::new(n, folds, rng)?;
    let basis = pairs.basis(&idx, sigma);
    let design = build_ratio_design(&pairs.x, &pairs.e, &basis)?;
    resolve_regularizers(&[lambda], "lambda")?;
    Ok(cv_scores_for_width(&design, &plan, &[lambda])[0])
}

/// Model selection result shared with callers that refit repeatedly.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Selection {
    pub sigma: f64,
    pub lambda: f64,
    pub cv_score: f64,
    pub center_idx: Vec<usize>,
}

/// Grid search over `(sigma, lambda)`. Ties go to the smaller sigma, then
/// the smaller lambda.
pub(crate) fn select(pairs: &WorkingPairs, config: &LsmiConfig, rng: &mut RngStream) -> Result<Selection> {
    config.validate()?;
    let n = pairs.x.len();
    if n < 2 * config.folds {
        return Err(Error::InsufficientData {
            needed: 2 * config.folds,
            got: n,
        });
    }
    let center_idx = rng.sample_without_replacement(n, config.b_cap.min(n));
    let plan = FoldPlan::new(n, config.folds, rng)?;
    let sigmas = config.sigma_grid.resolve(|| pairs.joint_median())?;
    let lambdas = resolve_regularizers(&config.lambda_grid, "lambda")?;
    let mut best: Option<(f64, f64, f64)> = None;
    for &sigma in &sigmas {
        let design = build_ratio_design(&pairs.x, &pairs.e, &pairs.basis(&center_idx, sigma))?;
        for (&lambda, score) in lambdas.iter().zip(cv_scores_for_width(&design, &plan, &lambdas)) {
            if score.is_finite() && best.is_none_or(|(_, _, s)| score < s) {
                best = Some((sigma, lambda, score));
            }
        }
    }
    let (sigma, lambda, cv_score) = best.ok_or(Error::SingularSystem)?;
    Ok(Selection {
        sigma,
        lambda,
        cv_score,
        center_idx,
    })
}

/// Fits `alpha` on all pairs for a fixed selection.
pub(crate) fn refit(pairs: &WorkingPairs, sel: &Selection, standardized: bool) -> Result<(RatioModel, f64)> {
    let basis = pairs.basis(&sel.center_idx, sel.sigma);
    let design = build_ratio_design(&pairs.x, &pairs.e, &basis)?;
    let (big_h, small_h) = compute_h_hat(&design);
    let alpha = fit_alpha(&big_h, &small_h, sel.lambda)?;
    let smi = estimate_smi(&big_h, &small_h, &alpha);
    if !smi.is_finite() {
        return Err(Error::NonFiniteEvaluation);
    }
    Ok((
        RatioModel {
            basis,
            alpha: alpha.iter().copied().collect(),
            lambda: sel.lambda,
            x_transform: pairs.x_transform,
            e_transform: pairs.e_transform,
            standardized,
            center_idx: sel.center_idx.clone(),
        },
        smi,
    ))
}

/// Cross-validated LSMI: selects `(sigma, lambda)` on the grid, refits on
/// all pairs and returns the model with its SMI estimate.
pub fn fit_lsmi(x: &[f64], e: &[f64], config: &LsmiConfig, rng: &mut RngStream) -> Result<(RatioModel, SmiEstimate)> {
    let pairs = WorkingPairs::new(x, e, config.standardize)?;
    let sel = select(&pairs, config, rng)?;
    let (model, value) = refit(&pairs, &sel, config.standardize)?;
    Ok((
        model,
        SmiEstimate {
            value,
            sigma: sel.sigma,
            lambda: sel.lambda,
            cv_score: sel.cv_score,
        },
    ))
}

/// LSMI with the width and regularizer of a fitted model held fixed,
/// prepared for fast re-evaluation under permutations of `e`.
///
/// When the model knows which rows its centres came from, a permutation
/// moves the centres' `e` coordinates with the data, so the identity
/// pairing gets no advantage from centres sitting on its own points.
/// Otherwise the centres stay put and `H`, which then only depends on the
/// multiset of `e` values, is factorized once.
pub struct FrozenRatioStatistic {
    x_part: Matrix,
    gram_x: Matrix,
    e: Vec<f64>,
    center_idx: Vec<usize>,
    sigma: f64,
    lambda: f64,
    fixed: Option<(Matrix, Matrix, RegularizedCholesky)>,
}

impl FrozenRatioStatistic {
    pub fn new(x: &[f64], e: &[f64], model: &RatioModel) -> Result<Self> {
        let xs = model.x_transform.apply_all(x);
        let es = model.e_transform.apply_all(e);
        let design = build_ratio_design(&xs, &es, &model.basis)?;
        let gram_x = gram(&design.x_part);
        let movable = !model.center_idx.is_empty() && model.center_idx.iter().all(|&c| c < e.len());
        let fixed = if movable {
            None
        } else {
            let (big_h, _) = h_hat_with_x_gram(&design, &gram_x);
            let chol = RegularizedCholesky::new(&big_h, model.lambda)?;
            Some((design.e_part, big_h, chol))
        };
        Ok(Self {
            x_part: design.x_part,
            gram_x,
            e: es,
            center_idx: model.center_idx.clone(),
            sigma: model.basis.sigma,
            lambda: model.lambda,
            fixed,
        })
    }

    /// SMI estimate on `(x_i, e_perm(i))`; `None` is the identity pairing.
    pub fn evaluate(&self, perm: Option<&[usize]>) -> f64 {
        let n = self.x_part.nrows();
        let pick = |i: usize| perm.map_or(i, |p| p[i]);
        if let Some((e_part, big_h, chol)) = &self.fixed {
            let small_h = Vector::from_fn(self.x_part.ncols(), |l, _| {
                (0..n).map(|i| self.x_part[(i, l)] * e_part[(pick(i), l)]).sum::<f64>() / n as f64
            });
            return estimate_smi(big_h, &small_h, &chol.solve(&small_h));
        }
        let scale = -0.5 / (self.sigma * self.sigma);
        let centers: Vec<f64> = self.center_idx.iter().map(|&c| self.e[pick(c)]).collect();
        let e_part = Matrix::from_fn(n, centers.len(), |j, l| (scale * (self.e[j] - centers[l]).powi(2)).exp());
        let gram_e = gram(&e_part);
        let big_h = self.gram_x.component_mul(&gram_e) / (n * n) as f64;
        let small_h = Vector::from_fn(centers.len(), |l, _| {
            (0..n).map(|i| self.x_part[(i, l)] * e_part[(pick(i), l)]).sum::<f64>() / n as f64
        });
        match RegularizedCholesky::new(&big_h, self.lambda) {
            Ok(chol) => estimate_smi(&big_h, &small_h, &chol.solve(&small_h)),
            Err(_) => f64::NAN,
        }
    }
}
