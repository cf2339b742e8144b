//! Least-squares independence regression.
//!
//! A Gaussian-basis regressor `f(x) = beta^T psi(x)` is fitted so that its
//! residuals are as independent of the input as LSMI can tell, by gradient
//! descent on `SMI(x, y - f(x)) + gamma/2 |beta|^2` with Armijo backtracking.
//! The width `tau` and penalty `gamma` are chosen by held-out SMI, and the
//! final fit keeps the best of several random basis draws.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{standardize, Affine, SamplePairs, Standardization};
use crate::error::{Error, Result};
use crate::lsmi::{
    self, column_means_of_product, estimate_smi, fit_lsmi, gram, resolve_regularizers, FoldPlan, LsmiConfig,
    RatioModel, Selection, SmiEstimate, WidthGrid, WorkingPairs,
};
use crate::numerics::{
    check_width, gather, gaussian_design, mean, median_pairwise_distance, DiagonalMode, Matrix,
    RegularizedCholesky, RngStream, Vector,
};

/// Gaussian regression basis `psi_l(x) = exp(-(x - c_l)^2 / (2 tau^2))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionBasis {
    pub centers: Vec<f64>,
    pub tau: f64,
}

impl RegressionBasis {
    /// `min(m_cap, n)` centres drawn from `x` without replacement.
    pub fn draw(x: &[f64], m_cap: usize, tau: f64, rng: &mut RngStream) -> Result<Self> {
        check_width(tau)?;
        let idx = rng.sample_without_replacement(x.len(), m_cap.min(x.len()));
        Ok(Self {
            centers: gather(x, &idx),
            tau,
        })
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    /// `n x m` matrix of basis values.
    pub fn design(&self, x: &[f64]) -> Matrix {
        gaussian_design(x, &self.centers, self.tau)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionModel {
    pub basis: RegressionBasis,
    pub beta: Vec<f64>,
    pub intercept: f64,
}

impl RegressionModel {
    pub fn predict(&self, x: f64) -> f64 {
        let scale = -0.5 / (self.basis.tau * self.basis.tau);
        self.basis
            .centers
            .iter()
            .zip(&self.beta)
            .map(|(c, b)| b * (scale * (x - c) * (x - c)).exp())
            .sum::<f64>()
            + self.intercept
    }
}

/// `y_i - beta^T psi(x_i)`; the intercept is not subtracted.
pub fn residuals(model: &RegressionModel, x: &[f64], y: &[f64]) -> Vec<f64> {
    let fitted = model.basis.design(x) * Vector::from_column_slice(&model.beta);
    y.iter().zip(fitted.iter()).map(|(a, b)| a - b).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArmijoParams {
    pub initial_step: f64,
    pub shrink: f64,
    pub sufficient_decrease: f64,
    pub min_step: f64,
}

impl Default for ArmijoParams {
    fn default() -> Self {
        Self {
            initial_step: 1.0,
            shrink: 0.5,
            sufficient_decrease: 1e-4,
            min_step: 1e-10,
        }
    }
}

/// Scalar in front of the kernel derivative.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GradientForm {
    /// `d phi / d beta = phi (e - v) psi / sigma^2`, the chain rule.
    #[default]
    Exact,
    /// `-1 / (2 sigma^2)` in place of `1 / sigma^2`. Kept for comparison
    /// only.
    Literal,
}

impl GradientForm {
    fn factor(self, sigma: f64) -> f64 {
        match self {
            GradientForm::Exact => 1.0 / (sigma * sigma),
            GradientForm::Literal => -0.5 / (sigma * sigma),
        }
    }
}

/// Starting point of the descent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BetaInit {
    Zero,
    /// Kernel ridge least squares, penalty picked by leave-one-out error.
    #[default]
    Ridge,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LsirConfig {
    pub m_cap: usize,
    pub tau_grid: WidthGrid,
    pub gamma_grid: Vec<f64>,
    pub folds: usize,
    pub max_iterations: usize,
    pub armijo: ArmijoParams,
    /// Stop once an accepted step lowers the objective by less than this,
    /// both before and right after an LSMI re-selection.
    pub tolerance: f64,
    pub restarts: usize,
    /// Re-run LSMI model selection every this many iterations (0: only
    /// when a line search fails).
    pub reselect_every: usize,
    pub gradient: GradientForm,
    pub init: BetaInit,
    pub lsmi: LsmiConfig,
    /// Standardize `x` and `y` before fitting.
    pub standardize: bool,
}

impl Default for LsirConfig {
    fn default() -> Self {
        Self {
            m_cap: 200,
            tau_grid: WidthGrid::MedianScaled(vec![0.5, 0.8, 1.0, 1.5, 2.0]),
            gamma_grid: vec![1e-4, 1e-3, 1e-2, 1e-1],
            folds: 2,
            max_iterations: 200,
            armijo: ArmijoParams::default(),
            tolerance: 1e-6,
            restarts: 5,
            reselect_every: 10,
            gradient: GradientForm::Exact,
            init: BetaInit::Ridge,
            lsmi: LsmiConfig::default(),
            standardize: true,
        }
    }
}

impl LsirConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.folds < 2 {
            return bad(format!("need at least 2 folds, got {}", self.folds));
        }
        if self.restarts == 0 {
            return bad("restarts must be at least 1".into());
        }
        if self.m_cap == 0 {
            return bad("m_cap must be positive".into());
        }
        let a = &self.armijo;
        if !(a.initial_step > 0.0 && a.shrink > 0.0 && a.shrink < 1.0 && a.sufficient_decrease > 0.0 && a.min_step > 0.0)
        {
            return bad(format!("invalid Armijo parameters {a:?}"));
        }
        resolve_regularizers(&self.gamma_grid, "gamma")?;
        match &self.tau_grid {
            WidthGrid::MedianScaled(v) | WidthGrid::Absolute(v) if v.is_empty() => return bad("tau grid is empty".into()),
            _ => {}
        }
        self.lsmi.validate()
    }
}

/// Record of one descent run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FitTrace {
    /// Objective at the start and after every accepted step.
    pub objective: Vec<f64>,
    /// Indices into `objective` where LSMI model selection was redone;
    /// values are only comparable within a segment.
    pub segment_starts: Vec<usize>,
    pub iterations: usize,
    /// Set when the line search failed three times in a row.
    pub no_descent: bool,
    pub final_smi: f64,
    pub tau: f64,
    pub gamma: f64,
    pub restart: usize,
}

impl FitTrace {
    /// Objective values grouped by model-selection segment.
    pub fn segments(&self) -> Vec<&[f64]> {
        let mut bounds = self.segment_starts.clone();
        bounds.push(self.objective.len());
        bounds.windows(2).map(|w| &self.objective[w[0]..w[1]]).collect()
    }
}

/// LSMI with width, regularizer and centre indices held fixed for a fixed
/// input sample; only the residuals vary.
struct FixedRatio {
    sigma: f64,
    lambda: f64,
    center_idx: Vec<usize>,
    standardize: bool,
    x_part: Matrix,
    gram_x: Matrix,
}

struct RatioEval {
    smi: f64,
    z: Vec<f64>,
    e_scale: f64,
    e_centers: Vec<f64>,
    e_part: Matrix,
    alpha: Vector,
}

impl FixedRatio {
    fn new(work_x: &[f64], sel: &Selection, standardize: bool) -> Self {
        let u = gather(work_x, &sel.center_idx);
        let x_part = gaussian_design(work_x, &u, sel.sigma);
        let gram_x = gram(&x_part);
        Self {
            sigma: sel.sigma,
            lambda: sel.lambda,
            center_idx: sel.center_idx.clone(),
            standardize,
            x_part,
            gram_x,
        }
    }

    fn evaluate(&self, e: &[f64]) -> Result<RatioEval> {
        let tf = if self.standardize {
            Affine::fit(e).ok_or(Error::ZeroVariance(crate::data::Axis::Y))?
        } else {
            Affine::IDENTITY
        };
        let z = tf.apply_all(e);
        let e_centers = gather(&z, &self.center_idx);
        let e_part = gaussian_design(&z, &e_centers, self.sigma);
        let n = z.len() as f64;
        let big_h = self.gram_x.component_mul(&gram(&e_part)) / (n * n);
        let small_h = column_means_of_product(&self.x_part, &e_part);
        let alpha = RegularizedCholesky::new(&big_h, self.lambda)?.solve(&small_h);
        let smi = estimate_smi(&big_h, &small_h, &alpha);
        if !smi.is_finite() {
            return Err(Error::NonFiniteEvaluation);
        }
        Ok(RatioEval {
            smi,
            z,
            e_scale: tf.scale,
            e_centers,
            e_part,
            alpha,
        })
    }
}

/// `dSMI/dz_j` for working residuals `z`, with `alpha` and the centres held
/// fixed. `O(n b^2)`: the cross-pairing term only needs
/// `S = Phi_e diag(alpha) Phi_x^T Phi_x`.
#[allow(clippy::too_many_arguments)]
fn residual_sensitivity(
    x_part: &Matrix,
    gram_x: &Matrix,
    e_part: &Matrix,
    z: &[f64],
    e_centers: &[f64],
    alpha: &Vector,
    sigma: f64,
    form: GradientForm,
) -> Vec<f64> {
    let n = z.len() as f64;
    let weighted = Matrix::from_fn(e_part.nrows(), e_part.ncols(), |j, l| e_part[(j, l)] * alpha[l]);
    let s = &weighted * gram_x;
    // d phi_e[j,l] / d z_j = -phi_e[j,l] (z_j - v_l) / sigma^2; the form
    // factor carries the 1/sigma^2 (or the printed constant).
    let factor = form.factor(sigma);
    (0..z.len())
        .map(|j| {
            let mut acc = 0.0;
            for l in 0..e_centers.len() {
                let d = weighted[(j, l)] * (z[j] - e_centers[l]);
                acc += d * (x_part[(j, l)] / n - s[(j, l)] / (n * n));
            }
            -factor * acc
        })
        .collect()
}

/// Chain rule from working residuals to `beta`. With re-standardization
/// `z = (e - mean(e)) / sd(e)` the sensitivities are projected off the
/// directions that only shift or rescale `e`.
fn beta_gradient(psi: &Matrix, dz: &[f64], z: &[f64], e_scale: f64, standardized: bool) -> Vec<f64> {
    let de: Vec<f64> = if standardized {
        let g_mean = mean(dz);
        let gz_mean = dz.iter().zip(z).map(|(g, v)| g * v).sum::<f64>() / dz.len() as f64;
        dz.iter()
            .zip(z)
            .map(|(g, v)| (g - g_mean - v * gz_mean) / e_scale)
            .collect()
    } else {
        dz.iter().map(|g| g / e_scale).collect()
    };
    // e = y - psi beta
    (psi.transpose() * Vector::from_vec(de)).iter().map(|v| -v).collect()
}

/// Gradient of `beta -> SMI(x, y - psi(x)^T beta)` with the ratio model's
/// `alpha` and centres frozen. Residuals are mapped into the ratio model's
/// working frame, re-standardized if the model was fitted that way.
pub fn smi_gradient(
    x: &[f64],
    y: &[f64],
    model: &RegressionModel,
    ratio: &RatioModel,
    form: GradientForm,
) -> Result<Vec<f64>> {
    let e = residuals(model, x, y);
    let tf = if ratio.standardized {
        Affine::fit(&e).ok_or(Error::ZeroVariance(crate::data::Axis::Y))?
    } else {
        ratio.e_transform
    };
    let xs = ratio.x_transform.apply_all(x);
    let z = tf.apply_all(&e);
    let design = lsmi::build_ratio_design(&xs, &z, &ratio.basis)?;
    let gram_x = gram(&design.x_part);
    let alpha = Vector::from_column_slice(&ratio.alpha);
    let dz = residual_sensitivity(
        &design.x_part,
        &gram_x,
        &design.e_part,
        &z,
        &ratio.basis.e_centers(),
        &alpha,
        ratio.basis.sigma,
        form,
    );
    Ok(beta_gradient(
        &model.basis.design(x),
        &dz,
        &z,
        tf.scale,
        ratio.standardized,
    ))
}

fn norm_sq(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum()
}

/// Gradient descent on `SMI + gamma/2 |beta|^2` from the start picked by
/// `config.init`. Returns the lowest-objective `beta` visited.
pub fn fit_beta(
    x: &[f64],
    y: &[f64],
    basis: &RegressionBasis,
    gamma: f64,
    config: &LsirConfig,
    rng: &mut RngStream,
) -> Result<(Vec<f64>, FitTrace)> {
    let n = x.len();
    if n != y.len() {
        return Err(Error::LengthMismatch(n, y.len()));
    }
    let m = basis.len();
    let mut beta = match config.init {
        BetaInit::Ridge if config.max_iterations > 0 => ridge_init(&basis.design(x), y),
        _ => vec![0.0; m],
    };
    let mut trace = FitTrace {
        gamma,
        tau: basis.tau,
        ..FitTrace::default()
    };
    if config.max_iterations == 0 {
        return Ok((beta, trace));
    }
    let needed = (2 * config.lsmi.folds).max(4);
    if n < needed {
        return Err(Error::InsufficientData { needed, got: n });
    }
    let psi = basis.design(x);
    let residual = |b: &[f64]| -> Vec<f64> {
        let fitted = &psi * Vector::from_column_slice(b);
        y.iter().zip(fitted.iter()).map(|(a, f)| a - f).collect()
    };
    let standardize = config.lsmi.standardize;
    let reselect = |b: &[f64], rng: &mut RngStream| -> Result<FixedRatio> {
        let pairs = WorkingPairs::new(x, &residual(b), standardize)?;
        let sel = lsmi::select(&pairs, &config.lsmi, rng)?;
        Ok(FixedRatio::new(&pairs.x, &sel, standardize))
    };
    let objective = |ev: &RatioEval, b: &[f64]| ev.smi + 0.5 * gamma * norm_sq(b);

    let mut fixed = reselect(&beta, rng)?;
    let mut current = fixed.evaluate(&residual(&beta))?;
    let mut current_obj = objective(&current, &beta);
    trace.segment_starts.push(0);
    trace.objective.push(current_obj);
    let mut best = (current_obj, beta.clone());
    let mut failures = 0;
    let mut force_reselect = false;
    let mut stalled = false;

    for it in 0..config.max_iterations {
        let scheduled = config.reselect_every > 0 && it > 0 && it % config.reselect_every == 0;
        if scheduled || force_reselect {
            fixed = reselect(&beta, rng)?;
            current = fixed.evaluate(&residual(&beta))?;
            current_obj = objective(&current, &beta);
            trace.segment_starts.push(trace.objective.len());
            trace.objective.push(current_obj);
            // Objectives from different selections are not comparable, so
            // the incumbent is re-scored under the new one.
            best.0 = match fixed.evaluate(&residual(&best.1)) {
                Ok(ev) => objective(&ev, &best.1),
                Err(_) => f64::INFINITY,
            };
            if current_obj <= best.0 {
                best = (current_obj, beta.clone());
            }
            force_reselect = false;
        }
        trace.iterations = it + 1;

        let dz = residual_sensitivity(
            &fixed.x_part,
            &fixed.gram_x,
            &current.e_part,
            &current.z,
            &current.e_centers,
            &current.alpha,
            fixed.sigma,
            config.gradient,
        );
        let mut grad = beta_gradient(&psi, &dz, &current.z, current.e_scale, standardize);
        for (g, b) in grad.iter_mut().zip(&beta) {
            *g += gamma * b;
        }
        let grad_sq = norm_sq(&grad);
        if grad_sq == 0.0 {
            break;
        }

        let mut step = config.armijo.initial_step;
        let mut accepted = None;
        while step >= config.armijo.min_step {
            let candidate: Vec<f64> = beta.iter().zip(&grad).map(|(b, g)| b - step * g).collect();
            if let Ok(ev) = fixed.evaluate(&residual(&candidate)) {
                let obj = objective(&ev, &candidate);
                if obj <= current_obj - config.armijo.sufficient_decrease * step * grad_sq {
                    accepted = Some((candidate, ev, obj));
                    break;
                }
            }
            step *= config.armijo.shrink;
        }

        match accepted {
            Some((candidate, ev, obj)) => {
                let decrease = current_obj - obj;
                beta = candidate;
                current = ev;
                current_obj = obj;
                trace.objective.push(obj);
                if obj < best.0 {
                    best = (obj, beta.clone());
                }
                failures = 0;
                if decrease < config.tolerance {
                    // A stall right after re-selection is convergence; one
                    // under a stale selection only calls for a fresh one.
                    if stalled {
                        break;
                    }
                    stalled = true;
                    force_reselect = true;
                } else {
                    stalled = false;
                }
            }
            None => {
                failures += 1;
                if failures >= 3 {
                    trace.no_descent = true;
                    break;
                }
                force_reselect = true;
            }
        }
    }
    Ok((best.1, trace))
}

/// Least squares `beta` with penalty `n rho |beta|^2`, `rho` on a small grid
/// scored by leave-one-out error.
fn ridge_init(psi: &Matrix, y: &[f64]) -> Vec<f64> {
    let n = psi.nrows();
    let yv = Vector::from_column_slice(y);
    let g = psi.transpose() * psi;
    let py = psi.transpose() * &yv;
    let mut best: Option<(f64, Vec<f64>)> = None;
    for rho in [1e-4, 1e-3, 1e-2, 1e-1, 1.0] {
        let Ok(ch) = RegularizedCholesky::new(&g, n as f64 * rho) else {
            continue;
        };
        let beta = ch.solve(&py);
        let mut loo = 0.0;
        let fitted = psi * &beta;
        for i in 0..n {
            let row = psi.row(i).transpose();
            let h = row.dot(&ch.solve(&row));
            let r = (y[i] - fitted[i]) / (1.0 - h);
            loo += r * r;
        }
        if best.as_ref().is_none_or(|(b, _)| loo < *b) {
            best = Some((loo, beta.iter().copied().collect()));
        }
    }
    best.map(|b| b.1).unwrap_or_else(|| vec![0.0; psi.ncols()])
}

type RestartRun = (RegressionBasis, Vec<f64>, FitTrace, RatioModel, SmiEstimate);

/// Mean held-out SMI over `folds` folds for one `(tau, gamma)`.
pub fn lsir_cv_score(
    x: &[f64],
    y: &[f64],
    tau: f64,
    gamma: f64,
    folds: usize,
    config: &LsirConfig,
    rng: &mut RngStream,
) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch(x.len(), y.len()));
    }
    let plan = FoldPlan::new(x.len(), folds, rng)?;
    let mut total = 0.0;
    for (train, test) in plan.train.iter().zip(&plan.test) {
        let (x_tr, y_tr) = (gather(x, train), gather(y, train));
        let basis = RegressionBasis::draw(&x_tr, config.m_cap, tau, rng)?;
        let (beta, _) = fit_beta(&x_tr, &y_tr, &basis, gamma, config, rng)?;
        let model = RegressionModel {
            basis,
            beta,
            intercept: 0.0,
        };
        let x_te = gather(x, test);
        let e_te = residuals(&model, &x_te, &gather(y, test));
        let (_, est) = fit_lsmi(&x_te, &e_te, &config.lsmi, rng)?;
        total += est.value;
    }
    Ok(total / folds as f64)
}

/// Output of [`fit_lsir`]. The model lives in the working (standardized)
/// frame; [`LsirFit::predict`] maps raw inputs to raw predictions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LsirFit {
    pub model: RegressionModel,
    pub scaling: Standardization,
    pub smi: SmiEstimate,
    pub ratio: RatioModel,
    pub trace: FitTrace,
    pub cv_score: f64,
    /// Final SMI estimate of every restart, in restart order.
    pub restart_smi: Vec<f64>,
}

impl LsirFit {
    pub fn predict(&self, x: f64) -> f64 {
        self.scaling.y.invert(self.model.predict(self.scaling.x.apply(x)))
    }

    /// Working-frame inputs and residuals (without intercept), the pairs
    /// the SMI estimate was computed on.
    pub fn working_residuals(&self, samples: &SamplePairs) -> (Vec<f64>, Vec<f64>) {
        let x = self.scaling.x.apply_all(samples.x());
        let y = self.scaling.y.apply_all(samples.y());
        let e = residuals(&self.model, &x, &y);
        (x, e)
    }
}

pub(crate) fn working_frame(samples: &SamplePairs, enabled: bool) -> Result<(SamplePairs, Standardization)> {
    if enabled {
        standardize(samples)
    } else {
        Ok((samples.clone(), Standardization::IDENTITY))
    }
}

/// Selects `(tau, gamma)` by cross-validation, then keeps the restart whose
/// fitted residuals have the smallest SMI estimate.
pub fn fit_lsir(samples: &SamplePairs, config: &LsirConfig, rng: &mut RngStream) -> Result<LsirFit> {
    config.validate()?;
    let n = samples.len();
    if n < 2 * config.folds {
        return Err(Error::InsufficientData {
            needed: 2 * config.folds,
            got: n,
        });
    }
    let (work, scaling) = working_frame(samples, config.standardize)?;
    let (x, y) = (work.x(), work.y());
    let taus = config
        .tau_grid
        .resolve(|| Ok(median_pairwise_distance(x, DiagonalMode::Exclude)?.max(1e-3)))?;
    let gammas = resolve_regularizers(&config.gamma_grid, "gamma")?;
    let cv_stream = rng.child();
    let restart_streams = rng.children(config.restarts);

    let grid: Vec<(f64, f64)> = taus
        .iter()
        .flat_map(|&t| gammas.iter().map(move |&g| (t, g)))
        .collect();
    // Every grid point sees the same folds and draws.
    let scores: Vec<Result<f64>> = grid
        .par_iter()
        .map(|&(tau, gamma)| lsir_cv_score(x, y, tau, gamma, config.folds, config, &mut cv_stream.clone()))
        .collect();
    let mut best: Option<(f64, f64, f64)> = None;
    let mut first_err = None;
    for (&(tau, gamma), score) in grid.iter().zip(scores) {
        match score {
            Ok(s) if s.is_finite() => {
                if best.is_none_or(|(_, _, b)| s < b) {
                    best = Some((tau, gamma, s));
                }
            }
            Ok(_) => {}
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    let Some((tau, gamma, cv_score)) = best else {
        return Err(first_err.unwrap_or(Error::NonFiniteEvaluation));
    };

    // every restart is scored with the same LSMI centres and folds
    let score_stream = rng.child();
    let runs: Vec<Result<RestartRun>> = restart_streams
        .into_par_iter()
        .map(|mut stream| {
            let basis = RegressionBasis::draw(x, config.m_cap, tau, &mut stream)?;
            let (beta, trace) = fit_beta(x, y, &basis, gamma, config, &mut stream)?;
            let model = RegressionModel {
                basis,
                beta,
                intercept: 0.0,
            };
            let e = residuals(&model, x, y);
            let (ratio, est) = fit_lsmi(x, &e, &config.lsmi, &mut score_stream.clone())?;
            Ok((model.basis, model.beta, trace, ratio, est))
        })
        .collect();
    let mut restart_smi = Vec::with_capacity(runs.len());
    let mut chosen: Option<(usize, RestartRun)> = None;
    let mut first_err = None;
    for (i, run) in runs.into_iter().enumerate() {
        match run {
            Ok(r) => {
                restart_smi.push(r.4.value);
                if chosen.as_ref().is_none_or(|(_, c)| r.4.value < c.4.value) {
                    chosen = Some((i, r));
                }
            }
            Err(e) => {
                restart_smi.push(f64::NAN);
                first_err.get_or_insert(e);
            }
        }
    }
    let Some((restart, (basis, beta, mut trace, ratio, smi))) = chosen else {
        return Err(first_err.unwrap_or(Error::NonFiniteEvaluation));
    };
    let mut model = RegressionModel {
        basis,
        beta,
        intercept: 0.0,
    };
    model.intercept = mean(&residuals(&model, x, y));
    trace.restart = restart;
    trace.final_smi = smi.value;
    Ok(LsirFit {
        model,
        scaling,
        smi,
        ratio,
        trace,
        cv_score,
        restart_smi,
    })
}
