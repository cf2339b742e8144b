//! HSIC and HSIC regression.
//!
//! The empirical criterion is `(1/n^2) tr(K G L G)` with Gaussian Gram
//! matrices `K` on inputs and `L` on residuals and the centring matrix `G`.
//! HSICR fits `f(x) = theta^T phi(x)` with one Gaussian basis function per
//! sample and kernel widths fixed by the median heuristic.

use serde::{Deserialize, Serialize};

use crate::data::{SamplePairs, Standardization};
use crate::error::{Error, Result};
use crate::lsir::{working_frame, ArmijoParams};
use crate::lsmi::resolve_regularizers;
use crate::numerics::{
    check_width, complement, gather, gaussian_design, mean, median_pairwise_distance, shuffled_folds, DiagonalMode,
    Matrix, RngStream, Vector,
};

/// Kernel widths on inputs and residuals and the regression basis width.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HsicWidths {
    pub sigma_x: f64,
    pub sigma_e: f64,
    pub rho: f64,
}

impl HsicWidths {
    /// `sigma_x = median|x_i - x_j| / sqrt 2`, `rho = median|x_i - x_j|`
    /// and `sigma_e = median|y_i - y_j| / sqrt 2`, the last from the
    /// residuals of the zero regressor.
    pub fn median_heuristic(x: &[f64], y: &[f64]) -> Result<Self> {
        let mx = median_pairwise_distance(x, DiagonalMode::Include)?;
        let my = median_pairwise_distance(y, DiagonalMode::Include)?;
        let widths = Self {
            sigma_x: mx * std::f64::consts::FRAC_1_SQRT_2,
            sigma_e: my * std::f64::consts::FRAC_1_SQRT_2,
            rho: mx,
        };
        widths.validate()?;
        Ok(widths)
    }

    pub fn validate(&self) -> Result<()> {
        check_width(self.sigma_x)?;
        check_width(self.sigma_e)?;
        check_width(self.rho)
    }
}

/// Gaussian Gram matrix `exp(-(a_i - a_j)^2 / (2 w^2))`.
pub fn gaussian_gram(a: &[f64], width: f64) -> Matrix {
    gaussian_design(a, a, width)
}

/// `G M G` for the centring matrix `G = I - 11^T / n`.
pub fn double_center(m: &Matrix) -> Matrix {
    let n = m.nrows();
    let row_means: Vec<f64> = (0..n).map(|i| m.row(i).sum() / n as f64).collect();
    let col_means: Vec<f64> = (0..n).map(|j| m.column(j).sum() / n as f64).collect();
    let grand = row_means.iter().sum::<f64>() / n as f64;
    Matrix::from_fn(n, n, |i, j| m[(i, j)] - row_means[i] - col_means[j] + grand)
}

/// `sum_ij A_ij B_ij`.
fn frobenius_dot(a: &Matrix, b: &Matrix) -> f64 {
    a.iter().zip(b.iter()).map(|(p, q)| p * q).sum()
}

/// Empirical HSIC `(1/n^2) tr(K G L G)`.
pub fn hsic_estimate(x: &[f64], e: &[f64], sigma_x: f64, sigma_e: f64) -> Result<f64> {
    check_width(sigma_x)?;
    check_width(sigma_e)?;
    if x.len() != e.len() {
        return Err(Error::LengthMismatch(x.len(), e.len()));
    }
    let n = x.len();
    if n == 0 {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    let k = double_center(&gaussian_gram(x, sigma_x));
    let l = gaussian_gram(e, sigma_e);
    Ok(frobenius_dot(&k, &l) / (n * n) as f64)
}

/// HSIC against a fixed input sample, prepared for repeated residuals.
#[derive(Debug, Clone)]
pub struct HsicStatistic {
    centered_k: Matrix,
    sigma_e: f64,
}

impl HsicStatistic {
    pub fn new(x: &[f64], sigma_x: f64, sigma_e: f64) -> Result<Self> {
        check_width(sigma_x)?;
        check_width(sigma_e)?;
        Ok(Self {
            centered_k: double_center(&gaussian_gram(x, sigma_x)),
            sigma_e,
        })
    }

    pub fn value(&self, e: &[f64]) -> f64 {
        let n = e.len() as f64;
        frobenius_dot(&self.centered_k, &gaussian_gram(e, self.sigma_e)) / (n * n)
    }

    /// Value and gradient with respect to `e`.
    pub fn value_and_gradient(&self, e: &[f64]) -> (f64, Vec<f64>) {
        let n = e.len();
        let nn = (n * n) as f64;
        let s2 = self.sigma_e * self.sigma_e;
        let mut value = 0.0;
        let mut grad = vec![0.0; n];
        for k in 0..n {
            let mut acc = 0.0;
            for j in 0..n {
                let d = e[k] - e[j];
                let w = self.centered_k[(k, j)] * (-0.5 * d * d / s2).exp();
                value += w;
                acc -= w * d;
            }
            grad[k] = 2.0 * acc / (s2 * nn);
        }
        (value / nn, grad)
    }

    /// HSIC on `(x_i, e_perm(i))`.
    pub fn permuted(&self, e: &[f64], perm: &[usize]) -> f64 {
        let shuffled: Vec<f64> = perm.iter().map(|&j| e[j]).collect();
        self.value(&shuffled)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HsicrConfig {
    /// Candidate penalties; more than one triggers held-out selection.
    pub xi_grid: Vec<f64>,
    pub folds: usize,
    pub max_iterations: usize,
    pub gradient_tolerance: f64,
    pub armijo: ArmijoParams,
    /// Correction pairs kept by L-BFGS; 0 gives plain gradient descent.
    pub memory: usize,
    pub standardize: bool,
}

impl Default for HsicrConfig {
    fn default() -> Self {
        Self {
            xi_grid: vec![1e-4, 1e-3, 1e-2, 1e-1],
            folds: 2,
            max_iterations: 500,
            gradient_tolerance: 1e-5,
            armijo: ArmijoParams::default(),
            memory: 10,
            standardize: true,
        }
    }
}

impl HsicrConfig {
    pub fn validate(&self) -> Result<()> {
        resolve_regularizers(&self.xi_grid, "xi")?;
        if self.xi_grid.len() > 1 && self.folds < 2 {
            return Err(Error::InvalidConfig(format!("need at least 2 folds, got {}", self.folds)));
        }
        if !(self.gradient_tolerance >= 0.0) {
            return Err(Error::InvalidConfig("gradient tolerance must be nonnegative".into()));
        }
        let a = &self.armijo;
        if !(a.initial_step > 0.0 && a.shrink > 0.0 && a.shrink < 1.0 && a.sufficient_decrease > 0.0 && a.min_step > 0.0)
        {
            return Err(Error::InvalidConfig(format!("invalid Armijo parameters {a:?}")));
        }
        Ok(())
    }
}

/// Regressor with one Gaussian basis function per training input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HsicrModel {
    pub centers: Vec<f64>,
    pub rho: f64,
    pub theta: Vec<f64>,
    pub intercept: f64,
}

impl HsicrModel {
    pub fn predict(&self, x: f64) -> f64 {
        let s = -0.5 / (self.rho * self.rho);
        self.centers
            .iter()
            .zip(&self.theta)
            .map(|(c, t)| t * (s * (x - c) * (x - c)).exp())
            .sum::<f64>()
            + self.intercept
    }

    /// `y_i - theta^T phi(x_i)`, intercept excluded.
    pub fn residuals(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        let phi = gaussian_design(x, &self.centers, self.rho);
        let fitted = phi * Vector::from_column_slice(&self.theta);
        y.iter().zip(fitted.iter()).map(|(a, f)| a - f).collect()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct HsicrTrace {
    /// Objective at the start and after every accepted step.
    pub objective: Vec<f64>,
    pub iterations: usize,
    pub gradient_norm: f64,
    /// Set when no descent step could be found.
    pub no_descent: bool,
}

/// Penalized objective `HSIC(x, y - Phi theta) + xi/2 |theta|^2`.
struct Objective<'a> {
    stat: HsicStatistic,
    phi: Matrix,
    y: &'a [f64],
    xi: f64,
}

impl Objective<'_> {
    fn residuals(&self, theta: &[f64]) -> Vec<f64> {
        let fitted = &self.phi * Vector::from_column_slice(theta);
        self.y.iter().zip(fitted.iter()).map(|(a, f)| a - f).collect()
    }

    fn value(&self, theta: &[f64]) -> f64 {
        self.stat.value(&self.residuals(theta)) + 0.5 * self.xi * dot(theta, theta)
    }

    fn value_and_gradient(&self, theta: &[f64]) -> (f64, Vec<f64>) {
        let (h, de) = self.stat.value_and_gradient(&self.residuals(theta));
        let back = self.phi.transpose() * Vector::from_vec(de);
        let grad = back.iter().zip(theta).map(|(g, t)| -g + self.xi * t).collect();
        (h + 0.5 * self.xi * dot(theta, theta), grad)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| p * q).sum()
}

/// L-BFGS two-loop recursion; returns `-H g`.
fn lbfgs_direction(grad: &[f64], pairs: &[(Vec<f64>, Vec<f64>)]) -> Vec<f64> {
    let mut q = grad.to_vec();
    let mut alphas = Vec::with_capacity(pairs.len());
    for (s, y) in pairs.iter().rev() {
        let rho = 1.0 / dot(y, s);
        let a = rho * dot(s, &q);
        for (qi, yi) in q.iter_mut().zip(y) {
            *qi -= a * yi;
        }
        alphas.push((a, rho));
    }
    if let Some((s, y)) = pairs.last() {
        let gamma = dot(s, y) / dot(y, y);
        for qi in q.iter_mut() {
            *qi *= gamma;
        }
    }
    for ((s, y), (a, rho)) in pairs.iter().zip(alphas.into_iter().rev()) {
        let b = rho * dot(y, &q);
        for (qi, si) in q.iter_mut().zip(s) {
            *qi += (a - b) * si;
        }
    }
    q.iter().map(|v| -v).collect()
}

/// Minimizes the penalized HSIC from `theta = 0` with L-BFGS (or gradient
/// descent) under Armijo backtracking. Every accepted step lowers the
/// objective.
fn minimize(obj: &Objective, m: usize, config: &HsicrConfig) -> (Vec<f64>, HsicrTrace) {
    let mut theta = vec![0.0; m];
    let (mut f, mut g) = obj.value_and_gradient(&theta);
    let mut trace = HsicrTrace {
        objective: vec![f],
        ..HsicrTrace::default()
    };
    let mut pairs: Vec<(Vec<f64>, Vec<f64>)> = Vec::new();
    let a = &config.armijo;
    while trace.iterations < config.max_iterations {
        if dot(&g, &g).sqrt() <= config.gradient_tolerance {
            break;
        }
        trace.iterations += 1;
        let mut dir = lbfgs_direction(&g, &pairs);
        let mut slope = dot(&g, &dir);
        if !(slope < 0.0) {
            pairs.clear();
            dir = g.iter().map(|v| -v).collect();
            slope = -dot(&g, &g);
        }
        let mut accepted = None;
        for attempt in 0..2 {
            let mut step = a.initial_step;
            while step >= a.min_step {
                let cand: Vec<f64> = theta.iter().zip(&dir).map(|(t, d)| t + step * d).collect();
                let fc = obj.value(&cand);
                if fc.is_finite() && fc <= f + a.sufficient_decrease * step * slope {
                    accepted = Some(cand);
                    break;
                }
                step *= a.shrink;
            }
            if accepted.is_some() || attempt == 1 || pairs.is_empty() {
                break;
            }
            pairs.clear();
            dir = g.iter().map(|v| -v).collect();
            slope = -dot(&g, &g);
        }
        let Some(cand) = accepted else {
            trace.no_descent = true;
            break;
        };
        let (fc, gc) = obj.value_and_gradient(&cand);
        if config.memory > 0 {
            let s: Vec<f64> = cand.iter().zip(&theta).map(|(p, q)| p - q).collect();
            let y: Vec<f64> = gc.iter().zip(&g).map(|(p, q)| p - q).collect();
            if dot(&s, &y) > 1e-12 * dot(&y, &y).sqrt() * dot(&s, &s).sqrt() {
                if pairs.len() == config.memory {
                    pairs.remove(0);
                }
                pairs.push((s, y));
            }
        }
        theta = cand;
        f = fc;
        g = gc;
        trace.objective.push(f);
    }
    trace.gradient_norm = dot(&g, &g).sqrt();
    (theta, trace)
}

/// Fits `theta` for one penalty on working-frame data, with widths from the
/// median heuristic on this sample.
pub fn fit_theta(x: &[f64], y: &[f64], xi: f64, config: &HsicrConfig) -> Result<(HsicrModel, HsicWidths, HsicrTrace)> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch(x.len(), y.len()));
    }
    let widths = HsicWidths::median_heuristic(x, y)?;
    let obj = Objective {
        stat: HsicStatistic::new(x, widths.sigma_x, widths.sigma_e)?,
        phi: gaussian_design(x, x, widths.rho),
        y,
        xi,
    };
    let (theta, trace) = minimize(&obj, x.len(), config);
    let mut model = HsicrModel {
        centers: x.to_vec(),
        rho: widths.rho,
        theta,
        intercept: 0.0,
    };
    model.intercept = mean(&model.residuals(x, y));
    Ok((model, widths, trace))
}

/// Mean held-out HSIC over `folds` folds for one penalty. Held-out
/// residuals are scored with the widths of the training fit.
pub fn hsicr_cv_score(x: &[f64], y: &[f64], xi: f64, config: &HsicrConfig, rng: &mut RngStream) -> Result<f64> {
    let n = x.len();
    if n < 2 * config.folds {
        return Err(Error::InsufficientData {
            needed: 2 * config.folds,
            got: n,
        });
    }
    let folds = shuffled_folds(n, config.folds, rng);
    let mut total = 0.0;
    for test in &folds {
        let train = complement(n, test);
        let (model, widths, _) = fit_theta(&gather(x, &train), &gather(y, &train), xi, config)?;
        let x_te = gather(x, test);
        let e_te = model.residuals(&x_te, &gather(y, test));
        total += hsic_estimate(&x_te, &e_te, widths.sigma_x, widths.sigma_e)?;
    }
    Ok(total / folds.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HsicrFit {
    /// Regressor in the working frame.
    pub model: HsicrModel,
    pub scaling: Standardization,
    pub widths: HsicWidths,
    pub xi: f64,
    /// HSIC between working-frame inputs and final residuals.
    pub hsic: f64,
    /// Held-out score of the chosen penalty; absent for a single candidate.
    pub cv_score: Option<f64>,
    pub trace: HsicrTrace,
}

impl HsicrFit {
    pub fn predict(&self, x: f64) -> f64 {
        self.scaling.y.invert(self.model.predict(self.scaling.x.apply(x)))
    }

    /// Working-frame inputs and residuals (intercept excluded).
    pub fn working_residuals(&self, samples: &SamplePairs) -> (Vec<f64>, Vec<f64>) {
        let x = self.scaling.x.apply_all(samples.x());
        let y = self.scaling.y.apply_all(samples.y());
        let e = self.model.residuals(&x, &y);
        (x, e)
    }
}

/// Selects `xi` by held-out HSIC (ties to the smaller value) and refits on
/// all samples. `rng` only drives the fold split.
pub fn fit_hsicr(samples: &SamplePairs, config: &HsicrConfig, rng: &mut RngStream) -> Result<HsicrFit> {
    config.validate()?;
    let (work, scaling) = working_frame(samples, config.standardize)?;
    let (x, y) = (work.x(), work.y());
    let xis = resolve_regularizers(&config.xi_grid, "xi")?;
    let (xi, cv_score) = if xis.len() == 1 {
        (xis[0], None)
    } else {
        let folds_stream = rng.child();
        let mut best: Option<(f64, f64)> = None;
        for &xi in &xis {
            let score = hsicr_cv_score(x, y, xi, config, &mut folds_stream.clone())?;
            if score.is_finite() && best.is_none_or(|(_, s)| score < s) {
                best = Some((xi, score));
            }
        }
        let (xi, s) = best.ok_or(Error::NonFiniteEvaluation)?;
        (xi, Some(s))
    };
    let (model, widths, trace) = fit_theta(x, y, xi, config)?;
    let hsic = hsic_estimate(x, &model.residuals(x, y), widths.sigma_x, widths.sigma_e)?;
    Ok(HsicrFit {
        model,
        scaling,
        widths,
        xi,
        hsic,
        cv_score,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate, Family, SynthSpec};
    use crate::numerics::finite_difference_gradient;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::Rng;

    /// Three-sum form: mean(K o L) + mean(K) mean(L) - 2/n^3 sum_ijq K_ij L_iq.
    fn hsic_sums(x: &[f64], e: &[f64], sx: f64, se: f64) -> f64 {
        let n = x.len();
        let k = |i: usize, j: usize| (-(x[i] - x[j]).powi(2) / (2.0 * sx * sx)).exp();
        let l = |i: usize, j: usize| (-(e[i] - e[j]).powi(2) / (2.0 * se * se)).exp();
        let nf = n as f64;
        let (mut a, mut sk, mut sl, mut c) = (0.0, 0.0, 0.0, 0.0);
        for i in 0..n {
            for j in 0..n {
                a += k(i, j) * l(i, j);
                sk += k(i, j);
                sl += l(i, j);
                for q in 0..n {
                    c += k(i, j) * l(i, q);
                }
            }
        }
        a / (nf * nf) + sk * sl / nf.powi(4) - 2.0 * c / nf.powi(3)
    }

    fn random_vec(n: usize, rng: &mut RngStream) -> Vec<f64> {
        (0..n).map(|_| rng.random_range(-2.0..2.0)).collect()
    }

    #[test]
    fn trace_form_matches_sum_form() {
        let mut rng = RngStream::new(11);
        for n in 1..=8 {
            for _ in 0..10 {
                let (x, e) = (random_vec(n, &mut rng), random_vec(n, &mut rng));
                let (sx, se) = (rng.random_range(0.3..2.0), rng.random_range(0.3..2.0));
                let got = hsic_estimate(&x, &e, sx, se).unwrap();
                assert_abs_diff_eq!(got, hsic_sums(&x, &e, sx, se), epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn degenerate_cases() {
        assert_eq!(hsic_estimate(&[0.4], &[1.2], 1.0, 1.0).unwrap(), 0.0);
        let x = [0.1, -0.5, 2.0, 0.7];
        assert_abs_diff_eq!(hsic_estimate(&x, &[3.0; 4], 0.8, 0.5).unwrap(), 0.0, epsilon = 1e-15);
        assert!(matches!(hsic_estimate(&x, &x, 0.0, 1.0), Err(Error::DegenerateWidth(_))));
        assert!(matches!(hsic_estimate(&x, &x, 1.0, f64::NAN), Err(Error::DegenerateWidth(_))));
    }

    #[test]
    fn statistic_agrees_with_estimate() {
        let mut rng = RngStream::new(4);
        let (x, e) = (random_vec(25, &mut rng), random_vec(25, &mut rng));
        let stat = HsicStatistic::new(&x, 0.7, 1.1).unwrap();
        let direct = hsic_estimate(&x, &e, 0.7, 1.1).unwrap();
        assert_abs_diff_eq!(stat.value(&e), direct, epsilon = 1e-14);
        assert_abs_diff_eq!(stat.value_and_gradient(&e).0, direct, epsilon = 1e-14);
        let perm = rng.permutation(25);
        let shuffled: Vec<f64> = perm.iter().map(|&j| e[j]).collect();
        assert_abs_diff_eq!(
            stat.permuted(&e, &perm),
            hsic_estimate(&x, &shuffled, 0.7, 1.1).unwrap(),
            epsilon = 1e-14
        );
    }

    #[test]
    fn residual_gradient_matches_finite_differences() {
        let mut rng = RngStream::new(8);
        for _ in 0..10 {
            let (x, e) = (random_vec(15, &mut rng), random_vec(15, &mut rng));
            let stat = HsicStatistic::new(&x, 0.9, 0.6).unwrap();
            let fd = finite_difference_gradient(|v| stat.value(v), &e, 1e-6).unwrap();
            let (_, g) = stat.value_and_gradient(&e);
            let scale = fd.iter().map(|v| v.abs()).fold(0.0, f64::max);
            for (a, b) in g.iter().zip(&fd) {
                assert!((a - b).abs() <= 1e-4 * scale, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn theta_gradient_matches_finite_differences() {
        let mut rng = RngStream::new(21);
        for _ in 0..5 {
            let x = random_vec(15, &mut rng);
            let y: Vec<f64> = x.iter().map(|v| v * v * v + rng.random_range(-0.3..0.3)).collect();
            let widths = HsicWidths::median_heuristic(&x, &y).unwrap();
            let obj = Objective {
                stat: HsicStatistic::new(&x, widths.sigma_x, widths.sigma_e).unwrap(),
                phi: gaussian_design(&x, &x, widths.rho),
                y: &y,
                xi: 0.01,
            };
            let theta = random_vec(15, &mut rng).iter().map(|v| 0.1 * v).collect::<Vec<_>>();
            let (_, g) = obj.value_and_gradient(&theta);
            let fd = finite_difference_gradient(|t| obj.value(t), &theta, 1e-6).unwrap();
            let num: f64 = g.iter().zip(&fd).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            let den: f64 = fd.iter().map(|b| b * b).sum::<f64>().sqrt();
            assert!(num / den <= 1e-4, "relative error {}", num / den);
        }
    }

    #[test]
    fn median_widths() {
        let w = HsicWidths::median_heuristic(&[0.0, 1.0, 3.0], &[0.0, 2.0, 5.0]).unwrap();
        // x distances with the diagonal: 0,0,0,1,1,2,2,3,3
        assert_abs_diff_eq!(w.rho, 1.0);
        assert_abs_diff_eq!(w.sigma_x, 1.0 / 2f64.sqrt());
        // y distances: 0,0,0,2,2,3,3,5,5
        assert_abs_diff_eq!(w.sigma_e, 2.0 / 2f64.sqrt());
        assert!(matches!(
            HsicWidths::median_heuristic(&[0.0, 1.0, 3.0], &[0.0, 2.0, 2.0]),
            Err(Error::DegenerateWidth(_))
        ));
    }

    #[test]
    fn huge_penalty_pins_theta() {
        let s = generate(&SynthSpec {
            family: Family::CubicExponential,
            n: 60,
            seed: 2,
        })
        .unwrap();
        let config = HsicrConfig {
            xi_grid: vec![1e9],
            ..HsicrConfig::default()
        };
        let fit = fit_hsicr(&s, &config, &mut RngStream::new(0)).unwrap();
        assert!(fit.model.theta.iter().all(|t| t.abs() < 1e-6));
        let mean_y = s.y().iter().sum::<f64>() / 60.0;
        assert_abs_diff_eq!(fit.predict(0.3), mean_y, epsilon = 1e-6);
    }

    #[test]
    fn fit_lowers_hsic_on_cubic_data() {
        for seed in 1..=10 {
            let s = generate(&SynthSpec {
                family: Family::CubicExponential,
                n: 100,
                seed,
            })
            .unwrap();
            let fit = fit_hsicr(&s, &HsicrConfig::default(), &mut RngStream::new(seed)).unwrap();
            let (x, _) = fit.working_residuals(&s);
            let y = fit.scaling.y.apply_all(s.y());
            let before = hsic_estimate(&x, &y, fit.widths.sigma_x, fit.widths.sigma_e).unwrap();
            assert!(fit.hsic < before, "seed {seed}: {} vs {before}", fit.hsic);
            for w in fit.trace.objective.windows(2) {
                assert!(w[1] <= w[0]);
            }
            let (xw, e) = fit.working_residuals(&s);
            let centered: Vec<f64> = e.iter().map(|v| v - fit.model.intercept).collect();
            assert_abs_diff_eq!(mean(&centered), 0.0, epsilon = 1e-10);
            assert_eq!(xw.len(), fit.model.theta.len());
        }
    }

    #[test]
    fn single_penalty_skips_selection() {
        let s = generate(&SynthSpec {
            family: Family::CubicExponential,
            n: 40,
            seed: 5,
        })
        .unwrap();
        let config = HsicrConfig {
            xi_grid: vec![1e-2],
            ..HsicrConfig::default()
        };
        let a = fit_hsicr(&s, &config, &mut RngStream::new(1)).unwrap();
        let b = fit_hsicr(&s, &config, &mut RngStream::new(99)).unwrap();
        assert_eq!(a, b);
        assert!(a.cv_score.is_none());
        let multi = fit_hsicr(&s, &HsicrConfig::default(), &mut RngStream::new(1)).unwrap();
        assert_eq!(multi, fit_hsicr(&s, &HsicrConfig::default(), &mut RngStream::new(1)).unwrap());
        assert!(multi.cv_score.is_some());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn hsic_nonnegative_symmetric_and_order_free(
            pts in prop::collection::vec((-3.0f64..3.0, -3.0f64..3.0), 1..20),
            sx in 0.2f64..3.0,
            se in 0.2f64..3.0,
            seed in any::<u64>(),
        ) {
            let x: Vec<f64> = pts.iter().map(|p| p.0).collect();
            let e: Vec<f64> = pts.iter().map(|p| p.1).collect();
            let h = hsic_estimate(&x, &e, sx, se).unwrap();
            prop_assert!(h >= -1e-12);
            prop_assert!((h - hsic_estimate(&e, &x, se, sx).unwrap()).abs() <= 1e-12);
            let perm = RngStream::new(seed).permutation(x.len());
            let (xp, ep) = (gather(&x, &perm), gather(&e, &perm));
            prop_assert!((h - hsic_estimate(&xp, &ep, sx, se).unwrap()).abs() <= 1e-12);
        }
    }
}
