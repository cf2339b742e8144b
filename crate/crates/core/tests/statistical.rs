use lsir_core::data::{generate, standardize, Family, SynthSpec};
use lsir_core::lsir::{fit_beta, fit_lsir, residuals, BetaInit, LsirConfig, RegressionBasis, RegressionModel};
use lsir_core::lsmi::{fit_lsmi, LsmiConfig};
use lsir_core::numerics::{median_pairwise_distance, DiagonalMode};
use lsir_core::{RngStream, SamplePairs};
use rand_distr::{Distribution, StandardNormal};

fn normals(rng: &mut RngStream, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

fn synth(family: Family, n: usize, seed: u64) -> SamplePairs {
    generate(&SynthSpec { family, n, seed }).unwrap()
}

fn rmse(f: impl Fn(f64) -> f64, truth: impl Fn(f64) -> f64) -> f64 {
    let grid: Vec<f64> = (0..=90).map(|i| -0.9 + 0.02 * i as f64).collect();
    (grid.iter().map(|&x| (f(x) - truth(x)).powi(2)).sum::<f64>() / grid.len() as f64).sqrt()
}

#[test]
fn lsmi_separates_identical_from_independent() {
    let config = LsmiConfig::default();
    let mut near_zero = 0;
    for seed in 0..100 {
        let mut rng = RngStream::new(seed);
        let x = normals(&mut rng, 200);
        let e = normals(&mut rng, 200);
        let (_, null) = fit_lsmi(&x, &e, &config, &mut rng).unwrap();
        if null.value.abs() <= 0.05 {
            near_zero += 1;
        }
        let (_, dep) = fit_lsmi(&x, &x, &config, &mut rng).unwrap();
        assert!(dep.value > 0.2, "seed {seed}: {}", dep.value);
    }
    assert!(near_zero >= 90, "{near_zero} / 100");
}

/// Range of LSMI estimates over fresh independent samples of size `n`.
fn null_range(n: usize, config: &LsmiConfig) -> f64 {
    let values: Vec<f64> = (0..30)
        .map(|k| {
            let mut rng = RngStream::new(5000 + k);
            let x = normals(&mut rng, n);
            let e = normals(&mut rng, n);
            fit_lsmi(&x, &e, config, &mut rng).unwrap().1.value
        })
        .collect();
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    hi - lo
}

#[test]
fn descent_on_independent_data_stays_within_noise() {
    let config = LsirConfig {
        max_iterations: 60,
        init: BetaInit::Zero,
        ..LsirConfig::default()
    };
    let noise = null_range(100, &config.lsmi);
    for seed in 0..10 {
        let mut rng = RngStream::new(seed);
        let x = normals(&mut rng, 100);
        let y = normals(&mut rng, 100);
        let med = median_pairwise_distance(&x, DiagonalMode::Exclude).unwrap();
        let basis = RegressionBasis::draw(&x, 50, med, &mut rng).unwrap();
        let (beta, trace) = fit_beta(&x, &y, &basis, 1e-2, &config, &mut rng).unwrap();
        let start = trace.objective[0];
        let lowest = trace.objective.iter().copied().fold(f64::INFINITY, f64::min);
        assert!(start - lowest <= noise, "seed {seed}: {start} -> {lowest}, noise {noise}");
        let model = RegressionModel {
            basis,
            beta,
            intercept: 0.0,
        };
        let (_, after) = fit_lsmi(&x, &residuals(&model, &x, &y), &config.lsmi, &mut RngStream::new(99)).unwrap();
        assert!(after.value.abs() <= noise, "seed {seed}: {}", after.value);
    }
}

#[test]
fn descent_lowers_dependence_on_toy_data() {
    let config = LsirConfig::default();
    for seed in 1..=10 {
        let (w, _) = standardize(&synth(Family::CubicExponential, 300, seed)).unwrap();
        let (x, y) = (w.x(), w.y());
        let mut rng = RngStream::new(seed + 100);
        let med = median_pairwise_distance(x, DiagonalMode::Exclude).unwrap();
        let basis = RegressionBasis::draw(x, 200, med, &mut rng).unwrap();
        let (beta, _) = fit_beta(x, y, &basis, 1e-3, &config, &mut rng).unwrap();
        let model = RegressionModel {
            basis,
            beta,
            intercept: 0.0,
        };
        let (_, before) = fit_lsmi(x, y, &config.lsmi, &mut RngStream::new(7)).unwrap();
        let (_, after) = fit_lsmi(x, &residuals(&model, x, y), &config.lsmi, &mut RngStream::new(7)).unwrap();
        assert!(after.value < before.value, "seed {seed}: {} -> {}", before.value, after.value);
    }
}

#[test]
fn recovers_a_line() {
    let family = Family::LinearGaussian {
        slope: 2.0,
        noise_sd: 0.3,
    };
    for seed in 1..=10 {
        let s = synth(family.clone(), 200, seed);
        let fit = fit_lsir(&s, &LsirConfig::default(), &mut RngStream::new(seed)).unwrap();
        let err = rmse(|x| fit.predict(x), |x| 2.0 * x);
        assert!(err <= 0.2, "seed {seed}: rmse {err}");
    }
}

#[test]
fn recovers_the_cubic() {
    for seed in 1..=3 {
        let s = synth(Family::CubicExponential, 300, seed);
        let fit = fit_lsir(&s, &LsirConfig::default(), &mut RngStream::new(seed)).unwrap();
        let err = rmse(|x| fit.predict(x), |x| x * x * x);
        assert!(err <= 0.15, "seed {seed}: rmse {err}");
        let (_, e) = fit.working_residuals(&s);
        assert_eq!(e.len(), 300);
        let raw_mean = s
            .x()
            .iter()
            .zip(s.y())
            .map(|(&x, &y)| y - fit.predict(x))
            .sum::<f64>()
            / 300.0;
        assert!(raw_mean.abs() <= 1e-10);
    }
}

#[test]
fn synthetic_noise_is_centred() {
    for seed in 0..20 {
        let s = synth(Family::CubicExponential, 300, seed);
        let mean = s.x().iter().zip(s.y()).map(|(x, y)| y - x.powi(3)).sum::<f64>() / 300.0;
        assert!(mean.abs() <= 0.12, "seed {seed}: {mean}");
        assert!(s.x().iter().all(|x| x.abs() < 1.0));
    }
}
