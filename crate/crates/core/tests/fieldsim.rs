mod common;

use common::*;
use lsfield::covmodels::CorrelationModel;
use lsfield::fieldsim::*;
use lsfield::lsmodel::{LsEngine, SubordinationSpec, Subordinator};
use lsfield::polybasis::{MarginalDensity, OrthonormalBasis};
use rayon::prelude::*;

fn bg_corr() -> CorrelationModel {
    CorrelationModel::power_law_bg(0.2, 0.2, 2).unwrap()
}

/// Mean of squared horizontal increments at lag `h` (in cells), pooled.
fn increment_moment(fields: &[Vec<f64>], n: usize, h: usize) -> f64 {
    let mut acc = 0.0;
    let mut count = 0usize;
    for f in fields {
        for row in 0..n {
            for col in 0..n - h {
                let d = f[row * n + col + h] - f[row * n + col];
                acc += d * d;
                count += 1;
            }
        }
    }
    acc / count as f64
}

/// Correlation at lag `h` from the variogram, with known variance.
fn variogram_correlation(fields: &[Vec<f64>], n: usize, h: usize, variance: f64) -> f64 {
    1.0 - increment_moment(fields, n, h) / (2.0 * variance)
}

fn ks_statistic(mut xs: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// KS critical value at α = 0.01.
fn ks_critical(n: usize) -> f64 {
    1.628 / (n as f64).sqrt()
}

#[test]
fn lag_one_correlation_on_20x20_grid() {
    let grid = GridSpec::square(20, 1.0).unwrap();
    let sampler = GaussianSampler::new(&grid, &bg_corr(), SimMethod::Auto).unwrap();
    assert_eq!(sampler.method(), SimMethod::Cholesky);
    let fields: Vec<Vec<f64>> = (0..500u64)
        .into_par_iter()
        .map(|r| sampler.realize(derive_seed(1, r)).values)
        .collect();
    let est = variogram_correlation(&fields, 20, 1, 1.0);
    assert!((est - bg_corr().correlation(1.0)).abs() < 0.03, "{est}");
}

#[test]
fn determinism_and_normal_marginals() {
    let grid = GridSpec::square(6, 1.0).unwrap();
    let corr = bg_corr();
    let a = simulate_gaussian(&grid, &corr, 99, SimMethod::Auto).unwrap();
    let b = simulate_gaussian(&grid, &corr, 99, SimMethod::Auto).unwrap();
    assert_eq!(a, b);
    let sampler = GaussianSampler::new(&grid, &corr, SimMethod::Auto).unwrap();
    let xs: Vec<f64> = (0..2000u64).map(|s| sampler.realize(s).values[7]).collect();
    assert!(ks_statistic(xs, |x| 1.0 - upper_tail(x)) < ks_critical(2000));
}

#[test]
fn circulant_agrees_with_cholesky() {
    let grid = GridSpec::square(32, 1.0).unwrap();
    let corr = CorrelationModel::power_law_bg(1.0, 1.5, 2).unwrap();
    let chol = GaussianSampler::new(&grid, &corr, SimMethod::Cholesky).unwrap();
    let circ = GaussianSampler::new(&grid, &corr, SimMethod::CirculantEmbedding).unwrap();
    let draw = |s: &GaussianSampler, base: u64| -> Vec<Vec<f64>> {
        (0..500u64).into_par_iter().map(|r| s.realize(derive_seed(base, r)).values).collect()
    };
    let (a, b) = (draw(&chol, 5), draw(&circ, 6));
    for h in 1..=5 {
        let ca = variogram_correlation(&a, 32, h, 1.0);
        let cb = variogram_correlation(&b, 32, h, 1.0);
        assert!((ca - cb).abs() < 0.04, "lag {h}: {ca} vs {cb}");
        assert!((cb - corr.correlation(h as f64)).abs() < 0.04);
    }
    let xs: Vec<f64> = (0..1000u64).map(|s| circ.realize(s).values[100]).collect();
    assert!(ks_statistic(xs, |x| 1.0 - upper_tail(x)) < ks_critical(1000));
}

#[test]
fn slowly_decaying_model_does_not_embed() {
    let grid = GridSpec::square(16, 1.0).unwrap();
    match GaussianSampler::new(&grid, &bg_corr(), SimMethod::CirculantEmbedding) {
        Err(SimError::EmbeddingNotPsd { min_eigenvalue, .. }) => assert!(min_eigenvalue < EMBEDDING_TOL),
        Ok(s) => assert_eq!(s.method(), SimMethod::CirculantEmbedding),
        Err(e) => panic!("{e}"),
    }
}

#[test]
fn chi_square_moments_and_correlation() {
    let grid = GridSpec::square(20, 1.0).unwrap();
    let corr = bg_corr();
    let sampler = GaussianSampler::new(&grid, &corr, SimMethod::Auto).unwrap();
    let fields: Vec<Vec<f64>> = (0..200u64)
        .into_par_iter()
        .map(|r| sampler.chi_square(10, derive_seed(2, r)).unwrap().values)
        .collect();
    let center: Vec<f64> = fields.iter().map(|f| f[210]).collect();
    let n = center.len() as f64;
    let mean = center.iter().sum::<f64>() / n;
    assert!((mean - 5.0).abs() < 3.0 * (5.0 / n).sqrt(), "{mean}");
    let var = center.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    // Var(s²) ≈ (μ4 - σ⁴)/n with μ4 = (3 + 6/5) σ⁴ for Gamma(5, 1)
    let se = ((4.2 * 25.0 - 25.0) / n).sqrt();
    assert!((var - 5.0).abs() < 3.0 * se, "{var}");
    for h in [1, 3, 8] {
        let est = variogram_correlation(&fields, 20, h, 5.0);
        let target = corr.correlation(h as f64).powi(2);
        assert!((est - target).abs() < 0.05, "lag {h}: {est} vs {target}");
    }
    let xs: Vec<f64> = (0..1000u64).map(|s| sampler.chi_square(10, s).unwrap().values[0]).collect();
    let cdf = |x: f64| statrs::function::gamma::gamma_lr(5.0, x.max(0.0));
    assert!(ks_statistic(xs, cdf) < ks_critical(1000));
}

#[test]
fn excursion_volume() {
    let grid = GridSpec::square(20, 1.0).unwrap();
    let sampler = GaussianSampler::new(&grid, &bg_corr(), SimMethod::Auto).unwrap();
    let ratios: Vec<f64> = (0..200u64)
        .map(|r| {
            let f = sampler.realize(derive_seed(3, r));
            let m: Vec<f64> = [-1.0, 0.0, 0.95, 2.0].iter().map(|&nu| minkowski_m0(&f, nu)).collect();
            assert!(m.windows(2).all(|w| w[1] <= w[0]));
            assert_eq!(minkowski_m0(&f, -1e9), grid.volume());
            assert_eq!(minkowski_m0(&f, 1e9), 0.0);
            m[2] / grid.volume()
        })
        .collect();
    let n = ratios.len() as f64;
    let mean = ratios.iter().sum::<f64>() / n;
    let sd = (ratios.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    assert!((mean - 0.17106).abs() < 3.0 * sd / n.sqrt(), "{mean} ± {}", sd / n.sqrt());
}

#[test]
fn export_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let grid = GridSpec::new(vec![5, 3], 0.25).unwrap();
    let field = chi_square_field(&grid, &bg_corr(), 4, 17, SimMethod::Auto).unwrap();
    let stem = dir.path().join("field");
    let (data, header) = write_field(&field, &stem).unwrap();
    assert_eq!(std::fs::metadata(&data).unwrap().len(), 15 * 8);
    let text = std::fs::read_to_string(header).unwrap();
    assert!(text.contains("sizes = 5 3") && text.contains("seed = 17"));
    let (h, values) = read_field(&stem).unwrap();
    assert_eq!(values, field.values);
    assert_eq!(h.sizes, vec![5, 3]);
    assert_eq!(h.transform.as_deref(), Some("chi2(4)"));
    std::fs::write(&data, [0u8; 7]).unwrap();
    assert!(read_field(&stem).is_err());
}

#[test]
fn empirical_mi_under_independence() {
    let corr = CorrelationModel::pure_power(1.5, 2).unwrap();
    let d = [1e300, 1e301, 1e302];
    let out = empirical_indicator_mi(&corr, 0.95, &d, 20_000, 4, EmpiricalOptions::default()).unwrap();
    assert!(out.curve.correlations.iter().all(|&g| g == 0.0));
    for (mi, se) in out.curve.mi.iter().zip(&out.stderr) {
        assert!(*mi >= 0.0 && *mi <= 3.0 * se + out.bias_bound, "{mi} {se}");
    }
    assert_eq!(out.curve.distances, d.to_vec());
}

#[test]
fn empirical_mi_matches_analytic_table() {
    let corr = CorrelationModel::pure_power(1.5, 2).unwrap();
    let r = 2f64.powf(2.0 / 3.0);
    let gamma = corr.correlation(r);
    assert!((gamma - 0.5).abs() < 1e-12);
    let engine = LsEngine::new(OrthonormalBasis::new(MarginalDensity::StandardGaussian, 10).unwrap(), 10).unwrap();
    let spec = SubordinationSpec::new(Subordinator::Indicator { nu: 0.95 }, &engine).unwrap();
    let analytic = spec.mi(gamma).unwrap();
    let out = empirical_indicator_mi(&corr, 0.95, &[r], 100_000, 5, EmpiricalOptions::default()).unwrap();
    assert!((out.curve.mi[0] - analytic).abs() < 3.0 * out.stderr[0]);
    let mm = empirical_indicator_mi(
        &corr,
        0.95,
        &[r],
        100_000,
        5,
        EmpiricalOptions { miller_madow: true },
    )
    .unwrap();
    assert!((mm.curve.mi[0] - out.curve.mi[0] + 1.0 / 200_000.0).abs() < 1e-15);
}
