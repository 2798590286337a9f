use lsfield::covmodels::GneitingCovariance;
use lsfield::fieldsim::GridSpec;
use lsfield::infotheory::gaussian_mi_exact;
use lsfield::lsmodel::{fit_loglog_slope, LsEngine};
use lsfield::polybasis::{MarginalDensity, OrthonormalBasis};
use lsfield::stfunctional::*;

fn reference_gc() -> GneitingCovariance {
    GneitingCovariance::new(1.0, 1.0, 0.35, 0.2, 1.0, 0.3, 0.7, 2).unwrap()
}

/// Same temporal part, spatial generator decaying like `r^{-1.8}`.
fn fast_gc() -> GneitingCovariance {
    GneitingCovariance::new(1.0, 1.0, 0.9, 1.0, 1.0, 0.3, 0.7, 2).unwrap()
}

fn engine() -> LsEngine {
    LsEngine::new(OrthonormalBasis::new(MarginalDensity::StandardGaussian, 10).unwrap(), 10).unwrap()
}

fn reference_operator() -> CorrelationOperator {
    CorrelationOperator::new(reference_gc(), TimeBasis::cosine(100.0, 20).unwrap()).unwrap()
}

#[test]
fn operator_normalization_symmetry_and_bounds() {
    let op = reference_operator();
    let zero = op.matrix(0.0).unwrap();
    for n in 0..20 {
        assert!((zero[(n, n)] - 1.0).abs() < 1e-8);
    }
    for r in [0.0, 1.0, 3.0, 50.0] {
        let g = op.matrix(r).unwrap();
        for n in 0..20 {
            for m in 0..20 {
                assert!((g[(n, m)] - g[(m, n)]).abs() < 1e-8);
                assert!(g[(n, m)].abs() <= 1.0 + 1e-8);
            }
        }
    }
}

#[test]
fn operator_fixture() {
    let e = correlation_operator(&reference_gc(), &TimeBasis::cosine(100.0, 20).unwrap(), 1.0, 1, 1).unwrap();
    assert!((e.value - 0.8176693276266983).abs() < 1e-12, "{}", e.value);
    assert_eq!((e.n, e.m, e.r), (1, 1, 1.0));
}

#[test]
fn operator_vanishes_far_away() {
    let op = CorrelationOperator::new(fast_gc(), TimeBasis::cosine(100.0, 8).unwrap()).unwrap();
    let g = op.matrix(1e6).unwrap();
    assert!(g.iter().all(|v| v.abs() < 1e-3));
}

#[test]
fn diagonal_entries_match_gaussian_oracle() {
    let op = reference_operator();
    let eng = engine();
    // truncation M = 10 is accurate while γ stays below about 0.65
    for r in [20.0, 100.0, 1000.0] {
        for n in [1, 3, 10] {
            let gamma = op.entry(r, n, n).unwrap().value;
            let mi = mi_operator_entry(&op, &eng, r, n, n).unwrap();
            assert!((mi - gaussian_mi_exact(gamma, 1.0).unwrap()).abs() < 2e-3, "r={r} n={n}");
        }
    }
    // odd/even cosine pairs are uncorrelated by symmetry
    assert!(mi_operator_entry(&op, &eng, 2.0, 1, 2).unwrap() < 1e-20);
    assert_eq!(eng.shannon_mi(0.0).unwrap().value, 0.0);
}

#[test]
fn diagonal_entries_decrease_with_distance() {
    let op = reference_operator();
    let eng = engine();
    let rs: Vec<f64> = (0..10).map(|k| 0.5 * 2f64.powi(k)).collect();
    for n in [1, 2, 7] {
        let mi: Vec<f64> = rs.iter().map(|&r| mi_operator_entry(&op, &eng, r, n, n).unwrap()).collect();
        assert!(mi.windows(2).all(|w| w[1] <= w[0]), "n={n}: {mi:?}");
    }
}

#[test]
fn surface_reconstruction() {
    let op = reference_operator();
    let eng = engine();
    let mesh: Vec<f64> = (59..=99).map(f64::from).collect();
    let s = mi_surface(&op, &eng, 2.0, &mesh).unwrap();
    assert!(s.entries.iter().all(|&e| e >= 0.0));
    let back = s.reproject(256);
    let worst = back.iter().zip(&s.entries).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(worst < 1e-6, "{worst}");
    let k = mesh.len();
    for i in 0..k {
        assert!(s.surface[i * k + i] >= -1e-8);
        for j in 0..k {
            assert!((s.surface[i * k + j] - s.surface[j * k + i]).abs() < 1e-12);
        }
    }
    assert!((s.evaluate(mesh[3], mesh[7]) - s.surface[3 * k + 7]).abs() < 1e-12);
}

#[test]
fn mean_level_decays() {
    let op = reference_operator();
    let eng = engine();
    let mesh: Vec<f64> = (59..=99).map(f64::from).collect();
    for r in [1.0, 2.0, 4.0] {
        let near = mi_surface(&op, &eng, r, &mesh).unwrap().mean_level();
        let far = mi_surface(&op, &eng, 2.0 * r, &mesh).unwrap().mean_level();
        assert!(near > far, "r={r}: {near} vs {far}");
    }
}

#[test]
fn surface_vanishes_with_independent_sites() {
    let op = CorrelationOperator::new(fast_gc(), TimeBasis::cosine(100.0, 6).unwrap()).unwrap();
    let mesh = [0.0, 50.0, 100.0];
    let s = mi_surface(&op, &engine(), 1e6, &mesh).unwrap();
    assert!(s.surface.iter().all(|k| k.abs() < 1e-15));
}

#[test]
fn entries_follow_the_squared_correlation_law() {
    let op = CorrelationOperator::new(fast_gc(), TimeBasis::cosine(100.0, 2).unwrap()).unwrap();
    let eng = engine();
    let rs: Vec<f64> = (0..11).map(|k| 10f64.powf(1.0 + k as f64 / 10.0)).collect();
    let mut pts: Vec<(f64, f64)> = rs
        .iter()
        .map(|&r| {
            let g = op.entry(r, 1, 1).unwrap().value;
            (g, mi_operator_entry(&op, &eng, r, 1, 1).unwrap())
        })
        .collect();
    pts.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let (g, mi): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
    let (fit, _) = fit_loglog_slope(&g, &mi, (g[0], g[g.len() - 1])).unwrap();
    assert!((fit.slope - 2.0).abs() < 0.3, "{}", fit.slope);
}

#[test]
fn single_site_single_time() {
    let space = GridSpec::new(vec![1], 1.0).unwrap();
    let scaled = GneitingCovariance { sigma2: 4.0, ..reference_gc() };
    let a = simulate_st_gaussian(&space, &[0.0], &reference_gc(), 8).unwrap();
    let b = simulate_st_gaussian(&space, &[0.0], &scaled, 8).unwrap();
    assert!((b.values[0] - 2.0 * a.values[0]).abs() < 1e-9);
    assert_eq!(a, simulate_st_gaussian(&space, &[0.0], &reference_gc(), 8).unwrap());
}

#[test]
fn space_time_simulation_moments() {
    let space = GridSpec::square(10, 1.0).unwrap();
    let times: Vec<f64> = (0..50).map(f64::from).collect();
    let gc = reference_gc();
    let sampler = StSampler::new(&space, &times, &gc).unwrap();
    let reps: Vec<StFieldRealization> = (0..100u64).map(|s| sampler.realize(s)).collect();
    let probe: Vec<f64> = reps.iter().map(|f| f.values[25 * 100 + 45]).collect();
    let var = probe.iter().map(|x| x * x).sum::<f64>() / 100.0;
    assert!((var - 1.0).abs() < 3.0 * (2.0f64 / 100.0).sqrt(), "{var}");
    let mut sq = 0.0;
    let mut count = 0.0;
    for f in &reps {
        for k in 0..49 {
            for i in 0..100 {
                let d = f.values[(k + 1) * 100 + i] - f.values[k * 100 + i];
                sq += d * d;
                count += 1.0;
            }
        }
    }
    let corr = 1.0 - sq / count / 2.0;
    assert!((gc.cov(0.0, 1.0) - 0.61557).abs() < 5e-6);
    assert!((corr - gc.cov(0.0, 1.0)).abs() < 0.05, "{corr}");
    let slice = reps[0].at_time(3);
    assert_eq!(slice.values, reps[0].values[300..400].to_vec());
}
