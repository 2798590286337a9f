use super::{derive_seed, rng_for, FieldRealization, SimError};
use crate::covmodels::CorrelationModel;
use crate::infotheory::{discrete_mi, JointPmf};
use crate::lsmodel::{fit_loglog_slope, MICurve};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

const MIN_REPLICATES: usize = 100;
const Z_95: f64 = 1.959_963_984_540_054;

/// Excursion volume `cell volume · #{x : value(x) >= nu}`.
pub fn minkowski_m0(field: &FieldRealization, nu: f64) -> f64 {
    let count = field.values.iter().filter(|&&v| v >= nu).count();
    field.grid.cell_volume() * count as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EmpiricalOptions {
    /// Apply the Miller–Madow bias correction to the plug-in estimate.
    pub miller_madow: bool,
}

/// Monte-Carlo indicator MI curve.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalMi {
    /// `lower`/`upper` hold the 95% normal-approximation band.
    pub curve: MICurve,
    /// Delta-method standard error of the plug-in estimate.
    pub stderr: Vec<f64>,
    /// True where the 2×2 table had an empty cell.
    pub empty_cell: Vec<bool>,
    /// Counts `[n00, n01, n10, n11]` per distance.
    pub counts: Vec<[u64; 4]>,
    /// Upper bound `(N-1)²/(2n)` on the plug-in bias under independence.
    pub bias_bound: f64,
}

/// Samples `replicates` Gaussian pairs with correlation `corr(d)` at each
/// distance (exact two-point sampling, one generator stream per distance),
/// tabulates the exceedances of `nu` and applies the plug-in MI.
pub fn empirical_indicator_mi(
    corr: &CorrelationModel,
    nu: f64,
    distances: &[f64],
    replicates: usize,
    seed: u64,
    options: EmpiricalOptions,
) -> Result<EmpiricalMi, SimError> {
    if replicates < MIN_REPLICATES {
        return Err(SimError::TooFewReplicates {
            got: replicates,
            min: MIN_REPLICATES,
        });
    }
    if distances.is_empty()
        || distances.iter().any(|d| !(d.is_finite() && *d >= 0.0))
        || distances.windows(2).any(|p| p[1] <= p[0])
    {
        return Err(SimError::InvalidDistances);
    }
    let n = replicates as f64;
    let rows: Vec<(f64, [u64; 4], f64, f64)> = distances
        .par_iter()
        .enumerate()
        .map(|(i, &d)| {
            let gamma = corr.correlation(d);
            let counts = pair_counts(gamma, nu, replicates, derive_seed(seed, i as u64));
            let (mi, se) = plug_in(&counts, n, options)?;
            Ok((gamma, counts, mi, se))
        })
        .collect::<Result<_, SimError>>()?;

    let mi: Vec<f64> = rows.iter().map(|r| r.2).collect();
    let stderr: Vec<f64> = rows.iter().map(|r| r.3).collect();
    let lower = mi.iter().zip(&stderr).map(|(m, s)| m - Z_95 * s).collect();
    let upper = mi.iter().zip(&stderr).map(|(m, s)| m + Z_95 * s).collect();
    let empty_cell: Vec<bool> = rows.iter().map(|r| r.1.contains(&0)).collect();
    let mut warnings = Vec::new();
    if empty_cell.iter().any(|&e| e) {
        warnings.push("some 2x2 tables have an empty cell; their MI is flagged".to_string());
    }
    let d_max = *distances.last().expect("non-empty");
    let slope_fit = match fit_loglog_slope(distances, &mi, (d_max / 10.0, d_max)) {
        Ok((fit, w)) => {
            warnings.extend(w);
            Ok(fit)
        }
        Err(e) => Err(e),
    };
    Ok(EmpiricalMi {
        curve: MICurve {
            distances: distances.to_vec(),
            correlations: rows.iter().map(|r| r.0).collect(),
            mi,
            lower: Some(lower),
            upper: Some(upper),
            clamped_mass: None,
            slope_fit,
            warnings,
        },
        stderr,
        empty_cell,
        counts: rows.iter().map(|r| r.1).collect(),
        bias_bound: 1.0 / (2.0 * n),
    })
}

fn pair_counts(gamma: f64, nu: f64, n: usize, seed: u64) -> [u64; 4] {
    let mut rng = rng_for(seed);
    let s = (1.0 - gamma * gamma).max(0.0).sqrt();
    let mut counts = [0u64; 4];
    for _ in 0..n {
        let z1: f64 = rng.sample(StandardNormal);
        let z2: f64 = rng.sample(StandardNormal);
        let x = z1;
        let y = gamma * z1 + s * z2;
        let cell = 2 * usize::from(x >= nu) + usize::from(y >= nu);
        counts[cell] += 1;
    }
    counts
}

/// Plug-in MI and its delta-method standard error
/// `sqrt((Σ p (ln p/(rc))² - MI²) / n)`.
fn plug_in(counts: &[u64; 4], n: f64, options: EmpiricalOptions) -> Result<(f64, f64), SimError> {
    let table = JointPmf::from_counts(2, 2, counts)?;
    let mi = discrete_mi(&table);
    let r = table.row_marginal();
    let c = table.col_marginal();
    let mut second = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            let p = table.get(i, j);
            if p > 0.0 {
                let l = (p / (r.probabilities()[i] * c.probabilities()[j])).ln();
                second += p * l * l;
            }
        }
    }
    let se = ((second - mi * mi).max(0.0) / n).sqrt();
    let mi = if options.miller_madow {
        let occupied = |v: &[f64]| v.iter().filter(|&&p| p > 0.0).count() as f64;
        let k_joint = occupied(table.probabilities());
        let k_r = occupied(r.probabilities());
        let k_c = occupied(c.probabilities());
        mi - (k_joint - k_r - k_c + 1.0) / (2.0 * n)
    } else {
        mi
    };
    Ok((mi, se))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fieldsim::{GridSpec, Provenance, SimMethod};

    #[test]
    fn m0_limits() {
        let field = FieldRealization {
            grid: GridSpec::square(4, 0.5).unwrap(),
            values: (0..16).map(|i| i as f64).collect(),
            seed: 0,
            provenance: Provenance {
                model: "test".into(),
                method: SimMethod::Cholesky,
                transform: None,
                padding: None,
            },
        };
        assert_eq!(minkowski_m0(&field, -1e9), field.grid.volume());
        assert_eq!(minkowski_m0(&field, 1e9), 0.0);
        assert_eq!(minkowski_m0(&field, 12.0), 4.0 * 0.25);
    }

    #[test]
    fn arguments_are_checked() {
        let corr = CorrelationModel::pure_power(1.5, 2).unwrap();
        let ok = EmpiricalOptions::default();
        assert!(empirical_indicator_mi(&corr, 0.95, &[1.0], 50, 1, ok).is_err());
        assert!(empirical_indicator_mi(&corr, 0.95, &[2.0, 1.0], 100, 1, ok).is_err());
        assert!(empirical_indicator_mi(&corr, 0.95, &[], 100, 1, ok).is_err());
    }

    #[test]
    fn empty_cells_are_flagged() {
        let corr = CorrelationModel::pure_power(1.5, 2).unwrap();
        let out = empirical_indicator_mi(&corr, 8.0, &[1.0, 2.0], 100, 3, EmpiricalOptions::default()).unwrap();
        assert!(out.empty_cell.iter().all(|&e| e));
        assert!(out.curve.mi.iter().all(|m| m.is_finite()));
    }
}
