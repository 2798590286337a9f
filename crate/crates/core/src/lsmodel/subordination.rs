use super::{LsEngine, LsError};
use crate::infotheory::{discrete_mi, discrete_renyi_mi, JointPmf};
use crate::polybasis::{
    expand, indicator_tail_coeffs, rank_of, CoefficientVector, ExpandOptions, MarginalDensity,
    DEFAULT_RANK_TOL,
};
use serde::{Deserialize, Serialize};

const RENORMALIZE_TOL: f64 = 1e-12;
const COARSE_TOL: f64 = 1e-6;

/// A finite-state transform `g` of the field value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Subordinator {
    /// `1{x >= nu}`
    Indicator { nu: f64 },
    /// Piecewise constant: `labels[i]` on `(breakpoints[i-1], breakpoints[i])`.
    FiniteLevels { breakpoints: Vec<f64>, labels: Vec<f64> },
}

impl Subordinator {
    fn cells_and_labels(&self) -> Result<(Vec<(f64, f64)>, Vec<f64>), LsError> {
        match self {
            Subordinator::Indicator { nu } => {
                if nu.is_nan() {
                    return Err(LsError::InvalidSubordinator("threshold is NaN".into()));
                }
                Ok((
                    vec![(f64::NEG_INFINITY, *nu), (*nu, f64::INFINITY)],
                    vec![0.0, 1.0],
                ))
            }
            Subordinator::FiniteLevels { breakpoints, labels } => {
                if labels.len() != breakpoints.len() + 1 {
                    return Err(LsError::InvalidSubordinator(format!(
                        "{} breakpoints need {} labels, got {}",
                        breakpoints.len(),
                        breakpoints.len() + 1,
                        labels.len()
                    )));
                }
                if breakpoints.iter().any(|b| !b.is_finite())
                    || breakpoints.windows(2).any(|p| p[1] <= p[0])
                {
                    return Err(LsError::InvalidSubordinator(
                        "breakpoints must be finite and strictly increasing".into(),
                    ));
                }
                if labels.iter().any(|l| !l.is_finite()) {
                    return Err(LsError::InvalidSubordinator("labels must be finite".into()));
                }
                let mut edges = vec![f64::NEG_INFINITY];
                edges.extend(breakpoints.iter().copied());
                edges.push(f64::INFINITY);
                let cells = edges.windows(2).map(|p| (p[0], p[1])).collect();
                Ok((cells, labels.clone()))
            }
        }
    }

    pub fn descriptor(&self) -> String {
        match self {
            Subordinator::Indicator { nu } => format!("indicator(nu={nu})"),
            Subordinator::FiniteLevels { breakpoints, labels } => {
                format!("levels(breakpoints={breakpoints:?},labels={labels:?})")
            }
        }
    }
}

/// A [`Subordinator`] resolved against an engine's basis: one state per
/// distinct label, with `a_s = P(X ∈ state s)` and `b_{sk} = ∫_{state s} e_k p`.
#[derive(Debug, Clone, PartialEq)]
pub struct SubordinationSpec {
    subordinator: Subordinator,
    labels: Vec<f64>,
    mass: Vec<f64>,
    /// `b[s][k]` for `k = 0..=M` (`b[s][0] = mass[s]`)
    b: Vec<Vec<f64>>,
    coeffs: CoefficientVector,
}

impl SubordinationSpec {
    pub fn new(subordinator: Subordinator, engine: &LsEngine) -> Result<Self, LsError> {
        let (cells, cell_labels) = subordinator.cells_and_labels()?;
        let m = engine.truncation();
        let basis = engine.basis();
        let marginal = *basis.marginal();
        let (lo, hi) = marginal.support();

        let mut labels: Vec<f64> = Vec::new();
        for &l in &cell_labels {
            if !labels.contains(&l) {
                labels.push(l);
            }
        }
        labels.sort_by(|a, b| a.partial_cmp(b).expect("finite labels"));
        if labels.len() < 2 {
            return Err(LsError::InvalidSubordinator(
                "a transform with a single level carries no information".into(),
            ));
        }

        let mut b = vec![vec![0.0; m + 1]; labels.len()];
        for (&(a0, b0), label) in cells.iter().zip(&cell_labels) {
            let (a0, b0) = (a0.max(lo), b0.min(hi));
            if b0 <= a0 {
                continue;
            }
            let cell = cell_coeffs(&marginal, engine, a0, b0)?;
            let s = labels.iter().position(|l| l == label).expect("label present");
            for (acc, c) in b[s].iter_mut().zip(cell) {
                *acc += c;
            }
        }
        let mass = b.iter().map(|row| row[0]).collect();

        let mut g = vec![0.0; m + 1];
        let mut norm_sq = 0.0;
        for (row, &label) in b.iter().zip(&labels) {
            norm_sq += label * label * row[0];
            for (acc, c) in g.iter_mut().zip(row) {
                *acc += label * c;
            }
        }
        let mut coeffs = CoefficientVector {
            values: g,
            norm: norm_sq.sqrt(),
            rank: None,
        };
        coeffs.rank = rank_of(&coeffs, DEFAULT_RANK_TOL).ok();

        Ok(Self {
            subordinator,
            labels,
            mass,
            b,
            coeffs,
        })
    }

    pub fn subordinator(&self) -> &Subordinator {
        &self.subordinator
    }

    /// Distinct values of `g`, ascending; the states of the transformed field.
    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn states(&self) -> usize {
        self.labels.len()
    }

    /// `P(g(X) = labels[s])`.
    pub fn state_mass(&self) -> &[f64] {
        &self.mass
    }

    /// Expansion coefficients of `g` itself.
    pub fn coeffs(&self) -> &CoefficientVector {
        &self.coeffs
    }

    /// Rank of `g` at the default tolerance.
    pub fn rank(&self) -> Option<usize> {
        self.coeffs.rank
    }

    /// `P_st = a_s a_t + Σ_{k≤M} γ^k b_sk b_tk`, clamped to `[0, 1]`.
    pub fn joint_pmf(&self, gamma: f64) -> Result<JointPmf, LsError> {
        let n = self.states();
        let m = self.b[0].len() - 1;
        let mut p = vec![0.0; n * n];
        for s in 0..n {
            for t in 0..n {
                let mut acc = 0.0;
                if gamma != 0.0 {
                    let mut g = 1.0;
                    for k in 1..=m {
                        g *= gamma;
                        acc += g * self.b[s][k] * self.b[t][k];
                    }
                }
                p[s * n + t] = (self.mass[s] * self.mass[t] + acc).clamp(0.0, 1.0);
            }
        }
        let total: f64 = p.iter().sum();
        let drift = (total - 1.0).abs();
        if drift > COARSE_TOL {
            return Err(LsError::TruncationTooCoarse { gamma, drift });
        }
        if drift > RENORMALIZE_TOL {
            for v in &mut p {
                *v /= total;
            }
        }
        Ok(JointPmf::new(n, n, p)?)
    }

    pub fn mi(&self, gamma: f64) -> Result<f64, LsError> {
        Ok(discrete_mi(&self.joint_pmf(gamma)?))
    }

    pub fn renyi_mi(&self, gamma: f64, q: f64) -> Result<f64, LsError> {
        if q == 1.0 {
            return self.mi(gamma);
        }
        Ok(discrete_renyi_mi(&self.joint_pmf(gamma)?, q)?)
    }
}

/// `∫_{lo}^{hi} e_k p` for `k = 0..=M`.
fn cell_coeffs(
    marginal: &MarginalDensity,
    engine: &LsEngine,
    lo: f64,
    hi: f64,
) -> Result<Vec<f64>, LsError> {
    let m = engine.truncation();
    match marginal {
        MarginalDensity::StandardGaussian => {
            let upper = indicator_tail_coeffs(lo, m);
            let lower = indicator_tail_coeffs(hi, m);
            Ok(upper.iter().zip(&lower).map(|(a, b)| a - b).collect())
        }
        MarginalDensity::Gamma { .. } => {
            let cuts: Vec<f64> = [lo, hi].into_iter().filter(|x| x.is_finite()).collect();
            let c = expand(
                |x| if x >= lo && x < hi { 1.0 } else { 0.0 },
                engine.basis(),
                m,
                &ExpandOptions::with_breakpoints(cuts),
            )?;
            Ok(c.values)
        }
    }
}
