//! Entropies, divergences, diversity indices and complexities of densities
//! tabulated on a quadrature grid, plus mutual information of finite joint laws.
//!
//! | Quantity | Formula |
//! |----------|---------|
//! | Shannon entropy | `H(f) = -∫ f ln f` |
//! | Rényi entropy | `H_q(f) = ln(∫ f^q) / (1 - q)` |
//! | KL divergence | `KL(f‖g) = ∫ f ln(f/g)` |
//! | Rényi divergence | `D_q(f‖g) = ln(∫ f (f/g)^{q-1}) / (q - 1)` |
//! | diversity index | `DI = exp(H)` |
//! | complexity | `C_{α,β} = exp(H_α - H_β)` |
//!
//! Conventions: `0 ln 0 = 0`; cells with `f = 0` contribute nothing to a
//! divergence; `f > 0` where `g = 0` is an error.

use crate::quadrature::trapezoid_weights;
use crate::special::{pow_excess, xlogx_excess};
use std::sync::Arc;
use thiserror::Error;

/// Saturation threshold for `exp` of an information quantity.
pub const EXP_SATURATION: f64 = 1e300;

const NORMALIZATION_TOL: f64 = 1e-8;
const PMF_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InfoError {
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("density integrates to {0}, expected 1")]
    NotNormalized(f64),
    #[error("negative density value {value} at index {index}")]
    NegativeValue { index: usize, value: f64 },
    #[error("order q must be positive and different from 1 (got {0}); use the Shannon variant for q = 1")]
    InvalidOrder(f64),
    #[error("not absolutely continuous: f = {f} > 0 where g = 0 at index {index}")]
    NotAbsolutelyContinuous { index: usize, f: f64 },
    #[error("invalid probability table: {0}")]
    InvalidPmf(String),
    #[error("correlation {0} outside (-1, 1)")]
    InvalidCorrelation(f64),
}

/// Tensor grid with positive integration weights, shared between densities.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    axes: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

impl Grid {
    /// One axis with explicit weights (e.g. a Gauss rule).
    pub fn with_weights(nodes: Vec<f64>, weights: Vec<f64>) -> Result<Arc<Self>, InfoError> {
        if nodes.len() != weights.len() || nodes.is_empty() {
            return Err(InfoError::GridMismatch(format!(
                "{} nodes vs {} weights",
                nodes.len(),
                weights.len()
            )));
        }
        if nodes.windows(2).any(|p| p[1] <= p[0]) {
            return Err(InfoError::GridMismatch("nodes must be strictly increasing".into()));
        }
        if weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(InfoError::GridMismatch("weights must be non-negative".into()));
        }
        Ok(Arc::new(Self {
            axes: vec![nodes],
            weights,
        }))
    }

    /// One axis with trapezoid weights.
    pub fn trapezoid(nodes: Vec<f64>) -> Result<Arc<Self>, InfoError> {
        let w = trapezoid_weights(&nodes);
        Self::with_weights(nodes, w)
    }

    /// Uniform trapezoid axis of `n` points on `[lo, hi]`.
    pub fn uniform(lo: f64, hi: f64, n: usize) -> Result<Arc<Self>, InfoError> {
        let h = (hi - lo) / (n - 1) as f64;
        Self::trapezoid((0..n).map(|i| lo + i as f64 * h).collect())
    }

    /// Tensor product `a × b`, flattened row-major (`a` outer).
    pub fn tensor(a: &Grid, b: &Grid) -> Arc<Self> {
        let mut axes = a.axes.clone();
        axes.extend(b.axes.iter().cloned());
        let mut weights = Vec::with_capacity(a.weights.len() * b.weights.len());
        for wa in &a.weights {
            for wb in &b.weights {
                weights.push(wa * wb);
            }
        }
        Arc::new(Self { axes, weights })
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn axes(&self) -> &[Vec<f64>] {
        &self.axes
    }

    /// Coordinates of every grid point, in flattening order.
    pub fn points(&self) -> Vec<Vec<f64>> {
        let mut points: Vec<Vec<f64>> = vec![Vec::new()];
        for axis in &self.axes {
            let mut next = Vec::with_capacity(points.len() * axis.len());
            for p in &points {
                for &x in axis {
                    let mut q = p.clone();
                    q.push(x);
                    next.push(q);
                }
            }
            points = next;
        }
        points
    }
}

/// A probability density tabulated on a [`Grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct GriddedDensity {
    grid: Arc<Grid>,
    values: Vec<f64>,
}

impl GriddedDensity {
    pub fn new(grid: Arc<Grid>, values: Vec<f64>) -> Result<Self, InfoError> {
        if values.len() != grid.len() {
            return Err(InfoError::GridMismatch(format!(
                "{} values on a grid of {} points",
                values.len(),
                grid.len()
            )));
        }
        if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| !(**v >= 0.0)) {
            return Err(InfoError::NegativeValue { index, value });
        }
        let mass: f64 = grid.weights.iter().zip(&values).map(|(w, v)| w * v).sum();
        if (mass - 1.0).abs() > NORMALIZATION_TOL {
            return Err(InfoError::NotNormalized(mass));
        }
        Ok(Self { grid, values })
    }

    /// Tabulates `f` at every grid point.
    pub fn from_fn(grid: Arc<Grid>, f: impl Fn(&[f64]) -> f64) -> Result<Self, InfoError> {
        let values = grid.points().iter().map(|p| f(p)).collect();
        Self::new(grid, values)
    }

    /// Product density `f ⊗ g` on the tensor grid.
    pub fn product(f: &GriddedDensity, g: &GriddedDensity) -> Result<Self, InfoError> {
        let grid = Grid::tensor(&f.grid, &g.grid);
        let mut values = Vec::with_capacity(grid.len());
        for a in &f.values {
            for b in &g.values {
                values.push(a * b);
            }
        }
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn cells(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.grid.weights.iter().copied().zip(self.values.iter().copied())
    }
}

fn check_order(q: f64) -> Result<(), InfoError> {
    if q > 0.0 && q != 1.0 && q.is_finite() {
        Ok(())
    } else {
        Err(InfoError::InvalidOrder(q))
    }
}

fn same_grid(f: &GriddedDensity, g: &GriddedDensity) -> Result<(), InfoError> {
    if Arc::ptr_eq(&f.grid, &g.grid) || f.grid == g.grid {
        Ok(())
    } else {
        Err(InfoError::GridMismatch("densities live on different grids".into()))
    }
}

/// Differential entropy `-Σ w f ln f`.
pub fn shannon_entropy(f: &GriddedDensity) -> f64 {
    -f.cells()
        .filter(|&(_, v)| v > 0.0)
        .map(|(w, v)| w * v * v.ln())
        .sum::<f64>()
}

/// Rényi entropy of order `q`.
pub fn renyi_entropy(f: &GriddedDensity, q: f64) -> Result<f64, InfoError> {
    check_order(q)?;
    let s: f64 = f.cells().filter(|&(_, v)| v > 0.0).map(|(w, v)| w * v.powf(q)).sum();
    Ok(s.ln() / (1.0 - q))
}

/// Entropy of order `q`, with `q = 1` meaning Shannon.
pub fn entropy_of_order(f: &GriddedDensity, q: f64) -> Result<f64, InfoError> {
    if q == 1.0 {
        Ok(shannon_entropy(f))
    } else {
        renyi_entropy(f, q)
    }
}

fn check_continuity(f: &GriddedDensity, g: &GriddedDensity) -> Result<(), InfoError> {
    same_grid(f, g)?;
    for (index, (&fv, &gv)) in f.values.iter().zip(&g.values).enumerate() {
        if fv > 0.0 && gv <= 0.0 {
            return Err(InfoError::NotAbsolutelyContinuous { index, f: fv });
        }
    }
    Ok(())
}

/// `KL(f‖g) = Σ w f ln(f/g)`.
pub fn kl_divergence(f: &GriddedDensity, g: &GriddedDensity) -> Result<f64, InfoError> {
    check_continuity(f, g)?;
    // Σ w g h(f/g - 1) equals Σ w f ln(f/g) when both integrate to one
    let mut acc = 0.0;
    for ((&w, &fv), &gv) in f.grid.weights.iter().zip(&f.values).zip(&g.values) {
        if gv > 0.0 {
            acc += w * gv * xlogx_excess(fv / gv - 1.0);
        }
    }
    let mass_gap: f64 = f.cells().map(|(w, v)| w * v).sum::<f64>()
        - g.cells().map(|(w, v)| w * v).sum::<f64>();
    Ok(acc + mass_gap)
}

/// `D_q(f‖g)`.
pub fn renyi_divergence(f: &GriddedDensity, g: &GriddedDensity, q: f64) -> Result<f64, InfoError> {
    check_order(q)?;
    check_continuity(f, g)?;
    let mut s = 0.0;
    for ((&w, &fv), &gv) in f.grid.weights.iter().zip(&f.values).zip(&g.values) {
        if fv > 0.0 {
            s += w * gv * (fv / gv).powf(q);
        }
    }
    Ok(s.ln() / (q - 1.0))
}

/// Divergence of order `q`, with `q = 1` meaning Kullback–Leibler.
pub fn divergence_of_order(f: &GriddedDensity, g: &GriddedDensity, q: f64) -> Result<f64, InfoError> {
    if q == 1.0 {
        kl_divergence(f, g)
    } else {
        renyi_divergence(f, g, q)
    }
}

/// Result of an `exp` that may have been clipped.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Saturating {
    pub value: f64,
    pub saturated: bool,
}

/// `exp(entropy_value)`, clipped at [`EXP_SATURATION`]. The same map gives the
/// relative diversity index when fed a divergence.
pub fn diversity_index(entropy_value: f64) -> Saturating {
    let limit = EXP_SATURATION.ln();
    if entropy_value > limit {
        Saturating {
            value: EXP_SATURATION,
            saturated: true,
        }
    } else {
        Saturating {
            value: entropy_value.exp(),
            saturated: false,
        }
    }
}

/// Relative diversity `exp(D_q(f‖g))`.
pub fn relative_diversity(f: &GriddedDensity, g: &GriddedDensity, q: f64) -> Result<Saturating, InfoError> {
    Ok(diversity_index(divergence_of_order(f, g, q)?))
}

/// Two-parameter complexity `exp(H_α(f) - H_β(f))`.
pub fn complexity(f: &GriddedDensity, alpha: f64, beta: f64) -> Result<Saturating, InfoError> {
    positive_orders(alpha, beta)?;
    let diff = entropy_of_order(f, alpha)? - entropy_of_order(f, beta)?;
    Ok(diversity_index(diff))
}

/// Relative complexity `exp(D_α(f‖g) - D_β(f‖g))`.
pub fn relative_complexity(
    f: &GriddedDensity,
    g: &GriddedDensity,
    alpha: f64,
    beta: f64,
) -> Result<Saturating, InfoError> {
    positive_orders(alpha, beta)?;
    let diff = divergence_of_order(f, g, alpha)? - divergence_of_order(f, g, beta)?;
    Ok(diversity_index(diff))
}

fn positive_orders(alpha: f64, beta: f64) -> Result<(), InfoError> {
    for q in [alpha, beta] {
        if !(q > 0.0 && q.is_finite()) {
            return Err(InfoError::InvalidOrder(q));
        }
    }
    Ok(())
}

/// A finite probability vector.
#[derive(Debug, Clone, PartialEq)]
pub struct FinitePmf {
    probabilities: Vec<f64>,
}

impl FinitePmf {
    pub fn new(probabilities: Vec<f64>) -> Result<Self, InfoError> {
        validate_probabilities(&probabilities)?;
        Ok(Self { probabilities })
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn len(&self) -> usize {
        self.probabilities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probabilities.is_empty()
    }

    pub fn entropy(&self) -> f64 {
        -self
            .probabilities
            .iter()
            .filter(|p| **p > 0.0)
            .map(|p| p * p.ln())
            .sum::<f64>()
    }
}

fn validate_probabilities(p: &[f64]) -> Result<(), InfoError> {
    if p.is_empty() {
        return Err(InfoError::InvalidPmf("empty".into()));
    }
    if let Some(v) = p.iter().find(|v| !(**v >= 0.0)) {
        return Err(InfoError::InvalidPmf(format!("negative entry {v}")));
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > PMF_TOL {
        return Err(InfoError::InvalidPmf(format!("entries sum to {total}")));
    }
    Ok(())
}

/// Joint law of two finite-state variables, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct JointPmf {
    rows: usize,
    cols: usize,
    probabilities: Vec<f64>,
}

impl JointPmf {
    pub fn new(rows: usize, cols: usize, probabilities: Vec<f64>) -> Result<Self, InfoError> {
        if rows * cols != probabilities.len() {
            return Err(InfoError::InvalidPmf(format!(
                "{rows}x{cols} table with {} entries",
                probabilities.len()
            )));
        }
        validate_probabilities(&probabilities)?;
        Ok(Self {
            rows,
            cols,
            probabilities,
        })
    }

    /// Normalizes non-negative counts.
    pub fn from_counts(rows: usize, cols: usize, counts: &[u64]) -> Result<Self, InfoError> {
        let total: u64 = counts.iter().sum();
        if total == 0 {
            return Err(InfoError::InvalidPmf("no observations".into()));
        }
        Self::new(rows, cols, counts.iter().map(|&c| c as f64 / total as f64).collect())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.probabilities[i * self.cols + j]
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn row_marginal(&self) -> FinitePmf {
        FinitePmf {
            probabilities: (0..self.rows)
                .map(|i| (0..self.cols).map(|j| self.get(i, j)).sum())
                .collect(),
        }
    }

    pub fn col_marginal(&self) -> FinitePmf {
        FinitePmf {
            probabilities: (0..self.cols)
                .map(|j| (0..self.rows).map(|i| self.get(i, j)).sum())
                .collect(),
        }
    }

    /// `(r_i c_j, P_ij / (r_i c_j) - 1)` for every cell with `r_i c_j > 0`.
    fn relative_deviations(&self) -> Vec<(f64, f64)> {
        let r = self.row_marginal();
        let c = self.col_marginal();
        let mut out = Vec::with_capacity(self.probabilities.len());
        for i in 0..self.rows {
            for j in 0..self.cols {
                let reference = r.probabilities[i] * c.probabilities[j];
                if reference > 0.0 {
                    out.push((reference, (self.get(i, j) - reference) / reference));
                }
            }
        }
        out
    }
}

/// Shannon mutual information `Σ P_ij ln(P_ij / (r_i c_j))`.
///
/// Evaluated as `Σ r_i c_j h(P_ij/(r_i c_j) - 1)` with `h(x) = (1+x)ln(1+x) - x`,
/// which drops the identically-zero linear part and keeps full relative
/// precision when the table is close to independent.
pub fn discrete_mi(joint: &JointPmf) -> f64 {
    joint
        .relative_deviations()
        .into_iter()
        .map(|(reference, x)| reference * xlogx_excess(x))
        .sum::<f64>()
        .max(0.0)
}

/// Rényi mutual information of order `q` of a finite joint law.
pub fn discrete_renyi_mi(joint: &JointPmf, q: f64) -> Result<f64, InfoError> {
    check_order(q)?;
    let s: f64 = joint
        .relative_deviations()
        .into_iter()
        .map(|(reference, x)| reference * pow_excess(x, q))
        .sum();
    Ok((s.ln_1p() / (q - 1.0)).max(0.0))
}

/// Mutual information of order `q` between the two components of a
/// standard bivariate normal with correlation `c`.
///
/// `q = 1` uses the closed form `-ln(1 - c²)/2`. Other orders integrate
/// `f^q (φ⊗φ)^{1-q}` by a 1601² trapezoid rule on `[-8, 8]²`; this is a brute
/// force reference, not a closed form.
pub fn gaussian_mi_exact(c: f64, q: f64) -> Result<f64, InfoError> {
    if !(c.abs() < 1.0) {
        return Err(InfoError::InvalidCorrelation(c));
    }
    if q == 1.0 {
        return Ok(-0.5 * (-c * c).ln_1p());
    }
    if !(q > 0.0 && q.is_finite()) {
        return Err(InfoError::InvalidOrder(q));
    }
    if c == 0.0 {
        return Ok(0.0);
    }
    const HALF_WIDTH: f64 = 8.0;
    const POINTS: usize = 1601;
    let h = 2.0 * HALF_WIDTH / (POINTS - 1) as f64;
    let one_minus = 1.0 - c * c;
    let log_norm_f = -(2.0 * std::f64::consts::PI * one_minus.sqrt()).ln();
    let log_norm_g = -(2.0 * std::f64::consts::PI).ln();
    let mut total = 0.0;
    for i in 0..POINTS {
        let u = -HALF_WIDTH + i as f64 * h;
        let wu = if i == 0 || i == POINTS - 1 { 0.5 } else { 1.0 };
        let mut row = 0.0;
        for j in 0..POINTS {
            let v = -HALF_WIDTH + j as f64 * h;
            let wv = if j == 0 || j == POINTS - 1 { 0.5 } else { 1.0 };
            let log_f = log_norm_f - (u * u - 2.0 * c * u * v + v * v) / (2.0 * one_minus);
            let log_g = log_norm_g - 0.5 * (u * u + v * v);
            row += wv * (q * log_f + (1.0 - q) * log_g).exp();
        }
        total += wu * row;
    }
    Ok((total * h * h).ln() / (q - 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn discrete_examples() {
        let product = JointPmf::new(2, 2, vec![0.06, 0.14, 0.24, 0.56]).unwrap();
        assert!(discrete_mi(&product).abs() < 1e-15);
        let diag = JointPmf::new(2, 2, vec![0.5, 0.0, 0.0, 0.5]).unwrap();
        assert!((discrete_mi(&diag) - std::f64::consts::LN_2).abs() < 1e-15);
        let t = JointPmf::new(2, 2, vec![0.4, 0.1, 0.1, 0.4]).unwrap();
        let direct = 2.0 * 0.4 * (0.4f64 / 0.25).ln() + 2.0 * 0.1 * (0.1f64 / 0.25).ln();
        assert!((discrete_mi(&t) - direct).abs() < 1e-15);
        assert!((discrete_mi(&t) - 0.19274).abs() < 5e-6);
    }

    #[test]
    fn pmf_validation() {
        assert!(JointPmf::new(2, 2, vec![0.5, 0.5, 0.1, 0.0]).is_err());
        assert!(JointPmf::new(2, 1, vec![0.5, 0.5, 0.0]).is_err());
        assert!(FinitePmf::new(vec![-0.1, 1.1]).is_err());
        assert!(JointPmf::from_counts(1, 2, &[0, 0]).is_err());
    }

    #[test]
    fn gaussian_closed_forms() {
        assert_eq!(gaussian_mi_exact(0.0, 1.0).unwrap(), 0.0);
        assert!((gaussian_mi_exact(0.5, 1.0).unwrap() - 0.14384).abs() < 5e-6);
        assert!((gaussian_mi_exact(0.9, 1.0).unwrap() - 0.83037).abs() < 5e-6);
        assert!(gaussian_mi_exact(1.0, 1.0).is_err());
    }

    #[test]
    fn diversity_saturates() {
        assert_eq!(diversity_index(0.0).value, 1.0);
        let s = diversity_index(1e4);
        assert!(s.saturated);
        assert_eq!(s.value, EXP_SATURATION);
    }

    #[test]
    fn order_one_is_rejected_for_renyi() {
        let grid = Grid::uniform(0.0, 1.0, 11).unwrap();
        let f = GriddedDensity::from_fn(grid, |_| 1.0).unwrap();
        assert!(matches!(renyi_entropy(&f, 1.0), Err(InfoError::InvalidOrder(_))));
        assert!(renyi_entropy(&f, -2.0).is_err());
    }

    #[test]
    fn density_validation() {
        let grid = Grid::uniform(0.0, 1.0, 11).unwrap();
        assert!(matches!(
            GriddedDensity::from_fn(grid.clone(), |_| 2.0),
            Err(InfoError::NotNormalized(_))
        ));
        assert!(GriddedDensity::new(grid, vec![1.0; 3]).is_err());
    }
}
