//! Orthonormal polynomial systems under a marginal density.
//!
//! Two marginals are supported: the standard Gaussian, paired with the
//! normalized probabilists' Hermite polynomials `He_k / sqrt(k!)`, and the
//! Gamma law with shape `s` and scale `θ`, paired with the normalized
//! generalized Laguerre polynomials `L_k^{(s-1)}(x/θ)`.
//!
//! Everything in this crate is expressed in the orthonormal system. Values
//! quoted against the non-normalized Hermite basis (norm `k!`) are divided
//! by `sqrt(k!)` on the way in.

use crate::quadrature::{composite_rule, gauss_hermite, gauss_laguerre, GaussRule};
use crate::special::{ln_factorial, ln_gamma, norm_cdf, norm_pdf, norm_sf};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default node count for expansion quadrature.
pub const DEFAULT_EXPAND_NODES: usize = 256;
/// Default rank threshold, relative to `sqrt(E_p[g^2])`.
pub const DEFAULT_RANK_TOL: f64 = 1e-10;

const L2_OVERFLOW_GUARD: f64 = 1e300;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BasisError {
    #[error("degree {degree} outside 0..={max}")]
    DegreeOutOfRange { degree: usize, max: usize },
    #[error("point {x} outside the support ({lo}, {hi})")]
    OutsideSupport { x: f64, lo: f64, hi: f64 },
    #[error("invalid marginal: {0}")]
    InvalidMarginal(String),
    #[error("function is not in L2(p): quadrature of g^2 p gave {0}")]
    NotInL2(f64),
    #[error("no rank up to degree {0}: every coefficient is below the threshold")]
    NoRank(usize),
    #[error("max degree must be at least 1")]
    ZeroDegree,
}

/// Marginal law of the field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum MarginalDensity {
    StandardGaussian,
    Gamma { shape: f64, scale: f64 },
}

impl MarginalDensity {
    pub fn gamma(shape: f64, scale: f64) -> Result<Self, BasisError> {
        let m = MarginalDensity::Gamma { shape, scale };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<(), BasisError> {
        match *self {
            MarginalDensity::StandardGaussian => Ok(()),
            MarginalDensity::Gamma { shape, scale } => {
                if !(shape > 0.0 && shape.is_finite()) {
                    return Err(BasisError::InvalidMarginal(format!(
                        "gamma shape must be positive, got {shape}"
                    )));
                }
                if !(scale > 0.0 && scale.is_finite()) {
                    return Err(BasisError::InvalidMarginal(format!(
                        "gamma scale must be positive, got {scale}"
                    )));
                }
                Ok(())
            }
        }
    }

    /// Open support `(a, b)`.
    pub fn support(&self) -> (f64, f64) {
        match self {
            MarginalDensity::StandardGaussian => (f64::NEG_INFINITY, f64::INFINITY),
            MarginalDensity::Gamma { .. } => (0.0, f64::INFINITY),
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        let (lo, hi) = self.support();
        match self {
            // the Gamma density extends continuously to 0 for shape >= 1
            MarginalDensity::Gamma { .. } => x >= lo && x < hi,
            MarginalDensity::StandardGaussian => x.is_finite() && x > lo && x < hi,
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        match *self {
            MarginalDensity::StandardGaussian => norm_pdf(x),
            MarginalDensity::Gamma { shape, scale } => {
                if x < 0.0 {
                    return 0.0;
                }
                if x == 0.0 {
                    return if shape == 1.0 {
                        1.0 / scale
                    } else if shape > 1.0 {
                        0.0
                    } else {
                        f64::INFINITY
                    };
                }
                let t = x / scale;
                ((shape - 1.0) * t.ln() - t - ln_gamma(shape)).exp() / scale
            }
        }
    }

    /// Distribution function `P(X <= x)`.
    pub fn cdf(&self, x: f64) -> f64 {
        match *self {
            MarginalDensity::StandardGaussian => norm_cdf(x),
            MarginalDensity::Gamma { shape, scale } => {
                if x <= 0.0 {
                    0.0
                } else {
                    statrs::function::gamma::gamma_lr(shape, x / scale)
                }
            }
        }
    }

    /// Survival function `P(X > x)`.
    pub fn sf(&self, x: f64) -> f64 {
        match *self {
            MarginalDensity::StandardGaussian => norm_sf(x),
            MarginalDensity::Gamma { shape, scale } => {
                if x <= 0.0 {
                    1.0
                } else {
                    statrs::function::gamma::gamma_ur(shape, x / scale)
                }
            }
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            MarginalDensity::StandardGaussian => 0.0,
            MarginalDensity::Gamma { shape, scale } => shape * scale,
        }
    }

    pub fn variance(&self) -> f64 {
        match *self {
            MarginalDensity::StandardGaussian => 1.0,
            MarginalDensity::Gamma { shape, scale } => shape * scale * scale,
        }
    }

    /// Gauss rule whose weights are this density.
    pub fn quadrature(&self, nodes: usize) -> GaussRule {
        match *self {
            MarginalDensity::StandardGaussian => (*gauss_hermite(nodes)).clone(),
            MarginalDensity::Gamma { shape, scale } => {
                let base = gauss_laguerre(nodes, shape - 1.0);
                GaussRule {
                    nodes: base.nodes.iter().map(|&t| t * scale).collect(),
                    weights: base.weights.clone(),
                }
            }
        }
    }

    /// Finite interval outside which `p(x) (1 + |x|)^{2 degree}` is negligible.
    pub(crate) fn effective_range(&self, degree: usize) -> (f64, f64) {
        match *self {
            MarginalDensity::StandardGaussian => {
                let half = 12.0 + 2.0 * (degree as f64).sqrt() * 2.0;
                (-half, half)
            }
            MarginalDensity::Gamma { shape, scale } => {
                (0.0, scale * (2.0 * (shape + 2.0 * degree as f64) + 120.0))
            }
        }
    }

    pub fn descriptor(&self) -> String {
        match *self {
            MarginalDensity::StandardGaussian => "gaussian".to_string(),
            MarginalDensity::Gamma { shape, scale } => format!("gamma(shape={shape},scale={scale})"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BasisKind {
    HermiteNormalized,
    LaguerreNormalized { alpha: f64 },
}

/// Orthonormal polynomials `e_0 ≡ 1, e_1, …, e_K` under a marginal density.
#[derive(Debug, Clone, PartialEq)]
pub struct OrthonormalBasis {
    marginal: MarginalDensity,
    kind: BasisKind,
    max_degree: usize,
    norms: Vec<f64>,
}

impl OrthonormalBasis {
    /// Picks the classical family matching `marginal`.
    pub fn new(marginal: MarginalDensity, max_degree: usize) -> Result<Self, BasisError> {
        marginal.validate()?;
        if max_degree == 0 {
            return Err(BasisError::ZeroDegree);
        }
        let (kind, norms) = match marginal {
            MarginalDensity::StandardGaussian => {
                let norms = (0..=max_degree)
                    .map(|k| (0.5 * ln_factorial(k)).exp())
                    .collect();
                (BasisKind::HermiteNormalized, norms)
            }
            MarginalDensity::Gamma { shape, .. } => {
                let alpha = shape - 1.0;
                let norms = (0..=max_degree)
                    .map(|k| {
                        let ln_sq = ln_gamma(k as f64 + alpha + 1.0)
                            - ln_factorial(k)
                            - ln_gamma(alpha + 1.0);
                        (0.5 * ln_sq).exp()
                    })
                    .collect();
                (BasisKind::LaguerreNormalized { alpha }, norms)
            }
        };
        Ok(Self {
            marginal,
            kind,
            max_degree,
            norms,
        })
    }

    pub fn marginal(&self) -> &MarginalDensity {
        &self.marginal
    }

    pub fn kind(&self) -> BasisKind {
        self.kind
    }

    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    /// `e_k(x)`.
    pub fn eval(&self, k: usize, x: f64) -> Result<f64, BasisError> {
        if k > self.max_degree {
            return Err(BasisError::DegreeOutOfRange {
                degree: k,
                max: self.max_degree,
            });
        }
        if !self.marginal.contains(x) {
            let (lo, hi) = self.marginal.support();
            return Err(BasisError::OutsideSupport { x, lo, hi });
        }
        let mut buf = vec![0.0; k + 1];
        self.eval_into(x, &mut buf);
        Ok(buf[k])
    }

    /// Fills `out[k] = e_k(x)` for `k < out.len()`. No range checks; `out`
    /// must not be longer than `max_degree + 1`.
    pub fn eval_into(&self, x: f64, out: &mut [f64]) {
        let n = out.len();
        if n == 0 {
            return;
        }
        debug_assert!(n <= self.max_degree + 1);
        out[0] = 1.0;
        match self.kind {
            BasisKind::HermiteNormalized => {
                // He_{k+1} = x He_k - k He_{k-1}
                let (mut prev, mut cur) = (1.0, x);
                if n > 1 {
                    out[1] = x / self.norms[1];
                }
                for k in 1..n.saturating_sub(1) {
                    let next = x * cur - k as f64 * prev;
                    prev = cur;
                    cur = next;
                    out[k + 1] = cur / self.norms[k + 1];
                }
            }
            BasisKind::LaguerreNormalized { alpha } => {
                let t = match self.marginal {
                    MarginalDensity::Gamma { scale, .. } => x / scale,
                    MarginalDensity::StandardGaussian => x,
                };
                // (k+1) L_{k+1} = (2k + 1 + α - t) L_k - (k + α) L_{k-1}
                let (mut prev, mut cur) = (1.0, 1.0 + alpha - t);
                if n > 1 {
                    out[1] = cur / self.norms[1];
                }
                for k in 1..n.saturating_sub(1) {
                    let kf = k as f64;
                    let next = ((2.0 * kf + 1.0 + alpha - t) * cur - (kf + alpha) * prev) / (kf + 1.0);
                    prev = cur;
                    cur = next;
                    out[k + 1] = cur / self.norms[k + 1];
                }
            }
        }
    }

    /// Table `e_k(x_i)` for `k = 0..=degree`, row-major by node.
    pub(crate) fn table(&self, nodes: &[f64], degree: usize) -> Vec<f64> {
        let width = degree + 1;
        let mut table = vec![0.0; nodes.len() * width];
        for (i, &x) in nodes.iter().enumerate() {
            self.eval_into(x, &mut table[i * width..(i + 1) * width]);
        }
        table
    }
}

/// Expansion coefficients `C_0..C_K` of a function in an orthonormal basis.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientVector {
    pub values: Vec<f64>,
    /// `sqrt(E_p[g^2])`, the scale used by the relative rank threshold.
    pub norm: f64,
    /// Rank at [`DEFAULT_RANK_TOL`]; `None` when no coefficient above degree 0 is
    /// distinguishable from zero.
    pub rank: Option<usize>,
}

impl CoefficientVector {
    fn from_values(values: Vec<f64>, norm: f64) -> Self {
        let mut cv = Self {
            values,
            norm,
            rank: None,
        };
        cv.rank = rank_of(&cv, DEFAULT_RANK_TOL).ok();
        cv
    }

    pub fn degree(&self) -> usize {
        self.values.len() - 1
    }

    /// Parseval partial sum `Σ_{k<=K} C_k^2`.
    pub fn energy(&self) -> f64 {
        self.values.iter().map(|c| c * c).sum()
    }
}

/// Options for [`expand`].
#[derive(Debug, Clone, PartialEq)]
pub struct ExpandOptions {
    /// Node count of the Gauss rule used for smooth integrands.
    pub nodes: usize,
    /// Points where `g` may jump. When non-empty the support is split there
    /// and each piece is integrated by composite Gauss–Legendre, since a
    /// Gauss rule on the full support converges only like `O(1/n)` across a jump.
    pub breakpoints: Vec<f64>,
}

impl Default for ExpandOptions {
    fn default() -> Self {
        Self {
            nodes: DEFAULT_EXPAND_NODES,
            breakpoints: Vec::new(),
        }
    }
}

impl ExpandOptions {
    pub fn with_breakpoints(breakpoints: Vec<f64>) -> Self {
        Self {
            breakpoints,
            ..Self::default()
        }
    }
}

/// Coefficients `C_k = ∫ g e_k p` for `k = 0..=degree`.
pub fn expand<F: Fn(f64) -> f64>(
    g: F,
    basis: &OrthonormalBasis,
    degree: usize,
    opts: &ExpandOptions,
) -> Result<CoefficientVector, BasisError> {
    if degree > basis.max_degree {
        return Err(BasisError::DegreeOutOfRange {
            degree,
            max: basis.max_degree,
        });
    }
    let width = degree + 1;
    let mut acc = vec![0.0; width];
    let mut norm_sq = 0.0;
    let mut buf = vec![0.0; width];
    let marginal = basis.marginal;

    let rule = if opts.breakpoints.is_empty() {
        marginal.quadrature(opts.nodes)
    } else {
        piecewise_rule(&marginal, degree, &opts.breakpoints)
    };
    for (&x, &w) in rule.nodes.iter().zip(&rule.weights) {
        if w == 0.0 {
            continue;
        }
        let gx = g(x);
        norm_sq += w * gx * gx;
        basis.eval_into(x, &mut buf);
        for (a, e) in acc.iter_mut().zip(&buf) {
            *a += w * gx * e;
        }
    }

    if !norm_sq.is_finite() || norm_sq > L2_OVERFLOW_GUARD {
        return Err(BasisError::NotInL2(norm_sq));
    }
    Ok(CoefficientVector::from_values(acc, norm_sq.sqrt()))
}

/// Composite Gauss–Legendre nodes over the effective support, split at
/// `breakpoints`, with weights `w_i p(x_i)`.
fn piecewise_rule(marginal: &MarginalDensity, degree: usize, breakpoints: &[f64]) -> GaussRule {
    let (lo, hi) = marginal.effective_range(degree);
    let mut edges = vec![lo];
    let mut cuts: Vec<f64> = breakpoints
        .iter()
        .copied()
        .filter(|b| *b > lo && *b < hi)
        .collect();
    cuts.sort_by(|a, b| a.partial_cmp(b).expect("finite breakpoints"));
    edges.extend(cuts);
    edges.push(hi);
    let mut nodes = Vec::new();
    let mut weights = Vec::new();
    for pair in edges.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        if b <= a {
            continue;
        }
        let panels = (((b - a) / 0.25).ceil() as usize).max(1);
        let piece = composite_rule(a, b, panels, PIECE_ORDER);
        for (x, w) in piece.nodes.into_iter().zip(piece.weights) {
            let wp = w * marginal.pdf(x);
            nodes.push(x);
            weights.push(wp);
        }
    }
    GaussRule { nodes, weights }
}

const PIECE_ORDER: usize = 16;

/// Closed-form Hermite coefficients of the exceedance indicator `1{x >= nu}`:
/// `C_0 = 1 - Φ(nu)` and `C_k = φ(nu) He_{k-1}(nu) / sqrt(k!)` for `k >= 1`.
pub fn indicator_hermite_coeffs(nu: f64, degree: usize) -> Result<CoefficientVector, BasisError> {
    if degree == 0 {
        return Err(BasisError::ZeroDegree);
    }
    let values = indicator_tail_coeffs(nu, degree);
    let norm = values[0].sqrt();
    Ok(CoefficientVector::from_values(values, norm))
}

/// `∫_nu^∞ e_k φ` for `k = 0..=degree` (orthonormal Hermite), with the
/// conventions `nu = -∞ → δ_{k0}` and `nu = +∞ → 0`.
pub(crate) fn indicator_tail_coeffs(nu: f64, degree: usize) -> Vec<f64> {
    let mut values = vec![0.0; degree + 1];
    if nu == f64::NEG_INFINITY {
        values[0] = 1.0;
        return values;
    }
    if nu == f64::INFINITY {
        return values;
    }
    values[0] = norm_sf(nu);
    let density = norm_pdf(nu);
    // He_{k-1}(nu) by recurrence, divided by sqrt(k!)
    let (mut prev, mut cur) = (0.0, 1.0);
    for k in 1..=degree {
        values[k] = density * cur / (0.5 * ln_factorial(k)).exp();
        let next = nu * cur - (k as f64 - 1.0) * prev;
        prev = cur;
        cur = next;
    }
    values
}

/// Smallest `m >= 1` with `|C_m| > rank_tol · sqrt(E_p[g^2])`.
pub fn rank_of(coeffs: &CoefficientVector, rank_tol: f64) -> Result<usize, BasisError> {
    let threshold = rank_tol * coeffs.norm.max(f64::MIN_POSITIVE);
    coeffs
        .values
        .iter()
        .enumerate()
        .skip(1)
        .find(|(_, c)| c.abs() > threshold)
        .map(|(m, _)| m)
        .ok_or(BasisError::NoRank(coeffs.degree()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hermite(k: usize) -> OrthonormalBasis {
        OrthonormalBasis::new(MarginalDensity::StandardGaussian, k).unwrap()
    }

    #[test]
    fn eval_examples() {
        let b = hermite(4);
        assert_eq!(b.eval(0, 3.7).unwrap(), 1.0);
        assert!((b.eval(2, 0.0).unwrap() + std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        let lag = OrthonormalBasis::new(MarginalDensity::gamma(5.0, 1.0).unwrap(), 3).unwrap();
        assert_eq!(lag.eval(1, 5.0).unwrap(), 0.0);
    }

    #[test]
    fn eval_errors() {
        let b = hermite(3);
        assert!(matches!(b.eval(4, 0.0), Err(BasisError::DegreeOutOfRange { .. })));
        let lag = OrthonormalBasis::new(MarginalDensity::gamma(5.0, 1.0).unwrap(), 3).unwrap();
        assert!(matches!(lag.eval(1, -1.0), Err(BasisError::OutsideSupport { .. })));
        assert!(OrthonormalBasis::new(MarginalDensity::StandardGaussian, 0).is_err());
        assert!(MarginalDensity::gamma(-1.0, 1.0).is_err());
    }

    #[test]
    fn constant_expands_to_first_coefficient() {
        let b = hermite(6);
        let c = expand(|_| 1.0, &b, 6, &ExpandOptions::default()).unwrap();
        assert!((c.values[0] - 1.0).abs() < 1e-14);
        assert!(c.values[1..].iter().all(|v| v.abs() < 1e-13));
        assert!(c.rank.is_none());
        assert!(matches!(rank_of(&c, DEFAULT_RANK_TOL), Err(BasisError::NoRank(6))));
    }

    #[test]
    fn non_l2_function_is_rejected() {
        let b = hermite(2);
        let r = expand(|x| (x * x).exp(), &b, 2, &ExpandOptions::default());
        assert!(matches!(r, Err(BasisError::NotInL2(_))));
    }

    #[test]
    fn ranks_of_simple_functions() {
        let b = hermite(6);
        let sq = expand(|x| x * x - 1.0, &b, 6, &ExpandOptions::default()).unwrap();
        assert_eq!(rank_of(&sq, DEFAULT_RANK_TOL).unwrap(), 2);
        assert!((sq.values[2] - std::f64::consts::SQRT_2).abs() < 1e-12);
        let cube = expand(|x| x * x * x, &b, 6, &ExpandOptions::default()).unwrap();
        assert_eq!(cube.rank, Some(1));
        assert!((cube.values[1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn indicator_limits() {
        let c = indicator_hermite_coeffs(-40.0, 5).unwrap();
        assert!((c.values[0] - 1.0).abs() < 1e-15);
        assert!(c.values[1..].iter().all(|v| v.abs() < 1e-300));
        let c0 = indicator_hermite_coeffs(0.0, 3).unwrap();
        assert!((c0.values[1] - 0.398_942_280_401_432_7).abs() < 1e-15);
        assert!(indicator_hermite_coeffs(0.0, 0).is_err());
    }
}
