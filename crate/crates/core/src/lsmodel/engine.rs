use super::{LsError, NegativityPolicy};
use crate::polybasis::OrthonormalBasis;
use crate::quadrature::GaussRule;
use crate::special::{binomial, ln_factorial, pow_excess, xlogx_excess};
use std::collections::HashMap;
use std::sync::{Arc, Mutex};

/// Gauss nodes per axis for the bivariate quadrature.
pub const DEFAULT_QUAD_NODES: usize = 200;

/// Upper limit on `q M^q` for the multinomial Rényi expansion.
pub const MULTINOMIAL_COST_LIMIT: f64 = 1e7;

/// A mutual-information value together with the probability mass that the
/// clamp added to the truncated density (zero when nothing was clamped).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MiValue {
    pub value: f64,
    pub clamped_mass: f64,
}

/// Mutual-information engine for a fixed marginal, basis and truncation,
/// parameterized by the correlation value `γ`.
#[derive(Debug)]
pub struct LsEngine {
    basis: OrthonormalBasis,
    truncation: usize,
    policy: NegativityPolicy,
    rule: GaussRule,
    /// `e_k(x_i)`, row-major by node, `k = 0..=M`
    etab: Vec<f64>,
    /// `C_j^p = ∫ p² e_j`, `j = 0..=M`
    pdf_coeffs: Vec<f64>,
    /// Polynomial coefficients of `S_j(γ)` for the multinomial expansion.
    moment_cache: Mutex<HashMap<usize, Arc<Vec<f64>>>>,
}

impl Clone for LsEngine {
    fn clone(&self) -> Self {
        Self {
            basis: self.basis.clone(),
            truncation: self.truncation,
            policy: self.policy,
            rule: self.rule.clone(),
            etab: self.etab.clone(),
            pdf_coeffs: self.pdf_coeffs.clone(),
            moment_cache: Mutex::new(self.moment_cache.lock().expect("moment cache").clone()),
        }
    }
}

impl LsEngine {
    pub fn new(basis: OrthonormalBasis, truncation: usize) -> Result<Self, LsError> {
        Self::with_options(basis, truncation, DEFAULT_QUAD_NODES, NegativityPolicy::default())
    }

    pub fn with_options(
        basis: OrthonormalBasis,
        truncation: usize,
        quad_nodes: usize,
        policy: NegativityPolicy,
    ) -> Result<Self, LsError> {
        if truncation == 0 || truncation > basis.max_degree() {
            return Err(LsError::Truncation {
                truncation,
                max: basis.max_degree(),
            });
        }
        // the rule must integrate e_k e_k exactly
        let min = truncation + 1;
        if quad_nodes < min {
            return Err(LsError::TooFewNodes { got: quad_nodes, min });
        }
        if let NegativityPolicy::ClampFloor { eps } = policy {
            if !(eps > 0.0 && eps < 1.0) {
                return Err(LsError::InvalidPolicy(format!("clamp floor must be in (0, 1), got {eps}")));
            }
        }
        let marginal = *basis.marginal();
        let rule = marginal.quadrature(quad_nodes);
        let etab = basis.table(&rule.nodes, truncation);
        let width = truncation + 1;
        let mut pdf_coeffs = vec![0.0; width];
        for (i, (&x, &w)) in rule.nodes.iter().zip(&rule.weights).enumerate() {
            let wp = w * marginal.pdf(x);
            for k in 0..width {
                pdf_coeffs[k] += wp * etab[i * width + k];
            }
        }
        Ok(Self {
            basis,
            truncation,
            policy,
            rule,
            etab,
            pdf_coeffs,
            moment_cache: Mutex::new(HashMap::new()),
        })
    }

    pub fn basis(&self) -> &OrthonormalBasis {
        &self.basis
    }

    pub fn truncation(&self) -> usize {
        self.truncation
    }

    pub fn policy(&self) -> NegativityPolicy {
        self.policy
    }

    pub fn quad_nodes(&self) -> usize {
        self.rule.len()
    }

    pub fn rule(&self) -> &GaussRule {
        &self.rule
    }

    /// `C_j^p = ∫ p(u)² e_j(u) du` for `j = 0..=M`.
    pub fn pdf_coeffs(&self) -> &[f64] {
        &self.pdf_coeffs
    }

    /// `1 + Σ_{k≤M} γ^k e_k(u) e_k(v)` before any clamping.
    pub fn bracket(&self, u: f64, v: f64, gamma: f64) -> f64 {
        if gamma == 0.0 {
            return 1.0;
        }
        let width = self.truncation + 1;
        let mut eu = vec![0.0; width];
        let mut ev = vec![0.0; width];
        self.basis.eval_into(u, &mut eu);
        self.basis.eval_into(v, &mut ev);
        let mut g = 1.0;
        let mut acc = 1.0;
        for k in 1..width {
            g *= gamma;
            acc += g * eu[k] * ev[k];
        }
        acc
    }

    /// Truncated bivariate density at correlation `gamma`.
    pub fn density(&self, u: f64, v: f64, gamma: f64) -> Result<f64, LsError> {
        self.density_at(u, v, gamma, None)
    }

    pub(crate) fn density_at(&self, u: f64, v: f64, gamma: f64, r: Option<f64>) -> Result<f64, LsError> {
        let marginal = self.basis.marginal();
        for x in [u, v] {
            if !marginal.contains(x) {
                let (lo, hi) = marginal.support();
                return Err(crate::polybasis::BasisError::OutsideSupport { x, lo, hi }.into());
            }
        }
        let base = marginal.pdf(u) * marginal.pdf(v);
        if gamma == 0.0 {
            return Ok(base);
        }
        let b = self.bracket(u, v, gamma);
        let b = match self.policy {
            NegativityPolicy::ClampFloor { eps } => b.max(eps),
            NegativityPolicy::Reject if b < 0.0 => {
                return Err(LsError::NegativeDensity {
                    u,
                    v,
                    gamma,
                    r,
                    value: b,
                })
            }
            NegativityPolicy::Reject => b,
        };
        Ok(base * b)
    }

    /// Visits every node pair with `(w_i w_j, B - 1, B_clamped - 1)`. The
    /// deviation is accumulated without the leading 1 so it keeps full
    /// relative precision when `γ` is tiny.
    fn for_each_pair(
        &self,
        gamma: f64,
        r: Option<f64>,
        mut visit: impl FnMut(f64, f64, f64),
    ) -> Result<(), LsError> {
        let width = self.truncation + 1;
        let n = self.rule.len();
        let mut scaled = vec![0.0; width];
        for i in 0..n {
            let wi = self.rule.weights[i];
            if wi == 0.0 {
                continue;
            }
            let ei = &self.etab[i * width..(i + 1) * width];
            let mut g = 1.0;
            for k in 1..width {
                g *= gamma;
                scaled[k] = g * ei[k];
            }
            for j in 0..n {
                let wj = self.rule.weights[j];
                if wj == 0.0 {
                    continue;
                }
                let ej = &self.etab[j * width..(j + 1) * width];
                let mut dev = 0.0;
                for k in 1..width {
                    dev += scaled[k] * ej[k];
                }
                let dev_c = match self.policy {
                    NegativityPolicy::ClampFloor { eps } => dev.max(eps - 1.0),
                    NegativityPolicy::Reject if dev < -1.0 => {
                        return Err(LsError::NegativeDensity {
                            u: self.rule.nodes[i],
                            v: self.rule.nodes[j],
                            gamma,
                            r,
                            value: 1.0 + dev,
                        })
                    }
                    NegativityPolicy::Reject => dev,
                };
                visit(wi * wj, dev, dev_c);
            }
        }
        Ok(())
    }

    /// Shannon mutual information of the truncated density.
    ///
    /// The integrand `B ln B` is summed as `h(B_c - 1) + (B_c - B)` with
    /// `h(x) = (1+x)ln(1+x) - x`: the linear part `Σ w (B - 1)` vanishes by
    /// orthonormality, and dropping it keeps relative accuracy at small `γ`.
    pub fn shannon_mi(&self, gamma: f64) -> Result<MiValue, LsError> {
        self.shannon_mi_at(gamma, None)
    }

    pub(crate) fn shannon_mi_at(&self, gamma: f64, r: Option<f64>) -> Result<MiValue, LsError> {
        if gamma == 0.0 {
            return Ok(MiValue {
                value: 0.0,
                clamped_mass: 0.0,
            });
        }
        let mut acc = 0.0;
        let mut clamped = 0.0;
        self.for_each_pair(gamma, r, |w, dev, dev_c| {
            acc += w * xlogx_excess(dev_c);
            clamped += w * (dev_c - dev);
        })?;
        Ok(MiValue {
            value: acc + clamped,
            clamped_mass: clamped,
        })
    }

    /// Rényi mutual information of order `q` of the truncated density.
    pub fn renyi_mi(&self, gamma: f64, q: f64) -> Result<MiValue, LsError> {
        self.renyi_mi_at(gamma, q, None)
    }

    pub(crate) fn renyi_mi_at(&self, gamma: f64, q: f64, r: Option<f64>) -> Result<MiValue, LsError> {
        if !(q > 0.0 && q.is_finite() && q != 1.0) {
            return Err(LsError::InvalidOrder(q));
        }
        if gamma == 0.0 {
            return Ok(MiValue {
                value: 0.0,
                clamped_mass: 0.0,
            });
        }
        let mut acc = 0.0;
        let mut clamped = 0.0;
        self.for_each_pair(gamma, r, |w, dev, dev_c| {
            acc += w * pow_excess(dev_c, q);
            clamped += w * (dev_c - dev);
        })?;
        Ok(MiValue {
            value: (acc + q * clamped).ln_1p() / (q - 1.0),
            clamped_mass: clamped,
        })
    }

    /// Mutual information of order `q`; `q = 1` is Shannon.
    pub fn mi_of_order(&self, gamma: f64, q: f64) -> Result<MiValue, LsError> {
        if q == 1.0 {
            self.shannon_mi(gamma)
        } else {
            self.renyi_mi(gamma, q)
        }
    }

    fn check_nondegenerate(gamma: f64) -> Result<(), LsError> {
        if gamma.abs() < 1.0 {
            Ok(())
        } else {
            Err(LsError::Degenerate(gamma))
        }
    }

    /// `Σ_{j≤M} γ^j (C_j^p)² + Σ_{i≤M} γ^{2i}`.
    pub fn shannon_series(&self, gamma: f64) -> Result<f64, LsError> {
        Self::check_nondegenerate(gamma)?;
        let mut acc = 0.0;
        let mut g = 1.0;
        for j in 1..=self.truncation {
            g *= gamma;
            acc += g * self.pdf_coeffs[j].powi(2) + g * g;
        }
        Ok(acc)
    }

    /// `(lower, upper)` from the extreme squared coefficients `(C_j^p)²`, `1 ≤ j ≤ M`.
    pub fn bounds(&self, gamma: f64) -> Result<(f64, f64), LsError> {
        Self::check_nondegenerate(gamma)?;
        let squares = self.pdf_coeffs[1..].iter().map(|c| c * c);
        let max = squares.clone().fold(0.0, f64::max);
        let min = squares.fold(f64::INFINITY, f64::min);
        let geometric = gamma / (1.0 - gamma);
        let upper = max * geometric + gamma * gamma / (1.0 - gamma * gamma);
        let lower = min * geometric;
        Ok((lower, upper))
    }

    /// Rényi mutual information of integer order `q ≥ 2` from the expansion
    ///
    /// ```text
    /// ∬ [1 + Q]^q p p = 1 + Σ_{j=2..q} C(q, j) S_j(γ),
    /// S_j(γ) = Σ_{k ∈ {1..M}^j} γ^{k_1+…+k_j} (E_p[e_{k_1} ⋯ e_{k_j}])²
    /// ```
    ///
    /// (`S_1 = 0` by orthonormality). The moments are computed once per order
    /// and cached as polynomial coefficients of `S_j`.
    pub fn renyi_multinomial(&self, gamma: f64, q: f64) -> Result<f64, LsError> {
        if !(q >= 2.0 && q.fract() == 0.0 && q.is_finite()) {
            return Err(LsError::NonIntegerOrder(q));
        }
        let cost = q * (self.truncation as f64).powf(q);
        if cost > MULTINOMIAL_COST_LIMIT {
            return Err(LsError::CostGuard {
                cost,
                limit: MULTINOMIAL_COST_LIMIT,
            });
        }
        if gamma == 0.0 {
            return Ok(0.0);
        }
        let q_int = q as usize;
        let mut total = 0.0;
        for j in 2..=q_int {
            let coeffs = self.moment_polynomial(j);
            // Horner in γ; coeffs[s] multiplies γ^s
            let s_j = coeffs.iter().rev().fold(0.0, |acc, c| acc * gamma + c);
            total += binomial(q_int, j) * s_j;
        }
        Ok(total.ln_1p() / (q - 1.0))
    }

    fn moment_polynomial(&self, j: usize) -> Arc<Vec<f64>> {
        if let Some(c) = self.moment_cache.lock().expect("moment cache").get(&j) {
            return Arc::clone(c);
        }
        let m = self.truncation;
        let width = m + 1;
        let mut coeffs = vec![0.0; j * m + 1];
        let mut index = vec![1usize; j];
        let ln_j_fact = ln_factorial(j);
        loop {
            // number of distinct orderings of this nondecreasing multi-index
            let mut ln_count = ln_j_fact;
            let mut run = 1;
            for t in 1..=j {
                if t < j && index[t] == index[t - 1] {
                    run += 1;
                } else {
                    ln_count -= ln_factorial(run);
                    run = 1;
                }
            }
            let mut moment = 0.0;
            for (i, &w) in self.rule.weights.iter().enumerate() {
                let row = &self.etab[i * width..(i + 1) * width];
                moment += w * index.iter().map(|&k| row[k]).product::<f64>();
            }
            let degree: usize = index.iter().sum();
            coeffs[degree] += ln_count.exp() * moment * moment;

            // next nondecreasing multi-index
            let mut t = j;
            while t > 0 && index[t - 1] == m {
                t -= 1;
            }
            if t == 0 {
                break;
            }
            let next = index[t - 1] + 1;
            for slot in &mut index[t - 1..] {
                *slot = next;
            }
        }
        let coeffs = Arc::new(coeffs);
        self.moment_cache
            .lock()
            .expect("moment cache")
            .entry(j)
            .or_insert(coeffs)
            .clone()
    }
}
