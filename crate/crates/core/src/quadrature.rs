//! Gauss rules for probability weights.
//!
//! Every rule here integrates against a *probability* measure: the weights
//! sum to one. Gauss–Hermite rules use the standard normal density as the
//! weight, Gauss–Laguerre rules the `Gamma(alpha + 1, 1)` density, and
//! Gauss–Legendre rules the uniform density on `[-1, 1]`.
//!
//! Nodes are seeded from the eigenvalues of the Jacobi matrix and then
//! polished by Newton's method on the orthonormal recurrence. Weights come
//! from the Christoffel–Darboux identity evaluated in log space, so rules
//! with hundreds of nodes (whose extreme weights are far below `f64::MIN`)
//! are produced without overflow.

use nalgebra::DMatrix;
use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

/// Nodes and probability weights of a quadrature rule.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussRule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `Σ w_i f(x_i)`
    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| if w == 0.0 { 0.0 } else { w * f(x) })
            .sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum RuleKey {
    Hermite(usize),
    Laguerre(usize, u64),
    Legendre(usize),
}

fn cache() -> &'static Mutex<HashMap<RuleKey, Arc<GaussRule>>> {
    static CACHE: OnceLock<Mutex<HashMap<RuleKey, Arc<GaussRule>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

fn cached(key: RuleKey, build: impl FnOnce() -> GaussRule) -> Arc<GaussRule> {
    if let Some(rule) = cache().lock().expect("rule cache poisoned").get(&key) {
        return Arc::clone(rule);
    }
    let rule = Arc::new(build());
    cache()
        .lock()
        .expect("rule cache poisoned")
        .entry(key)
        .or_insert(rule)
        .clone()
}

/// Gauss–Hermite rule for the standard normal density (probabilists' convention).
pub fn gauss_hermite(n: usize) -> Arc<GaussRule> {
    assert!(n >= 1, "quadrature needs at least one node");
    cached(RuleKey::Hermite(n), || {
        let mut rule = from_recurrence(n, |_| 0.0, |k| k as f64);
        // enforce exact symmetry so odd moments cancel to rounding
        for i in 0..n / 2 {
            let j = n - 1 - i;
            let x = 0.5 * (rule.nodes[j] - rule.nodes[i]);
            let w = 0.5 * (rule.weights[i] + rule.weights[j]);
            rule.nodes[i] = -x;
            rule.nodes[j] = x;
            rule.weights[i] = w;
            rule.weights[j] = w;
        }
        if n % 2 == 1 {
            rule.nodes[n / 2] = 0.0;
        }
        rule
    })
}

/// Gauss–Laguerre rule for the density `t^alpha e^{-t} / Γ(alpha + 1)` on `(0, ∞)`.
pub fn gauss_laguerre(n: usize, alpha: f64) -> Arc<GaussRule> {
    assert!(n >= 1, "quadrature needs at least one node");
    assert!(alpha > -1.0, "Laguerre parameter must exceed -1");
    cached(RuleKey::Laguerre(n, alpha.to_bits()), || {
        from_recurrence(
            n,
            |k| 2.0 * k as f64 + alpha + 1.0,
            |k| k as f64 * (k as f64 + alpha),
        )
    })
}

/// Gauss–Legendre rule for the uniform density on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> Arc<GaussRule> {
    assert!(n >= 1, "quadrature needs at least one node");
    cached(RuleKey::Legendre(n), || {
        let mut rule = from_recurrence(
            n,
            |_| 0.0,
            |k| {
                let k = k as f64;
                k * k / (4.0 * k * k - 1.0)
            },
        );
        for i in 0..n / 2 {
            let j = n - 1 - i;
            let x = 0.5 * (rule.nodes[j] - rule.nodes[i]);
            let w = 0.5 * (rule.weights[i] + rule.weights[j]);
            rule.nodes[i] = -x;
            rule.nodes[j] = x;
            rule.weights[i] = w;
            rule.weights[j] = w;
        }
        rule
    })
}

/// Gauss–Legendre nodes and (Lebesgue) weights mapped onto `[lo, hi]`.
pub fn legendre_on(n: usize, lo: f64, hi: f64) -> GaussRule {
    let base = gauss_legendre(n);
    let half = 0.5 * (hi - lo);
    let mid = 0.5 * (hi + lo);
    GaussRule {
        nodes: base.nodes.iter().map(|&t| mid + half * t).collect(),
        weights: base.weights.iter().map(|&w| 2.0 * half * w).collect(),
    }
}

/// Composite Gauss–Legendre integral of `f` over `[lo, hi]` with `panels`
/// equal panels of `order` nodes each.
pub fn composite_legendre<F: Fn(f64) -> f64>(
    f: F,
    lo: f64,
    hi: f64,
    panels: usize,
    order: usize,
) -> f64 {
    if !(hi > lo) {
        return 0.0;
    }
    let base = gauss_legendre(order);
    let width = (hi - lo) / panels as f64;
    let mut total = 0.0;
    for p in 0..panels {
        let a = lo + p as f64 * width;
        let mid = a + 0.5 * width;
        let mut part = 0.0;
        for (&t, &w) in base.nodes.iter().zip(&base.weights) {
            part += w * f(mid + 0.5 * width * t);
        }
        total += part * width;
    }
    total
}

/// Nodes and Lebesgue weights of a composite Gauss–Legendre rule on `[lo, hi]`.
pub fn composite_rule(lo: f64, hi: f64, panels: usize, order: usize) -> GaussRule {
    let base = gauss_legendre(order);
    let width = (hi - lo) / panels as f64;
    let mut nodes = Vec::with_capacity(panels * order);
    let mut weights = Vec::with_capacity(panels * order);
    for p in 0..panels {
        let mid = lo + (p as f64 + 0.5) * width;
        for (&t, &w) in base.nodes.iter().zip(&base.weights) {
            nodes.push(mid + 0.5 * width * t);
            weights.push(w * width);
        }
    }
    GaussRule { nodes, weights }
}

/// Trapezoid weights for an increasing, possibly non-uniform abscissa.
pub fn trapezoid_weights(nodes: &[f64]) -> Vec<f64> {
    let n = nodes.len();
    let mut w = vec![0.0; n];
    for i in 0..n.saturating_sub(1) {
        let h = nodes[i + 1] - nodes[i];
        w[i] += 0.5 * h;
        w[i + 1] += 0.5 * h;
    }
    w
}

/// Builds the rule for the monic recurrence
/// `p_{k+1} = (x - a_k) p_k - b_k p_{k-1}` with unit total mass.
fn from_recurrence(n: usize, a: impl Fn(usize) -> f64, b: impl Fn(usize) -> f64) -> GaussRule {
    if n == 1 {
        return GaussRule {
            nodes: vec![a(0)],
            weights: vec![1.0],
        };
    }
    let mut jacobi = DMatrix::<f64>::zeros(n, n);
    for k in 0..n {
        jacobi[(k, k)] = a(k);
        if k + 1 < n {
            let off = b(k + 1).sqrt();
            jacobi[(k, k + 1)] = off;
            jacobi[(k + 1, k)] = off;
        }
    }
    let mut seeds: Vec<f64> = jacobi.symmetric_eigenvalues().iter().copied().collect();
    seeds.sort_by(|x, y| x.partial_cmp(y).expect("finite eigenvalues"));

    let mut nodes = Vec::with_capacity(n);
    let mut log_weights = Vec::with_capacity(n);
    for &seed in &seeds {
        let mut x = seed;
        for _ in 0..8 {
            let eval = orthonormal_eval(n, x, &a, &b);
            let step = eval.value / eval.derivative;
            x -= step;
            if step.abs() <= 4.0 * f64::EPSILON * x.abs().max(1.0) {
                break;
            }
        }
        let eval = orthonormal_eval(n, x, &a, &b);
        // Σ_{k<n} q_k(x)^2 = sqrt(b_n) q_n'(x) q_{n-1}(x) at a root of q_n
        let log_sum = 0.5 * b(n).ln()
            + eval.derivative.abs().ln()
            + eval.previous.abs().ln()
            + 2.0 * eval.log_scale;
        nodes.push(x);
        log_weights.push(-log_sum);
    }
    let max_lw = log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let raw: Vec<f64> = log_weights.iter().map(|&lw| (lw - max_lw).exp()).collect();
    let total: f64 = raw.iter().sum();
    let weights = raw.iter().map(|&w| w / total).collect();
    GaussRule { nodes, weights }
}

struct OrthonormalEval {
    value: f64,
    derivative: f64,
    previous: f64,
    log_scale: f64,
}

/// Evaluates the degree-`n` orthonormal polynomial, its derivative and the
/// degree-`n-1` polynomial, all sharing the factor `exp(log_scale)`.
fn orthonormal_eval(
    n: usize,
    x: f64,
    a: &impl Fn(usize) -> f64,
    b: &impl Fn(usize) -> f64,
) -> OrthonormalEval {
    const BIG: f64 = 1e150;
    let mut q_prev = 0.0;
    let mut q = 1.0;
    let mut d_prev = 0.0;
    let mut d = 0.0;
    let mut log_scale = 0.0;
    for k in 0..n {
        let sb_next = b(k + 1).sqrt();
        let sb = if k == 0 { 0.0 } else { b(k).sqrt() };
        let q_next = ((x - a(k)) * q - sb * q_prev) / sb_next;
        let d_next = (q + (x - a(k)) * d - sb * d_prev) / sb_next;
        q_prev = q;
        q = q_next;
        d_prev = d;
        d = d_next;
        let mag = q.abs().max(d.abs()).max(q_prev.abs());
        if mag > BIG {
            q /= BIG;
            q_prev /= BIG;
            d /= BIG;
            d_prev /= BIG;
            log_scale += BIG.ln();
        }
    }
    OrthonormalEval {
        value: q,
        derivative: d,
        previous: q_prev,
        log_scale,
    }
}
