//! Scalar special functions shared across the crate.

use libm::erfc;
use statrs::function::gamma::ln_gamma as statrs_ln_gamma;
use std::f64::consts::SQRT_2;

/// `1/sqrt(2π)`
pub const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Standard normal density.
#[inline]
pub fn norm_pdf(x: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * x * x).exp()
}

/// Standard normal distribution function, accurate in both tails.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / SQRT_2)
}

/// Standard normal survival (decumulative) function `1 - Φ(x)`.
pub fn norm_sf(x: f64) -> f64 {
    0.5 * erfc(x / SQRT_2)
}

pub fn ln_gamma(x: f64) -> f64 {
    statrs_ln_gamma(x)
}

/// `ln(k!)`, exact summation for small `k`.
pub fn ln_factorial(k: usize) -> f64 {
    if k < 30 {
        (2..=k).map(|i| (i as f64).ln()).sum()
    } else {
        statrs_ln_gamma(k as f64 + 1.0)
    }
}

/// `(1+x) ln(1+x) - x`, the per-cell Shannon contribution relative to
/// the independent reference. Accurate for small `|x|`; `x = -1` maps to 1.
pub fn xlogx_excess(x: f64) -> f64 {
    if x.abs() < 1e-3 {
        // sum_{n>=2} (-1)^n x^n / (n (n-1))
        let mut term = x * x;
        let mut acc = 0.0;
        for n in 2..10 {
            let nf = n as f64;
            let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
            acc += sign * term / (nf * (nf - 1.0));
            term *= x;
        }
        acc
    } else if x <= -1.0 {
        1.0
    } else {
        (1.0 + x) * x.ln_1p() - x
    }
}

/// `(1+x)^q - 1 - q x`, the Rényi counterpart of [`xlogx_excess`].
pub fn pow_excess(x: f64, q: f64) -> f64 {
    if x.abs() < 1e-3 {
        // generalized binomial tail sum_{n>=2} C(q,n) x^n
        let mut coeff = q * (q - 1.0) / 2.0;
        let mut term = x * x;
        let mut acc = 0.0;
        for n in 2..10 {
            acc += coeff * term;
            let nf = n as f64;
            coeff *= (q - nf) / (nf + 1.0);
            term *= x;
        }
        acc
    } else if x <= -1.0 {
        // (1+x)^q vanishes for q > 0
        -1.0 - q * x
    } else {
        (q * x.ln_1p()).exp_m1() - q * x
    }
}

/// Binomial coefficient as a float.
pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc = 1.0;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc
}
