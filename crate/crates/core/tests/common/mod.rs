//! Independent reference values for the integration and acceptance tests.
#![allow(dead_code)]

use statrs::function::erf::erfc;
use std::f64::consts::{PI, SQRT_2};

pub fn phi(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

pub fn upper_tail(x: f64) -> f64 {
    0.5 * erfc(x / SQRT_2)
}

/// Composite Simpson rule with `n` (even) panels.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + i as f64 * h);
    }
    s * h / 3.0
}

/// `P(X > a, Y > b)` for a standard bivariate normal with correlation `c`,
/// by integrating the conditional tail `φ(x) P(Y > b | X = x)` over `x > a`.
pub fn orthant(a: f64, b: f64, c: f64) -> f64 {
    let s = (1.0 - c * c).sqrt();
    simpson(|x| phi(x) * upper_tail((b - c * x) / s), a, a.max(0.0) + 12.0, 20_000)
}

/// 2×2 exceedance table `[[P(<,<), P(<,>)], [P(>,<), P(>,>)]]` at threshold `nu`.
pub fn exceedance_table(nu: f64, c: f64) -> [f64; 4] {
    let both = orthant(nu, nu, c);
    let tail = upper_tail(nu);
    [1.0 - 2.0 * tail + both, tail - both, tail - both, both]
}

pub fn plugin_mi(p: &[f64], rows: usize, cols: usize) -> f64 {
    let r: Vec<f64> = (0..rows).map(|i| (0..cols).map(|j| p[i * cols + j]).sum()).collect();
    let c: Vec<f64> = (0..cols).map(|j| (0..rows).map(|i| p[i * cols + j]).sum()).collect();
    let mut acc = 0.0;
    for i in 0..rows {
        for j in 0..cols {
            let v = p[i * cols + j];
            if v > 0.0 {
                acc += v * (v / (r[i] * c[j])).ln();
            }
        }
    }
    acc
}

/// Closed-form Rényi divergence of order `q` between a standard bivariate
/// normal with correlation `c` and the product of its marginals.
pub fn gaussian_renyi_closed(c: f64, q: f64) -> f64 {
    let a = q / (1.0 + c) - q + 1.0;
    let b = q / (1.0 - c) - q + 1.0;
    let log_integral = -0.5 * q * (1.0 - c * c).ln() - 0.5 * (a * b).ln();
    log_integral / (q - 1.0)
}

pub fn gaussian_shannon(c: f64) -> f64 {
    -0.5 * (1.0 - c * c).ln()
}
