use serde::{Deserialize, Serialize};
use thiserror::Error;

/// MI values at or below this are treated as underflow by the slope fit.
pub const UNDERFLOW_FLOOR: f64 = 1e-300;

const MIN_FIT_POINTS: usize = 3;

/// Which information quantity a curve tracks.
#[derive(Debug, Clone, PartialEq)]
pub enum MiVariant {
    /// Shannon MI of the field values, with lower and upper bound curves.
    Shannon,
    /// Rényi MI of order `q` of the field values.
    Renyi(f64),
    /// Shannon (`q = None`) or Rényi MI of a finite-state transform.
    Subordinated(Option<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub stderr: f64,
    pub r_squared: f64,
    /// Distances actually used, `[lo, hi]`.
    pub window: [f64; 2],
    pub points: usize,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FitError {
    #[error("insufficient positive points: {found} in window, need {required}")]
    InsufficientPoints { found: usize, required: usize },
    #[error("window [{lo}, {hi}] does not overlap the data")]
    WindowOutsideData { lo: f64, hi: f64 },
    #[error("distances and values differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
}

/// A mutual-information curve over distances.
#[derive(Debug, Clone, PartialEq)]
pub struct MICurve {
    pub distances: Vec<f64>,
    /// Correlation `γ(d)` at each distance.
    pub correlations: Vec<f64>,
    pub mi: Vec<f64>,
    pub lower: Option<Vec<f64>>,
    pub upper: Option<Vec<f64>>,
    /// Probability mass added by the negativity clamp at each distance.
    pub clamped_mass: Option<Vec<f64>>,
    pub slope_fit: Result<SlopeFit, FitError>,
    pub warnings: Vec<String>,
}

/// Least-squares slope of `ln value` against `ln distance` over `window`.
///
/// Points with `value <= UNDERFLOW_FLOOR` at the far end of the window are
/// dropped and a warning is returned; non-positive values elsewhere are
/// skipped the same way. Needs at least three usable points.
pub fn fit_loglog_slope(
    distances: &[f64],
    values: &[f64],
    window: (f64, f64),
) -> Result<(SlopeFit, Vec<String>), FitError> {
    fit_loglog_slope_min(distances, values, window, MIN_FIT_POINTS)
}

pub(crate) fn fit_loglog_slope_min(
    distances: &[f64],
    values: &[f64],
    window: (f64, f64),
    min_points: usize,
) -> Result<(SlopeFit, Vec<String>), FitError> {
    if distances.len() != values.len() {
        return Err(FitError::LengthMismatch(distances.len(), values.len()));
    }
    let (lo, hi) = window;
    let in_window: Vec<usize> = (0..distances.len())
        .filter(|&i| distances[i] >= lo && distances[i] <= hi)
        .collect();
    if in_window.is_empty() {
        return Err(FitError::WindowOutsideData { lo, hi });
    }
    let mut warnings = Vec::new();
    let mut used = in_window.clone();
    while let Some(&last) = used.last() {
        if values[last] > UNDERFLOW_FLOOR {
            break;
        }
        used.pop();
    }
    if used.len() < in_window.len() {
        let new_hi = used.last().map(|&i| distances[i]).unwrap_or(lo);
        warnings.push(format!(
            "MI underflows below {UNDERFLOW_FLOOR:e} near the window end; window shrunk to [{lo}, {new_hi}]"
        ));
    }
    let before = used.len();
    used.retain(|&i| values[i] > UNDERFLOW_FLOOR && distances[i] > 0.0);
    if used.len() < before {
        warnings.push(format!(
            "{} non-positive MI values inside the window were skipped",
            before - used.len()
        ));
    }
    if used.len() < min_points {
        return Err(FitError::InsufficientPoints {
            found: used.len(),
            required: min_points,
        });
    }
    let x: Vec<f64> = used.iter().map(|&i| distances[i].ln()).collect();
    let y: Vec<f64> = used.iter().map(|&i| values[i].ln()).collect();
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(FitError::InsufficientPoints {
            found: 1,
            required: min_points,
        });
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = x
        .iter()
        .zip(&y)
        .map(|(a, b)| (b - intercept - slope * a).powi(2))
        .sum();
    let stderr = (sse / (n - 2.0) / sxx).sqrt();
    let r_squared = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
    let fit = SlopeFit {
        slope,
        intercept,
        stderr,
        r_squared,
        window: [distances[used[0]], distances[*used.last().expect("non-empty")]],
        points: used.len(),
    };
    Ok((fit, warnings))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power_law() {
        let d: Vec<f64> = (1..=50).map(|i| i as f64 * 10.0).collect();
        let v: Vec<f64> = d.iter().map(|x| 3.0 * x.powf(-2.5)).collect();
        let (fit, warnings) = fit_loglog_slope(&d, &v, (100.0, 500.0)).unwrap();
        assert!((fit.slope + 2.5).abs() < 1e-12);
        assert!((fit.intercept - 3f64.ln()).abs() < 1e-10);
        assert!(fit.stderr < 1e-10);
        assert!(warnings.is_empty());
    }

    #[test]
    fn underflow_shrinks_window() {
        let d: Vec<f64> = (1..=10).map(|i| i as f64).collect();
        let mut v: Vec<f64> = d.iter().map(|x| x.powi(-2)).collect();
        v[8] = 0.0;
        v[9] = 0.0;
        let (fit, warnings) = fit_loglog_slope(&d, &v, (1.0, 10.0)).unwrap();
        assert_eq!(fit.window, [1.0, 8.0]);
        assert_eq!(warnings.len(), 1);
    }

    #[test]
    fn all_zero_is_an_error() {
        let d = [1.0, 2.0, 3.0, 4.0];
        assert!(matches!(
            fit_loglog_slope(&d, &[0.0; 4], (1.0, 4.0)),
            Err(FitError::InsufficientPoints { .. })
        ));
        assert!(matches!(
            fit_loglog_slope(&d, &[1.0; 4], (10.0, 40.0)),
            Err(FitError::WindowOutsideData { .. })
        ));
    }
}
