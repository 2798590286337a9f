use super::csv::{fmt_num, Table};
use super::ExpError;
use super::config::ExpectedOrder;
use crate::lsmodel::{FitError, SlopeFit};
use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlopeCheck {
    pub label: String,
    pub expected: f64,
    pub rel_error: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlopeReport {
    pub column: String,
    pub fit: SlopeFit,
    pub tolerance: f64,
    pub checks: Vec<SlopeCheck>,
    pub warnings: Vec<String>,
}

impl SlopeReport {
    /// True when every declared order is met (vacuously true without any).
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn to_text(&self) -> String {
        let f = &self.fit;
        let mut out = format!(
            "column {}: slope {} (stderr {}, R² {}) over [{}, {}] with {} points\n",
            self.column,
            fmt_num(f.slope),
            fmt_num(f.stderr),
            fmt_num(f.r_squared),
            fmt_num(f.window[0]),
            fmt_num(f.window[1]),
            f.points
        );
        for c in &self.checks {
            out.push_str(&format!(
                "{}: expected {}, relative error {} -> {}\n",
                c.label,
                fmt_num(c.expected),
                fmt_num(c.rel_error),
                if c.pass { "PASS" } else { "FAIL" }
            ));
        }
        for w in &self.warnings {
            out.push_str(&format!("warning: {w}\n"));
        }
        out
    }

    /// `label,expected,measured,stderr,r_squared,rel_error,pass`; one row per
    /// declared order, or a single `fit` row.
    pub fn to_csv(&self) -> String {
        let f = &self.fit;
        let mut out = String::from("label,expected,measured,stderr,r_squared,rel_error,pass\n");
        let row = |label: &str, expected: f64, rel: f64, pass: &str| {
            format!(
                "{},{},{},{},{},{},{}\n",
                label.replace([',', '\n'], " "),
                fmt_num(expected),
                fmt_num(f.slope),
                fmt_num(f.stderr),
                fmt_num(f.r_squared),
                fmt_num(rel),
                pass
            )
        };
        if self.checks.is_empty() {
            out.push_str(&row("fit", f64::NAN, f64::NAN, "n/a"));
        }
        for c in &self.checks {
            out.push_str(&row(&c.label, c.expected, c.rel_error, if c.pass { "true" } else { "false" }));
        }
        out
    }
}

/// Log-log tail slope of `column` against the first column of `table` over
/// `window`, compared with each declared order at relative `tolerance`.
pub fn slope_report(
    table: &Table,
    column: &str,
    window: (f64, f64),
    expected: &[ExpectedOrder],
    tolerance: f64,
    min_points: usize,
) -> Result<SlopeReport, ExpError> {
    let d = table.column(&table.header[0]).ok_or_else(|| ExpError::Csv("CSV has no columns".into()))?;
    let v = table
        .column(column)
        .ok_or_else(|| ExpError::Csv(format!("column `{column}` not found in {:?}", table.header)))?;
    let (lo, hi) = window;
    let (dmin, dmax) = (d.iter().copied().fold(f64::INFINITY, f64::min), d.iter().copied().fold(0.0, f64::max));
    if !(lo < hi) || hi < dmin || lo > dmax {
        return Err(ExpError::Config {
            violations: vec![format!("window [{lo}, {hi}] lies outside the data range [{dmin}, {dmax}]")],
        });
    }
    let (fit, warnings) = crate::lsmodel::fit_loglog_slope_min(&d, &v, window, min_points).map_err(|e| match e {
        FitError::WindowOutsideData { lo, hi } => ExpError::Config {
            violations: vec![format!("window [{lo}, {hi}] does not overlap the data")],
        },
        e => ExpError::Fit(e),
    })?;
    let checks = expected
        .iter()
        .map(|e| {
            let rel_error = (fit.slope - e.order).abs() / e.order.abs();
            SlopeCheck {
                label: e.label.clone(),
                expected: e.order,
                rel_error,
                pass: rel_error <= tolerance,
            }
        })
        .collect();
    Ok(SlopeReport {
        column: column.to_string(),
        fit,
        tolerance,
        checks,
        warnings,
    })
}
