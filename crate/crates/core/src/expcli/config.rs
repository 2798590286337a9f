use crate::covmodels::{CorrelationFamily, CorrelationModel, GneitingCovariance};
use crate::fieldsim::{GridSpec, SimMethod};
use crate::lsmodel::{NegativityPolicy, Subordinator};
use crate::polybasis::MarginalDensity;
use crate::stfunctional::TimeBasis;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    MiCurve,
    RenyiCurve,
    SubordinatedCurve,
    FieldSim,
    StSurface,
    SlopeReport,
}

impl Scenario {
    pub fn name(&self) -> &'static str {
        match self {
            Scenario::MiCurve => "mi_curve",
            Scenario::RenyiCurve => "renyi_curve",
            Scenario::SubordinatedCurve => "subordinated_curve",
            Scenario::FieldSim => "field_sim",
            Scenario::StSurface => "st_surface",
            Scenario::SlopeReport => "slope_report",
        }
    }

    fn is_curve(&self) -> bool {
        matches!(self, Scenario::MiCurve | Scenario::RenyiCurve | Scenario::SubordinatedCurve)
    }
}

/// Scalar LS model: marginal, spatial correlation and truncation order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelBlock {
    pub marginal: MarginalDensity,
    pub correlation: CorrelationFamily,
    #[serde(default = "default_dim")]
    pub dim: usize,
    pub truncation: usize,
    #[serde(default)]
    pub quad_nodes: Option<usize>,
    #[serde(default)]
    pub policy: Option<NegativityPolicy>,
}

fn default_dim() -> usize {
    2
}

/// A sorted list of points, given explicitly or generated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PointSpec {
    Explicit { values: Vec<f64> },
    /// `start, start + step, ...` up to and including `stop`.
    Range { start: f64, stop: f64, step: f64 },
    /// `count` points geometrically spaced from `start` to `stop`.
    LogSpaced { start: f64, stop: f64, count: usize },
}

const MAX_POINTS: usize = 1_000_000;

impl PointSpec {
    pub fn points(&self) -> Result<Vec<f64>, String> {
        let pts = match self {
            PointSpec::Explicit { values } => values.clone(),
            PointSpec::Range { start, stop, step } => {
                if !(step.is_finite() && *step > 0.0 && start.is_finite() && stop.is_finite()) {
                    return Err(format!("range needs finite bounds and a positive step (step = {step})"));
                }
                let n = ((stop - start) / step + 1e-9).floor();
                if n < 0.0 || n >= MAX_POINTS as f64 {
                    return Err(format!("range [{start}, {stop}] by {step} is empty or too long"));
                }
                (0..=n as usize).map(|i| start + i as f64 * step).collect()
            }
            PointSpec::LogSpaced { start, stop, count } => {
                if !(*start > 0.0 && stop > start && stop.is_finite()) || *count < 2 || *count > MAX_POINTS {
                    return Err(format!(
                        "log spacing needs 0 < start < stop and 2..={MAX_POINTS} points"
                    ));
                }
                let ratio = (stop / start).ln();
                (0..*count)
                    .map(|i| {
                        if i + 1 == *count {
                            *stop
                        } else {
                            start * (ratio * i as f64 / (*count - 1) as f64).exp()
                        }
                    })
                    .collect()
            }
        };
        if pts.is_empty() {
            return Err("point list is empty".into());
        }
        if pts.iter().any(|d| !d.is_finite() || *d < 0.0) {
            return Err("points must be finite and non-negative".into());
        }
        if pts.windows(2).any(|w| w[1] <= w[0]) {
            return Err("points must be strictly increasing".into());
        }
        Ok(pts)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RenyiMethod {
    #[default]
    Quadrature,
    Multinomial,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldBlock {
    pub grid: GridSpec,
    #[serde(default = "default_method")]
    pub method: SimMethod,
    pub replicates: usize,
    #[serde(default = "default_dof")]
    pub chi2_dof: usize,
    #[serde(default = "default_nu")]
    pub nu: f64,
    /// Largest lag (in cells along the last axis) of the correlation table.
    pub max_lag: usize,
    #[serde(default = "yes")]
    pub export_first: bool,
}

fn default_method() -> SimMethod {
    SimMethod::Auto
}

fn default_dof() -> usize {
    10
}

fn default_nu() -> f64 {
    0.95
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StSimBlock {
    pub space: GridSpec,
    pub times: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StBlock {
    pub covariance: GneitingCovariance,
    pub t_max: f64,
    pub basis_count: usize,
    #[serde(default = "default_st_truncation")]
    pub truncation: usize,
    #[serde(default)]
    pub time_nodes: Option<usize>,
    pub mesh: PointSpec,
    #[serde(default)]
    pub simulate: Option<StSimBlock>,
}

fn default_st_truncation() -> usize {
    10
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpectedOrder {
    pub label: String,
    pub order: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SlopeBlock {
    /// Curve CSV to read (slope_report only); relative paths resolve
    /// against the config file's directory.
    #[serde(default)]
    pub input_csv: Option<String>,
    #[serde(default = "default_column")]
    pub column: String,
    pub window: [f64; 2],
    #[serde(default)]
    pub expected: Vec<ExpectedOrder>,
    /// Relative tolerance on the slope.
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default = "default_min_points")]
    pub min_points: usize,
}

fn default_column() -> String {
    "mi".into()
}

fn default_tolerance() -> f64 {
    0.05
}

fn default_min_points() -> usize {
    10
}

/// One experiment run, read from a JSON document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub scenario: Scenario,
    #[serde(default)]
    pub description: Option<String>,
    #[serde(default)]
    pub model: Option<ModelBlock>,
    #[serde(default)]
    pub distances: Option<PointSpec>,
    #[serde(default)]
    pub q: Vec<f64>,
    #[serde(default)]
    pub renyi_method: RenyiMethod,
    #[serde(default)]
    pub subordinator: Option<Subordinator>,
    /// Attach bound curves to Shannon curves.
    #[serde(default)]
    pub bounds: bool,
    #[serde(default)]
    pub seed: u64,
    pub output_dir: String,
    #[serde(default)]
    pub fit_window: Option<[f64; 2]>,
    #[serde(default)]
    pub field: Option<FieldBlock>,
    #[serde(default)]
    pub st: Option<StBlock>,
    #[serde(default)]
    pub slope: Option<SlopeBlock>,
    #[serde(default)]
    pub budget_seconds: Option<f64>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, String> {
        serde_json::from_str(text).map_err(|e| e.to_string())
    }

    /// Every violated precondition, in a stable order; empty when valid.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if self.name.trim().is_empty() {
            v.push("name: must not be empty".to_string());
        }
        if self.output_dir.trim().is_empty() {
            v.push("output_dir: must not be empty".to_string());
        }
        if let Some(b) = self.budget_seconds {
            if !(b > 0.0) {
                v.push(format!("budget_seconds: must be positive (got {b})"));
            }
        }
        let s = self.scenario;
        if s.is_curve() {
            self.check_curve(&mut v);
        }
        match s {
            Scenario::FieldSim => self.check_field(&mut v),
            Scenario::StSurface => self.check_st(&mut v),
            Scenario::SlopeReport => match &self.slope {
                None => v.push("slope: required for slope_report".into()),
                Some(b) if b.input_csv.is_none() => v.push("slope.input_csv: required for slope_report".into()),
                Some(_) => {}
            },
            _ => {}
        }
        if let Some(b) = &self.slope {
            check_slope(b, &mut v);
            if !matches!(s, Scenario::SlopeReport) && b.input_csv.is_some() {
                v.push("slope.input_csv: only used by slope_report".into());
            }
            if matches!(s, Scenario::FieldSim | Scenario::StSurface) {
                v.push(format!("slope: not supported by {}", s.name()));
            }
        }
        v
    }

    fn check_curve(&self, v: &mut Vec<String>) {
        match &self.model {
            None => v.push("model: required for curve scenarios".into()),
            Some(m) => check_model(m, v),
        }
        let distances = match &self.distances {
            None => {
                v.push("distances: required for curve scenarios".into());
                None
            }
            Some(d) => match d.points() {
                Ok(p) => Some(p),
                Err(e) => {
                    v.push(format!("distances: {e}"));
                    None
                }
            },
        };
        if let Some([lo, hi]) = self.fit_window {
            if !(lo > 0.0 && hi > lo) {
                v.push(format!("fit_window: needs 0 < lo < hi (got [{lo}, {hi}])"));
            } else if let Some(d) = &distances {
                if hi < d[0] || lo > d[d.len() - 1] {
                    v.push(format!("fit_window: [{lo}, {hi}] lies outside the distances"));
                }
            }
        }
        for q in &self.q {
            if !(q.is_finite() && *q > 0.0 && *q != 1.0) {
                v.push(format!("q: order {q} must be positive and different from 1"));
            }
        }
        match self.scenario {
            Scenario::RenyiCurve if self.q.is_empty() => v.push("q: at least one order is needed".into()),
            Scenario::MiCurve if !self.q.is_empty() => v.push("q: not used by mi_curve".into()),
            _ => {}
        }
        if self.renyi_method == RenyiMethod::Multinomial {
            if self.scenario != Scenario::RenyiCurve {
                v.push("renyi_method: multinomial only applies to renyi_curve".into());
            }
            for q in &self.q {
                if q.fract() != 0.0 || *q < 2.0 {
                    v.push(format!("q: multinomial needs integer orders >= 2 (got {q})"));
                }
            }
        }
        match (self.scenario, &self.subordinator) {
            (Scenario::SubordinatedCurve, None) => v.push("subordinator: required for subordinated_curve".into()),
            (Scenario::SubordinatedCurve, Some(_)) => {}
            (_, Some(_)) => v.push("subordinator: only used by subordinated_curve".into()),
            _ => {}
        }
        if self.bounds && (self.scenario == Scenario::RenyiCurve || !self.q.is_empty()) {
            v.push("bounds: only available for Shannon curves".into());
        }
    }

    fn check_field(&self, v: &mut Vec<String>) {
        let Some(f) = &self.field else {
            v.push("field: required for field_sim".into());
            return;
        };
        match &self.model {
            None => v.push("model: required for field_sim (its correlation is simulated)".into()),
            Some(m) => {
                if let Err(e) = CorrelationModel::new(m.correlation.clone(), f.grid.dim()) {
                    v.push(format!("model.correlation: {e}"));
                }
            }
        }
        if let Err(e) = f.grid.validate() {
            v.push(format!("field.grid: {e}"));
        }
        if f.replicates < 2 {
            v.push(format!("field.replicates: need at least 2 (got {})", f.replicates));
        }
        if f.chi2_dof < 2 || f.chi2_dof % 2 != 0 {
            v.push(format!("field.chi2_dof: must be an even integer >= 2 (got {})", f.chi2_dof));
        }
        if !f.nu.is_finite() {
            v.push("field.nu: must be finite".into());
        }
        let last = f.grid.sizes.last().copied().unwrap_or(0);
        if f.max_lag == 0 || f.max_lag >= last.max(1) {
            v.push(format!("field.max_lag: must be in 1..{last}"));
        }
        if self.distances.is_some() || !self.q.is_empty() || self.subordinator.is_some() {
            v.push("distances/q/subordinator: not used by field_sim".into());
        }
    }

    fn check_st(&self, v: &mut Vec<String>) {
        let Some(st) = &self.st else {
            v.push("st: required for st_surface".into());
            return;
        };
        if let Err(e) = st.covariance.validate() {
            v.push(format!("st.covariance: {e}"));
        }
        if let Err(e) = TimeBasis::cosine(st.t_max, st.basis_count) {
            v.push(format!("st: {e}"));
        }
        if st.truncation == 0 {
            v.push("st.truncation: must be at least 1".into());
        }
        if let Some(n) = st.time_nodes {
            if n < 2 {
                v.push(format!("st.time_nodes: need at least 2 (got {n})"));
            }
        }
        match st.mesh.points() {
            Err(e) => v.push(format!("st.mesh: {e}")),
            Ok(p) => {
                if p.iter().any(|&t| t > st.t_max) {
                    v.push(format!("st.mesh: points must lie in [0, {}]", st.t_max));
                }
            }
        }
        match &self.distances {
            None => v.push("distances: required for st_surface".into()),
            Some(d) => {
                if let Err(e) = d.points() {
                    v.push(format!("distances: {e}"));
                }
            }
        }
        if let Some(sim) = &st.simulate {
            if let Err(e) = sim.space.validate() {
                v.push(format!("st.simulate.space: {e}"));
            }
            if sim.times.is_empty() || sim.times.iter().any(|t| !t.is_finite()) {
                v.push("st.simulate.times: must be non-empty and finite".into());
            }
            let points = sim.space.len() * sim.times.len();
            if points > crate::stfunctional::ST_CHOLESKY_CAP {
                v.push(format!(
                    "st.simulate: {points} space-time points exceed {}; thin the grid",
                    crate::stfunctional::ST_CHOLESKY_CAP
                ));
            }
        }
        if self.model.is_some() || !self.q.is_empty() || self.subordinator.is_some() {
            v.push("model/q/subordinator: not used by st_surface".into());
        }
    }
}

fn check_model(m: &ModelBlock, v: &mut Vec<String>) {
    if let Err(e) = m.marginal.validate() {
        v.push(format!("model.marginal: {e}"));
    }
    if let Err(e) = CorrelationModel::new(m.correlation.clone(), m.dim) {
        v.push(format!("model.correlation: {e}"));
    }
    if m.truncation == 0 {
        v.push("model.truncation: must be at least 1".into());
    }
    if let Some(n) = m.quad_nodes {
        if n < m.truncation + 1 {
            v.push(format!("model.quad_nodes: need at least {} (got {n})", m.truncation + 1));
        }
    }
    if let Some(NegativityPolicy::ClampFloor { eps }) = m.policy {
        if !(eps > 0.0 && eps < 1.0) {
            v.push(format!("model.policy.eps: must lie in (0, 1) (got {eps})"));
        }
    }
}

fn check_slope(b: &SlopeBlock, v: &mut Vec<String>) {
    let [lo, hi] = b.window;
    if !(lo > 0.0 && hi > lo) {
        v.push(format!("slope.window: needs 0 < lo < hi (got [{lo}, {hi}])"));
    }
    if !(b.tolerance > 0.0) {
        v.push(format!("slope.tolerance: must be positive (got {})", b.tolerance));
    }
    if b.min_points < 3 {
        v.push(format!("slope.min_points: need at least 3 (got {})", b.min_points));
    }
    if b.column.is_empty() {
        v.push("slope.column: must not be empty".into());
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn point_specs() {
        let r = PointSpec::Range {
            start: 1.0,
            stop: 1000.0,
            step: 1.0,
        };
        let p = r.points().unwrap();
        assert_eq!((p.len(), p[0], p[999]), (1000, 1.0, 1000.0));
        let l = PointSpec::LogSpaced {
            start: 100.0,
            stop: 3000.0,
            count: 41,
        };
        let p = l.points().unwrap();
        assert_eq!((p.len(), p[0], p[40]), (41, 100.0, 3000.0));
        assert!(PointSpec::Explicit { values: vec![] }.points().is_err());
        assert!(PointSpec::Explicit { values: vec![2.0, 1.0] }.points().is_err());
        assert!(PointSpec::Range {
            start: 1.0,
            stop: 2.0,
            step: 0.0
        }
        .points()
        .is_err());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = ExperimentConfig::from_json(r#"{"name":"x","scenario":"mi_curve","output_dir":"o","colour":1}"#)
            .unwrap_err();
        assert!(err.contains("colour"));
    }

    #[test]
    fn all_violations_are_listed() {
        let cfg = ExperimentConfig::from_json(
            r#"{"name":"","scenario":"renyi_curve","output_dir":"o",
                "distances":{"kind":"explicit","values":[]},"q":[1.0]}"#,
        )
        .unwrap();
        let v = cfg.violations();
        assert!(v.iter().any(|s| s.starts_with("name")));
        assert!(v.iter().any(|s| s.starts_with("model")));
        assert!(v.iter().any(|s| s.starts_with("distances")));
        assert!(v.iter().any(|s| s.starts_with("q")));
    }
}
