use super::curve::{fit_loglog_slope, MICurve, MiVariant};
use super::{LsEngine, LsError, NegativityPolicy, SubordinationSpec};
use crate::covmodels::CorrelationModel;
use crate::infotheory::JointPmf;
use crate::polybasis::{MarginalDensity, OrthonormalBasis};
use rayon::prelude::*;

/// A Lancaster–Sarmanov field model: marginal, basis, truncation and a
/// correlation model for the distance dependence.
#[derive(Debug, Clone)]
pub struct LsModel {
    engine: LsEngine,
    corr: CorrelationModel,
}

impl LsModel {
    pub fn new(engine: LsEngine, corr: CorrelationModel) -> Self {
        Self { engine, corr }
    }

    /// Basis of degree `truncation` for `marginal`, default nodes and policy.
    pub fn build(
        marginal: MarginalDensity,
        corr: CorrelationModel,
        truncation: usize,
    ) -> Result<Self, LsError> {
        let basis = OrthonormalBasis::new(marginal, truncation)?;
        Ok(Self::new(LsEngine::new(basis, truncation)?, corr))
    }

    pub fn with_options(
        marginal: MarginalDensity,
        corr: CorrelationModel,
        truncation: usize,
        quad_nodes: usize,
        policy: NegativityPolicy,
    ) -> Result<Self, LsError> {
        let basis = OrthonormalBasis::new(marginal, truncation)?;
        Ok(Self::new(
            LsEngine::with_options(basis, truncation, quad_nodes, policy)?,
            corr,
        ))
    }

    pub fn engine(&self) -> &LsEngine {
        &self.engine
    }

    pub fn correlation_model(&self) -> &CorrelationModel {
        &self.corr
    }

    pub fn marginal(&self) -> &MarginalDensity {
        self.engine.basis().marginal()
    }

    pub fn truncation(&self) -> usize {
        self.engine.truncation()
    }

    /// `γ(r)`.
    pub fn gamma(&self, r: f64) -> f64 {
        self.corr.correlation(r)
    }

    pub fn bivariate_density(&self, u: f64, v: f64, r: f64) -> Result<f64, LsError> {
        self.engine.density_at(u, v, self.gamma(r), Some(r))
    }

    pub fn shannon_mi_quadrature(&self, r: f64) -> Result<f64, LsError> {
        Ok(self.engine.shannon_mi_at(self.gamma(r), Some(r))?.value)
    }

    /// Mass added by the negativity clamp at distance `r`.
    pub fn clamped_mass(&self, r: f64) -> Result<f64, LsError> {
        Ok(self.engine.shannon_mi_at(self.gamma(r), Some(r))?.clamped_mass)
    }

    pub fn shannon_mi_series(&self, r: f64) -> Result<f64, LsError> {
        self.engine.shannon_series(self.gamma(r))
    }

    pub fn mi_bounds(&self, r: f64) -> Result<(f64, f64), LsError> {
        self.engine.bounds(self.gamma(r))
    }

    pub fn renyi_mi_quadrature(&self, r: f64, q: f64) -> Result<f64, LsError> {
        Ok(self.engine.renyi_mi_at(self.gamma(r), q, Some(r))?.value)
    }

    pub fn renyi_mi_multinomial(&self, r: f64, q: f64) -> Result<f64, LsError> {
        self.engine.renyi_multinomial(self.gamma(r), q)
    }

    pub fn subordinated_joint_pmf(&self, spec: &SubordinationSpec, r: f64) -> Result<JointPmf, LsError> {
        spec.joint_pmf(self.gamma(r))
    }

    pub fn subordinated_mi(&self, spec: &SubordinationSpec, r: f64) -> Result<f64, LsError> {
        spec.mi(self.gamma(r))
    }

    /// Evaluates `variant` at every distance (in parallel) and fits the
    /// log-log tail slope over `fit_window`, by default the last decade.
    ///
    /// Bound curves are attached for the Shannon variant, `NaN` where the
    /// correlation is not below one.
    pub fn mi_curve(
        &self,
        variant: &MiVariant,
        spec: Option<&SubordinationSpec>,
        distances: &[f64],
        fit_window: Option<(f64, f64)>,
    ) -> Result<MICurve, LsError> {
        if distances.is_empty()
            || distances.iter().any(|d| !(d.is_finite() && *d >= 0.0))
            || distances.windows(2).any(|p| p[1] <= p[0])
        {
            return Err(LsError::InvalidDistances);
        }
        let d_min = distances[0];
        let d_max = *distances.last().expect("non-empty");
        let window = fit_window.unwrap_or((d_max / 10.0, d_max));
        if window.0 > window.1 || window.1 < d_min || window.0 > d_max {
            return Err(LsError::InvalidWindow {
                lo: window.0,
                hi: window.1,
            });
        }
        let spec = match variant {
            MiVariant::Subordinated(_) => Some(spec.ok_or_else(|| {
                LsError::InvalidSubordinator("subordinated curve needs a transform".into())
            })?),
            _ => None,
        };

        let rows: Vec<(f64, f64, f64, Option<(f64, f64)>)> = distances
            .par_iter()
            .map(|&r| {
                let gamma = self.gamma(r);
                let (mi, clamped) = match variant {
                    MiVariant::Shannon => {
                        let v = self.engine.shannon_mi_at(gamma, Some(r))?;
                        (v.value, v.clamped_mass)
                    }
                    MiVariant::Renyi(q) => {
                        let v = if *q == 1.0 {
                            self.engine.shannon_mi_at(gamma, Some(r))?
                        } else {
                            self.engine.renyi_mi_at(gamma, *q, Some(r))?
                        };
                        (v.value, v.clamped_mass)
                    }
                    MiVariant::Subordinated(q) => {
                        let spec = spec.expect("checked above");
                        let v = match q {
                            None => spec.mi(gamma)?,
                            Some(q) => spec.renyi_mi(gamma, *q)?,
                        };
                        (v, 0.0)
                    }
                };
                let bounds = match variant {
                    MiVariant::Shannon if gamma.abs() < 1.0 => Some(self.engine.bounds(gamma)?),
                    MiVariant::Shannon => Some((f64::NAN, f64::NAN)),
                    _ => None,
                };
                Ok((gamma, mi, clamped, bounds))
            })
            .collect::<Result<_, LsError>>()?;

        let correlations = rows.iter().map(|r| r.0).collect();
        let mi: Vec<f64> = rows.iter().map(|r| r.1).collect();
        let has_bounds = matches!(variant, MiVariant::Shannon);
        let lower = has_bounds.then(|| rows.iter().map(|r| r.3.expect("bounds").0).collect());
        let upper = has_bounds.then(|| rows.iter().map(|r| r.3.expect("bounds").1).collect());
        let clamped_mass = match variant {
            MiVariant::Subordinated(_) => None,
            _ => Some(rows.iter().map(|r| r.2).collect()),
        };

        let mut warnings: Vec<String> = self.corr.warnings().to_vec();
        let slope_fit = match fit_loglog_slope(distances, &mi, window) {
            Ok((fit, w)) => {
                warnings.extend(w);
                Ok(fit)
            }
            Err(e) => {
                warnings.push(format!("slope fit failed: {e}"));
                Err(e)
            }
        };
        Ok(MICurve {
            distances: distances.to_vec(),
            correlations,
            mi,
            lower,
            upper,
            clamped_mass,
            slope_fit,
            warnings,
        })
    }
}
