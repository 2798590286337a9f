//! Isotropic correlation families with long-range dependence, and the
//! Gneiting class of non-separable space-time covariances.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid parameter {name} = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
    #[error("LRD exponent {rho} outside (0, {dim}) for dimension {dim}")]
    ExponentOutOfRange { rho: f64, dim: usize },
    #[error("spatial dimension must be at least 1")]
    ZeroDimension,
}

fn check(name: &'static str, value: f64, ok: bool, reason: &'static str) -> Result<(), ModelError> {
    if ok && value.is_finite() {
        Ok(())
    } else {
        Err(ModelError::InvalidParameter {
            name,
            value,
            reason,
        })
    }
}

/// Parametric family of a spatial correlation function `γ(r)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum CorrelationFamily {
    /// `1 / (1 + r^beta)^gamma_exp`, decaying like `r^{-beta gamma_exp}`.
    PowerLawBg { beta: f64, gamma_exp: f64 },
    /// `min(1, r^{-rho})`: already at its asymptote for `r > 1`.
    PurePower { rho: f64 },
    /// Square of an inner correlation, e.g. the correlation of a chi-square
    /// field built from independent copies of a Gaussian one.
    Squared { inner: Box<CorrelationFamily> },
}

impl CorrelationFamily {
    fn validate(&self) -> Result<(), ModelError> {
        match self {
            CorrelationFamily::PowerLawBg { beta, gamma_exp } => {
                check("beta", *beta, *beta > 0.0 && *beta <= 2.0, "must lie in (0, 2]")?;
                check("gamma_exp", *gamma_exp, *gamma_exp > 0.0, "must be positive")
            }
            CorrelationFamily::PurePower { rho } => check("rho", *rho, *rho > 0.0, "must be positive"),
            CorrelationFamily::Squared { inner } => inner.validate(),
        }
    }

    fn exponent(&self) -> f64 {
        match self {
            CorrelationFamily::PowerLawBg { beta, gamma_exp } => beta * gamma_exp,
            CorrelationFamily::PurePower { rho } => *rho,
            CorrelationFamily::Squared { inner } => 2.0 * inner.exponent(),
        }
    }

    fn eval(&self, r: f64) -> f64 {
        match self {
            CorrelationFamily::PowerLawBg { beta, gamma_exp } => {
                if r == 0.0 {
                    1.0
                } else {
                    (1.0 + r.powf(*beta)).powf(-gamma_exp)
                }
            }
            CorrelationFamily::PurePower { rho } => {
                if r <= 1.0 {
                    1.0
                } else {
                    r.powf(-rho)
                }
            }
            CorrelationFamily::Squared { inner } => {
                let g = inner.eval(r);
                g * g
            }
        }
    }

    pub fn descriptor(&self) -> String {
        match self {
            CorrelationFamily::PowerLawBg { beta, gamma_exp } => {
                format!("power_law_bg(beta={beta},gamma_exp={gamma_exp})")
            }
            CorrelationFamily::PurePower { rho } => format!("pure_power(rho={rho})"),
            CorrelationFamily::Squared { inner } => format!("squared({})", inner.descriptor()),
        }
    }
}

/// A validated correlation function on `R^dim` with LRD exponent in `(0, dim)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationModel {
    family: CorrelationFamily,
    dim: usize,
    lrd_exponent: f64,
    warnings: Vec<String>,
}

impl CorrelationModel {
    pub fn new(family: CorrelationFamily, dim: usize) -> Result<Self, ModelError> {
        if dim == 0 {
            return Err(ModelError::ZeroDimension);
        }
        family.validate()?;
        let rho = family.exponent();
        let d = dim as f64;
        if !(rho > 0.0 && rho < d) {
            return Err(ModelError::ExponentOutOfRange { rho, dim });
        }
        let mut warnings = Vec::new();
        if rho >= d / 2.0 {
            warnings.push(format!(
                "exponent {rho} is outside the power-law covariance range (0, {}) although admissible for LRD",
                d / 2.0
            ));
        }
        Ok(Self {
            family,
            dim,
            lrd_exponent: rho,
            warnings,
        })
    }

    pub fn power_law_bg(beta: f64, gamma_exp: f64, dim: usize) -> Result<Self, ModelError> {
        Self::new(CorrelationFamily::PowerLawBg { beta, gamma_exp }, dim)
    }

    pub fn pure_power(rho: f64, dim: usize) -> Result<Self, ModelError> {
        Self::new(CorrelationFamily::PurePower { rho }, dim)
    }

    /// The square of `inner`, same dimension.
    pub fn squared(inner: &CorrelationModel) -> Result<Self, ModelError> {
        Self::new(
            CorrelationFamily::Squared {
                inner: Box::new(inner.family.clone()),
            },
            inner.dim,
        )
    }

    /// `γ(r)` for `r >= 0`.
    pub fn correlation(&self, r: f64) -> f64 {
        debug_assert!(r >= 0.0, "distance must be non-negative");
        self.family.eval(r.abs())
    }

    /// `ρ` with `γ(r) = O(r^{-ρ})`.
    pub fn lrd_exponent(&self) -> f64 {
        self.lrd_exponent
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn family(&self) -> &CorrelationFamily {
        &self.family
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn descriptor(&self) -> String {
        format!("{}[d={}]", self.family.descriptor(), self.dim)
    }
}

/// Gneiting covariance `σ² ψ(τ²)^{-d/2} φ(‖z‖² / ψ(τ²))` with
/// `φ(u) = (1 + c u^γ)^{-δ}` and `ψ(u) = (1 + a u^α)^β`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GneitingCovariance {
    pub sigma2: f64,
    pub c: f64,
    pub delta: f64,
    pub gamma_phi: f64,
    pub a: f64,
    pub alpha: f64,
    pub beta_psi: f64,
    pub dim: usize,
}

impl GneitingCovariance {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        sigma2: f64,
        c: f64,
        delta: f64,
        gamma_phi: f64,
        a: f64,
        alpha: f64,
        beta_psi: f64,
        dim: usize,
    ) -> Result<Self, ModelError> {
        let gc = Self {
            sigma2,
            c,
            delta,
            gamma_phi,
            a,
            alpha,
            beta_psi,
            dim,
        };
        gc.validate()?;
        Ok(gc)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.dim == 0 {
            return Err(ModelError::ZeroDimension);
        }
        let d = self.dim as f64;
        check("sigma2", self.sigma2, self.sigma2 >= 0.0, "must be non-negative")?;
        check("c", self.c, self.c > 0.0, "must be positive")?;
        check("delta", self.delta, self.delta > 0.0, "must be positive")?;
        check(
            "gamma_phi",
            self.gamma_phi,
            self.gamma_phi > 0.0 && self.gamma_phi <= 1.0,
            "must lie in (0, 1]",
        )?;
        check("a", self.a, self.a > 0.0, "must be positive")?;
        check("alpha", self.alpha, self.alpha > 0.0 && self.alpha <= 1.0, "must lie in (0, 1]")?;
        check(
            "beta_psi",
            self.beta_psi,
            self.beta_psi > 0.0 && self.beta_psi <= 1.0,
            "must lie in (0, 1]",
        )?;
        let spatial = 2.0 * self.gamma_phi * self.delta;
        check("2*gamma_phi*delta", spatial, spatial < d, "must lie in (0, d)")?;
        let temporal = 2.0 * self.alpha * self.beta_psi;
        check("2*alpha*beta_psi", temporal, temporal < 1.0, "must lie in (0, 1)")?;
        Ok(())
    }

    /// Completely monotone spatial generator `φ(u)`.
    pub fn phi(&self, u: f64) -> f64 {
        if u <= 0.0 {
            1.0
        } else {
            (1.0 + self.c * u.powf(self.gamma_phi)).powf(-self.delta)
        }
    }

    /// Bernstein temporal generator `ψ(u)`.
    pub fn psi(&self, u: f64) -> f64 {
        if u <= 0.0 {
            1.0
        } else {
            (1.0 + self.a * u.powf(self.alpha)).powf(self.beta_psi)
        }
    }

    /// `C(‖z‖, τ)`.
    pub fn cov(&self, z_norm: f64, tau: f64) -> f64 {
        let psi = self.psi(tau * tau);
        self.sigma2 * psi.powf(-(self.dim as f64) / 2.0) * self.phi(z_norm * z_norm / psi)
    }

    pub fn descriptor(&self) -> String {
        format!(
            "gneiting(sigma2={},c={},delta={},gamma_phi={},a={},alpha={},beta_psi={},d={})",
            self.sigma2, self.c, self.delta, self.gamma_phi, self.a, self.alpha, self.beta_psi, self.dim
        )
    }
}
