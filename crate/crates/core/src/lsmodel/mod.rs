//! Truncated Lancaster–Sarmanov bivariate densities
//!
//! ```text
//! p_M(u, v; r) = p(u) p(v) [1 + Σ_{k=1..M} γ(r)^k e_k(u) e_k(v)]
//! ```
//!
//! and the mutual information between the two components: Shannon by
//! tensor quadrature and by the small-correlation series, Rényi by
//! quadrature and (integer orders) by the multinomial moment expansion,
//! and the information kept by a finite-state transform `g(X)`.
//!
//! [`LsEngine`] works directly with a correlation value `γ`; [`LsModel`]
//! adds a [`CorrelationModel`](crate::covmodels::CorrelationModel) so that
//! everything can be asked at a distance `r`.

mod curve;
mod engine;
mod model;
mod subordination;

pub(crate) use curve::fit_loglog_slope_min;
pub use curve::{fit_loglog_slope, FitError, MICurve, MiVariant, SlopeFit, UNDERFLOW_FLOOR};
pub use engine::{LsEngine, MiValue, DEFAULT_QUAD_NODES, MULTINOMIAL_COST_LIMIT};
pub use model::LsModel;
pub use subordination::{SubordinationSpec, Subordinator};

use crate::covmodels::ModelError;
use crate::infotheory::InfoError;
use crate::polybasis::BasisError;
use thiserror::Error;

/// What to do when the truncated bracket `1 + Σ γ^k e_k e_k` goes negative.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case")]
pub enum NegativityPolicy {
    /// Replace the bracket by `max(bracket, eps)`.
    ClampFloor { eps: f64 },
    Reject,
}

impl Default for NegativityPolicy {
    fn default() -> Self {
        NegativityPolicy::ClampFloor { eps: 1e-12 }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LsError {
    #[error(transparent)]
    Basis(#[from] BasisError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Info(#[from] InfoError),
    #[error("truncation order {truncation} must be in 1..={max}")]
    Truncation { truncation: usize, max: usize },
    #[error("quadrature needs at least {min} nodes per axis (got {got})")]
    TooFewNodes { got: usize, min: usize },
    #[error("truncated density negative at (u={u}, v={v}, gamma={gamma}, r={r:?}): bracket {value:e}")]
    NegativeDensity {
        u: f64,
        v: f64,
        gamma: f64,
        r: Option<f64>,
        value: f64,
    },
    #[error("degenerate: correlation {0} (zero distance), need |gamma| < 1")]
    Degenerate(f64),
    #[error("order q must be positive, finite and different from 1 (got {0})")]
    InvalidOrder(f64),
    #[error("multinomial expansion needs an integer order q >= 2 (got {0})")]
    NonIntegerOrder(f64),
    #[error("cost guard: q*M^q = {cost:e} exceeds {limit:e}")]
    CostGuard { cost: f64, limit: f64 },
    #[error("invalid negativity policy: {0}")]
    InvalidPolicy(String),
    #[error("invalid subordinator: {0}")]
    InvalidSubordinator(String),
    #[error("truncation too coarse for gamma = {gamma}: table mass drifted by {drift:e}")]
    TruncationTooCoarse { gamma: f64, drift: f64 },
    #[error("distances must be non-empty, finite, non-negative and strictly increasing")]
    InvalidDistances,
    #[error("fit window [{lo}, {hi}] is not inside the distance range")]
    InvalidWindow { lo: f64, hi: f64 },
}
