//! Lancaster–Sarmanov random-field models and their mutual information.
//!
//! The crate builds bivariate densities `p(u)p(v)[1 + Σ γ^k e_k(u)e_k(v)]`
//! from an orthonormal polynomial system under a marginal `p`, computes
//! Shannon and Rényi mutual information between field components at a
//! given distance, and checks the power-law decay of that information
//! against simulation.

pub mod covmodels;
pub mod expcli;
pub mod fieldsim;
pub mod infotheory;
pub mod lsmodel;
pub mod polybasis;
pub mod quadrature;
pub mod special;
pub mod stfunctional;
