//! Gaussian random fields on regular grids, chi-square subordination, the
//! excursion volume `M₀` and Monte-Carlo indicator mutual information.
//!
//! Randomness is reproducible: every realization is a deterministic function
//! of `(seed, model, grid, method)`. Independent streams (chi-square copies,
//! replicates, distances) use child seeds from [`derive_seed`].

mod empirical;
mod export;
mod sampler;

pub use empirical::{empirical_indicator_mi, minkowski_m0, EmpiricalMi, EmpiricalOptions};
pub use export::{read_field, write_field, FieldHeader};
pub use sampler::{
    chi_square_field, simulate_gaussian, DenseSampler, GaussianSampler, CHOLESKY_CAP,
    EMBEDDING_TOL, MAX_PADDING,
};

use crate::covmodels::ModelError;
use crate::infotheory::InfoError;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("{points} points exceed the dense Cholesky cap of {cap}")]
    CholeskyCap { points: usize, cap: usize },
    #[error("covariance matrix is not positive definite even with jitter")]
    NotPositiveDefinite,
    #[error("embedding not PSD at max padding {padding}: smallest eigenvalue {min_eigenvalue:e}")]
    EmbeddingNotPsd { padding: usize, min_eigenvalue: f64 },
    #[error("degrees of freedom must be an even integer >= 2 (got {0})")]
    InvalidDof(usize),
    #[error("at least {min} replicates are needed (got {got})")]
    TooFewReplicates { got: usize, min: usize },
    #[error("distances must be non-empty, finite, non-negative and strictly increasing")]
    InvalidDistances,
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Info(#[from] InfoError),
    #[error("field file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Regular grid with equal spacing along every axis; points are flattened
/// row-major (last axis fastest).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub sizes: Vec<usize>,
    pub spacing: f64,
}

impl GridSpec {
    pub fn new(sizes: Vec<usize>, spacing: f64) -> Result<Self, SimError> {
        let g = Self { sizes, spacing };
        g.validate()?;
        Ok(g)
    }

    pub fn square(n: usize, spacing: f64) -> Result<Self, SimError> {
        Self::new(vec![n, n], spacing)
    }

    /// Sizes of at least one point are accepted so that single-point grids work.
    pub fn validate(&self) -> Result<(), SimError> {
        if !(1..=2).contains(&self.sizes.len()) {
            return Err(SimError::InvalidGrid(format!(
                "dimension must be 1 or 2 (got {})",
                self.sizes.len()
            )));
        }
        if self.sizes.iter().any(|&n| n == 0) {
            return Err(SimError::InvalidGrid("every axis needs at least one point".into()));
        }
        if !(self.spacing > 0.0 && self.spacing.is_finite()) {
            return Err(SimError::InvalidGrid(format!("spacing must be positive (got {})", self.spacing)));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.sizes.len()
    }

    pub fn len(&self) -> usize {
        self.sizes.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Integer coordinates of flat index `i`.
    pub fn index(&self, i: usize) -> Vec<usize> {
        let mut rest = i;
        let mut out = vec![0; self.sizes.len()];
        for (axis, &n) in self.sizes.iter().enumerate().rev() {
            out[axis] = rest % n;
            rest /= n;
        }
        out
    }

    /// Euclidean distance between flat indices `i` and `j`.
    pub fn distance(&self, i: usize, j: usize) -> f64 {
        let (a, b) = (self.index(i), self.index(j));
        let sq: f64 = a
            .iter()
            .zip(&b)
            .map(|(&x, &y)| ((x as f64 - y as f64) * self.spacing).powi(2))
            .sum();
        sq.sqrt()
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing.powi(self.dim() as i32)
    }

    /// Lebesgue volume `λ(D)` attributed to the grid, one cell per point.
    pub fn volume(&self) -> f64 {
        self.cell_volume() * self.len() as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimMethod {
    /// Cholesky up to [`CHOLESKY_CAP`] points, circulant embedding beyond.
    Auto,
    Cholesky,
    CirculantEmbedding,
}

impl SimMethod {
    pub fn name(&self) -> &'static str {
        match self {
            SimMethod::Auto => "auto",
            SimMethod::Cholesky => "cholesky",
            SimMethod::CirculantEmbedding => "circulant_embedding",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    /// Correlation (or covariance) model descriptor.
    pub model: String,
    /// Method actually used, never `Auto`.
    pub method: SimMethod,
    /// Pointwise transform applied after simulation, e.g. `chi2(10)`.
    pub transform: Option<String>,
    /// Padding factor for circulant embedding.
    pub padding: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldRealization {
    pub grid: GridSpec,
    pub values: Vec<f64>,
    pub seed: u64,
    pub provenance: Provenance,
}

/// Child seed for stream `index` of `parent`: two rounds of the splitmix64
/// finalizer over `parent` and `index`. Stable across versions.
pub fn derive_seed(parent: u64, index: u64) -> u64 {
    splitmix64(splitmix64(parent) ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(1))
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub(crate) fn rng_for(seed: u64) -> rand_chacha::ChaCha8Rng {
    use rand::SeedableRng;
    rand_chacha::ChaCha8Rng::seed_from_u64(seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_geometry() {
        let g = GridSpec::new(vec![3, 4], 0.5).unwrap();
        assert_eq!(g.len(), 12);
        assert_eq!(g.index(5), vec![1, 1]);
        assert!((g.distance(0, 5) - 0.5 * 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(g.volume(), 3.0);
        assert!(GridSpec::new(vec![0], 1.0).is_err());
        assert!(GridSpec::new(vec![2, 2, 2], 1.0).is_err());
        assert!(GridSpec::new(vec![2], -1.0).is_err());
        assert!(GridSpec::new(vec![1], 1.0).is_ok());
    }

    #[test]
    fn child_seeds_differ() {
        let seeds: Vec<u64> = (0..100).map(|i| derive_seed(42, i)).collect();
        let mut sorted = seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        assert_eq!(sorted.len(), 100);
        assert_eq!(derive_seed(42, 3), seeds[3]);
        assert_ne!(derive_seed(43, 3), seeds[3]);
    }
}
