use super::{derive_seed, rng_for, FieldRealization, GridSpec, Provenance, SimError, SimMethod};
use crate::covmodels::CorrelationModel;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

/// Largest grid simulated by dense Cholesky.
pub const CHOLESKY_CAP: usize = 4096;
/// Eigenvalues of the embedding above this (negative) value are set to zero.
pub const EMBEDDING_TOL: f64 = -1e-9;
/// Padding factors tried, in order, for circulant embedding.
pub const MAX_PADDING: usize = 8;

const JITTER: f64 = 1e-10;

/// Exact sampler for `N(0, C)` from a dense covariance matrix.
#[derive(Debug, Clone)]
pub struct DenseSampler {
    lower: DMatrix<f64>,
}

impl DenseSampler {
    /// Factorizes `C + 1e-10 I`.
    pub fn new(cov: DMatrix<f64>) -> Result<Self, SimError> {
        let n = cov.nrows();
        let jittered = cov + DMatrix::identity(n, n) * JITTER;
        let chol = jittered.cholesky().ok_or(SimError::NotPositiveDefinite)?;
        Ok(Self { lower: chol.l() })
    }

    pub fn len(&self) -> usize {
        self.lower.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let z = DVector::from_fn(self.len(), |_, _| rng.sample::<f64, _>(StandardNormal));
        (&self.lower * z).data.into()
    }
}

#[derive(Clone)]
struct Circulant {
    torus: [usize; 2],
    /// `sqrt(λ_k / M)` over the torus, row-major
    amplitude: Vec<f64>,
    fft_rows: Arc<dyn Fft<f64>>,
    fft_cols: Arc<dyn Fft<f64>>,
    padding: usize,
}

impl std::fmt::Debug for Circulant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Circulant")
            .field("torus", &self.torus)
            .field("padding", &self.padding)
            .finish()
    }
}

#[derive(Debug, Clone)]
enum Backend {
    Dense(DenseSampler),
    Circulant(Circulant),
}

/// Reusable sampler of a zero-mean, unit-variance stationary field on a grid.
#[derive(Debug, Clone)]
pub struct GaussianSampler {
    grid: GridSpec,
    model: String,
    backend: Backend,
}

impl GaussianSampler {
    pub fn new(grid: &GridSpec, corr: &CorrelationModel, method: SimMethod) -> Result<Self, SimError> {
        Self::from_fn(grid, |r| corr.correlation(r), corr.descriptor(), method)
    }

    /// Same as [`new`](Self::new) for an arbitrary isotropic correlation `corr(r)`.
    pub fn from_fn(
        grid: &GridSpec,
        corr: impl Fn(f64) -> f64,
        model: String,
        method: SimMethod,
    ) -> Result<Self, SimError> {
        grid.validate()?;
        let n = grid.len();
        let method = match method {
            SimMethod::Auto if n <= CHOLESKY_CAP => SimMethod::Cholesky,
            SimMethod::Auto => SimMethod::CirculantEmbedding,
            m => m,
        };
        let backend = match method {
            SimMethod::Cholesky => {
                if n > CHOLESKY_CAP {
                    return Err(SimError::CholeskyCap {
                        points: n,
                        cap: CHOLESKY_CAP,
                    });
                }
                let coords: Vec<Vec<f64>> = (0..n)
                    .map(|i| grid.index(i).iter().map(|&k| k as f64 * grid.spacing).collect())
                    .collect();
                let cov = DMatrix::from_fn(n, n, |i, j| {
                    if i == j {
                        1.0
                    } else {
                        let sq: f64 = coords[i].iter().zip(&coords[j]).map(|(a, b)| (a - b).powi(2)).sum();
                        corr(sq.sqrt())
                    }
                });
                Backend::Dense(DenseSampler::new(cov)?)
            }
            _ => Backend::Circulant(embed(grid, &corr)?),
        };
        Ok(Self {
            grid: grid.clone(),
            model,
            backend,
        })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn method(&self) -> SimMethod {
        match self.backend {
            Backend::Dense(_) => SimMethod::Cholesky,
            Backend::Circulant(_) => SimMethod::CirculantEmbedding,
        }
    }

    fn provenance(&self, transform: Option<String>) -> Provenance {
        Provenance {
            model: self.model.clone(),
            method: self.method(),
            transform,
            padding: match &self.backend {
                Backend::Circulant(c) => Some(c.padding),
                Backend::Dense(_) => None,
            },
        }
    }

    /// One draw from an explicit generator.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        match &self.backend {
            Backend::Dense(d) => d.sample(rng),
            Backend::Circulant(c) => c.sample(&self.grid, rng),
        }
    }

    /// One draw seeded by `seed`.
    pub fn realize(&self, seed: u64) -> FieldRealization {
        let values = self.sample(&mut rng_for(seed));
        FieldRealization {
            grid: self.grid.clone(),
            values,
            seed,
            provenance: self.provenance(None),
        }
    }

    /// `½ Σ_{i<n_dof} X_i²` over independent copies seeded by `derive_seed(seed, i)`.
    pub fn chi_square(&self, n_dof: usize, seed: u64) -> Result<FieldRealization, SimError> {
        if n_dof < 2 || n_dof % 2 != 0 {
            return Err(SimError::InvalidDof(n_dof));
        }
        let mut values = vec![0.0; self.grid.len()];
        for copy in 0..n_dof {
            let x = self.sample(&mut rng_for(derive_seed(seed, copy as u64)));
            for (acc, v) in values.iter_mut().zip(x) {
                *acc += 0.5 * v * v;
            }
        }
        Ok(FieldRealization {
            grid: self.grid.clone(),
            values,
            seed,
            provenance: self.provenance(Some(format!("chi2({n_dof})"))),
        })
    }
}

pub fn simulate_gaussian(
    grid: &GridSpec,
    corr: &CorrelationModel,
    seed: u64,
    method: SimMethod,
) -> Result<FieldRealization, SimError> {
    Ok(GaussianSampler::new(grid, corr, method)?.realize(seed))
}

pub fn chi_square_field(
    grid: &GridSpec,
    corr: &CorrelationModel,
    n_dof: usize,
    seed: u64,
    method: SimMethod,
) -> Result<FieldRealization, SimError> {
    GaussianSampler::new(grid, corr, method)?.chi_square(n_dof, seed)
}

fn torus_len(n: usize, padding: usize) -> usize {
    if n <= 1 {
        1
    } else {
        padding * (n - 1)
    }
}

fn embed(grid: &GridSpec, corr: &impl Fn(f64) -> f64) -> Result<Circulant, SimError> {
    let sizes = match grid.sizes.as_slice() {
        [n] => [1, *n],
        [a, b] => [*a, *b],
        _ => unreachable!("validated grid"),
    };
    let mut planner = FftPlanner::<f64>::new();
    let mut padding = 2;
    let mut last_min = 0.0;
    while padding <= MAX_PADDING {
        let torus = [torus_len(sizes[0], padding), torus_len(sizes[1], padding)];
        let total = torus[0] * torus[1];
        let mut buf = vec![Complex::new(0.0, 0.0); total];
        for a in 0..torus[0] {
            let da = a.min(torus[0] - a) as f64;
            for b in 0..torus[1] {
                let db = b.min(torus[1] - b) as f64;
                let r = grid.spacing * (da * da + db * db).sqrt();
                buf[a * torus[1] + b] = Complex::new(if r == 0.0 { 1.0 } else { corr(r) }, 0.0);
            }
        }
        let fft_rows = planner.plan_fft_forward(torus[1]);
        let fft_cols = planner.plan_fft_forward(torus[0]);
        fft2(&mut buf, torus, &fft_rows, &fft_cols);
        let min = buf.iter().map(|c| c.re).fold(f64::INFINITY, f64::min);
        if min >= EMBEDDING_TOL {
            let amplitude = buf
                .iter()
                .map(|c| (c.re.max(0.0) / total as f64).sqrt())
                .collect();
            return Ok(Circulant {
                torus,
                amplitude,
                fft_rows,
                fft_cols,
                padding,
            });
        }
        last_min = min;
        padding *= 2;
    }
    Err(SimError::EmbeddingNotPsd {
        padding: MAX_PADDING,
        min_eigenvalue: last_min,
    })
}

/// In-place 2-D forward DFT of a row-major `torus[0] × torus[1]` array.
fn fft2(buf: &mut [Complex<f64>], torus: [usize; 2], rows: &Arc<dyn Fft<f64>>, cols: &Arc<dyn Fft<f64>>) {
    let [n0, n1] = torus;
    if n1 > 1 {
        rows.process(buf);
    }
    if n0 > 1 {
        let mut column = vec![Complex::new(0.0, 0.0); n0];
        for b in 0..n1 {
            for a in 0..n0 {
                column[a] = buf[a * n1 + b];
            }
            cols.process(&mut column);
            for a in 0..n0 {
                buf[a * n1 + b] = column[a];
            }
        }
    }
}

impl Circulant {
    fn sample<R: Rng + ?Sized>(&self, grid: &GridSpec, rng: &mut R) -> Vec<f64> {
        let mut buf: Vec<Complex<f64>> = self
            .amplitude
            .iter()
            .map(|&s| {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                Complex::new(s * re, s * im)
            })
            .collect();
        fft2(&mut buf, self.torus, &self.fft_rows, &self.fft_cols);
        let (n0, n1) = match grid.sizes.as_slice() {
            [n] => (1, *n),
            [a, b] => (*a, *b),
            _ => unreachable!("validated grid"),
        };
        let mut out = Vec::with_capacity(n0 * n1);
        for a in 0..n0 {
            for b in 0..n1 {
                out.push(buf[a * self.torus[1] + b].re);
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_point_is_one_normal_draw() {
        let grid = GridSpec::new(vec![1], 1.0).unwrap();
        let corr = CorrelationModel::power_law_bg(0.2, 0.2, 1).unwrap();
        let f = simulate_gaussian(&grid, &corr, 7, SimMethod::Auto).unwrap();
        assert_eq!(f.values.len(), 1);
        let mut rng = rng_for(7);
        let z: f64 = rng.sample(StandardNormal);
        assert!((f.values[0] - z * (1.0 + JITTER).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn seeds_reproduce() {
        let grid = GridSpec::square(8, 1.0).unwrap();
        let corr = CorrelationModel::power_law_bg(1.0, 1.5, 2).unwrap();
        for method in [SimMethod::Cholesky, SimMethod::CirculantEmbedding] {
            let a = simulate_gaussian(&grid, &corr, 11, method).unwrap();
            let b = simulate_gaussian(&grid, &corr, 11, method).unwrap();
            let c = simulate_gaussian(&grid, &corr, 12, method).unwrap();
            assert_eq!(a.values, b.values);
            assert_ne!(a.values, c.values);
            assert_eq!(a.provenance.method, method);
        }
    }

    #[test]
    fn dof_must_be_even() {
        let grid = GridSpec::square(3, 1.0).unwrap();
        let corr = CorrelationModel::power_law_bg(1.0, 1.0, 2).unwrap();
        assert!(chi_square_field(&grid, &corr, 3, 1, SimMethod::Auto).is_err());
        assert!(chi_square_field(&grid, &corr, 0, 1, SimMethod::Auto).is_err());
        let f = chi_square_field(&grid, &corr, 4, 1, SimMethod::Auto).unwrap();
        assert!(f.values.iter().all(|v| *v >= 0.0));
        assert_eq!(f.provenance.transform.as_deref(), Some("chi2(4)"));
    }

    #[test]
    fn cholesky_cap() {
        let grid = GridSpec::square(65, 1.0).unwrap();
        let corr = CorrelationModel::power_law_bg(1.0, 1.0, 2).unwrap();
        assert!(matches!(
            GaussianSampler::new(&grid, &corr, SimMethod::Cholesky),
            Err(SimError::CholeskyCap { .. })
        ));
    }
}
