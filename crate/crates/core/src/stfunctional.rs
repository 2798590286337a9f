//! Functional (space-time) layer: a Gneiting-covariance field observed on a
//! time interval `[0, T]` is projected onto an orthonormal time basis, the
//! projections at two sites are correlated through the spatial correlation
//! operator, and each operator entry is fed into the scalar LS engine to
//! obtain mutual-information operator entries and their surface `K(t, s)`.

use crate::covmodels::{GneitingCovariance, ModelError};
use crate::fieldsim::{rng_for, DenseSampler, FieldRealization, GridSpec, Provenance, SimError, SimMethod};
use crate::lsmodel::{LsEngine, LsError};
use crate::quadrature::{legendre_on, GaussRule};
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tensor quadrature nodes per time axis.
pub const DEFAULT_TIME_NODES: usize = 256;
/// Space-time points simulated by dense Cholesky.
pub const ST_CHOLESKY_CAP: usize = 8192;
const DEGENERATE_VARIANCE: f64 = 1e-14;

#[derive(Debug, Error)]
pub enum StError {
    #[error("invalid time basis: {0}")]
    InvalidBasis(String),
    #[error("basis index {index} outside 1..={max}")]
    IndexOutOfRange { index: usize, max: usize },
    #[error("degenerate basis projection: variance {variance:e} of index {index}")]
    Degenerate { index: usize, variance: f64 },
    #[error("time mesh must be non-empty and inside [0, {t_max}]")]
    InvalidMesh { t_max: f64 },
    #[error("distance must be finite and non-negative (got {0})")]
    InvalidDistance(f64),
    #[error("{points} space-time points exceed the dense cap of {cap}; thin the space or time grid")]
    CapExceeded { points: usize, cap: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Ls(#[from] LsError),
    #[error(transparent)]
    Sim(#[from] SimError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeBasisKind {
    /// `φ₁ = 1/√T`, `φ_n(t) = √(2/T) cos((n-1)πt/T)`.
    CosineOrthonormal,
}

/// Orthonormal basis of `L²[0, T]`, indexed from 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeBasis {
    pub kind: TimeBasisKind,
    pub t_max: f64,
    pub count: usize,
}

impl TimeBasis {
    pub fn cosine(t_max: f64, count: usize) -> Result<Self, StError> {
        if !(t_max > 0.0 && t_max.is_finite()) {
            return Err(StError::InvalidBasis(format!("T must be positive (got {t_max})")));
        }
        if count == 0 {
            return Err(StError::InvalidBasis("at least one function is needed".into()));
        }
        Ok(Self {
            kind: TimeBasisKind::CosineOrthonormal,
            t_max,
            count,
        })
    }

    pub fn interval(&self) -> (f64, f64) {
        (0.0, self.t_max)
    }

    fn check_index(&self, n: usize) -> Result<(), StError> {
        if n == 0 || n > self.count {
            Err(StError::IndexOutOfRange {
                index: n,
                max: self.count,
            })
        } else {
            Ok(())
        }
    }

    /// `φ_n(t)`, 1-based; zero for out-of-range indices.
    pub fn eval(&self, n: usize, t: f64) -> f64 {
        match n {
            0 => 0.0,
            1 => 1.0 / self.t_max.sqrt(),
            n if n <= self.count => {
                (2.0 / self.t_max).sqrt() * ((n - 1) as f64 * std::f64::consts::PI * t / self.t_max).cos()
            }
            _ => 0.0,
        }
    }

    /// Row-major `len(ts) × count` table of `φ_n(t)`.
    fn table(&self, ts: &[f64]) -> Vec<f64> {
        ts.iter()
            .flat_map(|&t| (1..=self.count).map(move |n| self.eval(n, t)))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationOperatorEntry {
    pub r: f64,
    pub n: usize,
    pub m: usize,
    pub value: f64,
}

/// Spatial correlation operator of a Gneiting field on a time basis, with
/// the quadrature tables and the projection variances shared across `r`.
#[derive(Debug, Clone)]
pub struct CorrelationOperator {
    gc: GneitingCovariance,
    basis: TimeBasis,
    rule: GaussRule,
    /// `w_i φ_n(t_i)`, nodes × basis
    weighted: DMatrix<f64>,
    std_devs: Vec<f64>,
}

impl CorrelationOperator {
    pub fn new(gc: GneitingCovariance, basis: TimeBasis) -> Result<Self, StError> {
        Self::with_nodes(gc, basis, DEFAULT_TIME_NODES)
    }

    pub fn with_nodes(gc: GneitingCovariance, basis: TimeBasis, nodes: usize) -> Result<Self, StError> {
        gc.validate()?;
        let rule = legendre_on(nodes.max(2), 0.0, basis.t_max);
        let table = basis.table(&rule.nodes);
        let weighted = DMatrix::from_fn(rule.len(), basis.count, |i, n| rule.weights[i] * table[i * basis.count + n]);
        let mut op = Self {
            gc,
            basis,
            rule,
            weighted,
            std_devs: Vec::new(),
        };
        let g0 = op.projected_covariance(0.0);
        op.std_devs = (0..basis.count)
            .map(|n| {
                let variance = g0[(n, n)];
                if variance < DEGENERATE_VARIANCE {
                    Err(StError::Degenerate { index: n + 1, variance })
                } else {
                    Ok(variance.sqrt())
                }
            })
            .collect::<Result<_, _>>()?;
        Ok(op)
    }

    pub fn basis(&self) -> &TimeBasis {
        &self.basis
    }

    pub fn covariance(&self) -> &GneitingCovariance {
        &self.gc
    }

    pub fn time_rule(&self) -> &GaussRule {
        &self.rule
    }

    /// `∬ C(r, t-s) φ_n(t) φ_m(s) dt ds` for all `(n, m)`.
    pub fn projected_covariance(&self, r: f64) -> DMatrix<f64> {
        let t = &self.rule.nodes;
        let kernel = DMatrix::from_fn(t.len(), t.len(), |i, j| self.gc.cov(r, t[i] - t[j]));
        self.weighted.transpose() * kernel * &self.weighted
    }

    /// Normalized operator `γ_{nm}(r)` as a `count × count` matrix (0-based).
    pub fn matrix(&self, r: f64) -> Result<DMatrix<f64>, StError> {
        if !(r.is_finite() && r >= 0.0) {
            return Err(StError::InvalidDistance(r));
        }
        let mut g = self.projected_covariance(r);
        for n in 0..self.basis.count {
            for m in 0..self.basis.count {
                g[(n, m)] /= self.std_devs[n] * self.std_devs[m];
            }
        }
        Ok(g)
    }

    /// Single entry with 1-based indices.
    pub fn entry(&self, r: f64, n: usize, m: usize) -> Result<CorrelationOperatorEntry, StError> {
        self.basis.check_index(n)?;
        self.basis.check_index(m)?;
        if !(r.is_finite() && r >= 0.0) {
            return Err(StError::InvalidDistance(r));
        }
        let t = &self.rule.nodes;
        let (wn, wm) = (self.weighted.column(n - 1), self.weighted.column(m - 1));
        let mut acc = 0.0;
        for i in 0..t.len() {
            let row: f64 = (0..t.len()).map(|j| self.gc.cov(r, t[i] - t[j]) * wm[j]).sum();
            acc += wn[i] * row;
        }
        Ok(CorrelationOperatorEntry {
            r,
            n,
            m,
            value: acc / (self.std_devs[n - 1] * self.std_devs[m - 1]),
        })
    }
}

/// `γ_{nm}(r)` with the default quadrature.
pub fn correlation_operator(
    gc: &GneitingCovariance,
    basis: &TimeBasis,
    r: f64,
    n: usize,
    m: usize,
) -> Result<CorrelationOperatorEntry, StError> {
    CorrelationOperator::new(*gc, *basis)?.entry(r, n, m)
}

/// Shannon MI of the scalar LS model evaluated at `γ_{nm}(r)`.
pub fn mi_operator_entry(
    op: &CorrelationOperator,
    engine: &LsEngine,
    r: f64,
    n: usize,
    m: usize,
) -> Result<f64, StError> {
    let gamma = op.entry(r, n, m)?.value;
    Ok(engine.shannon_mi(gamma)?.value)
}

/// MI operator entries at one distance and the reconstructed surface
/// `K(t, s) = Σ S_nm φ_n(t) φ_m(s)` on `mesh × mesh`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MiOperatorSurface {
    pub r: f64,
    pub basis: TimeBasis,
    /// `count × count`, row-major, 0-based.
    pub entries: Vec<f64>,
    /// Operator correlations the entries were computed from.
    pub correlations: Vec<f64>,
    pub mesh: Vec<f64>,
    /// `K(mesh[i], mesh[j])` at `i * mesh.len() + j`.
    pub surface: Vec<f64>,
}

impl MiOperatorSurface {
    pub fn entry(&self, n: usize, m: usize) -> f64 {
        self.entries[(n - 1) * self.basis.count + (m - 1)]
    }

    pub fn evaluate(&self, t: f64, s: f64) -> f64 {
        let b = self.basis.count;
        let ft: Vec<f64> = (1..=b).map(|n| self.basis.eval(n, t)).collect();
        let fs: Vec<f64> = (1..=b).map(|m| self.basis.eval(m, s)).collect();
        let mut k = 0.0;
        for n in 0..b {
            for m in 0..b {
                k += self.entries[n * b + m] * ft[n] * fs[m];
            }
        }
        k
    }

    /// Mean of the surface over the mesh.
    pub fn mean_level(&self) -> f64 {
        self.surface.iter().sum::<f64>() / self.surface.len() as f64
    }

    /// Projects `K` back onto `φ_n ⊗ φ_m` with an `nodes`-point
    /// Gauss–Legendre tensor rule; returns the row-major coefficients.
    pub fn reproject(&self, nodes: usize) -> Vec<f64> {
        let rule = legendre_on(nodes, 0.0, self.basis.t_max);
        let b = self.basis.count;
        let table = self.basis.table(&rule.nodes);
        let k = reconstruct(&self.entries, b, &table, &table, rule.len(), rule.len());
        let mut out = vec![0.0; b * b];
        for (i, wi) in rule.weights.iter().enumerate() {
            for (j, wj) in rule.weights.iter().enumerate() {
                let kij = wi * wj * k[i * rule.len() + j];
                for n in 0..b {
                    let a = kij * table[i * b + n];
                    for m in 0..b {
                        out[n * b + m] += a * table[j * b + m];
                    }
                }
            }
        }
        out
    }
}

/// `K = Φ_t S Φ_sᵀ` with row-major tables.
fn reconstruct(entries: &[f64], b: usize, ft: &[f64], fs: &[f64], nt: usize, ns: usize) -> Vec<f64> {
    let s = DMatrix::from_row_slice(b, b, entries);
    let a = DMatrix::from_row_slice(nt, b, ft);
    let c = DMatrix::from_row_slice(ns, b, fs);
    let k = a * s * c.transpose();
    (0..nt).flat_map(|i| (0..ns).map(move |j| (i, j))).map(|(i, j)| k[(i, j)]).collect()
}

pub fn mi_surface(
    op: &CorrelationOperator,
    engine: &LsEngine,
    r: f64,
    mesh: &[f64],
) -> Result<MiOperatorSurface, StError> {
    let basis = *op.basis();
    if mesh.is_empty() || mesh.iter().any(|t| !(*t >= 0.0 && *t <= basis.t_max)) {
        return Err(StError::InvalidMesh { t_max: basis.t_max });
    }
    let gamma = op.matrix(r)?;
    let b = basis.count;
    let pairs: Vec<(usize, usize)> = (0..b).flat_map(|n| (n..b).map(move |m| (n, m))).collect();
    let values: Vec<f64> = pairs
        .par_iter()
        .map(|&(n, m)| {
            let g = 0.5 * (gamma[(n, m)] + gamma[(m, n)]);
            engine.shannon_mi(g).map(|v| v.value)
        })
        .collect::<Result<_, LsError>>()?;
    let mut entries = vec![0.0; b * b];
    for (&(n, m), v) in pairs.iter().zip(values) {
        entries[n * b + m] = v;
        entries[m * b + n] = v;
    }
    let table = basis.table(mesh);
    let surface = reconstruct(&entries, b, &table, &table, mesh.len(), mesh.len());
    Ok(MiOperatorSurface {
        r,
        basis,
        entries,
        correlations: (0..b).flat_map(|n| (0..b).map(move |m| (n, m))).map(|(n, m)| gamma[(n, m)]).collect(),
        mesh: mesh.to_vec(),
        surface,
    })
}

/// Space-time realization; `values[k * space.len() + i]` is the value at
/// spatial point `i` and time `times[k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct StFieldRealization {
    pub space: GridSpec,
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub seed: u64,
    pub model: String,
}

impl StFieldRealization {
    /// Spatial field at time index `k`.
    pub fn at_time(&self, k: usize) -> FieldRealization {
        let n = self.space.len();
        FieldRealization {
            grid: self.space.clone(),
            values: self.values[k * n..(k + 1) * n].to_vec(),
            seed: self.seed,
            provenance: Provenance {
                model: self.model.clone(),
                method: SimMethod::Cholesky,
                transform: Some(format!("time={}", self.times[k])),
                padding: None,
            },
        }
    }
}

/// Reusable exact sampler of a Gneiting field on `space × times`.
#[derive(Debug, Clone)]
pub struct StSampler {
    space: GridSpec,
    times: Vec<f64>,
    model: String,
    dense: DenseSampler,
}

impl StSampler {
    pub fn new(space: &GridSpec, times: &[f64], gc: &GneitingCovariance) -> Result<Self, StError> {
        space.validate()?;
        gc.validate()?;
        if times.is_empty() || times.iter().any(|t| !t.is_finite()) {
            return Err(StError::InvalidMesh { t_max: f64::INFINITY });
        }
        let ns = space.len();
        let points = ns * times.len();
        if points > ST_CHOLESKY_CAP {
            return Err(StError::CapExceeded {
                points,
                cap: ST_CHOLESKY_CAP,
            });
        }
        let dist = DMatrix::from_fn(ns, ns, |i, j| space.distance(i, j));
        let cov = DMatrix::from_fn(points, points, |p, q| {
            let (ti, si) = (p / ns, p % ns);
            let (tj, sj) = (q / ns, q % ns);
            gc.cov(dist[(si, sj)], times[ti] - times[tj])
        });
        Ok(Self {
            space: space.clone(),
            times: times.to_vec(),
            model: gc.descriptor(),
            dense: DenseSampler::new(cov)?,
        })
    }

    pub fn realize(&self, seed: u64) -> StFieldRealization {
        StFieldRealization {
            space: self.space.clone(),
            times: self.times.clone(),
            values: self.dense.sample(&mut rng_for(seed)),
            seed,
            model: self.model.clone(),
        }
    }
}

pub fn simulate_st_gaussian(
    space: &GridSpec,
    times: &[f64],
    gc: &GneitingCovariance,
    seed: u64,
) -> Result<StFieldRealization, StError> {
    Ok(StSampler::new(space, times, gc)?.realize(seed))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gc() -> GneitingCovariance {
        GneitingCovariance::new(1.0, 1.0, 0.35, 0.2, 1.0, 0.3, 0.7, 2).unwrap()
    }

    #[test]
    fn cosine_basis_is_orthonormal() {
        let basis = TimeBasis::cosine(100.0, 12).unwrap();
        let rule = legendre_on(128, 0.0, 100.0);
        for n in 1..=12 {
            for m in 1..=12 {
                let ip = rule.integrate(|t| basis.eval(n, t) * basis.eval(m, t));
                assert!((ip - f64::from(u8::from(n == m))).abs() < 1e-10, "{n} {m} {ip}");
            }
        }
        assert!(TimeBasis::cosine(0.0, 3).is_err());
        assert!(TimeBasis::cosine(1.0, 0).is_err());
    }

    #[test]
    fn entry_matches_matrix() {
        let op = CorrelationOperator::with_nodes(gc(), TimeBasis::cosine(10.0, 4).unwrap(), 64).unwrap();
        let mat = op.matrix(2.0).unwrap();
        let e = op.entry(2.0, 2, 3).unwrap();
        assert!((e.value - mat[(1, 2)]).abs() < 1e-12);
        assert!((op.entry(0.0, 3, 3).unwrap().value - 1.0).abs() < 1e-12);
        assert!(op.entry(1.0, 0, 1).is_err());
        assert!(op.entry(1.0, 1, 5).is_err());
        assert!(op.matrix(-1.0).is_err());
    }

    #[test]
    fn single_term_surface() {
        let op = CorrelationOperator::with_nodes(gc(), TimeBasis::cosine(10.0, 1).unwrap(), 64).unwrap();
        let basis = LsEngine::new(
            crate::polybasis::OrthonormalBasis::new(crate::polybasis::MarginalDensity::StandardGaussian, 6).unwrap(),
            6,
        )
        .unwrap();
        let mesh = [0.0, 2.5, 10.0];
        let s = mi_surface(&op, &basis, 1.0, &mesh).unwrap();
        for (i, &t) in mesh.iter().enumerate() {
            for (j, &u) in mesh.iter().enumerate() {
                let want = s.entry(1, 1) * op.basis().eval(1, t) * op.basis().eval(1, u);
                assert!((s.surface[i * 3 + j] - want).abs() < 1e-15);
            }
        }
        assert!(mi_surface(&op, &basis, 1.0, &[11.0]).is_err());
        assert!(mi_surface(&op, &basis, 1.0, &[]).is_err());
    }

    #[test]
    fn st_cap() {
        let space = GridSpec::square(20, 1.0).unwrap();
        let times: Vec<f64> = (0..30).map(f64::from).collect();
        assert!(matches!(
            StSampler::new(&space, &times, &gc()),
            Err(StError::CapExceeded { points: 12000, .. })
        ));
    }
}
