//! Small dense linear algebra, seeded random streams and least-squares
//! projection onto short bases.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

pub fn dot(x: &[f64], y: &[f64]) -> f64 {
    debug_assert_eq!(x.len(), y.len());
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

pub fn norm(x: &[f64]) -> f64 {
    dot(x, x).sqrt()
}

/// `y += alpha * x`
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn scaled(alpha: f64, x: &[f64]) -> Vec<f64> {
    x.iter().map(|v| alpha * v).collect()
}

pub fn add(x: &[f64], y: &[f64]) -> Vec<f64> {
    x.iter().zip(y).map(|(a, b)| a + b).collect()
}

/// Cosine similarity. Zero vectors are a domain error.
pub fn cosine(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(LabError::DimensionMismatch {
            expected: x.len(),
            found: y.len(),
        });
    }
    let nx = norm(x);
    let ny = norm(y);
    if nx == 0.0 || ny == 0.0 {
        return Err(LabError::Domain("cosine of a zero vector".into()));
    }
    Ok((dot(x, y) / (nx * ny)).clamp(-1.0, 1.0))
}

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(LabError::DimensionMismatch {
                    expected: cols,
                    found: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_iter(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.cols.max(1)).take(self.rows)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn frobenius_norm(&self) -> f64 {
        norm(&self.data)
    }

    pub fn same_shape(&self, other: &Matrix) -> bool {
        self.rows == other.rows && self.cols == other.cols
    }
}

/// Deterministic random stream identified by `(seed, stream_id)`.
///
/// Streams with the same pair replay the same draws; distinct stream ids
/// select disjoint ChaCha streams.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        Self {
            seed,
            stream_id,
            rng,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    pub fn below(&mut self, n: usize) -> usize {
        self.rng.random_range(0..n)
    }

    pub fn normal(&mut self, variance: f64) -> f64 {
        Normal::new(0.0, variance.sqrt())
            .expect("finite positive variance")
            .sample(&mut self.rng)
    }
}

/// I.i.d. `N(0, variance)` coordinates.
pub fn gaussian_vec(rng: &mut RngStream, d: usize, variance: f64) -> Result<Vec<f64>> {
    if !(variance > 0.0 && variance.is_finite()) {
        return Err(LabError::Domain(format!(
            "gaussian variance must be positive and finite, got {variance}"
        )));
    }
    let normal = Normal::new(0.0, variance.sqrt()).expect("validated variance");
    Ok((0..d).map(|_| normal.sample(&mut rng.rng)).collect())
}

/// Least-squares coordinates of a vector in the span of a (normalized) basis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasisDecomposition {
    pub basis_labels: Vec<String>,
    pub coefficients: Vec<f64>,
    pub residual_norm: f64,
    /// The basis was numerically rank deficient; coefficients are the
    /// minimum-norm solution.
    pub degenerate: bool,
}

impl BasisDecomposition {
    pub fn coefficient(&self, label: &str) -> Option<f64> {
        self.basis_labels
            .iter()
            .position(|l| l == label)
            .map(|i| self.coefficients[i])
    }
}

const RANK_TOL: f64 = 1e-10;

/// Projects `x` onto the span of `basis`, each basis vector first scaled to
/// unit norm. Labels default to `e0, e1, ...`.
pub fn decompose(x: &[f64], basis: &[&[f64]]) -> Result<BasisDecomposition> {
    let labels = (0..basis.len()).map(|i| format!("e{i}")).collect();
    decompose_labeled(x, basis, labels)
}

pub fn decompose_labeled(
    x: &[f64],
    basis: &[&[f64]],
    labels: Vec<String>,
) -> Result<BasisDecomposition> {
    let d = x.len();
    let k = basis.len();
    if labels.len() != k {
        return Err(LabError::DimensionMismatch {
            expected: k,
            found: labels.len(),
        });
    }
    let mut m = DMatrix::<f64>::zeros(d, k);
    for (j, b) in basis.iter().enumerate() {
        if b.len() != d {
            return Err(LabError::DimensionMismatch {
                expected: d,
                found: b.len(),
            });
        }
        let n = norm(b);
        if n == 0.0 {
            return Err(LabError::Domain(format!("basis vector {j} is zero")));
        }
        for (i, v) in b.iter().enumerate() {
            m[(i, j)] = v / n;
        }
    }
    if k == 0 {
        return Ok(BasisDecomposition {
            basis_labels: labels,
            coefficients: vec![],
            residual_norm: norm(x),
            degenerate: false,
        });
    }

    let svd = m.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let cutoff = RANK_TOL * smax.max(1.0);
    let rank = svd.singular_values.iter().filter(|&&s| s > cutoff).count();
    let rhs = DVector::from_column_slice(x);
    let coeffs = svd
        .solve(&rhs, cutoff)
        .map_err(|e| LabError::Domain(e.to_string()))?;
    let residual = rhs - &m * &coeffs;

    Ok(BasisDecomposition {
        basis_labels: labels,
        coefficients: coeffs.iter().copied().collect(),
        residual_norm: residual.norm(),
        degenerate: rank < k,
    })
}

/// Reconstructs `Σ c_b · e_b / ‖e_b‖`.
pub fn reconstruct(dec: &BasisDecomposition, basis: &[&[f64]]) -> Vec<f64> {
    let d = basis.first().map_or(0, |b| b.len());
    let mut out = vec![0.0; d];
    for (c, b) in dec.coefficients.iter().zip(basis) {
        axpy(c / norm(b), b, &mut out);
    }
    out
}
