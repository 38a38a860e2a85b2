use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Helmert basis `H_D` of the zero-sum hyperplane and the centering matrix `G_D`.
///
/// Row `i` (1-based) has `i` leading entries `1/√(i(i+1))`, then `-i/√(i(i+1))`,
/// then zeros. Rows are orthonormal and orthogonal to the ones vector, so
/// `H Hᵀ = I_{D-1}` and `Hᵀ H = G_D = I_D - J_D / D`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformBasis {
    dim: usize,
    helmert: DMatrix<f64>,
    centering: DMatrix<f64>,
}

impl TransformBasis {
    pub fn new(dim: usize) -> Result<Self> {
        if dim < 2 {
            return Err(Error::DimensionTooSmall(dim));
        }
        let mut helmert = DMatrix::zeros(dim - 1, dim);
        for r in 0..dim - 1 {
            let i = (r + 1) as f64;
            let norm = (i * (i + 1.0)).sqrt();
            for k in 0..=r {
                helmert[(r, k)] = 1.0 / norm;
            }
            helmert[(r, r + 1)] = -i / norm;
        }
        let centering =
            DMatrix::identity(dim, dim) - DMatrix::from_element(dim, dim, 1.0 / dim as f64);
        Ok(Self {
            dim,
            helmert,
            centering,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn helmert(&self) -> &DMatrix<f64> {
        &self.helmert
    }

    pub fn centering(&self) -> &DMatrix<f64> {
        &self.centering
    }
}

/// Computes `H_D v` in O(D) without materializing the matrix.
pub(crate) fn helmert_apply(v: &[f64]) -> Vec<f64> {
    let d = v.len();
    let mut out = Vec::with_capacity(d.saturating_sub(1));
    let mut prefix = 0.0;
    for r in 0..d.saturating_sub(1) {
        prefix += v[r];
        let i = (r + 1) as f64;
        out.push((prefix - i * v[r + 1]) / (i * (i + 1.0)).sqrt());
    }
    out
}

/// Computes `H_Dᵀ z` in O(D); the result sums to zero.
pub(crate) fn helmert_transpose_apply(z: &[f64]) -> Vec<f64> {
    let d = z.len() + 1;
    let mut out = vec![0.0; d];
    let mut suffix = 0.0;
    for k in (0..d).rev() {
        // rows r >= k contribute 1/√((r+1)(r+2)) to column k
        if k < d - 1 {
            let i = (k + 1) as f64;
            suffix += z[k] / (i * (i + 1.0)).sqrt();
        }
        let mut value = suffix;
        if k >= 1 {
            let i = k as f64;
            value -= i * z[k - 1] / (i * (i + 1.0)).sqrt();
        }
        out[k] = value;
    }
    out
}
