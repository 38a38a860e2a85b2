use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::simplex::Composition;

use super::basis::TransformBasis;
use super::forward::check_alpha;

/// Jacobian of the α-IT in the chart `(x_1, …, x_{D−1})`, with the last part
/// eliminated through `x_D = 1 − Σ x_i`:
/// `J_ij = H_ij x_j^{α−1} − H_iD x_D^{α−1}`.
pub fn alpha_it_jacobian(x: &Composition, alpha: f64) -> Result<DMatrix<f64>> {
    check_alpha(alpha)?;
    let basis = TransformBasis::new(x.dim())?;
    jacobian_with(&basis, x, alpha)
}

pub(crate) fn jacobian_with(
    basis: &TransformBasis,
    x: &Composition,
    alpha: f64,
) -> Result<DMatrix<f64>> {
    let d = x.dim();
    let parts = x.parts();
    if alpha < 1.0 {
        x.require_positive()?;
    }
    // x^(α−1), through logs; 0^0 = 1 when α = 1
    let slopes: Vec<f64> = parts
        .iter()
        .map(|&p| {
            if alpha == 1.0 {
                1.0
            } else if p == 0.0 {
                0.0
            } else {
                ((alpha - 1.0) * p.ln()).exp()
            }
        })
        .collect();
    let h = basis.helmert();
    Ok(DMatrix::from_fn(d - 1, d - 1, |i, j| {
        h[(i, j)] * slopes[j] - h[(i, d - 1)] * slopes[d - 1]
    }))
}

/// `ln |det J(x)|`; `−∞` signals a singular Jacobian.
pub fn alpha_it_jacobian_logdet(x: &Composition, alpha: f64) -> Result<f64> {
    let j = alpha_it_jacobian(x, alpha)?;
    Ok(logdet_abs(j))
}

pub(crate) fn logdet_with(basis: &TransformBasis, x: &Composition, alpha: f64) -> Result<f64> {
    Ok(logdet_abs(jacobian_with(basis, x, alpha)?))
}

/// Log-Jacobian of the ILR map in the same chart (`J_ij = H_ij/x_j − H_iD/x_D`).
pub(crate) fn ilr_logdet_with(basis: &TransformBasis, x: &Composition) -> Result<f64> {
    x.require_positive()?;
    let d = x.dim();
    let p = x.parts();
    let h = basis.helmert();
    let j = DMatrix::from_fn(d - 1, d - 1, |i, k| h[(i, k)] / p[k] - h[(i, d - 1)] / p[d - 1]);
    Ok(logdet_abs(j))
}

fn logdet_abs(j: DMatrix<f64>) -> f64 {
    let lu = j.lu();
    let u = lu.u();
    let mut acc = 0.0;
    for k in 0..u.nrows() {
        let pivot = u[(k, k)].abs();
        if pivot == 0.0 || !pivot.is_finite() {
            return f64::NEG_INFINITY;
        }
        acc += pivot.ln();
    }
    acc
}

/// Convenience check used by the likelihood: a finite log-Jacobian or an error.
pub(crate) fn finite_logdet(value: f64) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::Numerical("singular alpha-IT Jacobian".into()))
    }
}
