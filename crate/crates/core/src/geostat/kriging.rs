//! Global ordinary cokriging.
//!
//! Unknowns are ordered point-major (`i·p + a`). The system
//! `[K F; Fᵀ 0] [Λ; M] = [k₀; I]` carries one unbiasedness constraint per
//! variable. The nugget counts at zero lag, so data are reproduced exactly.

use nalgebra::{DMatrix, DVector, LU, Dyn};
use rayon::prelude::*;

use super::covariance::CovarianceModel;
use super::variogram::dist;
use crate::error::{Error, Result};
use crate::simplex::{check_distinct, Location};

const PIVOT_TOLERANCE: f64 = 1e-13;

pub struct CokrigingSystem {
    model: CovarianceModel,
    locations: Vec<Location>,
    lu: LU<f64, Dyn, Dyn>,
    /// `A⁻¹ [z; 0]`, so that a prediction is `rᵀ dual` for `r = [k₀; I]`.
    dual: DMatrix<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CokrigingOutput {
    pub predictions: Vec<Vec<f64>>,
    pub variances: Vec<Vec<f64>>,
}

impl CokrigingSystem {
    pub fn new(model: &CovarianceModel, locations: &[Location], scores: &[Vec<f64>]) -> Result<Self> {
        let n = locations.len();
        let p = model.n_variables();
        if n == 0 {
            return Err(Error::InsufficientData("no kriging data".into()));
        }
        if scores.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: scores.len(),
            });
        }
        if let Some(z) = scores.iter().find(|z| z.len() != p) {
            return Err(Error::DimensionMismatch {
                expected: p,
                found: z.len(),
            });
        }
        check_distinct(locations)?;

        let size = n * p + p;
        let mut a = DMatrix::zeros(size, size);
        for i in 0..n {
            for j in i..n {
                let c = model.covariance(dist(&locations[i], &locations[j]));
                for r in 0..p {
                    for s in 0..p {
                        a[(i * p + r, j * p + s)] = c[(r, s)];
                        a[(j * p + s, i * p + r)] = c[(r, s)];
                    }
                }
            }
            for r in 0..p {
                a[(i * p + r, n * p + r)] = 1.0;
                a[(n * p + r, i * p + r)] = 1.0;
            }
        }
        let lu = a.lu();
        let u = lu.u();
        let diag = u.diagonal().map(f64::abs);
        if !(diag.min() > PIVOT_TOLERANCE * diag.max()) {
            return Err(Error::Singular("cokriging system".into()));
        }
        let mut rhs = DMatrix::zeros(size, 1);
        for (i, z) in scores.iter().enumerate() {
            for (r, v) in z.iter().enumerate() {
                rhs[(i * p + r, 0)] = *v;
            }
        }
        let dual = lu
            .solve(&rhs)
            .ok_or_else(|| Error::Singular("cokriging system".into()))?;
        Ok(Self {
            model: model.clone(),
            locations: locations.to_vec(),
            lu,
            dual,
        })
    }

    fn n_vars(&self) -> usize {
        self.model.n_variables()
    }

    /// `[k₀; I]` for one target, `(np + p) × p`.
    fn rhs(&self, target: &Location) -> DMatrix<f64> {
        let p = self.n_vars();
        let n = self.locations.len();
        let mut r = DMatrix::zeros(n * p + p, p);
        for (i, s) in self.locations.iter().enumerate() {
            let c = self.model.covariance(dist(s, target));
            for a in 0..p {
                for b in 0..p {
                    r[(i * p + a, b)] = c[(a, b)];
                }
            }
        }
        for b in 0..p {
            r[(n * p + b, b)] = 1.0;
        }
        r
    }

    /// Weight matrix `Λ` (`np × p`, column `b` predicts variable `b`) and
    /// Lagrange multipliers `M` (`p × p`).
    pub fn weights(&self, target: &Location) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        let p = self.n_vars();
        let np = self.locations.len() * p;
        let sol = self
            .lu
            .solve(&self.rhs(target))
            .ok_or_else(|| Error::Singular("cokriging system".into()))?;
        Ok((sol.rows(0, np).into_owned(), sol.rows(np, p).into_owned()))
    }

    fn predict_one(&self, target: &Location) -> Vec<f64> {
        let r = self.rhs(target);
        (r.transpose() * &self.dual).column(0).iter().copied().collect()
    }

    pub fn predict(&self, targets: &[Location]) -> Vec<Vec<f64>> {
        targets.par_iter().map(|t| self.predict_one(t)).collect()
    }

    /// Predictions and cokriging variances; negatives from rounding are clamped to 0.
    pub fn predict_with_variance(&self, targets: &[Location]) -> Result<CokrigingOutput> {
        let sill = self.model.sill();
        let rows: Vec<Result<(Vec<f64>, Vec<f64>)>> = targets
            .par_iter()
            .map(|t| {
                let r = self.rhs(t);
                let sol = self
                    .lu
                    .solve(&r)
                    .ok_or_else(|| Error::Singular("cokriging system".into()))?;
                let pred: Vec<f64> = (r.transpose() * &self.dual).column(0).iter().copied().collect();
                let quad = r.transpose() * sol;
                let var = (0..self.n_vars())
                    .map(|b| (sill[(b, b)] - quad[(b, b)]).max(0.0))
                    .collect();
                Ok((pred, var))
            })
            .collect();
        let mut out = CokrigingOutput {
            predictions: Vec::with_capacity(targets.len()),
            variances: Vec::with_capacity(targets.len()),
        };
        for row in rows {
            let (p, v) = row?;
            out.predictions.push(p);
            out.variances.push(v);
        }
        Ok(out)
    }
}

/// Ordinary cokriging predictions and variances at `targets`.
pub fn cokrige(
    model: &CovarianceModel,
    locations: &[Location],
    scores: &[Vec<f64>],
    targets: &[Location],
) -> Result<CokrigingOutput> {
    CokrigingSystem::new(model, locations, scores)?.predict_with_variance(targets)
}

/// Prediction from explicit weights, `Λᵀ z`.
pub fn apply_weights(weights: &DMatrix<f64>, scores: &[Vec<f64>]) -> Vec<f64> {
    let z = DVector::from_iterator(
        scores.iter().map(Vec::len).sum(),
        scores.iter().flatten().copied(),
    );
    (weights.transpose() * z).iter().copied().collect()
}
