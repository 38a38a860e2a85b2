//! Method-of-moments lagged covariance matrices of a compositional field:
//! the variation matrix, CLR/ILR cross-covariances and their α counterparts.
//!
//! Every matrix at a given lag uses the same set of ordered point pairs and
//! global means, so linear identities between them hold to rounding.

use nalgebra::{DMatrix, DVector};

use super::variogram::dist;
use crate::error::{Error, Result};
use crate::simplex::CompositionalField;
use crate::transforms::{alpha_ct, alpha_it, clr, ilr};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Lag {
    Zero,
    /// Pairs with `lo < ‖s − t‖ ≤ hi`.
    Band { lo: f64, hi: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct LagCovariances {
    pub lag: Lag,
    /// Ordered pairs used (both orientations counted).
    pub pairs: usize,
    /// `T(h)`, lagged covariances of the log-ratios `ln(x_i/x_j)`.
    pub variation: DMatrix<f64>,
    /// `Ξ(h)`.
    pub clr_cov: DMatrix<f64>,
    /// `Φ(h)`.
    pub ilr_cov: DMatrix<f64>,
    /// `Ξ_α(h)`.
    pub alpha_ct_cov: DMatrix<f64>,
    /// `Φ_α(h)`.
    pub alpha_it_cov: DMatrix<f64>,
}

fn pair_set(field: &CompositionalField, lag: Lag) -> Vec<(usize, usize)> {
    let n = field.len();
    match lag {
        Lag::Zero => (0..n).map(|i| (i, i)).collect(),
        Lag::Band { lo, hi } => {
            let locs = field.locations();
            let mut out = Vec::new();
            for i in 0..n {
                for j in i + 1..n {
                    let h = dist(&locs[i], &locs[j]);
                    if h > lo && h <= hi {
                        out.push((i, j));
                        out.push((j, i));
                    }
                }
            }
            out
        }
    }
}

/// `(1/|P|) Σ_{(s,t)∈P} (a(s) − ā)(a(t) − ā)ᵀ`.
fn lagged_cov(values: &[DVector<f64>], pairs: &[(usize, usize)]) -> DMatrix<f64> {
    let k = values[0].len();
    let mean = values.iter().fold(DVector::zeros(k), |acc, v| acc + v) / values.len() as f64;
    let centered: Vec<DVector<f64>> = values.iter().map(|v| v - &mean).collect();
    let mut c = DMatrix::zeros(k, k);
    for &(s, t) in pairs {
        c.ger(1.0, &centered[s], &centered[t], 1.0);
    }
    c / pairs.len() as f64
}

pub fn lag_covariance_matrices(
    field: &CompositionalField,
    alpha: f64,
    lags: &[Lag],
) -> Result<Vec<LagCovariances>> {
    let d = field.dim();
    let mut logratios = Vec::with_capacity(field.len());
    let mut clrs = Vec::with_capacity(field.len());
    let mut ilrs = Vec::with_capacity(field.len());
    let mut cts = Vec::with_capacity(field.len());
    let mut its = Vec::with_capacity(field.len());
    for x in field.compositions() {
        let l = x.ln_parts()?;
        logratios.push(DVector::from_fn(d * d, |k, _| l[k / d] - l[k % d]));
        clrs.push(DVector::from_vec(clr(x)?));
        ilrs.push(DVector::from_vec(ilr(x)?));
        cts.push(DVector::from_vec(alpha_ct(x, alpha)?.coords));
        its.push(DVector::from_vec(alpha_it(x, alpha)?.coords));
    }

    lags.iter()
        .map(|&lag| {
            let pairs = pair_set(field, lag);
            if pairs.is_empty() {
                return Err(Error::InsufficientData(format!("no point pairs at lag {lag:?}")));
            }
            // the variation matrix only needs the diagonal of the D²×D² log-ratio covariance
            let full = lagged_cov(&logratios, &pairs);
            let variation = DMatrix::from_fn(d, d, |i, j| full[(i * d + j, i * d + j)]);
            Ok(LagCovariances {
                lag,
                pairs: pairs.len(),
                variation,
                clr_cov: lagged_cov(&clrs, &pairs),
                ilr_cov: lagged_cov(&ilrs, &pairs),
                alpha_ct_cov: lagged_cov(&cts, &pairs),
                alpha_it_cov: lagged_cov(&its, &pairs),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simplex::{closure, Composition, Location};
    use crate::transforms::TransformBasis;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn field(n: usize, d: usize, seed: u64) -> CompositionalField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let locs: Vec<Location> = (0..n)
            .map(|_| [rng.random::<f64>() * 5.0, rng.random::<f64>() * 5.0])
            .collect();
        let xs: Vec<Composition> = (0..n)
            .map(|_| {
                let v: Vec<f64> = (0..d).map(|_| rng.random_range(0.05..1.0)).collect();
                closure(&v).unwrap()
            })
            .collect();
        CompositionalField::new(locs, xs).unwrap()
    }

    #[test]
    fn identities_at_zero_and_band() {
        let f = field(60, 4, 1);
        let basis = TransformBasis::new(4).unwrap();
        let g = basis.centering();
        let h = basis.helmert();
        let out = lag_covariance_matrices(&f, 0.3, &[Lag::Zero, Lag::Band { lo: 0.5, hi: 1.5 }]).unwrap();
        for lc in &out {
            let lhs = &lc.clr_cov + lc.clr_cov.transpose();
            let rhs = -(g * &lc.variation * g.transpose());
            assert!((lhs - rhs).amax() < 1e-10);
            assert!((h * &lc.clr_cov * h.transpose() - &lc.ilr_cov).amax() < 1e-10);
            assert!((h * &lc.alpha_ct_cov * h.transpose() - &lc.alpha_it_cov).amax() < 1e-10);
        }
        assert_eq!(out[0].pairs, 60);
        assert!((&out[0].clr_cov - out[0].clr_cov.transpose()).amax() < 1e-14);
    }

    #[test]
    fn zeros_are_rejected() {
        let locs = vec![[0.0, 0.0], [1.0, 0.0]];
        let xs = vec![closure(&[0.5, 0.5, 0.0]).unwrap(), closure(&[0.2, 0.3, 0.5]).unwrap()];
        let f = CompositionalField::new(locs, xs).unwrap();
        assert!(lag_covariance_matrices(&f, 0.5, &[Lag::Zero]).is_err());
    }
}
