use nalgebra::DMatrix;
use statrs::function::gamma::ln_gamma;

use super::bessel::ln_bessel_k;
use crate::error::{Error, Result};

/// Lags below this are treated as zero lag.
pub const ZERO_LAG: f64 = 1e-12;

/// Eigenvalue floor accepted for coregionalization matrices.
pub const PSD_TOLERANCE: f64 = -1e-10;

/// Whittle–Matérn correlation `2^{1−ν}/Γ(ν) r^ν K_ν(r)`.
pub fn whittle_matern(r: f64, nu: f64) -> f64 {
    if r < ZERO_LAG {
        return 1.0;
    }
    let ln_w = (1.0 - nu) * std::f64::consts::LN_2 - ln_gamma(nu) + nu * r.ln() + ln_bessel_k(nu, r);
    ln_w.exp().min(1.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CovarianceFunction {
    Nugget,
    WhittleMatern { nu: f64, scale: f64 },
}

impl CovarianceFunction {
    pub fn whittle_matern(nu: f64, scale: f64) -> Result<Self> {
        if !(nu.is_finite() && nu > 0.0 && scale.is_finite() && scale > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "Whittle-Matern needs nu > 0 and scale > 0, got nu={nu}, scale={scale}"
            )));
        }
        Ok(Self::WhittleMatern { nu, scale })
    }

    /// Exponential correlation `e^{−h/s}`.
    pub fn exponential(scale: f64) -> Result<Self> {
        Self::whittle_matern(0.5, scale)
    }

    pub fn correlation(&self, h: f64) -> f64 {
        match *self {
            Self::Nugget => {
                if h < ZERO_LAG {
                    1.0
                } else {
                    0.0
                }
            }
            Self::WhittleMatern { nu, scale } => {
                if nu == 0.5 {
                    (-h / scale).exp()
                } else {
                    whittle_matern(h / scale, nu)
                }
            }
        }
    }
}

/// Linear model of coregionalization `C(h) = Σ_m B_m ρ_m(h)` over `p` variables.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceModel {
    structures: Vec<(CovarianceFunction, DMatrix<f64>)>,
}

impl CovarianceModel {
    pub fn new(structures: Vec<(CovarianceFunction, DMatrix<f64>)>) -> Result<Self> {
        let p = structures
            .first()
            .map(|s| s.1.nrows())
            .ok_or_else(|| Error::InvalidArgument("model without structures".into()))?;
        if p == 0 {
            return Err(Error::InvalidArgument("zero-variate model".into()));
        }
        for (_, b) in &structures {
            if b.shape() != (p, p) {
                return Err(Error::DimensionMismatch {
                    expected: p,
                    found: b.nrows().max(b.ncols()),
                });
            }
            let asym = (b - b.transpose()).amax();
            if asym > 1e-10 * b.amax().max(1.0) {
                return Err(Error::InvalidArgument(
                    "coregionalization matrix is not symmetric".into(),
                ));
            }
            let min_eig = b.clone().symmetric_eigenvalues().min();
            if min_eig < PSD_TOLERANCE {
                return Err(Error::InvalidArgument(format!(
                    "coregionalization matrix has eigenvalue {min_eig}"
                )));
            }
        }
        Ok(Self { structures })
    }

    /// `B · ρ(h)` with a single structure.
    pub fn proportional(function: CovarianceFunction, b: DMatrix<f64>) -> Result<Self> {
        Self::new(vec![(function, b)])
    }

    pub fn structures(&self) -> &[(CovarianceFunction, DMatrix<f64>)] {
        &self.structures
    }

    pub fn n_variables(&self) -> usize {
        self.structures[0].1.nrows()
    }

    /// True iff every `B_m` is a multiple of one matrix, so that the model is
    /// a fixed covariance matrix times one spatial correlation.
    pub fn is_proportional(&self) -> bool {
        let nonzero: Vec<&DMatrix<f64>> = self
            .structures
            .iter()
            .map(|s| &s.1)
            .filter(|b| b.amax() > 0.0)
            .collect();
        let Some(first) = nonzero.first() else {
            return true;
        };
        let f_norm = first.norm();
        nonzero.iter().all(|b| {
            let c = b.dot(first) / (f_norm * f_norm);
            (*b - *first * c).amax() <= 1e-12 * b.amax()
        })
    }

    pub fn has_nugget(&self) -> bool {
        self.structures
            .iter()
            .any(|(f, b)| matches!(f, CovarianceFunction::Nugget) && b.amax() > 0.0)
    }

    /// Cross-covariance matrix at lag `h`.
    pub fn covariance(&self, h: f64) -> DMatrix<f64> {
        let p = self.n_variables();
        let mut c = DMatrix::zeros(p, p);
        for (f, b) in &self.structures {
            let rho = f.correlation(h);
            if rho != 0.0 {
                c += b * rho;
            }
        }
        c
    }

    pub fn sill(&self) -> DMatrix<f64> {
        self.covariance(0.0)
    }

    /// Cross-semivariogram `C(0) − C(h)` for `h > 0`.
    pub fn variogram(&self, h: f64) -> DMatrix<f64> {
        let p = self.n_variables();
        let mut g = DMatrix::zeros(p, p);
        for (f, b) in &self.structures {
            let rho = if h < ZERO_LAG { 1.0 } else { f.correlation(h) };
            g += b * (1.0 - rho);
        }
        g
    }
}
