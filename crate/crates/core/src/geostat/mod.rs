//! Spatial covariance machinery on transformed coordinates.

mod bessel;
mod covariance;
mod kriging;
mod lagcov;
mod lmc;
mod variogram;

pub use bessel::{bessel_k, ln_bessel_k};
pub use covariance::{whittle_matern, CovarianceFunction, CovarianceModel, PSD_TOLERANCE, ZERO_LAG};
pub use kriging::{apply_weights, cokrige, CokrigingOutput, CokrigingSystem};
pub use lagcov::{lag_covariance_matrices, Lag, LagCovariances};
pub use lmc::{
    default_scale_grid, fit_lmc, fit_lmc_traced, fit_nugget_matern, fit_proportional_matern,
    project_psd, LmcFit, MAX_ITER,
    REL_TOL,
};
pub use variogram::{
    empirical_cross_variogram, max_pairwise_distance, EmpiricalVariogram, LagBins, DEFAULT_BINS,
    MIN_RELIABLE_PAIRS,
};
