//! Maximum-likelihood estimation of α.
//!
//! The transformed sample is modeled as i.i.d. multivariate Gaussian, with the
//! Jacobian of the α-IT carrying the density back to the simplex. Compositions
//! with zeros are grouped by zero pattern, and each group contributes the
//! likelihood of its own sub-simplex.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::optim::golden_section_max;
use crate::simplex::{subcompose, zero_pattern, Composition, ZeroPattern};
use crate::transforms::{
    alpha_it_or_ilr, finite_logdet, ilr_logdet_with, logdet_with, TransformBasis, ILR_SWITCH,
};

/// Relative ridge added to the ML covariance before factorization.
pub const COVARIANCE_RIDGE: f64 = 1e-10;
const DEGENERATE_EIGEN: f64 = 1e-20;

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianFit {
    pub mean: DVector<f64>,
    pub covariance: DMatrix<f64>,
    pub n: usize,
    /// `Σ (z_k − μ̂)ᵀ Σ̂⁻¹ (z_k − μ̂)`; equals `n·k` up to the ridge.
    pub quadratic_sum: f64,
}

/// ML Gaussian fit (divisor `n`) and the profiled log-likelihood
/// `−(n/2) ln|Σ̂| − ½ Σ (z_k − μ̂)ᵀ Σ̂⁻¹ (z_k − μ̂)`.
pub fn gaussian_loglik(zs: &[Vec<f64>]) -> Result<(GaussianFit, f64)> {
    let n = zs.len();
    let k = zs.first().map(|z| z.len()).unwrap_or(0);
    if k == 0 {
        return Err(Error::InsufficientData("empty sample".into()));
    }
    if n < k + 1 {
        return Err(Error::InsufficientData(format!(
            "{n} vectors cannot fit a {k}-variate Gaussian"
        )));
    }
    let mut mean = DVector::zeros(k);
    for z in zs {
        if z.len() != k {
            return Err(Error::DimensionMismatch {
                expected: k,
                found: z.len(),
            });
        }
        for (m, v) in mean.iter_mut().zip(z) {
            *m += v;
        }
    }
    mean /= n as f64;
    let mut cov = DMatrix::zeros(k, k);
    for z in zs {
        let d = DVector::from_column_slice(z) - &mean;
        cov.ger(1.0, &d, &d, 1.0);
    }
    cov /= n as f64;
    cov = (&cov + cov.transpose()) * 0.5;

    // eigenvalues at round-off level of the data mean a degenerate sample
    let scale = (cov.trace() + mean.norm_squared()) / k as f64;
    let min_eig = cov.clone().symmetric_eigenvalues().min();
    if !(min_eig > DEGENERATE_EIGEN * scale) {
        return Err(Error::Singular("transformed sample covariance is rank deficient".into()));
    }
    let ridge = COVARIANCE_RIDGE * cov.trace() / k as f64;
    let mut reg = cov.clone();
    for i in 0..k {
        reg[(i, i)] += ridge;
    }
    let chol = reg
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Singular("transformed sample covariance is rank deficient".into()))?;
    let logdet: f64 = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    if !logdet.is_finite() {
        return Err(Error::Singular("transformed sample covariance is degenerate".into()));
    }
    let mut quadratic_sum = 0.0;
    for z in zs {
        let d = DVector::from_column_slice(z) - &mean;
        let sol = chol.solve(&d);
        quadratic_sum += d.dot(&sol);
    }
    let loglik = -0.5 * n as f64 * logdet - 0.5 * quadratic_sum;
    Ok((
        GaussianFit {
            mean,
            covariance: reg,
            n,
            quadratic_sum,
        },
        loglik,
    ))
}

/// Log-likelihood of α for strictly positive compositions (one simplex, no zeros).
pub fn loglik_alpha(xs: &[Composition], alpha: f64) -> Result<f64> {
    let first = xs
        .first()
        .ok_or_else(|| Error::InsufficientData("empty sample".into()))?;
    let d = first.dim();
    if xs.len() < d {
        return Err(Error::InsufficientData(format!(
            "{} compositions for dimension {d}",
            xs.len()
        )));
    }
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(Error::InvalidAlpha(alpha));
    }
    let basis = TransformBasis::new(d)?;
    // canonical order makes the value bitwise independent of sample order
    let mut order: Vec<&Composition> = xs.iter().collect();
    order.sort_by(|a, b| {
        a.parts()
            .iter()
            .zip(b.parts())
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let mut zs = Vec::with_capacity(xs.len());
    let mut jac = 0.0;
    for x in order {
        if x.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: x.dim(),
            });
        }
        x.require_positive()?;
        zs.push(alpha_it_or_ilr(x, alpha)?);
        let ld = if alpha < ILR_SWITCH {
            ilr_logdet_with(&basis, x)?
        } else {
            logdet_with(&basis, x, alpha)?
        };
        jac += finite_logdet(ld)?;
    }
    let (_, ll) = gaussian_loglik(&zs)?;
    Ok(ll + jac)
}

/// One term of the zero-pattern decomposition.
#[derive(Debug, Clone, PartialEq)]
pub struct PatternTerm {
    pub pattern: ZeroPattern,
    pub count: usize,
    pub loglik: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ZeroLikelihood {
    pub total: f64,
    pub terms: Vec<PatternTerm>,
    /// Groups with fewer members than their sub-simplex dimension.
    pub skipped: Vec<(ZeroPattern, usize)>,
    /// Compositions with a single positive part, left out entirely.
    pub excluded: usize,
}

/// Compositions grouped by zero pattern, restricted to their positive parts.
#[derive(Debug, Clone)]
pub struct PatternGroups {
    pub groups: BTreeMap<ZeroPattern, Vec<Composition>>,
    pub excluded: usize,
}

pub fn group_by_pattern(xs: &[Composition]) -> Result<PatternGroups> {
    let mut groups: BTreeMap<ZeroPattern, Vec<Composition>> = BTreeMap::new();
    let mut excluded = 0;
    for x in xs {
        let p = zero_pattern(x);
        if p.effective_dim() < 2 {
            excluded += 1;
            continue;
        }
        let sub = subcompose(x, &p)?;
        groups.entry(p).or_default().push(sub);
    }
    Ok(PatternGroups { groups, excluded })
}

impl PatternGroups {
    pub fn counts(&self) -> BTreeMap<ZeroPattern, usize> {
        self.groups.iter().map(|(p, v)| (p.clone(), v.len())).collect()
    }

    pub fn loglik(&self, alpha: f64) -> Result<ZeroLikelihood> {
        let mut terms = Vec::new();
        let mut skipped = Vec::new();
        for (pattern, members) in &self.groups {
            if members.len() < pattern.effective_dim() {
                skipped.push((pattern.clone(), members.len()));
                continue;
            }
            terms.push(PatternTerm {
                pattern: pattern.clone(),
                count: members.len(),
                loglik: loglik_alpha(members, alpha)?,
            });
        }
        if terms.is_empty() {
            return Err(Error::InsufficientData(
                "every zero-pattern group is too small".into(),
            ));
        }
        Ok(ZeroLikelihood {
            total: terms.iter().map(|t| t.loglik).sum(),
            terms,
            skipped,
            excluded: self.excluded,
        })
    }
}

/// Log-likelihood summed over zero-pattern groups.
pub fn loglik_alpha_with_zeros(xs: &[Composition], alpha: f64) -> Result<ZeroLikelihood> {
    group_by_pattern(xs)?.loglik(alpha)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlphaEstimate {
    pub alpha_hat: f64,
    pub loglik_at_hat: f64,
    /// Coarse-grid profile `(α, ℒ₀(α))`; failed grid points are omitted.
    pub profile: Vec<(f64, f64)>,
    pub pattern_counts: BTreeMap<ZeroPattern, usize>,
    pub skipped_patterns: Vec<ZeroPattern>,
    pub excluded: usize,
}

/// Grid-scan on `[grid_step, alpha_max]` followed by golden-section refinement
/// to `1e-4` around the best grid point.
pub fn estimate_alpha(xs: &[Composition], alpha_max: f64, grid_step: f64) -> Result<AlphaEstimate> {
    if !(grid_step > 0.0 && alpha_max >= grid_step) {
        return Err(Error::InvalidArgument(format!(
            "alpha grid [{grid_step}, {alpha_max}]"
        )));
    }
    let groups = group_by_pattern(xs)?;
    let steps = ((alpha_max / grid_step) + 1e-9).floor() as usize;
    let grid: Vec<f64> = (1..=steps).map(|i| i as f64 * grid_step).collect();

    let values: Vec<Option<f64>> = grid
        .par_iter()
        .map(|&a| groups.loglik(a).ok().map(|l| l.total))
        .collect();
    let profile: Vec<(f64, f64)> = grid
        .iter()
        .zip(&values)
        .filter_map(|(a, v)| v.filter(|x| x.is_finite()).map(|x| (*a, x)))
        .collect();
    let (best_idx, _) = values
        .iter()
        .enumerate()
        .filter_map(|(i, v)| v.filter(|x| x.is_finite()).map(|x| (i, x)))
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .ok_or_else(|| Error::Numerical("likelihood undefined on the whole alpha grid".into()))?;
    if profile.len() > 1 && profile.iter().all(|p| p.1 == profile[0].1) {
        return Err(Error::Numerical("flat likelihood profile".into()));
    }

    let lo = if best_idx == 0 {
        grid_step * 1e-2
    } else {
        grid[best_idx - 1]
    };
    let hi = if best_idx + 1 < grid.len() {
        grid[best_idx + 1]
    } else {
        grid[best_idx]
    };
    let f = |a: f64| groups.loglik(a).map(|l| l.total).unwrap_or(f64::NEG_INFINITY);
    let (mut alpha_hat, mut loglik_at_hat) = golden_section_max(f, lo, hi, 1e-4);
    let grid_best = values[best_idx].unwrap();
    if !(loglik_at_hat >= grid_best) {
        alpha_hat = grid[best_idx];
        loglik_at_hat = grid_best;
    }
    let last = groups.loglik(alpha_hat)?;

    Ok(AlphaEstimate {
        alpha_hat,
        loglik_at_hat,
        profile,
        pattern_counts: groups.counts(),
        skipped_patterns: last.skipped.into_iter().map(|(p, _)| p).collect(),
        excluded: groups.excluded,
    })
}
