use crate::error::{Error, Result};
use crate::simplex::Composition;

use super::basis::helmert_apply;

/// Below this α the power transforms are replaced by their log-ratio limits.
pub const ILR_SWITCH: f64 = 1e-6;

/// Transformed coordinates together with the α that produced them
/// (α = 0 marks the log-ratio limit).
#[derive(Debug, Clone, PartialEq)]
pub struct EuclideanScores {
    pub alpha: f64,
    pub coords: Vec<f64>,
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(Error::InvalidAlpha(alpha));
    }
    Ok(())
}

/// Centered log-ratio coordinates; they sum to zero.
pub fn clr(x: &Composition) -> Result<Vec<f64>> {
    let logs = x.ln_parts()?;
    let mean = logs.iter().sum::<f64>() / logs.len() as f64;
    Ok(logs.iter().map(|l| l - mean).collect())
}

/// Isometric log-ratio coordinates `H_D clr(x)`.
pub fn ilr(x: &Composition) -> Result<Vec<f64>> {
    Ok(helmert_apply(&clr(x)?))
}

/// Box-Cox image `(x_i^α − 1)/α`, evaluated through `expm1` so that small α
/// does not cancel. Zero parts map to `−1/α`.
pub(crate) fn box_cox(x: &Composition, alpha: f64) -> Vec<f64> {
    x.parts()
        .iter()
        .map(|&p| {
            if p == 0.0 {
                -1.0 / alpha
            } else {
                (alpha * p.ln()).exp_m1() / alpha
            }
        })
        .collect()
}

fn small_alpha_guard(x: &Composition, alpha: f64) -> Result<bool> {
    check_alpha(alpha)?;
    if alpha < ILR_SWITCH {
        x.require_positive()?;
        return Ok(true);
    }
    Ok(false)
}

/// Centered α-transformation `α⁻¹ G_D x^α` (zero-sum, in R^D).
pub fn alpha_ct(x: &Composition, alpha: f64) -> Result<EuclideanScores> {
    if small_alpha_guard(x, alpha)? {
        return Ok(EuclideanScores {
            alpha,
            coords: clr(x)?,
        });
    }
    let mut u = box_cox(x, alpha);
    let mean = u.iter().sum::<f64>() / u.len() as f64;
    u.iter_mut().for_each(|v| *v -= mean);
    Ok(EuclideanScores { alpha, coords: u })
}

/// Isometric α-transformation `α⁻¹ H_D x^α` (in R^{D−1}).
pub fn alpha_it(x: &Composition, alpha: f64) -> Result<EuclideanScores> {
    if small_alpha_guard(x, alpha)? {
        return Ok(EuclideanScores {
            alpha,
            coords: ilr(x)?,
        });
    }
    // H annihilates constants, so the Box-Cox shift by 1 is invisible.
    Ok(EuclideanScores {
        alpha,
        coords: helmert_apply(&box_cox(x, alpha)),
    })
}

/// α-IT coordinates, with `alpha == 0` meaning the ILR limit.
pub fn alpha_it_or_ilr(x: &Composition, alpha: f64) -> Result<Vec<f64>> {
    if alpha == 0.0 {
        ilr(x)
    } else {
        Ok(alpha_it(x, alpha)?.coords)
    }
}

/// The closure-based α-transformation `α⁻¹ H_D (D·C(x^α) − 1_D)`, kept for comparison.
pub fn tsagris_alpha(x: &Composition, alpha: f64) -> Result<Vec<f64>> {
    check_alpha(alpha)?;
    let d = x.dim() as f64;
    let powered: Vec<f64> = x.parts().iter().map(|p| p.powf(alpha)).collect();
    let total: f64 = powered.iter().sum();
    let centered: Vec<f64> = powered
        .iter()
        .map(|p| (d * p / total - 1.0) / alpha)
        .collect();
    Ok(helmert_apply(&centered))
}

/// Box-Cox of the ratios to the last part; `alpha == 0` gives the additive log-ratio.
pub fn alr_boxcox(x: &Composition, alpha: f64) -> Result<Vec<f64>> {
    if !(alpha.is_finite() && alpha >= 0.0) {
        return Err(Error::InvalidAlpha(alpha));
    }
    let parts = x.parts();
    let d = parts.len();
    if parts[d - 1] <= 0.0 {
        return Err(Error::ZeroPart { index: d - 1 });
    }
    if alpha == 0.0 {
        x.require_positive()?;
    }
    let ln_den = parts[d - 1].ln();
    Ok(parts[..d - 1]
        .iter()
        .map(|&p| {
            if p == 0.0 {
                -1.0 / alpha
            } else if alpha == 0.0 {
                p.ln() - ln_den
            } else {
                (alpha * (p.ln() - ln_den)).exp_m1() / alpha
            }
        })
        .collect())
}
