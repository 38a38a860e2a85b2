//! Distances between compositions, prediction scores and Fréchet means.

use crate::error::{Error, Result};
use crate::simplex::{aitchison_distance, Composition};
use crate::transforms::{alpha_it, alpha_it_inverse, InverseSolution};

fn check_pair(p: &Composition, q: &Composition) -> Result<()> {
    if p.dim() != q.dim() {
        return Err(Error::DimensionMismatch {
            expected: p.dim(),
            found: q.dim(),
        });
    }
    Ok(())
}

/// Hellinger distance, normalized to `[0, 1]`.
pub fn hellinger(p: &Composition, q: &Composition) -> Result<f64> {
    check_pair(p, q)?;
    let s: f64 = p
        .parts()
        .iter()
        .zip(q.parts())
        .map(|(a, b)| (a.sqrt() - b.sqrt()).powi(2))
        .sum();
    Ok((0.5 * s).sqrt().min(1.0))
}

/// Total variation distance `½ Σ |p_i − q_i|`.
pub fn total_variation(p: &Composition, q: &Composition) -> Result<f64> {
    check_pair(p, q)?;
    let s: f64 = p
        .parts()
        .iter()
        .zip(q.parts())
        .map(|(a, b)| (a - b).abs())
        .sum();
    Ok((0.5 * s).min(1.0))
}

/// Euclidean distance between α-IT images.
pub fn alpha_it_distance(x: &Composition, y: &Composition, alpha: f64) -> Result<f64> {
    check_pair(x, y)?;
    let a = alpha_it(x, alpha)?.coords;
    let b = alpha_it(y, alpha)?.coords;
    Ok(euclidean(&a, &b))
}

/// α-IT distance where `alpha == 0` means the Aitchison distance.
pub fn alpha_it_or_aitchison_distance(x: &Composition, y: &Composition, alpha: f64) -> Result<f64> {
    if alpha == 0.0 {
        aitchison_distance(x, y)
    } else {
        alpha_it_distance(x, y, alpha)
    }
}

pub(crate) fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(u, v)| (u - v).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Fréchet mean under the α-IT metric: the back-transformed mean of the images.
///
/// When the averaged image leaves the codomain, the inverse already returns the
/// minimizer of `Σ d²_{α-IT}(x_i, ·)` over the closed simplex, since that sum
/// differs from `n·Q²` at the mean by a constant.
pub fn frechet_mean(xs: &[Composition], alpha: f64) -> Result<InverseSolution> {
    let first = xs
        .first()
        .ok_or_else(|| Error::InsufficientData("empty sample".into()))?;
    let mut mean = vec![0.0; first.dim() - 1];
    for x in xs {
        check_pair(first, x)?;
        for (m, v) in mean.iter_mut().zip(alpha_it(x, alpha)?.coords) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= xs.len() as f64);
    alpha_it_inverse(&mean, alpha)
}

/// Averaged prediction scores over aligned truth/prediction pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreReport {
    pub hellinger_mean: f64,
    pub total_variation_mean: f64,
    /// Root-mean-square α-IT distance (Aitchison when `alpha_used == 0`).
    pub alpha_it_rmse: f64,
    pub alpha_used: f64,
    pub n_pairs: usize,
    /// Normalization for `δ_α/σ`; set by the caller, `NaN` until then.
    pub sigma: f64,
}

impl ScoreReport {
    pub fn with_sigma(mut self, sigma: f64) -> Self {
        self.sigma = sigma;
        self
    }

    pub fn normalized_rmse(&self) -> f64 {
        self.alpha_it_rmse / self.sigma
    }
}

pub fn score_predictions(
    truth: &[Composition],
    predicted: &[Composition],
    alpha: f64,
) -> Result<ScoreReport> {
    if truth.len() != predicted.len() {
        return Err(Error::DimensionMismatch {
            expected: truth.len(),
            found: predicted.len(),
        });
    }
    if truth.is_empty() {
        return Err(Error::InsufficientData("no prediction pairs".into()));
    }
    let n = truth.len() as f64;
    let (mut h, mut tv, mut sq) = (0.0, 0.0, 0.0);
    for (t, p) in truth.iter().zip(predicted) {
        h += hellinger(t, p)?;
        tv += total_variation(t, p)?;
        sq += alpha_it_or_aitchison_distance(t, p, alpha)?.powi(2);
    }
    Ok(ScoreReport {
        hellinger_mean: h / n,
        total_variation_mean: tv / n,
        alpha_it_rmse: (sq / n).sqrt(),
        alpha_used: alpha,
        n_pairs: truth.len(),
        sigma: f64::NAN,
    })
}

/// Pooled standard deviation over all coordinates of a set of score vectors:
/// each coordinate is centered on its own mean, the squared deviations are
/// pooled, and the divisor is `n·k − k`.
pub fn pooled_std(scores: &[Vec<f64>]) -> Result<f64> {
    let n = scores.len();
    if n < 2 {
        return Err(Error::InsufficientData("pooled std needs 2 vectors".into()));
    }
    let k = scores[0].len();
    let mut mean = vec![0.0; k];
    for z in scores {
        if z.len() != k {
            return Err(Error::DimensionMismatch {
                expected: k,
                found: z.len(),
            });
        }
        for (m, v) in mean.iter_mut().zip(z) {
            *m += v / n as f64;
        }
    }
    let ss: f64 = scores
        .iter()
        .flat_map(|z| z.iter().zip(&mean).map(|(v, m)| (v - m).powi(2)))
        .sum();
    Ok((ss / ((n - 1) * k) as f64).sqrt())
}
