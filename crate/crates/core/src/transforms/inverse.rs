//! Numerical inverse of the isometric α-transformation.
//!
//! `x = argmin_{y ∈ S₀^D} ‖Hᵀz − α⁻¹ G y^α‖`. The objective vanishes exactly
//! when `y^α = α Hᵀz + m·1` for some `m`, and with `Σ y = 1` that is a monotone
//! scalar equation in `m`. Points of the codomain are therefore recovered by a
//! safeguarded Newton solve; points outside it fall back to a Nelder–Mead
//! search over the softmax parametrization, refined on the border.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::optim::{nelder_mead, NelderMeadOptions};
use crate::simplex::{closure, closure_from_logs, Composition};

use super::basis::helmert_transpose_apply;
use super::forward::{check_alpha, ILR_SWITCH};

#[derive(Debug, Clone, Copy)]
pub struct InverseOptions {
    /// Random restarts of the boundary search, on top of one deterministic start.
    pub restarts: usize,
    pub tolerance: f64,
    /// Parts below this are snapped to zero during boundary refinement.
    pub boundary_part: f64,
    /// Refinement only triggers when the residual exceeds this.
    pub boundary_residual: f64,
}

impl Default for InverseOptions {
    fn default() -> Self {
        Self {
            restarts: 3,
            tolerance: 1e-12,
            boundary_part: 1e-7,
            boundary_residual: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InverseSolution {
    pub composition: Composition,
    /// `Q_z` at the returned composition; zero (to rounding) inside the codomain.
    pub residual: f64,
    /// False when the boundary search hit its iteration cap on every start.
    pub converged: bool,
    /// True when `z` lies outside the codomain and the solution sits on the border.
    pub on_boundary: bool,
}

fn check_scores(z: &[f64]) -> Result<()> {
    if z.is_empty() {
        return Err(Error::DimensionTooSmall(z.len() + 1));
    }
    if let Some(index) = z.iter().position(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument(format!("score {index} is not finite")));
    }
    Ok(())
}

/// `Q_z(y) = ‖Hᵀz − α⁻¹ G y^α‖`.
pub fn inverse_residual(z: &[f64], alpha: f64, y: &Composition) -> Result<f64> {
    check_alpha(alpha)?;
    check_scores(z)?;
    if y.dim() != z.len() + 1 {
        return Err(Error::DimensionMismatch {
            expected: z.len() + 1,
            found: y.dim(),
        });
    }
    let target = helmert_transpose_apply(z);
    Ok(residual_against(&target, alpha, y.parts()))
}

fn residual_against(target: &[f64], alpha: f64, y: &[f64]) -> f64 {
    let bc: Vec<f64> = y
        .iter()
        .map(|&p| {
            if p <= 0.0 {
                -1.0 / alpha
            } else {
                (alpha * p.ln()).exp_m1() / alpha
            }
        })
        .collect();
    let mean = bc.iter().sum::<f64>() / bc.len() as f64;
    target
        .iter()
        .zip(&bc)
        .map(|(t, b)| (t - (b - mean)).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Shifted powers `t_i = α (v_i − min v)` with `v = Hᵀz`.
fn shifted_powers(z: &[f64], alpha: f64) -> Vec<f64> {
    let v = helmert_transpose_apply(z);
    let vmin = v.iter().cloned().fold(f64::INFINITY, f64::min);
    v.iter().map(|vi| alpha * (vi - vmin)).collect()
}

fn power_sum(t: &[f64], s: f64, inv_alpha: f64) -> f64 {
    t.iter()
        .map(|&ti| {
            let b = ti + s;
            if b <= 0.0 {
                0.0
            } else {
                (inv_alpha * b.ln()).exp()
            }
        })
        .sum()
}

/// Codomain membership margin: `Σ (α(v_i − min v))^{1/α} − 1` with `v = Hᵀz`.
///
/// Non-positive exactly when `z` is the image of some composition; zero on the
/// image of the simplex border.
pub fn codomain_excess(z: &[f64], alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    check_scores(z)?;
    if alpha < ILR_SWITCH {
        return Ok(f64::NEG_INFINITY);
    }
    Ok(power_sum(&shifted_powers(z, alpha), 0.0, 1.0 / alpha) - 1.0)
}

pub fn in_codomain(z: &[f64], alpha: f64) -> Result<bool> {
    Ok(codomain_excess(z, alpha)? <= 0.0)
}

/// Inverts with the default options and a fixed seed for the boundary search.
pub fn alpha_it_inverse(z: &[f64], alpha: f64) -> Result<InverseSolution> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    alpha_it_inverse_with(z, alpha, &InverseOptions::default(), &mut rng)
}

/// Inverse of the α-IT (or of the ILR when `alpha == 0`).
pub fn alpha_it_or_ilr_inverse(z: &[f64], alpha: f64) -> Result<InverseSolution> {
    if alpha == 0.0 {
        check_scores(z)?;
        return ilr_inverse(z);
    }
    alpha_it_inverse(z, alpha)
}

fn ilr_inverse(z: &[f64]) -> Result<InverseSolution> {
    let composition = closure_from_logs(&helmert_transpose_apply(z))?;
    Ok(InverseSolution {
        composition,
        residual: 0.0,
        converged: true,
        on_boundary: false,
    })
}

pub fn alpha_it_inverse_with<R: Rng + ?Sized>(
    z: &[f64],
    alpha: f64,
    opts: &InverseOptions,
    rng: &mut R,
) -> Result<InverseSolution> {
    check_alpha(alpha)?;
    check_scores(z)?;
    if alpha < ILR_SWITCH {
        return ilr_inverse(z);
    }
    let t = shifted_powers(z, alpha);
    let inv_alpha = 1.0 / alpha;
    if power_sum(&t, 0.0, inv_alpha) <= 1.0 {
        let s = solve_shift(&t, inv_alpha);
        let parts: Vec<f64> = t
            .iter()
            .map(|&ti| {
                let b = ti + s;
                if b <= 0.0 {
                    0.0
                } else {
                    (inv_alpha * b.ln()).exp()
                }
            })
            .collect();
        let composition = closure(&parts)?;
        let target = helmert_transpose_apply(z);
        let residual = residual_against(&target, alpha, composition.parts());
        return Ok(InverseSolution {
            composition,
            residual,
            converged: true,
            on_boundary: false,
        });
    }
    boundary_search(z, alpha, &t, opts, rng)
}

/// Root of `Σ (t_i + s)^{1/α} = 1` on `s ≥ 0`, given that the sum at 0 is ≤ 1.
fn solve_shift(t: &[f64], inv_alpha: f64) -> f64 {
    let g = |s: f64| power_sum(t, s, inv_alpha) - 1.0;
    let dg = |s: f64| {
        inv_alpha
            * t.iter()
                .map(|&ti| {
                    let b = ti + s;
                    if b <= 0.0 {
                        0.0
                    } else {
                        ((inv_alpha - 1.0) * b.ln()).exp()
                    }
                })
                .sum::<f64>()
    };
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    if g(lo) >= 0.0 {
        return 0.0;
    }
    let mut s = 0.5;
    for _ in 0..200 {
        let gs = g(s);
        if gs == 0.0 {
            return s;
        }
        if gs < 0.0 {
            lo = s;
        } else {
            hi = s;
        }
        let d = dg(s);
        let newton = s - gs / d;
        s = if d > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if hi - lo <= f64::EPSILON * hi.max(1e-300) || (s - lo).min(hi - s) == 0.0 {
            break;
        }
        if (gs.abs()) < 1e-16 {
            break;
        }
    }
    s
}

/// Minimizes `Q_z` for `z` outside the codomain.
fn boundary_search<R: Rng + ?Sized>(
    z: &[f64],
    alpha: f64,
    t: &[f64],
    opts: &InverseOptions,
    rng: &mut R,
) -> Result<InverseSolution> {
    let d = z.len() + 1;
    let target = helmert_transpose_apply(z);
    let nm = NelderMeadOptions {
        max_iter: (10 * (d - 1) * (d - 1)).max(2000),
        f_tol: opts.tolerance,
        x_tol: opts.tolerance,
        initial_step: 1.0,
    };

    // deterministic start: clip the exact-solution formula at the minimum part
    let clipped: Vec<f64> = t
        .iter()
        .map(|&ti| (ti.max(1e-12).ln() / alpha).max(-700.0))
        .collect();

    let mut active: Vec<usize> = (0..d).collect();
    let mut start_logs = clipped;
    let (mut best_parts, mut best_value, mut converged) =
        minimize_on_face(&target, alpha, &active, &start_logs, opts.restarts, &nm, rng);

    // refine on faces of the simplex while parts collapse to zero
    loop {
        if best_value <= opts.boundary_residual || active.len() <= 1 {
            break;
        }
        let keep: Vec<usize> = active
            .iter()
            .copied()
            .filter(|&i| best_parts[i] >= opts.boundary_part)
            .collect();
        if keep.len() == active.len() || keep.is_empty() {
            break;
        }
        start_logs = (0..d)
            .map(|i| best_parts[i].max(1e-300).ln())
            .collect();
        let (parts, value, conv) =
            minimize_on_face(&target, alpha, &keep, &start_logs, opts.restarts, &nm, rng);
        if value <= best_value + opts.tolerance {
            best_parts = parts;
            best_value = value;
            converged = conv;
            active = keep;
        } else {
            break;
        }
    }

    // the search cannot reach exact zeros; snap dust parts one at a time
    let mut composition = closure(&best_parts)?;
    let mut residual = residual_against(&target, alpha, composition.parts());
    let mut order: Vec<usize> = (0..d)
        .filter(|&i| composition.parts()[i] > 0.0 && composition.parts()[i] < opts.boundary_part)
        .collect();
    order.sort_by(|&a, &b| composition.parts()[a].total_cmp(&composition.parts()[b]));
    for i in order {
        let mut parts = composition.parts().to_vec();
        parts[i] = 0.0;
        if parts.iter().filter(|&&p| p > 0.0).count() == 0 {
            break;
        }
        let snapped = closure(&parts)?;
        let value = residual_against(&target, alpha, snapped.parts());
        if value <= residual + opts.tolerance * residual.max(1.0) {
            composition = snapped;
            residual = value;
        }
    }
    Ok(InverseSolution {
        on_boundary: composition.parts().contains(&0.0),
        composition,
        residual,
        converged,
    })
}

/// Nelder–Mead over softmax weights restricted to the `active` parts; the
/// last active part carries weight 0. Returns full-length parts.
fn minimize_on_face<R: Rng + ?Sized>(
    target: &[f64],
    alpha: f64,
    active: &[usize],
    start_logs: &[f64],
    restarts: usize,
    nm: &NelderMeadOptions,
    rng: &mut R,
) -> (Vec<f64>, f64, bool) {
    let d = target.len();
    let k = active.len();
    let expand = |w: &[f64]| -> Vec<f64> {
        let mut logs = vec![f64::NEG_INFINITY; d];
        for (j, &i) in active.iter().enumerate() {
            logs[i] = if j + 1 < k { w[j] } else { 0.0 };
        }
        let max = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut y: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
        let total: f64 = y.iter().sum();
        y.iter_mut().for_each(|v| *v /= total);
        y
    };
    let objective = |w: &[f64]| residual_against(target, alpha, &expand(w));

    let anchor = start_logs[active[k - 1]];
    let w0: Vec<f64> = active[..k - 1]
        .iter()
        .map(|&i| (start_logs[i] - anchor).clamp(-700.0, 700.0))
        .collect();
    let mut best = nelder_mead(objective, &w0, nm);
    for _ in 0..restarts {
        let w: Vec<f64> = (0..k - 1)
            .map(|_| 2.0 * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let m = nelder_mead(objective, &w, nm);
        if m.value < best.value {
            best = m;
        }
    }
    (expand(&best.x), best.value, best.converged)
}
