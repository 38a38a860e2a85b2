//! Linear model of coregionalization fitted by Goulard–Voltz weighted least
//! squares: block coordinate descent over the `B_m`, each update projected on
//! the PSD cone.

use nalgebra::DMatrix;

use super::covariance::{CovarianceFunction, CovarianceModel};
use super::variogram::EmpiricalVariogram;
use crate::error::{Error, Result};

pub const MAX_ITER: usize = 500;
pub const REL_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct LmcFit {
    pub model: CovarianceModel,
    /// Weighted sum of squares after each sweep; non-increasing.
    pub wss_trace: Vec<f64>,
    pub converged: bool,
}

impl LmcFit {
    pub fn wss(&self) -> f64 {
        *self.wss_trace.last().unwrap()
    }
}

/// Projection onto the PSD cone in Frobenius norm (negative eigenvalues to 0).
pub fn project_psd(m: &DMatrix<f64>) -> DMatrix<f64> {
    let sym = (m + m.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let clipped = eig.eigenvalues.map(|v| v.max(0.0));
    let v = &eig.eigenvectors;
    let mut out = v * DMatrix::from_diagonal(&clipped) * v.transpose();
    out = (&out + out.transpose()) * 0.5;
    out
}

fn shape(f: &CovarianceFunction, h: f64) -> f64 {
    1.0 - f.correlation(h)
}

fn weighted_sse(
    gammas: &[&DMatrix<f64>],
    weights: &[f64],
    shapes: &[Vec<f64>],
    bs: &[DMatrix<f64>],
) -> f64 {
    let mut total = 0.0;
    for (k, g) in gammas.iter().enumerate() {
        let mut r = (*g).clone();
        for (m, b) in bs.iter().enumerate() {
            r -= b * shapes[m][k];
        }
        total += weights[k] * r.norm_squared();
    }
    total
}

/// Fits one PSD coregionalization matrix per structure.
pub fn fit_lmc_traced(ev: &EmpiricalVariogram, structures: &[CovarianceFunction]) -> Result<LmcFit> {
    if structures.is_empty() {
        return Err(Error::InvalidArgument("no structures to fit".into()));
    }
    let used: Vec<usize> = ev.usable_bins().collect();
    if used.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "{} usable variogram bins",
            used.len()
        )));
    }
    let p = ev.n_variables();
    let weights: Vec<f64> = used.iter().map(|&k| ev.counts[k] as f64).collect();
    let gammas: Vec<&DMatrix<f64>> = used.iter().map(|&k| &ev.gamma[k]).collect();
    let shapes: Vec<Vec<f64>> = structures
        .iter()
        .map(|f| used.iter().map(|&k| shape(f, ev.mean_lags[k])).collect())
        .collect();

    // weighted Gram matrix of the shapes, normalized; singular means the
    // structures cannot be told apart on these bins
    let ns = structures.len();
    let norms: Vec<f64> = shapes
        .iter()
        .map(|s| s.iter().zip(&weights).map(|(g, w)| w * g * g).sum::<f64>().sqrt())
        .collect();
    if let Some(m) = norms.iter().position(|&n| n <= 0.0 || !n.is_finite()) {
        return Err(Error::Singular(format!(
            "structure {m} has a flat shape over the lag bins"
        )));
    }
    let gram = DMatrix::from_fn(ns, ns, |a, b| {
        shapes[a]
            .iter()
            .zip(&shapes[b])
            .zip(&weights)
            .map(|((x, y), w)| w * x * y)
            .sum::<f64>()
            / (norms[a] * norms[b])
    });
    if gram.symmetric_eigenvalues().min() < 1e-10 {
        return Err(Error::Singular(
            "structures are not identifiable over the lag bins".into(),
        ));
    }

    let scale: f64 = gammas
        .iter()
        .zip(&weights)
        .map(|(g, w)| w * g.norm_squared())
        .sum();
    let mut bs = vec![DMatrix::zeros(p, p); ns];
    let mut trace = vec![weighted_sse(&gammas, &weights, &shapes, &bs)];
    let mut converged = false;
    for _ in 0..MAX_ITER {
        for m in 0..ns {
            let denom = norms[m] * norms[m];
            let mut target = DMatrix::zeros(p, p);
            for (k, g) in gammas.iter().enumerate() {
                let mut r = (*g).clone();
                for (l, b) in bs.iter().enumerate() {
                    if l != m {
                        r -= b * shapes[l][k];
                    }
                }
                target += r * (weights[k] * shapes[m][k]);
            }
            bs[m] = project_psd(&(target / denom));
        }
        let prev = *trace.last().unwrap();
        let cur = weighted_sse(&gammas, &weights, &shapes, &bs);
        trace.push(cur);
        if cur <= 1e-28 * scale || (prev - cur).abs() <= REL_TOL * prev {
            converged = true;
            break;
        }
    }
    let model = CovarianceModel::new(structures.iter().copied().zip(bs).collect())?;
    Ok(LmcFit {
        model,
        wss_trace: trace,
        converged,
    })
}

pub fn fit_lmc(ev: &EmpiricalVariogram, structures: &[CovarianceFunction]) -> Result<CovarianceModel> {
    Ok(fit_lmc_traced(ev, structures)?.model)
}

/// `count` log-spaced Matérn scales between 2% and 200% of the largest lag.
pub fn default_scale_grid(ev: &EmpiricalVariogram, count: usize) -> Vec<f64> {
    let max_lag = ev
        .usable_bins()
        .map(|k| ev.mean_lags[k])
        .fold(0.0, f64::max);
    let (lo, hi) = ((0.02 * max_lag).ln(), (2.0 * max_lag).ln());
    (0..count)
        .map(|i| (lo + (hi - lo) * i as f64 / (count - 1).max(1) as f64).exp())
        .collect()
}

/// Nugget plus one Whittle–Matérn structure, the scale chosen by least WSS
/// over `scales`.
pub fn fit_nugget_matern(ev: &EmpiricalVariogram, nu: f64, scales: &[f64]) -> Result<LmcFit> {
    profile_matern(ev, nu, scales, true)
}

/// Proportional model: a single Whittle–Matérn structure times one
/// coregionalization matrix, the scale chosen by least WSS over `scales`.
pub fn fit_proportional_matern(ev: &EmpiricalVariogram, nu: f64, scales: &[f64]) -> Result<LmcFit> {
    profile_matern(ev, nu, scales, false)
}

fn profile_matern(ev: &EmpiricalVariogram, nu: f64, scales: &[f64], nugget: bool) -> Result<LmcFit> {
    let mut best: Option<LmcFit> = None;
    let mut last_err = None;
    for &s in scales {
        let mut structures = vec![CovarianceFunction::whittle_matern(nu, s)?];
        if nugget {
            structures.insert(0, CovarianceFunction::Nugget);
        }
        match fit_lmc_traced(ev, &structures) {
            Ok(fit) => {
                if best.as_ref().is_none_or(|b| fit.wss() < b.wss()) {
                    best = Some(fit);
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    best.ok_or_else(|| last_err.unwrap_or(Error::InvalidArgument("empty scale grid".into())))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synthetic(model: &CovarianceModel, lags: &[f64]) -> EmpiricalVariogram {
        EmpiricalVariogram {
            centers: lags.to_vec(),
            mean_lags: lags.to_vec(),
            counts: lags.iter().map(|h| (100.0 + 50.0 * h) as usize).collect(),
            gamma: lags.iter().map(|&h| model.variogram(h)).collect(),
            sparse: vec![false; lags.len()],
        }
    }

    #[test]
    fn recovers_exact_two_structure_model() {
        let b1 = DMatrix::from_row_slice(2, 2, &[0.3, 0.1, 0.1, 0.2]);
        let b2 = DMatrix::from_row_slice(2, 2, &[1.0, 0.8, 0.8, 1.0]);
        let f = [CovarianceFunction::Nugget, CovarianceFunction::exponential(1.5).unwrap()];
        let truth = CovarianceModel::new(vec![(f[0], b1.clone()), (f[1], b2.clone())]).unwrap();
        let lags: Vec<f64> = (1..=15).map(|k| k as f64 * 0.3).collect();
        let fit = fit_lmc_traced(&synthetic(&truth, &lags), &f).unwrap();
        let s = fit.model.structures();
        assert!((&s[0].1 - b1).norm() < 1e-6);
        assert!((&s[1].1 - b2).norm() < 1e-6);
        for w in fit.wss_trace.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-12));
        }
    }

    #[test]
    fn indefinite_targets_are_projected() {
        let mut ev = synthetic(
            &CovarianceModel::proportional(
                CovarianceFunction::exponential(1.0).unwrap(),
                DMatrix::identity(2, 2),
            )
            .unwrap(),
            &[0.5, 1.0, 2.0, 3.0],
        );
        for g in &mut ev.gamma {
            g[(0, 1)] = 3.0;
            g[(1, 0)] = 3.0;
        }
        let fit = fit_lmc_traced(
            &ev,
            &[CovarianceFunction::Nugget, CovarianceFunction::exponential(1.0).unwrap()],
        )
        .unwrap();
        for (_, b) in fit.model.structures() {
            assert!(b.clone().symmetric_eigenvalues().min() >= -1e-10);
        }
    }

    #[test]
    fn duplicate_shapes_are_rejected() {
        let f = CovarianceFunction::exponential(1.0).unwrap();
        let model = CovarianceModel::proportional(f, DMatrix::identity(2, 2)).unwrap();
        let ev = synthetic(&model, &[0.5, 1.0, 2.0]);
        assert!(matches!(fit_lmc(&ev, &[f, f]), Err(Error::Singular(_))));
        let one_bin = synthetic(&model, &[0.5]);
        assert!(matches!(fit_lmc(&one_bin, &[f]), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn profile_finds_the_true_scale() {
        let f = CovarianceFunction::exponential(1.2).unwrap();
        let b = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 2.0]);
        let truth = CovarianceModel::proportional(f, b.clone()).unwrap();
        let lags: Vec<f64> = (1..=15).map(|k| k as f64 * 0.25).collect();
        let ev = synthetic(&truth, &lags);
        let mut grid = default_scale_grid(&ev, 25);
        grid.push(1.2);
        let fit = fit_nugget_matern(&ev, 0.5, &grid).unwrap();
        assert!(fit.wss() < 1e-12);
        let s = fit.model.structures();
        assert!(s[0].1.norm() < 1e-6);
        assert!((&s[1].1 - b).norm() < 1e-6);
    }
}
