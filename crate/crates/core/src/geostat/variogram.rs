use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::simplex::Location;

/// Bins with fewer pairs than this are flagged as unreliable.
pub const MIN_RELIABLE_PAIRS: usize = 30;

pub const DEFAULT_BINS: usize = 15;

pub(crate) fn dist(a: &Location, b: &Location) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Equal-width omnidirectional lag bins `(edge_k, edge_{k+1}]` starting at 0.
#[derive(Debug, Clone, PartialEq)]
pub struct LagBins {
    width: f64,
    count: usize,
}

impl LagBins {
    pub fn equal_width(count: usize, max_lag: f64) -> Result<Self> {
        if count == 0 || !(max_lag.is_finite() && max_lag > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "{count} lag bins up to {max_lag}"
            )));
        }
        Ok(Self {
            width: max_lag / count as f64,
            count,
        })
    }

    /// `DEFAULT_BINS` bins up to half the largest pairwise distance.
    pub fn default_for(locations: &[Location]) -> Result<Self> {
        let max = max_pairwise_distance(locations);
        Self::equal_width(DEFAULT_BINS, 0.5 * max)
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn max_lag(&self) -> f64 {
        self.width * self.count as f64
    }

    pub fn center(&self, k: usize) -> f64 {
        (k as f64 + 0.5) * self.width
    }

    pub fn index(&self, h: f64) -> Option<usize> {
        if h <= 0.0 || h > self.max_lag() {
            return None;
        }
        Some(((h / self.width).ceil() as usize).clamp(1, self.count) - 1)
    }
}

pub fn max_pairwise_distance(locations: &[Location]) -> f64 {
    locations
        .par_iter()
        .enumerate()
        .map(|(i, a)| {
            locations[i + 1..]
                .iter()
                .map(|b| dist(a, b))
                .fold(0.0, f64::max)
        })
        .reduce(|| 0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalVariogram {
    pub centers: Vec<f64>,
    /// Average pair distance per bin (the center when the bin is empty).
    pub mean_lags: Vec<f64>,
    pub counts: Vec<usize>,
    /// Symmetric `p×p` cross-semivariance per bin.
    pub gamma: Vec<DMatrix<f64>>,
    pub sparse: Vec<bool>,
}

impl EmpiricalVariogram {
    pub fn n_variables(&self) -> usize {
        self.gamma[0].nrows()
    }

    pub fn usable_bins(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.counts.len()).filter(|&k| self.counts[k] > 0)
    }
}

struct Acc {
    counts: Vec<usize>,
    lag_sums: Vec<f64>,
    sums: Vec<DMatrix<f64>>,
}

impl Acc {
    fn new(bins: usize, p: usize) -> Self {
        Self {
            counts: vec![0; bins],
            lag_sums: vec![0.0; bins],
            sums: vec![DMatrix::zeros(p, p); bins],
        }
    }

    fn merge(mut self, other: Self) -> Self {
        for k in 0..self.counts.len() {
            self.counts[k] += other.counts[k];
            self.lag_sums[k] += other.lag_sums[k];
            self.sums[k] += &other.sums[k];
        }
        self
    }
}

/// Classical cross-variogram estimator
/// `γ̂_ij(h) = (1/2N_h) Σ (z_i(s) − z_i(s+h)) (z_j(s) − z_j(s+h))`.
pub fn empirical_cross_variogram(
    locations: &[Location],
    scores: &[Vec<f64>],
    bins: &LagBins,
) -> Result<EmpiricalVariogram> {
    let n = locations.len();
    if n < 2 {
        return Err(Error::InsufficientData("variogram needs 2 points".into()));
    }
    if scores.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: scores.len(),
        });
    }
    let p = scores[0].len();
    if p == 0 || scores.iter().any(|z| z.len() != p) {
        return Err(Error::InvalidArgument("ragged score matrix".into()));
    }
    let nb = bins.count();
    let acc = (0..n)
        .into_par_iter()
        .fold(
            || Acc::new(nb, p),
            |mut acc, i| {
                let mut diff = vec![0.0; p];
                for j in i + 1..n {
                    let h = dist(&locations[i], &locations[j]);
                    let Some(k) = bins.index(h) else { continue };
                    for (d, (a, b)) in diff.iter_mut().zip(scores[i].iter().zip(&scores[j])) {
                        *d = a - b;
                    }
                    let s = &mut acc.sums[k];
                    for r in 0..p {
                        for c in r..p {
                            s[(r, c)] += diff[r] * diff[c];
                        }
                    }
                    acc.counts[k] += 1;
                    acc.lag_sums[k] += h;
                }
                acc
            },
        )
        .reduce(|| Acc::new(nb, p), Acc::merge);

    if acc.counts.iter().all(|&c| c == 0) {
        return Err(Error::InsufficientData("every lag bin is empty".into()));
    }
    let mut gamma = Vec::with_capacity(nb);
    let mut mean_lags = Vec::with_capacity(nb);
    for k in 0..nb {
        let mut g = acc.sums[k].clone();
        if acc.counts[k] > 0 {
            g /= 2.0 * acc.counts[k] as f64;
            mean_lags.push(acc.lag_sums[k] / acc.counts[k] as f64);
        } else {
            mean_lags.push(bins.center(k));
        }
        g.fill_lower_triangle_with_upper_triangle();
        gamma.push(g);
    }
    Ok(EmpiricalVariogram {
        centers: (0..nb).map(|k| bins.center(k)).collect(),
        mean_lags,
        sparse: acc.counts.iter().map(|&c| c < MIN_RELIABLE_PAIRS).collect(),
        counts: acc.counts,
        gamma,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn grid(side: usize) -> Vec<Location> {
        (0..side * side)
            .map(|k| [(k % side) as f64, (k / side) as f64])
            .collect()
    }

    #[test]
    fn constant_field_has_zero_semivariance() {
        let locs = grid(6);
        let z = vec![vec![3.0, -1.0]; locs.len()];
        let ev = empirical_cross_variogram(&locs, &z, &LagBins::default_for(&locs).unwrap()).unwrap();
        assert!(ev.gamma.iter().all(|g| g.amax() == 0.0));
    }

    #[test]
    fn bin_assignment_and_hand_pairs() {
        // three collinear points: lags 1, 1, 2
        let locs = vec![[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]];
        let z = vec![vec![0.0], vec![1.0], vec![3.0]];
        let ev = empirical_cross_variogram(&locs, &z, &LagBins::equal_width(2, 2.0).unwrap()).unwrap();
        assert_eq!(ev.counts, vec![2, 1]);
        assert!((ev.gamma[0][(0, 0)] - (1.0 + 4.0) / 4.0).abs() < 1e-15);
        assert!((ev.gamma[1][(0, 0)] - 9.0 / 2.0).abs() < 1e-15);
        assert_eq!(ev.mean_lags, vec![1.0, 2.0]);
        assert!(ev.sparse.iter().all(|&s| s));
    }

    #[test]
    fn pure_nugget_gives_unit_sill() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let locs: Vec<Location> = (0..400)
            .map(|_| [rng.random::<f64>() * 10.0, rng.random::<f64>() * 10.0])
            .collect();
        let z: Vec<Vec<f64>> = (0..400)
            .map(|_| vec![rng.sample(StandardNormal), rng.sample(StandardNormal)])
            .collect();
        let ev = empirical_cross_variogram(&locs, &z, &LagBins::default_for(&locs).unwrap()).unwrap();
        for k in ev.usable_bins() {
            // var of (a−b)²/2 for unit normals is 2; pairs share points, so allow slack
            let se = (2.0 / ev.counts[k] as f64).sqrt();
            let g = &ev.gamma[k];
            assert!((g[(0, 0)] - 1.0).abs() < 3.0 * se.max(0.05), "bin {k}: {}", g[(0, 0)]);
            assert_eq!(g[(0, 1)], g[(1, 0)]);
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let locs = vec![[0.0, 0.0]];
        assert!(empirical_cross_variogram(&locs, &[vec![1.0]], &LagBins::equal_width(2, 1.0).unwrap())
            .is_err());
        let locs = vec![[0.0, 0.0], [5.0, 0.0]];
        let r = empirical_cross_variogram(&locs, &[vec![1.0], vec![2.0]], &LagBins::equal_width(2, 1.0).unwrap());
        assert!(matches!(r, Err(Error::InsufficientData(_))));
    }
}
