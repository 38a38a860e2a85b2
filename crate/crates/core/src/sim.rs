//! Synthetic spatial compositional data: correlated Gaussian fields with a
//! separable Whittle–Matérn covariance, shifted and scaled into the codomain,
//! then mapped to the simplex with the inverse α-IT.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geostat::{CovarianceFunction, CovarianceModel};
use crate::simplex::{closure, Composition, CompositionalField, Location};
use crate::transforms::{alpha_it_or_ilr, alpha_it_or_ilr_inverse, codomain_excess};

/// Largest field accepted by the dense sampler.
pub const MAX_POINTS: usize = 5000;

/// Relative diagonal jitter added to the spatial correlation matrix.
pub const JITTER: f64 = 1e-10;

/// Round-trip tolerance of the generated compositions.
pub const ROUND_TRIP_TOL: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Pattern {
    Center,
    Border,
    Corner,
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Pattern::Center => "center",
            Pattern::Border => "border",
            Pattern::Corner => "corner",
        })
    }
}

impl FromStr for Pattern {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "center" => Ok(Pattern::Center),
            "border" => Ok(Pattern::Border),
            "corner" => Ok(Pattern::Corner),
            _ => Err(Error::InvalidArgument(format!("unknown pattern {s:?}"))),
        }
    }
}

/// Parsimonious multivariate Whittle–Matérn model: `C_ab(h) = c_ab W_ν(h/s)`
/// with common variance on the diagonal and a common cross-covariance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaternParams {
    pub variance: f64,
    pub cross: f64,
    pub nu: f64,
    pub scale: f64,
}

impl Default for MaternParams {
    fn default() -> Self {
        Self {
            variance: 1.0,
            cross: 0.8,
            nu: 0.5,
            scale: 1.0,
        }
    }
}

impl MaternParams {
    pub fn coregionalization(&self, p: usize) -> DMatrix<f64> {
        DMatrix::from_fn(p, p, |a, b| if a == b { self.variance } else { self.cross })
    }

    pub fn covariance_model(&self, p: usize) -> Result<CovarianceModel> {
        CovarianceModel::proportional(
            CovarianceFunction::whittle_matern(self.nu, self.scale)?,
            self.coregionalization(p),
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub alpha0: f64,
    pub pattern: Pattern,
    pub shift: Vec<f64>,
    pub scale: f64,
    pub n_points: usize,
    /// `(lower-left, upper-right)` corners.
    pub domain: (Location, Location),
    pub model: MaternParams,
    pub seed: u64,
}

/// Shift and scale for the named scenarios on the 3-part simplex.
pub fn preset_shift_scale(pattern: Pattern, alpha0: f64) -> Result<([f64; 2], f64)> {
    let col = [0.0, 0.2, 0.6, 1.0]
        .iter()
        .position(|&a| a == alpha0)
        .ok_or_else(|| Error::InvalidArgument(format!("no preset for alpha0 = {alpha0}")))?;
    Ok(match pattern {
        Pattern::Center => ([0.0, 0.0], [1.0, 0.50, 0.15, 0.065][col]),
        Pattern::Border => ([-2.3, 1.0], [1.0, 0.50, 0.15, 0.065][col]),
        Pattern::Corner => ([4.0, -3.0], [1.0, 0.38, 0.11, 0.045][col]),
    })
}

impl ScenarioConfig {
    /// Named preset, e.g. `"center-0.2"` or `"corner-1"`, with 2000 points on
    /// `[0, 10]²` and the default model.
    pub fn preset(name: &str, seed: u64) -> Result<Self> {
        let (pat, a) = name
            .split_once('-')
            .ok_or_else(|| Error::InvalidArgument(format!("preset {name:?} is not pattern-alpha")))?;
        let pattern: Pattern = pat.parse()?;
        let alpha0: f64 = a
            .parse()
            .map_err(|_| Error::InvalidArgument(format!("preset {name:?} has a bad alpha")))?;
        let (shift, scale) = preset_shift_scale(pattern, alpha0)?;
        Ok(Self {
            alpha0,
            pattern,
            shift: shift.to_vec(),
            scale,
            n_points: 2000,
            domain: ([0.0, 0.0], [10.0, 10.0]),
            model: MaternParams::default(),
            seed,
        })
    }

    /// Number of composition parts.
    pub fn parts(&self) -> usize {
        self.shift.len() + 1
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha0.is_finite() && self.alpha0 >= 0.0) {
            return Err(Error::InvalidAlpha(self.alpha0));
        }
        if self.shift.is_empty() {
            return Err(Error::DimensionTooSmall(1));
        }
        if !(self.scale.is_finite() && self.scale > 0.0) {
            return Err(Error::InvalidArgument(format!("scale {}", self.scale)));
        }
        if self.n_points == 0 || self.n_points > MAX_POINTS {
            return Err(Error::InvalidArgument(format!(
                "{} points (1..={MAX_POINTS} supported)",
                self.n_points
            )));
        }
        let (lo, hi) = self.domain;
        if !(hi[0] > lo[0] && hi[1] > lo[1]) {
            return Err(Error::InvalidArgument("empty domain".into()));
        }
        Ok(())
    }
}

pub fn uniform_locations<R: Rng + ?Sized>(n: usize, domain: (Location, Location), rng: &mut R) -> Vec<Location> {
    let (lo, hi) = domain;
    (0..n)
        .map(|_| {
            [
                lo[0] + (hi[0] - lo[0]) * rng.random::<f64>(),
                lo[1] + (hi[1] - lo[1]) * rng.random::<f64>(),
            ]
        })
        .collect()
}

fn cholesky_jittered(m: DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    let n = m.nrows();
    let jitter = JITTER * m.trace() / n as f64;
    let mut m = m;
    for i in 0..n {
        m[(i, i)] += jitter;
    }
    m.cholesky()
        .map(|c| c.unpack())
        .ok_or_else(|| Error::Singular(format!("{what} is not positive definite")))
}

/// Gaussian field sampler at fixed locations.
///
/// The covariance of the point-major vector is `R ⊗ A` (spatial correlation
/// `R`, coregionalization `A`), so its Cholesky factor is `L_R ⊗ L_A` and a
/// draw is `L_R E L_Aᵀ` for an `n × p` standard normal `E`.
pub struct GrfSampler {
    locations: Vec<Location>,
    l_r: DMatrix<f64>,
    l_a: DMatrix<f64>,
}

impl GrfSampler {
    pub fn new(locations: Vec<Location>, model: &MaternParams, p: usize) -> Result<Self> {
        let n = locations.len();
        if n == 0 || n > MAX_POINTS {
            return Err(Error::InvalidArgument(format!("{n} points")));
        }
        if p == 0 {
            return Err(Error::DimensionTooSmall(1));
        }
        if !(model.nu > 0.0 && model.scale > 0.0) {
            return Err(Error::InvalidArgument("Matern nu and scale must be positive".into()));
        }
        let a = model.coregionalization(p);
        let l_a = a
            .cholesky()
            .map(|c| c.unpack())
            .ok_or_else(|| {
                Error::InvalidArgument(format!(
                    "cross-covariance {} with variance {} is not valid for {p} variables",
                    model.cross, model.variance
                ))
            })?;
        let f = CovarianceFunction::whittle_matern(model.nu, model.scale)?;
        let rows: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map(|i| {
                (0..n)
                    .map(|j| {
                        let d = locations[i];
                        let e = locations[j];
                        f.correlation((d[0] - e[0]).hypot(d[1] - e[1]))
                    })
                    .collect()
            })
            .collect();
        let r = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
        let l_r = cholesky_jittered(r, "spatial correlation matrix")?;
        Ok(Self { locations, l_r, l_a })
    }

    pub fn locations(&self) -> &[Location] {
        &self.locations
    }

    pub fn n_variables(&self) -> usize {
        self.l_a.nrows()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<Vec<f64>> {
        let n = self.locations.len();
        let p = self.n_variables();
        let e = DMatrix::from_fn(n, p, |_, _| rng.sample::<f64, _>(StandardNormal));
        let z = &self.l_r * e * self.l_a.transpose();
        (0..n).map(|i| z.row(i).iter().copied().collect()).collect()
    }
}

/// Uniform locations plus one Gaussian field draw, both from `config.seed`.
pub fn simulate_grf(config: &ScenarioConfig) -> Result<(Vec<Location>, Vec<Vec<f64>>)> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let locations = uniform_locations(config.n_points, config.domain, &mut rng);
    let sampler = GrfSampler::new(locations, &config.model, config.parts() - 1)?;
    let scores = sampler.sample(&mut rng);
    Ok((sampler.locations, scores))
}

/// `n` independent draws from `N(0, A)` with the model's coregionalization `A`.
pub fn iid_scores<R: Rng + ?Sized>(n: usize, model: &MaternParams, p: usize, rng: &mut R) -> Result<Vec<Vec<f64>>> {
    let l_a = model
        .coregionalization(p)
        .cholesky()
        .ok_or_else(|| Error::InvalidArgument("coregionalization is not positive definite".into()))?
        .unpack();
    Ok((0..n)
        .map(|_| {
            let e = nalgebra::DVector::from_fn(p, |_, _| rng.sample::<f64, _>(StandardNormal));
            (&l_a * e).iter().copied().collect()
        })
        .collect())
}

/// `n` independent compositions from the scenario: `N(0, A)` draws mapped by
/// `σ(z − z̃)`, redrawn while outside the α₀ codomain, then inverted.
/// Also returns the number of rejected draws.
pub fn iid_compositions<R: Rng + ?Sized>(
    n: usize,
    config: &ScenarioConfig,
    rng: &mut R,
) -> Result<(Vec<Composition>, usize)> {
    config.validate()?;
    let p = config.shift.len();
    let max_rejections = 10 * n + 1000;
    let mut rejected = 0;
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let z = iid_scores(1, &config.model, p, rng)?.pop().unwrap();
        let w: Vec<f64> = z
            .iter()
            .zip(&config.shift)
            .map(|(a, s)| config.scale * (a - s))
            .collect();
        if config.alpha0 > 0.0 && codomain_excess(&w, config.alpha0)? > 0.0 {
            rejected += 1;
            if rejected > max_rejections {
                return Err(Error::InvalidArgument(format!(
                    "scenario puts most of its mass outside the codomain ({rejected} rejections)"
                )));
            }
            continue;
        }
        out.push(alpha_it_or_ilr_inverse(&w, config.alpha0)?.composition);
    }
    Ok((out, rejected))
}

/// `σ (z − z̃)` for every point; fails on the first point outside the α₀ codomain.
pub fn apply_scenario(scores: &[Vec<f64>], config: &ScenarioConfig) -> Result<Vec<Vec<f64>>> {
    let p = config.shift.len();
    let mut out = Vec::with_capacity(scores.len());
    for (index, z) in scores.iter().enumerate() {
        if z.len() != p {
            return Err(Error::DimensionMismatch {
                expected: p,
                found: z.len(),
            });
        }
        let w: Vec<f64> = z
            .iter()
            .zip(&config.shift)
            .map(|(a, s)| config.scale * (a - s))
            .collect();
        if config.alpha0 > 0.0 {
            let excess = codomain_excess(&w, config.alpha0)?;
            if excess > 0.0 {
                return Err(Error::OutsideCodomain { index, excess });
            }
        }
        out.push(w);
    }
    Ok(out)
}

/// Inverse α₀-IT of every score (inverse ILR at `alpha0 == 0`), with a
/// round-trip check.
pub fn to_compositions(
    locations: &[Location],
    scores: &[Vec<f64>],
    alpha0: f64,
) -> Result<CompositionalField> {
    let xs: Vec<Result<Composition>> = scores
        .par_iter()
        .enumerate()
        .map(|(i, z)| {
            let sol = alpha_it_or_ilr_inverse(z, alpha0)?;
            let back = alpha_it_or_ilr(&sol.composition, alpha0)?;
            let err = back
                .iter()
                .zip(z)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            if !(err <= ROUND_TRIP_TOL * (1.0 + z.iter().map(|v| v.abs()).fold(0.0, f64::max))) {
                return Err(Error::Numerical(format!(
                    "point {i}: inverse round trip error {err:e}"
                )));
            }
            Ok(sol.composition)
        })
        .collect();
    CompositionalField::new(locations.to_vec(), xs.into_iter().collect::<Result<_>>()?)
}

/// Zeroes the smallest parts of a random subset and re-closes.
///
/// `fraction` of the points is selected; `mix[k]` is the relative share of
/// selected points receiving `k + 1` zeros. Counts are allocated by rounding
/// cumulative shares, so the proportions are exact up to one point. Requests
/// that would leave a single positive part are capped at `D − 2` zeros.
pub fn inject_zeros(field: &CompositionalField, fraction: f64, mix: &[f64], seed: u64) -> Result<CompositionalField> {
    if !(0.0..1.0).contains(&fraction) {
        return Err(Error::InvalidArgument(format!("zero fraction {fraction}")));
    }
    let total: f64 = mix.iter().sum();
    if mix.is_empty() || mix.iter().any(|m| !(*m >= 0.0)) || total <= 0.0 {
        return Err(Error::InvalidArgument("zero mix must be non-negative and non-empty".into()));
    }
    let n = field.len();
    let d = field.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let selected = (fraction * n as f64).round() as usize;

    let mut xs = field.compositions().to_vec();
    let mut cum = 0.0;
    let mut start = 0;
    for (k, m) in mix.iter().enumerate() {
        cum += m / total;
        let end = ((cum * selected as f64).round() as usize).min(selected);
        let zeros = (k + 1).min(d.saturating_sub(2));
        for &i in &order[start..end] {
            let parts = xs[i].parts();
            let mut idx: Vec<usize> = (0..d).collect();
            idx.sort_by(|&a, &b| parts[a].total_cmp(&parts[b]).then(a.cmp(&b)));
            let mut v = parts.to_vec();
            for &j in &idx[..zeros] {
                v[j] = 0.0;
            }
            xs[i] = closure(&v)?;
        }
        start = end;
    }
    CompositionalField::new(field.locations().to_vec(), xs)
}

/// Full scenario chain: locations, field, shift/scale, inverse transform.
pub fn simulate_scenario(config: &ScenarioConfig) -> Result<CompositionalField> {
    let (locs, z) = simulate_grf(config)?;
    let w = apply_scenario(&z, config)?;
    to_compositions(&locs, &w, config.alpha0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simplex::zero_pattern;
    use crate::transforms::TransformBasis;

    #[test]
    fn table_presets() {
        let c = ScenarioConfig::preset("center-0.2", 1).unwrap();
        assert_eq!((c.shift.clone(), c.scale), (vec![0.0, 0.0], 0.50));
        let c = ScenarioConfig::preset("corner-0.6", 1).unwrap();
        assert_eq!((c.shift.clone(), c.scale), (vec![4.0, -3.0], 0.11));
        let c = ScenarioConfig::preset("border-1", 1).unwrap();
        assert_eq!((c.shift.clone(), c.scale), (vec![-2.3, 1.0], 0.065));
        assert!(ScenarioConfig::preset("corner-0.3", 1).is_err());
        assert!(ScenarioConfig::preset("middle-0.2", 1).is_err());
    }

    #[test]
    fn kronecker_sampler_matches_full_cholesky() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let locs = uniform_locations(12, ([0.0, 0.0], [3.0, 3.0]), &mut rng);
        let model = MaternParams::default();
        let s = GrfSampler::new(locs.clone(), &model, 2).unwrap();
        // full 2n×2n covariance, point-major
        let n = locs.len();
        let full = DMatrix::from_fn(2 * n, 2 * n, |r, c| {
            let (i, a) = (r / 2, r % 2);
            let (j, b) = (c / 2, c % 2);
            let h = (locs[i][0] - locs[j][0]).hypot(locs[i][1] - locs[j][1]);
            let cab = if a == b { 1.0 } else { 0.8 };
            cab * (-h).exp()
        });
        let l = full.cholesky().unwrap().unpack();
        let e = DMatrix::from_fn(n, 2, |i, j| ((i * 2 + j) as f64 * 0.37).sin());
        let kron = &s.l_r * &e * s.l_a.transpose();
        let flat = nalgebra::DVector::from_fn(2 * n, |r, _| e[(r / 2, r % 2)]);
        let direct = l * flat;
        for r in 0..2 * n {
            assert!((kron[(r / 2, r % 2)] - direct[r]).abs() < 1e-8);
        }
    }

    #[test]
    fn deterministic_by_seed() {
        let mut c = ScenarioConfig::preset("center-0.6", 11).unwrap();
        c.n_points = 50;
        let a = simulate_scenario(&c).unwrap();
        let b = simulate_scenario(&c).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn scenario_identity_and_outside_error() {
        let mut c = ScenarioConfig::preset("center-0.6", 1).unwrap();
        c.scale = 1.0;
        let z = vec![vec![0.1, -0.2]];
        assert_eq!(apply_scenario(&z, &c).unwrap(), z);
        let far = vec![vec![0.0, 0.0], vec![50.0, 0.0]];
        assert!(matches!(
            apply_scenario(&far, &c),
            Err(Error::OutsideCodomain { index: 1, .. })
        ));
    }

    #[test]
    fn linear_case_oracle() {
        let basis = TransformBasis::new(3).unwrap();
        let z = vec![0.05, -0.1];
        let f = to_compositions(&[[0.0, 0.0]], std::slice::from_ref(&z), 1.0).unwrap();
        let ht = basis.helmert().transpose() * nalgebra::DVector::from_vec(z);
        for k in 0..3 {
            assert!((f.compositions()[0].parts()[k] - (ht[k] + 1.0 / 3.0)).abs() < 1e-12);
        }
        let u = to_compositions(&[[0.0, 0.0]], &[vec![0.0, 0.0]], 0.2).unwrap();
        assert!(u.compositions()[0].parts().iter().all(|p| (p - 1.0 / 3.0).abs() < 1e-14));
    }

    #[test]
    fn zero_injection_counts() {
        let mut c = ScenarioConfig::preset("center-0.2", 4).unwrap();
        c.n_points = 200;
        c.shift = vec![0.0; 3];
        let f = simulate_scenario(&c).unwrap();
        assert_eq!(inject_zeros(&f, 0.0, &[1.0], 3).unwrap(), f);
        let g = inject_zeros(&f, 0.5, &[0.31, 0.12], 3).unwrap();
        let ones = g.compositions().iter().filter(|x| zero_pattern(x).zero_count() == 1).count();
        let twos = g.compositions().iter().filter(|x| zero_pattern(x).zero_count() == 2).count();
        assert_eq!(ones + twos, 100);
        assert_eq!(twos, (100.0f64 * 0.12 / 0.43).round() as usize);
        for x in g.compositions() {
            assert!(zero_pattern(x).effective_dim() >= 2);
            assert!((x.parts().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        assert_eq!(g, inject_zeros(&f, 0.5, &[0.31, 0.12], 3).unwrap());
    }

    #[test]
    fn iid_draws_stay_in_the_codomain() {
        let c = ScenarioConfig::preset("center-0.2", 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let (xs, rejected) = iid_compositions(3000, &c, &mut rng).unwrap();
        assert_eq!(xs.len(), 3000);
        assert!(rejected < 30, "{rejected}");
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        assert_eq!(iid_compositions(3000, &c, &mut rng).unwrap().0, xs);
        let mut wide = c.clone();
        wide.scale = 50.0;
        assert!(iid_compositions(10, &wide, &mut rng).is_err());
    }
}
