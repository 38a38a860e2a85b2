//! Compositions and the Aitchison-geometry primitives.
//!
//! A [`Composition`] is a point of the closed simplex: non-negative parts
//! summing to one. Parts that are exactly zero are structural and are tracked
//! through [`ZeroPattern`]; the Aitchison operations (perturbation, powering,
//! distance) are only defined on the open simplex and reject them.

use std::collections::HashSet;

use crate::error::{Error, Result};

/// Inputs whose parts sum to 1 within this tolerance are renormalized.
pub const SUM_TOLERANCE: f64 = 1e-9;

/// Parts below this value after renormalization are snapped to exact zero.
pub const ZERO_SNAP: f64 = 1e-15;

#[derive(Debug, Clone, PartialEq)]
pub struct Composition {
    parts: Vec<f64>,
}

impl Composition {
    /// Builds a composition from parts that already (nearly) sum to one.
    pub fn new(parts: Vec<f64>) -> Result<Self> {
        check_parts(&parts)?;
        let sum: f64 = parts.iter().sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::SumOutOfTolerance { sum });
        }
        Ok(Self::normalized(parts, sum))
    }

    /// The barycenter of the simplex, the neutral element of perturbation.
    pub fn uniform(dim: usize) -> Result<Self> {
        if dim < 2 {
            return Err(Error::DimensionTooSmall(dim));
        }
        Ok(Self {
            parts: vec![1.0 / dim as f64; dim],
        })
    }

    /// Vertex `index` of the simplex (all mass on one part).
    pub fn vertex(dim: usize, index: usize) -> Result<Self> {
        if dim < 2 {
            return Err(Error::DimensionTooSmall(dim));
        }
        if index >= dim {
            return Err(Error::InvalidArgument(format!(
                "vertex {index} out of range for dimension {dim}"
            )));
        }
        let mut parts = vec![0.0; dim];
        parts[index] = 1.0;
        Ok(Self { parts })
    }

    fn normalized(mut parts: Vec<f64>, sum: f64) -> Self {
        for p in parts.iter_mut() {
            *p /= sum;
            if *p < ZERO_SNAP {
                *p = 0.0;
            }
        }
        let resum: f64 = parts.iter().sum();
        if resum != 1.0 {
            for p in parts.iter_mut() {
                *p /= resum;
            }
        }
        Self { parts }
    }

    pub fn parts(&self) -> &[f64] {
        &self.parts
    }

    pub fn dim(&self) -> usize {
        self.parts.len()
    }

    pub fn is_strictly_positive(&self) -> bool {
        self.parts.iter().all(|&p| p > 0.0)
    }

    pub fn into_parts(self) -> Vec<f64> {
        self.parts
    }

    /// Fails with the first zero index if the composition touches the border.
    pub fn require_positive(&self) -> Result<()> {
        match self.parts.iter().position(|&p| p <= 0.0) {
            Some(index) => Err(Error::ZeroPart { index }),
            None => Ok(()),
        }
    }

    /// Natural logarithms of the parts; requires a strictly positive composition.
    pub fn ln_parts(&self) -> Result<Vec<f64>> {
        self.require_positive()?;
        Ok(self.parts.iter().map(|p| p.ln()).collect())
    }
}

fn check_parts(parts: &[f64]) -> Result<()> {
    if parts.len() < 2 {
        return Err(Error::DimensionTooSmall(parts.len()));
    }
    for (index, &value) in parts.iter().enumerate() {
        if !value.is_finite() {
            return Err(Error::NonFinitePart { index });
        }
        if value < 0.0 {
            return Err(Error::NegativePart { index, value });
        }
    }
    Ok(())
}

/// Rescales a non-negative vector to unit sum.
pub fn closure(v: &[f64]) -> Result<Composition> {
    check_parts(v)?;
    let sum: f64 = v.iter().sum();
    if sum <= 0.0 {
        return Err(Error::AllZero);
    }
    Ok(Composition::normalized(v.to_vec(), sum))
}

/// Closes `exp(logs)` without overflow by shifting with the maximum.
pub(crate) fn closure_from_logs(logs: &[f64]) -> Result<Composition> {
    let max = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::Numerical("non-finite log-parts".into()));
    }
    let v: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
    closure(&v)
}

fn check_same_dim(x: &Composition, y: &Composition) -> Result<()> {
    if x.dim() != y.dim() {
        return Err(Error::DimensionMismatch {
            expected: x.dim(),
            found: y.dim(),
        });
    }
    Ok(())
}

/// Perturbation `x ⊕ y = C(x_i y_i)`.
pub fn perturb(x: &Composition, y: &Composition) -> Result<Composition> {
    check_same_dim(x, y)?;
    let lx = x.ln_parts()?;
    let ly = y.ln_parts()?;
    let logs: Vec<f64> = lx.iter().zip(&ly).map(|(a, b)| a + b).collect();
    closure_from_logs(&logs)
}

/// Powering `a ⊙ x = C(x_i^a)`.
pub fn power(a: f64, x: &Composition) -> Result<Composition> {
    if !a.is_finite() {
        return Err(Error::InvalidArgument(format!("power coefficient {a}")));
    }
    let logs: Vec<f64> = x.ln_parts()?.iter().map(|l| a * l).collect();
    closure_from_logs(&logs)
}

/// Neg-perturbation `x ⊖ y = x ⊕ ((-1) ⊙ y)`.
pub fn difference(x: &Composition, y: &Composition) -> Result<Composition> {
    perturb(x, &power(-1.0, y)?)
}

/// Aitchison distance from the double sum over all log-ratio pairs.
pub fn aitchison_distance(x: &Composition, y: &Composition) -> Result<f64> {
    check_same_dim(x, y)?;
    let lx = x.ln_parts()?;
    let ly = y.ln_parts()?;
    let d = lx.len();
    let mut acc = 0.0;
    for i in 0..d {
        for j in 0..d {
            let diff = (lx[i] - lx[j]) - (ly[i] - ly[j]);
            acc += diff * diff;
        }
    }
    Ok((acc / (2.0 * d as f64)).sqrt())
}

/// Geometric mean of the parts, through the mean of logarithms.
pub fn geometric_mean(x: &Composition) -> Result<f64> {
    let logs = x.ln_parts()?;
    Ok((logs.iter().sum::<f64>() / logs.len() as f64).exp())
}

/// Mask of the exactly-zero parts of a composition.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ZeroPattern {
    mask: Vec<bool>,
}

impl ZeroPattern {
    pub fn from_mask(mask: Vec<bool>) -> Self {
        Self { mask }
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn dim(&self) -> usize {
        self.mask.len()
    }

    /// Number of positive parts, the dimension of the sub-simplex.
    pub fn effective_dim(&self) -> usize {
        self.mask.iter().filter(|z| !**z).count()
    }

    pub fn zero_count(&self) -> usize {
        self.dim() - self.effective_dim()
    }

    pub fn has_zeros(&self) -> bool {
        self.mask.iter().any(|z| *z)
    }
}

impl std::fmt::Display for ZeroPattern {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for z in &self.mask {
            f.write_str(if *z { "0" } else { "+" })?;
        }
        Ok(())
    }
}

pub fn zero_pattern(x: &Composition) -> ZeroPattern {
    ZeroPattern {
        mask: x.parts().iter().map(|&p| p == 0.0).collect(),
    }
}

/// Drops the zero parts named by `pattern`. The remaining parts already sum
/// to one, so no re-closure takes place.
pub fn subcompose(x: &Composition, pattern: &ZeroPattern) -> Result<Composition> {
    if pattern.dim() != x.dim() {
        return Err(Error::DimensionMismatch {
            expected: x.dim(),
            found: pattern.dim(),
        });
    }
    if zero_pattern(x) != *pattern {
        return Err(Error::PatternMismatch);
    }
    let positive = pattern.effective_dim();
    if positive < 2 {
        return Err(Error::DegeneratePattern { positive });
    }
    let parts = x
        .parts()
        .iter()
        .zip(pattern.mask())
        .filter(|(_, z)| !**z)
        .map(|(p, _)| *p)
        .collect();
    Ok(Composition { parts })
}

/// A planar location.
pub type Location = [f64; 2];

/// Compositions attached to distinct planar locations.
#[derive(Debug, Clone, PartialEq)]
pub struct CompositionalField {
    locations: Vec<Location>,
    compositions: Vec<Composition>,
}

impl CompositionalField {
    pub fn new(locations: Vec<Location>, compositions: Vec<Composition>) -> Result<Self> {
        if locations.is_empty() {
            return Err(Error::InsufficientData("empty field".into()));
        }
        if locations.len() != compositions.len() {
            return Err(Error::DimensionMismatch {
                expected: locations.len(),
                found: compositions.len(),
            });
        }
        let dim = compositions[0].dim();
        if let Some(bad) = compositions.iter().find(|c| c.dim() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: bad.dim(),
            });
        }
        check_distinct(&locations)?;
        Ok(Self {
            locations,
            compositions,
        })
    }

    pub fn locations(&self) -> &[Location] {
        &self.locations
    }

    pub fn compositions(&self) -> &[Composition] {
        &self.compositions
    }

    pub fn len(&self) -> usize {
        self.locations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.locations.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.compositions[0].dim()
    }

    /// Sub-field restricted to the given indices, in that order.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        let locations = indices.iter().map(|&i| self.locations[i]).collect();
        let compositions = indices
            .iter()
            .map(|&i| self.compositions[i].clone())
            .collect();
        Self::new(locations, compositions)
    }

    /// Axis-aligned bounding box as `(min, max)` corners.
    pub fn bounding_box(&self) -> (Location, Location) {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for s in &self.locations {
            for k in 0..2 {
                lo[k] = lo[k].min(s[k]);
                hi[k] = hi[k].max(s[k]);
            }
        }
        (lo, hi)
    }
}

pub(crate) fn check_distinct(locations: &[Location]) -> Result<()> {
    let mut seen = HashSet::with_capacity(locations.len());
    for (index, s) in locations.iter().enumerate() {
        // -0.0 and 0.0 compare equal as coordinates
        let key = ((s[0] + 0.0).to_bits(), (s[1] + 0.0).to_bits());
        if !seen.insert(key) {
            return Err(Error::DuplicateLocation { index });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn comp(v: &[f64]) -> Composition {
        Composition::new(v.to_vec()).unwrap()
    }

    #[test]
    fn closure_examples() {
        assert_eq!(closure(&[2.0, 1.0, 1.0]).unwrap().parts(), &[0.5, 0.25, 0.25]);
        assert_eq!(
            closure(&[0.5, 0.25, 0.25]).unwrap().parts(),
            &[0.5, 0.25, 0.25]
        );
        assert_eq!(closure(&[1.0, 0.0, 3.0]).unwrap().parts(), &[0.25, 0.0, 0.75]);
    }

    #[test]
    fn closure_rejects_bad_input() {
        assert_eq!(closure(&[0.0, 0.0]), Err(Error::AllZero));
        assert!(matches!(
            closure(&[1.0, -0.5]),
            Err(Error::NegativePart { index: 1, .. })
        ));
        assert_eq!(closure(&[1.0]), Err(Error::DimensionTooSmall(1)));
        assert!(matches!(
            closure(&[1.0, f64::NAN]),
            Err(Error::NonFinitePart { index: 1 })
        ));
    }

    #[test]
    fn construction_tolerance() {
        let c = Composition::new(vec![0.5, 0.5 + 5e-10]).unwrap();
        assert_eq!(c.parts().iter().sum::<f64>(), 1.0);
        assert!(matches!(
            Composition::new(vec![0.5, 0.4]),
            Err(Error::SumOutOfTolerance { .. })
        ));
        let snapped = Composition::new(vec![0.5, 0.5, 1e-17]).unwrap();
        assert_eq!(snapped.parts()[2], 0.0);
        assert!(!snapped.is_strictly_positive());
    }

    #[test]
    fn perturbation_and_power_examples() {
        let x = comp(&[0.5, 0.25, 0.25]);
        let u = Composition::uniform(3).unwrap();
        let p = perturb(&x, &u).unwrap();
        for (a, b) in p.parts().iter().zip(x.parts()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-15);
        }
        let q = perturb(&x, &comp(&[0.25, 0.5, 0.25])).unwrap();
        for (a, b) in q.parts().iter().zip(&[0.4, 0.4, 0.2]) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-15);
        }
        let z = power(0.0, &x).unwrap();
        for a in z.parts() {
            assert_abs_diff_eq!(*a, 1.0 / 3.0, epsilon = 1e-15);
        }
        let self_diff = difference(&x, &x).unwrap();
        for a in self_diff.parts() {
            assert_abs_diff_eq!(*a, 1.0 / 3.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn aitchison_ops_reject_zeros() {
        let x = comp(&[0.25, 0.0, 0.75]);
        let y = comp(&[0.2, 0.3, 0.5]);
        assert_eq!(perturb(&x, &y), Err(Error::ZeroPart { index: 1 }));
        assert_eq!(power(2.0, &x), Err(Error::ZeroPart { index: 1 }));
        assert_eq!(aitchison_distance(&y, &x), Err(Error::ZeroPart { index: 1 }));
        assert_eq!(geometric_mean(&x), Err(Error::ZeroPart { index: 1 }));
    }

    #[test]
    fn geometric_mean_examples() {
        assert_abs_diff_eq!(
            geometric_mean(&Composition::uniform(5).unwrap()).unwrap(),
            0.2,
            epsilon = 1e-15
        );
        let g = geometric_mean(&comp(&[0.5, 0.25, 0.25])).unwrap();
        assert_abs_diff_eq!(g, (1.0f64 / 32.0).powf(1.0 / 3.0), epsilon = 1e-15);
        assert_abs_diff_eq!(g, 0.31498, epsilon = 1e-5);
        assert_eq!(Composition::uniform(1), Err(Error::DimensionTooSmall(1)));
    }

    #[test]
    fn distance_identity() {
        let x = comp(&[0.2, 0.3, 0.5]);
        assert_eq!(aitchison_distance(&x, &x).unwrap(), 0.0);
    }

    #[test]
    fn zero_pattern_and_subcomposition() {
        let x = comp(&[0.25, 0.0, 0.75]);
        let p = zero_pattern(&x);
        assert_eq!(p.mask(), &[false, true, false]);
        assert_eq!(p.effective_dim(), 2);
        assert_eq!(p.to_string(), "+0+");
        assert_eq!(subcompose(&x, &p).unwrap().parts(), &[0.25, 0.75]);

        let y = comp(&[0.2, 0.3, 0.5]);
        let q = zero_pattern(&y);
        assert!(!q.has_zeros());
        assert_eq!(subcompose(&y, &q).unwrap(), y);
        assert_eq!(subcompose(&y, &p), Err(Error::PatternMismatch));

        let v = comp(&[0.0, 0.0, 1.0]);
        assert_eq!(
            subcompose(&v, &zero_pattern(&v)),
            Err(Error::DegeneratePattern { positive: 1 })
        );
    }

    #[test]
    fn field_validation() {
        let c = Composition::uniform(3).unwrap();
        assert!(CompositionalField::new(vec![], vec![]).is_err());
        assert_eq!(
            CompositionalField::new(vec![[0.0, 0.0], [-0.0, 0.0]], vec![c.clone(), c.clone()]),
            Err(Error::DuplicateLocation { index: 1 })
        );
        assert!(matches!(
            CompositionalField::new(
                vec![[0.0, 0.0], [1.0, 0.0]],
                vec![c.clone(), Composition::uniform(4).unwrap()]
            ),
            Err(Error::DimensionMismatch { .. })
        ));
        let f = CompositionalField::new(vec![[0.0, 0.0], [1.0, 2.0]], vec![c.clone(), c]).unwrap();
        assert_eq!(f.bounding_box(), ([0.0, 0.0], [1.0, 2.0]));
        assert_eq!(f.select(&[1]).unwrap().len(), 1);
    }
}
