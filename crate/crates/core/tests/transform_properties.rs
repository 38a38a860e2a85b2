use alphait::simplex::closure;
use alphait::transforms::{
    alpha_ct, alpha_it, alpha_it_inverse, alpha_it_jacobian, alpha_it_jacobian_logdet, clr,
    codomain_excess, ilr, in_codomain, inverse_residual,
};
use alphait::Composition;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn composition() -> impl Strategy<Value = Composition> {
    (3usize..7)
        .prop_flat_map(|d| prop::collection::vec(0.02f64..1.0, d))
        .prop_map(|v| closure(&v).unwrap())
}

fn pair() -> impl Strategy<Value = (Composition, Composition)> {
    (3usize..7)
        .prop_flat_map(|d| {
            (
                prop::collection::vec(0.0f64..1.0, d),
                prop::collection::vec(0.0f64..1.0, d),
            )
        })
        .prop_filter("non-zero", |(a, b)| a.iter().sum::<f64>() > 0.0 && b.iter().sum::<f64>() > 0.0)
        .prop_map(|(a, b)| (closure(&a).unwrap(), closure(&b).unwrap()))
}

/// Contrast basis built independently of the library.
fn helmert(d: usize) -> DMatrix<f64> {
    DMatrix::from_fn(d - 1, d, |i, j| {
        let k = (i + 1) as f64;
        let norm = (k * (k + 1.0)).sqrt();
        if j <= i {
            1.0 / norm
        } else if j == i + 1 {
            -k / norm
        } else {
            0.0
        }
    })
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

proptest! {
    #[test]
    fn limits_are_reached_linearly(x in composition()) {
        let c0 = clr(&x).unwrap();
        let i0 = ilr(&x).unwrap();
        let ct = |a: f64| dist(&alpha_ct(&x, a).unwrap().coords, &c0);
        let it = |a: f64| dist(&alpha_it(&x, a).unwrap().coords, &i0);
        let errs: [&dyn Fn(f64) -> f64; 2] = [&ct, &it];
        for err in errs {
            let (e3, e4) = (err(1e-3), err(1e-4));
            if e4 > 1e-12 {
                let r = e3 / e4;
                prop_assert!((8.0..=12.0).contains(&r), "ratio {}", r);
            }
            prop_assert!(e4 < e3);
        }
    }

    #[test]
    fn unit_alpha_is_euclidean((x, y) in pair()) {
        let d = dist(&alpha_it(&x, 1.0).unwrap().coords, &alpha_it(&y, 1.0).unwrap().coords);
        prop_assert!((d - dist(x.parts(), y.parts())).abs() < 1e-12);
    }

    #[test]
    fn isometric_coordinates_of_box_cox_and_alpha_ct_agree(x in composition(), alpha in 0.01f64..1.5) {
        let h = helmert(x.dim());
        let bc = DVector::from_iterator(x.dim(), x.parts().iter().map(|p| (p.powf(alpha) - 1.0) / alpha));
        let z = alpha_it(&x, alpha).unwrap().coords;
        let via_bc = &h * bc;
        let via_ct = &h * DVector::from_vec(alpha_ct(&x, alpha).unwrap().coords);
        prop_assert!((&via_bc - DVector::from_vec(z)).amax() < 1e-12);
        prop_assert!((&via_bc - &via_ct).amax() < 1e-12);
    }

    #[test]
    fn alpha_ct_sums_to_zero(x in composition(), alpha in 0.001f64..1.5) {
        let s: f64 = alpha_ct(&x, alpha).unwrap().coords.iter().sum();
        prop_assert!(s.abs() < 1e-12);
    }

    #[test]
    fn jacobian_logdet_matches_its_matrix(x in composition(), alpha in 0.05f64..1.2) {
        let j = alpha_it_jacobian(&x, alpha).unwrap();
        let ld = alpha_it_jacobian_logdet(&x, alpha).unwrap();
        prop_assert!((j.determinant().abs().ln() - ld).abs() < 1e-9 * (1.0 + ld.abs()));
    }

    #[test]
    fn jacobian_matches_finite_differences(x in composition(), alpha in 0.05f64..1.0) {
        let d = x.dim();
        let h = helmert(d);
        let z = |v: &[f64]| &h * DVector::from_iterator(d, v.iter().map(|p| (p.powf(alpha) - 1.0) / alpha));
        let step = 1e-6;
        let mut fd = DMatrix::zeros(d - 1, d - 1);
        for j in 0..d - 1 {
            let mut plus = x.parts().to_vec();
            let mut minus = plus.clone();
            plus[j] += step;
            plus[d - 1] -= step;
            minus[j] -= step;
            minus[d - 1] += step;
            fd.set_column(j, &((z(&plus) - z(&minus)) / (2.0 * step)));
        }
        let ld = alpha_it_jacobian_logdet(&x, alpha).unwrap();
        let fd_ld = fd.determinant().abs().ln();
        prop_assert!((ld - fd_ld).abs() <= 1e-5 * ld.abs().max(1e-3));
    }

    #[test]
    fn inverse_is_optimal_inside_the_codomain(x in composition(), alpha in 0.05f64..1.0, seed in 0u64..1000) {
        let z = alpha_it(&x, alpha).unwrap().coords;
        prop_assert!(in_codomain(&z, alpha).unwrap());
        let sol = alpha_it_inverse(&z, alpha).unwrap();
        prop_assert!(sol.residual <= 1e-10);
        prop_assert!(!sol.on_boundary);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..200 {
            let y: Vec<f64> = sol
                .composition
                .parts()
                .iter()
                .map(|p| p * (1.0 + 0.05 * rng.random_range(-1.0..1.0)))
                .collect();
            let y = closure(&y).unwrap();
            prop_assert!(inverse_residual(&z, alpha, &y).unwrap() >= sol.residual);
        }
    }

    #[test]
    fn far_points_land_on_the_border(x in composition(), alpha in 0.2f64..1.0) {
        let mut z = alpha_it(&x, alpha).unwrap().coords;
        if z.iter().all(|v| v.abs() < 1e-3) {
            z[0] = 0.5;
        }
        let far: Vec<f64> = z.iter().map(|v| v * 1e3).collect();
        prop_assert!(codomain_excess(&far, alpha).unwrap() > 0.0);
        let sol = alpha_it_inverse(&far, alpha).unwrap();
        prop_assert!(sol.residual > 0.0);
        prop_assert!(sol.on_boundary);
        prop_assert!(sol.composition.parts().contains(&0.0));
        prop_assert!((sol.composition.parts().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn zeros_map_to_the_lower_bound() {
    let x = closure(&[0.0, 0.5, 0.5]).unwrap();
    let z = alpha_it(&x, 0.5).unwrap().coords;
    let back = alpha_it_inverse(&z, 0.5).unwrap();
    assert!(back.residual < 1e-12);
    assert!(back.composition.parts()[0] < 1e-12);
    assert!(alpha_it(&x, 0.0).is_err());
}

#[test]
fn codomain_is_bounded_and_convex_along_rays() {
    // the codomain is a bounded convex set containing the origin, so each ray
    // crosses its border exactly once
    let alpha = 0.6;
    for k in 0..36 {
        let t = k as f64 * std::f64::consts::PI / 18.0;
        let dir = [t.cos(), t.sin()];
        let inside = |r: f64| in_codomain(&[r * dir[0], r * dir[1]], alpha).unwrap();
        assert!(inside(0.0));
        assert!(!inside(100.0));
        let mut changes = 0;
        let mut last = true;
        for i in 1..2000 {
            let now = inside(i as f64 * 0.005);
            changes += usize::from(now != last);
            last = now;
        }
        assert_eq!(changes, 1, "direction {k}");
    }
}
