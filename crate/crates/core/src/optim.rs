//! Small derivative-free optimizers: Nelder–Mead and golden-section search.

#[derive(Debug, Clone, Copy)]
pub struct NelderMeadOptions {
    pub max_iter: usize,
    /// Stop when the spread of objective values across the simplex drops below this.
    pub f_tol: f64,
    /// Stop when the simplex diameter drops below this.
    pub x_tol: f64,
    pub initial_step: f64,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self {
            max_iter: 2000,
            f_tol: 1e-12,
            x_tol: 1e-12,
            initial_step: 0.5,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Minimizes `f` from `x0` with the standard reflection/expansion/contraction/shrink
/// coefficients (1, 2, 1/2, 1/2).
pub fn nelder_mead<F>(f: F, x0: &[f64], opts: &NelderMeadOptions) -> Minimum
where
    F: Fn(&[f64]) -> f64,
{
    let n = x0.len();
    let eval = |x: &[f64]| {
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    if n == 0 {
        let value = eval(x0);
        return Minimum {
            x: vec![],
            value,
            iterations: 0,
            converged: true,
        };
    }

    let mut pts: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    pts.push(x0.to_vec());
    for i in 0..n {
        let mut p = x0.to_vec();
        p[i] += opts.initial_step;
        pts.push(p);
    }
    let mut vals: Vec<f64> = pts.iter().map(|p| eval(p)).collect();

    let mut iterations = 0;
    let mut converged = false;
    let mut order: Vec<usize> = (0..=n).collect();
    while iterations < opts.max_iter {
        order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
        let best = order[0];
        let worst = order[n];
        let second = order[n - 1];

        let spread = (vals[worst] - vals[best]).abs();
        let diameter = pts
            .iter()
            .map(|p| {
                p.iter()
                    .zip(&pts[best])
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max);
        if spread <= opts.f_tol || diameter <= opts.x_tol {
            converged = true;
            break;
        }
        iterations += 1;

        let mut centroid = vec![0.0; n];
        for &i in &order[..n] {
            for (c, v) in centroid.iter_mut().zip(&pts[i]) {
                *c += v / n as f64;
            }
        }
        let along = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&pts[worst])
                .map(|(c, w)| c + t * (w - c))
                .collect()
        };

        let xr = along(-1.0);
        let fr = eval(&xr);
        if fr < vals[best] {
            let xe = along(-2.0);
            let fe = eval(&xe);
            if fe < fr {
                pts[worst] = xe;
                vals[worst] = fe;
            } else {
                pts[worst] = xr;
                vals[worst] = fr;
            }
            continue;
        }
        if fr < vals[second] {
            pts[worst] = xr;
            vals[worst] = fr;
            continue;
        }
        let (xc, fc) = if fr < vals[worst] {
            let xc = along(-0.5);
            let fc = eval(&xc);
            (xc, fc)
        } else {
            let xc = along(0.5);
            let fc = eval(&xc);
            (xc, fc)
        };
        if fc < vals[worst].min(fr) {
            pts[worst] = xc;
            vals[worst] = fc;
            continue;
        }
        // shrink toward the best vertex
        let anchor = pts[best].clone();
        for &i in &order[1..] {
            for (p, a) in pts[i].iter_mut().zip(&anchor) {
                *p = a + 0.5 * (*p - a);
            }
            vals[i] = eval(&pts[i]);
        }
    }

    let best = (0..=n).min_by(|&a, &b| vals[a].total_cmp(&vals[b])).unwrap();
    Minimum {
        x: pts[best].clone(),
        value: vals[best],
        iterations,
        converged,
    }
}

/// Golden-section search for the maximum of a unimodal `f` on `[lo, hi]`.
/// Returns `(argmax, max)`.
pub fn golden_section_max<F>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> (f64, f64)
where
    F: Fn(f64) -> f64,
{
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let score = |x: f64| {
        let v = f(x);
        if v.is_nan() {
            f64::NEG_INFINITY
        } else {
            v
        }
    };
    let mut a = hi - inv_phi * (hi - lo);
    let mut b = lo + inv_phi * (hi - lo);
    let mut fa = score(a);
    let mut fb = score(b);
    while (hi - lo) > tol {
        if fa >= fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - inv_phi * (hi - lo);
            fa = score(a);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + inv_phi * (hi - lo);
            fb = score(b);
        }
    }
    if fa >= fb {
        (a, fa)
    } else {
        (b, fb)
    }
}
