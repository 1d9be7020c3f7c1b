//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use lqdemix::prox::abs_pow;
use nalgebra::{DMatrix, DVector};
use ndarray::{Array1, Array2};

/// Minimum of `|z|^q + (η/2)(z − t)²` over `points` equally spaced values
/// spanning `[min(0, t), max(0, t)]`, which contains every minimizer.
pub fn scalar_grid_min(t: f64, q: f64, eta: f64, points: usize) -> (f64, f64) {
    let (lo, hi) = if t < 0.0 { (t, 0.0) } else { (0.0, t) };
    let h = (hi - lo) / (points - 1) as f64;
    let mut best = (f64::INFINITY, 0.0);
    for i in 0..points {
        let z = if i + 1 == points { hi } else { lo + h * i as f64 };
        let f = abs_pow(z, q) + 0.5 * eta * (z - t) * (z - t);
        if f < best.0 {
            best = (f, z);
        }
    }
    best
}

/// Minimum over `α ∈ [0, 1]` of the group objective restricted to `x = α t`,
/// by a uniform grid followed by golden-section polishing of the best cell.
pub fn group_alpha_min(norm: f64, q: f64, eta: f64, points: usize) -> f64 {
    let f = |a: f64| abs_pow(a * norm, q) + 0.5 * eta * (1.0 - a) * (1.0 - a) * norm * norm;
    let h = 1.0 / (points - 1) as f64;
    let mut best = (f(0.0), 0usize);
    for i in 1..points {
        let v = f(h * i as f64);
        if v < best.0 {
            best = (v, i);
        }
    }
    let (mut a, mut b) = ((best.1 as f64 - 1.0).max(0.0) * h, ((best.1 + 1) as f64 * h).min(1.0));
    let g = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..200 {
        let c = b - g * (b - a);
        let d = a + g * (b - a);
        if f(c) < f(d) {
            b = d;
        } else {
            a = c;
        }
    }
    best.0.min(f(0.5 * (a + b)))
}

/// Global minimizer of `Σⱼ wⱼ|xⱼ|^{qⱼ}` subject to `A x = y`, by enumerating
/// every basic solution (linearly independent column subsets up to rank).
/// The objective is concave on each orthant, so the minimum sits at one.
pub fn enumerate_basic_optimum(a: &Array2<f64>, y: &Array1<f64>, weights: &[f64], qs: &[f64]) -> (Array1<f64>, f64) {
    let (m, n) = a.dim();
    let full = DMatrix::from_fn(m, n, |i, j| a[[i, j]]);
    let rhs = DVector::from_iterator(m, y.iter().cloned());
    let ynorm = rhs.norm();
    let mut best = (Array1::zeros(n), if ynorm == 0.0 { 0.0 } else { f64::INFINITY });
    let mut subset = Vec::new();
    fn recurse(
        start: usize,
        subset: &mut Vec<usize>,
        full: &DMatrix<f64>,
        rhs: &DVector<f64>,
        ynorm: f64,
        weights: &[f64],
        qs: &[f64],
        best: &mut (Array1<f64>, f64),
    ) {
        let (m, n) = full.shape();
        if !subset.is_empty() {
            let sub = full.select_columns(subset.iter());
            let svd = sub.clone().svd(true, true);
            if svd.singular_values.iter().all(|&s| s > 1e-10) {
                let x = svd.solve(rhs, 1e-14).expect("svd solve");
                if (&sub * &x - rhs).norm() <= 1e-10 * ynorm.max(1.0) {
                    let value: f64 = subset.iter().zip(x.iter()).map(|(&j, &v)| weights[j] * abs_pow(v, qs[j])).sum();
                    if value < best.1 {
                        let mut full_x = Array1::zeros(n);
                        for (&j, &v) in subset.iter().zip(x.iter()) {
                            full_x[j] = v;
                        }
                        *best = (full_x, value);
                    }
                }
            } else {
                return;
            }
        }
        if subset.len() == m {
            return;
        }
        for j in start..n {
            subset.push(j);
            recurse(j + 1, subset, full, rhs, ynorm, weights, qs, best);
            subset.pop();
        }
    }
    recurse(0, &mut subset, &full, &rhs, ynorm, weights, qs, &mut best);
    best
}

/// `[A₁ A₂]` as one dense matrix.
pub fn stacked(a1: &Array2<f64>, a2: &Array2<f64>) -> Array2<f64> {
    ndarray::concatenate![ndarray::Axis(1), a1.view(), a2.view()]
}

/// Relative distance of `x` from `reference`.
pub fn rel_dist(x: &Array1<f64>, reference: &Array1<f64>) -> f64 {
    let d: f64 = x.iter().zip(reference.iter()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    d / reference.dot(reference).sqrt().max(f64::MIN_POSITIVE)
}
