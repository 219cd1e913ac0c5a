//! Gaussian quadrature rules used to validate closed-form expectations.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::hermite::hermite_eval;

fn jacobi_nodes(diag: impl Fn(usize) -> f64, off: impl Fn(usize) -> f64, n: usize) -> Vec<f64> {
    let j = DMatrix::from_fn(n, n, |r, c| {
        if r == c {
            diag(r)
        } else if r + 1 == c {
            off(r)
        } else if c + 1 == r {
            off(c)
        } else {
            0.0
        }
    });
    let mut nodes: Vec<f64> = SymmetricEigen::new(j).eigenvalues.iter().copied().collect();
    nodes.sort_by(f64::total_cmp);
    nodes
}

/// `n`-point Gauss rule for `N(0, 1)`: `E f(G) ≈ sum_i w_i f(t_i)`.
///
/// Nodes come from the Jacobi matrix of the probabilist's recurrence, refined by
/// Newton steps on `h_n`; weights are the reciprocal Christoffel function.
pub fn gauss_hermite(n: usize) -> Vec<(f64, f64)> {
    assert!(n >= 1);
    let nodes = jacobi_nodes(|_| 0.0, |i| ((i + 1) as f64).sqrt(), n);
    nodes
        .into_iter()
        .map(|mut t| {
            for _ in 0..3 {
                let (hn, hn1) = (hermite_eval(n, t), hermite_eval(n - 1, t));
                if hn1 != 0.0 {
                    t -= hn / ((n as f64).sqrt() * hn1);
                }
            }
            let mut s = 0.0;
            let (mut prev, mut cur) = (0.0, 1.0);
            for j in 0..n {
                s += cur * cur;
                let next = (t * cur - (j as f64).sqrt() * prev) / ((j + 1) as f64).sqrt();
                prev = cur;
                cur = next;
            }
            (t, 1.0 / s)
        })
        .collect()
}

fn laguerre_pair(n: usize, u: f64) -> (f64, f64) {
    let (mut prev, mut cur) = (0.0, 1.0);
    for j in 0..n {
        let next = ((2 * j + 1) as f64 - u) * cur / (j + 1) as f64 - j as f64 * prev / (j + 1) as f64;
        prev = cur;
        cur = next;
    }
    (cur, prev)
}

/// `n`-point Gauss rule for the weight `e^{-u}` on `[0, inf)`.
pub fn gauss_laguerre(n: usize) -> Vec<(f64, f64)> {
    assert!(n >= 1);
    let nodes = jacobi_nodes(|i| (2 * i + 1) as f64, |i| (i + 1) as f64, n);
    nodes
        .into_iter()
        .map(|mut u| {
            for _ in 0..3 {
                let (ln, ln1) = laguerre_pair(n, u);
                let deriv = n as f64 * (ln - ln1) / u;
                if deriv != 0.0 {
                    u -= ln / deriv;
                }
            }
            let mut s = 0.0;
            for j in 0..n {
                let (lj, _) = laguerre_pair(j, u);
                s += lj * lj;
            }
            (u, 1.0 / s)
        })
        .collect()
}

/// `E[ReLU(G) h_m(G)]` by an `n`-point rule that is exact for the smooth part.
///
/// For odd `m` the integrand `t h_m(t)` is even, so the half-line integral is
/// half a Gauss–Hermite expectation. For even `m` the substitution `u = t^2 / 2`
/// turns the half-line integral into a Gauss–Laguerre integral of a polynomial.
pub fn relu_hermite_moment(m: usize, n: usize) -> f64 {
    if m % 2 == 1 {
        0.5 * gauss_hermite(n)
            .iter()
            .map(|&(t, w)| w * t * hermite_eval(m, t))
            .sum::<f64>()
    } else {
        gauss_laguerre(n)
            .iter()
            .map(|&(u, w)| w * hermite_eval(m, (2.0 * u).sqrt()))
            .sum::<f64>()
            / (2.0 * PI).sqrt()
    }
}
