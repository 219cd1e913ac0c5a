//! Closed-form counterparts of the learner steps, computed from the network itself.

use nalgebra::DMatrix;
use serde::Serialize;

use super::hypothesis::Hypothesis;
use crate::datagen::ReluNetwork;
use crate::error::{Error, Result};
use crate::hermite::relu_coeffs;
use crate::moments::analytic_moment_projected;
use crate::symtensor::index::binomial;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn check_basis(net: &ReluNetwork, basis: &DMatrix<f64>) -> Result<()> {
    if basis.nrows() != net.dim() {
        return Err(Error::ShapeMismatch(format!(
            "basis has {} rows, network dimension is {}",
            basis.nrows(),
            net.dim()
        )));
    }
    Ok(())
}

/// `A = sum_{m=1}^{cutoff} gram(M_m)`, using
/// `gram(M_m) = c_m^2 sum_ij w_i w_j (v_i . v_j)^{m-1} v_i v_jᵀ`.
pub fn analytic_quadratic_form(net: &ReluNetwork, cutoff: usize) -> DMatrix<f64> {
    let d = net.dim();
    let (w, vs) = (net.weights(), net.directions());
    let c = relu_coeffs(cutoff);
    let mut a = DMatrix::zeros(d, d);
    for (i, vi) in vs.iter().enumerate() {
        for (j, vj) in vs.iter().enumerate() {
            let g = dot(vi, vj);
            let mut s = 0.0;
            let mut p = 1.0;
            for cm in &c[1..] {
                s += cm * cm * p;
                p *= g;
            }
            let scale = w[i] * w[j] * s;
            for r in 0..d {
                for q in 0..d {
                    a[(r, q)] += scale * vi[r] * vj[q];
                }
            }
        }
    }
    (&a + a.transpose()) * 0.5
}

/// The hypothesis with `P_m = (Bᵀ)^{⊗m} M_m` for `m <= degree`.
pub fn analytic_hypothesis(net: &ReluNetwork, basis: &DMatrix<f64>, degree: usize) -> Result<Hypothesis> {
    check_basis(net, basis)?;
    let coeffs = (0..=degree)
        .map(|m| analytic_moment_projected(net, m, basis))
        .collect::<Result<Vec<_>>>()?;
    Hypothesis::new(basis.clone(), coeffs)
}

/// Mass of `M_m` left outside `span(B)`, for one order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResidualMass {
    pub m: usize,
    /// Max of `||M_m u||` over an orthonormal basis `u` of `span(B)^⊥ ∩ span(B, v_1..v_k)`.
    pub orth_contraction_max: f64,
    /// `||R_m - M_m||` with `R_m = c_m sum_i w_i (BBᵀ v_i)^{⊗m}`.
    pub projection_error: f64,
}

fn orthogonal_directions(net: &ReluNetwork, basis: &DMatrix<f64>) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let residuals: Vec<Vec<f64>> = net
        .directions()
        .iter()
        .map(|v| {
            let mut r = v.clone();
            for col in basis.column_iter() {
                let p: f64 = col.iter().zip(v).map(|(b, x)| b * x).sum();
                r.iter_mut().zip(col.iter()).for_each(|(x, b)| *x -= p * b);
            }
            r
        })
        .collect();
    let mut us: Vec<Vec<f64>> = Vec::new();
    for r in &residuals {
        let mut u = r.clone();
        for _ in 0..2 {
            for q in &us {
                let p = dot(&u, q);
                u.iter_mut().zip(q).for_each(|(x, y)| *x -= p * y);
            }
        }
        let n = dot(&u, &u).sqrt();
        if n > 1e-10 {
            us.push(u.into_iter().map(|x| x / n).collect());
        }
    }
    (residuals, us)
}

/// Per-order residual diagnostics for `m = 0..=m_max`.
pub fn residual_orthogonal_mass(net: &ReluNetwork, basis: &DMatrix<f64>, m_max: usize) -> Result<Vec<ResidualMass>> {
    check_basis(net, basis)?;
    let (w, vs) = (net.weights(), net.directions());
    let width = vs.len();
    let c = relu_coeffs(m_max);
    let (res, us) = orthogonal_directions(net, basis);
    let a: Vec<f64> = (0..width * width).map(|ij| dot(&vs[ij / width], &vs[ij % width])).collect();
    let rr: Vec<f64> = (0..width * width).map(|ij| dot(&res[ij / width], &res[ij % width])).collect();
    // b = (Bᵀv_i).(Bᵀv_j) = a - r_i.r_j
    let b: Vec<f64> = a.iter().zip(&rr).map(|(x, y)| x - y).collect();
    let vu: Vec<Vec<f64>> = us.iter().map(|u| vs.iter().map(|v| dot(v, u)).collect()).collect();

    let mut out = Vec::with_capacity(m_max + 1);
    for m in 0..=m_max {
        let cm2 = c[m] * c[m];
        let mut orth = 0.0f64;
        let mut proj = 0.0;
        if m >= 1 && cm2 > 0.0 {
            for proj_u in &vu {
                let mut s = 0.0;
                for i in 0..width {
                    for j in 0..width {
                        s += w[i] * w[j] * proj_u[i] * proj_u[j] * a[i * width + j].powi(m as i32 - 1);
                    }
                }
                orth = orth.max((cm2 * s).max(0.0).sqrt());
            }
            // a^m - b^m = (a - b) sum_{l<m} a^l b^{m-1-l}
            for ij in 0..width * width {
                let (x, y) = (a[ij], b[ij]);
                let mut geo = 0.0;
                let mut xl = 1.0;
                for l in 0..m {
                    geo += xl * y.powi((m - 1 - l) as i32);
                    xl *= x;
                }
                proj += w[ij / width] * w[ij % width] * rr[ij] * geo;
            }
            proj = (cm2 * proj).max(0.0).sqrt();
        }
        out.push(ResidualMass {
            m,
            orth_contraction_max: orth,
            projection_error: proj,
        });
    }
    Ok(out)
}

/// Outcome of comparing every `||R_m - M_m||`, `m <= degree`, against
/// `C(m, 2k-1) (4k)^{2k} max_{even t < 4k} ||R_t - M_t|| / |c_t| max_{m <= degree} |c_m| + 1e-8`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualBoundCheck {
    pub k: usize,
    pub degree: usize,
    /// `max_{even t < 4k} ||R_t - M_t|| / |c_t|`.
    pub low_order_ratio: f64,
    pub max_coeff: f64,
    /// `(m, lhs, rhs)` per order.
    pub orders: Vec<(usize, f64, f64)>,
    pub passed: bool,
}

/// Additive slack of the residual bound check.
pub const RESIDUAL_BOUND_SLACK: f64 = 1e-8;

pub fn projection_residual_bound(
    net: &ReluNetwork,
    basis: &DMatrix<f64>,
    degree: usize,
) -> Result<ResidualBoundCheck> {
    let k = basis.ncols();
    let m_max = degree.max(4 * k);
    let mass = residual_orthogonal_mass(net, basis, m_max)?;
    let c = relu_coeffs(m_max);
    let low_order_ratio = (0..4 * k)
        .step_by(2)
        .filter(|&t| c[t] != 0.0)
        .map(|t| mass[t].projection_error / c[t].abs())
        .fold(0.0, f64::max);
    let max_coeff = c[..=degree].iter().fold(0.0f64, |a, x| a.max(x.abs()));
    let scale = (4.0 * k as f64).powi(2 * k as i32);
    let orders: Vec<(usize, f64, f64)> = (0..=degree)
        .map(|m| {
            let comb = binomial(m as u64, (2 * k - 1) as u64).map_or(f64::INFINITY, |b| b as f64);
            let rhs = comb * scale * low_order_ratio * max_coeff + RESIDUAL_BOUND_SLACK;
            (m, mass[m].projection_error, rhs)
        })
        .collect();
    let passed = orders.iter().all(|(_, l, r)| l <= r);
    Ok(ResidualBoundCheck {
        k,
        degree,
        low_order_ratio,
        max_coeff,
        orders,
        passed,
    })
}
