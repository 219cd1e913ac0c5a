//! Randomized checks of the moment bounds and the tensor recursion.
//!
//! Trial `i` draws from stream `i` of the seed, and trials are evaluated in
//! parallel but reduced in index order, so a report depends only on its inputs.

use std::fmt;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::{cramer_partition, jacobi_trudi, tensor_from_polynomial};
use crate::error::{Error, Result};
use crate::rng::stream_rng;
use crate::symtensor::index::binomial;
use crate::symtensor::SymTensor;

/// Outcome of a randomized verification suite.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub name: String,
    pub trials: usize,
    /// Largest observed `lhs / rhs` for bounds, or scaled residual for identities.
    pub worst: f64,
    /// Value `worst` must not exceed.
    pub limit: f64,
    pub violations: usize,
    pub passed: bool,
}

impl VerifyReport {
    pub(crate) fn from_ratios(name: String, ratios: &[f64], limit: f64) -> Self {
        let violations = ratios.iter().filter(|&&r| !(r <= limit)).count();
        let worst = ratios.iter().copied().fold(0.0, f64::max);
        Self {
            name,
            trials: ratios.len(),
            worst,
            limit,
            violations,
            passed: violations == 0,
        }
    }
}

impl fmt::Display for VerifyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {}: trials={} worst={:.3e} limit={:.3e} violations={}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.trials,
            self.worst,
            self.limit,
            self.violations
        )
    }
}

/// `C(t, k - 1) (2k)^k`, the factor in the moment bounds.
pub fn bound_factor(k: usize, t: usize) -> f64 {
    let b = binomial(t as u64, (k - 1) as u64).map_or(f64::INFINITY, |b| b as f64);
    b * (2.0 * k as f64).powi(k as i32)
}

// ratio lhs / rhs with a rounding slack proportional to the weight scale
fn bound_ratio(lhs: f64, rhs: f64, slack: f64) -> f64 {
    if lhs <= slack {
        0.0
    } else if rhs > 0.0 {
        (lhs - slack) / rhs
    } else {
        f64::INFINITY
    }
}

fn random_weights(rng: &mut ChaCha8Rng, k: usize, trial: usize) -> Vec<f64> {
    match trial % 5 {
        // exact cancellation between the first two weights
        4 if k >= 2 => {
            let mut w: Vec<f64> = (0..k).map(|_| rng.random_range(-1.0..1.0)).collect();
            w[1] = -w[0];
            w
        }
        _ => (0..k).map(|_| rng.random_range(-1.0..1.0)).collect(),
    }
}

fn random_nodes(rng: &mut ChaCha8Rng, k: usize, trial: usize) -> Vec<f64> {
    match trial % 4 {
        // clustered nodes
        1 => {
            let c: f64 = rng.random_range(-1.0..1.0);
            (0..k)
                .map(|_| (c + rng.random_range(-1e-3..1e-3)).clamp(-1.0, 1.0))
                .collect()
        }
        // nodes near the ends of the interval
        2 => (0..k)
            .map(|_| {
                let s = if rng.random::<bool>() { 1.0 } else { -1.0 };
                s * (1.0 - rng.random_range(0.0..0.05))
            })
            .collect(),
        _ => (0..k).map(|_| rng.random_range(-1.0..=1.0)).collect(),
    }
}

fn random_vectors(rng: &mut ChaCha8Rng, k: usize, dim: usize, trial: usize) -> Vec<Vec<f64>> {
    let base: Vec<f64> = unit(rng, dim);
    (0..k)
        .map(|_| {
            let mut v = if trial % 3 == 1 {
                // nearly parallel directions
                let mut v: Vec<f64> = base.iter().map(|b| b + rng.random_range(-0.05..0.05)).collect();
                normalize(&mut v);
                v
            } else {
                unit(rng, dim)
            };
            let r = if trial.is_multiple_of(2) { 1.0 } else { rng.random_range(0.0..=1.0) };
            v.iter_mut().for_each(|x| *x *= r);
            v
        })
        .collect()
}

fn normalize(v: &mut [f64]) {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
}

fn unit(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    loop {
        let mut v: Vec<f64> = (0..dim)
            .map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal))
            .collect();
        if v.iter().any(|x| *x != 0.0) {
            normalize(&mut v);
            return v;
        }
    }
}

fn check_kt(k: usize, t: usize) -> Result<()> {
    if k == 0 || t < k {
        return Err(Error::InvalidArgument(format!("need t >= k >= 1, got k = {k}, t = {t}")));
    }
    Ok(())
}

/// Checks `|M_t| <= C(t, k-1) (2k)^k max_{s<k} |M_s|` for `M_s = sum_i w_i x_i^s`, `|x_i| <= 1`.
pub fn verify_scalar_bound(k: usize, t: usize, trials: usize, seed: u64) -> Result<VerifyReport> {
    check_kt(k, t)?;
    let factor = bound_factor(k, t);
    let ratios: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = stream_rng(seed, trial as u64);
            let w = random_weights(&mut rng, k, trial);
            let x = random_nodes(&mut rng, k, trial);
            let moment = |s: usize| -> f64 {
                w.iter().zip(&x).map(|(wi, xi)| wi * xi.powi(s as i32)).sum()
            };
            let lower = (0..k).map(|s| moment(s).abs()).fold(0.0, f64::max);
            let slack = 1e-12 * w.iter().map(|v| v.abs()).sum::<f64>();
            bound_ratio(moment(t).abs(), factor * lower, slack)
        })
        .collect();
    Ok(VerifyReport::from_ratios(
        format!("scalar-bound k={k} t={t} seed={seed}"),
        &ratios,
        1.0,
    ))
}

/// `||sum_i w_i v_i^{⊗s}||`.
fn power_sum_norm(w: &[f64], vs: &[Vec<f64>], s: usize) -> Result<f64> {
    let mut m = SymTensor::zeros(s, vs[0].len())?;
    for (wi, vi) in w.iter().zip(vs) {
        m.axpy(*wi, &SymTensor::power(vi, s)?)?;
    }
    Ok(m.norm2())
}

/// Checks `M_t = Sym(sum_a (-1)^{k+a+1} M_a ⊗ s_(t-k+1, 1^{k-1-a})(v_1..v_k))`
/// with residual at most `1e-8 (1 + ||M_t||)`.
pub fn verify_tensor_recursion(
    k: usize,
    t: usize,
    dim: usize,
    trials: usize,
    seed: u64,
) -> Result<VerifyReport> {
    check_kt(k, t)?;
    if dim == 0 {
        return Err(Error::InvalidArgument("dim must be >= 1".into()));
    }
    crate::symtensor::index::checked_len(dim, t)?;
    let polys = (0..k)
        .map(|a| jacobi_trudi(&cramer_partition(k, t, a)?, k))
        .collect::<Result<Vec<_>>>()?;
    let ratios = (0..trials)
        .into_par_iter()
        .map(|trial| -> Result<f64> {
            let mut rng = stream_rng(seed, trial as u64);
            let w = random_weights(&mut rng, k, trial);
            let vs = random_vectors(&mut rng, k, dim, trial);
            let moment = |s: usize| -> Result<SymTensor> {
                let mut m = SymTensor::zeros(s, dim)?;
                for (wi, vi) in w.iter().zip(&vs) {
                    m.axpy(*wi, &SymTensor::power(vi, s)?)?;
                }
                Ok(m)
            };
            let mt = moment(t)?;
            let mut rhs = SymTensor::zeros(t, dim)?;
            for (a, poly) in polys.iter().enumerate() {
                let sign = if (k + a + 1).is_multiple_of(2) { 1.0 } else { -1.0 };
                let s = tensor_from_polynomial(poly, t - a, &vs)?;
                rhs.axpy(sign, &moment(a)?.symmetrize_product(&s)?)?;
            }
            Ok(mt.sub(&rhs)?.norm2() / (1.0 + mt.norm2()))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(VerifyReport::from_ratios(
        format!("tensor-recursion k={k} t={t} dim={dim} seed={seed}"),
        &ratios,
        1e-8,
    ))
}

/// Checks `||M_t|| <= C(t, k-1) (2k)^k max_{even s < 2k} ||M_s||` for even `t >= 2k`
/// and `||v_i|| <= 1`.
pub fn verify_even_bound(
    k: usize,
    t: usize,
    dim: usize,
    trials: usize,
    seed: u64,
) -> Result<VerifyReport> {
    if k == 0 || t % 2 == 1 || t < 2 * k {
        return Err(Error::InvalidArgument(format!(
            "need even t >= 2k >= 2, got k = {k}, t = {t}"
        )));
    }
    if dim == 0 {
        return Err(Error::InvalidArgument("dim must be >= 1".into()));
    }
    crate::symtensor::index::checked_len(dim, t)?;
    let factor = bound_factor(k, t);
    let ratios = (0..trials)
        .into_par_iter()
        .map(|trial| -> Result<f64> {
            let mut rng = stream_rng(seed, trial as u64);
            let w = random_weights(&mut rng, k, trial);
            let vs = random_vectors(&mut rng, k, dim, trial);
            let mut lower: f64 = 0.0;
            for s in (0..2 * k).step_by(2) {
                lower = lower.max(power_sum_norm(&w, &vs, s)?);
            }
            let slack = 1e-12 * w.iter().map(|v| v.abs()).sum::<f64>();
            Ok(bound_ratio(power_sum_norm(&w, &vs, t)?, factor * lower, slack))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(VerifyReport::from_ratios(
        format!("even-bound k={k} t={t} dim={dim} seed={seed}"),
        &ratios,
        1.0,
    ))
}
