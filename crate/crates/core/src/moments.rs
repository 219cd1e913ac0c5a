//! Empirical Hermite moment tensors `E[y H_m(X)]` and their closed forms for
//! ReLU networks, `M_m = c_m sum_i w_i v_i^{⊗m}`.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::datagen::{ReluNetwork, Samples};
use crate::error::{Error, Result};
use crate::hermite::{fill_hermite, relu_coeff};
use crate::symtensor::index::{binomial, inv_sqrt_weights, ProductTable};
use crate::symtensor::SymTensor;

/// Samples per leaf of the reduction tree.
pub const ESTIMATE_CHUNK: usize = 2048;

/// An empirical moment tensor with the accuracy it was sized for, if any.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentEstimate {
    pub tensor: SymTensor,
    pub order: usize,
    pub num_samples: usize,
    /// Target `l2` error `delta`.
    pub target_error: Option<f64>,
    /// Success probability `1 - tau`.
    pub confidence: Option<f64>,
}

impl MomentEstimate {
    pub fn with_target(mut self, delta: f64, tau: f64) -> Self {
        self.target_error = Some(delta);
        self.confidence = Some(1.0 - tau);
        self
    }
}

fn project_point(basis: &DMatrix<f64>, x: &[f64], z: &mut [f64]) {
    for (j, zj) in z.iter_mut().enumerate() {
        *zj = basis.column(j).iter().zip(x).map(|(b, v)| b * v).sum();
    }
}

fn accumulate_range(
    samples: &Samples,
    range: std::ops::Range<usize>,
    max_order: usize,
    basis: Option<&DMatrix<f64>>,
    n: usize,
) -> Result<Vec<f64>> {
    let mut table = ProductTable::new(n, max_order)?;
    let mut acc = vec![0.0; table.len()];
    let stride = max_order + 1;
    let mut values = vec![0.0; n * stride];
    let mut z = vec![0.0; n];
    for i in range {
        let s = samples.get(i);
        let point = match basis {
            Some(b) => {
                project_point(b, s.x, &mut z);
                &z[..]
            }
            None => s.x,
        };
        for (row, &xj) in values.chunks_exact_mut(stride).zip(point) {
            fill_hermite(xj, row);
        }
        table.accumulate(&values, s.y, &mut acc);
    }
    Ok(acc)
}

// Sum over chunks `lo..hi`, split at the midpoint regardless of scheduling.
fn tree_sum(
    samples: &Samples,
    chunks: std::ops::Range<usize>,
    max_order: usize,
    basis: Option<&DMatrix<f64>>,
    n: usize,
) -> Result<Vec<f64>> {
    if chunks.len() == 1 {
        let start = chunks.start * ESTIMATE_CHUNK;
        let end = (start + ESTIMATE_CHUNK).min(samples.len());
        return accumulate_range(samples, start..end, max_order, basis, n);
    }
    let mid = chunks.start + chunks.len() / 2;
    let (left, right) = rayon::join(
        || tree_sum(samples, chunks.start..mid, max_order, basis, n),
        || tree_sum(samples, mid..chunks.end, max_order, basis, n),
    );
    let mut left = left?;
    for (a, b) in left.iter_mut().zip(right?) {
        *a += b;
    }
    Ok(left)
}

/// Empirical `(1/N) sum_i y_i H_m(z_i)` for every `m <= max_order`, where `z_i` is
/// `x_i`, or `Bᵀ x_i` when a `d x k` basis `B` is given.
pub fn estimate_moments(
    samples: &Samples,
    max_order: usize,
    basis: Option<&DMatrix<f64>>,
) -> Result<Vec<SymTensor>> {
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    let n = match basis {
        Some(b) => {
            if b.nrows() != samples.dim() {
                return Err(Error::ShapeMismatch(format!(
                    "basis has {} rows, samples have dimension {}",
                    b.nrows(),
                    samples.dim()
                )));
            }
            b.ncols()
        }
        None => samples.dim(),
    };
    if n == 0 {
        return Err(Error::InvalidArgument("basis must have at least one column".into()));
    }
    // validates the budget before any parallel work starts
    let table = ProductTable::new(n, max_order)?;
    let chunks = samples.len().div_ceil(ESTIMATE_CHUNK);
    let sum = tree_sum(samples, 0..chunks, max_order, basis, n)?;
    let inv_n = 1.0 / samples.len() as f64;
    (0..=max_order)
        .map(|m| {
            let scale = inv_sqrt_weights(n, m)?;
            let entries = sum[table.order_range(m)]
                .iter()
                .zip(scale.iter())
                .map(|(s, w)| s * inv_n * w)
                .collect();
            SymTensor::from_entries(m, n, entries)
        })
        .collect()
}

/// Empirical order-`m` moment; see [`estimate_moments`].
pub fn estimate_moment(
    samples: &Samples,
    m: usize,
    basis: Option<&DMatrix<f64>>,
) -> Result<MomentEstimate> {
    let tensor = estimate_moments(samples, m, basis)?.pop().expect("order m present");
    Ok(MomentEstimate {
        tensor,
        order: m,
        num_samples: samples.len(),
        target_error: None,
        confidence: None,
    })
}

/// Bound on `||y||_m` for a network with `sum |w_i| = l1`: `sqrt(max(m, 1)) l1`.
pub fn label_moment_bound(m: usize, l1: f64) -> f64 {
    (m.max(1) as f64).sqrt() * l1
}

/// Heuristic sample count for an order-`m` estimate with error `delta` and failure
/// probability `tau`: `multiplier C(d + m, m) e^{m/t} y_bound^2 / (tau^2 delta^2)`
/// with `t = m` (so the hypercontractive factor is `e` for `m >= 1`).
pub fn sample_size(
    m: usize,
    d_eff: usize,
    delta: f64,
    tau: f64,
    y_bound: f64,
    multiplier: f64,
) -> Result<u64> {
    for (name, v) in [("delta", delta), ("tau", tau), ("y_bound", y_bound), ("multiplier", multiplier)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::InvalidArgument(format!("{name} must be positive, got {v}")));
        }
    }
    if d_eff == 0 {
        return Err(Error::InvalidArgument("effective dimension must be >= 1".into()));
    }
    let overflow = || {
        Error::SampleSizeOverflow(format!(
            "order {m} in dimension {d_eff} needs more than 2^64 samples; reduce m or the effective dimension"
        ))
    };
    let count = binomial((d_eff + m) as u64, m as u64).ok_or_else(overflow)? as f64;
    let hyper = if m == 0 { 1.0 } else { std::f64::consts::E };
    let n = multiplier * count * hyper * y_bound * y_bound / (tau * tau * delta * delta);
    if !n.is_finite() || n >= u64::MAX as f64 {
        return Err(overflow());
    }
    Ok((n.ceil() as u64).max(1))
}

/// `M_m = c_m sum_i w_i v_i^{⊗m}`.
pub fn analytic_moment(net: &ReluNetwork, m: usize) -> Result<SymTensor> {
    combine_powers(relu_coeff(m), net.weights(), net.directions(), m, net.dim())
}

/// `(Bᵀ)^{⊗m} M_m = c_m sum_i w_i (Bᵀ v_i)^{⊗m}`, in the coordinates of `B`.
pub fn analytic_moment_projected(net: &ReluNetwork, m: usize, basis: &DMatrix<f64>) -> Result<SymTensor> {
    if basis.nrows() != net.dim() {
        return Err(Error::ShapeMismatch(format!(
            "basis has {} rows, network dimension is {}",
            basis.nrows(),
            net.dim()
        )));
    }
    let projected: Vec<Vec<f64>> = net
        .directions()
        .iter()
        .map(|v| {
            let mut z = vec![0.0; basis.ncols()];
            project_point(basis, v, &mut z);
            z
        })
        .collect();
    combine_powers(relu_coeff(m), net.weights(), &projected, m, basis.ncols())
}

fn combine_powers(c: f64, w: &[f64], vs: &[Vec<f64>], m: usize, dim: usize) -> Result<SymTensor> {
    let mut out = SymTensor::zeros(m, dim)?;
    if c == 0.0 {
        return Ok(out);
    }
    for (wi, v) in w.iter().zip(vs) {
        out.axpy(c * wi, &SymTensor::power(v, m)?)?;
    }
    Ok(out)
}

/// Closed-form moment norms `||M_m||^2 = c_m^2 sum_ij w_i w_j (v_i . v_j)^m`
/// for `m <= m_max`.
pub fn analytic_moment_norms2(net: &ReluNetwork, m_max: usize) -> Vec<f64> {
    let gram = direction_gram(net.directions(), net.directions());
    let c = crate::hermite::relu_coeffs(m_max);
    weighted_power_sums(net.weights(), &gram, m_max)
        .into_par_iter()
        .zip(c)
        .map(|(s, cm)| (cm * cm * s).max(0.0))
        .collect()
}

/// Row-major matrix of inner products `a_i . b_j`.
pub(crate) fn direction_gram(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<f64> {
    let mut g = Vec::with_capacity(a.len() * b.len());
    for u in a {
        for v in b {
            g.push(u.iter().zip(v).map(|(x, y)| x * y).sum());
        }
    }
    g
}

/// `sum_ij w_i w_j g_ij^m` for `m <= m_max`.
pub(crate) fn weighted_power_sums(w: &[f64], gram: &[f64], m_max: usize) -> Vec<f64> {
    let k = w.len();
    let mut out = vec![0.0; m_max + 1];
    for i in 0..k {
        for j in 0..k {
            let (g, ww) = (gram[i * k + j], w[i] * w[j]);
            let mut p = 1.0;
            for slot in out.iter_mut() {
                *slot += ww * p;
                p *= g;
            }
        }
    }
    out
}
