//! Normalized probabilist's Hermite polynomials, Hermite tensors and the Hermite
//! coefficients of the ReLU.
//!
//! `h_m = He_m / sqrt(m!)` is orthonormal under the standard Gaussian. The
//! order-`m` Hermite tensor of `x in R^n` has, at multiplicity vector `alpha`,
//! the entry `prod_j He_{alpha_j}(x_j) / sqrt(m!)`.

use std::f64::consts::PI;

use crate::error::Result;
use crate::symtensor::index::{inv_sqrt_weights, ProductTable};
use crate::symtensor::SymTensor;

/// Values `h_0(t), ..., h_{max_order}(t)` at a single point.
#[derive(Debug, Clone, PartialEq)]
pub struct HermiteSeries {
    max_order: usize,
    values: Vec<f64>,
}

impl HermiteSeries {
    pub fn max_order(&self) -> usize {
        self.max_order
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, m: usize) -> Option<f64> {
        self.values.get(m).copied()
    }
}

/// `h_m(t)` by the three-term recurrence.
pub fn hermite_eval(m: usize, t: f64) -> f64 {
    let (mut prev, mut cur) = (0.0, 1.0);
    for j in 0..m {
        let next = (t * cur - (j as f64).sqrt() * prev) / ((j + 1) as f64).sqrt();
        prev = cur;
        cur = next;
    }
    cur
}

/// `h_0(t), ..., h_{m_max}(t)` in one recurrence pass.
pub fn hermite_all(m_max: usize, t: f64) -> HermiteSeries {
    let mut values = vec![0.0; m_max + 1];
    fill_hermite(t, &mut values);
    HermiteSeries {
        max_order: m_max,
        values,
    }
}

/// Writes `h_0(t), ..., h_{out.len()-1}(t)` into `out`.
pub(crate) fn fill_hermite(t: f64, out: &mut [f64]) {
    if out.is_empty() {
        return;
    }
    out[0] = 1.0;
    if out.len() > 1 {
        out[1] = t;
    }
    for j in 1..out.len().saturating_sub(1) {
        out[j + 1] = (t * out[j] - (j as f64).sqrt() * out[j - 1]) / ((j + 1) as f64).sqrt();
    }
}

/// `c_m = E[ReLU(G) h_m(G)]` for `G ~ N(0, 1)`.
pub fn relu_coeff(m: usize) -> f64 {
    let g0 = 1.0 / (2.0 * PI).sqrt();
    match m {
        0 => g0,
        1 => 0.5,
        _ if m % 2 == 1 => 0.0,
        _ => hermite_eval(m - 2, 0.0) * g0 / ((m * (m - 1)) as f64).sqrt(),
    }
}

/// `c_0, ..., c_{m_max}` in linear time.
pub fn relu_coeffs(m_max: usize) -> Vec<f64> {
    let g0 = 1.0 / (2.0 * PI).sqrt();
    let mut out = vec![0.0; m_max + 1];
    out[0] = g0;
    if m_max >= 1 {
        out[1] = 0.5;
    }
    // h_{2n}(0) = -sqrt((2n-1)/(2n)) h_{2n-2}(0)
    let mut h = 1.0;
    let mut m = 2;
    while m <= m_max {
        if m > 2 {
            let j = (m - 2) as f64;
            h *= -((j - 1.0) / j).sqrt();
        }
        out[m] = h * g0 / ((m * (m - 1)) as f64).sqrt();
        m += 2;
    }
    out
}

/// Order-`m` Hermite tensor of `x`.
pub fn hermite_tensor(m: usize, x: &[f64]) -> Result<SymTensor> {
    let n = x.len();
    if n == 0 {
        return SymTensor::zeros(m, 0);
    }
    let mut table = ProductTable::new(n, m)?;
    let values = hermite_values(x, m);
    let range = table.order_range(m);
    let scale = inv_sqrt_weights(n, m)?;
    let entries = table.fill(&values)[range]
        .iter()
        .zip(scale.iter())
        .map(|(p, s)| p * s)
        .collect();
    SymTensor::from_entries(m, n, entries)
}

/// Row-major `len(x) x (m + 1)` table of `h_a(x_j)`.
pub(crate) fn hermite_values(x: &[f64], m: usize) -> Vec<f64> {
    let mut values = vec![0.0; x.len() * (m + 1)];
    for (row, &xj) in values.chunks_exact_mut(m + 1).zip(x) {
        fill_hermite(xj, row);
    }
    values
}
