//! Schur polynomials: the bialternant ratio, the Jacobi–Trudi determinant with
//! exact coefficients, tensor-valued Schur polynomials, and the Cramer
//! coefficients expressing `x^t` through `1, x, ..., x^{k-1}` on `k` nodes.

mod partition;
mod poly;
pub mod verify;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::symtensor::SymTensor;
pub use partition::Partition;
pub use poly::{complete_homogeneous, jacobi_trudi, SymmetricPolynomial};
pub use verify::{verify_even_bound, verify_scalar_bound, verify_tensor_recursion, VerifyReport};

/// Largest acceptable condition estimate for the Vandermonde solve.
pub const CRAMER_CONDITION_LIMIT: f64 = 1e12;

/// `s_lambda(x)` as `det([x_i^{lambda_j + n - j}]) / det([x_i^{n - j}])`.
///
/// When the Vandermonde denominator is tiny (nearly repeated entries) the value
/// is taken from the Jacobi–Trudi polynomial instead.
pub fn schur_bialternant(lambda: &Partition, x: &[f64]) -> Result<f64> {
    let n = x.len();
    let Some(parts) = lambda.padded(n) else {
        return Ok(0.0);
    };
    if n == 0 {
        return Ok(1.0);
    }
    let mut vander = 1.0;
    for i in 0..n {
        for j in i + 1..n {
            vander *= x[i] - x[j];
        }
    }
    let scale = x.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let pairs = (n * (n - 1) / 2) as i32;
    if vander.abs() < 1e-6 * scale.powi(pairs) {
        return jacobi_trudi(lambda, n)?.eval(x);
    }
    let num = DMatrix::from_fn(n, n, |i, j| x[i].powi((parts[j] as usize + n - 1 - j) as i32));
    Ok(num.determinant() / vander)
}

/// Tensor obtained from `s_lambda` by replacing each monomial
/// `c_alpha prod_i x_i^{alpha_i}` with `c_alpha Sym(⊗_i v_i^{⊗alpha_i})`.
pub fn tensor_schur(lambda: &Partition, vs: &[Vec<f64>]) -> Result<SymTensor> {
    tensor_from_polynomial(&jacobi_trudi(lambda, vs.len())?, lambda.size(), vs)
}

/// Tensor image of a homogeneous polynomial of degree `degree` in `vs.len()` variables.
pub fn tensor_from_polynomial(
    poly: &SymmetricPolynomial,
    degree: usize,
    vs: &[Vec<f64>],
) -> Result<SymTensor> {
    let dim = vs
        .first()
        .map(Vec::len)
        .ok_or_else(|| Error::InvalidArgument("at least one vector is required".into()))?;
    if vs.iter().any(|v| v.len() != dim) {
        return Err(Error::ShapeMismatch("vectors of different lengths".into()));
    }
    if poly.num_vars() != vs.len() {
        return Err(Error::ShapeMismatch(format!(
            "polynomial in {} variables, {} vectors",
            poly.num_vars(),
            vs.len()
        )));
    }
    let mut out = SymTensor::zeros(degree, dim)?;
    let mut powers: Vec<Vec<Option<SymTensor>>> = vec![Vec::new(); vs.len()];
    for (alpha, coeff) in poly.terms() {
        let total: usize = alpha.iter().map(|&a| a as usize).sum();
        if total != degree {
            return Err(Error::InvalidArgument(format!(
                "monomial {alpha:?} is not of degree {degree}"
            )));
        }
        let mut term = SymTensor::scalar(1.0, dim)?;
        for (i, &a) in alpha.iter().enumerate() {
            if a == 0 {
                continue;
            }
            let cache = &mut powers[i];
            if cache.len() <= a as usize {
                cache.resize(a as usize + 1, None);
            }
            if cache[a as usize].is_none() {
                cache[a as usize] = Some(SymTensor::power(&vs[i], a as usize)?);
            }
            term = term.symmetrize_product(cache[a as usize].as_ref().expect("filled"))?;
        }
        let c = num_traits::ToPrimitive::to_f64(coeff).unwrap_or(f64::NAN);
        out.axpy(c, &term)?;
    }
    Ok(out)
}

fn check_cramer_input(k: usize, t: usize, xs: &[f64]) -> Result<()> {
    if k == 0 || xs.len() != k {
        return Err(Error::InvalidArgument(format!(
            "need k >= 1 nodes, got k = {k} with {} values",
            xs.len()
        )));
    }
    if t < k {
        return Err(Error::InvalidArgument(format!("need t >= k, got t = {t}, k = {k}")));
    }
    if xs.iter().any(|x| !x.is_finite() || x.abs() > 1.0 + 1e-12) {
        return Err(Error::InvalidArgument(format!("nodes must lie in [-1, 1]: {xs:?}")));
    }
    for i in 0..k {
        for j in i + 1..k {
            if xs[i] == xs[j] {
                return Err(Error::InvalidArgument(format!("repeated node {}", xs[i])));
            }
        }
    }
    Ok(())
}

/// Coefficients `c_0..c_{k-1}` with `x_i^t = sum_a c_a x_i^a` at every node,
/// from a direct solve of the `k x k` Vandermonde system.
pub fn cramer_coefficients(k: usize, t: usize, xs: &[f64]) -> Result<Vec<f64>> {
    check_cramer_input(k, t, xs)?;
    let v = DMatrix::from_fn(k, k, |i, a| xs[i].powi(a as i32));
    let sv = v.clone().singular_values();
    let (smax, smin) = sv
        .iter()
        .fold((0.0f64, f64::INFINITY), |(hi, lo), &s| (hi.max(s), lo.min(s)));
    let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if condition > CRAMER_CONDITION_LIMIT {
        return Err(Error::IllConditioned {
            condition,
            limit: CRAMER_CONDITION_LIMIT,
        });
    }
    let rhs = nalgebra::DVector::from_fn(k, |i, _| xs[i].powi(t as i32));
    let sol = v.lu().solve(&rhs).ok_or(Error::IllConditioned {
        condition,
        limit: CRAMER_CONDITION_LIMIT,
    })?;
    Ok(sol.iter().copied().collect())
}

/// Partition `(t - k + 1, 1^{k-1-a})` whose Schur polynomial gives `c_a`.
pub fn cramer_partition(k: usize, t: usize, a: usize) -> Result<Partition> {
    if t < k || a >= k {
        return Err(Error::InvalidArgument(format!(
            "need t >= k > a, got t = {t}, k = {k}, a = {a}"
        )));
    }
    Partition::hook((t - k + 1) as u32, k - 1 - a)
}

/// The same coefficients as `(-1)^{k+a+1} s_lambda(xs)` with `lambda = (t-k+1, 1^{k-1-a})`.
pub fn cramer_coefficients_schur(k: usize, t: usize, xs: &[f64]) -> Result<Vec<f64>> {
    check_cramer_input(k, t, xs)?;
    (0..k)
        .map(|a| {
            let sign = if (k + a + 1).is_multiple_of(2) { 1.0 } else { -1.0 };
            Ok(sign * jacobi_trudi(&cramer_partition(k, t, a)?, k)?.eval(xs)?)
        })
        .collect()
}
