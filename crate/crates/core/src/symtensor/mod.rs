//! Symmetric tensors in multiset-compressed storage.
//!
//! A [`SymTensor`] of order `m` over `R^n` stores `C(n + m - 1, m)` values, one
//! per multiset of coordinates (see [`index`] for the layout). Dense identities
//! are recovered through the multinomial weight of each entry: the Frobenius
//! inner product of two symmetric tensors is `sum_alpha weight(alpha) A_alpha B_alpha`.

pub mod index;
pub(crate) mod io;

#[cfg(test)]
pub(crate) mod dense;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
pub use index::{
    entry_budget, entry_count, multi_indices, multinomial, rank, set_entry_budget, MultiIndex,
    DEFAULT_ENTRY_BUDGET,
};
use index::{checked_len, raise_table, weights, ProductTable};

#[derive(Debug, Clone, PartialEq)]
pub struct SymTensor {
    order: usize,
    dim: usize,
    entries: Vec<f64>,
}

impl SymTensor {
    pub fn zeros(order: usize, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("tensor dimension must be >= 1".into()));
        }
        let len = checked_len(dim, order)?;
        Ok(Self {
            order,
            dim,
            entries: vec![0.0; len],
        })
    }

    /// Order-0 tensor holding `value`.
    pub fn scalar(value: f64, dim: usize) -> Result<Self> {
        Self::from_entries(0, dim, vec![value])
    }

    pub fn from_entries(order: usize, dim: usize, entries: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("tensor dimension must be >= 1".into()));
        }
        let len = checked_len(dim, order)?;
        if entries.len() != len {
            return Err(Error::ShapeMismatch(format!(
                "order-{order} tensor over dimension {dim} has {len} entries, got {}",
                entries.len()
            )));
        }
        if let Some(bad) = entries.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!("non-finite tensor entry {bad}")));
        }
        Ok(Self {
            order,
            dim,
            entries,
        })
    }

    /// Builds a tensor entry by entry from its multiplicity vectors.
    pub fn from_fn(order: usize, dim: usize, mut f: impl FnMut(&[u32]) -> f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("tensor dimension must be >= 1".into()));
        }
        let entries = index::alphas(dim, order)?.iter().map(|a| f(a)).collect();
        Self::from_entries(order, dim, entries)
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Compressed entries in storage order.
    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn into_entries(self) -> Vec<f64> {
        self.entries
    }

    /// Entry at a multiplicity vector.
    pub fn get(&self, alpha: &[u32]) -> Result<f64> {
        let order: usize = alpha.iter().map(|&a| a as usize).sum();
        if alpha.len() != self.dim || order != self.order {
            return Err(Error::ShapeMismatch(format!(
                "multi-index {alpha:?} does not fit an order-{} tensor over dimension {}",
                self.order, self.dim
            )));
        }
        Ok(self.entries[rank(alpha)])
    }

    /// Tensor power `v^{⊗m}`.
    pub fn power(v: &[f64], m: usize) -> Result<Self> {
        let dim = v.len();
        if dim == 0 {
            return Err(Error::InvalidArgument("tensor dimension must be >= 1".into()));
        }
        checked_len(dim, m)?;
        let mut table = ProductTable::new(dim, m)?;
        let mut values = Vec::with_capacity(dim * (m + 1));
        for &x in v {
            let mut p = 1.0;
            for _ in 0..=m {
                values.push(p);
                p *= x;
            }
        }
        let range = table.order_range(m);
        let entries = table.fill(&values)[range].to_vec();
        Self::from_entries(m, dim, entries)
    }

    fn check_same_shape(&self, other: &Self) -> Result<()> {
        if self.order != other.order || self.dim != other.dim {
            return Err(Error::ShapeMismatch(format!(
                "order {} dim {} vs order {} dim {}",
                self.order, self.dim, other.order, other.dim
            )));
        }
        Ok(())
    }

    /// Frobenius inner product of the underlying dense tensors.
    pub fn inner(&self, other: &Self) -> Result<f64> {
        self.check_same_shape(other)?;
        let w = weights(self.dim, self.order)?;
        Ok(self
            .entries
            .iter()
            .zip(&other.entries)
            .zip(w.iter())
            .map(|((a, b), w)| w * a * b)
            .sum())
    }

    pub fn norm2(&self) -> f64 {
        self.inner(self).expect("same shape").max(0.0).sqrt()
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.add_scaled(1.0, other)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add_scaled(-1.0, other)
    }

    /// `self + c * other`.
    pub fn add_scaled(&self, c: f64, other: &Self) -> Result<Self> {
        let mut out = self.clone();
        out.axpy(c, other)?;
        Ok(out)
    }

    pub fn scale(&self, c: f64) -> Self {
        Self {
            order: self.order,
            dim: self.dim,
            entries: self.entries.iter().map(|v| c * v).collect(),
        }
    }

    pub(crate) fn axpy(&mut self, c: f64, other: &Self) -> Result<()> {
        self.check_same_shape(other)?;
        for (a, b) in self.entries.iter_mut().zip(&other.entries) {
            *a += c * b;
        }
        Ok(())
    }

    fn check_vector(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.dim {
            return Err(Error::ShapeMismatch(format!(
                "vector of length {} against tensor dimension {}",
                v.len(),
                self.dim
            )));
        }
        Ok(())
    }

    /// Contraction with `v` along one mode: `S_beta = sum_j v_j T_{beta + e_j}`.
    pub fn contract(&self, v: &[f64]) -> Result<Self> {
        if self.order == 0 {
            return Err(Error::ContractScalar);
        }
        self.check_vector(v)?;
        let n = self.dim;
        let raise = raise_table(n, self.order - 1)?;
        let entries = raise
            .chunks_exact(n)
            .map(|up| up.iter().zip(v).map(|(&i, &vj)| vj * self.entries[i]).sum())
            .collect();
        Self::from_entries(self.order - 1, n, entries)
    }

    /// `<T, u^{⊗m}>`, the homogeneous polynomial represented by the tensor.
    pub fn contract_power(&self, u: &[f64]) -> Result<f64> {
        self.check_vector(u)?;
        self.inner(&Self::power(u, self.order)?)
    }

    /// Matrix `A` with `A[a][b] = <T e_a, T e_b>`, so `vᵀ A v = ||T v||²`.
    pub fn gram_matrix(&self) -> Result<DMatrix<f64>> {
        if self.order == 0 {
            return Err(Error::ContractScalar);
        }
        let n = self.dim;
        let raise = raise_table(n, self.order - 1)?;
        let w = weights(n, self.order - 1)?;
        let mut a = DMatrix::<f64>::zeros(n, n);
        let mut row = vec![0.0; n];
        for (up, &wb) in raise.chunks_exact(n).zip(w.iter()) {
            for (r, &i) in row.iter_mut().zip(up) {
                *r = self.entries[i];
            }
            for i in 0..n {
                let ri = wb * row[i];
                if ri == 0.0 {
                    continue;
                }
                for j in i..n {
                    a[(i, j)] += ri * row[j];
                }
            }
        }
        for i in 0..n {
            for j in 0..i {
                a[(i, j)] = a[(j, i)];
            }
        }
        Ok(a)
    }

    /// `Sym(A ⊗ B)`, the average of `A ⊗ B` over all permutations of its modes.
    pub fn symmetrize_product(&self, other: &Self) -> Result<Self> {
        if self.dim != other.dim {
            return Err(Error::ShapeMismatch(format!(
                "dimensions {} and {}",
                self.dim, other.dim
            )));
        }
        let n = self.dim;
        let order = self.order + other.order;
        let mut out = Self::zeros(order, n)?;
        let (wa, wb, wc) = (
            weights(n, self.order)?,
            weights(n, other.order)?,
            weights(n, order)?,
        );
        let alphas = index::alphas(n, self.order)?;
        let betas = index::alphas(n, other.order)?;
        let mut gamma = vec![0u32; n];
        for ((alpha, &a), &w_a) in alphas.iter().zip(&self.entries).zip(wa.iter()) {
            if a == 0.0 {
                continue;
            }
            for ((beta, &b), &w_b) in betas.iter().zip(&other.entries).zip(wb.iter()) {
                for ((g, x), y) in gamma.iter_mut().zip(alpha).zip(beta) {
                    *g = x + y;
                }
                let r = rank(&gamma);
                out.entries[r] += w_a * w_b / wc[r] * a * b;
            }
        }
        Ok(out)
    }

    /// Applies `basisᵀ` along every mode, where `basis` is `dim x n'`.
    ///
    /// With orthonormal columns this is the restriction of the tensor to the
    /// column span, written in that basis; with `basisᵀ` in place of `basis`
    /// it lifts a tensor back into the ambient space.
    pub fn project(&self, basis: &DMatrix<f64>) -> Result<Self> {
        if basis.nrows() != self.dim {
            return Err(Error::ShapeMismatch(format!(
                "basis has {} rows, tensor dimension is {}",
                basis.nrows(),
                self.dim
            )));
        }
        let k = basis.ncols();
        let mut out = Self::zeros(self.order, k)?;
        let cols: Vec<Vec<f64>> = basis.column_iter().map(|c| c.iter().copied().collect()).collect();
        let mut alpha = vec![0u32; k];
        project_rec(self, 0, &cols, &mut alpha, &mut out.entries)?;
        Ok(out)
    }
}

fn project_rec(
    t: &SymTensor,
    start: usize,
    cols: &[Vec<f64>],
    alpha: &mut [u32],
    out: &mut [f64],
) -> Result<()> {
    if t.order == 0 {
        out[rank(alpha)] = t.entries[0];
        return Ok(());
    }
    for l in start..cols.len() {
        let c = t.contract(&cols[l])?;
        alpha[l] += 1;
        project_rec(&c, l, cols, alpha, out)?;
        alpha[l] -= 1;
    }
    Ok(())
}
