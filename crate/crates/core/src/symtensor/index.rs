//! Multiset indexing for symmetric tensors.
//!
//! An order-`m` symmetric tensor over `R^n` keeps one entry per multiset of `m`
//! coordinates, identified by its multiplicity vector `alpha` (`sum(alpha) == m`).
//! Entries are laid out in colexicographic order of the sorted coordinate tuple
//! `i_1 <= ... <= i_m`, comparing the largest coordinate first. Equivalently, for
//! each `a` the entries with `alpha[n-1] == a` form one contiguous block, blocks
//! appear in increasing `a`, and each block is the order-`(m - a)` layout over the
//! first `n - 1` coordinates. The layout over `n' < n` coordinates is a prefix of
//! the layout over `n` coordinates.

use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, OnceLock, RwLock};

use crate::error::{Error, Result};

/// Default cap on the number of compressed entries any tensor may hold.
pub const DEFAULT_ENTRY_BUDGET: usize = 1 << 28;

static ENTRY_BUDGET: AtomicUsize = AtomicUsize::new(DEFAULT_ENTRY_BUDGET);

/// Current global entry budget.
pub fn entry_budget() -> usize {
    ENTRY_BUDGET.load(Ordering::Relaxed)
}

/// Replace the global entry budget. Affects every constructor from now on.
pub fn set_entry_budget(budget: usize) {
    ENTRY_BUDGET.store(budget, Ordering::Relaxed);
}

/// Exact binomial coefficient, `None` on overflow.
pub fn binomial(n: u64, k: u64) -> Option<u128> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut r: u128 = 1;
    for i in 0..k {
        r = r.checked_mul((n - i) as u128)? / (i + 1) as u128;
    }
    Some(r)
}

/// Number of multisets of size `order` over `dim` coordinates.
pub fn entry_count(dim: usize, order: usize) -> Option<u128> {
    if dim == 0 {
        return Some(u128::from(order == 0));
    }
    binomial((dim + order - 1) as u64, order as u64)
}

/// Entry count for a tensor of this shape, or a budget error.
pub fn checked_len(dim: usize, order: usize) -> Result<usize> {
    let budget = entry_budget();
    match entry_count(dim, order) {
        Some(n) if n <= budget as u128 => Ok(n as usize),
        other => Err(Error::BudgetExceeded {
            order,
            dim,
            requested: other.unwrap_or(u128::MAX),
            budget,
        }),
    }
}

// Counts used inside ranking; shapes here have already passed `checked_len`.
fn count_small(dim: usize, order: usize) -> usize {
    entry_count(dim, order).expect("count within budget") as usize
}

/// Multinomial coefficient `m! / prod(alpha_j!)`.
///
/// Exact in integers while the value fits in 64 bits, otherwise a product of
/// exactly computed binomials in floating point.
pub fn multinomial(alpha: &[u32]) -> f64 {
    let mut exact: Option<u128> = Some(1);
    let mut approx = 1.0f64;
    let mut partial: u64 = 0;
    for &a in alpha {
        partial += u64::from(a);
        let b = binomial(partial, u64::from(a));
        exact = match (exact, b) {
            (Some(e), Some(b)) => e.checked_mul(b).filter(|v| *v <= u128::from(u64::MAX)),
            _ => None,
        };
        approx *= match b {
            Some(b) => b as f64,
            None => binomial_f64(partial, u64::from(a)),
        };
    }
    match exact {
        Some(e) => e as f64,
        None => approx,
    }
}

fn binomial_f64(n: u64, k: u64) -> f64 {
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// A multiplicity vector together with its multinomial weight.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiIndex {
    pub alpha: Vec<u32>,
    pub weight: f64,
}

impl MultiIndex {
    pub fn order(&self) -> usize {
        self.alpha.iter().map(|&a| a as usize).sum()
    }
}

/// All multiplicity vectors of the given order, in storage order.
pub fn multi_indices(dim: usize, order: usize) -> Result<Vec<MultiIndex>> {
    Ok(alphas(dim, order)?
        .into_iter()
        .map(|alpha| {
            let weight = multinomial(&alpha);
            MultiIndex { alpha, weight }
        })
        .collect())
}

/// Multiplicity vectors only, in storage order.
pub fn alphas(dim: usize, order: usize) -> Result<Vec<Vec<u32>>> {
    let len = checked_len(dim, order)?;
    let mut out = Vec::with_capacity(len);
    if dim == 0 {
        if order == 0 {
            out.push(Vec::new());
        }
        return Ok(out);
    }
    let mut alpha = vec![0u32; dim];
    fill_alphas(dim, order, &mut alpha, &mut out);
    Ok(out)
}

fn fill_alphas(n: usize, m: usize, alpha: &mut [u32], out: &mut Vec<Vec<u32>>) {
    if n == 1 {
        alpha[0] = m as u32;
        out.push(alpha.to_vec());
        return;
    }
    for a in 0..=m {
        alpha[n - 1] = a as u32;
        fill_alphas(n - 1, m - a, alpha, out);
    }
    alpha[n - 1] = 0;
}

/// Storage position of `alpha` among tensors of order `sum(alpha)`.
pub fn rank(alpha: &[u32]) -> usize {
    let mut remaining: usize = alpha.iter().map(|&a| a as usize).sum();
    let mut r = 0;
    for c in (1..alpha.len()).rev() {
        let a = alpha[c] as usize;
        // entries whose coordinate-c multiplicity is below `a`
        r += count_small(c + 1, remaining) - count_small(c + 1, remaining - a);
        remaining -= a;
    }
    r
}

type Cache = RwLock<HashMap<(usize, usize), Arc<[f64]>>>;
type IndexCache = RwLock<HashMap<(usize, usize), Arc<[usize]>>>;

fn cached<T: ?Sized>(
    cache: &RwLock<HashMap<(usize, usize), Arc<T>>>,
    key: (usize, usize),
    build: impl FnOnce() -> Result<Arc<T>>,
) -> Result<Arc<T>> {
    if let Some(v) = cache.read().expect("cache poisoned").get(&key) {
        return Ok(v.clone());
    }
    let v = build()?;
    cache
        .write()
        .expect("cache poisoned")
        .entry(key)
        .or_insert_with(|| v.clone());
    Ok(v)
}

/// Multinomial weights of every entry, in storage order. Cached per shape.
pub fn weights(dim: usize, order: usize) -> Result<Arc<[f64]>> {
    static CACHE: OnceLock<Cache> = OnceLock::new();
    cached(CACHE.get_or_init(Default::default), (dim, order), || {
        Ok(alphas(dim, order)?.iter().map(|a| multinomial(a)).collect())
    })
}

/// `1 / sqrt(weight)` per entry, in storage order. Cached per shape.
pub fn inv_sqrt_weights(dim: usize, order: usize) -> Result<Arc<[f64]>> {
    static CACHE: OnceLock<Cache> = OnceLock::new();
    cached(CACHE.get_or_init(Default::default), (dim, order), || {
        Ok(weights(dim, order)?.iter().map(|w| 1.0 / w.sqrt()).collect())
    })
}

/// For every entry `beta` of order `order`, the positions of `beta + e_j` in the
/// order-`(order + 1)` layout, stored at `[b * dim + j]`. Cached per shape.
pub fn raise_table(dim: usize, order: usize) -> Result<Arc<[usize]>> {
    static CACHE: OnceLock<IndexCache> = OnceLock::new();
    cached(CACHE.get_or_init(Default::default), (dim, order), || {
        checked_len(dim, order + 1)?;
        let betas = alphas(dim, order)?;
        let mut table = Vec::with_capacity(betas.len() * dim);
        for beta in &betas {
            let mut raised = beta.clone();
            for j in 0..dim {
                raised[j] += 1;
                table.push(rank(&raised));
                raised[j] -= 1;
            }
        }
        Ok(table.into())
    })
}

/// Products `prod_j f_j(alpha_j)` for every multiplicity vector of every order
/// up to `max_order`, built coordinate by coordinate so each entry costs one
/// multiplication.
///
/// Per-coordinate values are passed as a row-major `dim x (max_order + 1)` slice.
#[derive(Debug, Clone)]
pub(crate) struct ProductTable {
    dim: usize,
    max_order: usize,
    // offsets[l][m]: start of order m in the level-l buffer (coordinates 0..l);
    // offsets[l][max_order + 1] is the level length.
    offsets: Vec<Vec<usize>>,
    prev: Vec<f64>,
    cur: Vec<f64>,
}

impl ProductTable {
    pub(crate) fn new(dim: usize, max_order: usize) -> Result<Self> {
        // the final level holds C(dim + max_order, max_order) values
        checked_len(dim + 1, max_order)?;
        let offsets: Vec<Vec<usize>> = (0..=dim)
            .map(|l| {
                let mut off = Vec::with_capacity(max_order + 2);
                let mut acc = 0;
                for m in 0..=max_order {
                    off.push(acc);
                    acc += count_small(l, m);
                }
                off.push(acc);
                off
            })
            .collect();
        let max_len = offsets.iter().map(|o| o[max_order + 1]).max().unwrap_or(1);
        Ok(Self {
            dim,
            max_order,
            offsets,
            prev: vec![0.0; max_len],
            cur: vec![0.0; max_len],
        })
    }

    /// Length of the flattened all-orders output.
    pub(crate) fn len(&self) -> usize {
        self.offsets[self.dim][self.max_order + 1]
    }

    /// Range of order `m` inside the flattened output.
    pub(crate) fn order_range(&self, m: usize) -> std::ops::Range<usize> {
        self.offsets[self.dim][m]..self.offsets[self.dim][m + 1]
    }

    fn build_levels(&mut self, values: &[f64], upto: usize) {
        let stride = self.max_order + 1;
        debug_assert_eq!(values.len(), self.dim * stride);
        let Self {
            offsets,
            prev,
            cur,
            max_order,
            ..
        } = self;
        prev[0] = 1.0;
        for l in 1..=upto {
            let (po, co) = (&offsets[l - 1], &offsets[l]);
            let coord = &values[(l - 1) * stride..l * stride];
            for m in 0..=*max_order {
                let mut pos = co[m];
                for (a, &s) in coord.iter().enumerate().take(m + 1) {
                    let src = &prev[po[m - a]..po[m - a + 1]];
                    let dst = &mut cur[pos..pos + src.len()];
                    for (d, &v) in dst.iter_mut().zip(src) {
                        *d = v * s;
                    }
                    pos += src.len();
                }
            }
            std::mem::swap(prev, cur);
        }
    }

    /// Flattened products over all orders.
    pub(crate) fn fill(&mut self, values: &[f64]) -> &[f64] {
        self.build_levels(values, self.dim);
        let len = self.len();
        &self.prev[..len]
    }

    /// `acc += weight * products`, fusing the last level into the accumulation.
    pub(crate) fn accumulate(&mut self, values: &[f64], weight: f64, acc: &mut [f64]) {
        debug_assert_eq!(acc.len(), self.len());
        let stride = self.max_order + 1;
        let l = self.dim;
        if l == 0 {
            acc[0] += weight;
            return;
        }
        self.build_levels(values, l - 1);
        let (po, co) = (&self.offsets[l - 1], &self.offsets[l]);
        let prev = &self.prev;
        let coord = &values[(l - 1) * stride..l * stride];
        for m in 0..=self.max_order {
            let mut pos = co[m];
            for (a, &s) in coord.iter().enumerate().take(m + 1) {
                let src = &prev[po[m - a]..po[m - a + 1]];
                let ws = weight * s;
                let dst = &mut acc[pos..pos + src.len()];
                for (d, &v) in dst.iter_mut().zip(src) {
                    *d += v * ws;
                }
                pos += src.len();
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binomials() {
        assert_eq!(binomial(5, 2), Some(10));
        assert_eq!(binomial(0, 0), Some(1));
        assert_eq!(binomial(3, 4), Some(0));
        assert_eq!(binomial(60, 30), Some(118264581564861424));
        assert!(binomial(400, 200).is_none());
    }

    #[test]
    fn counts_match_enumeration() {
        for dim in 0..5 {
            for order in 0..6 {
                let list = alphas(dim, order).unwrap();
                assert_eq!(list.len() as u128, entry_count(dim, order).unwrap());
                for (i, a) in list.iter().enumerate() {
                    assert_eq!(rank(a), i, "dim {dim} order {order} alpha {a:?}");
                }
            }
        }
    }

    #[test]
    fn colex_order_on_sorted_tuples() {
        // dim 3, order 2: tuples 00, 01, 11, 02, 12, 22
        let list = alphas(3, 2).unwrap();
        let expect: Vec<Vec<u32>> = vec![
            vec![2, 0, 0],
            vec![1, 1, 0],
            vec![0, 2, 0],
            vec![1, 0, 1],
            vec![0, 1, 1],
            vec![0, 0, 2],
        ];
        assert_eq!(list, expect);
    }

    #[test]
    fn lower_dim_layout_is_prefix() {
        let small = alphas(2, 3).unwrap();
        let big = alphas(4, 3).unwrap();
        for (s, b) in small.iter().zip(&big) {
            assert_eq!(&b[..2], &s[..]);
            assert!(b[2..].iter().all(|&x| x == 0));
        }
    }

    #[test]
    fn multinomial_values() {
        assert_eq!(multinomial(&[1, 1]), 2.0);
        assert_eq!(multinomial(&[2, 1, 1]), 12.0);
        assert_eq!(multinomial(&[]), 1.0);
        // 3^100-scale weights fall back to floating point
        let big = multinomial(&[34, 33, 33]);
        let lg = |n: f64| (1..=n as u64).map(|i| (i as f64).ln()).sum::<f64>();
        let expect = (lg(100.0) - lg(34.0) - 2.0 * lg(33.0)).exp();
        assert!(((big - expect) / expect).abs() < 1e-10);
    }

    #[test]
    fn weights_sum_to_dim_power() {
        for dim in 1..5 {
            for order in 0..7 {
                let total: f64 = weights(dim, order).unwrap().iter().sum();
                assert_eq!(total, (dim as f64).powi(order as i32));
            }
        }
    }

    #[test]
    fn budget_is_enforced() {
        let err = checked_len(100, 100).unwrap_err();
        assert!(matches!(err, Error::BudgetExceeded { .. }));
    }

    #[test]
    fn raise_table_matches_rank() {
        let table = raise_table(3, 2).unwrap();
        let betas = alphas(3, 2).unwrap();
        for (b, beta) in betas.iter().enumerate() {
            for j in 0..3 {
                let mut up = beta.clone();
                up[j] += 1;
                assert_eq!(table[b * 3 + j], rank(&up));
            }
        }
    }

    #[test]
    fn product_table_matches_direct_products() {
        let dim = 3;
        let max_order = 4;
        let values: Vec<f64> = (0..dim * (max_order + 1))
            .map(|i| 0.3 + 0.17 * i as f64)
            .collect();
        let mut table = ProductTable::new(dim, max_order).unwrap();
        let flat = table.fill(&values).to_vec();
        let mut acc = vec![0.0; table.len()];
        table.accumulate(&values, 2.0, &mut acc);
        for m in 0..=max_order {
            let range = table.order_range(m);
            for (alpha, (&got, &fused)) in alphas(dim, m)
                .unwrap()
                .iter()
                .zip(flat[range.clone()].iter().zip(&acc[range]))
            {
                let direct: f64 = alpha
                    .iter()
                    .enumerate()
                    .map(|(c, &a)| values[c * (max_order + 1) + a as usize])
                    .product();
                assert!((got - direct).abs() < 1e-12);
                assert!((fused - 2.0 * direct).abs() < 1e-12);
            }
        }
    }
}
