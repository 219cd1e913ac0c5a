use std::collections::btree_map::Entry;
use std::collections::{BTreeMap, HashMap};

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};

use super::Partition;
use crate::error::{Error, Result};
use crate::symtensor::index::{alphas, checked_len};

/// Polynomial in `num_vars` variables with exact integer coefficients.
///
/// Produced by the Schur routines, where it is symmetric and homogeneous.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SymmetricPolynomial {
    num_vars: usize,
    terms: BTreeMap<Vec<u32>, BigInt>,
}

impl SymmetricPolynomial {
    pub fn zero(num_vars: usize) -> Self {
        Self {
            num_vars,
            terms: BTreeMap::new(),
        }
    }

    pub fn one(num_vars: usize) -> Self {
        let mut terms = BTreeMap::new();
        terms.insert(vec![0; num_vars], BigInt::one());
        Self { num_vars, terms }
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    /// Nonzero monomials keyed by exponent vector.
    pub fn terms(&self) -> &BTreeMap<Vec<u32>, BigInt> {
        &self.terms
    }

    pub fn coefficient(&self, exponents: &[u32]) -> BigInt {
        self.terms.get(exponents).cloned().unwrap_or_default()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Common total degree of all monomials, `None` if mixed or zero.
    pub fn homogeneous_degree(&self) -> Option<usize> {
        let mut degs = self
            .terms
            .keys()
            .map(|e| e.iter().map(|&a| a as usize).sum::<usize>());
        let first = degs.next()?;
        degs.all(|d| d == first).then_some(first)
    }

    pub fn has_nonnegative_coefficients(&self) -> bool {
        self.terms.values().all(|c| !c.is_negative())
    }

    pub fn abs_coefficient_sum(&self) -> BigInt {
        self.terms.values().map(|c| c.abs()).sum()
    }

    /// Exact value at `(1, ..., 1)`.
    pub fn eval_ones(&self) -> BigInt {
        self.terms.values().sum()
    }

    /// Invariance under every transposition of adjacent variables.
    pub fn is_symmetric(&self) -> bool {
        (1..self.num_vars).all(|i| {
            self.terms.iter().all(|(e, c)| {
                let mut s = e.clone();
                s.swap(i - 1, i);
                self.terms.get(&s) == Some(c)
            })
        })
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.num_vars {
            return Err(Error::ShapeMismatch(format!(
                "{} values for a polynomial in {} variables",
                x.len(),
                self.num_vars
            )));
        }
        Ok(self
            .terms
            .iter()
            .map(|(e, c)| {
                let mono: f64 = e.iter().zip(x).map(|(&a, &xi)| xi.powi(a as i32)).product();
                c.to_f64().unwrap_or(f64::NAN) * mono
            })
            .sum())
    }

    fn check_vars(&self, other: &Self) -> Result<()> {
        if self.num_vars != other.num_vars {
            return Err(Error::ShapeMismatch(format!(
                "polynomials in {} and {} variables",
                self.num_vars, other.num_vars
            )));
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_vars(other)?;
        let mut out = self.clone();
        for (e, c) in &other.terms {
            out.add_term(e.clone(), c.clone());
        }
        Ok(out)
    }

    pub fn neg(&self) -> Self {
        Self {
            num_vars: self.num_vars,
            terms: self.terms.iter().map(|(e, c)| (e.clone(), -c)).collect(),
        }
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.check_vars(other)?;
        let mut out = Self::zero(self.num_vars);
        for (ea, ca) in &self.terms {
            for (eb, cb) in &other.terms {
                let e = ea.iter().zip(eb).map(|(a, b)| a + b).collect();
                out.add_term(e, ca * cb);
            }
        }
        Ok(out)
    }

    fn add_term(&mut self, e: Vec<u32>, c: BigInt) {
        if c.is_zero() {
            return;
        }
        match self.terms.entry(e) {
            Entry::Vacant(v) => {
                v.insert(c);
            }
            Entry::Occupied(mut o) => {
                *o.get_mut() += c;
                if o.get().is_zero() {
                    o.remove();
                }
            }
        }
    }
}

/// Complete homogeneous symmetric polynomial `y_k` in `n` variables; zero for `k < 0`.
pub fn complete_homogeneous(k: i64, n: usize) -> Result<SymmetricPolynomial> {
    if k < 0 {
        return Ok(SymmetricPolynomial::zero(n));
    }
    if n == 0 {
        return Ok(if k == 0 {
            SymmetricPolynomial::one(0)
        } else {
            SymmetricPolynomial::zero(0)
        });
    }
    let terms = alphas(n, k as usize)?
        .into_iter()
        .map(|a| (a, BigInt::one()))
        .collect();
    Ok(SymmetricPolynomial { num_vars: n, terms })
}

/// `s_lambda` in `n_vars` variables as `det([y_{lambda_i + j - i}])`.
pub fn jacobi_trudi(lambda: &Partition, n_vars: usize) -> Result<SymmetricPolynomial> {
    let l = lambda.len();
    if l > n_vars {
        return Ok(SymmetricPolynomial::zero(n_vars));
    }
    if l == 0 {
        return Ok(SymmetricPolynomial::one(n_vars));
    }
    if n_vars > 0 {
        checked_len(n_vars, lambda.size())?;
    }
    if l > 30 {
        return Err(Error::InvalidArgument(format!(
            "partition with {l} parts is too long for the determinant expansion"
        )));
    }
    let parts = lambda.parts();
    let mut cache: HashMap<i64, SymmetricPolynomial> = HashMap::new();
    let mut entry = |i: usize, j: usize| -> Result<SymmetricPolynomial> {
        let k = parts[i] as i64 + j as i64 - i as i64;
        if let Some(p) = cache.get(&k) {
            return Ok(p.clone());
        }
        let p = complete_homogeneous(k, n_vars)?;
        cache.insert(k, p.clone());
        Ok(p)
    };
    let matrix = (0..l)
        .map(|i| (0..l).map(|j| entry(i, j)).collect::<Result<Vec<_>>>())
        .collect::<Result<Vec<_>>>()?;
    let mut memo = HashMap::new();
    laplace(&matrix, 0, &mut memo)
}

// Expansion along successive rows, memoized on the set of used columns.
fn laplace(
    a: &[Vec<SymmetricPolynomial>],
    used: u32,
    memo: &mut HashMap<u32, SymmetricPolynomial>,
) -> Result<SymmetricPolynomial> {
    let l = a.len();
    let row = used.count_ones() as usize;
    let n_vars = a[0][0].num_vars();
    if row == l {
        return Ok(SymmetricPolynomial::one(n_vars));
    }
    if let Some(p) = memo.get(&used) {
        return Ok(p.clone());
    }
    let mut acc = SymmetricPolynomial::zero(n_vars);
    let mut free_before = 0;
    for c in 0..l {
        if used & (1 << c) != 0 {
            continue;
        }
        if !a[row][c].is_zero() {
            let minor = laplace(a, used | (1 << c), memo)?;
            let term = a[row][c].mul(&minor)?;
            acc = if free_before % 2 == 0 {
                acc.add(&term)?
            } else {
                acc.add(&term.neg())?
            };
        }
        free_before += 1;
    }
    memo.insert(used, acc.clone());
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn poly(n: usize, terms: &[(&[u32], i64)]) -> SymmetricPolynomial {
        let mut p = SymmetricPolynomial::zero(n);
        for (e, c) in terms {
            p.add_term(e.to_vec(), BigInt::from(*c));
        }
        p
    }

    #[test]
    fn complete_homogeneous_examples() {
        let y2 = complete_homogeneous(2, 2).unwrap();
        assert_eq!(y2, poly(2, &[(&[2, 0], 1), (&[1, 1], 1), (&[0, 2], 1)]));
        assert!(complete_homogeneous(-1, 3).unwrap().is_zero());
        assert_eq!(complete_homogeneous(0, 3).unwrap(), SymmetricPolynomial::one(3));
    }

    #[test]
    fn jacobi_trudi_examples() {
        let p1 = Partition::new(vec![1]).unwrap();
        assert_eq!(
            jacobi_trudi(&p1, 2).unwrap(),
            poly(2, &[(&[1, 0], 1), (&[0, 1], 1)])
        );
        let p21 = Partition::new(vec![2, 1]).unwrap();
        assert_eq!(
            jacobi_trudi(&p21, 2).unwrap(),
            poly(2, &[(&[2, 1], 1), (&[1, 2], 1)])
        );
        let p111 = Partition::new(vec![1, 1, 1]).unwrap();
        assert!(jacobi_trudi(&p111, 2).unwrap().is_zero());
        // s_(1,1,1) in three variables is x1 x2 x3, even though the 3x3
        // determinant is formed from complete homogeneous polynomials
        assert_eq!(
            jacobi_trudi(&p111, 3).unwrap(),
            poly(3, &[(&[1, 1, 1], 1)])
        );
    }

    #[test]
    fn arithmetic_cancels() {
        let a = poly(2, &[(&[1, 0], 2), (&[0, 1], -1)]);
        assert!(a.add(&a.neg()).unwrap().is_zero());
        let sq = a.mul(&a).unwrap();
        assert_eq!(sq.coefficient(&[1, 1]), BigInt::from(-4));
        assert_eq!(sq.eval(&[1.0, 1.0]).unwrap(), 1.0);
        assert!(a.mul(&SymmetricPolynomial::one(3)).is_err());
    }

    // Kostka numbers K_{lambda,mu}: semistandard tableaux of shape lambda and
    // content mu, counted by brute force.
    fn ssyt_count(shape: &[u32], content: &[u32]) -> u64 {
        let cells: Vec<(usize, usize)> = shape
            .iter()
            .enumerate()
            .flat_map(|(r, &len)| (0..len as usize).map(move |c| (r, c)))
            .collect();
        let mut fill = vec![vec![0u32; shape.first().copied().unwrap_or(0) as usize]; shape.len()];
        let mut left = content.to_vec();
        fn rec(
            idx: usize,
            cells: &[(usize, usize)],
            fill: &mut Vec<Vec<u32>>,
            left: &mut Vec<u32>,
        ) -> u64 {
            if idx == cells.len() {
                return 1;
            }
            let (r, c) = cells[idx];
            let mut total = 0;
            for v in 0..left.len() as u32 {
                if left[v as usize] == 0 {
                    continue;
                }
                if c > 0 && fill[r][c - 1] > v {
                    continue;
                }
                if r > 0 && fill[r - 1][c] >= v {
                    continue;
                }
                fill[r][c] = v;
                left[v as usize] -= 1;
                total += rec(idx + 1, cells, fill, left);
                left[v as usize] += 1;
            }
            total
        }
        rec(0, &cells, &mut fill, &mut left)
    }

    #[test]
    fn coefficients_are_tableau_counts() {
        for size in 0..=5u32 {
            for lambda in Partition::all_of_size(size) {
                for n in 1..=3 {
                    let p = jacobi_trudi(&lambda, n).unwrap();
                    for e in alphas(n, size as usize).unwrap() {
                        let expect = ssyt_count(lambda.parts(), &e);
                        assert_eq!(p.coefficient(&e), BigInt::from(expect), "{lambda} {e:?}");
                    }
                }
            }
        }
    }
}
