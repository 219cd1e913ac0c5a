//! Dense `n^m` tensors used as a test oracle for the compressed layout.

use nalgebra::DMatrix;

use super::SymTensor;

#[derive(Debug, Clone)]
pub(crate) struct Dense {
    pub n: usize,
    pub m: usize,
    pub data: Vec<f64>,
}

fn digits(mut idx: usize, n: usize, m: usize) -> Vec<usize> {
    let mut d = vec![0; m];
    for slot in d.iter_mut() {
        *slot = idx % n;
        idx /= n;
    }
    d
}

fn flat(d: &[usize], n: usize) -> usize {
    d.iter().rev().fold(0, |acc, &i| acc * n + i)
}

fn permutations(m: usize) -> Vec<Vec<usize>> {
    if m == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(m - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, m - 1);
            out.push(q);
        }
    }
    out
}

impl Dense {
    pub fn zeros(n: usize, m: usize) -> Self {
        Self {
            n,
            m,
            data: vec![0.0; n.pow(m as u32)],
        }
    }

    pub fn from_sym(t: &SymTensor) -> Self {
        let (n, m) = (t.dim(), t.order());
        let mut out = Self::zeros(n, m);
        for (i, slot) in out.data.iter_mut().enumerate() {
            let mut alpha = vec![0u32; n];
            for j in digits(i, n, m) {
                alpha[j] += 1;
            }
            *slot = t.get(&alpha).unwrap();
        }
        out
    }

    pub fn power(v: &[f64], m: usize) -> Self {
        let n = v.len();
        let mut out = Self::zeros(n, m);
        for (i, slot) in out.data.iter_mut().enumerate() {
            *slot = digits(i, n, m).iter().map(|&j| v[j]).product();
        }
        out
    }

    pub fn inner(&self, other: &Self) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    pub fn add_scaled(&self, c: f64, other: &Self) -> Self {
        let mut out = self.clone();
        for (a, b) in out.data.iter_mut().zip(&other.data) {
            *a += c * b;
        }
        out
    }

    pub fn max_diff(&self, other: &Self) -> f64 {
        assert_eq!((self.n, self.m), (other.n, other.m));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Contraction along the first mode.
    pub fn contract(&self, v: &[f64]) -> Self {
        let n = self.n;
        let mut out = Self::zeros(n, self.m - 1);
        for (i, &x) in self.data.iter().enumerate() {
            out.data[i / n] += v[i % n] * x;
        }
        out
    }

    /// Row-major `n x n` Gram matrix of first-mode slices.
    pub fn gram(&self) -> Vec<f64> {
        let n = self.n;
        let mut g = vec![0.0; n * n];
        let rest = self.data.len() / n;
        for a in 0..n {
            for b in 0..n {
                g[a * n + b] = (0..rest)
                    .map(|r| self.data[r * n + a] * self.data[r * n + b])
                    .sum();
            }
        }
        g
    }

    pub fn tensor_product(&self, other: &Self) -> Self {
        let mut out = Self::zeros(self.n, self.m + other.m);
        let len = self.data.len();
        for (j, &b) in other.data.iter().enumerate() {
            for (i, &a) in self.data.iter().enumerate() {
                out.data[j * len + i] = a * b;
            }
        }
        out
    }

    pub fn symmetrized(&self) -> Self {
        let (n, m) = (self.n, self.m);
        let perms = permutations(m);
        let mut out = Self::zeros(n, m);
        for (i, slot) in out.data.iter_mut().enumerate() {
            let d = digits(i, n, m);
            let mut acc = 0.0;
            for p in &perms {
                let q: Vec<usize> = p.iter().map(|&k| d[k]).collect();
                acc += self.data[flat(&q, n)];
            }
            *slot = acc / perms.len() as f64;
        }
        out
    }

    /// Applies `basisᵀ` along every mode.
    pub fn multilinear(&self, basis: &DMatrix<f64>) -> Self {
        let (n, k, m) = (self.n, basis.ncols(), self.m);
        let mut out = Self::zeros(k, m);
        for (j, slot) in out.data.iter_mut().enumerate() {
            let dj = digits(j, k, m);
            *slot = self
                .data
                .iter()
                .enumerate()
                .map(|(i, &x)| {
                    let di = digits(i, n, m);
                    x * di.iter().zip(&dj).map(|(&a, &b)| basis[(a, b)]).product::<f64>()
                })
                .sum();
        }
        out
    }
}
