//! Moment-tensor learner: estimate `T_1..T_M`, form `Q(v) = sum_m ||T_m v||^2`,
//! keep its top-`k` eigenspace `V`, regress `P_0..P_D` on `Bᵀx` with fresh samples
//! and predict `sum_m <P_m, H_m(Bᵀx)>`.

mod analytic;
mod hypothesis;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::datagen::Samples;
use crate::error::{Error, Result};
use crate::moments::estimate_moments;
use crate::symtensor::index::{entry_budget, entry_count};
use crate::symtensor::SymTensor;
pub use analytic::{
    analytic_hypothesis, analytic_quadratic_form, projection_residual_bound, residual_orthogonal_mass,
    ResidualBoundCheck, ResidualMass, RESIDUAL_BOUND_SLACK,
};
pub use hypothesis::{Hypothesis, ORTHONORMAL_TOLERANCE};

fn default_c_d() -> f64 {
    2.0
}
fn default_tie_tolerance() -> f64 {
    1e-10
}
fn default_degeneracy_threshold() -> f64 {
    1e-12
}
fn default_multiplier() -> f64 {
    1.0
}

/// Every knob of the learner. JSON keys mirror the field names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LearnConfig {
    pub k: usize,
    pub d: usize,
    pub epsilon: f64,
    /// Highest moment order used for the subspace; default `4k`.
    #[serde(default)]
    pub moment_cutoff: Option<usize>,
    /// Regression degree `D`; default `ceil(C_D epsilon^{-4/3})`, at least the cutoff.
    #[serde(default, rename = "degree_D", alias = "degree_d")]
    pub degree_d: Option<usize>,
    #[serde(default = "default_c_d", rename = "C_D", alias = "c_d")]
    pub c_d: f64,
    /// Samples for the subspace step.
    #[serde(default)]
    pub n_subspace: Option<usize>,
    /// Samples for the regression step.
    #[serde(default)]
    pub n_regression: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    /// Relative eigenvalue gap below which eigenpairs are treated as tied.
    #[serde(default = "default_tie_tolerance")]
    pub tie_tolerance: f64,
    /// Largest eigenvalue below which the spectrum is reported as degenerate.
    #[serde(default = "default_degeneracy_threshold")]
    pub degeneracy_threshold: f64,
    /// Multiplies every default sample size.
    #[serde(default = "default_multiplier")]
    pub sample_multiplier: f64,
}

impl LearnConfig {
    pub fn new(k: usize, d: usize, epsilon: f64) -> Self {
        Self {
            k,
            d,
            epsilon,
            moment_cutoff: None,
            degree_d: None,
            c_d: default_c_d(),
            n_subspace: None,
            n_regression: None,
            seed: 0,
            tie_tolerance: default_tie_tolerance(),
            degeneracy_threshold: default_degeneracy_threshold(),
            sample_multiplier: default_multiplier(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.k == 0 {
            return bad("k must be >= 1".into());
        }
        if self.d < self.k {
            return bad(format!("need d >= k, got d = {}, k = {}", self.d, self.k));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return bad(format!("epsilon must lie in (0, 1), got {}", self.epsilon));
        }
        if self.moment_cutoff == Some(0) {
            return bad("moment_cutoff must be >= 1".into());
        }
        if let (Some(dd), cutoff) = (self.degree_d, self.cutoff()) {
            if dd < cutoff {
                return bad(format!("degree_D = {dd} is below the moment cutoff {cutoff}"));
            }
        }
        for (name, v) in [
            ("C_D", self.c_d),
            ("sample_multiplier", self.sample_multiplier),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        for (name, v) in [
            ("tie_tolerance", self.tie_tolerance),
            ("degeneracy_threshold", self.degeneracy_threshold),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{name} must be non-negative, got {v}"));
            }
        }
        if self.n_subspace == Some(0) || self.n_regression == Some(0) {
            return bad("sample sizes must be positive".into());
        }
        Ok(())
    }

    pub fn cutoff(&self) -> usize {
        self.moment_cutoff.unwrap_or(4 * self.k)
    }

    /// `(D, capped)`: the regression degree and whether the entry budget lowered it.
    pub fn degree(&self) -> (usize, bool) {
        if let Some(dd) = self.degree_d {
            return (dd, false);
        }
        let raw = (self.c_d * self.epsilon.powf(-4.0 / 3.0)).ceil() as usize;
        let mut dd = raw.max(self.cutoff());
        let budget = entry_budget() as u128;
        while dd > self.cutoff() && entry_count(self.k + 1, dd).is_none_or(|c| c > budget) {
            dd -= 1;
        }
        (dd, dd < raw.max(self.cutoff()))
    }

    /// Default regression sample size:
    /// `multiplier * sum_{m <= D} C(k + m - 1, m) (m + 1) / epsilon^2`.
    pub fn default_n_regression(&self) -> usize {
        let (dd, _) = self.degree();
        let terms: f64 = (0..=dd)
            .map(|m| entry_count(self.k, m).map_or(f64::INFINITY, |c| c as f64) * (m + 1) as f64)
            .sum();
        (self.sample_multiplier * terms / (self.epsilon * self.epsilon)).ceil() as usize
    }

    /// Default subspace sample size, equal to the regression size.
    pub fn default_n_subspace(&self) -> usize {
        self.default_n_regression()
    }

    pub fn n_subspace(&self) -> usize {
        self.n_subspace.unwrap_or_else(|| self.default_n_subspace())
    }

    pub fn n_regression(&self) -> usize {
        self.n_regression.unwrap_or_else(|| self.default_n_regression())
    }
}

/// `A = sum_m gram(T_m)`, so that `Q(v) = vᵀ A v`.
pub fn build_quadratic_form(tensors: &[SymTensor]) -> Result<DMatrix<f64>> {
    let first = tensors
        .first()
        .ok_or_else(|| Error::InvalidArgument("no tensors given".into()))?;
    let d = first.dim();
    let mut a = DMatrix::zeros(d, d);
    for t in tensors {
        if t.dim() != d {
            return Err(Error::ShapeMismatch(format!(
                "tensor dimensions {} and {d}",
                t.dim()
            )));
        }
        a += t.gram_matrix()?;
    }
    Ok(a)
}

/// Leading eigenpairs of a symmetric matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Subspace {
    /// `d x k`, orthonormal columns.
    pub basis: DMatrix<f64>,
    /// All eigenvalues, non-increasing.
    pub eigenvalues: Vec<f64>,
}

fn flip_sign(v: &mut [f64]) {
    if let Some(first) = v.iter().find(|x| x.abs() > 1e-12) {
        if *first < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
    }
}

/// Top-`k` eigenspace of `a`.
///
/// Columns follow non-increasing eigenvalue order, with the first entry of magnitude
/// above `1e-12` made positive. Eigenvalues closer than `tie_tolerance * max(1, |lambda_1|)`
/// form a cluster; a cluster's vectors are replaced by the Gram–Schmidt orthonormalization
/// of the coordinate axes projected onto it, so the result does not depend on how the
/// eigensolver rotates a degenerate eigenspace.
pub fn top_k_subspace(a: &DMatrix<f64>, k: usize, tie_tolerance: f64) -> Result<Subspace> {
    let d = a.nrows();
    if a.ncols() != d {
        return Err(Error::ShapeMismatch(format!("{} x {} matrix is not square", d, a.ncols())));
    }
    if k == 0 || k > d {
        return Err(Error::InvalidArgument(format!("need 1 <= k <= {d}, got {k}")));
    }
    let scale = a.amax().max(1.0);
    let asym = (a - a.transpose()).amax();
    if !(asym <= 1e-10 * scale) {
        return Err(Error::InvalidArgument(format!(
            "matrix is not symmetric (max asymmetry {asym:e})"
        )));
    }
    let sym = (a + a.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym.clone());
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]).then(i.cmp(&j)));
    let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors: Vec<Vec<f64>> = order
        .iter()
        .map(|&i| eig.eigenvectors.column(i).iter().copied().collect())
        .collect();

    let gap = tie_tolerance * values[0].abs().max(1.0);
    let mut start = 0;
    while start < d {
        let mut end = start + 1;
        while end < d && values[end - 1] - values[end] < gap {
            end += 1;
        }
        if end - start > 1 {
            canonicalize_cluster(&mut vectors[start..end]);
        }
        start = end;
    }
    let mut eigenvalues = values;
    for (i, v) in vectors.iter_mut().enumerate() {
        flip_sign(v);
        if i < k {
            let av = &sym * nalgebra::DVector::from_column_slice(v);
            eigenvalues[i] = av.iter().zip(v.iter()).map(|(x, y)| x * y).sum();
        }
    }
    let basis = DMatrix::from_fn(d, k, |i, j| vectors[j][i]);
    Ok(Subspace { basis, eigenvalues })
}

fn canonicalize_cluster(vs: &mut [Vec<f64>]) {
    let d = vs[0].len();
    let size = vs.len();
    let span = vs.to_vec();
    let mut chosen: Vec<Vec<f64>> = Vec::with_capacity(size);
    for axis in 0..d {
        if chosen.len() == size {
            break;
        }
        // projection of e_axis onto the cluster span
        let mut u = vec![0.0; d];
        for v in &span {
            let c = v[axis];
            u.iter_mut().zip(v).for_each(|(x, y)| *x += c * y);
        }
        for c in &chosen {
            let p: f64 = u.iter().zip(c).map(|(x, y)| x * y).sum();
            u.iter_mut().zip(c).for_each(|(x, y)| *x -= p * y);
        }
        let n = u.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-6 {
            chosen.push(u.into_iter().map(|x| x / n).collect());
        }
    }
    if chosen.len() == size {
        vs.clone_from_slice(&chosen);
    }
}

/// Run metadata reported next to a learned hypothesis.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LearnDiagnostics {
    pub moment_cutoff: usize,
    #[serde(rename = "degree_D")]
    pub degree: usize,
    /// Whether the entry budget lowered the default degree.
    pub degree_capped: bool,
    pub n_subspace: usize,
    pub n_regression: usize,
    /// Eigenvalues of the quadratic form, non-increasing.
    pub eigenvalues: Vec<f64>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Learned {
    pub hypothesis: Hypothesis,
    pub diagnostics: LearnDiagnostics,
}

/// Learns from two independent sample sets: one for the subspace, one for the regression.
pub fn learn(
    samples_subspace: &Samples,
    samples_regression: &Samples,
    config: &LearnConfig,
) -> Result<Learned> {
    config.validate()?;
    for (name, s) in [("subspace", samples_subspace), ("regression", samples_regression)] {
        if s.dim() != config.d {
            return Err(Error::ShapeMismatch(format!(
                "{name} samples have dimension {}, config says d = {}",
                s.dim(),
                config.d
            )));
        }
        if s.is_empty() {
            return Err(Error::EmptySamples);
        }
    }
    let cutoff = config.cutoff();
    let (degree, degree_capped) = config.degree();

    let moments = estimate_moments(samples_subspace, cutoff, None)?;
    let a = build_quadratic_form(&moments[1..])?;
    let sub = top_k_subspace(&a, config.k, config.tie_tolerance)?;

    let mut warnings = Vec::new();
    if sub.eigenvalues[0] < config.degeneracy_threshold {
        warnings.push(format!(
            "all eigenvalues of the quadratic form are below {:e}; the subspace is arbitrary",
            config.degeneracy_threshold
        ));
    }
    if degree_capped {
        warnings.push(format!("degree lowered to {degree} by the tensor entry budget"));
    }

    let coeffs = estimate_moments(samples_regression, degree, Some(&sub.basis))?;
    let hypothesis = Hypothesis::new(sub.basis, coeffs)?;
    Ok(Learned {
        hypothesis,
        diagnostics: LearnDiagnostics {
            moment_cutoff: cutoff,
            degree,
            degree_capped,
            n_subspace: samples_subspace.len(),
            n_regression: samples_regression.len(),
            eigenvalues: sub.eigenvalues,
            warnings,
        },
    })
}
