//! Named property suites shared by the `verify` subcommand and the acceptance tests.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hermite::{hermite_eval, hermite_tensor, relu_coeff};
use crate::quadrature::{gauss_hermite, relu_hermite_moment};
use crate::rng::stream_rng;
use crate::schur::{
    jacobi_trudi, schur_bialternant, verify_even_bound, verify_scalar_bound, verify_tensor_recursion, Partition,
    VerifyReport,
};
use crate::symtensor::SymTensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    All,
    Hermite,
    Coeff,
    Schur,
    Scalar,
    Recursion,
    Even,
}

impl Suite {
    pub const NAMES: [&'static str; 7] = ["all", "hermite", "coeff", "schur", "scalar", "recursion", "even"];
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "all" => Suite::All,
            "hermite" => Suite::Hermite,
            "coeff" => Suite::Coeff,
            "schur" => Suite::Schur,
            "scalar" => Suite::Scalar,
            "recursion" => Suite::Recursion,
            "even" => Suite::Even,
            other => {
                return Err(Error::InvalidArgument(format!(
                    "unknown suite '{other}', expected one of {}",
                    Suite::NAMES.join(", ")
                )))
            }
        })
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let i = [Suite::All, Suite::Hermite, Suite::Coeff, Suite::Schur, Suite::Scalar, Suite::Recursion, Suite::Even]
            .iter()
            .position(|s| s == self)
            .unwrap_or(0);
        f.write_str(Suite::NAMES[i])
    }
}

/// Optional overrides; `None` selects the full default grid.
#[derive(Debug, Clone, Default)]
pub struct SuiteParams {
    pub k: Option<usize>,
    pub t: Option<usize>,
    pub dim: Option<usize>,
    pub trials: Option<usize>,
    pub seed: u64,
}

/// `|E[h_n h_m] - delta_nm|` under an `nodes`-point Gauss–Hermite rule, for `n, m <= max_order`.
pub fn hermite_orthonormality(max_order: usize, nodes: usize) -> VerifyReport {
    let rule = gauss_hermite(nodes);
    let mut errs = Vec::new();
    for n in 0..=max_order {
        for m in 0..=max_order {
            let s: f64 = rule.iter().map(|&(t, w)| w * hermite_eval(n, t) * hermite_eval(m, t)).sum();
            errs.push((s - f64::from(u8::from(n == m))).abs());
        }
    }
    VerifyReport::from_ratios(format!("hermite-orthonormality m<={max_order} nodes={nodes}"), &errs, 1e-9)
}

/// `|<H_m(x), v^{⊗m}> - h_m(v . x)|` for Gaussian `x`, unit `v`, `m <= max_order`, `d <= max_dim`.
pub fn hermite_contraction(trials: usize, max_order: usize, max_dim: usize, seed: u64) -> Result<VerifyReport> {
    let errs = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = stream_rng(seed, trial as u64);
            let d = rng.random_range(1..=max_dim);
            let m = rng.random_range(0..=max_order);
            let x: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
            let mut v: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
            v.iter_mut().for_each(|a| *a /= norm);
            let lhs = hermite_tensor(m, &x)?.inner(&SymTensor::power(&v, m)?)?;
            let t: f64 = v.iter().zip(&x).map(|(a, b)| a * b).sum();
            Ok((lhs - hermite_eval(m, t)).abs())
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(VerifyReport::from_ratios(
        format!("hermite-contraction m<={max_order} d<={max_dim} seed={seed}"),
        &errs,
        1e-9,
    ))
}

/// `|c_m - E[ReLU(G) h_m(G)]|` with an `nodes`-point rule, `m <= max_order`.
pub fn relu_coeff_quadrature(max_order: usize, nodes: usize) -> VerifyReport {
    let errs: Vec<f64> = (0..=max_order)
        .map(|m| (relu_coeff(m) - relu_hermite_moment(m, nodes)).abs())
        .collect();
    VerifyReport::from_ratios(format!("relu-coeff-quadrature m<={max_order} nodes={nodes}"), &errs, 1e-8)
}

/// `c_m == 0` exactly for odd `3 <= m <= max_order`.
pub fn relu_coeff_parity(max_order: usize) -> VerifyReport {
    let vals: Vec<f64> = (3..=max_order).step_by(2).map(|m| relu_coeff(m).abs()).collect();
    VerifyReport::from_ratios(format!("relu-coeff-odd-zero m<={max_order}"), &vals, 0.0)
}

/// `|c_m| m^{5/4} in [0.1, 10]` for even `2 <= m <= max_order`; the ratio is the
/// distance factor from the interval, at most 1 inside it.
pub fn relu_coeff_decay(max_order: usize) -> VerifyReport {
    let ratios: Vec<f64> = (2..=max_order)
        .step_by(2)
        .map(|m| {
            let s = relu_coeff(m).abs() * (m as f64).powf(1.25);
            (s / 10.0).max(0.1 / s)
        })
        .collect();
    VerifyReport::from_ratios(format!("relu-coeff-decay m<={max_order}"), &ratios, 1.0)
}

/// Bialternant against Jacobi–Trudi for every `|lambda| <= max_size`, `n <= max_vars`,
/// `per_case` random points each; error scaled by `1 + |value|`.
pub fn schur_agreement(max_size: u32, max_vars: usize, per_case: usize, seed: u64) -> Result<VerifyReport> {
    let mut cases = Vec::new();
    for size in 0..=max_size {
        for lambda in Partition::all_of_size(size) {
            for n in 1..=max_vars {
                cases.push((lambda.clone(), n));
            }
        }
    }
    let errs = cases
        .par_iter()
        .enumerate()
        .map(|(c, (lambda, n))| {
            let jt = jacobi_trudi(lambda, *n)?;
            let mut rng = stream_rng(seed, c as u64);
            let mut out = Vec::with_capacity(per_case);
            while out.len() < per_case {
                let x: Vec<f64> = (0..*n).map(|_| rng.random_range(-1.5..1.5)).collect();
                let distinct = (0..*n).all(|i| (i + 1..*n).all(|j| x[i] != x[j]));
                if !distinct {
                    continue;
                }
                let b = schur_bialternant(lambda, &x)?;
                let j = jt.eval(&x)?;
                out.push((b - j).abs() / (1.0 + j.abs()));
            }
            Ok(out)
        })
        .collect::<Result<Vec<Vec<f64>>>>()?;
    Ok(VerifyReport::from_ratios(
        format!("schur-agreement |lambda|<={max_size} n<={max_vars} seed={seed}"),
        &errs.concat(),
        1e-8,
    ))
}

/// Every Jacobi–Trudi polynomial with `|lambda| <= max_size`, `n <= max_vars` has
/// non-negative integer coefficients and is symmetric; the count of offenders is reported.
pub fn schur_coefficients(max_size: u32, max_vars: usize) -> Result<VerifyReport> {
    let mut bad = Vec::new();
    for size in 0..=max_size {
        for lambda in Partition::all_of_size(size) {
            for n in 1..=max_vars {
                let p = jacobi_trudi(&lambda, n)?;
                bad.push(f64::from(u8::from(!(p.has_nonnegative_coefficients() && p.is_symmetric()))));
            }
        }
    }
    Ok(VerifyReport::from_ratios(
        format!("schur-coefficients |lambda|<={max_size} n<={max_vars}"),
        &bad,
        0.0,
    ))
}

/// `s_(2,1)(2, 3) = 30`.
pub fn schur_example() -> Result<VerifyReport> {
    let lambda = Partition::new(vec![2, 1])?;
    let x = [2.0, 3.0];
    let errs = [
        (schur_bialternant(&lambda, &x)? - 30.0).abs(),
        (jacobi_trudi(&lambda, 2)?.eval(&x)? - 30.0).abs(),
    ];
    Ok(VerifyReport::from_ratios("schur-example (2,1) at (2,3)".into(), &errs, 1e-12))
}

fn ks(p: &SuiteParams) -> Vec<usize> {
    p.k.map_or_else(|| vec![1, 2, 3], |k| vec![k])
}

/// Runs `suite`, returning one report per checked configuration.
pub fn run_suite(suite: Suite, p: &SuiteParams) -> Result<Vec<VerifyReport>> {
    let mut out = Vec::new();
    match suite {
        Suite::All => {
            for s in [Suite::Hermite, Suite::Coeff, Suite::Schur, Suite::Scalar, Suite::Recursion, Suite::Even] {
                out.extend(run_suite(s, p)?);
            }
        }
        Suite::Hermite => {
            out.push(hermite_orthonormality(12, 64));
            out.push(hermite_contraction(p.trials.unwrap_or(200), 8, 6, p.seed)?);
        }
        Suite::Coeff => {
            out.push(relu_coeff_quadrature(24, 128));
            out.push(relu_coeff_parity(64));
            out.push(relu_coeff_decay(64));
        }
        Suite::Schur => {
            out.push(schur_agreement(6, 4, p.trials.unwrap_or(50), p.seed)?);
            out.push(schur_coefficients(6, 4)?);
            out.push(schur_example()?);
        }
        Suite::Scalar => {
            for k in ks(p) {
                let ts = p.t.map_or_else(|| (k..=10).collect(), |t| vec![t]);
                for t in ts {
                    out.push(verify_scalar_bound(k, t, p.trials.unwrap_or(1000), p.seed)?);
                }
            }
        }
        Suite::Recursion => {
            for k in ks(p) {
                let ts = p.t.map_or_else(|| (k..=8).collect(), |t| vec![t]);
                for t in ts {
                    for dim in p.dim.map_or_else(|| vec![2, 3], |d| vec![d]) {
                        out.push(verify_tensor_recursion(k, t, dim, p.trials.unwrap_or(100), p.seed)?);
                    }
                }
            }
        }
        Suite::Even => {
            for k in ks(p) {
                let ts = p.t.map_or_else(|| (2 * k..=10).step_by(2).collect(), |t| vec![t]);
                for t in ts {
                    out.push(verify_even_bound(k, t, p.dim.unwrap_or(3), p.trials.unwrap_or(1000), p.seed)?);
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_names_round_trip() {
        for name in Suite::NAMES {
            assert_eq!(name.parse::<Suite>().unwrap().to_string(), name);
        }
        assert!("bogus".parse::<Suite>().is_err());
    }

    #[test]
    fn fast_suites_pass() {
        let p = SuiteParams::default();
        for s in [Suite::Hermite, Suite::Coeff] {
            for r in run_suite(s, &p).unwrap() {
                assert!(r.passed, "{r}");
            }
        }
        assert!(schur_example().unwrap().passed);
    }

    #[test]
    fn targeted_recursion_runs_one_config() {
        let p = SuiteParams {
            k: Some(2),
            t: Some(6),
            dim: Some(3),
            trials: Some(10),
            seed: 1,
        };
        let r = run_suite(Suite::Recursion, &p).unwrap();
        assert_eq!(r.len(), 1);
        assert!(r[0].passed, "{}", r[0]);
    }

    #[test]
    fn decay_report_flags_out_of_range() {
        let r = VerifyReport::from_ratios("x".into(), &[0.5, 2.0], 1.0);
        assert!(!r.passed);
        assert_eq!(r.violations, 1);
    }
}
