//! Ground-truth evaluation of a hypothesis against the network that generated its data.

use std::fs;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::datagen::{gaussian_points, random_network, sample_with_noise, Profile, ReluNetwork};
use crate::error::{Error, Result};
use crate::hermite::relu_coeff;
use crate::learner::{learn, residual_orthogonal_mass, Hypothesis, LearnConfig, LearnDiagnostics};
use crate::moments::{analytic_moment_projected, direction_gram, weighted_power_sums};
use crate::rng::derive_seed;

/// Default tail cutoff `M_max` of the analytic error.
pub const DEFAULT_TAIL_CUTOFF: usize = 400;
/// Default number of fresh Monte Carlo evaluation points.
pub const DEFAULT_EVAL_POINTS: usize = 100_000;
/// The continued tail stops once `c_m^2` falls below this.
pub const TAIL_COEFF_FLOOR: f64 = 1e-16;

/// Monte Carlo estimate of `||F~ - F||` with jackknife standard errors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McError {
    pub n: usize,
    /// Root mean squared error.
    pub value: f64,
    /// Jackknife standard error of `value`.
    pub std_error: f64,
    /// Mean squared error.
    pub mse: f64,
    /// Standard error of `mse`.
    pub mse_std_error: f64,
}

fn check_dims(net: &ReluNetwork, h: &Hypothesis) -> Result<()> {
    if net.dim() != h.dim() {
        return Err(Error::ShapeMismatch(format!(
            "network dimension {} differs from hypothesis dimension {}",
            net.dim(),
            h.dim()
        )));
    }
    Ok(())
}

/// Jackknife summary of squared errors `e`.
pub fn jackknife(e: &[f64]) -> McError {
    let n = e.len();
    let total: f64 = e.iter().sum();
    let mse = total / n as f64;
    if n < 2 {
        return McError {
            n,
            value: mse.sqrt(),
            std_error: f64::NAN,
            mse,
            mse_std_error: f64::NAN,
        };
    }
    let nm1 = (n - 1) as f64;
    let loo = |x: f64| ((total - x) / nm1).max(0.0).sqrt();
    let mean_loo = e.iter().map(|&x| loo(x)).sum::<f64>() / n as f64;
    let ss: f64 = e.iter().map(|&x| (loo(x) - mean_loo).powi(2)).sum();
    let var_e: f64 = e.iter().map(|&x| (x - mse).powi(2)).sum::<f64>() / nm1;
    McError {
        n,
        value: mse.sqrt(),
        std_error: (nm1 / n as f64 * ss).sqrt(),
        mse,
        mse_std_error: (var_e / n as f64).sqrt(),
    }
}

/// `sqrt(mean (F~(x) - F(x))^2)` over `n_eval` fresh Gaussian points.
pub fn l2_error_mc(net: &ReluNetwork, h: &Hypothesis, n_eval: usize, seed: u64) -> Result<McError> {
    check_dims(net, h)?;
    if n_eval == 0 {
        return Err(Error::EmptySamples);
    }
    let d = net.dim();
    let xs = gaussian_points(d, n_eval, seed);
    let pred = h.predict_batch(&xs)?;
    let sq: Vec<f64> = xs
        .chunks_exact(d)
        .zip(&pred)
        .map(|(x, p)| (p - net.evaluate(x)).powi(2))
        .collect();
    Ok(jackknife(&sq))
}

/// As [`l2_error_mc`], but drawing from `N(0, sigma^2 I)` and reweighting by the density
/// ratio. A `sigma > 1` samples the tails where high-degree hypotheses carry most of
/// their squared error; the variance is finite for `sigma^2 > 1/2`.
pub fn l2_error_importance(net: &ReluNetwork, h: &Hypothesis, n_eval: usize, seed: u64, sigma: f64) -> Result<McError> {
    check_dims(net, h)?;
    if n_eval == 0 {
        return Err(Error::EmptySamples);
    }
    if !(sigma * sigma > 0.5 && sigma.is_finite()) {
        return Err(Error::InvalidArgument(format!("need sigma^2 > 1/2, got sigma = {sigma}")));
    }
    let d = net.dim();
    let xs: Vec<f64> = gaussian_points(d, n_eval, seed).into_iter().map(|x| sigma * x).collect();
    let pred = h.predict_batch(&xs)?;
    let log_norm = d as f64 * sigma.ln();
    let shrink = 0.5 * (1.0 - 1.0 / (sigma * sigma));
    let weighted: Vec<f64> = xs
        .chunks_exact(d)
        .zip(&pred)
        .map(|(x, p)| {
            let r2: f64 = x.iter().map(|v| v * v).sum();
            (log_norm - shrink * r2).exp() * (p - net.evaluate(x)).powi(2)
        })
        .collect();
    Ok(jackknife(&weighted))
}

/// Closed-form error decomposition `||F~ - F||^2 = sum_{m<=D} ||lift P_m - M_m||^2 + sum_{m>D} ||M_m||^2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyticError {
    /// `||lift P_m - M_m||` for `m <= D`.
    pub per_order_errors: Vec<f64>,
    /// `sum_{D < m <= M_max} ||M_m||^2`.
    pub exact_tail: f64,
    /// `sum_{m > M_max} ||M_m||^2`, summed exactly until `c_m^2 < 1e-16`.
    pub continued_tail: f64,
    /// Bound on what remains after the continued tail.
    pub tail_bound: f64,
    pub tail_cutoff: usize,
    /// `sqrt(sum per_order^2 + exact_tail + continued_tail)`.
    pub value: f64,
}

/// Upper bound on `sum_{m > m_star} c_m^2` from `c_m^2 <= (1/2pi) (pi (m-2)/2)^{-1/2} / (m (m-1))`.
pub fn relu_tail_bound(m_star: usize) -> f64 {
    let m = m_star.max(3) as f64;
    std::f64::consts::FRAC_1_PI / 2.0 * (2.0 / std::f64::consts::PI).sqrt() * (2.0 / 3.0) * (m - 2.0).powf(-1.5)
}

/// Exact analytic error of `h` against `net`.
pub fn l2_error_analytic(net: &ReluNetwork, h: &Hypothesis, tail_cutoff: usize) -> Result<AnalyticError> {
    check_dims(net, h)?;
    let degree = h.degree();
    let residual = residual_orthogonal_mass(net, h.basis(), degree)?;
    let mut per_order_errors = Vec::with_capacity(degree + 1);
    for (m, p) in h.coeffs().iter().enumerate() {
        let target = analytic_moment_projected(net, m, h.basis())?;
        let inside = p.sub(&target)?.norm2();
        per_order_errors.push(inside.hypot(residual[m].projection_error));
    }

    let w = net.weights();
    let gram = direction_gram(net.directions(), net.directions());
    let top = tail_cutoff.max(degree);
    let sums = weighted_power_sums(w, &gram, top);
    let exact_tail: f64 = (degree + 1..=top).map(|m| (relu_coeff(m).powi(2) * sums[m]).max(0.0)).sum();

    // continue even orders past the cutoff, carrying g^m and h_{m-2}(0) along
    let width = w.len();
    let mut m = top + 1 + (top + 1) % 2;
    let mut powers: Vec<f64> = gram.iter().map(|g| g.powi(m as i32)).collect();
    let gsq: Vec<f64> = gram.iter().map(|g| g * g).collect();
    let mut h0 = crate::hermite::hermite_eval(m - 2, 0.0);
    let g0 = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
    let mut continued_tail = 0.0;
    loop {
        let c = h0 * g0 / ((m * (m - 1)) as f64).sqrt();
        let c2 = c * c;
        if c2 < TAIL_COEFF_FLOOR {
            break;
        }
        let mut s = 0.0;
        for i in 0..width {
            for j in 0..width {
                s += w[i] * w[j] * powers[i * width + j];
            }
        }
        continued_tail += (c2 * s).max(0.0);
        // h_m(0) = -sqrt((m - 1) / m) h_{m-2}(0)
        h0 *= -(((m - 1) as f64) / m as f64).sqrt();
        powers.iter_mut().zip(&gsq).for_each(|(p, g)| *p *= g);
        m += 2;
    }
    let l1: f64 = w.iter().map(|x| x.abs()).sum();
    let tail_bound = relu_tail_bound(m - 2) * l1 * l1;

    let total: f64 = per_order_errors.iter().map(|e| e * e).sum::<f64>() + exact_tail + continued_tail;
    Ok(AnalyticError {
        per_order_errors,
        exact_tail,
        continued_tail,
        tail_bound,
        tail_cutoff,
        value: total.sqrt(),
    })
}

/// Errors of one learned hypothesis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub l2_error_mc: McError,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l2_error_analytic: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tail_bound: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub per_order_errors: Vec<f64>,
    /// Largest principal angle between `span(B)` and `span(v_i)`, in radians.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub principal_angle: Option<f64>,
    /// Wall time in seconds; kept out of the serialized report.
    #[serde(skip)]
    pub runtime: f64,
}

/// Evaluates `h` against `net` on `n_eval` points, optionally adding the analytic decomposition.
pub fn evaluate(net: &ReluNetwork, h: &Hypothesis, n_eval: usize, seed: u64, analytic: bool) -> Result<EvalReport> {
    let start = Instant::now();
    let l2_error_mc = l2_error_mc(net, h, n_eval, seed)?;
    let mut report = EvalReport {
        l2_error_mc,
        l2_error_analytic: None,
        tail_bound: None,
        per_order_errors: Vec::new(),
        principal_angle: principal_angle(net, h.basis()),
        runtime: 0.0,
    };
    if analytic {
        let a = l2_error_analytic(net, h, DEFAULT_TAIL_CUTOFF)?;
        report.l2_error_analytic = Some(a.value);
        report.tail_bound = Some(a.tail_bound);
        report.per_order_errors = a.per_order_errors;
    }
    report.runtime = start.elapsed().as_secs_f64();
    Ok(report)
}

/// Largest principal angle between `span(basis)` and the span of the network directions,
/// or `None` when the two spans differ in dimension.
pub fn principal_angle(net: &ReluNetwork, basis: &nalgebra::DMatrix<f64>) -> Option<f64> {
    let d = net.dim();
    let v = nalgebra::DMatrix::from_fn(d, net.width(), |i, j| net.directions()[j][i]);
    let svd = v.clone().svd(true, false);
    let tol = 1e-10 * svd.singular_values.max().max(1.0);
    let rank = svd.singular_values.iter().filter(|s| **s > tol).count();
    if rank != basis.ncols() || basis.nrows() != d {
        return None;
    }
    let u = svd.u?;
    let cols: Vec<usize> = (0..svd.singular_values.len()).filter(|&j| svd.singular_values[j] > tol).collect();
    let q = u.select_columns(&cols);
    let s = (q.transpose() * basis).singular_values();
    let min = s.iter().copied().fold(f64::INFINITY, f64::min).clamp(-1.0, 1.0);
    Some(min.acos())
}

fn default_profile() -> String {
    "generic".into()
}
fn default_theta() -> f64 {
    0.05
}
fn default_eval_points() -> usize {
    DEFAULT_EVAL_POINTS
}
fn default_true() -> bool {
    true
}

/// Everything an end-to-end experiment needs; the learner keys sit at the top level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(flatten)]
    pub learn: LearnConfig,
    #[serde(default = "default_profile")]
    pub profile: String,
    #[serde(default = "default_theta")]
    pub theta: f64,
    #[serde(default)]
    pub noise_sigma: f64,
    #[serde(default = "default_eval_points")]
    pub n_eval: usize,
    #[serde(default = "default_true")]
    pub analytic: bool,
}

impl ExperimentConfig {
    pub fn new(learn: LearnConfig) -> Self {
        Self {
            learn,
            profile: default_profile(),
            theta: default_theta(),
            noise_sigma: 0.0,
            n_eval: DEFAULT_EVAL_POINTS,
            analytic: true,
        }
    }
}

/// Stream tags deriving independent seeds from the experiment seed.
pub mod seeds {
    pub const NETWORK: u64 = 0x6e6574;
    pub const SUBSPACE: u64 = 0x737562;
    pub const REGRESSION: u64 = 0x726567;
    pub const EVAL: u64 = 0x6576616c;
}

/// Reproducible record of an experiment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Manifest {
    pub version: &'static str,
    pub status: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub config: ExperimentConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub learn: Option<LearnDiagnostics>,
}

#[derive(Debug, Clone)]
pub struct Experiment {
    pub network: ReluNetwork,
    pub hypothesis: Hypothesis,
    pub diagnostics: LearnDiagnostics,
    pub report: EvalReport,
    pub learn_seconds: f64,
}

fn run_inner(config: &ExperimentConfig) -> Result<Experiment> {
    let lc = &config.learn;
    lc.validate()?;
    if config.n_eval == 0 {
        return Err(Error::Config("n_eval must be positive".into()));
    }
    if !(config.noise_sigma >= 0.0 && config.noise_sigma.is_finite()) {
        return Err(Error::Config(format!("noise_sigma must be non-negative, got {}", config.noise_sigma)));
    }
    let profile = Profile::parse(&config.profile, config.theta)?;
    let network = random_network(lc.d, lc.k, profile, derive_seed(lc.seed, seeds::NETWORK))?;
    let start = Instant::now();
    let sub = sample_with_noise(&network, lc.n_subspace(), derive_seed(lc.seed, seeds::SUBSPACE), config.noise_sigma);
    let reg = sample_with_noise(
        &network,
        lc.n_regression(),
        derive_seed(lc.seed, seeds::REGRESSION),
        config.noise_sigma,
    );
    let learned = learn(&sub, &reg, lc)?;
    let learn_seconds = start.elapsed().as_secs_f64();
    let report = evaluate(
        &network,
        &learned.hypothesis,
        config.n_eval,
        derive_seed(lc.seed, seeds::EVAL),
        config.analytic,
    )?;
    Ok(Experiment {
        network,
        hypothesis: learned.hypothesis,
        diagnostics: learned.diagnostics,
        report,
        learn_seconds,
    })
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Generates an instance, samples, learns and evaluates. When `out_dir` is given, writes
/// `model.json`, `hypothesis.bin`, `report.json`, `manifest.json` and `timing.json`;
/// all but the last are a pure function of the config.
pub fn run_experiment(config: &ExperimentConfig, out_dir: Option<&Path>) -> Result<Experiment> {
    let result = run_inner(config);
    if let Some(dir) = out_dir {
        fs::create_dir_all(dir)?;
        let manifest = Manifest {
            version: env!("CARGO_PKG_VERSION"),
            status: if result.is_ok() { "ok" } else { "error" },
            error: result.as_ref().err().map(|e| e.to_string()),
            config: config.clone(),
            learn: result.as_ref().ok().map(|r| r.diagnostics.clone()),
        };
        write_json(&dir.join("manifest.json"), &manifest)?;
        if let Ok(exp) = &result {
            exp.network.save(&dir.join("model.json"))?;
            exp.hypothesis.save(&dir.join("hypothesis.bin"))?;
            write_json(&dir.join("report.json"), &exp.report)?;
            write_json(
                &dir.join("timing.json"),
                &serde_json::json!({ "learn_seconds": exp.learn_seconds, "eval_seconds": exp.report.runtime }),
            )?;
        }
    }
    result
}
