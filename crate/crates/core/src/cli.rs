//! Command-line front end: `gen`, `learn`, `eval`, `verify`, `schur` and `run`.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};

use crate::datagen::{random_network, sample_with_noise, Profile, ReluNetwork, Samples};
use crate::error::{Error, Result};
use crate::evalharness::{evaluate, run_experiment, ExperimentConfig, DEFAULT_EVAL_POINTS};
use crate::learner::{learn, Hypothesis, LearnConfig};
use crate::schur::{jacobi_trudi, schur_bialternant, Partition, VerifyReport};
use crate::verify::{run_suite, Suite, SuiteParams};

#[derive(Debug, Parser)]
#[command(name = "moment-spectra", version, about = "Learn sums of ReLUs from Gaussian moment tensors")]
pub struct Cli {
    /// Worker threads; defaults to the number of cores.
    #[arg(long, global = true, env = "MOMENT_SPECTRA_THREADS")]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw a random network and labeled Gaussian samples.
    Gen(GenArgs),
    /// Learn a hypothesis from a samples file.
    Learn(LearnArgs),
    /// Measure the L2 error of a hypothesis against a model.
    Eval(EvalArgs),
    /// Run property suites.
    Verify(VerifyArgs),
    /// Schur polynomial utilities.
    #[command(subcommand)]
    Schur(SchurCommand),
    /// Generate, learn and evaluate in one go.
    Run(RunArgs),
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long)]
    pub d: usize,
    #[arg(long)]
    pub k: usize,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// generic, near-parallel or cancelling.
    #[arg(long, default_value = "generic")]
    pub profile: String,
    /// Angular spread of the near-parallel profile.
    #[arg(long, default_value_t = 0.05)]
    pub theta: f64,
    #[arg(long, default_value_t = 0.0)]
    pub noise_sigma: f64,
}

#[derive(Debug, Args)]
pub struct LearnArgs {
    #[arg(long)]
    pub samples: PathBuf,
    /// Separate samples for the regression step; otherwise `--samples` is split in half.
    #[arg(long)]
    pub samples_regression: Option<PathBuf>,
    /// JSON file with LearnConfig keys; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long = "degree-D", alias = "degree-d")]
    pub degree_d: Option<usize>,
    #[arg(long)]
    pub moment_cutoff: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory; defaults to the directory of `--samples`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub hypothesis: PathBuf,
    #[arg(long, default_value_t = DEFAULT_EVAL_POINTS)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Add the closed-form error decomposition.
    #[arg(long)]
    pub analytic: bool,
    /// Exit with status 1 unless the Monte Carlo error is at most this.
    #[arg(long)]
    pub assert_epsilon: Option<f64>,
    /// Output directory; defaults to the directory of `--hypothesis`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// all, hermite, coeff, schur, scalar, recursion or even.
    #[arg(long, default_value = "all", value_parser = parse_suite)]
    pub suite: Suite,
    #[command(flatten)]
    pub params: SuiteArgs,
}

#[derive(Debug, Args)]
pub struct SuiteArgs {
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub t: Option<usize>,
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Write the reports and a manifest here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum SchurCommand {
    /// Evaluate `s_lambda(x)`.
    Eval {
        /// Comma-separated parts, e.g. `2,1`.
        #[arg(long, value_parser = parse_partition)]
        lambda: Partition,
        /// Comma-separated point, e.g. `2,3`.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
        x: Vec<f64>,
    },
    /// Run a bound or recursion suite.
    Verify {
        /// scalar, recursion or even.
        #[arg(long, value_parser = parse_schur_suite)]
        suite: Suite,
        #[command(flatten)]
        params: SuiteArgs,
    },
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// JSON file with experiment keys; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub profile: Option<String>,
    #[arg(long)]
    pub theta: Option<f64>,
    #[arg(long = "degree-D", alias = "degree-d")]
    pub degree_d: Option<usize>,
    #[arg(long)]
    pub n_eval: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
    /// Exit with status 1 unless the Monte Carlo error is at most epsilon.
    #[arg(long)]
    pub assert: bool,
}

fn parse_suite(s: &str) -> std::result::Result<Suite, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_schur_suite(s: &str) -> std::result::Result<Suite, String> {
    match parse_suite(s)? {
        suite @ (Suite::Scalar | Suite::Recursion | Suite::Even) => Ok(suite),
        _ => Err(format!("unknown schur suite '{s}', expected scalar, recursion or even")),
    }
}

fn parse_partition(s: &str) -> std::result::Result<Partition, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// What a subcommand concluded.
enum Outcome {
    Pass,
    Fail,
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn manifest(command: &str, args: Value, extra: Value) -> Value {
    let mut m = json!({
        "version": env!("CARGO_PKG_VERSION"),
        "command": command,
        "args": args,
    });
    if let (Value::Object(dst), Value::Object(src)) = (&mut m, extra) {
        dst.extend(src);
    }
    m
}

fn write_timing(dir: &Path, seconds: f64) -> Result<()> {
    write_json(&dir.join("timing.json"), &json!({ "seconds": seconds }))
}

fn cmd_gen(a: &GenArgs) -> Result<Outcome> {
    if !(a.noise_sigma >= 0.0 && a.noise_sigma.is_finite()) {
        return Err(Error::InvalidArgument(format!("noise sigma must be non-negative, got {}", a.noise_sigma)));
    }
    let profile = Profile::parse(&a.profile, a.theta)?;
    let net = random_network(a.d, a.k, profile, a.seed)?;
    // the samples stream differs from the network stream
    let samples = sample_with_noise(&net, a.n, crate::rng::derive_seed(a.seed, 1), a.noise_sigma);
    fs::create_dir_all(&a.out)?;
    net.save(&a.out.join("model.json"))?;
    samples.save(&a.out.join("samples.bin"))?;
    let args = json!({
        "d": a.d, "k": a.k, "n": a.n, "seed": a.seed, "profile": profile.name(),
        "theta": a.theta, "noise_sigma": a.noise_sigma,
    });
    write_json(&a.out.join("manifest.json"), &manifest("gen", args, json!({})))?;
    println!("wrote {} samples to {}", a.n, a.out.display());
    Ok(Outcome::Pass)
}

fn parent_dir(p: &Path) -> PathBuf {
    match p.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => PathBuf::from("."),
    }
}

fn learn_config(a: &LearnArgs, d: usize) -> Result<LearnConfig> {
    let mut value = match &a.config {
        Some(path) => serde_json::from_str::<Value>(&fs::read_to_string(path)?)?,
        None => json!({}),
    };
    let obj = value
        .as_object_mut()
        .ok_or_else(|| Error::Config("config file must hold a JSON object".into()))?;
    obj.insert("d".into(), json!(d));
    let overrides = [
        ("k", a.k.map(|v| json!(v))),
        ("epsilon", a.epsilon.map(|v| json!(v))),
        ("degree_D", a.degree_d.map(|v| json!(v))),
        ("moment_cutoff", a.moment_cutoff.map(|v| json!(v))),
        ("seed", a.seed.map(|v| json!(v))),
    ];
    for (key, v) in overrides {
        if let Some(v) = v {
            if key == "degree_D" {
                obj.remove("degree_d");
            }
            obj.insert(key.into(), v);
        }
    }
    for key in ["k", "epsilon"] {
        if !obj.contains_key(key) {
            return Err(Error::Config(format!("missing '{key}' (flag or config file)")));
        }
    }
    let cfg: LearnConfig = serde_json::from_value(value).map_err(|e| Error::Config(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

fn cmd_learn(a: &LearnArgs) -> Result<Outcome> {
    let start = Instant::now();
    let all = Samples::load(&a.samples)?;
    let (sub, reg) = match &a.samples_regression {
        Some(p) => (all, Samples::load(p)?),
        None => {
            if all.len() < 2 {
                return Err(Error::EmptySamples);
            }
            let half = all.len() / 2;
            (all.slice(0..half), all.slice(half..all.len()))
        }
    };
    let cfg = learn_config(a, sub.dim())?;
    let learned = learn(&sub, &reg, &cfg)?;
    let out = a.out.clone().unwrap_or_else(|| parent_dir(&a.samples));
    fs::create_dir_all(&out)?;
    learned.hypothesis.save(&out.join("hypothesis.bin"))?;
    let args = json!({
        "samples": a.samples, "samples_regression": a.samples_regression,
    });
    let extra = json!({ "config": cfg, "learn": learned.diagnostics });
    write_json(&out.join("manifest.json"), &manifest("learn", args, extra))?;
    write_timing(&out, start.elapsed().as_secs_f64())?;
    for w in &learned.diagnostics.warnings {
        eprintln!("warning: {w}");
    }
    println!(
        "learned k={} D={} from {} + {} samples; wrote {}",
        cfg.k,
        learned.diagnostics.degree,
        learned.diagnostics.n_subspace,
        learned.diagnostics.n_regression,
        out.join("hypothesis.bin").display()
    );
    Ok(Outcome::Pass)
}

fn cmd_eval(a: &EvalArgs) -> Result<Outcome> {
    let net = ReluNetwork::load(&a.model)?;
    let h = Hypothesis::load(&a.hypothesis)?;
    let report = evaluate(&net, &h, a.n, a.seed, a.analytic)?;
    let out = a.out.clone().unwrap_or_else(|| parent_dir(&a.hypothesis));
    fs::create_dir_all(&out)?;
    write_json(&out.join("report.json"), &report)?;
    let passed = a.assert_epsilon.is_none_or(|eps| report.l2_error_mc.value <= eps);
    let args = json!({
        "model": a.model, "hypothesis": a.hypothesis, "n": a.n, "seed": a.seed,
        "analytic": a.analytic, "assert_epsilon": a.assert_epsilon,
    });
    write_json(
        &out.join("eval_manifest.json"),
        &manifest("eval", args, json!({ "passed": passed })),
    )?;
    println!(
        "l2_error_mc = {:.6} +- {:.6}",
        report.l2_error_mc.value, report.l2_error_mc.std_error
    );
    if let Some(v) = report.l2_error_analytic {
        println!("l2_error_analytic = {v:.6}");
    }
    if let Some(eps) = a.assert_epsilon {
        println!("{} l2_error_mc <= {eps}", if passed { "PASS" } else { "FAIL" });
    }
    Ok(if passed { Outcome::Pass } else { Outcome::Fail })
}

fn report_suites(name: &str, suite: Suite, p: &SuiteArgs) -> Result<Outcome> {
    let params = SuiteParams {
        k: p.k,
        t: p.t,
        dim: p.dim,
        trials: p.trials,
        seed: p.seed,
    };
    let reports: Vec<VerifyReport> = run_suite(suite, &params)?;
    for r in &reports {
        println!("{r}");
    }
    let passed = reports.iter().all(|r| r.passed);
    if let Some(out) = &p.out {
        fs::create_dir_all(out)?;
        write_json(&out.join("verify.json"), &reports)?;
        let args = json!({
            "suite": suite.to_string(), "k": p.k, "t": p.t, "dim": p.dim,
            "trials": p.trials, "seed": p.seed,
        });
        write_json(&out.join("manifest.json"), &manifest(name, args, json!({ "passed": passed })))?;
    }
    Ok(if passed { Outcome::Pass } else { Outcome::Fail })
}

fn cmd_schur(c: &SchurCommand) -> Result<Outcome> {
    match c {
        SchurCommand::Eval { lambda, x } => {
            let value = schur_bialternant(lambda, x)?;
            let poly = jacobi_trudi(lambda, x.len())?;
            println!("{value}");
            let check = poly.eval(x)?;
            if (value - check).abs() > 1e-8 * (1.0 + check.abs()) {
                eprintln!("warning: Jacobi–Trudi evaluates to {check}");
            }
            Ok(Outcome::Pass)
        }
        SchurCommand::Verify { suite, params } => report_suites("schur verify", *suite, params),
    }
}

fn experiment_config(a: &RunArgs) -> Result<ExperimentConfig> {
    let mut value = match &a.config {
        Some(path) => serde_json::from_str::<Value>(&fs::read_to_string(path)?)?,
        None => json!({}),
    };
    let obj = value
        .as_object_mut()
        .ok_or_else(|| Error::Config("config file must hold a JSON object".into()))?;
    let overrides = [
        ("d", a.d.map(|v| json!(v))),
        ("k", a.k.map(|v| json!(v))),
        ("epsilon", a.epsilon.map(|v| json!(v))),
        ("seed", a.seed.map(|v| json!(v))),
        ("profile", a.profile.as_ref().map(|v| json!(v))),
        ("theta", a.theta.map(|v| json!(v))),
        ("degree_D", a.degree_d.map(|v| json!(v))),
        ("n_eval", a.n_eval.map(|v| json!(v))),
    ];
    for (key, v) in overrides {
        if let Some(v) = v {
            obj.insert(key.into(), v);
        }
    }
    for key in ["d", "k", "epsilon"] {
        if !obj.contains_key(key) {
            return Err(Error::Config(format!("missing '{key}' (flag or config file)")));
        }
    }
    serde_json::from_value(value).map_err(|e| Error::Config(e.to_string()))
}

fn cmd_run(a: &RunArgs) -> Result<Outcome> {
    let cfg = experiment_config(a)?;
    let exp = run_experiment(&cfg, Some(&a.out))?;
    let r = &exp.report;
    println!("l2_error_mc = {:.6} +- {:.6}", r.l2_error_mc.value, r.l2_error_mc.std_error);
    if let Some(v) = r.l2_error_analytic {
        println!("l2_error_analytic = {v:.6}");
    }
    if a.assert {
        let ok = r.l2_error_mc.value <= cfg.learn.epsilon;
        println!("{} l2_error_mc <= {}", if ok { "PASS" } else { "FAIL" }, cfg.learn.epsilon);
        if !ok {
            return Ok(Outcome::Fail);
        }
    }
    Ok(Outcome::Pass)
}

fn dispatch(cli: &Cli) -> Result<Outcome> {
    match &cli.command {
        Command::Gen(a) => cmd_gen(a),
        Command::Learn(a) => cmd_learn(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Verify(a) => report_suites("verify", a.suite, &a.params),
        Command::Schur(c) => cmd_schur(c),
        Command::Run(a) => cmd_run(a),
    }
}

/// Parses the process arguments and runs; exit status 0 on success, 1 on failure, 2 on usage errors.
pub fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be positive");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    match dispatch(&cli) {
        Ok(Outcome::Pass) => ExitCode::SUCCESS,
        Ok(Outcome::Fail) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
