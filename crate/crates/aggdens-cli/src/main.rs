//! Command-line front end: generate hard instances, run estimators on
//! samples, and drive the Monte Carlo experiment suites.
//!
//! Exit codes form the CI contract: 0 on success, 2 on precondition or
//! configuration violations, 3 on solver non-convergence, 4 on a violated
//! statistical bound. The environment variable `AGGDENS_SEED` overrides the
//! base seed of any command, and every output directory receives a
//! `manifest.json` sufficient to rerun the command exactly.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use aggdens::estimators::EstimatorOutput;
use aggdens::{
    check_bernstein, erm_convex_hull, erm_selector, exponential_weights, gen_erm_hull, gen_ew,
    gen_ew2, gen_exp_tail, gen_selector, q_aggregate, run_ew_suboptimality,
    run_hull_comparison, run_selector_experiment, run_tail, sup_norm, tail_bound_p, tail_bound_q,
    validate, weighted_q_aggregate, DensityFunction, Dictionary, EstimatorChoice,
    EstimatorError, ExperimentConfig, ExperimentError, GridFunction, LowerBoundInstance, Prior,
    Sample, SimplexWeights, SolverError,
};

const EXIT_PRECONDITION: u8 = 2;
const EXIT_SOLVER: u8 = 3;
const EXIT_BOUND: u8 = 4;

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn precondition(message: impl Into<String>) -> Self {
        Failure { code: EXIT_PRECONDITION, message: message.into() }
    }

    fn bound(message: impl Into<String>) -> Self {
        Failure { code: EXIT_BOUND, message: message.into() }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::precondition(format!("io error: {e}"))
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::precondition(format!("invalid JSON: {e}"))
    }
}

impl From<aggdens::ConstructionError> for Failure {
    fn from(e: aggdens::ConstructionError) -> Self {
        Failure::precondition(format!("precondition violated: {e}"))
    }
}

impl From<EstimatorError> for Failure {
    fn from(e: EstimatorError) -> Self {
        match e {
            EstimatorError::Solver(SolverError::NotConverged(report)) => Failure {
                code: EXIT_SOLVER,
                message: format!(
                    "solver did not converge: gap {} after {} iterations",
                    report.fw_gap, report.iterations
                ),
            },
            other => Failure::precondition(format!("{other}")),
        }
    }
}

impl From<ExperimentError> for Failure {
    fn from(e: ExperimentError) -> Self {
        match e {
            ExperimentError::Estimator(inner) => inner.into(),
            ExperimentError::Construction(inner) => inner.into(),
            ExperimentError::BadConfig(msg) => Failure::precondition(msg),
        }
    }
}

type CliResult<T> = Result<T, Failure>;

#[derive(Parser)]
#[command(name = "aggdens", version, about = "Density aggregation laboratory")]
struct Cli {
    /// Cap worker threads (default: machine parallelism).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a hard instance, validate it, and write both to a directory.
    Gen(GenArgs),
    /// Draw one sample, run an estimator, and print its excess risk.
    Aggregate(AggregateArgs),
    /// Run an experiment suite described by a JSON config.
    Experiment(ExperimentArgs),
}

#[derive(Args)]
struct GenArgs {
    #[command(subcommand)]
    kind: GenKind,
}

#[derive(Subcommand)]
enum GenKind {
    /// Flat first entry plus γ-perturbations; every entry is a candidate truth.
    ExpTail {
        #[arg(long)]
        m: usize,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0.0)]
        x: f64,
        #[arg(long)]
        level: Option<u32>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Unit-amplitude dictionary against γ-perturbed truths.
    Selector {
        #[arg(long)]
        m: usize,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0.0)]
        x: f64,
        #[arg(long)]
        level: Option<u32>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Uniform truth with 2m+1 orthonormal-direction functions.
    ErmHull {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        m: Option<usize>,
        #[arg(long)]
        level: Option<u32>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Three-function instance with a prior loading the worst entry.
    Ew {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        level: Option<u32>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Two half-interval indicators against a stepped truth (odd n).
    Ew2 {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        level: Option<u32>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct AggregateArgs {
    /// Instance file produced by `gen` (alternative to --dict/--truth).
    #[arg(long, conflicts_with_all = ["dict", "truth"])]
    instance: Option<PathBuf>,
    /// Which candidate truth of the instance generates the sample.
    #[arg(long, default_value_t = 0)]
    truth_index: usize,
    #[arg(long, requires = "truth")]
    dict: Option<PathBuf>,
    #[arg(long, requires = "dict")]
    truth: Option<PathBuf>,
    /// selector | q-agg | ew | erm-hull | weighted-q-agg
    #[arg(long)]
    estimator: String,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long, default_value_t = 0.5)]
    nu: f64,
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    /// Prior weights as a JSON array file; defaults to the instance prior,
    /// else uniform.
    #[arg(long)]
    prior: Option<PathBuf>,
    /// Weight function (grid JSON) for the weighted variant.
    #[arg(long)]
    weight: Option<PathBuf>,
    /// Output directory; omit to print the estimate JSON to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Serialize)]
struct RunManifest {
    command_line: Vec<String>,
    config_hash: Option<String>,
    base_seed: u64,
    version: &'static str,
    duration_seconds: f64,
}

fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

fn write_manifest(
    dir: &Path,
    config_hash: Option<String>,
    base_seed: u64,
    started: Instant,
) -> CliResult<()> {
    let manifest = RunManifest {
        command_line: std::env::args().collect(),
        config_hash,
        base_seed,
        version: env!("CARGO_PKG_VERSION"),
        duration_seconds: started.elapsed().as_secs_f64(),
    };
    write_atomic(&dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)?.as_bytes())
}

fn seed_override(seed: u64) -> CliResult<u64> {
    match std::env::var("AGGDENS_SEED") {
        Ok(value) => value
            .parse::<u64>()
            .map_err(|_| Failure::precondition(format!("AGGDENS_SEED is not a u64: {value}"))),
        Err(_) => Ok(seed),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
            eprintln!("error: could not configure {threads} threads: {e}");
            return ExitCode::from(EXIT_PRECONDITION);
        }
    }
    let outcome = match cli.command {
        Command::Gen(args) => cmd_gen(args),
        Command::Aggregate(args) => cmd_aggregate(args),
        Command::Experiment(args) => cmd_experiment(args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {}", failure.message);
            ExitCode::from(failure.code)
        }
    }
}

fn cmd_gen(args: GenArgs) -> CliResult<()> {
    let started = Instant::now();
    let (instance, out) = match args.kind {
        GenKind::ExpTail { m, n, x, level, out } => {
            (gen_exp_tail(m, n, x, level.unwrap_or(m as u32))?, out)
        }
        GenKind::Selector { m, n, x, level, out } => {
            (gen_selector(m, n, x, level.unwrap_or(m as u32))?, out)
        }
        GenKind::ErmHull { n, m, level, out } => {
            let base_m = m.unwrap_or_else(|| (n as f64).sqrt().ceil() as usize);
            (gen_erm_hull(n, level.unwrap_or(base_m as u32 + 1), m)?, out)
        }
        GenKind::Ew { n, alpha, level, out } => (gen_ew(n, alpha, level.unwrap_or(3))?, out),
        GenKind::Ew2 { n, level, out } => (gen_ew2(n, level.unwrap_or(1))?, out),
    };
    fs::create_dir_all(&out)?;
    let report = validate(&instance);
    write_atomic(&out.join("instance.json"), serde_json::to_string(&instance)?.as_bytes())?;
    write_atomic(
        &out.join("validation.json"),
        serde_json::to_string_pretty(&report)?.as_bytes(),
    )?;
    write_manifest(&out, None, 0, started)?;
    if report.passed() {
        println!("instance written to {}; {} checks passed", out.display(), report.checks.len());
        Ok(())
    } else {
        let failing: Vec<String> = report.failures().map(|c| c.name.clone()).collect();
        Err(Failure::bound(format!("instance validation failed: {}", failing.join(", "))))
    }
}

struct Problem {
    dict: Dictionary,
    truth: DensityFunction,
    prior: Prior,
}

fn load_problem(args: &AggregateArgs) -> CliResult<Problem> {
    let (dict, truth, instance_prior) = if let Some(path) = &args.instance {
        let instance: LowerBoundInstance = serde_json::from_str(&fs::read_to_string(path)?)?;
        let truth = instance
            .true_densities
            .get(args.truth_index)
            .cloned()
            .ok_or_else(|| {
                Failure::precondition(format!(
                    "truth index {} out of range (instance has {} candidate truths)",
                    args.truth_index,
                    instance.true_densities.len()
                ))
            })?;
        (instance.dict, truth, instance.prior)
    } else if let (Some(dict_path), Some(truth_path)) = (&args.dict, &args.truth) {
        let dict: Dictionary = serde_json::from_str(&fs::read_to_string(dict_path)?)?;
        let truth: DensityFunction = serde_json::from_str(&fs::read_to_string(truth_path)?)?;
        (dict, truth, None)
    } else {
        return Err(Failure::precondition(
            "provide either --instance or both --dict and --truth",
        ));
    };
    let prior = match &args.prior {
        Some(path) => {
            let weights: Vec<f64> = serde_json::from_str(&fs::read_to_string(path)?)?;
            Prior::new(SimplexWeights::new(weights).map_err(|e| {
                Failure::precondition(format!("invalid prior: {e}"))
            })?)
            .map_err(|e| Failure::precondition(format!("invalid prior: {e}")))?
        }
        None => instance_prior.unwrap_or_else(|| Prior::uniform(dict.size())),
    };
    if prior.len() != dict.size() {
        return Err(Failure::precondition(format!(
            "prior has {} entries for a dictionary of size {}",
            prior.len(),
            dict.size()
        )));
    }
    Ok(Problem { dict, truth, prior })
}

fn is_uniform(prior: &Prior) -> bool {
    let w = prior.weights();
    w.iter().all(|&p| (p - w[0]).abs() <= 1e-12)
}

/// Resolve the temperature: required for exponential weights and for the
/// penalized estimators under a non-uniform prior; under the uniform prior
/// the minimizer does not depend on it.
fn resolve_beta(args: &AggregateArgs, prior: &Prior, needs_beta_always: bool) -> CliResult<f64> {
    match args.beta {
        Some(beta) if beta > 0.0 => Ok(beta),
        Some(beta) => Err(Failure::precondition(format!(
            "beta must be strictly positive (got {beta})"
        ))),
        None if needs_beta_always => {
            Err(Failure::precondition("--beta is required for this estimator"))
        }
        None if is_uniform(prior) => Ok(1.0),
        None => Err(Failure::precondition(
            "--beta is required under a non-uniform prior",
        )),
    }
}

fn cmd_aggregate(args: AggregateArgs) -> CliResult<()> {
    let started = Instant::now();
    let problem = load_problem(&args)?;
    if args.n == 0 {
        return Err(Failure::precondition("sample size must be at least 1"));
    }
    let seed = seed_override(args.seed)?;
    let sample = Sample::draw(&problem.truth, args.n, seed);
    let output: EstimatorOutput = match args.estimator.as_str() {
        "selector" | "erm-selector" => erm_selector(&problem.dict, &sample),
        "q-agg" | "q-aggregation" => {
            if !(args.nu > 0.0 && args.nu < 1.0) {
                return Err(Failure::precondition(format!(
                    "nu = {} outside the open interval (0, 1)",
                    args.nu
                )));
            }
            let beta = resolve_beta(&args, &problem.prior, false)?;
            q_aggregate(&problem.dict, &sample, &problem.prior, beta, args.nu, args.tol)?
        }
        "ew" | "exponential-weights" => {
            let beta = resolve_beta(&args, &problem.prior, true)?;
            exponential_weights(&problem.dict, &sample, &problem.prior, beta)?
        }
        "erm-hull" | "erm-convex-hull" => erm_convex_hull(&problem.dict, &sample, args.tol)?,
        "weighted-q-agg" | "weighted-q-aggregation" => {
            let beta = resolve_beta(&args, &problem.prior, false)?;
            let weight_path = args.weight.as_ref().ok_or_else(|| {
                Failure::precondition("--weight is required for the weighted variant")
            })?;
            let weight: GridFunction = serde_json::from_str(&fs::read_to_string(weight_path)?)?;
            weighted_q_aggregate(&problem.dict, &sample, &problem.prior, beta, &weight, args.tol)?
        }
        other => {
            return Err(Failure::precondition(format!(
                "unknown estimator {other:?}; expected selector, q-agg, ew, erm-hull, or \
                 weighted-q-agg"
            )));
        }
    };
    let excess = aggdens::excess_risk(&output, &problem.dict, &problem.truth);
    let json = serde_json::to_string_pretty(&output)?;
    match &args.out {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            write_atomic(&dir.join("estimate.json"), json.as_bytes())?;
            write_manifest(dir, None, seed, started)?;
        }
        None => println!("{json}"),
    }
    println!("excess_risk = {excess}");
    Ok(())
}

// ---------------------------------------------------------------------------
// Experiment suites
// ---------------------------------------------------------------------------

#[derive(Deserialize)]
struct SuiteHeader {
    suite: String,
}

#[derive(Deserialize)]
struct EstimatorSpec {
    name: String,
    beta: Option<f64>,
    nu: Option<f64>,
    tol: Option<f64>,
}

#[derive(Deserialize)]
struct BoundSpec {
    threshold_index: usize,
    max_prob: f64,
}

#[derive(Deserialize)]
struct TailSuite {
    instance_path: Option<PathBuf>,
    dict_path: Option<PathBuf>,
    truth_path: Option<PathBuf>,
    #[serde(default)]
    truth_index: usize,
    estimator: EstimatorSpec,
    prior: Option<Vec<f64>>,
    n: usize,
    replications: usize,
    #[serde(default)]
    base_seed: u64,
    thresholds: Vec<f64>,
    #[serde(default)]
    bounds: Vec<BoundSpec>,
    /// Sup-norm scale for the closed-form envelope columns; defaults to the
    /// sup-norm of the truth.
    tail_l: Option<f64>,
}

#[derive(Deserialize)]
struct DeviationSuite {
    #[serde(default = "default_reps")]
    replications: usize,
    #[serde(default)]
    base_seed: u64,
}

fn default_reps() -> usize {
    2000
}

#[derive(Deserialize)]
struct EwSuite {
    #[serde(default = "default_ew_ns")]
    n_list: Vec<usize>,
    #[serde(default = "default_reps")]
    replications: usize,
    #[serde(default)]
    base_seed: u64,
    beta: Option<f64>,
    /// Lower bound asserted on the exponential-weights exceedance at every n.
    ew_min: Option<f64>,
    /// Upper bound asserted on the aggregation exceedance for n ≥ q_min_n.
    q_max: Option<f64>,
    #[serde(default = "default_q_min_n")]
    q_min_n: usize,
}

fn default_ew_ns() -> Vec<usize> {
    vec![100, 400, 1600]
}

fn default_q_min_n() -> usize {
    400
}

#[derive(Deserialize)]
struct SelectorSuite {
    m: usize,
    n: usize,
    #[serde(default)]
    x: f64,
    #[serde(default = "default_reps")]
    replications: usize,
    #[serde(default)]
    base_seed: u64,
}

#[derive(Deserialize)]
struct BernsteinSuite {
    #[serde(default = "default_bernstein_n")]
    n: usize,
    #[serde(default = "default_reps")]
    replications: usize,
    x_grid: Option<Vec<f64>>,
    beta: Option<f64>,
    #[serde(default)]
    base_seed: u64,
}

fn default_bernstein_n() -> usize {
    500
}

#[derive(Deserialize)]
struct HullSuite {
    n: usize,
    m: Option<usize>,
    level: Option<u32>,
    #[serde(default = "default_hull_reps")]
    replications: usize,
    tol: Option<f64>,
    /// Assert hull_median >= min_ratio * q_median when set.
    min_ratio: Option<f64>,
    #[serde(default)]
    base_seed: u64,
}

fn default_hull_reps() -> usize {
    500
}

fn cmd_experiment(args: ExperimentArgs) -> CliResult<()> {
    let started = Instant::now();
    let raw = fs::read_to_string(&args.config)?;
    let config_hash: String =
        Sha256::digest(raw.as_bytes()).iter().map(|b| format!("{b:02x}")).collect();
    let header: SuiteHeader = serde_json::from_str(&raw)?;
    fs::create_dir_all(&args.out)?;
    let base_seed = match header.suite.as_str() {
        "tail" => run_tail_suite(serde_json::from_str(&raw)?, &args.out)?,
        "msoi-n500" => run_deviation_suite(serde_json::from_str(&raw)?, &args.out, true)?,
        "ermoi-n500" => run_deviation_suite(serde_json::from_str(&raw)?, &args.out, false)?,
        "ew-subopt" => run_ew_suite(serde_json::from_str(&raw)?, &args.out)?,
        "selector" => run_selector_suite(serde_json::from_str(&raw)?, &args.out)?,
        "bernstein" => run_bernstein_suite(serde_json::from_str(&raw)?, &args.out)?,
        "hull-q" => run_hull_suite(serde_json::from_str(&raw)?, &args.out)?,
        other => {
            return Err(Failure::precondition(format!(
                "unknown suite {other:?}; expected tail, msoi-n500, ermoi-n500, ew-subopt, \
                 selector, bernstein, or hull-q"
            )));
        }
    };
    write_manifest(&args.out, Some(config_hash), base_seed, started)?;
    println!("experiment complete; outputs in {}", args.out.display());
    Ok(())
}

fn parse_estimator(spec: &EstimatorSpec, prior: &Prior) -> CliResult<EstimatorChoice> {
    let tol = spec.tol.unwrap_or(aggdens::DEFAULT_TOL);
    match spec.name.as_str() {
        "selector" | "erm-selector" => Ok(EstimatorChoice::ErmSelector),
        "q-agg" | "q-aggregation" => {
            let nu = spec.nu.unwrap_or(0.5);
            let beta = match spec.beta {
                Some(b) => b,
                None if is_uniform(prior) => 1.0,
                None => {
                    return Err(Failure::precondition(
                        "estimator beta is required under a non-uniform prior",
                    ))
                }
            };
            Ok(EstimatorChoice::QAggregation { beta, nu, tol })
        }
        "ew" | "exponential-weights" => {
            let beta = spec.beta.ok_or_else(|| {
                Failure::precondition("estimator beta is required for exponential weights")
            })?;
            Ok(EstimatorChoice::ExponentialWeights { beta })
        }
        "erm-hull" | "erm-convex-hull" => Ok(EstimatorChoice::ErmConvexHull { tol }),
        other => Err(Failure::precondition(format!("unknown estimator {other:?}"))),
    }
}

fn write_tail_outputs(
    out: &Path,
    estimate: &aggdens::TailEstimate,
    estimator_label: &str,
    n: usize,
    m: usize,
    l: f64,
) -> CliResult<()> {
    let mut tail_csv = String::from("t,exceed_prob,ci_low,ci_high,bound_p,bound_q\n");
    for (i, &t) in estimate.thresholds.iter().enumerate() {
        tail_csv.push_str(&format!(
            "{},{},{},{},{},{}\n",
            t,
            estimate.exceed_prob[i],
            estimate.ci_low[i],
            estimate.ci_high[i],
            tail_bound_p(t, n, m, l),
            tail_bound_q(t, n, m, l),
        ));
    }
    write_atomic(&out.join("tail.csv"), tail_csv.as_bytes())?;
    let mut raw_csv = String::from("replication,estimator,excess_risk\n");
    if let Some(excesses) = &estimate.excess_samples {
        for (r, excess) in excesses.iter().enumerate() {
            raw_csv.push_str(&format!("{r},{estimator_label},{excess}\n"));
        }
    }
    write_atomic(&out.join("raw.csv"), raw_csv.as_bytes())?;
    Ok(())
}

fn check_bounds(estimate: &aggdens::TailEstimate, bounds: &[BoundSpec]) -> CliResult<()> {
    let mut violations = Vec::new();
    for bound in bounds {
        match estimate.exceed_prob.get(bound.threshold_index) {
            Some(&p) if p > bound.max_prob => violations.push(format!(
                "threshold {} (t = {}): exceedance {} > allowed {}",
                bound.threshold_index,
                estimate.thresholds[bound.threshold_index],
                p,
                bound.max_prob
            )),
            Some(_) => {}
            None => {
                return Err(Failure::precondition(format!(
                    "bound refers to threshold index {} but only {} thresholds exist",
                    bound.threshold_index,
                    estimate.thresholds.len()
                )))
            }
        }
    }
    if violations.is_empty() {
        Ok(())
    } else {
        Err(Failure::bound(format!("bound violations: {}", violations.join("; "))))
    }
}

fn run_tail_suite(suite: TailSuite, out: &Path) -> CliResult<u64> {
    let (dict, truth, instance_prior) = if let Some(path) = &suite.instance_path {
        let instance: LowerBoundInstance = serde_json::from_str(&fs::read_to_string(path)?)?;
        let truth = instance
            .true_densities
            .get(suite.truth_index)
            .cloned()
            .ok_or_else(|| Failure::precondition("truth_index out of range"))?;
        (instance.dict, truth, instance.prior)
    } else if let (Some(dict_path), Some(truth_path)) = (&suite.dict_path, &suite.truth_path) {
        (
            serde_json::from_str(&fs::read_to_string(dict_path)?)?,
            serde_json::from_str(&fs::read_to_string(truth_path)?)?,
            None,
        )
    } else {
        return Err(Failure::precondition(
            "tail suite needs instance_path or dict_path + truth_path",
        ));
    };
    let prior = match &suite.prior {
        Some(weights) => Prior::new(
            SimplexWeights::new(weights.clone())
                .map_err(|e| Failure::precondition(format!("invalid prior: {e}")))?,
        )
        .map_err(|e| Failure::precondition(format!("invalid prior: {e}")))?,
        None => instance_prior.unwrap_or_else(|| Prior::uniform(dict.size())),
    };
    let estimator = parse_estimator(&suite.estimator, &prior)?;
    let base_seed = seed_override(suite.base_seed)?;
    let label = estimator.label();
    let m = dict.size();
    let l = suite.tail_l.unwrap_or_else(|| sup_norm(truth.as_grid()));
    let cfg = ExperimentConfig {
        dict,
        truth,
        prior,
        estimator,
        n: suite.n,
        replications: suite.replications,
        base_seed,
        thresholds: suite.thresholds.clone(),
        keep_excess: true,
    };
    let estimate = run_tail(&cfg)?;
    write_tail_outputs(out, &estimate, label, suite.n, m, l)?;
    check_bounds(&estimate, &suite.bounds)?;
    Ok(base_seed)
}

/// The fixed deviation benchmark: uniform truth against sixteen half-height
/// perturbations at n = 500, checked against exp(-x) plus three binomial
/// standard errors for x in {0, 1, 2, 3}.
fn run_deviation_suite(suite: DeviationSuite, out: &Path, aggregation: bool) -> CliResult<u64> {
    let eps = aggdens::rademacher_system(16, 16)
        .expect("level-16 grid holds sixteen sign functions");
    let one = GridFunction::constant(16, 1.0).expect("constant grid");
    let dict = Dictionary::new(
        eps.iter().map(|e| one.add(&e.scale(0.5))).collect(),
        1.5,
    )
    .map_err(|e| Failure::precondition(format!("{e}")))?;
    let truth = DensityFunction::uniform(16).expect("uniform density");
    let n = 500usize;
    let beta = 10.0;
    let l0 = 1.5;
    let log_m = 16.0f64.ln();
    let xs = [0.0, 1.0, 2.0, 3.0];
    let thresholds: Vec<f64> = xs
        .iter()
        .map(|&x| {
            if aggregation {
                beta * (log_m + x) / n as f64
            } else {
                let budget = (x + log_m) / n as f64;
                l0 * (4.0 * 2.0f64.sqrt() * budget.sqrt() + 8.0 * budget / 3.0)
            }
        })
        .collect();
    let estimator = if aggregation {
        EstimatorChoice::QAggregation { beta, nu: 0.5, tol: 1e-9 }
    } else {
        EstimatorChoice::ErmSelector
    };
    let base_seed = seed_override(suite.base_seed)?;
    let label = estimator.label();
    let cfg = ExperimentConfig {
        dict,
        truth,
        prior: Prior::uniform(16),
        estimator,
        n,
        replications: suite.replications,
        base_seed,
        thresholds,
        keep_excess: true,
    };
    let estimate = run_tail(&cfg)?;
    write_tail_outputs(out, &estimate, label, n, 16, 1.5)?;
    let bounds: Vec<BoundSpec> = xs
        .iter()
        .enumerate()
        .map(|(i, &x)| BoundSpec {
            threshold_index: i,
            max_prob: (-x).exp() + 3.0 * ((-x).exp() / suite.replications as f64).sqrt(),
        })
        .collect();
    check_bounds(&estimate, &bounds)?;
    Ok(base_seed)
}

fn run_ew_suite(suite: EwSuite, out: &Path) -> CliResult<u64> {
    let base_seed = seed_override(suite.base_seed)?;
    let report = run_ew_suboptimality(&suite.n_list, suite.replications, suite.beta, base_seed)?;
    let mut csv = String::from(
        "n,beta,threshold,ew_exceed,ew_ci_low,ew_ci_high,q_exceed,q_ci_low,q_ci_high,event_e_freq\n",
    );
    for row in &report.rows {
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            row.n,
            row.beta,
            row.threshold,
            row.ew_exceed,
            row.ew_ci.0,
            row.ew_ci.1,
            row.q_exceed,
            row.q_ci.0,
            row.q_ci.1,
            row.event_e_freq,
        ));
    }
    write_atomic(&out.join("ew.csv"), csv.as_bytes())?;
    let mut violations = Vec::new();
    for row in &report.rows {
        if let Some(ew_min) = suite.ew_min {
            if row.ew_exceed < ew_min {
                violations.push(format!(
                    "n={}: exponential-weights exceedance {} < required {}",
                    row.n, row.ew_exceed, ew_min
                ));
            }
        }
        if let Some(q_max) = suite.q_max {
            if row.n >= suite.q_min_n && row.q_exceed > q_max {
                violations.push(format!(
                    "n={}: aggregation exceedance {} > allowed {}",
                    row.n, row.q_exceed, q_max
                ));
            }
        }
    }
    if violations.is_empty() {
        Ok(base_seed)
    } else {
        Err(Failure::bound(format!("bound violations: {}", violations.join("; "))))
    }
}

fn run_selector_suite(suite: SelectorSuite, out: &Path) -> CliResult<u64> {
    let base_seed = seed_override(suite.base_seed)?;
    let report = run_selector_experiment(suite.m, suite.n, suite.x, suite.replications, base_seed)?;
    let mut csv = String::from("truth_index,lower_exceed,upper_exceed\n");
    for row in &report.per_truth {
        csv.push_str(&format!("{},{},{}\n", row.truth_index, row.lower_exceed, row.upper_exceed));
    }
    write_atomic(&out.join("selector.csv"), csv.as_bytes())?;
    write_atomic(&out.join("selector.json"), serde_json::to_string_pretty(&report)?.as_bytes())?;
    if report.max_upper_exceed > report.upper_bound {
        return Err(Failure::bound(format!(
            "selector deviation bound violated: {} > {}",
            report.max_upper_exceed, report.upper_bound
        )));
    }
    Ok(base_seed)
}

fn run_bernstein_suite(suite: BernsteinSuite, out: &Path) -> CliResult<u64> {
    let base_seed = seed_override(suite.base_seed)?;
    let eps = aggdens::rademacher_system(2, 2).expect("level-2 sign functions");
    let g = eps[0].add(&eps[1]);
    let truth = DensityFunction::uniform(2).expect("uniform density");
    let x_grid = suite.x_grid.unwrap_or_else(|| aggdens::experiments::DEFAULT_X_GRID.to_vec());
    let beta = suite.beta.unwrap_or(20.0 / 3.0);
    let report =
        check_bernstein(&g, &truth, suite.n, suite.replications, &x_grid, beta, base_seed);
    let mut csv = String::from("x,bernstein_empirical,stochastic_empirical,bound,passed\n");
    for row in &report.rows {
        csv.push_str(&format!(
            "{},{},{},{},{}\n",
            row.x, row.bernstein_empirical, row.stochastic_empirical, row.bound, row.passed
        ));
    }
    write_atomic(&out.join("bernstein.csv"), csv.as_bytes())?;
    if report.passed() {
        Ok(base_seed)
    } else {
        Err(Failure::bound("a concentration bound was violated"))
    }
}

fn run_hull_suite(suite: HullSuite, out: &Path) -> CliResult<u64> {
    let base_seed = seed_override(suite.base_seed)?;
    let base_m = suite.m.unwrap_or_else(|| (suite.n as f64).sqrt().ceil() as usize);
    let level = suite.level.unwrap_or(base_m as u32 + 1);
    let instance = gen_erm_hull(suite.n, level, suite.m)?;
    let report = run_hull_comparison(
        &instance,
        suite.replications,
        suite.tol.unwrap_or(aggdens::DEFAULT_TOL),
        base_seed,
    )?;
    let mut csv = String::from(
        "n,m,dictionary_size,replications,hull_median,q_median,hull_mean,q_mean\n",
    );
    csv.push_str(&format!(
        "{},{},{},{},{},{},{},{}\n",
        report.n,
        report.m,
        report.dictionary_size,
        report.replications,
        report.hull_median,
        report.q_median,
        report.hull_mean,
        report.q_mean,
    ));
    write_atomic(&out.join("hull.csv"), csv.as_bytes())?;
    if let Some(ratio) = suite.min_ratio {
        if report.hull_median < ratio * report.q_median {
            return Err(Failure::bound(format!(
                "hull median {} below {ratio} x aggregation median {}",
                report.hull_median, report.q_median
            )));
        }
    }
    Ok(base_seed)
}
