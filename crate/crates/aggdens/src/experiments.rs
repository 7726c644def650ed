//! Monte Carlo verification harness: deviation-tail estimation for the
//! estimators, concentration spot checks, and the closed-form tail
//! envelopes they are compared against.
//!
//! Replications are independent and evaluated in parallel; per-replication
//! seeds come from a fixed splitting rule applied to the base seed, so a run
//! is bit-for-bit reproducible regardless of scheduling. Estimator failures
//! abort the run rather than censoring replications, which would bias the
//! tail estimates downward.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::constructions::{gen_ew, gen_selector, ConstructionError, LowerBoundInstance};
use crate::estimators::{
    default_beta, empirical_risks, erm_convex_hull, erm_selector, exponential_weights,
    q_aggregate, EstimatorError, EstimatorOutput,
};
use crate::grid::{inner_product, norm_sq, sup_norm, DensityFunction, GridFunction};
use crate::risk::{risk, Dictionary, Prior, Sample};

/// Default deviation grid: `exp(-3) ≈ 0.05` stays resolvable at a few
/// thousand replications.
pub const DEFAULT_X_GRID: [f64; 4] = [0.0, 1.0, 2.0, 3.0];

/// 95% normal quantile used by the Wilson intervals.
const WILSON_Z: f64 = 1.959963984540054;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid experiment config: {0}")]
    BadConfig(String),
    #[error(transparent)]
    Estimator(#[from] EstimatorError),
    #[error(transparent)]
    Construction(#[from] ConstructionError),
}

/// Which estimator a tail run evaluates, with its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case")]
pub enum EstimatorChoice {
    ErmSelector,
    QAggregation { beta: f64, nu: f64, tol: f64 },
    ExponentialWeights { beta: f64 },
    ErmConvexHull { tol: f64 },
}

impl EstimatorChoice {
    pub fn label(&self) -> &'static str {
        match self {
            EstimatorChoice::ErmSelector => "erm-selector",
            EstimatorChoice::QAggregation { .. } => "q-aggregation",
            EstimatorChoice::ExponentialWeights { .. } => "exponential-weights",
            EstimatorChoice::ErmConvexHull { .. } => "erm-convex-hull",
        }
    }

    pub fn run(
        &self,
        dict: &Dictionary,
        s: &Sample,
        prior: &Prior,
    ) -> Result<EstimatorOutput, EstimatorError> {
        match *self {
            EstimatorChoice::ErmSelector => Ok(erm_selector(dict, s)),
            EstimatorChoice::QAggregation { beta, nu, tol } => {
                q_aggregate(dict, s, prior, beta, nu, tol)
            }
            EstimatorChoice::ExponentialWeights { beta } => {
                exponential_weights(dict, s, prior, beta)
            }
            EstimatorChoice::ErmConvexHull { tol } => erm_convex_hull(dict, s, tol),
        }
    }
}

/// A tail experiment: the data-generating truth, the dictionary, the
/// estimator under test, and the exceedance thresholds to resolve.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub dict: Dictionary,
    pub truth: DensityFunction,
    pub prior: Prior,
    pub estimator: EstimatorChoice,
    pub n: usize,
    pub replications: usize,
    pub base_seed: u64,
    /// Must be sorted ascending.
    pub thresholds: Vec<f64>,
    /// Retain the per-replication excess risks on the estimate.
    pub keep_excess: bool,
}

/// Empirical exceedance curve with 95% Wilson bands.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailEstimate {
    pub thresholds: Vec<f64>,
    pub exceed_prob: Vec<f64>,
    pub ci_low: Vec<f64>,
    pub ci_high: Vec<f64>,
    pub replications: usize,
    pub excess_samples: Option<Vec<f64>>,
}

/// The fixed per-replication seed splitting rule (a SplitMix64 step), so
/// distinct replication indices never share an RNG stream.
pub fn replication_seed(base_seed: u64, replication: u64) -> u64 {
    let mut z = base_seed
        .wrapping_add(replication.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// 95% Wilson score interval for a binomial proportion.
pub fn wilson_interval(successes: usize, trials: usize) -> (f64, f64) {
    assert!(trials > 0);
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = WILSON_Z * WILSON_Z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = WILSON_Z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Run the estimator over `replications` independent samples and estimate
/// `P(excess risk > t)` for each threshold. Excess risks are computed with
/// exact integrals, so the replication count is the only source of tail
/// resolution (smallest resolvable probability is about `1/R`).
pub fn run_tail(cfg: &ExperimentConfig) -> Result<TailEstimate, ExperimentError> {
    if cfg.replications == 0 {
        return Err(ExperimentError::BadConfig("replications must be >= 1".into()));
    }
    if cfg.n == 0 {
        return Err(ExperimentError::BadConfig("sample size must be >= 1".into()));
    }
    if cfg.thresholds.windows(2).any(|w| w[0] > w[1]) {
        return Err(ExperimentError::BadConfig("thresholds must be sorted ascending".into()));
    }
    let best_risk = cfg
        .dict
        .functions()
        .iter()
        .map(|f| risk(f, &cfg.truth))
        .fold(f64::INFINITY, f64::min);
    let excesses: Vec<f64> = (0..cfg.replications)
        .into_par_iter()
        .map(|r| {
            let seed = replication_seed(cfg.base_seed, r as u64);
            let s = Sample::draw(&cfg.truth, cfg.n, seed);
            let out = cfg.estimator.run(&cfg.dict, &s, &cfg.prior)?;
            Ok(risk(&out.aggregate, &cfg.truth) - best_risk)
        })
        .collect::<Result<_, EstimatorError>>()?;
    Ok(tail_from_excesses(&cfg.thresholds, &excesses, cfg.keep_excess))
}

fn tail_from_excesses(thresholds: &[f64], excesses: &[f64], keep: bool) -> TailEstimate {
    let r = excesses.len();
    let mut exceed_prob = Vec::with_capacity(thresholds.len());
    let mut ci_low = Vec::with_capacity(thresholds.len());
    let mut ci_high = Vec::with_capacity(thresholds.len());
    for &t in thresholds {
        let count = excesses.iter().filter(|&&e| e > t).count();
        let (lo, hi) = wilson_interval(count, r);
        exceed_prob.push(count as f64 / r as f64);
        ci_low.push(lo);
        ci_high.push(hi);
    }
    TailEstimate {
        thresholds: thresholds.to_vec(),
        exceed_prob,
        ci_low,
        ci_high,
        replications: r,
        excess_samples: if keep { Some(excesses.to_vec()) } else { None },
    }
}

/// Closed-form exceedance envelope for arbitrary estimators:
/// `M exp(-3tn/(20L))` on `[0, L]`, zero outside.
pub fn tail_bound_p(t: f64, n: usize, m: usize, l: f64) -> f64 {
    if !(0.0..=l).contains(&t) {
        return 0.0;
    }
    m as f64 * (-3.0 * t * n as f64 / (20.0 * l)).exp()
}

/// Closed-form exceedance envelope for selectors:
/// `M exp(-t²n / (L²(4√2 + 8/3)²))` on `[0, L]`, zero outside.
pub fn tail_bound_q(t: f64, n: usize, m: usize, l: f64) -> f64 {
    if !(0.0..=l).contains(&t) {
        return 0.0;
    }
    let c = l * (4.0 * 2.0f64.sqrt() + 8.0 / 3.0);
    m as f64 * (-t * t * n as f64 / (c * c)).exp()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BernsteinRow {
    pub x: f64,
    pub bernstein_empirical: f64,
    pub stochastic_empirical: f64,
    pub bound: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BernsteinReport {
    pub replications: usize,
    pub n: usize,
    pub rows: Vec<BernsteinRow>,
}

impl BernsteinReport {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.passed)
    }
}

/// Empirical check of the Bernstein-type tail for sums `Σ_i g(X_i)` and of
/// the one-sided centered-process bound used by the aggregation analysis.
///
/// For each `x` in the grid, estimates over `reps` replications
///
/// ```text
/// P( Σ(Y_i - E Y_i)      > √(2xv) + bx/3 )            (sum tail)
/// P( (P-P_n)g - ‖g‖²/8   > βx/n          )            (centered process)
/// ```
///
/// and requires both frequencies to stay below `exp(-x)` plus three binomial
/// standard errors. The centered-process event needs `‖g‖_∞ ≤ 4L_0` and
/// `β = 4L + 8L_0/3` on the caller's side.
pub fn check_bernstein(
    g: &GridFunction,
    f_true: &DensityFunction,
    n: usize,
    reps: usize,
    x_grid: &[f64],
    beta: f64,
    seed: u64,
) -> BernsteinReport {
    assert!(n >= 1 && reps >= 1);
    let mean_g = inner_product(g, f_true.as_grid());
    let var_g = inner_product(&g.mul(g), f_true.as_grid()) - mean_g * mean_g;
    let v = n as f64 * var_g;
    let b = sup_norm(&g.sub(&GridFunction::constant(g.level(), mean_g).unwrap()));
    let norm_g = norm_sq(g);
    let counts: Vec<(usize, usize)> = x_grid
        .iter()
        .map(|&x| {
            let sum_threshold = (2.0 * x * v).sqrt() + b * x / 3.0;
            let process_threshold = beta * x / n as f64;
            let (a, c) = (0..reps)
                .into_par_iter()
                .map(|r| {
                    let s = f_true.sample(n, replication_seed(seed, r as u64));
                    let total: f64 = s.iter().map(|&p| g.eval(p)).sum();
                    let centered = total - n as f64 * mean_g;
                    let zeta = (mean_g - total / n as f64) - norm_g / 8.0;
                    (
                        usize::from(centered > sum_threshold),
                        usize::from(zeta > process_threshold),
                    )
                })
                .reduce(|| (0, 0), |l, r| (l.0 + r.0, l.1 + r.1));
            (a, c)
        })
        .collect();
    let rows = x_grid
        .iter()
        .zip(counts)
        .map(|(&x, (sum_count, process_count))| {
            let bound = (-x).exp() + 3.0 * ((-x).exp() / reps as f64).sqrt();
            let bernstein_empirical = sum_count as f64 / reps as f64;
            let stochastic_empirical = process_count as f64 / reps as f64;
            BernsteinRow {
                x,
                bernstein_empirical,
                stochastic_empirical,
                bound,
                passed: bernstein_empirical <= bound && stochastic_empirical <= bound,
            }
        })
        .collect();
    BernsteinReport { replications: reps, n, rows }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EwSuboptRow {
    pub n: usize,
    pub beta: f64,
    pub threshold: f64,
    pub ew_exceed: f64,
    pub ew_ci: (f64, f64),
    pub q_exceed: f64,
    pub q_ci: (f64, f64),
    pub event_e_freq: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EwSuboptReport {
    pub replications: usize,
    pub rows: Vec<EwSuboptRow>,
}

/// Exponential weights against penalized aggregation on the three-function
/// hard instance, sharing samples. Reports the frequency of excess risk at
/// least `1/(4√n)` for both estimators, and the frequency of the empirical
/// ordering event that drives the construction
/// (`R_n(f_2) + 2/√n ≤ R_n(f_1)`).
///
/// `beta = None` uses `default_beta(1, 3 + 1/√n + α/√n, 1/2)` per `n`.
pub fn run_ew_suboptimality(
    n_list: &[usize],
    reps: usize,
    beta: Option<f64>,
    seed: u64,
) -> Result<EwSuboptReport, ExperimentError> {
    let mut rows = Vec::with_capacity(n_list.len());
    for &n in n_list {
        let inst = gen_ew(n, None, 3)?;
        let sqrt_n = (n as f64).sqrt();
        let alpha = inst.params.alpha.expect("ew instance records alpha");
        let beta_n =
            beta.unwrap_or_else(|| default_beta(1.0, 3.0 + 1.0 / sqrt_n + alpha / sqrt_n, 0.5));
        let threshold = 1.0 / (4.0 * sqrt_n);
        let prior = inst.prior.as_ref().expect("ew instance carries its prior");
        let truth = &inst.true_densities[0];
        let best_risk = inst
            .dict
            .functions()
            .iter()
            .map(|f| risk(f, truth))
            .fold(f64::INFINITY, f64::min);
        let per_rep: Vec<(bool, bool, bool)> = (0..reps)
            .into_par_iter()
            .map(|r| {
                let s = Sample::draw(truth, n, replication_seed(seed, r as u64));
                let ew = exponential_weights(&inst.dict, &s, prior, beta_n)?;
                let q = q_aggregate(&inst.dict, &s, prior, beta_n, 0.5, 1e-9)?;
                let ew_excess = risk(&ew.aggregate, truth) - best_risk;
                let q_excess = risk(&q.aggregate, truth) - best_risk;
                let risks = empirical_risks(&inst.dict, &s);
                let event_e = risks[1] + 2.0 / sqrt_n <= risks[0];
                Ok((ew_excess >= threshold, q_excess >= threshold, event_e))
            })
            .collect::<Result<_, EstimatorError>>()?;
        let ew_count = per_rep.iter().filter(|t| t.0).count();
        let q_count = per_rep.iter().filter(|t| t.1).count();
        let e_count = per_rep.iter().filter(|t| t.2).count();
        rows.push(EwSuboptRow {
            n,
            beta: beta_n,
            threshold,
            ew_exceed: ew_count as f64 / reps as f64,
            ew_ci: wilson_interval(ew_count, reps),
            q_exceed: q_count as f64 / reps as f64,
            q_ci: wilson_interval(q_count, reps),
            event_e_freq: e_count as f64 / reps as f64,
        });
    }
    Ok(EwSuboptReport { replications: reps, rows })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelectorTruthRow {
    pub truth_index: usize,
    pub lower_exceed: f64,
    pub upper_exceed: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelectorExperimentReport {
    pub m: usize,
    pub n: usize,
    pub x: f64,
    pub gamma: f64,
    pub replications: usize,
    /// Excess of any wrong selection: `Lγ = 2γ` at this normalization.
    pub lower_threshold: f64,
    /// The selector deviation envelope at the same `x`.
    pub upper_threshold: f64,
    /// `exp(-x)` plus three binomial standard errors.
    pub upper_bound: f64,
    pub max_lower_exceed: f64,
    pub max_upper_exceed: f64,
    pub per_truth: Vec<SelectorTruthRow>,
}

/// Run the discrete empirical risk minimizer on the selector hard instance
/// under each candidate truth. The lower side reports how often the excess
/// reaches the wrong-selection cost `Lγ`; the upper side checks the
/// deviation bound `L_0(4√2 √((x+log M)/n) + 8(x+log M)/(3n))`.
pub fn run_selector_experiment(
    m: usize,
    n: usize,
    x: f64,
    reps: usize,
    seed: u64,
) -> Result<SelectorExperimentReport, ExperimentError> {
    let inst = gen_selector(m, n, x, m as u32)?;
    let gamma = inst.params.gamma.expect("selector instance records gamma");
    let lower_threshold = 2.0 * gamma;
    let budget = (x + (m as f64).ln()) / n as f64;
    let l0 = inst.dict.l0_bound();
    let upper_threshold = l0 * (4.0 * 2.0f64.sqrt() * budget.sqrt() + 8.0 * budget / 3.0);
    let upper_bound = (-x).exp() + 3.0 * ((-x).exp() / reps as f64).sqrt();
    let mut per_truth = Vec::with_capacity(m);
    for j in 0..m {
        let truth = &inst.true_densities[j];
        let best_risk = inst
            .dict
            .functions()
            .iter()
            .map(|f| risk(f, truth))
            .fold(f64::INFINITY, f64::min);
        let counts: (usize, usize) = (0..reps)
            .into_par_iter()
            .map(|r| {
                let s = Sample::draw(truth, n, replication_seed(seed ^ j as u64, r as u64));
                let out = erm_selector(&inst.dict, &s);
                let excess = risk(&out.aggregate, truth) - best_risk;
                // The `≥` comparison tolerates one ulp around the exact
                // wrong-selection cost.
                (
                    usize::from(excess >= lower_threshold - 1e-12),
                    usize::from(excess > upper_threshold),
                )
            })
            .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
        per_truth.push(SelectorTruthRow {
            truth_index: j,
            lower_exceed: counts.0 as f64 / reps as f64,
            upper_exceed: counts.1 as f64 / reps as f64,
        });
    }
    let max_lower = per_truth.iter().map(|r| r.lower_exceed).fold(0.0, f64::max);
    let max_upper = per_truth.iter().map(|r| r.upper_exceed).fold(0.0, f64::max);
    Ok(SelectorExperimentReport {
        m,
        n,
        x,
        gamma,
        replications: reps,
        lower_threshold,
        upper_threshold,
        upper_bound,
        max_lower_exceed: max_lower,
        max_upper_exceed: max_upper,
        per_truth,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HullComparisonReport {
    pub n: usize,
    pub m: usize,
    pub dictionary_size: usize,
    pub replications: usize,
    pub hull_median: f64,
    pub q_median: f64,
    pub hull_mean: f64,
    pub q_mean: f64,
}

/// Empirical risk minimization over the hull against penalized aggregation
/// on the orthonormal-direction instance, on shared samples.
pub fn run_hull_comparison(
    inst: &LowerBoundInstance,
    reps: usize,
    tol: f64,
    seed: u64,
) -> Result<HullComparisonReport, ExperimentError> {
    let truth = &inst.true_densities[0];
    let prior = Prior::uniform(inst.dict.size());
    let beta = default_beta(1.0, inst.dict.l0_bound(), 0.5);
    let n = inst.params.n;
    let best_risk = inst
        .dict
        .functions()
        .iter()
        .map(|f| risk(f, truth))
        .fold(f64::INFINITY, f64::min);
    let pairs: Vec<(f64, f64)> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let s = Sample::draw(truth, n, replication_seed(seed, r as u64));
            let hull = erm_convex_hull(&inst.dict, &s, tol)?;
            let q = q_aggregate(&inst.dict, &s, &prior, beta, 0.5, tol)?;
            Ok((
                risk(&hull.aggregate, truth) - best_risk,
                risk(&q.aggregate, truth) - best_risk,
            ))
        })
        .collect::<Result<_, EstimatorError>>()?;
    let hull: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let q: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    Ok(HullComparisonReport {
        n,
        m: inst.params.m,
        dictionary_size: inst.dict.size(),
        replications: reps,
        hull_median: median(&hull),
        q_median: median(&q),
        hull_mean: hull.iter().sum::<f64>() / reps as f64,
        q_mean: q.iter().sum::<f64>() / reps as f64,
    })
}

/// Median of a nonempty slice (mean of the middle pair for even lengths).
pub fn median(values: &[f64]) -> f64 {
    assert!(!values.is_empty());
    let mut sorted = values.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    let mid = sorted.len() / 2;
    if sorted.len() % 2 == 1 {
        sorted[mid]
    } else {
        0.5 * (sorted[mid - 1] + sorted[mid])
    }
}
