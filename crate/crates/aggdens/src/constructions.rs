//! Deterministic generators for the hard instances behind each lower bound,
//! together with a validator that re-measures every identity the instances
//! are supposed to satisfy.
//!
//! All constructions live on `[0, 1]` after the homogeneity rescaling of the
//! original supports; the nominal sup-norm scale is recorded in
//! [`InstanceParams::l`] so experiments can rescale reported thresholds.
//! Identical parameters produce bit-identical instances.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{norm_sq, rademacher_system, DensityFunction, GridFunction};
use crate::risk::{chi2_divergence, kl_divergence, risk, Dictionary, Prior, RiskError, SimplexWeights};

/// Risk quantities of the half-interval instance are 4x their nominal
/// values: compressing the support by 4 scales squared norms and risks by
/// the same homogeneity factor.
pub const EW2_RISK_SCALE: f64 = 4.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConstructionError {
    #[error("dictionary size m = {0} must be at least 2")]
    TooFewFunctions(usize),
    #[error("x must be nonnegative (got {0})")]
    NegativeX(f64),
    #[error("(log m + x)/n = {0} must be < 3")]
    BudgetTooLarge(f64),
    #[error("gamma = {0} must be < 1/2")]
    GammaTooLarge(f64),
    #[error("level {got} too shallow: the construction needs level >= {required}")]
    LevelTooShallow { required: u32, got: u32 },
    #[error("alpha = {alpha} must lie in [0, n^(1/4)] = [0, {cap}]")]
    AlphaOutOfRange { alpha: f64, cap: f64 },
    #[error("n = {n} too small: {reason}")]
    NTooSmall { n: usize, reason: &'static str },
    #[error("n = {0} must be odd")]
    EvenN(usize),
    #[error(transparent)]
    Grid(#[from] crate::grid::GridError),
    #[error(transparent)]
    Risk(#[from] RiskError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InstanceKind {
    Selector,
    ExpTail,
    ErmHull,
    Ew,
    Ew2,
}

/// The scalar parameters an instance was generated from, plus the derived
/// amplitudes its identities are stated in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceParams {
    /// Base dictionary size (for the hull instance the dictionary holds
    /// `2m + 1` functions).
    pub m: usize,
    pub n: usize,
    pub x: Option<f64>,
    /// Perturbation amplitude of the adversarial densities.
    pub gamma: Option<f64>,
    /// Third-function amplitude (exponential-weights instance) or the ratio
    /// `‖f_1 - f_2‖² / excess(f_2)` (half-interval instance).
    pub alpha: Option<f64>,
    /// Nominal excess risk of the second half-interval function, `2/√n`.
    pub p_l2: Option<f64>,
    /// Nominal sup-norm scale of the construction.
    pub l: f64,
}

/// A generated hard instance: the dictionary, the candidate truths the
/// adversary chooses among, the parameters, and (when the construction
/// prescribes one) the prior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LowerBoundInstance {
    pub kind: InstanceKind,
    pub params: InstanceParams,
    pub dict: Dictionary,
    pub true_densities: Vec<DensityFunction>,
    pub prior: Option<Prior>,
}

fn one_plus(eps: &GridFunction, amplitude: f64) -> Result<GridFunction, ConstructionError> {
    Ok(GridFunction::constant(eps.level(), 1.0)?.add(&eps.scale(amplitude)))
}

fn check_budget(m: usize, n: usize, x: f64) -> Result<f64, ConstructionError> {
    if m < 2 {
        return Err(ConstructionError::TooFewFunctions(m));
    }
    if x < 0.0 {
        return Err(ConstructionError::NegativeX(x));
    }
    let budget = ((m as f64).ln() + x) / n as f64;
    if budget >= 3.0 {
        return Err(ConstructionError::BudgetTooLarge(budget));
    }
    Ok(budget)
}

/// Instance with `f_1 = 1` and `f_j = 1 + γ ε_j`, `γ = √((log m + x)/(3n))`:
/// every dictionary entry is itself a candidate truth, the entries are
/// `γ²`-separated from `f_1`, and the per-pair divergence budget is
/// `n·χ₂ = (log m + x)/3`.
pub fn gen_exp_tail(
    m: usize,
    n: usize,
    x: f64,
    level: u32,
) -> Result<LowerBoundInstance, ConstructionError> {
    let budget = check_budget(m, n, x)?;
    if (level as usize) < m {
        return Err(ConstructionError::LevelTooShallow { required: m as u32, got: level });
    }
    let gamma = (budget / 3.0).sqrt();
    let eps = rademacher_system(level, m as u32)?;
    let mut functions = vec![GridFunction::constant(level, 1.0)?];
    for e in eps.iter().take(m).skip(1) {
        functions.push(one_plus(e, gamma)?);
    }
    let true_densities = functions
        .iter()
        .map(|f| DensityFunction::new(f.clone()))
        .collect::<Result<Vec<_>, _>>()?;
    let dict = Dictionary::new(functions, 2.0)?;
    Ok(LowerBoundInstance {
        kind: InstanceKind::ExpTail,
        params: InstanceParams {
            m,
            n,
            x: Some(x),
            gamma: Some(gamma),
            alpha: None,
            p_l2: None,
            l: 2.0,
        },
        dict,
        true_densities,
        prior: None,
    })
}

/// Instance separating selectors from aggregates: dictionary `f_j = 1 + ε_j`
/// and candidate truths `d_j = 1 + γ ε_j` with
/// `γ = (1/(2√3)) √((x + log m)/n) < 1/2`. A wrong selection costs exactly
/// `2γ` in excess risk: `‖f_k - d_j‖² - ‖f_j - d_j‖² = (1 + γ²) - (1 - γ)²`.
pub fn gen_selector(
    m: usize,
    n: usize,
    x: f64,
    level: u32,
) -> Result<LowerBoundInstance, ConstructionError> {
    if m < 2 {
        return Err(ConstructionError::TooFewFunctions(m));
    }
    if x < 0.0 {
        return Err(ConstructionError::NegativeX(x));
    }
    if (level as usize) < m {
        return Err(ConstructionError::LevelTooShallow { required: m as u32, got: level });
    }
    let budget = (x + (m as f64).ln()) / n as f64;
    // γ < 1/2 is exactly the (x + log m)/n < 3 window.
    let gamma = budget.sqrt() / (2.0 * 3.0f64.sqrt());
    if gamma >= 0.5 {
        return Err(ConstructionError::GammaTooLarge(gamma));
    }
    let eps = rademacher_system(level, m as u32)?;
    let functions =
        eps.iter().map(|e| one_plus(e, 1.0)).collect::<Result<Vec<_>, _>>()?;
    let true_densities = eps
        .iter()
        .map(|e| Ok(DensityFunction::new(one_plus(e, gamma)?)?))
        .collect::<Result<Vec<_>, ConstructionError>>()?;
    let dict = Dictionary::new(functions, 2.0)?;
    Ok(LowerBoundInstance {
        kind: InstanceKind::Selector,
        params: InstanceParams {
            m,
            n,
            x: Some(x),
            gamma: Some(gamma),
            alpha: None,
            p_l2: None,
            l: 2.0,
        },
        dict,
        true_densities,
        prior: None,
    })
}

/// Instance on which empirical risk minimization over the convex hull
/// overfits: uniform truth and the `2m + 1` functions
/// `{1} ∪ {1 ± φ_j φ_{m+1}}` whose perturbation directions are orthonormal.
/// `m` defaults to `⌈√n⌉`.
pub fn gen_erm_hull(
    n: usize,
    level: u32,
    m_override: Option<usize>,
) -> Result<LowerBoundInstance, ConstructionError> {
    let m = m_override.unwrap_or_else(|| (n as f64).sqrt().ceil() as usize);
    if m < 1 {
        return Err(ConstructionError::TooFewFunctions(m));
    }
    let required = m as u32 + 1;
    if level < required {
        return Err(ConstructionError::LevelTooShallow { required, got: level });
    }
    let phi = rademacher_system(level, required)?;
    let last = &phi[m];
    let one = GridFunction::constant(level, 1.0)?;
    let mut functions = vec![one.clone()];
    for p in phi.iter().take(m) {
        let product = p.mul(last);
        functions.push(one.add(&product));
        functions.push(one.sub(&product));
    }
    let dict = Dictionary::new(functions, 2.0)?;
    let true_densities = vec![DensityFunction::uniform(level)?];
    Ok(LowerBoundInstance {
        kind: InstanceKind::ErmHull,
        params: InstanceParams { m, n, x: None, gamma: None, alpha: None, p_l2: None, l: 2.0 },
        dict,
        true_densities,
        prior: None,
    })
}

/// Instance on which exponential weights stay suboptimal in deviation for
/// every temperature: uniform truth, functions
///
/// ```text
/// f_1 = 1 + ε_1,  f_2 = 1 + (1 + 1/√n) ε_2,  f_3 = f_2 + (α/√n) ε_3,
/// ```
///
/// and a prior that loads `1 - 1/(4√n)` onto the worst function. The default
/// amplitude is `α = min(√(8 log 2n), n^(1/4))`: the cap `α ≤ n^(1/4)` is a
/// hard requirement of the construction and binds at desk-scale `n`.
pub fn gen_ew(
    n: usize,
    alpha: Option<f64>,
    level: u32,
) -> Result<LowerBoundInstance, ConstructionError> {
    if level < 3 {
        return Err(ConstructionError::LevelTooShallow { required: 3, got: level });
    }
    let sqrt_n = (n as f64).sqrt();
    let cap = (n as f64).powf(0.25);
    let alpha = alpha.unwrap_or_else(|| (8.0 * (2.0 * n as f64).ln()).sqrt().min(cap));
    if !(0.0..=cap + 1e-12).contains(&alpha) {
        return Err(ConstructionError::AlphaOutOfRange { alpha, cap });
    }
    // The dictionary must stay bounded by 3L = 3: sup|f_3| = 2 + (1+α)/√n.
    if (1.0 + alpha) / sqrt_n > 1.0 {
        return Err(ConstructionError::NTooSmall {
            n,
            reason: "the third function would exceed the 3L sup-norm bound",
        });
    }
    let eps = rademacher_system(level, 3)?;
    let f1 = one_plus(&eps[0], 1.0)?;
    let f2 = one_plus(&eps[1], 1.0 + 1.0 / sqrt_n)?;
    let f3 = f2.add(&eps[2].scale(alpha / sqrt_n));
    let dict = Dictionary::new(vec![f1, f2, f3], 3.0)?;
    let prior = Prior::new(SimplexWeights::new(vec![
        1.0 / (8.0 * sqrt_n),
        1.0 / (8.0 * sqrt_n),
        1.0 - 1.0 / (4.0 * sqrt_n),
    ])?)?;
    let true_densities = vec![DensityFunction::uniform(level)?];
    Ok(LowerBoundInstance {
        kind: InstanceKind::Ew,
        params: InstanceParams {
            m: 3,
            n,
            x: None,
            gamma: None,
            alpha: Some(alpha),
            p_l2: None,
            l: 1.0,
        },
        dict,
        true_densities,
        prior: Some(prior),
    })
}

/// Two half-interval indicators against a stepped truth, rescaled from the
/// original support to `[0, 1]` by homogeneity: truth `1 ± 2/√n` across the
/// halves, dictionary `{2·1_[0,1/2), 2·1_[1/2,1)}`. The exposed scalars are
/// the nominal ones — excess of the wrong half `p_l2 = 2/√n` and ratio
/// `α = √n/2` — while measured risks on the rescaled objects carry the
/// factor [`EW2_RISK_SCALE`].
pub fn gen_ew2(n: usize, level: u32) -> Result<LowerBoundInstance, ConstructionError> {
    if n % 2 == 0 {
        return Err(ConstructionError::EvenN(n));
    }
    if level < 1 {
        return Err(ConstructionError::LevelTooShallow { required: 1, got: level });
    }
    let sqrt_n = (n as f64).sqrt();
    if 2.0 / sqrt_n > 1.0 {
        return Err(ConstructionError::NTooSmall {
            n,
            reason: "the stepped truth would go negative; need n >= 4",
        });
    }
    let eps1 = rademacher_system(level, 1)?.remove(0);
    let truth = DensityFunction::new(one_plus(&eps1, 2.0 / sqrt_n)?)?;
    let one = GridFunction::constant(level, 1.0)?;
    let f1 = one.add(&eps1);
    let f2 = one.sub(&eps1);
    let dict = Dictionary::new(vec![f1, f2], 2.0)?;
    Ok(LowerBoundInstance {
        kind: InstanceKind::Ew2,
        params: InstanceParams {
            m: 2,
            n,
            x: None,
            gamma: None,
            alpha: Some(sqrt_n / 2.0),
            p_l2: Some(2.0 / sqrt_n),
            l: 2.0,
        },
        dict,
        true_densities: vec![truth],
        prior: None,
    })
}

/// One measured identity or bound of a generated instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationCheck {
    pub name: String,
    pub passed: bool,
    pub measured: f64,
    pub expected: f64,
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub kind: InstanceKind,
    pub checks: Vec<ValidationCheck>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &ValidationCheck> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

fn eq_check(name: impl Into<String>, measured: f64, expected: f64, tol: f64) -> ValidationCheck {
    ValidationCheck {
        name: name.into(),
        passed: (measured - expected).abs() <= tol,
        measured,
        expected,
        tolerance: tol,
    }
}

fn le_check(name: impl Into<String>, measured: f64, bound: f64, tol: f64) -> ValidationCheck {
    ValidationCheck {
        name: name.into(),
        passed: measured <= bound + tol,
        measured,
        expected: bound,
        tolerance: tol,
    }
}

fn ge_check(name: impl Into<String>, measured: f64, bound: f64, tol: f64) -> ValidationCheck {
    ValidationCheck {
        name: name.into(),
        passed: measured >= bound - tol,
        measured,
        expected: bound,
        tolerance: tol,
    }
}

/// Re-measure every property the instance kind promises: density
/// normalization and sup-norm bounds, the exact pairwise distances, the
/// divergence budgets, and the construction-specific scalars. Failures are
/// reported, never thrown.
pub fn validate(inst: &LowerBoundInstance) -> ValidationReport {
    let mut checks = Vec::new();

    for (i, d) in inst.true_densities.iter().enumerate() {
        let g = d.as_grid();
        let min = g.values().iter().copied().fold(f64::INFINITY, f64::min);
        checks.push(ge_check(format!("density[{i}].nonnegative"), min, 0.0, 0.0));
        checks.push(eq_check(format!("density[{i}].unit_mass"), g.mean(), 1.0, 1e-12));
        checks.push(le_check(
            format!("density[{i}].sup_norm"),
            crate::grid::sup_norm(g),
            inst.params.l,
            1e-12,
        ));
    }
    for (j, f) in inst.dict.functions().iter().enumerate() {
        checks.push(le_check(
            format!("dict[{j}].sup_norm"),
            crate::grid::sup_norm(f),
            inst.dict.l0_bound(),
            1e-12,
        ));
    }

    match inst.kind {
        InstanceKind::ExpTail => validate_exp_tail(inst, &mut checks),
        InstanceKind::Selector => validate_selector(inst, &mut checks),
        InstanceKind::ErmHull => validate_erm_hull(inst, &mut checks),
        InstanceKind::Ew => validate_ew(inst, &mut checks),
        InstanceKind::Ew2 => validate_ew2(inst, &mut checks),
    }

    ValidationReport { kind: inst.kind, checks }
}

fn validate_exp_tail(inst: &LowerBoundInstance, checks: &mut Vec<ValidationCheck>) {
    let gamma = inst.params.gamma.unwrap_or(f64::NAN);
    let x = inst.params.x.unwrap_or(f64::NAN);
    let m = inst.params.m;
    let n = inst.params.n as f64;
    let gamma_sq = gamma * gamma;
    let budget = ((m as f64).ln() + x) / 3.0;
    let fns = inst.dict.functions();
    let mut max_first_dev: f64 = 0.0;
    let mut max_pair_dev: f64 = 0.0;
    for j in 1..fns.len() {
        max_first_dev = max_first_dev.max((norm_sq(&fns[j].sub(&fns[0])) - gamma_sq).abs());
        for k in (j + 1)..fns.len() {
            max_pair_dev =
                max_pair_dev.max((norm_sq(&fns[j].sub(&fns[k])) - 2.0 * gamma_sq).abs());
        }
    }
    checks.push(eq_check("distance_to_first", max_first_dev, 0.0, 1e-12));
    checks.push(eq_check("pairwise_distance", max_pair_dev, 0.0, 1e-12));
    let mut max_chi2_dev: f64 = 0.0;
    let mut kl_le_chi2 = true;
    for j in 1..inst.true_densities.len() {
        let chi2 = chi2_divergence(&inst.true_densities[j], &inst.true_densities[0]);
        let kl = kl_divergence(&inst.true_densities[j], &inst.true_densities[0]);
        max_chi2_dev = max_chi2_dev.max((n * chi2 - budget).abs());
        kl_le_chi2 &= kl <= chi2 + 1e-12;
    }
    checks.push(eq_check("chi2_budget", max_chi2_dev, 0.0, 1e-10));
    checks.push(ValidationCheck {
        name: "kl_below_chi2".into(),
        passed: kl_le_chi2,
        measured: if kl_le_chi2 { 0.0 } else { 1.0 },
        expected: 0.0,
        tolerance: 0.0,
    });
}

fn validate_selector(inst: &LowerBoundInstance, checks: &mut Vec<ValidationCheck>) {
    let gamma = inst.params.gamma.unwrap_or(f64::NAN);
    let x = inst.params.x.unwrap_or(f64::NAN);
    let m = inst.params.m;
    let n = inst.params.n as f64;
    let fns = inst.dict.functions();
    let truths = &inst.true_densities;
    let mut cross_dev: f64 = 0.0;
    let mut own_dev: f64 = 0.0;
    let mut truth_pair_dev: f64 = 0.0;
    let mut excess_dev: f64 = 0.0;
    let mut min_cell = f64::INFINITY;
    for j in 0..m {
        let dj = truths[j].as_grid();
        min_cell = min_cell.min(dj.values().iter().copied().fold(f64::INFINITY, f64::min));
        own_dev = own_dev.max((norm_sq(&fns[j].sub(dj)) - (1.0 - gamma).powi(2)).abs());
        for k in 0..m {
            if k == j {
                continue;
            }
            cross_dev = cross_dev.max((norm_sq(&fns[k].sub(dj)) - (1.0 + gamma * gamma)).abs());
            truth_pair_dev = truth_pair_dev
                .max((norm_sq(&truths[k].as_grid().sub(dj)) - 2.0 * gamma * gamma).abs());
            let excess = risk(&fns[k], &truths[j]) - risk(&fns[j], &truths[j]);
            excess_dev = excess_dev.max((excess - 2.0 * gamma).abs());
        }
    }
    checks.push(eq_check("cross_distance", cross_dev, 0.0, 1e-12));
    checks.push(eq_check("own_distance", own_dev, 0.0, 1e-12));
    checks.push(eq_check("truth_pair_distance", truth_pair_dev, 0.0, 1e-12));
    checks.push(eq_check("wrong_selection_excess", excess_dev, 0.0, 1e-12));
    checks.push(ge_check("truth_floor", min_cell, 0.5, 1e-12));
    let budget = (x + (m as f64).ln()) / 3.0;
    let mut max_budget: f64 = 0.0;
    for k in 1..m {
        max_budget = max_budget.max(n * chi2_divergence(&truths[k], &truths[0]));
    }
    checks.push(le_check("chi2_budget", max_budget, budget, 1e-10));
}

fn validate_erm_hull(inst: &LowerBoundInstance, checks: &mut Vec<ValidationCheck>) {
    let m = inst.params.m;
    checks.push(eq_check(
        "dictionary_size",
        inst.dict.size() as f64,
        (2 * m + 1) as f64,
        0.0,
    ));
    let fns = inst.dict.functions();
    let one = &fns[0];
    // Signed perturbation directions f_i - 1; orthonormal up to the ± pairing.
    let dirs: Vec<GridFunction> = fns.iter().skip(1).map(|f| f.sub(one)).collect();
    let mut dev: f64 = 0.0;
    for (a, da) in dirs.iter().enumerate() {
        for (b, db) in dirs.iter().enumerate() {
            let expected = if a == b {
                1.0
            } else if a / 2 == b / 2 {
                -1.0
            } else {
                0.0
            };
            dev = dev.max((crate::grid::inner_product(da, db) - expected).abs());
        }
    }
    checks.push(eq_check("direction_gram", dev, 0.0, 0.0));
    let truth = &inst.true_densities[0];
    let min_dist = fns
        .iter()
        .map(|f| norm_sq(&f.sub(truth.as_grid())))
        .fold(f64::INFINITY, f64::min);
    checks.push(eq_check("truth_in_dictionary", min_dist, 0.0, 0.0));
    let best_risk = fns.iter().map(|f| risk(f, truth)).fold(f64::INFINITY, f64::min);
    checks.push(eq_check("best_risk", best_risk, -1.0, 0.0));
}

fn validate_ew(inst: &LowerBoundInstance, checks: &mut Vec<ValidationCheck>) {
    let n = inst.params.n as f64;
    let alpha = inst.params.alpha.unwrap_or(f64::NAN);
    let sqrt_n = n.sqrt();
    let truth = &inst.true_densities[0];
    let fns = inst.dict.functions();
    let d1 = norm_sq(&fns[0].sub(truth.as_grid()));
    let d2 = norm_sq(&fns[1].sub(truth.as_grid()));
    let d3 = norm_sq(&fns[2].sub(truth.as_grid()));
    checks.push(eq_check("first_distance", d1, 1.0, 1e-12));
    checks.push(eq_check("second_distance", d2, (1.0 + 1.0 / sqrt_n).powi(2), 1e-12));
    checks.push(eq_check(
        "third_distance",
        d3,
        (1.0 + 1.0 / sqrt_n).powi(2) + alpha * alpha / n,
        1e-12,
    ));
    checks.push(ValidationCheck {
        name: "first_is_best".into(),
        passed: d1 < d2 && d2 <= d3,
        measured: d1,
        expected: d2.min(d3),
        tolerance: 0.0,
    });
    match &inst.prior {
        Some(prior) => {
            let sum: f64 = prior.weights().iter().sum();
            checks.push(eq_check("prior_mass", sum, 1.0, 1e-12));
            checks.push(eq_check(
                "prior_top",
                prior.weights()[2],
                1.0 - 1.0 / (4.0 * sqrt_n),
                1e-12,
            ));
        }
        None => checks.push(ValidationCheck {
            name: "prior_present".into(),
            passed: false,
            measured: 0.0,
            expected: 1.0,
            tolerance: 0.0,
        }),
    }
}

fn validate_ew2(inst: &LowerBoundInstance, checks: &mut Vec<ValidationCheck>) {
    let alpha = inst.params.alpha.unwrap_or(f64::NAN);
    let p_l2 = inst.params.p_l2.unwrap_or(f64::NAN);
    let truth = &inst.true_densities[0];
    let fns = inst.dict.functions();
    let sep = norm_sq(&fns[0].sub(&fns[1]));
    checks.push(eq_check("separation", sep, EW2_RISK_SCALE, 1e-12));
    let measured_excess = risk(&fns[1], truth) - risk(&fns[0], truth);
    checks.push(eq_check("second_excess", measured_excess, EW2_RISK_SCALE * p_l2, 1e-10));
    checks.push(eq_check("alpha_ratio", sep / measured_excess, alpha, 1e-10));

    // Pathwise sign identity: the per-observation loss difference of the two
    // halves is ±1 (times the risk scale) according to which half the draw
    // lands in.
    let loss_gap = norm_sq(&fns[1]) - norm_sq(&fns[0]);
    let mut pathwise_dev: f64 = 0.0;
    for y in truth.sample(200, 0xE2E2) {
        let l2 = loss_gap - 2.0 * fns[1].eval(y) + 2.0 * fns[0].eval(y);
        let sign = if y >= 0.5 { 1.0 } else { -1.0 };
        pathwise_dev = pathwise_dev.max((l2 - EW2_RISK_SCALE * -sign).abs());
    }
    checks.push(eq_check("pathwise_sign_identity", pathwise_dev, 0.0, 1e-12));

    // Excess of the segment point θf_1 + (1-θ)f_2 follows the closed form
    // (1 - θ - θ(1-θ)α) · excess(f_2).
    let mut formula_dev: f64 = 0.0;
    for &theta in &[0.0, 0.25, 0.5, 0.75, 1.0] {
        let mix = fns[0].scale(theta).add(&fns[1].scale(1.0 - theta));
        let measured = risk(&mix, truth) - risk(&fns[0], truth);
        let predicted = (1.0 - theta - theta * (1.0 - theta) * alpha) * measured_excess;
        formula_dev = formula_dev.max((measured - predicted).abs());
    }
    checks.push(eq_check("segment_excess_formula", formula_dev, 0.0, 1e-10));
}
