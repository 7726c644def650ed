//! Risk functionals and the domain types they act on.
//!
//! With the unknown density `f` and μ Lebesgue on `[0, 1]`, the estimation
//! target is the L2 distance `‖g - f‖² = ‖g‖² - 2∫gf + ‖f‖²`. The constant
//! `‖f‖²` is dropped, leaving the risk
//!
//! ```text
//! R(g)   = ‖g‖² - 2 ∫ g f dμ,
//! R_n(g) = ‖g‖² - (2/n) Σ_i g(X_i),
//! ```
//!
//! where `R_n` is an unbiased estimate of `R` from the sample. On top of
//! these sit the variance penalty `pen(θ) = Σ_j θ_j ‖f_θ - f_j‖²`, the prior
//! penalty `K(θ) = (β/n) Σ_j θ_j log(1/π_j)`, and the penalized objective
//! `H_n(θ) = R_n(f_θ) + ν·pen(θ) + K(θ)` that the aggregation solver
//! minimizes over the simplex.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{inner_product, norm_sq, sup_norm, DensityFunction, GridFunction};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RiskError {
    #[error("dictionary must contain at least one function")]
    EmptyDictionary,
    #[error("dictionary function {index} has sup-norm {sup} above the recorded bound {bound}")]
    SupNormBound { index: usize, sup: f64, bound: f64 },
    #[error("weight vector has length {got}, expected {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("simplex weight at index {0} is negative")]
    NegativeWeight(usize),
    #[error("simplex weights sum to {0}, expected 1 within 1e-9")]
    NotASimplexPoint(f64),
    #[error("prior weight at index {0} must be strictly positive")]
    ZeroPriorWeight(usize),
    #[error("sample is empty")]
    EmptySample,
    #[error("sample point at index {0} lies outside [0, 1]")]
    PointOutOfRange(usize),
    #[error("weight function must be nonnegative (cell {0} is negative)")]
    NegativeWeightFunction(usize),
    #[error("nu = {0} outside the open interval (0, 1)")]
    NuOutOfRange(f64),
    #[error(transparent)]
    Grid(#[from] crate::grid::GridError),
}

/// An ordered dictionary `f_1, ..., f_M` held at a common level, together
/// with a recorded sup-norm bound `L_0` (checked at construction).
///
/// The Gram matrix `G_jk = ∫ f_j f_k dμ` is computed eagerly: every consumer
/// of a dictionary (objective assembly, certificates, exact risk evaluation)
/// needs it, and the dictionary is immutable afterwards.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "DictionaryRepr", try_from = "DictionaryRepr")]
pub struct Dictionary {
    functions: Vec<GridFunction>,
    l0_bound: f64,
    #[serde(skip)]
    gram: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct DictionaryRepr {
    l0_bound: f64,
    functions: Vec<GridFunction>,
}

impl From<Dictionary> for DictionaryRepr {
    fn from(d: Dictionary) -> Self {
        DictionaryRepr { l0_bound: d.l0_bound, functions: d.functions }
    }
}

impl TryFrom<DictionaryRepr> for Dictionary {
    type Error = RiskError;
    fn try_from(repr: DictionaryRepr) -> Result<Self, RiskError> {
        Dictionary::new(repr.functions, repr.l0_bound)
    }
}

impl Dictionary {
    pub fn new(functions: Vec<GridFunction>, l0_bound: f64) -> Result<Self, RiskError> {
        if functions.is_empty() {
            return Err(RiskError::EmptyDictionary);
        }
        let level = functions.iter().map(|f| f.level()).max().unwrap();
        let functions = functions
            .into_iter()
            .map(|f| f.refine_to(level))
            .collect::<Result<Vec<_>, _>>()?;
        for (index, f) in functions.iter().enumerate() {
            let sup = sup_norm(f);
            if sup > l0_bound {
                return Err(RiskError::SupNormBound { index, sup, bound: l0_bound });
            }
        }
        let m = functions.len();
        let mut gram = vec![0.0; m * m];
        for j in 0..m {
            for k in j..m {
                let v = inner_product(&functions[j], &functions[k]);
                gram[j * m + k] = v;
                gram[k * m + j] = v;
            }
        }
        Ok(Dictionary { functions, l0_bound, gram })
    }

    pub fn size(&self) -> usize {
        self.functions.len()
    }

    pub fn level(&self) -> u32 {
        self.functions[0].level()
    }

    pub fn l0_bound(&self) -> f64 {
        self.l0_bound
    }

    pub fn functions(&self) -> &[GridFunction] {
        &self.functions
    }

    pub fn function(&self, j: usize) -> &GridFunction {
        &self.functions[j]
    }

    /// Row-major `M×M` Gram matrix `G_jk = ∫ f_j f_k dμ`.
    pub fn gram(&self) -> &[f64] {
        &self.gram
    }

    pub fn gram_entry(&self, j: usize, k: usize) -> f64 {
        self.gram[j * self.functions.len() + k]
    }

    /// Per-function empirical means `(1/n) Σ_i f_j(X_i)`.
    pub fn empirical_means(&self, sample: &Sample) -> Vec<f64> {
        let inv = 1.0 / sample.len() as f64;
        self.functions
            .iter()
            .map(|f| sample.points().iter().map(|&x| f.eval(x)).sum::<f64>() * inv)
            .collect()
    }
}

/// A point of the simplex `Λ^M`: nonnegative weights summing to 1.
///
/// Inputs whose sum deviates from 1 by at most 1e-9 are renormalized by the
/// sum, which absorbs solver rounding without contaminating downstream
/// identities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "Vec<f64>", try_from = "Vec<f64>")]
pub struct SimplexWeights(Vec<f64>);

impl TryFrom<Vec<f64>> for SimplexWeights {
    type Error = RiskError;
    fn try_from(v: Vec<f64>) -> Result<Self, RiskError> {
        SimplexWeights::new(v)
    }
}

impl From<SimplexWeights> for Vec<f64> {
    fn from(w: SimplexWeights) -> Vec<f64> {
        w.0
    }
}

impl SimplexWeights {
    pub fn new(mut weights: Vec<f64>) -> Result<Self, RiskError> {
        if weights.is_empty() {
            return Err(RiskError::EmptyDictionary);
        }
        if let Some(i) = weights.iter().position(|&w| !(w >= 0.0) || !w.is_finite()) {
            return Err(RiskError::NegativeWeight(i));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(RiskError::NotASimplexPoint(sum));
        }
        if sum != 1.0 {
            for w in &mut weights {
                *w /= sum;
            }
        }
        Ok(SimplexWeights(weights))
    }

    /// The vertex `e_j`.
    pub fn vertex(m: usize, j: usize) -> Self {
        assert!(j < m, "vertex index out of range");
        let mut w = vec![0.0; m];
        w[j] = 1.0;
        SimplexWeights(w)
    }

    pub fn uniform(m: usize) -> Self {
        assert!(m > 0);
        SimplexWeights(vec![1.0 / m as f64; m])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.0
    }
}

/// A strictly positive prior `π ∈ Λ^M`, so that `log(1/π_j)` is finite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "Vec<f64>", try_from = "Vec<f64>")]
pub struct Prior(SimplexWeights);

impl TryFrom<Vec<f64>> for Prior {
    type Error = RiskError;
    fn try_from(v: Vec<f64>) -> Result<Self, RiskError> {
        Prior::new(SimplexWeights::new(v)?)
    }
}

impl From<Prior> for Vec<f64> {
    fn from(p: Prior) -> Vec<f64> {
        p.0 .0
    }
}

impl Prior {
    pub fn new(weights: SimplexWeights) -> Result<Self, RiskError> {
        if let Some(i) = weights.weights().iter().position(|&w| w <= 0.0) {
            return Err(RiskError::ZeroPriorWeight(i));
        }
        Ok(Prior(weights))
    }

    pub fn uniform(m: usize) -> Self {
        Prior(SimplexWeights::uniform(m))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        self.0.weights()
    }

    /// `log(1/π_j)` for each entry.
    pub fn log_inverse(&self) -> Vec<f64> {
        self.weights().iter().map(|&p| -(p.ln())).collect()
    }
}

/// Observations `X_1, ..., X_n` in `[0, 1]` together with the seed that
/// produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SampleRepr")]
pub struct Sample {
    seed: u64,
    points: Vec<f64>,
}

#[derive(Deserialize)]
struct SampleRepr {
    seed: u64,
    points: Vec<f64>,
}

impl TryFrom<SampleRepr> for Sample {
    type Error = RiskError;
    fn try_from(repr: SampleRepr) -> Result<Self, RiskError> {
        Sample::new(repr.points, repr.seed)
    }
}

impl Sample {
    pub fn new(points: Vec<f64>, seed: u64) -> Result<Self, RiskError> {
        if points.is_empty() {
            return Err(RiskError::EmptySample);
        }
        if let Some(i) = points.iter().position(|p| !(0.0..=1.0).contains(p)) {
            return Err(RiskError::PointOutOfRange(i));
        }
        Ok(Sample { seed, points })
    }

    /// Draw `n` i.i.d. observations from the density, recording the seed.
    pub fn draw(density: &DensityFunction, n: usize, seed: u64) -> Self {
        assert!(n >= 1, "sample size must be at least 1");
        Sample { seed, points: density.sample(n, seed) }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    /// `(1/n) Σ_i g(X_i)`.
    pub fn empirical_mean(&self, g: &GridFunction) -> f64 {
        self.points.iter().map(|&x| g.eval(x)).sum::<f64>() / self.points.len() as f64
    }
}

/// True risk `R(g) = ‖g‖² - 2 ∫ g f dμ`, computed with exact integrals.
pub fn risk(g: &GridFunction, f_true: &DensityFunction) -> f64 {
    norm_sq(g) - 2.0 * inner_product(g, f_true.as_grid())
}

/// Empirical risk `R_n(g) = ‖g‖² - (2/n) Σ_i g(X_i)`.
pub fn empirical_risk(g: &GridFunction, s: &Sample) -> f64 {
    norm_sq(g) - 2.0 * s.empirical_mean(g)
}

/// The convex combination `f_θ = Σ_j θ_j f_j`.
pub fn combine(theta: &SimplexWeights, dict: &Dictionary) -> Result<GridFunction, RiskError> {
    if theta.len() != dict.size() {
        return Err(RiskError::LengthMismatch { expected: dict.size(), got: theta.len() });
    }
    let mut values = vec![0.0; 1usize << dict.level()];
    for (w, f) in theta.weights().iter().zip(dict.functions()) {
        if *w == 0.0 {
            continue;
        }
        for (out, v) in values.iter_mut().zip(f.values()) {
            *out += w * v;
        }
    }
    Ok(GridFunction::new(dict.level(), values).expect("combination stays on the grid"))
}

/// Variance penalty `pen(θ) = Σ_j θ_j ‖f_θ - f_j‖²`.
///
/// Computed from the definition (a sum of nonnegative terms), so the result
/// is nonnegative without cancellation. It equals
/// `Σ_j θ_j ‖f_j‖² - ‖f_θ‖²` by the bias-variance decomposition.
pub fn penalty(theta: &SimplexWeights, dict: &Dictionary) -> Result<f64, RiskError> {
    let f_theta = combine(theta, dict)?;
    Ok(theta
        .weights()
        .iter()
        .zip(dict.functions())
        .map(|(w, f)| w * norm_sq(&f_theta.sub(f)))
        .sum())
}

/// Prior penalty `K(θ) = (β/n) Σ_j θ_j log(1/π_j)`, linear in `θ` with vertex
/// values `K(e_j) = (β/n) log(1/π_j)`.
pub fn prior_penalty(theta: &SimplexWeights, prior: &Prior, beta: f64, n: usize) -> f64 {
    debug_assert!(beta > 0.0 || theta.len() == prior.len());
    let scale = beta / n as f64;
    theta
        .weights()
        .iter()
        .zip(prior.weights())
        .map(|(&t, &p)| scale * t * -(p.ln()))
        .sum()
}

/// The penalized empirical objective
/// `H_n(θ) = R_n(f_θ) + ν·pen(θ) + K(θ)` for `ν ∈ (0, 1)`.
///
/// At `ν = 1/2` this coincides with the Q-aggregation objective
/// `(R_n(f_θ) + Σ_j θ_j R_n(f_j))/2 + K(θ)`.
pub fn objective_h(
    theta: &SimplexWeights,
    dict: &Dictionary,
    s: &Sample,
    prior: &Prior,
    beta: f64,
    nu: f64,
) -> Result<f64, RiskError> {
    if !(nu > 0.0 && nu < 1.0) {
        return Err(RiskError::NuOutOfRange(nu));
    }
    let f_theta = combine(theta, dict)?;
    Ok(empirical_risk(&f_theta, s) + nu * penalty(theta, dict)? + prior_penalty(theta, prior, beta, s.len()))
}

/// Weighted squared norm `‖g‖²_w = ∫ g² w dμ` for a nonnegative weight
/// function, computed exactly on the common refinement.
pub fn weighted_norm_sq(g: &GridFunction, w: &GridFunction) -> Result<f64, RiskError> {
    if let Some(i) = w.values().iter().position(|&v| v < 0.0) {
        return Err(RiskError::NegativeWeightFunction(i));
    }
    Ok(inner_product(&g.mul(g), w))
}

/// Kullback-Leibler divergence `K(P, Q) = ∫ log(dP/dQ) dP` between two grid
/// densities, with the `0·log 0 = 0` convention. Returns `+∞` when `P` is not
/// absolutely continuous with respect to `Q` on the grid.
pub fn kl_divergence(p: &DensityFunction, q: &DensityFunction) -> f64 {
    let level = p.as_grid().level().max(q.as_grid().level());
    let pv = p.as_grid().values();
    let qv = q.as_grid().values();
    let dp = level - p.as_grid().level();
    let dq = level - q.as_grid().level();
    let n = 1usize << level;
    let mut acc = 0.0;
    for i in 0..n {
        let pi = pv[i >> dp];
        let qi = qv[i >> dq];
        if pi > 0.0 {
            if qi == 0.0 {
                return f64::INFINITY;
            }
            acc += pi * (pi / qi).ln();
        }
    }
    acc / n as f64
}

/// Chi-square divergence `χ₂(P, Q) = ∫ (dP/dQ - 1)² dQ`, same conventions as
/// [`kl_divergence`].
pub fn chi2_divergence(p: &DensityFunction, q: &DensityFunction) -> f64 {
    let level = p.as_grid().level().max(q.as_grid().level());
    let pv = p.as_grid().values();
    let qv = q.as_grid().values();
    let dp = level - p.as_grid().level();
    let dq = level - q.as_grid().level();
    let n = 1usize << level;
    let mut acc = 0.0;
    for i in 0..n {
        let pi = pv[i >> dp];
        let qi = qv[i >> dq];
        if qi == 0.0 {
            if pi > 0.0 {
                return f64::INFINITY;
            }
            continue;
        }
        let r = pi / qi - 1.0;
        acc += r * r * qi;
    }
    acc / n as f64
}
