//! Piecewise-constant functions on dyadic partitions of `[0, 1]`.
//!
//! A [`GridFunction`] at level `k` is constant on each of the `2^k` half-open
//! cells `[i·2^-k, (i+1)·2^-k)`. All of the quantities the estimators consume
//! (inner products, norms, empirical sums) reduce to exact finite sums on a
//! common refinement, so no quadrature error enters the risk computations.
//!
//! The module also provides the Rademacher system `ε_1, ε_2, ...`: ±1-valued
//! step functions read off the binary digits of the argument,
//!
//! ```text
//! ε_j(u) = +1 if the j-th binary digit of u is 0, else -1,
//! ```
//!
//! which are pairwise orthogonal with unit squared norm and serve as the
//! perturbation basis for every hard-instance generator.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Hard cap on the dyadic level: `2^30` cells is the largest grid we accept.
pub const MAX_LEVEL: u32 = 30;

/// Largest `f64` strictly below 1.0, used to keep samples inside `[0, 1)`.
const ONE_BELOW: f64 = f64::from_bits(0x3FEF_FFFF_FFFF_FFFF);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("level {0} exceeds the maximum supported level {MAX_LEVEL}")]
    LevelTooDeep(u32),
    #[error("expected {expected} cell values for level {level}, got {got}")]
    WrongCellCount { level: u32, expected: usize, got: usize },
    #[error("cell value at index {0} is not finite")]
    NonFiniteValue(usize),
    #[error("rademacher index {count} not representable at level {level}")]
    RademacherDepth { count: u32, level: u32 },
    #[error("density has a negative cell value at index {0}")]
    NegativeDensity(usize),
    #[error("density integrates to {0}, expected 1 within 1e-12")]
    NotNormalized(f64),
    #[error("serialized object is not flagged as a density")]
    NotFlaggedDensity,
}

/// A function on `[0, 1]` that is constant on the `2^level` dyadic cells.
///
/// Cell `i` covers `[i·2^-level, (i+1)·2^-level)`; evaluation at `u = 1` is
/// assigned to the last cell. Values are immutable after construction and all
/// operations are pure, so grid functions can be shared freely across
/// replication threads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GridFunctionRepr")]
pub struct GridFunction {
    level: u32,
    values: Vec<f64>,
}

#[derive(Deserialize)]
struct GridFunctionRepr {
    level: u32,
    values: Vec<f64>,
}

impl TryFrom<GridFunctionRepr> for GridFunction {
    type Error = GridError;
    fn try_from(repr: GridFunctionRepr) -> Result<Self, GridError> {
        GridFunction::new(repr.level, repr.values)
    }
}

impl GridFunction {
    pub fn new(level: u32, values: Vec<f64>) -> Result<Self, GridError> {
        if level > MAX_LEVEL {
            return Err(GridError::LevelTooDeep(level));
        }
        let expected = 1usize << level;
        if values.len() != expected {
            return Err(GridError::WrongCellCount { level, expected, got: values.len() });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(GridError::NonFiniteValue(i));
        }
        Ok(GridFunction { level, values })
    }

    /// The constant function `u ↦ c` represented at the given level.
    pub fn constant(level: u32, c: f64) -> Result<Self, GridError> {
        if level > MAX_LEVEL {
            return Err(GridError::LevelTooDeep(level));
        }
        if !c.is_finite() {
            return Err(GridError::NonFiniteValue(0));
        }
        Ok(GridFunction { level, values: vec![c; 1usize << level] })
    }

    pub fn zero(level: u32) -> Result<Self, GridError> {
        Self::constant(level, 0.0)
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn cells(&self) -> usize {
        self.values.len()
    }

    /// Exact refinement: each cell value is replicated `2^(level - self.level)`
    /// times. No interpolation is involved, so every integral quantity is
    /// unchanged.
    pub fn refine_to(&self, level: u32) -> Result<Self, GridError> {
        if level > MAX_LEVEL {
            return Err(GridError::LevelTooDeep(level));
        }
        if level < self.level {
            return Err(GridError::WrongCellCount {
                level,
                expected: 1usize << level,
                got: self.values.len(),
            });
        }
        let shift = level - self.level;
        if shift == 0 {
            return Ok(self.clone());
        }
        let mut values = Vec::with_capacity(self.values.len() << shift);
        for &v in &self.values {
            values.extend(std::iter::repeat(v).take(1usize << shift));
        }
        Ok(GridFunction { level, values })
    }

    /// Evaluate at `x ∈ [0, 1]`. The right endpoint 1 falls into the last cell.
    pub fn eval(&self, x: f64) -> f64 {
        debug_assert!((0.0..=1.0).contains(&x), "evaluation outside [0, 1]");
        let cells = self.values.len();
        let idx = ((x * cells as f64) as usize).min(cells - 1);
        self.values[idx]
    }

    /// The integral over `[0, 1]`, i.e. the mean of the cell values.
    pub fn mean(&self) -> f64 {
        compensated_sum(self.values.iter().copied()) / self.values.len() as f64
    }

    pub fn scale(&self, a: f64) -> GridFunction {
        GridFunction { level: self.level, values: self.values.iter().map(|v| a * v).collect() }
    }

    pub fn add(&self, other: &GridFunction) -> GridFunction {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &GridFunction) -> GridFunction {
        self.zip_with(other, |a, b| a - b)
    }

    /// Pointwise product on the common refinement.
    pub fn mul(&self, other: &GridFunction) -> GridFunction {
        self.zip_with(other, |a, b| a * b)
    }

    fn zip_with(&self, other: &GridFunction, f: impl Fn(f64, f64) -> f64) -> GridFunction {
        let level = self.level.max(other.level);
        let da = level - self.level;
        let db = level - other.level;
        let n = 1usize << level;
        let values = (0..n).map(|i| f(self.values[i >> da], other.values[i >> db])).collect();
        GridFunction { level, values }
    }
}

/// Neumaier compensated summation. Fine grids hold tens of thousands of
/// cells and several identities are asserted to 1e-12, which plain
/// accumulation does not reliably deliver; compensation keeps the error at
/// a few ulps independent of the cell count (and leaves exact integer sums
/// exact).
fn compensated_sum(values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut compensation = 0.0;
    for x in values {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            compensation += (sum - t) + x;
        } else {
            compensation += (x - t) + sum;
        }
        sum = t;
    }
    sum + compensation
}

/// `∫ a·b dμ` with μ Lebesgue on `[0, 1]`: the mean of the pointwise products
/// on the common refinement. The refinement is virtual (index shifting), so
/// nothing is allocated.
pub fn inner_product(a: &GridFunction, b: &GridFunction) -> f64 {
    let level = a.level.max(b.level);
    let da = level - a.level;
    let db = level - b.level;
    let n = 1usize << level;
    let acc =
        compensated_sum((0..n).map(|i| a.values[i >> da] * b.values[i >> db]));
    acc / n as f64
}

/// Squared L2 norm `∫ a² dμ`. Throughout the crate "norm" means this squared
/// quantity; names carry the `_sq` suffix to keep that convention visible.
pub fn norm_sq(a: &GridFunction) -> f64 {
    inner_product(a, a)
}

/// `max_i |a_i|`, the sup-norm of the step function.
pub fn sup_norm(a: &GridFunction) -> f64 {
    a.values.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// The first `count` Rademacher functions `ε_1, ..., ε_count` represented at
/// the given level. `ε_j` is constant on cells of width `2^-j`, so `count`
/// may not exceed `level`.
///
/// The returned family is exactly orthonormal: cell sums of ±1 products are
/// integers, so the Gram matrix is the identity without rounding.
pub fn rademacher_system(level: u32, count: u32) -> Result<Vec<GridFunction>, GridError> {
    if level > MAX_LEVEL {
        return Err(GridError::LevelTooDeep(level));
    }
    if count == 0 || count > level {
        return Err(GridError::RademacherDepth { count, level });
    }
    let n = 1usize << level;
    let mut out = Vec::with_capacity(count as usize);
    for j in 1..=count {
        // The j-th binary digit of any u in cell i is bit (level - j) of i.
        let bit = level - j;
        let values = (0..n).map(|i| if (i >> bit) & 1 == 0 { 1.0 } else { -1.0 }).collect();
        out.push(GridFunction { level, values });
    }
    Ok(out)
}

/// A probability density on `[0, 1]`: nonnegative cell values whose mean is 1
/// within 1e-12.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "DensityRepr", try_from = "DensityRepr")]
pub struct DensityFunction {
    grid: GridFunction,
}

#[derive(Serialize, Deserialize)]
struct DensityRepr {
    level: u32,
    values: Vec<f64>,
    density: bool,
}

impl From<DensityFunction> for DensityRepr {
    fn from(d: DensityFunction) -> Self {
        DensityRepr { level: d.grid.level, values: d.grid.values, density: true }
    }
}

impl TryFrom<DensityRepr> for DensityFunction {
    type Error = GridError;
    fn try_from(repr: DensityRepr) -> Result<Self, GridError> {
        if !repr.density {
            return Err(GridError::NotFlaggedDensity);
        }
        DensityFunction::new(GridFunction::new(repr.level, repr.values)?)
    }
}

impl DensityFunction {
    pub fn new(grid: GridFunction) -> Result<Self, GridError> {
        if let Some(i) = grid.values.iter().position(|&v| v < 0.0) {
            return Err(GridError::NegativeDensity(i));
        }
        let mass = grid.mean();
        if (mass - 1.0).abs() > 1e-12 {
            return Err(GridError::NotNormalized(mass));
        }
        Ok(DensityFunction { grid })
    }

    /// Skip the invariant checks. Only used to build deliberately invalid
    /// instances for exercising validators.
    pub fn new_unchecked(grid: GridFunction) -> Self {
        DensityFunction { grid }
    }

    pub fn uniform(level: u32) -> Result<Self, GridError> {
        Ok(DensityFunction { grid: GridFunction::constant(level, 1.0)? })
    }

    pub fn as_grid(&self) -> &GridFunction {
        &self.grid
    }

    /// `n` i.i.d. draws by inverse-CDF sampling over the step density:
    /// a single uniform variate picks the cell through the cumulative
    /// distribution and its leftover fraction places the point inside the
    /// cell. Bit-for-bit reproducible given the seed.
    pub fn sample(&self, n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.sample_with(n, &mut rng)
    }

    /// Same as [`sample`](Self::sample) with caller-held RNG state.
    pub fn sample_with(&self, n: usize, rng: &mut impl Rng) -> Vec<f64> {
        let cells = self.grid.values.len();
        let inv = 1.0 / cells as f64;
        // cdf[i] = probability mass of cells 0..i
        let mut cdf = Vec::with_capacity(cells + 1);
        let mut acc = 0.0;
        cdf.push(0.0);
        for &v in &self.grid.values {
            acc += v * inv;
            cdf.push(acc);
        }
        let last_positive = self
            .grid
            .values
            .iter()
            .rposition(|&v| v > 0.0)
            .expect("density with unit mass has a positive cell");
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            let u: f64 = rng.random();
            // First cell whose cumulative upper edge exceeds u; zero-mass
            // cells have empty (start, end] windows and are never selected.
            let idx = match cdf[1..].partition_point(|&c| c <= u) {
                i if i >= cells => last_positive,
                i => i,
            };
            let width = cdf[idx + 1] - cdf[idx];
            let frac = if width > 0.0 { ((u - cdf[idx]) / width).min(ONE_BELOW) } else { 0.0 };
            out.push(((idx as f64 + frac) * inv).min(ONE_BELOW));
        }
        out
    }
}
