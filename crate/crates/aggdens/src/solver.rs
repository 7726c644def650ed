//! Minimization of convex quadratics over the probability simplex.
//!
//! The aggregation objectives all reduce to
//!
//! ```text
//! minimize  ½ θᵀA θ + bᵀθ + c   over  θ ∈ Λ^M,
//! ```
//!
//! with `A` positive semidefinite (a scaled Gram matrix). The solver is
//! projected gradient descent with the constant step `1/λ_max(A)` and
//! monotone Nesterov momentum: simplex projection costs `O(M log M)`, and
//! the momentum keeps the iteration count manageable on the hard instances,
//! whose effective curvature shrinks like `1/n` against an `O(M)` Lipschitz
//! constant. Termination is certified through the Frank-Wolfe duality gap
//!
//! ```text
//! g(θ) = ∇(θ)ᵀθ - min_j ∇(θ)_j ≥ objective(θ) - objective(θ*),
//! ```
//!
//! which is exact to compute because a linear function on the simplex is
//! extremized at a vertex.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::risk::{Dictionary, Prior, Sample, SimplexWeights};

/// Stopping tolerance used by the estimators: solver error must sit far
/// below the statistical scale `β/n` of the experiments.
pub const DEFAULT_TOL: f64 = 1e-9;
pub const DEFAULT_MAX_ITERS: usize = 100_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("quadratic coefficient matrix must be square (got {0} entries for dimension {1})")]
    BadShape(usize, usize),
    #[error("quadratic coefficient matrix is not symmetric at ({0}, {1})")]
    Asymmetric(usize, usize),
    #[error("tolerance must be strictly positive (got {0})")]
    InvalidTolerance(f64),
    #[error("nu = {0} outside [0, 1)")]
    NuOutOfRange(f64),
    #[error("prior has {got} entries for a dictionary of size {expected}")]
    PriorMismatch { expected: usize, got: usize },
    #[error("no convergence after {iterations} iterations (gap {gap} > tol)", iterations = .0.iterations, gap = .0.fw_gap)]
    NotConverged(SolverReport),
}

/// The quadratic program `½ θᵀA θ + bᵀθ + c` over `Λ^M`.
///
/// `gram` holds the quadratic coefficient `A`; for the canonical penalized
/// objective at `ν = 1/2` it equals the dictionary Gram matrix exactly
/// (`A = 2(1-ν)G`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimplexQp {
    gram: Vec<f64>,
    linear: Vec<f64>,
    constant: f64,
}

impl SimplexQp {
    pub fn new(gram: Vec<f64>, linear: Vec<f64>, constant: f64) -> Result<Self, SolverError> {
        let m = linear.len();
        if gram.len() != m * m || m == 0 {
            return Err(SolverError::BadShape(gram.len(), m));
        }
        for j in 0..m {
            for k in (j + 1)..m {
                if (gram[j * m + k] - gram[k * m + j]).abs() > 1e-12 {
                    return Err(SolverError::Asymmetric(j, k));
                }
            }
        }
        Ok(SimplexQp { gram, linear, constant })
    }

    pub fn dim(&self) -> usize {
        self.linear.len()
    }

    pub fn gram(&self) -> &[f64] {
        &self.gram
    }

    pub fn linear(&self) -> &[f64] {
        &self.linear
    }

    pub fn constant(&self) -> f64 {
        self.constant
    }

    pub fn objective(&self, theta: &[f64]) -> f64 {
        let m = self.dim();
        debug_assert_eq!(theta.len(), m);
        let mut quad = 0.0;
        for j in 0..m {
            let mut row = 0.0;
            for k in 0..m {
                row += self.gram[j * m + k] * theta[k];
            }
            quad += theta[j] * row;
        }
        0.5 * quad + dot(&self.linear, theta) + self.constant
    }

    /// `∇(θ) = Aθ + b`.
    pub fn gradient(&self, theta: &[f64]) -> Vec<f64> {
        let m = self.dim();
        debug_assert_eq!(theta.len(), m);
        (0..m)
            .map(|j| {
                let mut g = self.linear[j];
                for k in 0..m {
                    g += self.gram[j * m + k] * theta[k];
                }
                g
            })
            .collect()
    }

    /// Frank-Wolfe duality gap `∇(θ)ᵀθ - min_j ∇(θ)_j`.
    pub fn fw_gap(&self, theta: &[f64]) -> f64 {
        let grad = self.gradient(theta);
        dot(&grad, theta) - grad.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Spot-check positive semidefiniteness: Rayleigh quotients of seeded
    /// random probe vectors must not drop below `-1e-10`.
    pub fn psd_probe(&self, probes: usize, seed: u64) -> bool {
        let m = self.dim();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..probes).all(|_| {
            let x: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
            let xx = dot(&x, &x);
            if xx == 0.0 {
                return true;
            }
            let mut quad = 0.0;
            for j in 0..m {
                let mut row = 0.0;
                for k in 0..m {
                    row += self.gram[j * m + k] * x[k];
                }
                quad += x[j] * row;
            }
            quad / xx >= -1e-10
        })
    }
}

/// Assemble the penalized-objective QP for a dictionary, sample, prior and
/// penalty coefficient `ν ∈ [0, 1)`:
///
/// ```text
/// A   = 2(1-ν) G,
/// b_j = ν G_jj - (2/n) Σ_i f_j(X_i) + (β/n) log(1/π_j),
/// c   = 0,
/// ```
///
/// so that `½θᵀAθ + bᵀθ + c` equals the penalized empirical objective for
/// every `θ`. The degenerate endpoint `ν = 0` (with `β = 0`) is the plain
/// empirical risk over the convex hull.
pub fn build_qp(
    dict: &Dictionary,
    s: &Sample,
    prior: &Prior,
    beta: f64,
    nu: f64,
) -> Result<SimplexQp, SolverError> {
    if !(0.0..1.0).contains(&nu) {
        return Err(SolverError::NuOutOfRange(nu));
    }
    let m = dict.size();
    if prior.len() != m {
        return Err(SolverError::PriorMismatch { expected: m, got: prior.len() });
    }
    let scale = 2.0 * (1.0 - nu);
    let gram: Vec<f64> = dict.gram().iter().map(|&g| scale * g).collect();
    let means = dict.empirical_means(s);
    let prior_scale = beta / s.len() as f64;
    let linear: Vec<f64> = (0..m)
        .map(|j| {
            nu * dict.gram_entry(j, j) - 2.0 * means[j] - prior_scale * prior.weights()[j].ln()
        })
        .collect();
    SimplexQp::new(gram, linear, 0.0)
}

/// Result of a solve: the iterate, its objective value, the Frank-Wolfe gap
/// certifying (near-)optimality, and the number of gradient steps taken.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverReport {
    #[serde(rename = "theta")]
    pub theta_hat: SimplexWeights,
    pub objective: f64,
    pub fw_gap: f64,
    pub iterations: usize,
}

/// Projected gradient descent with the fixed step `1/λ_max(A)` and Nesterov
/// momentum, warm-started at the uniform vector, stopping as soon as the
/// Frank-Wolfe gap drops to `tol`. A momentum step that would raise the
/// objective is replaced by the plain projected step from the current
/// iterate (which descends for this step size) and the momentum restarts,
/// so the objective path is nonincreasing. Exceeding `max_iters` with a
/// larger gap reports failure carrying the best iterate.
pub fn solve(qp: &SimplexQp, tol: f64, max_iters: usize) -> Result<SolverReport, SolverError> {
    if !(tol > 0.0) {
        return Err(SolverError::InvalidTolerance(tol));
    }
    let m = qp.dim();
    let trace: f64 = (0..m).map(|j| qp.gram[j * m + j]).sum();
    if trace <= 0.0 {
        // A PSD matrix with zero trace is zero: the objective is affine and
        // is minimized at the vertex with the smallest linear coefficient,
        // ties to the smallest index.
        let j = argmin(&qp.linear);
        let theta = SimplexWeights::vertex(m, j);
        let objective = qp.objective(theta.weights());
        let fw_gap = qp.fw_gap(theta.weights());
        return Ok(SolverReport { theta_hat: theta, objective, fw_gap, iterations: 0 });
    }
    let lambda = estimate_lambda_max(&qp.gram, m, trace);
    // Guard against a power-iteration estimate a hair below λ_max; descent
    // needs the step to stay at or below 1/λ_max.
    let step = 1.0 / (lambda * (1.0 + 1e-9));

    // Monotone accelerated projected gradient: the momentum sequence `y`
    // advances through the projected steps `z` regardless, while the
    // reported iterate keeps the best objective seen, and the momentum
    // restarts when the step direction turns against the previous one.
    let mut theta = vec![1.0 / m as f64; m];
    let mut objective = qp.objective(&theta);
    let mut y = theta.clone();
    let mut z_prev = theta.clone();
    let mut t = 1.0f64;
    let mut iterations = 0;
    loop {
        let grad = qp.gradient(&theta);
        let gap = dot(&grad, &theta) - grad.iter().copied().fold(f64::INFINITY, f64::min);
        if gap <= tol {
            let theta_hat = SimplexWeights::new(theta.clone()).expect("projection keeps simplex");
            return Ok(SolverReport { theta_hat, objective, fw_gap: gap, iterations });
        }
        if iterations == max_iters {
            let theta_hat = SimplexWeights::new(theta.clone()).expect("projection keeps simplex");
            return Err(SolverError::NotConverged(SolverReport {
                theta_hat,
                objective,
                fw_gap: gap,
                iterations,
            }));
        }
        let grad_y = qp.gradient(&y);
        let z = project_simplex(
            &y.iter().zip(&grad_y).map(|(&yi, &g)| yi - step * g).collect::<Vec<f64>>(),
        )
        .weights()
        .to_vec();
        let objective_z = qp.objective(&z);
        let theta_prev = theta.clone();
        if objective_z <= objective {
            theta = z.clone();
            objective = objective_z;
        }
        let restart: f64 = y
            .iter()
            .zip(&z)
            .zip(&z_prev)
            .map(|((&yi, &zi), &zp)| (yi - zi) * (zi - zp))
            .sum();
        if restart > 0.0 {
            t = 1.0;
            y = theta.clone();
        } else {
            let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
            y = theta
                .iter()
                .zip(&z)
                .zip(&theta_prev)
                .map(|((&th, &zi), &tp)| {
                    th + (t / t_next) * (zi - th) + ((t - 1.0) / t_next) * (th - tp)
                })
                .collect();
            t = t_next;
        }
        z_prev = z;
        iterations += 1;
    }
}

/// Euclidean projection onto the simplex by sort-and-threshold.
pub fn project_simplex(v: &[f64]) -> SimplexWeights {
    assert!(!v.is_empty(), "cannot project an empty vector");
    let mut sorted = v.to_vec();
    sorted.sort_unstable_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut tau = 0.0;
    for (i, &u) in sorted.iter().enumerate() {
        cum += u;
        let t = (cum - 1.0) / (i + 1) as f64;
        if u - t > 0.0 {
            tau = t;
        } else {
            break;
        }
    }
    let w: Vec<f64> = v.iter().map(|&x| (x - tau).max(0.0)).collect();
    let sum: f64 = w.iter().sum();
    SimplexWeights::new(w.iter().map(|&x| x / sum).collect())
        .expect("thresholded weights form a simplex point")
}

/// Check the strong-convexity certificate of the penalized objective at
/// `ν = 1/2`: for seeded Dirichlet-uniform probes `θ`,
///
/// ```text
/// H_n(θ̂) ≤ H_n(θ) - ½ ‖f_θ - f_θ̂‖² + slack,    slack = max(1e-8, fw_gap).
/// ```
///
/// `fw_gap` is the gap the solver reported for `theta_hat`; the certificate
/// checks that the point really is as optimal as that report claims, so a
/// point moved away from the minimizer fails against the original gap.
pub fn certify_strong_convexity(
    theta_hat: &SimplexWeights,
    fw_gap: f64,
    dict: &Dictionary,
    s: &Sample,
    prior: &Prior,
    beta: f64,
    probes: usize,
    seed: u64,
) -> Result<bool, SolverError> {
    assert!(probes >= 1);
    let qp = build_qp(dict, s, prior, beta, 0.5)?;
    let m = dict.size();
    if theta_hat.len() != m {
        return Err(SolverError::PriorMismatch { expected: m, got: theta_hat.len() });
    }
    let h_hat = qp.objective(theta_hat.weights());
    let slack = fw_gap.max(1e-8);
    let gram = dict.gram();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..probes {
        let theta = dirichlet_uniform(m, &mut rng);
        let delta: Vec<f64> =
            theta.iter().zip(theta_hat.weights()).map(|(&a, &b)| a - b).collect();
        let dist_sq = quadratic_form(gram, &delta);
        if h_hat > qp.objective(&theta) - 0.5 * dist_sq + slack {
            return Ok(false);
        }
    }
    Ok(true)
}

/// A uniform draw from the simplex (Dirichlet(1, ..., 1)) via normalized
/// exponentials.
fn dirichlet_uniform(m: usize, rng: &mut impl Rng) -> Vec<f64> {
    let raw: Vec<f64> = (0..m).map(|_| -rng.random::<f64>().max(1e-300).ln()).collect();
    let sum: f64 = raw.iter().sum();
    raw.iter().map(|&x| x / sum).collect()
}

/// `xᵀ M x` for a row-major square matrix.
fn quadratic_form(matrix: &[f64], x: &[f64]) -> f64 {
    let m = x.len();
    let mut acc = 0.0;
    for j in 0..m {
        let mut row = 0.0;
        for k in 0..m {
            row += matrix[j * m + k] * x[k];
        }
        acc += x[j] * row;
    }
    acc
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

fn argmin(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate().skip(1) {
        if x < v[best] {
            best = i;
        }
    }
    best
}

/// Largest eigenvalue of the PSD matrix `A` by 100 power iterations from a
/// seeded start; falls back to the trace (a valid overestimate) if the
/// iteration stalls on a degenerate matrix.
fn estimate_lambda_max(a: &[f64], m: usize, trace: f64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(0x00AA_11BB_22CC_33DD);
    let mut v: Vec<f64> = (0..m).map(|_| rng.random::<f64>() + 0.5).collect();
    let norm = dot(&v, &v).sqrt();
    for x in &mut v {
        *x /= norm;
    }
    let mut lambda = 0.0;
    for _ in 0..100 {
        let mut av = vec![0.0; m];
        for j in 0..m {
            for k in 0..m {
                av[j] += a[j * m + k] * v[k];
            }
        }
        let norm = dot(&av, &av).sqrt();
        if !(norm > 1e-300) {
            return trace;
        }
        lambda = dot(&v, &av);
        for (x, y) in v.iter_mut().zip(&av) {
            *x = y / norm;
        }
    }
    if lambda > 0.0 {
        lambda
    } else {
        trace
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{rademacher_system, DensityFunction, GridFunction};
    use crate::risk::objective_h;
    use rand::Rng;

    fn random_psd_qp(rng: &mut ChaCha8Rng, m: usize) -> SimplexQp {
        // A = BᵀB is PSD by construction.
        let b: Vec<f64> = (0..m * m).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut a = vec![0.0; m * m];
        for j in 0..m {
            for k in 0..m {
                let mut acc = 0.0;
                for l in 0..m {
                    acc += b[l * m + j] * b[l * m + k];
                }
                a[j * m + k] = acc;
            }
        }
        let linear: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
        SimplexQp::new(a, linear, rng.random_range(-1.0..1.0)).unwrap()
    }

    fn toy_problem() -> (Dictionary, Sample, Prior) {
        let eps = rademacher_system(5, 4).unwrap();
        let one = GridFunction::constant(5, 1.0).unwrap();
        let dict = Dictionary::new(
            (0..4).map(|j| one.add(&eps[j].scale(0.5))).collect(),
            1.5,
        )
        .unwrap();
        let truth = DensityFunction::uniform(5).unwrap();
        let s = Sample::draw(&truth, 200, 11);
        let prior = Prior::uniform(4);
        (dict, s, prior)
    }

    #[test]
    fn qp_construction_rejects_asymmetry() {
        let gram = vec![1.0, 0.1, 0.2, 1.0];
        assert!(matches!(
            SimplexQp::new(gram, vec![0.0, 0.0], 0.0),
            Err(SolverError::Asymmetric(0, 1))
        ));
    }

    #[test]
    fn build_qp_is_gram_at_nu_half_for_orthonormal_dictionary() {
        let eps = rademacher_system(4, 3).unwrap();
        let dict = Dictionary::new(eps, 1.0).unwrap();
        let s = Sample::new(vec![0.1, 0.6, 0.9], 0).unwrap();
        let qp = build_qp(&dict, &s, &Prior::uniform(3), 1.0, 0.5).unwrap();
        for j in 0..3 {
            for k in 0..3 {
                let expected = if j == k { 1.0 } else { 0.0 };
                assert_eq!(qp.gram()[j * 3 + k], expected);
            }
        }
    }

    #[test]
    fn build_qp_matches_objective_on_random_points() {
        let (dict, s, _) = toy_problem();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let raw: Vec<f64> = (0..4).map(|_| rng.random::<f64>()).collect();
        let prior_sum: f64 = raw.iter().sum();
        let prior = Prior::new(
            SimplexWeights::new(raw.iter().map(|x| x / prior_sum).collect()).unwrap(),
        )
        .unwrap();
        for &nu in &[0.2, 0.5, 0.8] {
            let qp = build_qp(&dict, &s, &prior, 3.0, nu).unwrap();
            for _ in 0..20 {
                let theta = {
                    let raw: Vec<f64> = (0..4).map(|_| rng.random::<f64>() + 0.01).collect();
                    let sum: f64 = raw.iter().sum();
                    SimplexWeights::new(raw.iter().map(|x| x / sum).collect()).unwrap()
                };
                let direct = objective_h(&theta, &dict, &s, &prior, 3.0, nu).unwrap();
                let quad = qp.objective(theta.weights());
                assert!((direct - quad).abs() <= 1e-10, "nu={nu}: {direct} vs {quad}");
            }
        }
    }

    #[test]
    fn build_qp_nu_zero_gives_plain_hull_erm() {
        let (dict, s, prior) = toy_problem();
        let qp = build_qp(&dict, &s, &prior, 0.0, 0.0).unwrap();
        let means = dict.empirical_means(&s);
        for j in 0..4 {
            assert!((qp.linear()[j] + 2.0 * means[j]).abs() <= 1e-15);
            for k in 0..4 {
                assert!((qp.gram()[j * 4 + k] - 2.0 * dict.gram_entry(j, k)).abs() <= 1e-15);
            }
        }
        assert!(matches!(
            build_qp(&dict, &s, &prior, 0.0, 1.0),
            Err(SolverError::NuOutOfRange(_))
        ));
    }

    #[test]
    fn solve_single_vertex() {
        let qp = SimplexQp::new(vec![2.0], vec![-1.0], 0.0).unwrap();
        let report = solve(&qp, 1e-9, 100).unwrap();
        assert_eq!(report.theta_hat.weights(), &[1.0]);
        assert_eq!(report.fw_gap, 0.0);
        assert_eq!(report.iterations, 0);
    }

    #[test]
    fn solve_identity_quadratic_returns_uniform() {
        let m = 5;
        let mut gram = vec![0.0; m * m];
        for j in 0..m {
            gram[j * m + j] = 1.0;
        }
        let qp = SimplexQp::new(gram, vec![0.0; m], 0.0).unwrap();
        let report = solve(&qp, 1e-12, 10_000).unwrap();
        for &w in report.theta_hat.weights() {
            assert!((w - 0.2).abs() <= 1e-9);
        }
    }

    #[test]
    fn solve_affine_degenerate_picks_smallest_linear_with_tie_breaking() {
        let qp = SimplexQp::new(vec![0.0; 9], vec![0.5, -0.25, -0.25], 1.0).unwrap();
        let report = solve(&qp, 1e-9, 10).unwrap();
        assert_eq!(report.theta_hat.weights(), &[0.0, 1.0, 0.0]);
        assert_eq!(report.iterations, 0);
        assert!((report.objective - 0.75).abs() <= 1e-15);
    }

    #[test]
    fn solve_matches_grid_oracle_on_small_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let qp = random_psd_qp(&mut rng, 3);
            let report = solve(&qp, 1e-10, DEFAULT_MAX_ITERS).unwrap();
            // Exhaustive grid over the 3-simplex at step 2e-3.
            let steps = 500usize;
            let mut best = f64::INFINITY;
            for i in 0..=steps {
                for j in 0..=(steps - i) {
                    let t = [
                        i as f64 / steps as f64,
                        j as f64 / steps as f64,
                        (steps - i - j) as f64 / steps as f64,
                    ];
                    best = best.min(qp.objective(&t));
                }
            }
            assert!(report.objective <= best + 1e-6);
        }
    }

    #[test]
    fn monotone_descent_across_iterations() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let qp = random_psd_qp(&mut rng, 6);
        // Forcing a tolerance no iterate can reach replays the first k steps
        // exactly (the method is deterministic), exposing the objective path.
        let mut previous = f64::INFINITY;
        for k in 1..=40 {
            let objective = match solve(&qp, 1e-300, k) {
                Ok(report) => report.objective,
                Err(SolverError::NotConverged(report)) => report.objective,
                Err(e) => panic!("unexpected error: {e}"),
            };
            assert!(objective <= previous + 1e-12, "ascent at step {k}");
            previous = objective;
        }
    }

    #[test]
    fn first_order_optimality_at_termination() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let qp = random_psd_qp(&mut rng, 4);
            let tol = 1e-9;
            let report = solve(&qp, tol, DEFAULT_MAX_ITERS).unwrap();
            assert!(report.fw_gap <= tol && report.fw_gap >= -1e-12);
            let grad = qp.gradient(report.theta_hat.weights());
            let gtheta = dot(&grad, report.theta_hat.weights());
            let min_dir = grad.iter().map(|g| g - gtheta).fold(f64::INFINITY, f64::min);
            assert!(min_dir >= -tol);
        }
    }

    #[test]
    fn gradient_matches_central_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let qp = random_psd_qp(&mut rng, 5);
        for _ in 0..50 {
            let theta: Vec<f64> = (0..5).map(|_| rng.random_range(-1.0..1.0)).collect();
            let grad = qp.gradient(&theta);
            for j in 0..5 {
                let h = 1e-6;
                let mut plus = theta.clone();
                plus[j] += h;
                let mut minus = theta.clone();
                minus[j] -= h;
                let fd = (qp.objective(&plus) - qp.objective(&minus)) / (2.0 * h);
                let scale = grad[j].abs().max(1.0);
                assert!((grad[j] - fd).abs() / scale <= 1e-5);
            }
        }
    }

    #[test]
    fn quadratic_expansion_identity_on_random_pairs() {
        // ‖f_θ‖² - ‖f_θ'‖² = 2 θ'ᵀG(θ - θ') + ‖f_θ - f_θ'‖².
        let (dict, _, _) = toy_problem();
        let gram = dict.gram();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let draw = |rng: &mut ChaCha8Rng| {
                let raw: Vec<f64> = (0..4).map(|_| rng.random::<f64>() + 0.01).collect();
                let sum: f64 = raw.iter().sum();
                raw.iter().map(|x| x / sum).collect::<Vec<f64>>()
            };
            let a = draw(&mut rng);
            let b = draw(&mut rng);
            let lhs = quadratic_form(gram, &a) - quadratic_form(gram, &b);
            let delta: Vec<f64> = a.iter().zip(&b).map(|(&x, &y)| x - y).collect();
            let mut cross = 0.0;
            for j in 0..4 {
                for k in 0..4 {
                    cross += b[j] * gram[j * 4 + k] * delta[k];
                }
            }
            let rhs = 2.0 * cross + quadratic_form(gram, &delta);
            assert!((lhs - rhs).abs() <= 1e-10);
        }
    }

    #[test]
    fn projection_examples() {
        let inside = [0.2, 0.5, 0.3];
        let p = project_simplex(&inside);
        for (a, b) in p.weights().iter().zip(&inside) {
            assert!((a - b).abs() <= 1e-12);
        }
        assert_eq!(project_simplex(&[2.0, 0.0]).weights(), &[1.0, 0.0]);
    }

    #[test]
    fn projection_matches_grid_oracle() {
        let v = [0.5, 0.3, 0.1];
        let p = project_simplex(&v);
        let steps = 10_000usize;
        let mut best = f64::INFINITY;
        let mut best_point = [0.0; 3];
        for i in 0..=steps {
            for j in 0..=(steps - i) {
                let t = [
                    i as f64 / steps as f64,
                    j as f64 / steps as f64,
                    (steps - i - j) as f64 / steps as f64,
                ];
                let d: f64 = t.iter().zip(&v).map(|(&a, &b)| (a - b) * (a - b)).sum();
                if d < best {
                    best = d;
                    best_point = t;
                }
            }
        }
        for (a, b) in p.weights().iter().zip(&best_point) {
            assert!((a - b).abs() <= 1e-4);
        }
    }

    #[test]
    fn psd_probe_flags_indefinite_matrices() {
        let qp = SimplexQp::new(vec![1.0, 0.0, 0.0, -1.0], vec![0.0, 0.0], 0.0).unwrap();
        assert!(!qp.psd_probe(64, 1));
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        assert!(random_psd_qp(&mut rng, 4).psd_probe(64, 1));
    }

    #[test]
    fn certificate_accepts_solver_output_and_rejects_perturbations() {
        let (dict, s, prior) = toy_problem();
        let beta = 10.0;
        let qp = build_qp(&dict, &s, &prior, beta, 0.5).unwrap();
        let report = solve(&qp, 1e-9, DEFAULT_MAX_ITERS).unwrap();
        assert!(certify_strong_convexity(
            &report.theta_hat,
            report.fw_gap,
            &dict,
            &s,
            &prior,
            beta,
            100,
            99,
        )
        .unwrap());

        // Shift a tenth of the mass onto the steepest-ascent vertex; against
        // the original gap claim the certificate must fail.
        let grad = qp.gradient(report.theta_hat.weights());
        let worst = grad
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .unwrap();
        let mut perturbed: Vec<f64> =
            report.theta_hat.weights().iter().map(|w| 0.9 * w).collect();
        perturbed[worst] += 0.1;
        let perturbed = SimplexWeights::new(perturbed).unwrap();
        assert!(!certify_strong_convexity(
            &perturbed,
            report.fw_gap,
            &dict,
            &s,
            &prior,
            beta,
            100,
            99,
        )
        .unwrap());
    }

    #[test]
    fn certificate_is_vacuous_for_single_function() {
        let one = GridFunction::constant(2, 1.0).unwrap();
        let dict = Dictionary::new(vec![one], 1.0).unwrap();
        let truth = DensityFunction::uniform(2).unwrap();
        let s = Sample::draw(&truth, 10, 0);
        let theta = SimplexWeights::vertex(1, 0);
        assert!(certify_strong_convexity(
            &theta,
            0.0,
            &dict,
            &s,
            &Prior::uniform(1),
            5.0,
            50,
            0,
        )
        .unwrap());
    }

    #[test]
    fn not_converged_reports_best_iterate() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let qp = random_psd_qp(&mut rng, 4);
        match solve(&qp, 1e-300, 3) {
            Err(SolverError::NotConverged(report)) => {
                assert_eq!(report.iterations, 3);
                assert!(report.fw_gap > 1e-300);
            }
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }
}
