//! Property tests for the algebraic invariants: bilinearity and refinement
//! invariance of the inner product, simplex-projection laws, penalty
//! nonnegativity with its bias-variance form, and exponential-weight
//! validity across temperatures.

use aggdens::estimators::exponential_weights;
use aggdens::risk::{combine, penalty};
use aggdens::*;
use proptest::prelude::*;

fn grid_values(level: u32) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-3.0f64..3.0, 1usize << level)
}

fn simplex_raw(m: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.01f64..1.0, m)
}

fn normalize(raw: Vec<f64>) -> SimplexWeights {
    let sum: f64 = raw.iter().sum();
    SimplexWeights::new(raw.iter().map(|x| x / sum).collect()).unwrap()
}

proptest! {
    #[test]
    fn inner_product_is_bilinear(
        a in grid_values(4),
        b in grid_values(4),
        c in grid_values(4),
        alpha in -10.0f64..10.0,
        beta in -10.0f64..10.0,
    ) {
        let a = GridFunction::new(4, a).unwrap();
        let b = GridFunction::new(4, b).unwrap();
        let c = GridFunction::new(4, c).unwrap();
        let lhs = inner_product(&a.scale(alpha).add(&b.scale(beta)), &c);
        let rhs = alpha * inner_product(&a, &c) + beta * inner_product(&b, &c);
        prop_assert!((lhs - rhs).abs() <= 1e-12);
    }

    #[test]
    fn inner_product_survives_refinement(
        a in grid_values(3),
        b in grid_values(5),
        extra in 0u32..5,
    ) {
        let a = GridFunction::new(3, a).unwrap();
        let b = GridFunction::new(5, b).unwrap();
        let base = inner_product(&a, &b);
        let level = 5 + extra;
        let ar = a.refine_to(level).unwrap();
        let br = b.refine_to(level).unwrap();
        prop_assert!((inner_product(&ar, &br) - base).abs() <= 1e-12);
        prop_assert!((norm_sq(&ar) - norm_sq(&a)).abs() <= 1e-12);
        prop_assert_eq!(sup_norm(&ar), sup_norm(&a));
    }

    #[test]
    fn projection_lands_on_the_simplex_and_is_idempotent(
        v in prop::collection::vec(-5.0f64..5.0, 1..12),
    ) {
        let p = project_simplex(&v);
        prop_assert!(p.weights().iter().all(|&w| w >= 0.0));
        prop_assert!((p.weights().iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        let again = project_simplex(p.weights());
        for (a, b) in again.weights().iter().zip(p.weights()) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn projection_fixes_simplex_points(raw in simplex_raw(6)) {
        let theta = normalize(raw);
        let p = project_simplex(theta.weights());
        for (a, b) in p.weights().iter().zip(theta.weights()) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn penalty_is_nonnegative_and_matches_bias_variance(
        f0 in grid_values(3),
        f1 in grid_values(3),
        f2 in grid_values(3),
        raw in simplex_raw(3),
        g in grid_values(3),
    ) {
        let dict = Dictionary::new(
            vec![
                GridFunction::new(3, f0).unwrap(),
                GridFunction::new(3, f1).unwrap(),
                GridFunction::new(3, f2).unwrap(),
            ],
            3.0,
        )
        .unwrap();
        let theta = normalize(raw);
        let pen = penalty(&theta, &dict).unwrap();
        prop_assert!(pen >= 0.0);
        let g = GridFunction::new(3, g).unwrap();
        let lhs: f64 = theta
            .weights()
            .iter()
            .zip(dict.functions())
            .map(|(w, f)| w * norm_sq(&f.sub(&g)))
            .sum();
        let f_theta = combine(&theta, &dict).unwrap();
        prop_assert!((lhs - (norm_sq(&f_theta.sub(&g)) + pen)).abs() <= 1e-10);
    }

    #[test]
    fn exponential_weights_form_a_simplex_point_for_any_temperature(
        raw in simplex_raw(4),
        log_beta in -6.0f64..9.0,
        seed in 0u64..1000,
    ) {
        let eps = rademacher_system(4, 4).unwrap();
        let one = GridFunction::constant(4, 1.0).unwrap();
        let dict = Dictionary::new(
            eps.iter().map(|e| one.add(&e.scale(0.5))).collect(),
            1.5,
        )
        .unwrap();
        let prior = Prior::new(normalize(raw)).unwrap();
        let s = Sample::draw(&DensityFunction::uniform(4).unwrap(), 50, seed);
        let out = exponential_weights(&dict, &s, &prior, 10f64.powf(log_beta)).unwrap();
        prop_assert!(out.theta.weights().iter().all(|&w| (0.0..=1.0).contains(&w)));
        prop_assert!((out.theta.weights().iter().sum::<f64>() - 1.0).abs() <= 1e-9);
    }

    #[test]
    fn divergences_are_nonnegative_and_kl_is_dominated(
        p_raw in prop::collection::vec(0.05f64..2.0, 8),
        q_raw in prop::collection::vec(0.05f64..2.0, 8),
    ) {
        let to_density = |raw: Vec<f64>| {
            let mean = raw.iter().sum::<f64>() / raw.len() as f64;
            DensityFunction::new(
                GridFunction::new(3, raw.iter().map(|x| x / mean).collect()).unwrap(),
            )
            .unwrap()
        };
        let p = to_density(p_raw);
        let q = to_density(q_raw);
        let kl = kl_divergence(&p, &q);
        prop_assert!(kl >= -1e-12);
        prop_assert!(kl <= chi2_divergence(&p, &q) + 1e-12);
    }
}
