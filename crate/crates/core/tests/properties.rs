mod common;

use common::*;
use proptest::prelude::*;
use vlasov_pgd::{apply, fit_decay, inner_h, pod_compress, scale, concat, SolverTolerances, TensorizedOperator};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn inner_product_is_bilinear(seed in any::<u64>(), a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let mut rng = rng(seed);
        let metric = random_metric(&mut rng, 7, 5);
        let f = random_fn(&mut rng, 7, 5, 2);
        let g = random_fn(&mut rng, 7, 5, 3);
        let h = random_fn(&mut rng, 7, 5, 1);
        let combo = concat(&scale(&f, a), &scale(&g, b)).unwrap();
        let lhs = inner_h(&combo, &h, &metric).unwrap();
        let rhs = a * inner_h(&f, &h, &metric).unwrap() + b * inner_h(&g, &h, &metric).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
        let sym = inner_h(&h, &combo, &metric).unwrap();
        prop_assert!((lhs - sym).abs() <= 1e-12 * (1.0 + lhs.abs()));
    }

    #[test]
    fn apply_is_linear(seed in any::<u64>(), a in -3.0f64..3.0) {
        let mut rng = rng(seed);
        let op = TensorizedOperator::new(vec![(random_dense(&mut rng, 6), random_dense(&mut rng, 4))]).unwrap();
        let f = random_fn(&mut rng, 6, 4, 2);
        let g = random_fn(&mut rng, 6, 4, 2);
        let lhs = apply(&op, &concat(&scale(&f, a), &g).unwrap()).unwrap().to_dense();
        let rhs = apply(&op, &f).unwrap().to_dense() * a + apply(&op, &g).unwrap().to_dense();
        let dense = op.to_dense().dot(&ndarray::Array1::from_iter(g.to_dense().iter().copied()));
        let gd = apply(&op, &g).unwrap().to_dense();
        for (x, y) in lhs.iter().zip(rhs.iter()) {
            prop_assert!((x - y).abs() <= 1e-12 * (1.0 + x.abs()));
        }
        for (x, y) in gd.iter().zip(dense.iter()) {
            prop_assert!((x - y).abs() <= 1e-12 * (1.0 + x.abs()));
        }
    }

    #[test]
    fn pod_is_deterministic(seed in any::<u64>(), tol_seed in 0u64..1000) {
        let mut rng = rng(seed);
        let metric = random_metric(&mut rng, 9, 8);
        let f = random_fn(&mut rng, 9, 8, 4);
        let tol = SolverTolerances { seed: tol_seed, ..SolverTolerances::with_epsilon(1e-10) };
        let a = pod_compress(&f, &metric, &tol).unwrap();
        let b = pod_compress(&f, &metric, &tol).unwrap();
        prop_assert_eq!(a.f, b.f);
        prop_assert_eq!(a.term_norms, b.term_norms);
    }

    #[test]
    fn decay_fit_ignores_energy_scale(gamma in 0.05f64..0.4, omega in 1.0f64..2.0, c in 1e-6f64..1e6) {
        let t: Vec<f64> = (0..2000).map(|i| i as f64 * 0.01).collect();
        let e: Vec<f64> = t.iter().map(|&t| (-2.0 * gamma * t).exp() * (omega * t).cos().powi(2) + 1e-30).collect();
        let scaled: Vec<f64> = e.iter().map(|v| v * c).collect();
        let a = fit_decay(&t, &e).unwrap();
        let b = fit_decay(&t, &scaled).unwrap();
        prop_assert_eq!(a.peaks_used, b.peaks_used);
        prop_assert!((a.gamma_fit - b.gamma_fit).abs() < 1e-9);
        prop_assert!((a.gamma_fit - gamma).abs() < 0.02 * gamma + 1e-3);
    }
}
