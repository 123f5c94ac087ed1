mod common;

use common::*;
use vlasov_pgd::{kappa_bound, pgd_fp, SeparatedFunction, SolverTolerances, TensorizedOperator};

/// Random two-term operator rescaled so that `3Mκ = target`.
fn contracting_operator(rng: &mut rand_chacha::ChaCha8Rng, metric: &vlasov_pgd::HMetric, target: f64) -> TensorizedOperator {
    let n = metric.nx();
    let op = TensorizedOperator::new(vec![(random_dense(rng, n), random_dense(rng, n)), (random_dense(rng, n), random_dense(rng, n))]).unwrap();
    let kappa = exact_kappa(&op, metric);
    op.scaled(target / (3.0 * op.n_terms() as f64 * kappa))
}

fn exact_kappa(op: &TensorizedOperator, metric: &vlasov_pgd::HMetric) -> f64 {
    op.terms()
        .iter()
        .map(|(ax, av)| dense_weighted_norm(&ax.to_dense(), metric.x_weights()) * dense_weighted_norm(&av.to_dense(), metric.v_weights()))
        .fold(0.0, f64::max)
}

#[test]
fn matches_dense_direct_solve() {
    let mut rng = rng(10);
    for _ in 0..10 {
        let metric = random_metric(&mut rng, 12, 12);
        let op = contracting_operator(&mut rng, &metric, 0.5);
        let b = random_fn(&mut rng, 12, 12, 3);
        let eps = 1e-10;
        let (f, report) = pgd_fp(&op, &b, &SeparatedFunction::zeros(12, 12), &metric, &SolverTolerances::with_epsilon(eps)).unwrap();
        assert!(report.converged);
        let exact = dense_solve(&op, &b.to_dense());
        let err = dense_h_norm(&(f.to_dense() - exact), &metric);
        assert!(err < 10.0 * eps, "error {err:e}");
    }
}

#[test]
fn residual_decreases_by_the_contraction_margin() {
    let mut rng = rng(11);
    for _ in 0..10 {
        let metric = random_metric(&mut rng, 12, 12);
        let op = contracting_operator(&mut rng, &metric, 0.6);
        let kappa = exact_kappa(&op, &metric);
        let margin = 1.0 - 3.0 * kappa * op.n_terms() as f64;
        let b = random_fn(&mut rng, 12, 12, 2);
        let bd = b.to_dense();
        let (f, report) = pgd_fp(&op, &b, &SeparatedFunction::zeros(12, 12), &metric, &SolverTolerances::with_epsilon(1e-10)).unwrap();
        let mut partial = SeparatedFunction::zeros(12, 12);
        let mut prev = dense_h_norm(&bd, &metric);
        for ((r, s), term) in f.terms().zip(&report.residual_history) {
            partial.push(r.clone(), s.clone());
            let res = dense_h_norm(&dense_residual(&op, &bd, &partial.to_dense()), &metric);
            assert!(res <= prev * (1.0 + 1e-12), "residual grew: {prev:e} -> {res:e}");
            assert!(prev * prev - res * res >= margin * term * term - 1e-12 * prev * prev, "inequality violated");
            prev = res;
        }
    }
}

#[test]
fn power_iteration_kappa_matches_dense_norm() {
    let mut rng = rng(12);
    for _ in 0..10 {
        let metric = random_metric(&mut rng, 10, 9);
        let op = TensorizedOperator::new(vec![(random_dense(&mut rng, 10), random_dense(&mut rng, 9)), (random_dense(&mut rng, 10), random_dense(&mut rng, 9))]).unwrap();
        let estimate = kappa_bound(&op, &metric, 7);
        let exact = exact_kappa(&op, &metric);
        assert!((estimate - exact).abs() <= 0.05 * exact, "{estimate} vs {exact}");
        assert!(estimate <= exact * (1.0 + 1e-12));
    }
}

#[test]
fn warm_start_at_the_solution_stops_immediately() {
    let mut rng = rng(13);
    let metric = random_metric(&mut rng, 8, 8);
    let op = contracting_operator(&mut rng, &metric, 0.3);
    let b = random_fn(&mut rng, 8, 8, 2);
    let tol = SolverTolerances::with_epsilon(1e-12);
    let (f, _) = pgd_fp(&op, &b, &SeparatedFunction::zeros(8, 8), &metric, &tol).unwrap();
    let (g, report) = pgd_fp(&op, &b, &f, &metric, &tol).unwrap();
    assert!(report.converged);
    assert!(report.iterations <= 1);
    assert!(dense_h_norm(&(g.to_dense() - f.to_dense()), &metric) < 1e-11);
}
