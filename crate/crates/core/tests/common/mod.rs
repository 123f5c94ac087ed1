#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vlasov_pgd::{FactorMatrix, HMetric, SeparatedFunction, TensorizedOperator};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Array1<f64> {
    Array1::from_shape_fn(n, |_| rng.gen_range(-1.0..1.0))
}

pub fn random_metric(rng: &mut ChaCha8Rng, nx: usize, nv: usize) -> HMetric {
    HMetric::new(
        Array1::from_shape_fn(nx, |_| rng.gen_range(0.5..1.5)),
        Array1::from_shape_fn(nv, |_| rng.gen_range(0.5..1.5)),
    )
}

pub fn random_fn(rng: &mut ChaCha8Rng, nx: usize, nv: usize, rank: usize) -> SeparatedFunction {
    let mut f = SeparatedFunction::zeros(nx, nv);
    for _ in 0..rank {
        let r = random_vec(rng, nx);
        let s = random_vec(rng, nv);
        f.push(r, s);
    }
    f
}

pub fn random_dense(rng: &mut ChaCha8Rng, n: usize) -> FactorMatrix {
    FactorMatrix::Dense(Array2::from_shape_fn((n, n), |_| rng.gen_range(-1.0..1.0)))
}

pub fn to_na(a: &Array2<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[[i, j]])
}

/// `W_x^{1/2} F W_v^{1/2}`, whose Frobenius norm is the H norm of `F`.
pub fn weighted(f: &Array2<f64>, metric: &HMetric) -> DMatrix<f64> {
    let (wx, wv) = (metric.x_weights(), metric.v_weights());
    DMatrix::from_fn(f.nrows(), f.ncols(), |i, j| f[[i, j]] * (wx[i] * wv[j]).sqrt())
}

/// Weighted singular values, non-increasing.
pub fn weighted_singular_values(f: &Array2<f64>, metric: &HMetric) -> Vec<f64> {
    let mut s: Vec<f64> = weighted(f, metric).singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

pub fn dense_h_norm(f: &Array2<f64>, metric: &HMetric) -> f64 {
    weighted(f, metric).norm()
}

/// Dense `(I + A) f = b` by LU on the Kronecker matrix.
pub fn dense_solve(op: &TensorizedOperator, b: &Array2<f64>) -> Array2<f64> {
    let (nx, nv) = b.dim();
    let mut a = to_na(&op.to_dense());
    for k in 0..nx * nv {
        a[(k, k)] += 1.0;
    }
    let rhs = DVector::from_fn(nx * nv, |k, _| b[[k / nv, k % nv]]);
    let x = a.lu().solve(&rhs).expect("nonsingular system");
    Array2::from_shape_fn((nx, nv), |(i, j)| x[i * nv + j])
}

/// `b − (I + A) f` on dense arrays.
pub fn dense_residual(op: &TensorizedOperator, b: &Array2<f64>, f: &Array2<f64>) -> Array2<f64> {
    let (nx, nv) = b.dim();
    let a = op.to_dense();
    let flat = Array1::from_iter(f.iter().copied());
    let af = a.dot(&flat);
    Array2::from_shape_fn((nx, nv), |(i, j)| b[[i, j]] - f[[i, j]] - af[i * nv + j])
}

/// `‖A‖` in the weighted operator norm, from the SVD of `W^{1/2} A W^{-1/2}`.
pub fn dense_weighted_norm(a: &Array2<f64>, w: &Array1<f64>) -> f64 {
    let m = DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[[i, j]] * (w[i] / w[j]).sqrt());
    m.singular_values().max()
}
