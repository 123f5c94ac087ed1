//! Greedy residuals held as `Σ_ij C_ij q_i ⊗ u_j` over H-orthonormal bases.
//!
//! Both bases grow by two-pass Gram–Schmidt as terms are pushed, so the core
//! `C` never exceeds `N_x × N_v` and one ALS sweep costs `O(p_x p_v)` instead
//! of `O(R (N_x + N_v))` for a residual of `R` terms. Velocity vectors are
//! pinned on entry.

use ndarray::Array1;

use crate::linalg::weighted_dot;
use crate::tensor::{HMetric, SeparatedFunction};

/// A second orthogonalization pass that removes more than this fraction of
/// the first remainder means the vector already lies in the span.
const KAHAN_RATIO: f64 = std::f64::consts::FRAC_1_SQRT_2;

#[derive(Debug, Clone, Default)]
struct Basis {
    vectors: Vec<Array1<f64>>,
}

impl Basis {
    /// Coordinates of `x` in the basis, extended by one new vector when `x`
    /// has a component outside the span and the span is not yet full.
    fn absorb(&mut self, x: &Array1<f64>, weights: &Array1<f64>) -> Vec<f64> {
        let mut coeffs = vec![0.0; self.vectors.len()];
        let mut rem = x.clone();
        let mut norms = [weighted_norm(&rem, weights), 0.0];
        if norms[0] == 0.0 {
            return coeffs;
        }
        for pass in 0..2 {
            for (c, q) in coeffs.iter_mut().zip(&self.vectors) {
                let d = weighted_dot(weights, q, &rem);
                rem.scaled_add(-d, q);
                *c += d;
            }
            norms[pass] = weighted_norm(&rem, weights);
            if pass == 0 && norms[0] == 0.0 {
                return coeffs;
            }
        }
        if self.vectors.len() < x.len() && norms[1] >= KAHAN_RATIO * norms[0] && norms[1] > 0.0 {
            rem /= norms[1];
            self.vectors.push(rem);
            coeffs.push(norms[1]);
        }
        coeffs
    }

    fn combine(&self, coeffs: &[f64], n: usize) -> Array1<f64> {
        let mut out = Array1::zeros(n);
        for (c, q) in coeffs.iter().zip(&self.vectors) {
            if *c != 0.0 {
                out.scaled_add(*c, q);
            }
        }
        out
    }

    fn coordinates(&self, x: &Array1<f64>, weights: &Array1<f64>) -> Vec<f64> {
        self.vectors.iter().map(|q| weighted_dot(weights, q, x)).collect()
    }
}

fn weighted_norm(a: &Array1<f64>, w: &Array1<f64>) -> f64 {
    weighted_dot(w, a, a).sqrt()
}

#[derive(Debug, Clone)]
pub(crate) struct CompactForm {
    nx: usize,
    nv: usize,
    x_basis: Basis,
    v_basis: Basis,
    /// Row `i` holds the coefficients of `q_i` against every `u_j`.
    core: Vec<Vec<f64>>,
    scale_sq: f64,
    terms: usize,
}

impl CompactForm {
    pub(crate) fn new(f: &SeparatedFunction, metric: &HMetric) -> Self {
        let mut out = Self {
            nx: f.nx(),
            nv: f.nv(),
            x_basis: Basis::default(),
            v_basis: Basis::default(),
            core: Vec::new(),
            scale_sq: 0.0,
            terms: 0,
        };
        for (x, y) in f.terms() {
            out.push(x, y, metric);
        }
        out
    }

    /// Number of terms pushed so far (the rank of the uncompacted sum).
    pub(crate) fn terms(&self) -> usize {
        self.terms
    }

    /// Root-sum-square of the norms of every pushed term.
    pub(crate) fn term_scale(&self) -> f64 {
        self.scale_sq.sqrt()
    }

    pub(crate) fn push(&mut self, x: &Array1<f64>, y: &Array1<f64>, metric: &HMetric) {
        let mut y = y.clone();
        metric.pin(&mut y);
        self.scale_sq += metric.inner_x(x, x) * metric.inner_v(&y, &y);
        self.terms += 1;
        let a = self.x_basis.absorb(x, metric.x_weights());
        let b = self.v_basis.absorb(&y, metric.v_weights());
        self.add_outer(&a, &b, 1.0);
    }

    /// Subtracts `(Q_x a) ⊗ (Q_v b)` given coordinates in the current bases.
    pub(crate) fn subtract(&mut self, a: &[f64], b: &[f64]) {
        let na: f64 = a.iter().map(|c| c * c).sum();
        let nb: f64 = b.iter().map(|c| c * c).sum();
        self.scale_sq += na * nb;
        self.terms += 1;
        self.add_outer(a, b, -1.0);
    }

    fn add_outer(&mut self, a: &[f64], b: &[f64], sign: f64) {
        let pv = self.v_basis.vectors.len();
        for row in &mut self.core {
            row.resize(pv, 0.0);
        }
        self.core.resize(self.x_basis.vectors.len(), vec![0.0; pv]);
        for (row, &ai) in self.core.iter_mut().zip(a) {
            if ai == 0.0 {
                continue;
            }
            for (c, &bj) in row.iter_mut().zip(b) {
                *c += sign * ai * bj;
            }
        }
    }

    /// `a = C b`.
    pub(crate) fn contract_v(&self, b: &[f64]) -> Vec<f64> {
        self.core.iter().map(|row| row.iter().zip(b).map(|(c, b)| c * b).sum()).collect()
    }

    /// `b = Cᵀ a`.
    pub(crate) fn contract_x(&self, a: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.v_basis.vectors.len()];
        for (row, &ai) in self.core.iter().zip(a) {
            if ai == 0.0 {
                continue;
            }
            for (o, c) in out.iter_mut().zip(row) {
                *o += ai * c;
            }
        }
        out
    }

    pub(crate) fn x_coordinates(&self, r: &Array1<f64>, metric: &HMetric) -> Vec<f64> {
        self.x_basis.coordinates(r, metric.x_weights())
    }

    pub(crate) fn v_coordinates(&self, s: &Array1<f64>, metric: &HMetric) -> Vec<f64> {
        self.v_basis.coordinates(s, metric.v_weights())
    }

    pub(crate) fn x_vector(&self, a: &[f64]) -> Array1<f64> {
        self.x_basis.combine(a, self.nx)
    }

    pub(crate) fn v_vector(&self, b: &[f64]) -> Array1<f64> {
        self.v_basis.combine(b, self.nv)
    }

    /// `Σ_i q_i ⊗ (Σ_j C_ij u_j)`, one term per x basis vector.
    pub(crate) fn to_function(&self) -> SeparatedFunction {
        let mut out = SeparatedFunction::zeros(self.nx, self.nv);
        for (q, row) in self.x_basis.vectors.iter().zip(&self.core) {
            let s = self.v_vector(row);
            if s.iter().any(|&c| c != 0.0) {
                out.push(q.clone(), s);
            }
        }
        out
    }
}
