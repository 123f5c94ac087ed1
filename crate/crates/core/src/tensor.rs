//! Separated (rank-n) functions `f = Σ_k r_k ⊗ s_k` on the phase grid,
//! tensorized operators `Σ_μ A_x^μ ⊗ A_v^μ`, and the H inner product
//! `⟨f, g⟩_H = Tr(fᵀ I_x g I_v)` evaluated without forming `N_x × N_v` arrays.

use std::collections::HashMap;

use ndarray::{Array1, Array2};

use crate::error::{check_len, Error, Result};
use crate::linalg::{weighted_dot, FactorMatrix};

/// Diagonal mass structure of `H = H_x ⊗ H_v`.
///
/// `pinned_v` lists velocity nodes where every v-factor is held at zero
/// (homogeneous Dirichlet nodes).
#[derive(Debug, Clone, PartialEq)]
pub struct HMetric {
    x_weights: Array1<f64>,
    v_weights: Array1<f64>,
    pinned_v: Vec<usize>,
}

impl HMetric {
    pub fn new(x_weights: Array1<f64>, v_weights: Array1<f64>) -> Self {
        assert!(
            x_weights.iter().chain(v_weights.iter()).all(|&w| w > 0.0),
            "mass weights must be positive"
        );
        Self {
            x_weights,
            v_weights,
            pinned_v: Vec::new(),
        }
    }

    /// Unit weights on both blocks (the plain Frobenius inner product).
    pub fn unit(nx: usize, nv: usize) -> Self {
        Self::new(Array1::ones(nx), Array1::ones(nv))
    }

    pub fn with_pinned_v(mut self, pinned: Vec<usize>) -> Self {
        assert!(pinned.iter().all(|&j| j < self.v_weights.len()));
        self.pinned_v = pinned;
        self
    }

    pub fn nx(&self) -> usize {
        self.x_weights.len()
    }
    pub fn nv(&self) -> usize {
        self.v_weights.len()
    }
    pub fn x_weights(&self) -> &Array1<f64> {
        &self.x_weights
    }
    pub fn v_weights(&self) -> &Array1<f64> {
        &self.v_weights
    }
    pub fn pinned_v(&self) -> &[usize] {
        &self.pinned_v
    }

    pub fn inner_x(&self, a: &Array1<f64>, b: &Array1<f64>) -> f64 {
        weighted_dot(&self.x_weights, a, b)
    }

    pub fn inner_v(&self, a: &Array1<f64>, b: &Array1<f64>) -> f64 {
        weighted_dot(&self.v_weights, a, b)
    }

    pub fn norm_x(&self, a: &Array1<f64>) -> f64 {
        self.inner_x(a, a).sqrt()
    }

    pub fn norm_v(&self, a: &Array1<f64>) -> f64 {
        self.inner_v(a, a).sqrt()
    }

    /// Zeroes the pinned velocity nodes of `s`.
    pub fn pin(&self, s: &mut Array1<f64>) {
        for &j in &self.pinned_v {
            s[j] = 0.0;
        }
    }
}

/// `Σ_{k=1..n} r_k ⊗ s_k`; rank 0 is the zero function.
#[derive(Debug, Clone, PartialEq)]
pub struct SeparatedFunction {
    nx: usize,
    nv: usize,
    x_factors: Vec<Array1<f64>>,
    v_factors: Vec<Array1<f64>>,
}

impl SeparatedFunction {
    pub fn zeros(nx: usize, nv: usize) -> Self {
        Self {
            nx,
            nv,
            x_factors: Vec::new(),
            v_factors: Vec::new(),
        }
    }

    pub fn from_factors(
        nx: usize,
        nv: usize,
        x_factors: Vec<Array1<f64>>,
        v_factors: Vec<Array1<f64>>,
    ) -> Result<Self> {
        check_len("factor count", x_factors.len(), v_factors.len())?;
        for r in &x_factors {
            check_len("x-factor length", nx, r.len())?;
        }
        for s in &v_factors {
            check_len("v-factor length", nv, s.len())?;
        }
        Ok(Self {
            nx,
            nv,
            x_factors,
            v_factors,
        })
    }

    pub fn rank_one(r: Array1<f64>, s: Array1<f64>) -> Self {
        Self {
            nx: r.len(),
            nv: s.len(),
            x_factors: vec![r],
            v_factors: vec![s],
        }
    }

    pub fn rank(&self) -> usize {
        self.x_factors.len()
    }
    pub fn nx(&self) -> usize {
        self.nx
    }
    pub fn nv(&self) -> usize {
        self.nv
    }
    pub fn x_factors(&self) -> &[Array1<f64>] {
        &self.x_factors
    }
    pub fn v_factors(&self) -> &[Array1<f64>] {
        &self.v_factors
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Array1<f64>, &Array1<f64>)> {
        self.x_factors.iter().zip(self.v_factors.iter())
    }

    /// Appends one pure tensor product.
    pub fn push(&mut self, r: Array1<f64>, s: Array1<f64>) {
        assert_eq!(r.len(), self.nx, "x-factor length");
        assert_eq!(s.len(), self.nv, "v-factor length");
        self.x_factors.push(r);
        self.v_factors.push(s);
    }

    /// Appends every term of `other` (represents `self + other`).
    pub fn extend(&mut self, other: &SeparatedFunction) -> Result<()> {
        self.check_shape(other)?;
        self.x_factors.extend(other.x_factors.iter().cloned());
        self.v_factors.extend(other.v_factors.iter().cloned());
        Ok(())
    }

    /// Appends every term of `other` multiplied by `c`.
    pub fn extend_scaled(&mut self, other: &SeparatedFunction, c: f64) -> Result<()> {
        self.check_shape(other)?;
        self.x_factors.extend(other.x_factors.iter().map(|r| r * c));
        self.v_factors.extend(other.v_factors.iter().cloned());
        Ok(())
    }

    pub fn check_shape(&self, other: &SeparatedFunction) -> Result<()> {
        check_len("x block size", self.nx, other.nx)?;
        check_len("v block size", self.nv, other.nv)
    }

    pub fn check_metric(&self, metric: &HMetric) -> Result<()> {
        check_len("x block size", metric.nx(), self.nx)?;
        check_len("v block size", metric.nv(), self.nv)
    }

    /// Materializes the `N_x × N_v` matrix `Σ_k r_k s_kᵀ`.
    pub fn to_dense(&self) -> Array2<f64> {
        let mut m = Array2::zeros((self.nx, self.nv));
        for (r, s) in self.terms() {
            for (i, &ri) in r.iter().enumerate() {
                if ri != 0.0 {
                    m.row_mut(i).scaled_add(ri, s);
                }
            }
        }
        m
    }

    /// Value at node `(i, j)`.
    pub fn value_at(&self, i: usize, j: usize) -> f64 {
        self.terms().map(|(r, s)| r[i] * s[j]).sum()
    }

    /// Square root of `Σ_k ‖r_k ⊗ s_k‖²_H`: the magnitude of the representation,
    /// which sets the rounding error committed when the terms are summed.
    pub fn term_scale(&self, metric: &HMetric) -> f64 {
        self.terms()
            .map(|(r, s)| metric.inner_x(r, r) * metric.inner_v(s, s))
            .sum::<f64>()
            .sqrt()
    }

    /// Exact algebraic simplification: terms sharing a bit-identical v-factor
    /// (then x-factor) are merged by adding their partner factors, and terms
    /// with an all-zero factor are dropped. Repeated factors appear whenever a
    /// residual contains both `g` and `-g`, which then cancel exactly.
    pub fn merged(&self) -> SeparatedFunction {
        let by_v = merge_on(&self.v_factors, &self.x_factors);
        let (v, x) = by_v;
        let (x, v) = merge_on(&x, &v);
        let (x_factors, v_factors): (Vec<_>, Vec<_>) = x
            .into_iter()
            .zip(v)
            .filter(|(r, s)| r.iter().any(|&a| a != 0.0) && s.iter().any(|&b| b != 0.0))
            .unzip();
        SeparatedFunction {
            nx: self.nx,
            nv: self.nv,
            x_factors,
            v_factors,
        }
    }
}

/// Groups terms by bit-identical `keys`, summing the matching `values` in
/// order of first appearance.
fn merge_on(keys: &[Array1<f64>], values: &[Array1<f64>]) -> (Vec<Array1<f64>>, Vec<Array1<f64>>) {
    let mut slot: HashMap<Vec<u64>, usize> = HashMap::with_capacity(keys.len());
    let mut out_keys: Vec<Array1<f64>> = Vec::with_capacity(keys.len());
    let mut out_values: Vec<Array1<f64>> = Vec::with_capacity(keys.len());
    for (k, v) in keys.iter().zip(values) {
        let bits: Vec<u64> = k.iter().map(|x| x.to_bits()).collect();
        match slot.get(&bits) {
            Some(&idx) => out_values[idx] += v,
            None => {
                slot.insert(bits, out_keys.len());
                out_keys.push(k.clone());
                out_values.push(v.clone());
            }
        }
    }
    (out_keys, out_values)
}

/// `f + g`, rank `n_f + n_g`.
pub fn concat(f: &SeparatedFunction, g: &SeparatedFunction) -> Result<SeparatedFunction> {
    let mut out = f.clone();
    out.extend(g)?;
    Ok(out)
}

/// `c · f`; the x-factors carry the scalar.
pub fn scale(f: &SeparatedFunction, c: f64) -> SeparatedFunction {
    SeparatedFunction {
        nx: f.nx,
        nv: f.nv,
        x_factors: f.x_factors.iter().map(|r| r * c).collect(),
        v_factors: f.v_factors.clone(),
    }
}

/// `⟨f, g⟩_H = Σ_{k,l} (r_k · I_x r'_l)(s_k · I_v s'_l)`.
pub fn inner_h(f: &SeparatedFunction, g: &SeparatedFunction, metric: &HMetric) -> Result<f64> {
    f.check_metric(metric)?;
    g.check_metric(metric)?;
    let mut total = 0.0;
    for (r, s) in f.terms() {
        for (rp, sp) in g.terms() {
            total += metric.inner_x(r, rp) * metric.inner_v(s, sp);
        }
    }
    Ok(total)
}

/// `‖f‖_H`. Clamped at zero against cancellation in the double sum.
pub fn norm_h(f: &SeparatedFunction, metric: &HMetric) -> Result<f64> {
    Ok(inner_h(f, f, metric)?.max(0.0).sqrt())
}

/// `Σ_μ A_x^μ ⊗ A_v^μ`.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorizedOperator {
    terms: Vec<(FactorMatrix, FactorMatrix)>,
}

impl TensorizedOperator {
    pub fn new(terms: Vec<(FactorMatrix, FactorMatrix)>) -> Result<Self> {
        let Some((ax0, av0)) = terms.first() else {
            return Err(Error::Dimension("a tensorized operator needs at least one term".into()));
        };
        let (nx, nv) = (ax0.dim(), av0.dim());
        for (ax, av) in &terms {
            if !ax.is_square() || !av.is_square() {
                return Err(Error::Dimension("operator blocks must be square".into()));
            }
            check_len("operator x block", nx, ax.dim())?;
            check_len("operator v block", nv, av.dim())?;
        }
        Ok(Self { terms })
    }

    /// Single all-zero term.
    pub fn zero(nx: usize, nv: usize) -> Self {
        Self {
            terms: vec![(
                FactorMatrix::Diagonal(Array1::zeros(nx)),
                FactorMatrix::Diagonal(Array1::zeros(nv)),
            )],
        }
    }

    pub fn n_terms(&self) -> usize {
        self.terms.len()
    }
    pub fn nx(&self) -> usize {
        self.terms[0].0.dim()
    }
    pub fn nv(&self) -> usize {
        self.terms[0].1.dim()
    }
    pub fn terms(&self) -> &[(FactorMatrix, FactorMatrix)] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.iter().all(|(ax, av)| ax.is_zero() || av.is_zero())
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            terms: self.terms.iter().map(|(ax, av)| (ax.scaled(c), av.clone())).collect(),
        }
    }

    /// Dense `Σ_μ A_x^μ ⊗ A_v^μ` acting on the row-major flattening of an
    /// `N_x × N_v` array (index `i · N_v + j`).
    pub fn to_dense(&self) -> Array2<f64> {
        let (nx, nv) = (self.nx(), self.nv());
        let mut out = Array2::zeros((nx * nv, nx * nv));
        for (ax, av) in &self.terms {
            let (ax, av) = (ax.to_dense(), av.to_dense());
            for i in 0..nx {
                for ip in 0..nx {
                    let a = ax[[i, ip]];
                    if a == 0.0 {
                        continue;
                    }
                    for j in 0..nv {
                        for jp in 0..nv {
                            out[[i * nv + j, ip * nv + jp]] += a * av[[j, jp]];
                        }
                    }
                }
            }
        }
        out
    }
}

/// `P f` as a separated function of rank `M · n`, ordered μ-major then k.
pub fn apply(op: &TensorizedOperator, f: &SeparatedFunction) -> Result<SeparatedFunction> {
    check_len("operator x block", f.nx, op.nx())?;
    check_len("operator v block", f.nv, op.nv())?;
    let mut out = SeparatedFunction::zeros(f.nx, f.nv);
    for (ax, av) in &op.terms {
        for (r, s) in f.terms() {
            out.push(ax.apply(r.view()), av.apply(s.view()));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Array1<f64> {
        Array1::from_shape_fn(n, |_| rng.gen_range(-1.0..1.0))
    }

    fn random_fn(rng: &mut ChaCha8Rng, nx: usize, nv: usize, rank: usize) -> SeparatedFunction {
        let mut f = SeparatedFunction::zeros(nx, nv);
        for _ in 0..rank {
            f.push(random_vec(rng, nx), random_vec(rng, nv));
        }
        f
    }

    fn random_metric(rng: &mut ChaCha8Rng, nx: usize, nv: usize) -> HMetric {
        HMetric::new(
            Array1::from_shape_fn(nx, |_| rng.gen_range(0.1..2.0)),
            Array1::from_shape_fn(nv, |_| rng.gen_range(0.1..2.0)),
        )
    }

    /// Tr(Fᵀ I_x G I_v) on materialized arrays.
    fn dense_inner(f: &Array2<f64>, g: &Array2<f64>, m: &HMetric) -> f64 {
        let mut total = 0.0;
        for i in 0..f.nrows() {
            for j in 0..f.ncols() {
                total += m.x_weights()[i] * m.v_weights()[j] * f[[i, j]] * g[[i, j]];
            }
        }
        total
    }

    #[test]
    fn inner_of_ones_counts_nodes() {
        let f = SeparatedFunction::rank_one(Array1::ones(6), Array1::ones(9));
        let m = HMetric::unit(6, 9);
        assert_eq!(inner_h(&f, &f, &m).unwrap(), 54.0);
    }

    #[test]
    fn rank_zero_is_the_zero_function() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let z = SeparatedFunction::zeros(5, 4);
        let g = random_fn(&mut rng, 5, 4, 3);
        let m = HMetric::unit(5, 4);
        assert_eq!(inner_h(&z, &g, &m).unwrap(), 0.0);
        assert_eq!(norm_h(&z, &m).unwrap(), 0.0);
        assert_eq!(z.to_dense(), Array2::zeros((5, 4)));
    }

    #[test]
    fn inner_matches_dense_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let m = random_metric(&mut rng, 11, 7);
        let f = random_fn(&mut rng, 11, 7, 2);
        let g = random_fn(&mut rng, 11, 7, 3);
        let fast = inner_h(&f, &g, &m).unwrap();
        let dense = dense_inner(&f.to_dense(), &g.to_dense(), &m);
        assert_relative_eq!(fast, dense, max_relative = 1e-12);
    }

    #[test]
    fn norm_matches_dense_oracle_and_is_homogeneous() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = random_metric(&mut rng, 9, 13);
        let f = random_fn(&mut rng, 9, 13, 4);
        let d = f.to_dense();
        let n = norm_h(&f, &m).unwrap();
        assert_relative_eq!(n, dense_inner(&d, &d, &m).sqrt(), max_relative = 1e-12);
        assert_relative_eq!(norm_h(&scale(&f, 2.0), &m).unwrap(), 2.0 * n, max_relative = 1e-14);
    }

    #[test]
    fn norm_of_pure_product_is_product_of_norms() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let m = random_metric(&mut rng, 8, 6);
        let (r, s) = (random_vec(&mut rng, 8), random_vec(&mut rng, 6));
        let f = SeparatedFunction::rank_one(r.clone() / m.norm_x(&r), s.clone() / m.norm_v(&s));
        assert_relative_eq!(norm_h(&f, &m).unwrap(), 1.0, max_relative = 1e-14);
        let g = SeparatedFunction::rank_one(r.clone(), s.clone());
        assert_relative_eq!(
            norm_h(&g, &m).unwrap(),
            m.norm_x(&r) * m.norm_v(&s),
            max_relative = 1e-14
        );
    }

    #[test]
    fn apply_bookkeeping_and_dense_kronecker_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (nx, nv) = (5, 4);
        let dense = |rng: &mut ChaCha8Rng, n: usize| {
            FactorMatrix::Dense(Array2::from_shape_fn((n, n), |_| rng.gen_range(-1.0..1.0)))
        };
        let op = TensorizedOperator::new(vec![
            (dense(&mut rng, nx), dense(&mut rng, nv)),
            (dense(&mut rng, nx), dense(&mut rng, nv)),
        ])
        .unwrap();
        let f = random_fn(&mut rng, nx, nv, 2);
        let pf = apply(&op, &f).unwrap();
        assert_eq!(pf.rank(), 4);

        let flat = Array1::from_iter(f.to_dense().iter().copied());
        let expected = op.to_dense().dot(&flat);
        let got = pf.to_dense();
        for i in 0..nx {
            for j in 0..nv {
                assert!((got[[i, j]] - expected[i * nv + j]).abs() < 1e-12);
            }
        }

        let f3 = random_fn(&mut rng, nx, nv, 3);
        assert_eq!(apply(&op, &f3).unwrap().rank(), 6);
    }

    #[test]
    fn identity_operator_leaves_factors_unchanged() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let f = random_fn(&mut rng, 6, 5, 3);
        let id = TensorizedOperator::new(vec![(FactorMatrix::identity(6), FactorMatrix::identity(5))])
            .unwrap();
        assert_eq!(apply(&id, &f).unwrap(), f);
    }

    #[test]
    fn concat_with_zero_keeps_contents() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let f = random_fn(&mut rng, 6, 5, 3);
        assert_eq!(concat(&f, &SeparatedFunction::zeros(6, 5)).unwrap(), f);
        let z = scale(&f, 0.0);
        assert_eq!(z.rank(), 3);
        assert_eq!(norm_h(&z, &HMetric::unit(6, 5)).unwrap(), 0.0);
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let f = SeparatedFunction::rank_one(Array1::ones(3), Array1::ones(4));
        let g = SeparatedFunction::rank_one(Array1::ones(3), Array1::ones(5));
        assert!(concat(&f, &g).is_err());
        assert!(inner_h(&f, &g, &HMetric::unit(3, 4)).is_err());
        let op = TensorizedOperator::zero(3, 5);
        assert!(apply(&op, &f).is_err());
        assert!(SeparatedFunction::from_factors(3, 4, vec![Array1::ones(3)], vec![]).is_err());
    }

    #[test]
    fn merge_cancels_negated_copies_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let f = random_fn(&mut rng, 7, 6, 3);
        let g = random_fn(&mut rng, 7, 6, 2);
        let combo = concat(&concat(&f, &g).unwrap(), &scale(&f, -1.0)).unwrap();
        let merged = combo.merged();
        assert_eq!(merged.rank(), 2);
        assert_eq!(merged.to_dense(), g.to_dense());
    }
}
