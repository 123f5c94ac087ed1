//! Greedy rank-one solvers in `H = H_x ⊗ H_v`.
//!
//! * [`als_rank1`]: alternating least squares for the best rank-one
//!   approximation `r ⊗ s` of a separated target.
//! * [`pod`]: greedy deflation `PGD(b, g0, ε)`; with `g0 = 0` it computes the
//!   POD (weighted truncated SVD) of `b` one singular pair at a time.
//! * [`pgd_fp`]: fixed-point PGD for `(I + Ã) f = b`: every iteration fits one
//!   rank-one term to the residual `R_n = b − (I + Ã) f_n`, lagging `Ã`.
//!
//! All quadratic parts are the H inner product itself, so every ALS update is
//! a closed-form weighted projection; no linear systems are solved.

use std::io::Write;

use ndarray::Array1;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::compact::CompactForm;
use crate::error::{check_len, Error, Result};
use crate::tensor::{apply, HMetric, SeparatedFunction, TensorizedOperator};

/// Re-randomizations allowed when the ALS denominator vanishes.
const MAX_RESTARTS: usize = 5;

/// Relative threshold below which `‖r‖²` is treated as a vanishing denominator.
const DEGENERATE_RATIO: f64 = 1e-28;

/// Relative resolution of an ALS fixed point in double precision.
pub const ALS_STAGNATION_FLOOR: f64 = 64.0 * f64::EPSILON;

/// Greedy terms smaller than this fraction of the target's term scale are
/// indistinguishable from rounding noise; tolerances below it are clamped.
pub const ROUNDING_FLOOR: f64 = 8.0 * f64::EPSILON;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverTolerances {
    /// Greedy stopping threshold on `‖r_{n+1} ⊗ s_{n+1}‖_H`.
    pub epsilon: f64,
    /// ALS stagnation threshold on `‖r^{m+1}⊗s^{m+1} − r^m⊗s^m‖_H`.
    pub eta: f64,
    pub max_rank: usize,
    pub max_als_iters: usize,
    pub seed: u64,
}

impl Default for SolverTolerances {
    fn default() -> Self {
        Self {
            epsilon: 1e-14,
            eta: 1e-14,
            max_rank: 1000,
            max_als_iters: 50,
            seed: 0,
        }
    }
}

impl SolverTolerances {
    /// `ε = η = epsilon` with default caps.
    pub fn with_epsilon(epsilon: f64) -> Self {
        Self {
            epsilon,
            eta: epsilon,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::InvalidTolerance(format!("epsilon must be > 0, got {}", self.epsilon)));
        }
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::InvalidTolerance(format!("eta must be > 0, got {}", self.eta)));
        }
        if self.max_rank == 0 || self.max_als_iters == 0 {
            return Err(Error::InvalidTolerance("max_rank and max_als_iters must be >= 1".into()));
        }
        Ok(())
    }
}

/// Output of one ALS solve. `s` has unit `I_v`-norm (or is zero for a zero
/// target), so `‖r ⊗ s‖_H = ‖r‖_{I_x}`.
#[derive(Debug, Clone, PartialEq)]
pub struct RankOne {
    pub r: Array1<f64>,
    pub s: Array1<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl RankOne {
    pub fn norm(&self, metric: &HMetric) -> f64 {
        metric.norm_x(&self.r) * metric.norm_v(&self.s)
    }
}

fn random_unit_v(rng: &mut ChaCha8Rng, metric: &HMetric) -> Array1<f64> {
    loop {
        let mut s = Array1::from_shape_fn(metric.nv(), |_| rng.gen_range(-1.0..1.0));
        metric.pin(&mut s);
        let n = metric.norm_v(&s);
        if n > 0.0 {
            return s / n;
        }
    }
}

/// Best rank-one approximation of `target` in the H norm by alternating the
/// two closed-form factor updates
///
/// ```text
/// r ← Σ_j x_j ⟨y_j, s⟩_v / ⟨s, s⟩_v,     s ← Σ_j y_j ⟨x_j, r⟩_x / ⟨r, r⟩_x
/// ```
///
/// until the product moves by less than `η` in H norm. The RNG stream for the
/// initial guess is `(tol.seed, stream)`.
pub fn als_rank1(
    target: &SeparatedFunction,
    metric: &HMetric,
    tol: &SolverTolerances,
    stream: u64,
) -> Result<RankOne> {
    target.check_metric(metric)?;
    als_compact(&CompactForm::new(target, metric), metric, tol, stream).map(|(pair, _, _)| pair)
}

/// [`als_rank1`] on a compacted target, also returning the coordinates of
/// `r` and `s` in the target's bases.
fn als_compact(
    target: &CompactForm,
    metric: &HMetric,
    tol: &SolverTolerances,
    stream: u64,
) -> Result<(RankOne, Vec<f64>, Vec<f64>)> {
    let scale = target.term_scale();
    if target.terms() == 0 || scale == 0.0 {
        let pair = RankOne {
            r: Array1::zeros(metric.nx()),
            s: Array1::zeros(metric.nv()),
            iterations: 0,
            converged: true,
        };
        return Ok((pair, Vec::new(), Vec::new()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(tol.seed);
    rng.set_stream(stream);
    let mut b = target.v_coordinates(&random_unit_v(&mut rng, metric), metric);
    let mut a = target.x_coordinates(&Array1::from_shape_fn(metric.nx(), |_| rng.gen_range(-1.0..1.0)), metric);
    let mut restarts = 0;
    let mut iterations = 0;
    let mut converged = false;

    while iterations < tol.max_als_iters {
        iterations += 1;
        let mut a_new = target.contract_v(&b);
        let rr = dot(&a_new, &a_new);
        if rr <= DEGENERATE_RATIO * scale * scale {
            if restarts == MAX_RESTARTS {
                return Err(Error::DegenerateAls { restarts });
            }
            restarts += 1;
            b = target.v_coordinates(&random_unit_v(&mut rng, metric), metric);
            continue;
        }

        let mut b_new = target.contract_x(&a_new);
        b_new.iter_mut().for_each(|c| *c /= rr);
        let ns = dot(&b_new, &b_new).sqrt();
        if ns == 0.0 {
            if restarts == MAX_RESTARTS {
                return Err(Error::DegenerateAls { restarts });
            }
            restarts += 1;
            b = target.v_coordinates(&random_unit_v(&mut rng, metric), metric);
            continue;
        }
        b_new.iter_mut().for_each(|c| *c /= ns);
        a_new.iter_mut().for_each(|c| *c *= ns);

        // ‖r'⊗s' − r⊗s‖² = ‖r'−r‖² + ⟨r',r⟩‖s'−s‖² for unit s and s'.
        let moved = (dist_sq(&a_new, &a) + dot(&a_new, &a) * dist_sq(&b_new, &b)).max(0.0).sqrt();
        a = a_new;
        b = b_new;
        let threshold = tol.eta.max(ALS_STAGNATION_FLOOR * dot(&a, &a).sqrt());
        if moved < threshold {
            converged = true;
            break;
        }
    }
    let pair = RankOne {
        r: target.x_vector(&a),
        s: target.v_vector(&b),
        iterations,
        converged,
    };
    Ok((pair, a, b))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Result of a greedy deflation.
#[derive(Debug, Clone)]
pub struct GreedyOutcome {
    pub f: SeparatedFunction,
    /// `‖r_n ⊗ s_n‖_H` for every appended term, in order.
    pub term_norms: Vec<f64>,
    pub converged: bool,
    /// ALS solves that stopped on `max_als_iters` rather than on `η`.
    pub als_unconverged: usize,
}

/// `PGD(b, g0, ε)`: starting from `g0`, repeatedly append the best rank-one
/// approximation of `b − f_n` until its norm drops below `ε`. With `g0 = 0`
/// this is `POD(b, ε)` and the term norms are the weighted singular values of
/// `b` in non-increasing order.
pub fn pod(
    b: &SeparatedFunction,
    g0: &SeparatedFunction,
    metric: &HMetric,
    tol: &SolverTolerances,
) -> Result<GreedyOutcome> {
    tol.validate()?;
    b.check_metric(metric)?;
    g0.check_metric(metric)?;

    let mut target = b.clone();
    target.extend_scaled(g0, -1.0)?;
    let target = target.merged();
    let threshold = tol.epsilon.max(ROUNDING_FLOOR * target.term_scale(metric));
    let mut target = CompactForm::new(&target, metric);

    let mut f = g0.clone();
    let mut out = GreedyOutcome {
        f: SeparatedFunction::zeros(b.nx(), b.nv()),
        term_norms: Vec::new(),
        converged: false,
        als_unconverged: 0,
    };
    for n in 0.. {
        if target.terms() == 0 {
            out.converged = true;
            break;
        }
        if f.rank() >= tol.max_rank {
            break;
        }
        let (pair, a, c) = match als_compact(&target, metric, tol, n) {
            Ok(p) => p,
            Err(Error::DegenerateAls { .. }) => {
                out.converged = true;
                break;
            }
            Err(e) => return Err(e),
        };
        out.als_unconverged += usize::from(!pair.converged);
        let norm = pair.norm(metric);
        if norm == 0.0 {
            out.converged = true;
            break;
        }
        out.term_norms.push(norm);
        target.subtract(&a, &c);
        f.push(pair.r, pair.s);
        if norm < threshold {
            out.converged = true;
            break;
        }
    }
    out.f = f;
    Ok(out)
}

/// `POD(b, ε) = PGD(b, 0, ε)`.
pub fn pod_compress(
    b: &SeparatedFunction,
    metric: &HMetric,
    tol: &SolverTolerances,
) -> Result<GreedyOutcome> {
    pod(b, &SeparatedFunction::zeros(b.nx(), b.nv()), metric, tol)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FixedPointReport {
    pub iterations: usize,
    /// `‖R_n‖_*` at the last iteration (the norm of the last appended term).
    pub final_injective_residual: f64,
    /// `‖r_{n+1} ⊗ s_{n+1}‖_H = ‖R_n‖_*` for every iteration.
    pub residual_history: Vec<f64>,
    pub converged: bool,
    pub start_rank: usize,
    pub als_unconverged: usize,
    pub recompressions: usize,
}

impl FixedPointReport {
    /// CSV trace: `iteration,injective_residual,rank`.
    pub fn write_trace<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "iteration,injective_residual,rank")?;
        for (i, res) in self.residual_history.iter().enumerate() {
            writeln!(w, "{},{:e},{}", i + 1, res, self.start_rank + i + 1)?;
        }
        Ok(())
    }
}

/// Fixed-point PGD-ε for `(I + Ã) f = b` from the initial guess `g0`.
///
/// The residual `R_n` starts from `b − g0 − Ã g0` (exactly simplified) and
/// is updated by `R_{n+1} = R_n − r⊗s − Σ_μ (Ã_x^μ r) ⊗ (Ã_v^μ s)` over
/// orthonormal bases. Once more than `4·max(rank b, rank f_n)` terms have
/// been added it is recompressed by POD at `ε/10`.
pub fn pgd_fp(
    atilde: &TensorizedOperator,
    b: &SeparatedFunction,
    g0: &SeparatedFunction,
    metric: &HMetric,
    tol: &SolverTolerances,
) -> Result<(SeparatedFunction, FixedPointReport)> {
    tol.validate()?;
    b.check_metric(metric)?;
    g0.check_metric(metric)?;
    check_len("operator x block", metric.nx(), atilde.nx())?;
    check_len("operator v block", metric.nv(), atilde.nv())?;

    let active: Vec<_> = atilde
        .terms()
        .iter()
        .filter(|(ax, av)| !(ax.is_zero() || av.is_zero()))
        .collect();

    let mut residual = b.clone();
    residual.extend_scaled(g0, -1.0)?;
    if !active.is_empty() {
        residual.extend_scaled(&apply(atilde, g0)?, -1.0)?;
    }
    let residual = residual.merged();
    let threshold = tol.epsilon.max(ROUNDING_FLOOR * residual.term_scale(metric));
    let mut residual = CompactForm::new(&residual, metric);

    let recompress_tol = SolverTolerances {
        epsilon: tol.epsilon / 10.0,
        eta: tol.eta / 10.0,
        ..*tol
    };

    let mut f = g0.clone();
    let mut report = FixedPointReport {
        iterations: 0,
        final_injective_residual: 0.0,
        residual_history: Vec::new(),
        converged: false,
        start_rank: g0.rank(),
        als_unconverged: 0,
        recompressions: 0,
    };
    for n in 0.. {
        if residual.terms() == 0 {
            report.converged = true;
            break;
        }
        if f.rank() >= tol.max_rank {
            break;
        }
        let (pair, a, c) = match als_compact(&residual, metric, tol, n) {
            Ok(p) => p,
            Err(Error::DegenerateAls { .. }) => {
                report.converged = true;
                break;
            }
            Err(e) => return Err(e),
        };
        report.als_unconverged += usize::from(!pair.converged);
        let norm = pair.norm(metric);
        if norm == 0.0 {
            report.converged = true;
            break;
        }
        report.iterations += 1;
        report.residual_history.push(norm);
        report.final_injective_residual = norm;

        residual.subtract(&a, &c);
        for (ax, av) in &active {
            residual.push(&-ax.apply(pair.r.view()), &av.apply(pair.s.view()), metric);
        }
        f.push(pair.r, pair.s);
        if norm < threshold {
            report.converged = true;
            break;
        }
        if residual.terms() > 4 * b.rank().max(f.rank()) {
            let compressed = pod_compress(&residual.to_function(), metric, &recompress_tol)?.f;
            residual = CompactForm::new(&compressed, metric);
            report.recompressions += 1;
        }
    }
    Ok((f, report))
}

/// Power-iteration estimate of `κ = max_μ ‖Ã_x^μ ⊗ Ã_v^μ‖` in the H operator
/// norm, using `‖A_x ⊗ A_v‖ = ‖A_x‖_{I_x} ‖A_v‖_{I_v}`.
pub fn kappa_bound(atilde: &TensorizedOperator, metric: &HMetric, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    atilde
        .terms()
        .iter()
        .map(|(ax, av)| {
            weighted_operator_norm(ax, metric.x_weights(), &mut rng)
                * weighted_operator_norm(av, metric.v_weights(), &mut rng)
        })
        .fold(0.0, f64::max)
}

const POWER_ITERATIONS: usize = 50;

/// `‖A‖_W = ‖W^{1/2} A W^{-1/2}‖₂`, estimated by power iteration on `BᵀB`.
fn weighted_operator_norm(
    a: &crate::linalg::FactorMatrix,
    weights: &Array1<f64>,
    rng: &mut ChaCha8Rng,
) -> f64 {
    if a.is_zero() {
        return 0.0;
    }
    let sq = weights.mapv(f64::sqrt);
    let apply_b = |z: &Array1<f64>| &sq * &a.apply((z / &sq).view());
    let apply_bt = |y: &Array1<f64>| a.apply_transpose((&sq * y).view()) / &sq;
    let mut z: Array1<f64> = Array1::from_shape_fn(a.dim(), |_| rng.gen_range(-1.0..1.0));
    z /= z.dot(&z).sqrt();
    let mut sigma = 0.0;
    for _ in 0..POWER_ITERATIONS {
        let bz = apply_b(&z);
        sigma = bz.dot(&bz).sqrt();
        if sigma == 0.0 {
            return 0.0;
        }
        let w = apply_bt(&bz);
        let nw = w.dot(&w).sqrt();
        if nw == 0.0 {
            break;
        }
        z = w / nw;
    }
    sigma
}
