//! Störmer–Verlet time stepping with PGD-solved substeps.
//!
//! With `h = Δt/2`, `T = Σ_α C_{α,x} ⊗ diag(v_α)` (the operator `v·∇_x`) and
//! `G(E) = Σ_α diag(E_α) ⊗ C_{α,v}` (the operator `E·∇_v`), one step of the
//! default configuration reads
//!
//! ```text
//! (I − h G(E^m)) f^{m+1/3} = f^m
//! (I + h T) f^{m+2/3}      = (I − h T) f^{m+1/3}
//! f^{m+1}                  = (I + h G(E^{m+2/3})) f^{m+2/3}
//! ```
//!
//! The two implicit substeps go through [`pgd_fp`] and every substep output is
//! recompressed by POD. [`ForceSign`] and [`Splitting`] select the alternative
//! sign and substep layouts.

use log::{debug, warn};
use thiserror::Error;

use crate::error::Error;
use crate::field::{density, solve_poisson_with, FieldState, PoissonSolver};
use crate::grid::PhaseGrid;
use crate::linalg::FactorMatrix;
use crate::pgd::{kappa_bound, pgd_fp, pod_compress, FixedPointReport, SolverTolerances};
use crate::tensor::{apply, concat, SeparatedFunction, TensorizedOperator};

/// Sign of the `E·∇_v` terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ForceSign {
    /// `(I − hE·∇_v)` implicit first, `(I + hE·∇_v)` explicit last.
    #[default]
    Physical,
    /// `(I + hE·∇_v)` implicit first, `(I − hE·∇_v)` explicit last.
    Boxed,
}

/// Placement of the transport terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Splitting {
    /// Force half-step, Crank–Nicolson transport over `Δt`, force half-step.
    #[default]
    Symmetric,
    /// Explicit transport on the first right-hand side, implicit transport second.
    Boxed,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepConfig {
    pub dt: f64,
    pub tol: SolverTolerances,
    /// POD-recompress after every substep.
    pub recompress: bool,
    pub force_sign: ForceSign,
    pub splitting: Splitting,
}

impl StepConfig {
    pub fn new(dt: f64, tol: SolverTolerances) -> crate::Result<Self> {
        let cfg = Self {
            dt,
            tol,
            recompress: true,
            force_sign: ForceSign::default(),
            splitting: Splitting::default(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> crate::Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidTolerance(format!("time step must be > 0, got {}", self.dt)));
        }
        self.tol.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepMetadata {
    /// Index of the completed step (1 for the first step).
    pub step: usize,
    pub t: f64,
    pub rank_in: usize,
    /// Ranks after each of the three substeps.
    pub ranks: [usize; 3],
    pub fp_iterations: [usize; 2],
    pub fp_residuals: [f64; 2],
    pub kappa: [f64; 2],
    pub recompressions: usize,
    pub als_unconverged: usize,
}

#[derive(Debug, Clone)]
pub struct StepOutput {
    pub f: SeparatedFunction,
    /// Field of the incoming iterate, `E^{(m)}`.
    pub field_start: FieldState,
    /// Field used by the final force substep, `E^{(m+2/3)}`.
    pub field_mid: FieldState,
    pub meta: StepMetadata,
}

#[derive(Debug, Error)]
pub enum StepError {
    #[error(
        "step {step}: {stage} did not converge ({iterations} iterations, residual {residual:e}); \
         the time step has to be small enough for the fixed-point contraction, reduce dt or relax eps"
    )]
    NonConvergence {
        step: usize,
        stage: &'static str,
        iterations: usize,
        residual: f64,
    },
    #[error("step {step}: {source}")]
    Solver {
        step: usize,
        #[source]
        source: Error,
    },
}

/// Per-grid state reused across steps.
#[derive(Debug)]
pub struct Stepper<'g> {
    grid: &'g PhaseGrid,
    cfg: StepConfig,
    poisson: PoissonSolver,
    transport: TensorizedOperator,
    transport_kappa: f64,
    warned: bool,
}

/// `T = Σ_α C_{α,x} ⊗ diag(v_α)`.
pub fn transport_operator(grid: &PhaseGrid) -> TensorizedOperator {
    TensorizedOperator::new(
        (0..grid.dim())
            .map(|a| (grid.x_stencil(a).clone(), FactorMatrix::Diagonal(grid.v_coord(a).clone())))
            .collect(),
    )
    .expect("grid operators are consistent")
}

/// `G(E) = Σ_α diag(E_α) ⊗ C_{α,v}`.
pub fn force_operator(grid: &PhaseGrid, field: &FieldState) -> TensorizedOperator {
    TensorizedOperator::new(
        field
            .e_field
            .iter()
            .enumerate()
            .map(|(a, e)| (FactorMatrix::Diagonal(e.clone()), grid.v_stencil(a).clone()))
            .collect(),
    )
    .expect("grid operators are consistent")
}

impl<'g> Stepper<'g> {
    pub fn new(grid: &'g PhaseGrid, cfg: StepConfig) -> Self {
        let transport = transport_operator(grid);
        let transport_kappa = kappa_bound(&transport, grid.metric(), cfg.tol.seed);
        Self {
            grid,
            cfg,
            poisson: PoissonSolver::new(grid),
            transport,
            transport_kappa,
            warned: false,
        }
    }

    pub fn config(&self) -> &StepConfig {
        &self.cfg
    }

    pub fn field(&self, f: &SeparatedFunction) -> crate::Result<FieldState> {
        solve_poisson_with(&self.poisson, &density(f, self.grid)?, self.grid)
    }

    fn check_contraction(&mut self, kappa: f64, terms: usize, stage: &str, step: usize) {
        let bound = 3.0 * terms as f64 * kappa;
        if bound >= 1.0 && !self.warned {
            warn!("step {step}: {stage} has 3Mκ = {bound:.3} >= 1, fixed-point convergence is not guaranteed");
            self.warned = true;
        }
    }

    fn implicit(
        &self,
        op: &TensorizedOperator,
        b: &SeparatedFunction,
        g0: &SeparatedFunction,
        step: usize,
        stage: &'static str,
    ) -> Result<(SeparatedFunction, FixedPointReport), StepError> {
        let (f, report) = pgd_fp(op, b, g0, self.grid.metric(), &self.cfg.tol)
            .map_err(|source| StepError::Solver { step, source })?;
        if !report.converged {
            return Err(StepError::NonConvergence {
                step,
                stage,
                iterations: report.iterations,
                residual: report.final_injective_residual,
            });
        }
        Ok((f, report))
    }

    fn compress(
        &self,
        f: SeparatedFunction,
        step: usize,
        stage: &'static str,
        meta: &mut StepMetadata,
    ) -> Result<SeparatedFunction, StepError> {
        if !self.cfg.recompress {
            return Ok(f);
        }
        let out = pod_compress(&f, self.grid.metric(), &self.cfg.tol)
            .map_err(|source| StepError::Solver { step, source })?;
        meta.als_unconverged += out.als_unconverged;
        if !out.converged {
            return Err(StepError::NonConvergence {
                step,
                stage,
                iterations: out.term_norms.len(),
                residual: out.term_norms.last().copied().unwrap_or(0.0),
            });
        }
        Ok(out.f)
    }

    /// Advances `f` (the iterate of step index `m`) by one time step.
    pub fn step(&mut self, f: &SeparatedFunction, m: usize) -> Result<StepOutput, StepError> {
        let step = m + 1;
        let solver = |source| StepError::Solver { step, source };
        let h = 0.5 * self.cfg.dt;
        let sign = match self.cfg.force_sign {
            ForceSign::Physical => 1.0,
            ForceSign::Boxed => -1.0,
        };
        let metric = self.grid.metric();
        let mut meta = StepMetadata {
            step,
            t: step as f64 * self.cfg.dt,
            rank_in: f.rank(),
            ranks: [0; 3],
            fp_iterations: [0; 2],
            fp_residuals: [0.0; 2],
            kappa: [0.0; 2],
            recompressions: 0,
            als_unconverged: 0,
        };
        let explicit_transport = self.transport.scaled(-h);

        let field_start = self.field(f).map_err(solver)?;
        let a1 = force_operator(self.grid, &field_start).scaled(-sign * h);
        meta.kappa[0] = kappa_bound(&a1, metric, self.cfg.tol.seed);
        self.check_contraction(meta.kappa[0], a1.n_terms(), "force substep", step);
        let b1 = match self.cfg.splitting {
            Splitting::Symmetric => f.clone(),
            Splitting::Boxed => concat(f, &apply(&explicit_transport, f).map_err(solver)?).map_err(solver)?,
        };
        let (f1, rep1) = self.implicit(&a1, &b1, f, step, "force substep")?;
        let f1 = self.compress(f1, step, "recompression after force substep", &mut meta)?;
        meta.ranks[0] = f1.rank();
        meta.fp_iterations[0] = rep1.iterations;
        meta.fp_residuals[0] = rep1.final_injective_residual;

        let a2 = self.transport.scaled(h);
        meta.kappa[1] = self.transport_kappa * h.abs();
        self.check_contraction(meta.kappa[1], a2.n_terms(), "transport substep", step);
        let b2 = match self.cfg.splitting {
            Splitting::Symmetric => concat(&f1, &apply(&explicit_transport, &f1).map_err(solver)?).map_err(solver)?,
            Splitting::Boxed => f1.clone(),
        };
        let (f2, rep2) = self.implicit(&a2, &b2, &f1, step, "transport substep")?;
        let f2 = self.compress(f2, step, "recompression after transport substep", &mut meta)?;
        meta.ranks[1] = f2.rank();
        meta.fp_iterations[1] = rep2.iterations;
        meta.fp_residuals[1] = rep2.final_injective_residual;

        let field_mid = self.field(&f2).map_err(solver)?;
        let q = force_operator(self.grid, &field_mid).scaled(sign * h);
        let operand = concat(&f2, &apply(&q, &f2).map_err(solver)?).map_err(solver)?.merged();
        let f3 = self.compress(operand, step, "final force substep", &mut meta)?;
        meta.ranks[2] = f3.rank();

        meta.recompressions = rep1.recompressions + rep2.recompressions;
        meta.als_unconverged += rep1.als_unconverged + rep2.als_unconverged;
        debug!(
            "step {step}: ranks {:?}, fixed-point iterations {:?}, kappa {:?}",
            meta.ranks, meta.fp_iterations, meta.kappa
        );
        Ok(StepOutput {
            f: f3,
            field_start,
            field_mid,
            meta,
        })
    }
}

/// One step from `f_m` (step index 0).
pub fn verlet_step(f: &SeparatedFunction, grid: &PhaseGrid, cfg: &StepConfig) -> Result<StepOutput, StepError> {
    Stepper::new(grid, *cfg).step(f, 0)
}

/// Observer payload after each completed step.
#[derive(Debug)]
pub struct StepEvent<'a> {
    pub step: usize,
    pub t: f64,
    pub f: &'a SeparatedFunction,
    /// Field of the new iterate `f`.
    pub field: &'a FieldState,
    pub meta: &'a StepMetadata,
}

/// Runs steps `start_step + 1 ..= start_step + n_steps`, calling `observer`
/// after each one. Returns the final iterate.
pub fn run<F>(
    f0: &SeparatedFunction,
    grid: &PhaseGrid,
    cfg: &StepConfig,
    start_step: usize,
    n_steps: usize,
    mut observer: F,
) -> Result<SeparatedFunction, StepError>
where
    F: FnMut(&StepEvent<'_>),
{
    let mut stepper = Stepper::new(grid, *cfg);
    let mut f = f0.clone();
    for m in start_step..start_step + n_steps {
        let out = stepper.step(&f, m)?;
        f = out.f;
        let field = stepper
            .field(&f)
            .map_err(|source| StepError::Solver { step: m + 1, source })?;
        observer(&StepEvent {
            step: m + 1,
            t: out.meta.t,
            f: &f,
            field: &field,
            meta: &out.meta,
        });
    }
    Ok(f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, Boundary, XDerivative};
    use crate::tensor::norm_h;

    fn grid(nx: usize, nv: usize) -> PhaseGrid {
        PhaseGrid::new(
            vec![build_grid(0.0, 4.0 * std::f64::consts::PI, nx, Boundary::Periodic).unwrap()],
            vec![build_grid(-10.0, 10.0, nv, Boundary::DirichletZero).unwrap()],
            XDerivative::Centered,
        )
        .unwrap()
    }

    fn maxwellian(g: &PhaseGrid, beta: f64) -> SeparatedFunction {
        let x = g.x_coord(0).mapv(|x| 1.0 + beta * (0.5 * x).cos());
        let mut v = g.v_coord(0).mapv(|v| (-0.5 * v * v).exp() / (2.0 * std::f64::consts::PI).sqrt());
        g.metric().pin(&mut v);
        SeparatedFunction::rank_one(x, v)
    }

    #[test]
    fn zero_time_step_only_recompresses() {
        let g = grid(16, 17);
        let f = maxwellian(&g, 0.05);
        let cfg = StepConfig {
            dt: 0.0,
            ..StepConfig::new(1.0, SolverTolerances::with_epsilon(1e-12)).unwrap()
        };
        let out = verlet_step(&f, &g, &cfg).unwrap();
        let diff = out.f.to_dense() - f.to_dense();
        assert!(diff.iter().all(|d| d.abs() < 1e-12));
        assert_eq!(out.meta.fp_iterations, [0, 0]);
        assert_eq!(out.meta.ranks, [1, 1, 1]);
    }

    #[test]
    fn uniform_maxwellian_keeps_uniform_density() {
        let g = grid(16, 33);
        let f = maxwellian(&g, 0.0);
        let cfg = StepConfig::new(0.05, SolverTolerances::with_epsilon(1e-13)).unwrap();
        let mut last = None;
        let out = run(&f, &g, &cfg, 0, 5, |ev| {
            assert!(ev.field.e_field[0].iter().all(|e| e.abs() < 1e-12));
            last = Some(ev.field.rho.clone());
        })
        .unwrap();
        let rho = last.unwrap();
        let mean = rho.mean().unwrap();
        assert!(rho.iter().all(|r| (r - mean).abs() < 1e-8));
        assert!(out.rank() >= 1);
    }

    #[test]
    fn single_run_step_equals_verlet_step() {
        let g = grid(16, 17);
        let f = maxwellian(&g, 0.05);
        let cfg = StepConfig::new(0.1, SolverTolerances::with_epsilon(1e-12)).unwrap();
        let direct = verlet_step(&f, &g, &cfg).unwrap().f;
        let looped = run(&f, &g, &cfg, 0, 1, |_| {}).unwrap();
        assert_eq!(direct, looped);
    }

    #[test]
    fn step_reports_ranks_and_iterations() {
        let g = grid(16, 17);
        let f = maxwellian(&g, 0.05);
        let cfg = StepConfig::new(0.1, SolverTolerances::with_epsilon(1e-12)).unwrap();
        let out = verlet_step(&f, &g, &cfg).unwrap();
        assert_eq!(out.meta.rank_in, 1);
        assert!(out.meta.ranks.iter().all(|&r| r >= 1 && r <= cfg.tol.max_rank));
        assert!(out.meta.fp_iterations[1] > 0);
        assert!(out.meta.kappa[1] > 0.0);
        let n = norm_h(&out.f, g.metric()).unwrap();
        assert!(n.is_finite() && n > 0.0);
    }

    #[test]
    fn non_contracting_step_is_reported() {
        let g = grid(16, 17);
        let f = maxwellian(&g, 0.05);
        let tol = SolverTolerances {
            max_rank: 6,
            ..SolverTolerances::with_epsilon(1e-14)
        };
        let cfg = StepConfig::new(50.0, tol).unwrap();
        let err = verlet_step(&f, &g, &cfg).unwrap_err();
        assert!(err.to_string().contains("reduce dt"), "{err}");
    }

    #[test]
    fn invalid_time_step_is_rejected() {
        assert!(StepConfig::new(0.0, SolverTolerances::default()).is_err());
        assert!(StepConfig::new(f64::NAN, SolverTolerances::default()).is_err());
    }
}
