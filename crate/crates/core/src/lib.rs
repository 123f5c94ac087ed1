//! Proper Generalized Decomposition solver for the Vlasov–Poisson system.
//!
//! The distribution function is held in separated form `f(x, v) = Σ_k r_k(x) s_k(v)`
//! and advanced with a Störmer–Verlet splitting whose implicit substeps are
//! solved by fixed-point PGD.

mod compact;
pub mod diagnostics;
pub mod error;
pub mod field;
pub mod grid;
pub mod linalg;
pub mod pgd;
pub mod scenarios;
pub mod snapshot;
pub mod stepper;
pub mod tensor;

pub use diagnostics::{error_summary, fit_decay, observe, DecayFit, DiagnosticsRecord, ErrorSummary};
pub use error::{Error, Result};
pub use field::{density, force_matrices, solve_poisson, FieldState, PoissonSolver};
pub use grid::{assemble_phase_grid, build_grid, Boundary, Grid1D, PhaseGrid, XDerivative};
pub use linalg::{FactorMatrix, SparseMatrix};
pub use pgd::{
    als_rank1, kappa_bound, pgd_fp, pod, pod_compress, FixedPointReport, GreedyOutcome, RankOne, SolverTolerances,
};
pub use scenarios::{initial_condition, ScenarioKind, ScenarioParams};
pub use snapshot::Snapshot;
pub use stepper::{
    run, verlet_step, ForceSign, Splitting, StepConfig, StepError, StepEvent, StepMetadata, StepOutput, Stepper,
};
pub use tensor::{apply, concat, inner_h, norm_h, scale, HMetric, SeparatedFunction, TensorizedOperator};
