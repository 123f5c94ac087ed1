//! Uniform grids for the space and velocity blocks and the weighted-collocation
//! operator matrices built on them.
//!
//! Every "Galerkin" matrix is represented as a diagonal quadrature mass times a
//! plain stencil: `I = diag(w)`, `D_α = I · C_α`, `V_α = I · diag(v_α)`. The
//! mass-free stencils `C_α` are kept as well since the H-inner-product form of
//! each substep needs `I⁻¹ D_α = C_α` directly.
//!
//! Multi-axis blocks are flattened row-major with axis order (x₁, x₂) and
//! (v₁, v₂): node `(i₁, i₂)` lives at flat index `i₁ · n₂ + i₂`.

use std::f64::consts::PI;

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::linalg::{FactorMatrix, SparseMatrix};
use crate::tensor::HMetric;

/// Smallest admissible number of nodes on one axis.
pub const MIN_NODES: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Boundary {
    /// Periodic axis; the duplicate right endpoint is excluded.
    Periodic,
    /// Both endpoints are nodes and the solution is pinned to zero there.
    DirichletZero,
}

/// Discretization of the space derivative on periodic axes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum XDerivative {
    /// Second-order centered differences.
    #[default]
    Centered,
    /// Dense Fourier collocation differentiation.
    Spectral,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grid1D {
    lower: f64,
    upper: f64,
    count: usize,
    spacing: f64,
    boundary: Boundary,
    nodes: Array1<f64>,
    weights: Array1<f64>,
}

/// Builds a uniform grid. Periodic grids use the rectangle rule (weights `h`);
/// Dirichlet grids include both endpoints and use the trapezoid rule.
pub fn build_grid(lower: f64, upper: f64, count: usize, boundary: Boundary) -> Result<Grid1D> {
    if !(lower.is_finite() && upper.is_finite()) || upper <= lower {
        return Err(Error::InvalidGrid(format!(
            "need finite bounds with upper > lower, got [{lower}, {upper}]"
        )));
    }
    if count < MIN_NODES {
        return Err(Error::InvalidGrid(format!(
            "need at least {MIN_NODES} nodes, got {count}"
        )));
    }
    let length = upper - lower;
    let (spacing, weights) = match boundary {
        Boundary::Periodic => {
            let h = length / count as f64;
            (h, Array1::from_elem(count, h))
        }
        Boundary::DirichletZero => {
            let h = length / (count - 1) as f64;
            let mut w = Array1::from_elem(count, h);
            w[0] = 0.5 * h;
            w[count - 1] = 0.5 * h;
            (h, w)
        }
    };
    let nodes = Array1::from_shape_fn(count, |i| lower + i as f64 * spacing);
    Ok(Grid1D {
        lower,
        upper,
        count,
        spacing,
        boundary,
        nodes,
        weights,
    })
}

impl Grid1D {
    pub fn lower(&self) -> f64 {
        self.lower
    }
    pub fn upper(&self) -> f64 {
        self.upper
    }
    pub fn count(&self) -> usize {
        self.count
    }
    pub fn spacing(&self) -> f64 {
        self.spacing
    }
    pub fn boundary(&self) -> Boundary {
        self.boundary
    }
    pub fn length(&self) -> f64 {
        self.upper - self.lower
    }
    pub fn nodes(&self) -> &Array1<f64> {
        &self.nodes
    }
    pub fn weights(&self) -> &Array1<f64> {
        &self.weights
    }

    /// Plain (mass-free) centered first-derivative stencil on this axis.
    ///
    /// Periodic axes wrap around. Dirichlet axes use zero ghost values and
    /// have their boundary rows zeroed.
    pub fn centered_difference(&self) -> SparseMatrix {
        let n = self.count;
        let c = 0.5 / self.spacing;
        let mut triplets = Vec::with_capacity(2 * n);
        match self.boundary {
            Boundary::Periodic => {
                for i in 0..n {
                    triplets.push((i, (i + 1) % n, c));
                    triplets.push((i, (i + n - 1) % n, -c));
                }
            }
            Boundary::DirichletZero => {
                for i in 1..n - 1 {
                    triplets.push((i, i + 1, c));
                    triplets.push((i, i - 1, -c));
                }
            }
        }
        SparseMatrix::from_triplets(n, n, &triplets)
    }

    /// Dense Fourier collocation differentiation matrix (periodic axes only).
    pub fn spectral_difference(&self) -> Result<Array2<f64>> {
        if self.boundary != Boundary::Periodic {
            return Err(Error::InvalidGrid(
                "spectral differentiation needs a periodic axis".into(),
            ));
        }
        let n = self.count;
        let scale = PI / self.length();
        Ok(Array2::from_shape_fn((n, n), |(i, j)| {
            if i == j {
                return 0.0;
            }
            let d = i as f64 - j as f64;
            let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
            let arg = PI * d / n as f64;
            if n % 2 == 0 {
                sign * scale / arg.tan()
            } else {
                sign * scale / arg.sin()
            }
        }))
    }
}

/// Paired phase-space grids with all assembled operator matrices.
#[derive(Debug, Clone)]
pub struct PhaseGrid {
    dim: usize,
    x_grids: Vec<Grid1D>,
    v_grids: Vec<Grid1D>,
    x_scheme: XDerivative,
    metric: HMetric,
    x_coords: Vec<Array1<f64>>,
    v_coords: Vec<Array1<f64>>,
    x_stencils: Vec<FactorMatrix>,
    v_stencils: Vec<FactorMatrix>,
}

/// Assembles a phase grid with centered differencing on every axis.
pub fn assemble_phase_grid(x_grids: Vec<Grid1D>, v_grids: Vec<Grid1D>) -> Result<PhaseGrid> {
    PhaseGrid::new(x_grids, v_grids, XDerivative::Centered)
}

impl PhaseGrid {
    pub fn new(x_grids: Vec<Grid1D>, v_grids: Vec<Grid1D>, x_scheme: XDerivative) -> Result<Self> {
        let dim = x_grids.len();
        if dim != v_grids.len() {
            return Err(Error::Dimension(format!(
                "{} space axes but {} velocity axes",
                dim,
                v_grids.len()
            )));
        }
        if !(1..=2).contains(&dim) {
            return Err(Error::Dimension(format!(
                "phase grids support 1 or 2 axes per block, got {dim}"
            )));
        }
        if let Some(g) = x_grids.iter().find(|g| g.boundary != Boundary::Periodic) {
            return Err(Error::InvalidGrid(format!(
                "space axis on [{}, {}] must be periodic",
                g.lower, g.upper
            )));
        }
        if let Some(g) = v_grids.iter().find(|g| g.boundary != Boundary::DirichletZero) {
            return Err(Error::InvalidGrid(format!(
                "velocity axis on [{}, {}] must be Dirichlet",
                g.lower, g.upper
            )));
        }

        let x_weights = tensor_weights(&x_grids);
        let v_weights = tensor_weights(&v_grids);
        let x_coords = tensor_coords(&x_grids);
        let v_coords = tensor_coords(&v_grids);
        let v_boundary = boundary_nodes(&v_grids);

        let x_stencils = (0..dim)
            .map(|axis| {
                let local = match x_scheme {
                    XDerivative::Centered => FactorMatrix::Sparse(x_grids[axis].centered_difference()),
                    XDerivative::Spectral => FactorMatrix::Dense(x_grids[axis].spectral_difference()?),
                };
                Ok(embed_axis(&local, &x_grids, axis))
            })
            .collect::<Result<Vec<_>>>()?;
        let v_stencils = (0..dim)
            .map(|axis| {
                let local = FactorMatrix::Sparse(v_grids[axis].centered_difference());
                let mut m = embed_axis(&local, &v_grids, axis);
                if dim > 1 {
                    m = zero_rows(m, &v_boundary);
                }
                m
            })
            .collect();

        Ok(Self {
            dim,
            metric: HMetric::new(x_weights, v_weights).with_pinned_v(v_boundary),
            x_grids,
            v_grids,
            x_scheme,
            x_coords,
            v_coords,
            x_stencils,
            v_stencils,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn nx(&self) -> usize {
        self.metric.nx()
    }
    pub fn nv(&self) -> usize {
        self.metric.nv()
    }
    pub fn x_grids(&self) -> &[Grid1D] {
        &self.x_grids
    }
    pub fn v_grids(&self) -> &[Grid1D] {
        &self.v_grids
    }
    pub fn x_scheme(&self) -> XDerivative {
        self.x_scheme
    }

    /// The H = H_x ⊗ H_v inner-product structure (quadrature weights).
    pub fn metric(&self) -> &HMetric {
        &self.metric
    }

    /// Coordinate of axis `alpha` at every flattened space node.
    pub fn x_coord(&self, alpha: usize) -> &Array1<f64> {
        &self.x_coords[alpha]
    }

    /// Coordinate of axis `alpha` at every flattened velocity node.
    pub fn v_coord(&self, alpha: usize) -> &Array1<f64> {
        &self.v_coords[alpha]
    }

    /// Flattened indices of velocity nodes on ∂Ω_v.
    pub fn v_boundary(&self) -> &[usize] {
        self.metric.pinned_v()
    }

    /// Total measure of Ω_x.
    pub fn x_volume(&self) -> f64 {
        self.x_grids.iter().map(Grid1D::length).product()
    }

    /// `I_x`.
    pub fn mass_x(&self) -> FactorMatrix {
        FactorMatrix::Diagonal(self.metric.x_weights().clone())
    }

    /// `I_v`.
    pub fn mass_v(&self) -> FactorMatrix {
        FactorMatrix::Diagonal(self.metric.v_weights().clone())
    }

    /// Plain derivative stencil `C_{α,x}` (`I_x⁻¹ D_{α,x}`).
    pub fn x_stencil(&self, alpha: usize) -> &FactorMatrix {
        &self.x_stencils[alpha]
    }

    /// Plain derivative stencil `C_{α,v}` with zeroed boundary rows.
    pub fn v_stencil(&self, alpha: usize) -> &FactorMatrix {
        &self.v_stencils[alpha]
    }

    /// `diag(v_α)` (`I_v⁻¹ V_{α,v}`).
    pub fn velocity(&self, alpha: usize) -> FactorMatrix {
        FactorMatrix::Diagonal(self.v_coords[alpha].clone())
    }

    /// `D_{α,x} = I_x C_{α,x}`.
    pub fn deriv_x(&self, alpha: usize) -> FactorMatrix {
        self.x_stencils[alpha].scale_rows(self.metric.x_weights().view())
    }

    /// `D_{α,v} = I_v C_{α,v}`.
    pub fn deriv_v(&self, alpha: usize) -> FactorMatrix {
        self.v_stencils[alpha].scale_rows(self.metric.v_weights().view())
    }

    /// `V_{α,v} = I_v diag(v_α)`.
    pub fn vel_mult(&self, alpha: usize) -> FactorMatrix {
        FactorMatrix::Diagonal(self.metric.v_weights() * &self.v_coords[alpha])
    }
}

fn tensor_weights(grids: &[Grid1D]) -> Array1<f64> {
    grids.iter().fold(Array1::ones(1), |acc, g| {
        Array1::from_iter(acc.iter().flat_map(|&a| g.weights.iter().map(move |&w| a * w)))
    })
}

fn tensor_coords(grids: &[Grid1D]) -> Vec<Array1<f64>> {
    let total: usize = grids.iter().map(Grid1D::count).product();
    (0..grids.len())
        .map(|axis| {
            let inner: usize = grids[axis + 1..].iter().map(Grid1D::count).product();
            let n = grids[axis].count;
            Array1::from_shape_fn(total, |flat| grids[axis].nodes[(flat / inner) % n])
        })
        .collect()
}

fn boundary_nodes(grids: &[Grid1D]) -> Vec<usize> {
    let total: usize = grids.iter().map(Grid1D::count).product();
    (0..total)
        .filter(|&flat| {
            let mut rest = flat;
            let mut on_edge = false;
            for g in grids.iter().rev() {
                let i = rest % g.count;
                rest /= g.count;
                on_edge |= i == 0 || i == g.count - 1;
            }
            on_edge
        })
        .collect()
}

/// Lifts a single-axis matrix to the flattened multi-axis block:
/// `I ⊗ … ⊗ A ⊗ … ⊗ I`.
fn embed_axis(local: &FactorMatrix, grids: &[Grid1D], axis: usize) -> FactorMatrix {
    if grids.len() == 1 {
        return local.clone();
    }
    let before: usize = grids[..axis].iter().map(Grid1D::count).product();
    let after: usize = grids[axis + 1..].iter().map(Grid1D::count).product();
    match local {
        FactorMatrix::Dense(m) => {
            let n = m.nrows();
            let total = before * n * after;
            FactorMatrix::Dense(Array2::from_shape_fn((total, total), |(p, q)| {
                let (pb, pa, pr) = (p / (n * after), (p / after) % n, p % after);
                let (qb, qa, qr) = (q / (n * after), (q / after) % n, q % after);
                if pb == qb && pr == qr {
                    m[[pa, qa]]
                } else {
                    0.0
                }
            }))
        }
        other => {
            let sparse = match other {
                FactorMatrix::Sparse(s) => s.clone(),
                FactorMatrix::Diagonal(d) => {
                    let t: Vec<_> = d.iter().enumerate().map(|(i, &v)| (i, i, v)).collect();
                    SparseMatrix::from_triplets(d.len(), d.len(), &t)
                }
                FactorMatrix::Dense(_) => unreachable!(),
            };
            let lifted = SparseMatrix::kron(
                &SparseMatrix::kron(&SparseMatrix::identity(before), &sparse),
                &SparseMatrix::identity(after),
            );
            FactorMatrix::Sparse(lifted)
        }
    }
}

fn zero_rows(m: FactorMatrix, rows: &[usize]) -> FactorMatrix {
    let n = m.dim();
    let mut keep = Array1::ones(n);
    for &i in rows {
        keep[i] = 0.0;
    }
    m.scale_rows(keep.view())
}
