//! Charge density, periodic Poisson solve `−Δφ = 1 − ρ`, and `E = −∇φ`.

use std::f64::consts::PI;
use std::sync::Arc;

use ndarray::Array1;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{check_len, Result};
use crate::grid::{Grid1D, PhaseGrid, XDerivative};
use crate::linalg::FactorMatrix;
use crate::tensor::SeparatedFunction;

#[derive(Debug, Clone, PartialEq)]
pub struct FieldState {
    pub rho: Array1<f64>,
    pub phi: Array1<f64>,
    /// One component per space axis.
    pub e_field: Vec<Array1<f64>>,
    /// `∫(1 − ρ) dx`, the part of the right-hand side removed by the
    /// zero-mean projection. Zero when mass is exactly conserved.
    pub mass_defect: f64,
}

/// `ρ_i = Σ_k r_k[i] (w_v · s_k)`.
pub fn density(f: &SeparatedFunction, grid: &PhaseGrid) -> Result<Array1<f64>> {
    f.check_metric(grid.metric())?;
    let wv = grid.metric().v_weights();
    let mut rho = Array1::zeros(grid.nx());
    for (r, s) in f.terms() {
        rho.scaled_add(wv.dot(s), r);
    }
    Ok(rho)
}

/// Fourier-diagonalized inverse of the periodic Laplacian on the space block.
pub struct PoissonSolver {
    shape: Vec<usize>,
    /// Eigenvalues of `−Δ_h` in FFT index order, row-major over axes.
    symbol: Array1<f64>,
    forward: Vec<Arc<dyn Fft<f64>>>,
    inverse: Vec<Arc<dyn Fft<f64>>>,
}

impl std::fmt::Debug for PoissonSolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PoissonSolver").field("shape", &self.shape).finish()
    }
}

fn axis_symbol(g: &Grid1D, scheme: XDerivative) -> Array1<f64> {
    let n = g.count();
    Array1::from_shape_fn(n, |k| match scheme {
        XDerivative::Centered => {
            let h = g.spacing();
            (2.0 - 2.0 * (2.0 * PI * k as f64 / n as f64).cos()) / (h * h)
        }
        XDerivative::Spectral => {
            let signed = if 2 * k <= n { k as f64 } else { k as f64 - n as f64 };
            let kk = 2.0 * PI * signed / g.length();
            kk * kk
        }
    })
}

impl PoissonSolver {
    pub fn new(grid: &PhaseGrid) -> Self {
        let shape: Vec<usize> = grid.x_grids().iter().map(Grid1D::count).collect();
        let symbols: Vec<Array1<f64>> = grid
            .x_grids()
            .iter()
            .map(|g| axis_symbol(g, grid.x_scheme()))
            .collect();
        let symbol = match symbols.as_slice() {
            [a] => a.clone(),
            [a, b] => Array1::from_shape_fn(a.len() * b.len(), |idx| a[idx / b.len()] + b[idx % b.len()]),
            _ => unreachable!("phase grids have one or two space axes"),
        };
        let mut planner = FftPlanner::new();
        let forward = shape.iter().map(|&n| planner.plan_fft_forward(n)).collect();
        let inverse = shape.iter().map(|&n| planner.plan_fft_inverse(n)).collect();
        Self {
            shape,
            symbol,
            forward,
            inverse,
        }
    }

    fn transform(&self, data: &mut [Complex64], plans: &[Arc<dyn Fft<f64>>]) {
        match self.shape.as_slice() {
            [_] => plans[0].process(data),
            [n1, n2] => {
                for row in data.chunks_mut(*n2) {
                    plans[1].process(row);
                }
                let mut column = vec![Complex64::default(); *n1];
                for j in 0..*n2 {
                    for i in 0..*n1 {
                        column[i] = data[i * n2 + j];
                    }
                    plans[0].process(&mut column);
                    for i in 0..*n1 {
                        data[i * n2 + j] = column[i];
                    }
                }
            }
            _ => unreachable!("phase grids have one or two space axes"),
        }
    }

    /// Solves `−Δ_h φ = P₀ g` with `mean(φ) = 0`, where `P₀` removes the mean.
    pub fn solve(&self, rhs: &Array1<f64>) -> Array1<f64> {
        let n = self.symbol.len();
        let mut data: Vec<Complex64> = rhs.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.transform(&mut data, &self.forward);
        for (c, &lam) in data.iter_mut().zip(self.symbol.iter()) {
            *c = if lam > 1e-12 * self.symbol[n - 1].max(1.0) {
                *c / lam
            } else {
                Complex64::default()
            };
        }
        self.transform(&mut data, &self.inverse);
        let phi: Array1<f64> = data.iter().map(|c| c.re / n as f64).collect();
        let mean = phi.mean().unwrap_or(0.0);
        phi - mean
    }
}

/// Field from a density: `g = 1 − ρ` projected to zero mean, `φ` from the
/// Fourier solve, and `E_α = −C_{α,x} φ` with the same stencil as the transport.
pub fn solve_poisson(rho: &Array1<f64>, grid: &PhaseGrid) -> Result<FieldState> {
    solve_poisson_with(&PoissonSolver::new(grid), rho, grid)
}

pub fn solve_poisson_with(solver: &PoissonSolver, rho: &Array1<f64>, grid: &PhaseGrid) -> Result<FieldState> {
    check_len("density", grid.nx(), rho.len())?;
    let g = rho.mapv(|r| 1.0 - r);
    let mass_defect = grid.metric().x_weights().dot(&g);
    let phi = solver.solve(&g);
    let e_field = (0..grid.dim())
        .map(|axis| -grid.x_stencil(axis).apply(phi.view()))
        .collect();
    Ok(FieldState {
        rho: rho.clone(),
        phi,
        e_field,
        mass_defect,
    })
}

/// `F_x(E_α) = I_x · diag(E_α)` for every axis.
pub fn force_matrices(e_field: &[Array1<f64>], grid: &PhaseGrid) -> Result<Vec<FactorMatrix>> {
    e_field
        .iter()
        .map(|e| {
            check_len("field component", grid.nx(), e.len())?;
            Ok(FactorMatrix::Diagonal(grid.metric().x_weights() * e))
        })
        .collect()
}

/// The discrete `−Δ_h` applied directly with the stencil (used to verify solves).
pub fn apply_laplacian(phi: &Array1<f64>, grid: &PhaseGrid) -> Array1<f64> {
    let mut out = Array1::zeros(phi.len());
    match grid.x_scheme() {
        XDerivative::Centered => {
            let shape: Vec<usize> = grid.x_grids().iter().map(Grid1D::count).collect();
            let stride = |axis: usize| if axis + 1 == shape.len() { 1 } else { shape[1] };
            for (axis, g) in grid.x_grids().iter().enumerate() {
                let (n, s) = (shape[axis], stride(axis));
                let h2 = g.spacing() * g.spacing();
                for idx in 0..phi.len() {
                    let i = (idx / s) % n;
                    let up = idx - i * s + ((i + 1) % n) * s;
                    let down = idx - i * s + ((i + n - 1) % n) * s;
                    out[idx] += (2.0 * phi[idx] - phi[up] - phi[down]) / h2;
                }
            }
        }
        XDerivative::Spectral => {
            for axis in 0..grid.dim() {
                let d = grid.x_stencil(axis);
                out -= &d.apply(d.apply(phi.view()).view());
            }
        }
    }
    out
}
