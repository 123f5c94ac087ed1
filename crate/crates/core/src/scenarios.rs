//! Initial data and parameters of the three benchmark problems.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use ndarray::Array1;

use crate::error::{Error, Result};
use crate::grid::{build_grid, Boundary, PhaseGrid, XDerivative};
use crate::tensor::SeparatedFunction;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ScenarioKind {
    Landau1D,
    TwoStream1D,
    Landau2D,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 3] = [Self::Landau1D, Self::TwoStream1D, Self::Landau2D];

    pub fn dim(self) -> usize {
        match self {
            Self::Landau1D | Self::TwoStream1D => 1,
            Self::Landau2D => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Landau1D => "landau1d",
            Self::TwoStream1D => "two_stream",
            Self::Landau2D => "landau2d",
        }
    }

    /// `[0, L]` for each space axis, given the perturbation wavenumber.
    pub fn default_x_length(self, wavenumber: f64) -> f64 {
        match self {
            Self::Landau1D | Self::Landau2D => 2.0 * PI / wavenumber,
            Self::TwoStream1D => 10.0 * PI / wavenumber,
        }
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ScenarioKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect::<String>()
            .to_ascii_lowercase();
        match key.as_str() {
            "landau1d" | "landau" => Ok(Self::Landau1D),
            "twostream" | "twostream1d" => Ok(Self::TwoStream1D),
            "landau2d" => Ok(Self::Landau2D),
            _ => Err(Error::Dimension(format!(
                "unknown scenario '{s}' (expected landau1d, two_stream or landau2d)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScenarioParams {
    pub kind: ScenarioKind,
    /// Perturbation amplitude.
    pub beta: f64,
    /// `k` in 1D, `ω` in 2D.
    pub wavenumber: f64,
    /// Beam drift velocity (two-stream only).
    pub v0: f64,
    /// Space domain `[0, x_length]` per axis.
    pub x_length: f64,
    /// Velocity domain `[−v_max, v_max]` per axis.
    pub v_max: f64,
    /// Points per space axis.
    pub nx: usize,
    /// Points per velocity axis.
    pub nv: usize,
    pub t_f: f64,
    pub n_steps: usize,
    pub x_derivative: XDerivative,
}

impl ScenarioParams {
    pub fn preset(kind: ScenarioKind) -> Self {
        let (beta, wavenumber, v0, nx, nv, t_f, n_steps) = match kind {
            ScenarioKind::Landau1D => (0.01, 0.5, 0.0, 32, 32, 10.0, 4000),
            ScenarioKind::TwoStream1D => (1e-3, 0.2, 2.4, 64, 128, 36.0, 1800),
            ScenarioKind::Landau2D => (0.01, 0.5, 0.0, 16, 32, 5.0, 500),
        };
        Self {
            kind,
            beta,
            wavenumber,
            v0,
            x_length: kind.default_x_length(wavenumber),
            v_max: 10.0,
            nx,
            nv,
            t_f,
            n_steps,
            x_derivative: XDerivative::Centered,
        }
    }

    pub fn dim(&self) -> usize {
        self.kind.dim()
    }

    pub fn dt(&self) -> f64 {
        self.t_f / self.n_steps as f64
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidGrid(msg));
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return bad(format!("beta must be >= 0, got {}", self.beta));
        }
        if !(self.wavenumber > 0.0 && self.wavenumber.is_finite()) {
            return bad(format!("wavenumber must be > 0, got {}", self.wavenumber));
        }
        if !(self.x_length > 0.0 && self.v_max > 0.0) {
            return bad("domain sizes must be positive".into());
        }
        if !(self.t_f > 0.0 && self.t_f.is_finite()) {
            return bad(format!("final time must be > 0, got {}", self.t_f));
        }
        if self.n_steps == 0 {
            return bad("n_steps must be >= 1".into());
        }
        Ok(())
    }

    pub fn phase_grid(&self) -> Result<PhaseGrid> {
        self.validate()?;
        let x = build_grid(0.0, self.x_length, self.nx, Boundary::Periodic)?;
        let v = build_grid(-self.v_max, self.v_max, self.nv, Boundary::DirichletZero)?;
        PhaseGrid::new(vec![x; self.dim()], vec![v; self.dim()], self.x_derivative)
    }
}

/// Landau and two-stream: `(1 + β cos(kx)) G(v)`. 2D Landau: the three
/// products `1 · G`, `−β sin(ωx₁) · G`, `−β sin(ωx₂) · G` with
/// `G = (2π)^{−3/2} exp(−|v|²/2)`. Velocity boundary nodes are pinned to zero.
pub fn initial_condition(params: &ScenarioParams, grid: &PhaseGrid) -> Result<SeparatedFunction> {
    if grid.dim() != params.dim() {
        return Err(Error::Dimension(format!(
            "{} scenario needs a {}D grid, got {}D",
            params.kind,
            params.dim(),
            grid.dim()
        )));
    }
    let (beta, k) = (params.beta, params.wavenumber);
    let mut f = SeparatedFunction::zeros(grid.nx(), grid.nv());
    let pinned = |mut s: Array1<f64>| {
        grid.metric().pin(&mut s);
        s
    };
    match params.kind {
        ScenarioKind::Landau1D => {
            let g = pinned(grid.v_coord(0).mapv(|v| (-0.5 * v * v).exp() / (2.0 * PI).sqrt()));
            f.push(grid.x_coord(0).mapv(|x| 1.0 + beta * (k * x).cos()), g);
        }
        ScenarioKind::TwoStream1D => {
            let v0 = params.v0;
            let c = 1.0 / (4.0 * PI).sqrt();
            let g = pinned(
                grid.v_coord(0)
                    .mapv(|v| c * ((-0.5 * (v - v0).powi(2)).exp() + (-0.5 * (v + v0).powi(2)).exp())),
            );
            f.push(grid.x_coord(0).mapv(|x| 1.0 + beta * (k * x).cos()), g);
        }
        ScenarioKind::Landau2D => {
            let (v1, v2) = (grid.v_coord(0), grid.v_coord(1));
            let norm = (2.0 * PI).powf(-1.5);
            let g = pinned(Array1::from_shape_fn(grid.nv(), |j| {
                norm * (-0.5 * (v1[j] * v1[j] + v2[j] * v2[j])).exp()
            }));
            f.push(Array1::ones(grid.nx()), g.clone());
            f.push(grid.x_coord(0).mapv(|x| -beta * (k * x).sin()), g.clone());
            f.push(grid.x_coord(1).mapv(|x| -beta * (k * x).sin()), g);
        }
    }
    Ok(f)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn landau_value_at_origin() {
        let p = ScenarioParams::preset(ScenarioKind::Landau1D);
        let grid = p.phase_grid().unwrap();
        let f = initial_condition(&p, &grid).unwrap();
        assert_eq!(f.rank(), 1);
        // x = 0 is node 0; v = 0 is not a node for an even count, so check v-node j directly.
        let j = grid.nv() / 2;
        let v = grid.v_coord(0)[j];
        let expected = 1.01 * (-0.5 * v * v).exp() / (2.0 * PI).sqrt();
        assert!((f.value_at(0, j) - expected).abs() < 1e-15);
    }

    #[test]
    fn landau_value_at_origin_on_odd_velocity_grid() {
        let p = ScenarioParams {
            nv: 33,
            ..ScenarioParams::preset(ScenarioKind::Landau1D)
        };
        let grid = p.phase_grid().unwrap();
        let f = initial_condition(&p, &grid).unwrap();
        assert_eq!(grid.v_coord(0)[16], 0.0);
        assert!((f.value_at(0, 16) - 1.01 / (2.0 * PI).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn unperturbed_landau_is_uniform_in_space() {
        let p = ScenarioParams {
            beta: 0.0,
            ..ScenarioParams::preset(ScenarioKind::Landau1D)
        };
        let grid = p.phase_grid().unwrap();
        let f = initial_condition(&p, &grid).unwrap();
        assert_eq!(f.rank(), 1);
        assert!(f.x_factors()[0].iter().all(|&v| v == 1.0));
    }

    #[test]
    fn two_stream_domain_and_profile() {
        let p = ScenarioParams::preset(ScenarioKind::TwoStream1D);
        assert!((p.x_length - 50.0 * PI).abs() < 1e-12);
        let grid = p.phase_grid().unwrap();
        let f = initial_condition(&p, &grid).unwrap();
        let s = &f.v_factors()[0];
        let (imax, _) = s
            .iter()
            .enumerate()
            .fold((0, f64::MIN), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
        assert!((grid.v_coord(0)[imax].abs() - 2.4).abs() < 0.2);
    }

    #[test]
    fn boundary_velocities_are_pinned() {
        for kind in ScenarioKind::ALL {
            let p = ScenarioParams::preset(kind);
            let grid = p.phase_grid().unwrap();
            let f = initial_condition(&p, &grid).unwrap();
            for s in f.v_factors() {
                assert!(grid.v_boundary().iter().all(|&j| s[j] == 0.0));
            }
            assert!(f.to_dense().iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn names_round_trip() {
        for kind in ScenarioKind::ALL {
            assert_eq!(kind.name().parse::<ScenarioKind>().unwrap(), kind);
        }
        assert_eq!("Two-Stream".parse::<ScenarioKind>().unwrap(), ScenarioKind::TwoStream1D);
        assert!("vortex".parse::<ScenarioKind>().is_err());
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let p1 = ScenarioParams::preset(ScenarioKind::Landau1D);
        let p2 = ScenarioParams::preset(ScenarioKind::Landau2D);
        assert!(initial_condition(&p2, &p1.phase_grid().unwrap()).is_err());
    }
}
