//! Text serialization of separated functions, field dumps, and resampling
//! between nested grids.
//!
//! A snapshot is a `key=value` header followed by two blocks, one line per
//! term, each line holding the comma-separated factor values:
//!
//! ```text
//! # vlasov-pgd separated function
//! rank=2
//! nx=32
//! nv=32
//! step=100
//! t=2.5e-1
//! x_axes=0e0:1.2566370614359172e1:32
//! v_axes=-1e1:1e1:32
//! [x_factors]
//! ...
//! [v_factors]
//! ...
//! ```
//!
//! Floats are written in shortest round-trip form, so reading a snapshot back
//! reproduces the factors bit for bit.

use std::io::{BufRead, Write};

use ndarray::Array1;

use crate::error::{Error, Result};
use crate::field::FieldState;
use crate::grid::{build_grid, Boundary, Grid1D, PhaseGrid, XDerivative};
use crate::linalg::{FactorMatrix, SparseMatrix};
use crate::tensor::SeparatedFunction;

const MAGIC: &str = "# vlasov-pgd separated function";

/// `(lower, upper, count)` of one axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxisSpec {
    pub lower: f64,
    pub upper: f64,
    pub count: usize,
}

impl From<&Grid1D> for AxisSpec {
    fn from(g: &Grid1D) -> Self {
        Self {
            lower: g.lower(),
            upper: g.upper(),
            count: g.count(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub step: usize,
    pub t: f64,
    pub x_axes: Vec<AxisSpec>,
    pub v_axes: Vec<AxisSpec>,
    pub f: SeparatedFunction,
}

fn format_axes(axes: &[AxisSpec]) -> String {
    axes.iter()
        .map(|a| format!("{:e}:{:e}:{}", a.lower, a.upper, a.count))
        .collect::<Vec<_>>()
        .join(";")
}

fn parse_axes(s: &str) -> Result<Vec<AxisSpec>> {
    s.split(';')
        .map(|part| {
            let fields: Vec<&str> = part.split(':').collect();
            let [lo, hi, n] = fields.as_slice() else {
                return Err(Error::Snapshot(format!("malformed axis '{part}'")));
            };
            Ok(AxisSpec {
                lower: parse_num(lo)?,
                upper: parse_num(hi)?,
                count: n
                    .trim()
                    .parse()
                    .map_err(|_| Error::Snapshot(format!("bad axis count '{n}'")))?,
            })
        })
        .collect()
}

fn parse_num(s: &str) -> Result<f64> {
    s.trim()
        .parse()
        .map_err(|_| Error::Snapshot(format!("bad number '{s}'")))
}

fn write_factor<W: Write>(w: &mut W, v: &Array1<f64>) -> std::io::Result<()> {
    let mut first = true;
    for x in v {
        if !first {
            w.write_all(b",")?;
        }
        write!(w, "{x:e}")?;
        first = false;
    }
    writeln!(w)
}

impl Snapshot {
    pub fn new(step: usize, t: f64, grid: &PhaseGrid, f: SeparatedFunction) -> Self {
        Self {
            step,
            t,
            x_axes: grid.x_grids().iter().map(AxisSpec::from).collect(),
            v_axes: grid.v_grids().iter().map(AxisSpec::from).collect(),
            f,
        }
    }

    pub fn write<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{MAGIC}")?;
        writeln!(w, "rank={}", self.f.rank())?;
        writeln!(w, "nx={}", self.f.nx())?;
        writeln!(w, "nv={}", self.f.nv())?;
        writeln!(w, "step={}", self.step)?;
        writeln!(w, "t={:e}", self.t)?;
        writeln!(w, "x_axes={}", format_axes(&self.x_axes))?;
        writeln!(w, "v_axes={}", format_axes(&self.v_axes))?;
        writeln!(w, "[x_factors]")?;
        for r in self.f.x_factors() {
            write_factor(&mut w, r)?;
        }
        writeln!(w, "[v_factors]")?;
        for s in self.f.v_factors() {
            write_factor(&mut w, s)?;
        }
        Ok(())
    }

    pub fn read<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        if next_line(&mut lines)?.as_deref() != Some(MAGIC) {
            return Err(Error::Snapshot("missing snapshot header".into()));
        }
        let mut header = std::collections::HashMap::new();
        loop {
            let line = next_line(&mut lines)?.ok_or_else(|| Error::Snapshot("truncated header".into()))?;
            if line == "[x_factors]" {
                break;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Snapshot(format!("malformed header line '{line}'")))?;
            header.insert(k.trim().to_string(), v.trim().to_string());
        }
        let get = |k: &str| {
            header
                .get(k)
                .cloned()
                .ok_or_else(|| Error::Snapshot(format!("missing header key '{k}'")))
        };
        let int = |k: &str| -> Result<usize> {
            get(k)?
                .parse()
                .map_err(|_| Error::Snapshot(format!("bad integer for '{k}'")))
        };
        let (rank, nx, nv, step) = (int("rank")?, int("nx")?, int("nv")?, int("step")?);
        let t = parse_num(&get("t")?)?;
        let x_axes = parse_axes(&get("x_axes")?)?;
        let v_axes = parse_axes(&get("v_axes")?)?;

        let xs = read_block(&mut lines, rank, nx, "x-factor")?;
        if next_line(&mut lines)?.as_deref() != Some("[v_factors]") {
            return Err(Error::Snapshot("missing [v_factors] block".into()));
        }
        let vs = read_block(&mut lines, rank, nv, "v-factor")?;
        Ok(Self {
            step,
            t,
            x_axes,
            v_axes,
            f: SeparatedFunction::from_factors(nx, nv, xs, vs)?,
        })
    }

    /// Rebuilds the phase grid described by the header.
    pub fn phase_grid(&self, x_derivative: XDerivative) -> Result<PhaseGrid> {
        let x = self
            .x_axes
            .iter()
            .map(|a| build_grid(a.lower, a.upper, a.count, Boundary::Periodic))
            .collect::<Result<Vec<_>>>()?;
        let v = self
            .v_axes
            .iter()
            .map(|a| build_grid(a.lower, a.upper, a.count, Boundary::DirichletZero))
            .collect::<Result<Vec<_>>>()?;
        PhaseGrid::new(x, v, x_derivative)
    }

    /// The stored function linearly interpolated onto `target`, factor by factor.
    /// Exact wherever target nodes coincide with source nodes.
    pub fn resample(&self, target: &PhaseGrid) -> Result<SeparatedFunction> {
        let src = self.phase_grid(XDerivative::Centered)?;
        let ix = interpolation(src.x_grids(), target.x_grids())?;
        let iv = interpolation(src.v_grids(), target.v_grids())?;
        let mut out = SeparatedFunction::zeros(target.nx(), target.nv());
        for (r, s) in self.f.terms() {
            let mut s = iv.apply(s.view());
            target.metric().pin(&mut s);
            out.push(ix.apply(r.view()), s);
        }
        Ok(out)
    }
}

fn next_line<R: BufRead>(lines: &mut std::io::Lines<R>) -> Result<Option<String>> {
    lines.next().transpose().map_err(Error::from)
}

fn read_block<R: BufRead>(
    lines: &mut std::io::Lines<R>,
    n: usize,
    len: usize,
    what: &str,
) -> Result<Vec<Array1<f64>>> {
    (0..n)
        .map(|k| {
            let line = next_line(lines)?.ok_or_else(|| Error::Snapshot(format!("missing {what} {k}")))?;
            let v = line.split(',').map(parse_num).collect::<Result<Vec<f64>>>()?;
            if v.len() != len {
                return Err(Error::Snapshot(format!("{what} {k} has {} values, expected {len}", v.len())));
            }
            Ok(Array1::from(v))
        })
        .collect()
}

/// 1D linear interpolation matrix from `src` nodes to `dst` nodes.
fn interpolation_1d(src: &Grid1D, dst: &Grid1D) -> Result<SparseMatrix> {
    if src.boundary() != dst.boundary() {
        return Err(Error::InvalidGrid("cannot resample across boundary types".into()));
    }
    let n = src.count();
    let h = src.spacing();
    let mut triplets = Vec::with_capacity(2 * dst.count());
    for (i, &x) in dst.nodes().iter().enumerate() {
        let pos = (x - src.lower()) / h;
        match src.boundary() {
            Boundary::Periodic => {
                let pos = pos.rem_euclid(n as f64);
                let j = (pos.floor() as usize).min(n - 1);
                let frac = pos - j as f64;
                push_weights(&mut triplets, i, j, (j + 1) % n, frac);
            }
            Boundary::DirichletZero => {
                let pos = pos.clamp(0.0, (n - 1) as f64);
                let j = (pos.floor() as usize).min(n - 2);
                let frac = pos - j as f64;
                push_weights(&mut triplets, i, j, j + 1, frac);
            }
        }
    }
    Ok(SparseMatrix::from_triplets(dst.count(), n, &triplets))
}

fn push_weights(triplets: &mut Vec<(usize, usize, f64)>, i: usize, j0: usize, j1: usize, frac: f64) {
    // Snap to the node when within rounding of it so nested grids copy values exactly.
    if frac.abs() < 1e-9 {
        triplets.push((i, j0, 1.0));
    } else if (1.0 - frac).abs() < 1e-9 {
        triplets.push((i, j1, 1.0));
    } else {
        triplets.push((i, j0, 1.0 - frac));
        triplets.push((i, j1, frac));
    }
}

fn interpolation(src: &[Grid1D], dst: &[Grid1D]) -> Result<FactorMatrix> {
    if src.len() != dst.len() {
        return Err(Error::Dimension("resampling between grids of different dimension".into()));
    }
    let mut m = interpolation_1d(&src[0], &dst[0])?;
    for (s, d) in src.iter().zip(dst).skip(1) {
        m = SparseMatrix::kron(&m, &interpolation_1d(s, d)?);
    }
    Ok(FactorMatrix::Sparse(m))
}

/// Field dump: `x_1[,x_2],rho,phi,E_1[,E_2]`, one row per space node.
pub fn write_fields_csv<W: Write>(mut w: W, grid: &PhaseGrid, field: &FieldState) -> std::io::Result<()> {
    let d = grid.dim();
    let xs: Vec<String> = (1..=d).map(|a| format!("x_{a}")).collect();
    let es: Vec<String> = (1..=d).map(|a| format!("E_{a}")).collect();
    writeln!(w, "{},rho,phi,{}", xs.join(","), es.join(","))?;
    for i in 0..grid.nx() {
        let mut cells: Vec<String> = (0..d).map(|a| format!("{:e}", grid.x_coord(a)[i])).collect();
        cells.push(format!("{:e}", field.rho[i]));
        cells.push(format!("{:e}", field.phi[i]));
        cells.extend(field.e_field.iter().map(|e| format!("{:e}", e[i])));
        writeln!(w, "{}", cells.join(","))?;
    }
    Ok(())
}
