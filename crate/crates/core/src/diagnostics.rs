//! Conserved quantities, time-averaged error metrics and the decay-rate fit.

use std::io::Write;

use ndarray::Array1;

use crate::error::{check_len, Error, Result};
use crate::field::FieldState;
use crate::grid::PhaseGrid;
use crate::tensor::SeparatedFunction;

#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub mass: f64,
    pub momentum: Vec<f64>,
    pub kinetic: f64,
    /// `½∫φρ dx`.
    pub potential_term: f64,
    /// `K − ½∫φρ dx`.
    pub hamiltonian: f64,
    /// `½∫|E|² dx`.
    pub electric_energy: f64,
    pub rank: usize,
    pub mass_defect: f64,
}

/// Moments of `f` and field energies at time `t`.
pub fn observe(t: f64, f: &SeparatedFunction, field: &FieldState, grid: &PhaseGrid) -> Result<DiagnosticsRecord> {
    let metric = grid.metric();
    f.check_metric(metric)?;
    check_len("density", grid.nx(), field.rho.len())?;
    check_len("potential", grid.nx(), field.phi.len())?;
    check_len("field components", grid.dim(), field.e_field.len())?;
    let (wx, wv) = (metric.x_weights(), metric.v_weights());

    let half_v2: Array1<f64> = (0..grid.dim())
        .map(|a| grid.v_coord(a).mapv(|v| 0.5 * v * v))
        .fold(Array1::zeros(grid.nv()), |acc, e| acc + e);
    let wv_vel: Vec<Array1<f64>> = (0..grid.dim()).map(|a| wv * grid.v_coord(a)).collect();
    let wv_kin = wv * &half_v2;

    let mut mass = 0.0;
    let mut momentum = vec![0.0; grid.dim()];
    let mut kinetic = 0.0;
    for (r, s) in f.terms() {
        let rx = wx.dot(r);
        mass += rx * wv.dot(s);
        for (p, w) in momentum.iter_mut().zip(&wv_vel) {
            *p += rx * w.dot(s);
        }
        kinetic += rx * wv_kin.dot(s);
    }
    let potential_term = 0.5 * (wx * &field.phi).dot(&field.rho);
    let electric_energy = 0.5 * field.e_field.iter().map(|e| (wx * e).dot(e)).sum::<f64>();
    Ok(DiagnosticsRecord {
        t,
        mass,
        momentum,
        kinetic,
        potential_term,
        hamiltonian: kinetic - potential_term,
        electric_energy,
        rank: f.rank(),
        mass_defect: field.mass_defect,
    })
}

/// Time-averaged relative errors. `eps_f` is present only when a reference
/// solution was supplied.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorSummary {
    pub eps_m: f64,
    pub eps_p: f64,
    pub eps_h: f64,
    pub eps_f: Option<f64>,
}

/// `∫ y dt` by the trapezoid rule over the samples with `t ≤ t_end`.
fn trapezoid(t: &[f64], y: &[f64]) -> f64 {
    t.windows(2)
        .zip(y.windows(2))
        .map(|(t, y)| 0.5 * (t[1] - t[0]) * (y[0] + y[1]))
        .sum()
}

/// `ε_m`, `ε_p`, `ε_h` from the recorded series and, when `field_errors`
/// holds `(t, ‖f_ref − f‖²/‖f_ref‖²)` samples, `ε_f`.
///
/// Normalizations: `M = m(0)`, `P = √(2MK)` with the initial kinetic energy,
/// and `H(0)`. Each metric is `(1/(N t_f)) (∫_0^{t_f} (q − q(0))² dt)^{1/2}`
/// with `|·|` the Euclidean norm for the momentum vector.
pub fn error_summary(
    series: &[DiagnosticsRecord],
    field_errors: Option<&[(f64, f64)]>,
    t_f: f64,
) -> Result<ErrorSummary> {
    let first = series
        .first()
        .ok_or_else(|| Error::InvalidFit("empty diagnostics series".into()))?;
    if !(t_f > 0.0) {
        return Err(Error::UndefinedNormalization("final time"));
    }
    let m0 = first.mass;
    let h0 = first.hamiltonian;
    let p_scale = (2.0 * m0 * first.kinetic).sqrt();
    if m0 == 0.0 {
        return Err(Error::UndefinedNormalization("initial mass"));
    }
    if h0 == 0.0 {
        return Err(Error::UndefinedNormalization("initial Hamiltonian"));
    }
    if !(p_scale > 0.0) {
        return Err(Error::UndefinedNormalization("momentum scale"));
    }

    let kept: Vec<&DiagnosticsRecord> = series.iter().filter(|r| r.t <= t_f * (1.0 + 1e-12)).collect();
    let t: Vec<f64> = kept.iter().map(|r| r.t).collect();
    let metric = |dev: &dyn Fn(&DiagnosticsRecord) -> f64, norm: f64| {
        let y: Vec<f64> = kept.iter().map(|r| dev(r).powi(2)).collect();
        trapezoid(&t, &y).sqrt() / (norm.abs() * t_f)
    };
    let eps_m = metric(&|r| r.mass - m0, m0);
    let eps_p = metric(
        &|r| {
            r.momentum
                .iter()
                .zip(&first.momentum)
                .map(|(p, p0)| (p - p0).powi(2))
                .sum::<f64>()
                .sqrt()
        },
        p_scale,
    );
    let eps_h = metric(&|r| r.hamiltonian - h0, h0);
    let eps_f = field_errors.map(|samples| {
        let t: Vec<f64> = samples.iter().map(|s| s.0).collect();
        let y: Vec<f64> = samples.iter().map(|s| s.1).collect();
        trapezoid(&t, &y).sqrt() / t_f
    });
    Ok(ErrorSummary {
        eps_m,
        eps_p,
        eps_h,
        eps_f,
    })
}

/// `Σ w_x w_v (F − G)² / Σ w_x w_v G²` on materialized arrays.
pub fn relative_l2_sq(f: &SeparatedFunction, reference: &SeparatedFunction, grid: &PhaseGrid) -> Result<f64> {
    let metric = grid.metric();
    f.check_metric(metric)?;
    reference.check_metric(metric)?;
    let (fd, rd) = (f.to_dense(), reference.to_dense());
    let (wx, wv) = (metric.x_weights(), metric.v_weights());
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..grid.nx() {
        let (fr, rr) = (fd.row(i), rd.row(i));
        let mut row_num = 0.0;
        let mut row_den = 0.0;
        for j in 0..grid.nv() {
            row_num += wv[j] * (fr[j] - rr[j]).powi(2);
            row_den += wv[j] * rr[j] * rr[j];
        }
        num += wx[i] * row_num;
        den += wx[i] * row_den;
    }
    if den == 0.0 {
        return Err(Error::UndefinedNormalization("reference norm"));
    }
    Ok(num / den)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayFit {
    /// Amplitude decay rate (half the energy decay rate).
    pub gamma_fit: f64,
    pub peaks_used: usize,
    /// RMS residual of the log-linear fit.
    pub fit_rms: f64,
}

/// Peaks before this time are treated as transients.
pub const FIT_START: f64 = 1.0;
/// Minimum topographic prominence of a peak, relative to its height.
pub const MIN_PROMINENCE: f64 = 1e-3;

/// Strict local maxima of `y` with relative prominence at least [`MIN_PROMINENCE`].
pub fn find_peaks(y: &[f64]) -> Vec<usize> {
    let n = y.len();
    (1..n.saturating_sub(1))
        .filter(|&i| y[i] > y[i - 1] && y[i] > y[i + 1])
        .filter(|&i| {
            let base = |range: &mut dyn Iterator<Item = usize>| {
                let mut lowest = y[i];
                for j in range {
                    if y[j] > y[i] {
                        break;
                    }
                    lowest = lowest.min(y[j]);
                }
                lowest
            };
            let left = base(&mut (0..i).rev());
            let right = base(&mut (i + 1..n));
            y[i] - left.max(right) >= MIN_PROMINENCE * y[i].abs()
        })
        .collect()
}

/// Least-squares line through `(t_peak, ln E_peak)` for the peaks after
/// [`FIT_START`]; `γ = −slope/2`.
pub fn fit_decay(times: &[f64], energy: &[f64]) -> Result<DecayFit> {
    check_len("energy series", times.len(), energy.len())?;
    if energy.iter().any(|e| !(e.is_finite() && *e >= 0.0)) {
        return Err(Error::InvalidFit("energy must be finite and non-negative".into()));
    }
    if let (Some(lo), Some(hi)) = (
        energy.iter().copied().reduce(f64::min),
        energy.iter().copied().reduce(f64::max),
    ) {
        if hi - lo <= f64::EPSILON * hi.abs() {
            return Ok(DecayFit {
                gamma_fit: 0.0,
                peaks_used: 0,
                fit_rms: 0.0,
            });
        }
    }
    let peaks: Vec<(f64, f64)> = find_peaks(energy)
        .into_iter()
        .filter(|&i| times[i] > FIT_START && energy[i] > 0.0)
        .map(|i| (times[i], energy[i].ln()))
        .collect();
    if peaks.len() < 3 {
        return Err(Error::InvalidFit(format!(
            "found {} peaks after t = {FIT_START}, need at least 3",
            peaks.len()
        )));
    }
    let n = peaks.len() as f64;
    let tm = peaks.iter().map(|p| p.0).sum::<f64>() / n;
    let ym = peaks.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = peaks.iter().map(|p| (p.0 - tm) * (p.1 - ym)).sum();
    let sxx: f64 = peaks.iter().map(|p| (p.0 - tm).powi(2)).sum();
    let slope = sxy / sxx;
    let fit_rms = (peaks
        .iter()
        .map(|p| (p.1 - ym - slope * (p.0 - tm)).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    Ok(DecayFit {
        gamma_fit: -0.5 * slope,
        peaks_used: peaks.len(),
        fit_rms,
    })
}

/// Header of the diagnostics CSV for `dim` velocity axes.
pub fn csv_header(dim: usize) -> String {
    let p: Vec<String> = (1..=dim).map(|a| format!("p_{a}")).collect();
    format!(
        "t,mass,{},kinetic,potential_term,hamiltonian,electric_energy,rank,mass_defect",
        p.join(",")
    )
}

pub fn write_csv_row<W: Write>(mut w: W, r: &DiagnosticsRecord) -> std::io::Result<()> {
    let p: Vec<String> = r.momentum.iter().map(|p| format!("{p:e}")).collect();
    writeln!(
        w,
        "{:e},{:e},{},{:e},{:e},{:e},{:e},{},{:e}",
        r.t,
        r.mass,
        p.join(","),
        r.kinetic,
        r.potential_term,
        r.hamiltonian,
        r.electric_energy,
        r.rank,
        r.mass_defect
    )
}

pub fn write_csv<W: Write>(mut w: W, series: &[DiagnosticsRecord]) -> std::io::Result<()> {
    let dim = series.first().map_or(1, |r| r.momentum.len());
    writeln!(w, "{}", csv_header(dim))?;
    for r in series {
        write_csv_row(&mut w, r)?;
    }
    Ok(())
}
