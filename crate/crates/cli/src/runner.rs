//! One scenario run: initial data, time stepping, diagnostics and output files.

use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use log::{error, info, warn};
use vlasov_pgd::diagnostics::{csv_header, write_csv_row, relative_l2_sq};
use vlasov_pgd::snapshot::write_fields_csv;
use vlasov_pgd::{
    error_summary, fit_decay, initial_condition, observe, DecayFit, DiagnosticsRecord, ErrorSummary,
    FieldState, PhaseGrid, ScenarioKind, SeparatedFunction, Snapshot, StepConfig, StepMetadata, Stepper,
};

use crate::config::RunConfig;
use crate::output::{write_atomic, write_string};

/// Outcome of a run that got as far as writing its outputs.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub steps_completed: usize,
    pub final_rank: usize,
    pub max_rank: usize,
    pub errors: Option<ErrorSummary>,
    pub decay: Option<DecayFit>,
    /// Step-failure message; the outputs then cover the completed steps.
    pub failure: Option<String>,
    pub wall_seconds: f64,
}

impl RunSummary {
    pub fn succeeded(&self) -> bool {
        self.failure.is_none()
    }
}

/// Reference snapshots, sorted by time.
pub struct Reference {
    snapshots: Vec<Snapshot>,
}

impl Reference {
    /// Loads `snapshot_*.txt` from `dir` or from `dir/snapshots`.
    pub fn load(dir: &Path) -> Result<Self> {
        let sub = dir.join("snapshots");
        let dir = if sub.is_dir() { sub } else { dir.to_path_buf() };
        let mut paths: Vec<PathBuf> = fs::read_dir(&dir)
            .with_context(|| format!("reading reference directory {}", dir.display()))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| {
                p.file_name()
                    .and_then(|n| n.to_str())
                    .is_some_and(|n| n.starts_with("snapshot_") && n.ends_with(".txt"))
            })
            .collect();
        paths.sort();
        let mut snapshots = Vec::with_capacity(paths.len());
        for p in &paths {
            let file = fs::File::open(p).with_context(|| format!("opening {}", p.display()))?;
            snapshots.push(Snapshot::read(BufReader::new(file)).with_context(|| format!("reading {}", p.display()))?);
        }
        if snapshots.is_empty() {
            bail!("no reference snapshots in {}", dir.display());
        }
        snapshots.sort_by(|a, b| a.t.total_cmp(&b.t));
        Ok(Self { snapshots })
    }

    pub fn len(&self) -> usize {
        self.snapshots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }

    /// The snapshot taken at time `t`, up to round-off in the time stamps.
    pub fn at(&self, t: f64) -> Option<&Snapshot> {
        let tol = 1e-9 * t.abs().max(1.0);
        let i = self.snapshots.partition_point(|s| s.t < t - tol);
        self.snapshots.get(i).filter(|s| (s.t - t).abs() <= tol)
    }

    /// `‖f_ref − f‖² / ‖f_ref‖²` with the reference restricted to `grid`.
    pub fn error_at(&self, t: f64, f: &SeparatedFunction, grid: &PhaseGrid) -> Result<Option<f64>> {
        let Some(snap) = self.at(t) else { return Ok(None) };
        let reference = snap.resample(grid).context("resampling reference snapshot")?;
        Ok(Some(relative_l2_sq(f, &reference, grid)?))
    }
}

fn snapshot_name(step: usize) -> String {
    format!("snapshot_{step:06}.txt")
}

fn fields_name(step: usize) -> String {
    format!("fields_{step:06}.csv")
}

fn write_snapshot(dir: &Path, grid: &PhaseGrid, step: usize, t: f64, f: &SeparatedFunction, field: &FieldState) -> Result<()> {
    let snap = Snapshot::new(step, t, grid, f.clone());
    write_atomic(&dir.join(snapshot_name(step)), |w| snap.write(w))?;
    write_atomic(&dir.join(fields_name(step)), |w| write_fields_csv(w, grid, field))
}

const RANKS_HEADER: &str =
    "t,rank,rank_force,rank_transport,fp_iterations_force,fp_iterations_transport,kappa_force,kappa_transport,recompressions,als_unconverged";

fn ranks_row(t: f64, rank: usize, meta: Option<&StepMetadata>) -> String {
    match meta {
        Some(m) => format!(
            "{:e},{},{},{},{},{},{:e},{:e},{},{}",
            t,
            rank,
            m.ranks[0],
            m.ranks[1],
            m.fp_iterations[0],
            m.fp_iterations[1],
            m.kappa[0],
            m.kappa[1],
            m.recompressions,
            m.als_unconverged
        ),
        None => format!("{t:e},{rank},{rank},{rank},0,0,0e0,0e0,0,0"),
    }
}

struct Trace {
    records: Vec<DiagnosticsRecord>,
    ranks: Vec<String>,
    field_errors: Vec<(f64, f64)>,
}

fn write_outputs(cfg: &RunConfig, trace: &Trace, summary: &RunSummary, decay_err: Option<&str>) -> Result<()> {
    let out = &cfg.out_dir;
    let stride = cfg.diagnostics_stride;
    let last = trace.records.len().saturating_sub(1);
    let keep = |i: usize| i % stride == 0 || i == last;

    let dim = cfg.scenario.dim();
    write_atomic(&out.join("diagnostics.csv"), |w| {
        for line in cfg.echo().lines() {
            writeln!(w, "# {line}")?;
        }
        writeln!(w, "{}", csv_header(dim))?;
        for (i, r) in trace.records.iter().enumerate() {
            if keep(i) {
                write_csv_row(&mut *w, r)?;
            }
        }
        Ok(())
    })?;
    write_atomic(&out.join("ranks.csv"), |w| {
        writeln!(w, "{RANKS_HEADER}")?;
        for (i, row) in trace.ranks.iter().enumerate() {
            if keep(i) {
                writeln!(w, "{row}")?;
            }
        }
        Ok(())
    })?;

    let mut decay = String::new();
    match (&summary.decay, decay_err) {
        (Some(d), _) => {
            decay += &format!("gamma_fit={:e}\npeaks_used={}\nfit_rms={:e}\n", d.gamma_fit, d.peaks_used, d.fit_rms);
        }
        (None, Some(msg)) => decay += &format!("status=failed\nreason={msg}\n"),
        (None, None) => decay += "status=not_applicable\n",
    }
    write_string(&out.join("decay_fit.txt"), &decay)?;

    let mut text = format!(
        "scenario={}\nsteps_completed={}\nsteps_requested={}\nfinal_rank={}\nmax_rank={}\n",
        cfg.scenario.kind, summary.steps_completed, cfg.scenario.n_steps, summary.final_rank, summary.max_rank
    );
    match &summary.errors {
        Some(e) => {
            text += &format!("eps_m={:e}\neps_p={:e}\neps_h={:e}\n", e.eps_m, e.eps_p, e.eps_h);
            match e.eps_f {
                Some(v) => text += &format!("eps_f={v:e}\nreference_samples={}\n", trace.field_errors.len()),
                None => text += "eps_f=n/a\n",
            }
        }
        None => text += "eps_m=n/a\neps_p=n/a\neps_h=n/a\neps_f=n/a\n",
    }
    text += &format!(
        "status={}\n",
        match &summary.failure {
            None => "ok".to_string(),
            Some(msg) => format!("failed: {msg}"),
        }
    );
    write_string(&out.join("error_summary.txt"), &text)?;
    write_string(&out.join("plot_instructions.txt"), &plot_instructions(cfg))
}

/// Executes the run described by `cfg`. Step failures are reported in the
/// summary after the partial outputs are written; I/O and setup problems are
/// returned as errors.
pub fn execute(cfg: &RunConfig) -> Result<RunSummary> {
    let start = Instant::now();
    let p = &cfg.scenario;
    let grid = p.phase_grid()?;
    let f0 = initial_condition(p, &grid)?;
    let step_cfg = StepConfig {
        dt: p.dt(),
        tol: cfg.tolerances,
        recompress: cfg.recompress,
        force_sign: cfg.force_sign,
        splitting: cfg.splitting,
    };
    step_cfg.validate()?;
    let reference = cfg.reference.as_deref().map(Reference::load).transpose()?;
    if let Some(r) = &reference {
        info!("loaded {} reference snapshots", r.len());
    }

    let out = &cfg.out_dir;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let snap_dir = out.join("snapshots");
    info!(
        "{}: nx={} nv={} steps={} dt={:e} eps={:e} -> {}",
        p.kind,
        p.nx,
        p.nv,
        p.n_steps,
        p.dt(),
        cfg.tolerances.epsilon,
        out.display()
    );

    let mut stepper = Stepper::new(&grid, step_cfg);
    let field0 = stepper.field(&f0)?;
    let mut trace = Trace {
        records: vec![observe(0.0, &f0, &field0, &grid)?],
        ranks: vec![ranks_row(0.0, f0.rank(), None)],
        field_errors: Vec::new(),
    };
    if let Some(r) = &reference {
        if let Some(e) = r.error_at(0.0, &f0, &grid)? {
            trace.field_errors.push((0.0, e));
        }
    }
    if cfg.snapshot_stride > 0 {
        write_snapshot(&snap_dir, &grid, 0, 0.0, &f0, &field0)?;
    }

    let mut f = f0;
    let mut field = field0;
    let mut t = 0.0;
    let mut max_rank = f.rank();
    let mut failure = None;
    let mut completed = 0;
    for m in 0..p.n_steps {
        let out = match stepper.step(&f, m) {
            Ok(out) => out,
            Err(e) => {
                error!("{}: run stopped at step {}: {e}", p.kind, m + 1);
                failure = Some(e.to_string());
                break;
            }
        };
        f = out.f;
        t = out.meta.t;
        field = stepper.field(&f)?;
        completed = m + 1;
        max_rank = max_rank.max(f.rank());
        trace.records.push(observe(t, &f, &field, &grid)?);
        trace.ranks.push(ranks_row(t, f.rank(), Some(&out.meta)));
        if let Some(r) = &reference {
            if let Some(e) = r.error_at(t, &f, &grid)? {
                trace.field_errors.push((t, e));
            }
        }
        if cfg.snapshot_stride > 0 && completed % cfg.snapshot_stride == 0 {
            write_snapshot(&snap_dir, &grid, completed, t, &f, &field)?;
        }
        if completed % 100 == 0 || completed == p.n_steps {
            info!("{}: step {completed}/{} t={t:.4} rank={}", p.kind, p.n_steps, f.rank());
        }
    }
    if cfg.snapshot_stride == 0 || completed % cfg.snapshot_stride != 0 {
        write_snapshot(&snap_dir, &grid, completed, t, &f, &field)?;
    }

    let field_errors = match (&reference, trace.field_errors.len()) {
        (Some(_), n) if n >= 2 => Some(trace.field_errors.as_slice()),
        (Some(_), n) => {
            warn!("only {n} reference snapshot(s) match this run's time steps; eps_f not computed");
            None
        }
        (None, _) => None,
    };
    let errors = match error_summary(&trace.records, field_errors, t.max(f64::MIN_POSITIVE)) {
        Ok(e) if completed > 0 => Some(e),
        Ok(_) => None,
        Err(e) => {
            warn!("error summary unavailable: {e}");
            None
        }
    };

    let (decay, decay_err) = if matches!(p.kind, ScenarioKind::Landau1D | ScenarioKind::Landau2D) {
        let times: Vec<f64> = trace.records.iter().map(|r| r.t).collect();
        let energy: Vec<f64> = trace.records.iter().map(|r| r.electric_energy).collect();
        match fit_decay(&times, &energy) {
            Ok(d) => (Some(d), None),
            Err(e) => (None, Some(e.to_string())),
        }
    } else {
        (None, None)
    };

    let summary = RunSummary {
        steps_completed: completed,
        final_rank: f.rank(),
        max_rank,
        errors,
        decay,
        failure,
        wall_seconds: start.elapsed().as_secs_f64(),
    };
    write_outputs(cfg, &trace, &summary, decay_err.as_deref())?;
    info!(
        "{}: finished {completed} steps in {:.1}s, final rank {}",
        p.kind, summary.wall_seconds, summary.final_rank
    );
    Ok(summary)
}

/// Plain-text description of how to plot the run's outputs.
pub fn plot_instructions(cfg: &RunConfig) -> String {
    let dim = cfg.scenario.dim();
    let energy_col = 5 + dim;
    let mut s = String::new();
    s += "Plot data written by this run. Columns are 1-based; lines starting with # are comments.\n\n";
    s += &format!(
        "Electric energy (Figs. 1 and 4): diagnostics.csv, x = column 1 (t), y = column {energy_col} \
         (electric_energy), logarithmic y axis.\n"
    );
    if cfg.scenario.kind == ScenarioKind::Landau1D {
        s += "  Overlay the linear-theory envelope E(t) = E(0) exp(-2 * 0.153 t); decay_fit.txt holds the fitted rate.\n";
    }
    s += "\nRank history (Fig. 2): ranks.csv, x = column 1 (t), y = column 2 (rank after the step).\n";
    s += "  Columns 3-4 give the ranks after the implicit substeps, 5-6 the fixed-point iteration counts.\n";
    s += "\nConservation: diagnostics.csv columns 2 (mass), ";
    s += &format!("3..{} (momentum), {} (hamiltonian); error_summary.txt has the time-averaged errors.\n", 2 + dim, 5 + dim);
    s += "\nPhase space (Fig. 3): snapshots/snapshot_<step>.txt stores f = sum_k r_k(x) s_k(v).\n";
    s += "  Each line of [x_factors] is one r_k over the x nodes, the matching line of [v_factors] is s_k over the v nodes.\n";
    s += "  Nodes are lower + i (upper - lower) / count for periodic x and lower + j (upper - lower) / (count - 1) for v.\n";
    s += "  Form F[i][j] = sum_k r_k[i] s_k[j] and draw F as a filled contour over (x, v).\n";
    if dim == 2 {
        s += "  In 2D the x index is i = i1 * n + i2 and likewise for v.\n";
    }
    s += "\nFields: snapshots/fields_<step>.csv holds x, rho, phi and E at the same step.\n";
    s += "\nTables 1 and 2: run the sweep subcommand and read sweep_summary.csv.\n";
    s
}
