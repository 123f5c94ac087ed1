//! Parameter sweeps: the Cartesian product of value lists, one run per
//! combination, summarized as a Table-1-style CSV.

use std::path::Path;

use anyhow::{bail, Context, Result};
use log::error;
use rayon::prelude::*;

use crate::config::{resolve, Entry, RunConfig, KEYS};
use crate::output::write_atomic;
use crate::runner::{execute, RunSummary};

/// `key=v1,v2,...`. Besides the config keys, `resolution` sets both
/// `scenario.nx` and `scenario.nv`.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepAxis {
    pub key: String,
    pub values: Vec<String>,
}

impl std::str::FromStr for SweepAxis {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        let Some((key, values)) = s.split_once('=') else {
            bail!("expected key=v1,v2,... in '{s}'");
        };
        let key = key.trim().to_string();
        if key != "resolution" && !KEYS.iter().any(|(k, _)| *k == key) {
            bail!("unknown sweep key '{key}'");
        }
        let values: Vec<String> = values.split(',').map(|v| v.trim().to_string()).filter(|v| !v.is_empty()).collect();
        if values.is_empty() {
            bail!("sweep key '{key}' has no values");
        }
        Ok(Self { key, values })
    }
}

fn axis_entries(key: &str, value: &str) -> Vec<Entry> {
    if key == "resolution" {
        vec![Entry::flag("scenario.nx", value), Entry::flag("scenario.nv", value)]
    } else {
        vec![Entry::flag(key, value)]
    }
}

/// Resolved configurations of every combination, the last axis varying fastest.
/// Run `i` writes to `<root>/run_<i>`.
pub fn expand(base: &[Entry], axes: &[SweepAxis], root: &Path) -> Result<Vec<RunConfig>> {
    let total: usize = axes.iter().map(|a| a.values.len()).product();
    let width = total.saturating_sub(1).to_string().len().max(3);
    (0..total)
        .map(|idx| {
            let mut entries = base.to_vec();
            let mut rem = idx;
            let mut picks = vec![0; axes.len()];
            for (a, axis) in axes.iter().enumerate().rev() {
                picks[a] = rem % axis.values.len();
                rem /= axis.values.len();
            }
            for (axis, &i) in axes.iter().zip(&picks) {
                entries.extend(axis_entries(&axis.key, &axis.values[i]));
            }
            let dir = root.join(format!("run_{idx:0width$}"));
            entries.push(Entry::flag("output.dir", dir.display()));
            resolve(&entries).with_context(|| format!("sweep combination {idx}"))
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct SweepRow {
    pub config: RunConfig,
    pub outcome: Result<RunSummary, String>,
}

pub const SUMMARY_HEADER: &str = "resolution,n_steps,epsilon,eps_m,eps_p,eps_h,eps_f,status,dir";

impl SweepRow {
    pub fn csv(&self) -> String {
        let p = &self.config.scenario;
        let head = format!("{}x{},{},{:e}", p.nx, p.nv, p.n_steps, self.config.tolerances.epsilon);
        let dir = self.config.out_dir.display();
        match &self.outcome {
            Ok(s) if s.succeeded() => {
                let e = s.errors;
                let cell = |v: Option<f64>| v.map_or("n/a".to_string(), |v| format!("{v:e}"));
                format!(
                    "{head},{},{},{},{},ok,{dir}",
                    cell(e.map(|e| e.eps_m)),
                    cell(e.map(|e| e.eps_p)),
                    cell(e.map(|e| e.eps_h)),
                    cell(e.and_then(|e| e.eps_f)),
                )
            }
            _ => format!("{head},n.c.,n.c.,n.c.,n.c.,n.c.,{dir}"),
        }
    }
}

/// Runs every configuration on a pool of `jobs` threads and writes
/// `<root>/sweep_summary.csv`. Rows keep the order of `configs`.
pub fn run_sweep(configs: &[RunConfig], root: &Path, jobs: usize) -> Result<Vec<SweepRow>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .context("building the sweep thread pool")?;
    let rows: Vec<SweepRow> = pool.install(|| {
        configs
            .par_iter()
            .map(|cfg| {
                let outcome = execute(cfg).map_err(|e| {
                    error!("run in {} failed: {e:#}", cfg.out_dir.display());
                    format!("{e:#}")
                });
                SweepRow {
                    config: cfg.clone(),
                    outcome,
                }
            })
            .collect()
    });
    write_atomic(&root.join("sweep_summary.csv"), |w| {
        writeln!(w, "{SUMMARY_HEADER}")?;
        for row in &rows {
            writeln!(w, "{}", row.csv())?;
        }
        Ok(())
    })?;
    Ok(rows)
}
