use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use log::error;
use vlasov_pgd_cli::{execute, expand, keys_help, parse_text, resolve, run_sweep, Entry, SweepAxis};

#[derive(Parser)]
#[command(name = "vlasov-pgd", version, about = "Low-rank PGD solver for the Vlasov-Poisson system")]
#[command(after_long_help = keys_help())]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario.
    Run(RunArgs),
    /// Run the Cartesian product of parameter values and summarize the errors.
    Sweep(SweepArgs),
}

#[derive(Args, Clone)]
struct RunArgs {
    /// Configuration file of key=value lines (see --help for the keys).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Scenario preset: landau1d, two_stream or landau2d.
    #[arg(long)]
    scenario: Option<String>,
    /// Grid points per space axis.
    #[arg(long)]
    nx: Option<usize>,
    /// Grid points per velocity axis.
    #[arg(long)]
    nv: Option<usize>,
    /// Number of time steps.
    #[arg(long)]
    nt: Option<usize>,
    /// Final time.
    #[arg(long)]
    tf: Option<f64>,
    /// Greedy stopping tolerance.
    #[arg(long)]
    eps: Option<f64>,
    /// ALS stagnation tolerance.
    #[arg(long)]
    eta: Option<f64>,
    /// ALS random seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write a snapshot every N steps (0: final only).
    #[arg(long)]
    snapshot_stride: Option<usize>,
    /// Reference run directory for the field error.
    #[arg(long)]
    reference: Option<PathBuf>,
    /// Write a snapshot series usable as a reference by later runs.
    #[arg(long)]
    save_reference: bool,
    /// Concurrent runs in a sweep.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Validate the configuration, print it and exit without writing anything.
    #[arg(long)]
    dry_run: bool,
    /// Extra KEY=VALUE override, repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Swept parameter KEY=V1,V2,... (repeatable; `resolution` sets nx and nv).
    #[arg(long = "param", value_name = "KEY=V1,V2", required = true)]
    params: Vec<SweepAxis>,
}

impl RunArgs {
    fn entries(&self) -> Result<Vec<Entry>> {
        let mut entries = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                parse_text(&text).with_context(|| format!("in {}", path.display()))?
            }
            None => Vec::new(),
        };
        let mut flag = |key: &str, value: Option<String>| {
            if let Some(v) = value {
                entries.push(Entry::flag(key, v));
            }
        };
        flag("scenario.name", self.scenario.clone());
        flag("scenario.nx", self.nx.map(|v| v.to_string()));
        flag("scenario.nv", self.nv.map(|v| v.to_string()));
        flag("scenario.n_steps", self.nt.map(|v| v.to_string()));
        flag("scenario.t_f", self.tf.map(|v| format!("{v:e}")));
        flag("solver.epsilon", self.eps.map(|v| format!("{v:e}")));
        flag("solver.eta", self.eta.map(|v| format!("{v:e}")));
        flag("solver.seed", self.seed.map(|v| v.to_string()));
        flag("output.dir", self.out.as_ref().map(|p| p.display().to_string()));
        flag("output.snapshot_stride", self.snapshot_stride.map(|v| v.to_string()));
        flag("output.reference", self.reference.as_ref().map(|p| p.display().to_string()));
        flag("output.save_reference", self.save_reference.then(|| "true".to_string()));
        for kv in &self.set {
            let (k, v) = kv
                .split_once('=')
                .with_context(|| format!("--set expects KEY=VALUE, got '{kv}'"))?;
            entries.push(Entry::flag(k.trim(), v.trim()));
        }
        Ok(entries)
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match real_main() {
        Ok(code) => code,
        Err(e) => {
            error!("{e:#}");
            ExitCode::FAILURE
        }
    }
}

fn real_main() -> Result<ExitCode> {
    match Cli::parse().command {
        Command::Run(args) => {
            let cfg = resolve(&args.entries()?)?;
            if args.dry_run {
                print!("{}", cfg.echo());
                return Ok(ExitCode::SUCCESS);
            }
            let summary = execute(&cfg)?;
            Ok(if summary.succeeded() { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
        Command::Sweep(args) => {
            let mut base = args.run.entries()?;
            let root = args.run.out.clone().unwrap_or_else(|| PathBuf::from("sweep"));
            base.retain(|e| e.key != "output.dir");
            let configs = expand(&base, &args.params, &root)?;
            if args.run.dry_run {
                for cfg in &configs {
                    println!("{}", cfg.echo());
                }
                return Ok(ExitCode::SUCCESS);
            }
            let rows = run_sweep(&configs, &root, args.run.jobs)?;
            let failed = rows
                .iter()
                .filter(|r| !r.outcome.as_ref().is_ok_and(|s| s.succeeded()))
                .count();
            println!("{} runs, {failed} not converged; summary in {}", rows.len(), root.join("sweep_summary.csv").display());
            Ok(ExitCode::SUCCESS)
        }
    }
}
