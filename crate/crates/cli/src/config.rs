//! Flat `key=value` run configuration with `scenario.*`, `solver.*` and
//! `output.*` sections.

use std::collections::HashMap;
use std::fmt;
use std::path::PathBuf;

use vlasov_pgd::{ForceSign, ScenarioKind, ScenarioParams, SolverTolerances, Splitting, XDerivative};

/// Every accepted key with a one-line description, in echo order.
pub const KEYS: &[(&str, &str)] = &[
    ("scenario.name", "landau1d | two_stream | landau2d"),
    ("scenario.beta", "perturbation amplitude"),
    ("scenario.wavenumber", "perturbation wavenumber (k in 1D, omega in 2D)"),
    ("scenario.v0", "two-stream beam velocity"),
    ("scenario.x_length", "space domain [0, L] per axis (default derived from the wavenumber)"),
    ("scenario.v_max", "velocity domain [-v_max, v_max] per axis"),
    ("scenario.nx", "grid points per space axis"),
    ("scenario.nv", "grid points per velocity axis"),
    ("scenario.t_f", "final time"),
    ("scenario.n_steps", "number of time steps (exclusive with scenario.dt)"),
    ("scenario.dt", "time step (exclusive with scenario.n_steps)"),
    ("scenario.x_derivative", "centered | spectral"),
    ("solver.epsilon", "greedy stopping tolerance"),
    ("solver.eta", "ALS stagnation tolerance (default: epsilon)"),
    ("solver.max_rank", "cap on the rank of any greedy solve"),
    ("solver.max_als_iters", "cap on ALS iterations per rank-one solve"),
    ("solver.seed", "RNG seed for ALS initial guesses"),
    ("solver.force_sign", "physical | boxed"),
    ("solver.splitting", "symmetric | boxed"),
    ("solver.recompress", "POD after every substep (true | false)"),
    ("output.dir", "output directory"),
    ("output.snapshot_stride", "write a snapshot every N steps (0: final only)"),
    ("output.diagnostics_stride", "write every N-th diagnostics row"),
    ("output.reference", "directory of reference snapshots for the field error"),
    ("output.save_reference", "write a snapshot series usable as a reference (true | false)"),
];

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub scenario: ScenarioParams,
    pub tolerances: SolverTolerances,
    pub force_sign: ForceSign,
    pub splitting: Splitting,
    pub recompress: bool,
    pub out_dir: PathBuf,
    pub snapshot_stride: usize,
    pub diagnostics_stride: usize,
    pub reference: Option<PathBuf>,
    pub save_reference: bool,
}

/// One `key=value` assignment; `line` is `None` for command-line overrides.
#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub key: String,
    pub value: String,
    pub line: Option<usize>,
}

impl Entry {
    pub fn flag(key: &str, value: impl ToString) -> Self {
        Self {
            key: key.to_string(),
            value: value.to_string(),
            line: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub key: Option<String>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(line) = self.line {
            write!(f, "line {line}: ")?;
        }
        if let Some(key) = &self.key {
            write!(f, "{key}: ")?;
        }
        f.write_str(&self.message)
    }
}

impl std::error::Error for ConfigError {}

fn fail(entry: Option<&Entry>, message: impl Into<String>) -> ConfigError {
    ConfigError {
        line: entry.and_then(|e| e.line),
        key: entry.map(|e| e.key.clone()),
        message: message.into(),
    }
}

/// Splits config text into entries. `#` starts a comment line.
pub fn parse_text(text: &str) -> Result<Vec<Entry>, ConfigError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(ConfigError {
                line: Some(i + 1),
                key: None,
                message: format!("expected key=value, found '{line}'"),
            });
        };
        out.push(Entry {
            key: k.trim().to_string(),
            value: v.trim().to_string(),
            line: Some(i + 1),
        });
    }
    Ok(out)
}

fn parse<T: std::str::FromStr>(e: &Entry, what: &str) -> Result<T, ConfigError> {
    e.value
        .parse()
        .map_err(|_| fail(Some(e), format!("invalid {what} '{}'", e.value)))
}

fn parse_bool(e: &Entry) -> Result<bool, ConfigError> {
    match e.value.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(fail(Some(e), format!("invalid boolean '{}'", e.value))),
    }
}

/// Builds a configuration from assignments; later entries override earlier ones.
pub fn resolve(entries: &[Entry]) -> Result<RunConfig, ConfigError> {
    let mut latest: HashMap<&str, &Entry> = HashMap::new();
    for e in entries {
        if !KEYS.iter().any(|(k, _)| *k == e.key) {
            return Err(fail(Some(e), "unknown key"));
        }
        latest.insert(e.key.as_str(), e);
    }

    let kind = match latest.get("scenario.name") {
        Some(e) => e.value.parse::<ScenarioKind>().map_err(|err| fail(Some(e), err.to_string()))?,
        None => ScenarioKind::Landau1D,
    };
    let mut scenario = ScenarioParams::preset(kind);
    let mut tolerances = SolverTolerances::default();
    let mut cfg = RunConfig {
        scenario,
        tolerances,
        force_sign: ForceSign::default(),
        splitting: Splitting::default(),
        recompress: true,
        out_dir: PathBuf::from("out"),
        snapshot_stride: 0,
        diagnostics_stride: 1,
        reference: None,
        save_reference: false,
    };

    for (key, _) in KEYS {
        let Some(&e) = latest.get(key) else { continue };
        match *key {
            "scenario.name" => {}
            "scenario.beta" => scenario.beta = parse(e, "number")?,
            "scenario.wavenumber" => scenario.wavenumber = parse(e, "number")?,
            "scenario.v0" => scenario.v0 = parse(e, "number")?,
            "scenario.x_length" => scenario.x_length = parse(e, "number")?,
            "scenario.v_max" => scenario.v_max = parse(e, "number")?,
            "scenario.nx" => scenario.nx = parse(e, "integer")?,
            "scenario.nv" => scenario.nv = parse(e, "integer")?,
            "scenario.t_f" => scenario.t_f = parse(e, "number")?,
            "scenario.n_steps" => scenario.n_steps = parse(e, "integer")?,
            "scenario.dt" => {}
            "scenario.x_derivative" => {
                scenario.x_derivative = match e.value.to_ascii_lowercase().as_str() {
                    "centered" => XDerivative::Centered,
                    "spectral" => XDerivative::Spectral,
                    _ => return Err(fail(Some(e), "expected centered or spectral")),
                }
            }
            "solver.epsilon" => tolerances.epsilon = parse(e, "number")?,
            "solver.eta" => tolerances.eta = parse(e, "number")?,
            "solver.max_rank" => tolerances.max_rank = parse(e, "integer")?,
            "solver.max_als_iters" => tolerances.max_als_iters = parse(e, "integer")?,
            "solver.seed" => tolerances.seed = parse(e, "integer")?,
            "solver.force_sign" => {
                cfg.force_sign = match e.value.to_ascii_lowercase().as_str() {
                    "physical" => ForceSign::Physical,
                    "boxed" => ForceSign::Boxed,
                    _ => return Err(fail(Some(e), "expected physical or boxed")),
                }
            }
            "solver.splitting" => {
                cfg.splitting = match e.value.to_ascii_lowercase().as_str() {
                    "symmetric" => Splitting::Symmetric,
                    "boxed" => Splitting::Boxed,
                    _ => return Err(fail(Some(e), "expected symmetric or boxed")),
                }
            }
            "solver.recompress" => cfg.recompress = parse_bool(e)?,
            "output.dir" => cfg.out_dir = PathBuf::from(&e.value),
            "output.snapshot_stride" => cfg.snapshot_stride = parse(e, "integer")?,
            "output.diagnostics_stride" => cfg.diagnostics_stride = parse(e, "integer")?,
            "output.reference" => cfg.reference = (!e.value.is_empty()).then(|| PathBuf::from(&e.value)),
            "output.save_reference" => cfg.save_reference = parse_bool(e)?,
            _ => unreachable!("every key in KEYS is handled"),
        }
    }

    if !latest.contains_key("scenario.x_length") {
        scenario.x_length = kind.default_x_length(scenario.wavenumber);
    }
    if !latest.contains_key("solver.eta") {
        tolerances.eta = tolerances.epsilon;
    }
    match (latest.get("scenario.dt"), latest.get("scenario.n_steps")) {
        (Some(&dt), Some(_)) => {
            return Err(fail(Some(dt), "give exactly one of scenario.dt and scenario.n_steps"));
        }
        (Some(&e), None) => {
            let dt: f64 = parse(e, "number")?;
            if !(dt > 0.0) {
                return Err(fail(Some(e), "time step must be > 0"));
            }
            let n = (scenario.t_f / dt).round();
            if n < 1.0 || ((n * dt - scenario.t_f) / scenario.t_f).abs() > 1e-9 {
                return Err(fail(Some(e), format!("t_f = {} is not a multiple of dt", scenario.t_f)));
            }
            scenario.n_steps = n as usize;
        }
        _ => {}
    }
    if cfg.diagnostics_stride == 0 {
        return Err(fail(latest.get("output.diagnostics_stride").copied(), "stride must be >= 1"));
    }
    scenario.validate().map_err(|e| fail(None, e.to_string()))?;
    tolerances.validate().map_err(|e| fail(None, e.to_string()))?;
    if cfg.save_reference && cfg.snapshot_stride == 0 {
        cfg.snapshot_stride = (scenario.n_steps / 100).max(1);
    }
    cfg.scenario = scenario;
    cfg.tolerances = tolerances;
    Ok(cfg)
}

impl RunConfig {
    /// Fully resolved `key=value` lines; parsing them back yields `self`.
    pub fn echo(&self) -> String {
        let s = &self.scenario;
        let t = &self.tolerances;
        let lines = [
            format!("scenario.name={}", s.kind),
            format!("scenario.beta={:e}", s.beta),
            format!("scenario.wavenumber={:e}", s.wavenumber),
            format!("scenario.v0={:e}", s.v0),
            format!("scenario.x_length={:e}", s.x_length),
            format!("scenario.v_max={:e}", s.v_max),
            format!("scenario.nx={}", s.nx),
            format!("scenario.nv={}", s.nv),
            format!("scenario.t_f={:e}", s.t_f),
            format!("scenario.n_steps={}", s.n_steps),
            format!(
                "scenario.x_derivative={}",
                match s.x_derivative {
                    XDerivative::Centered => "centered",
                    XDerivative::Spectral => "spectral",
                }
            ),
            format!("solver.epsilon={:e}", t.epsilon),
            format!("solver.eta={:e}", t.eta),
            format!("solver.max_rank={}", t.max_rank),
            format!("solver.max_als_iters={}", t.max_als_iters),
            format!("solver.seed={}", t.seed),
            format!(
                "solver.force_sign={}",
                match self.force_sign {
                    ForceSign::Physical => "physical",
                    ForceSign::Boxed => "boxed",
                }
            ),
            format!(
                "solver.splitting={}",
                match self.splitting {
                    Splitting::Symmetric => "symmetric",
                    Splitting::Boxed => "boxed",
                }
            ),
            format!("solver.recompress={}", self.recompress),
            format!("output.dir={}", self.out_dir.display()),
            format!("output.snapshot_stride={}", self.snapshot_stride),
            format!("output.diagnostics_stride={}", self.diagnostics_stride),
            format!(
                "output.reference={}",
                self.reference.as_ref().map(|p| p.display().to_string()).unwrap_or_default()
            ),
            format!("output.save_reference={}", self.save_reference),
        ];
        lines.join("\n") + "\n"
    }
}

/// `--help` text listing every key.
pub fn keys_help() -> String {
    let mut out = String::from("Configuration keys (key=value, one per line, # comments):\n");
    for (k, d) in KEYS {
        out.push_str(&format!("  {k:<28} {d}\n"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(text: &str) -> Result<RunConfig, ConfigError> {
        resolve(&parse_text(text)?)
    }

    #[test]
    fn defaults_are_the_landau_preset() {
        let c = cfg("").unwrap();
        assert_eq!(c.scenario, ScenarioParams::preset(ScenarioKind::Landau1D));
        assert_eq!(c.tolerances.eta, c.tolerances.epsilon);
    }

    #[test]
    fn echo_round_trips() {
        let c = cfg("scenario.name=two_stream\nscenario.nx=16\nsolver.epsilon=1e-12\noutput.reference=ref dir\n").unwrap();
        let back = cfg(&c.echo()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn dt_is_converted_to_steps() {
        let c = cfg("scenario.t_f=1\nscenario.dt=0.01\n").unwrap();
        assert_eq!(c.scenario.n_steps, 100);
        assert!(cfg("scenario.t_f=1\nscenario.dt=0.3\n").is_err());
    }

    #[test]
    fn dt_and_steps_are_exclusive() {
        let err = cfg("scenario.dt=0.01\nscenario.n_steps=10\n").unwrap_err();
        assert_eq!(err.line, Some(1));
    }

    #[test]
    fn errors_name_key_and_line() {
        let err = cfg("# comment\nsolver.epsilon=abc\n").unwrap_err();
        assert_eq!(err.line, Some(2));
        assert_eq!(err.key.as_deref(), Some("solver.epsilon"));
        let err = cfg("scenario.nx=8\nsolver.bogus=1\n").unwrap_err();
        assert!(err.to_string().contains("line 2: solver.bogus"), "{err}");
        assert!(cfg("no equals sign\n").is_err());
    }

    #[test]
    fn wavenumber_sets_the_default_domain() {
        let c = cfg("scenario.name=two_stream\nscenario.wavenumber=0.25\n").unwrap();
        assert!((c.scenario.x_length - 40.0 * std::f64::consts::PI).abs() < 1e-12);
    }

    #[test]
    fn flags_override_file_values() {
        let mut entries = parse_text("scenario.nx=16\n").unwrap();
        entries.push(Entry::flag("scenario.nx", 24));
        assert_eq!(resolve(&entries).unwrap().scenario.nx, 24);
    }

    #[test]
    fn every_key_is_documented() {
        let help = keys_help();
        assert!(KEYS.iter().all(|(k, _)| help.contains(k)));
    }
}
