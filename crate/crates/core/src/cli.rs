//! Command-line front end.
//!
//! Settings resolve as flag, then config file, then built-in default. Every
//! run writes a config snapshot that parses back to the same effective
//! configuration, a result CSV, and a JSON trace, all named
//! `<experiment>_<solver>_<seed>.<ext>` inside the output directory.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::fs;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use crate::experiments::{self, ExperimentError, NoiseModel, SyntheticSpec};
use crate::imaging::{self, ImagingError, InpaintTask};
use crate::linops::{LinearOperator, OperatorKind};
use crate::solvers::{SolverConfig, SolverError, SolverKind};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_SOLVER: i32 = 4;

#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    Validation(String),
    Io(String),
    Solver(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => EXIT_VALIDATION,
            CliError::Io(_) => EXIT_IO,
            CliError::Solver(_) => EXIT_SOLVER,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Validation(m) => write!(f, "invalid configuration: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
            CliError::Solver(m) => write!(f, "solver error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<SolverError> for CliError {
    fn from(e: SolverError) -> Self {
        match e {
            SolverError::InvalidConfig { .. } | SolverError::Dimension(_) => CliError::Validation(e.to_string()),
            other => CliError::Solver(other.to_string()),
        }
    }
}

impl From<ExperimentError> for CliError {
    fn from(e: ExperimentError) -> Self {
        match e {
            ExperimentError::Solver(s) => s.into(),
            ExperimentError::Linop(l) => CliError::Solver(l.to_string()),
            other => CliError::Validation(other.to_string()),
        }
    }
}

impl From<ImagingError> for CliError {
    fn from(e: ImagingError) -> Self {
        match e {
            ImagingError::Io(io) => CliError::Io(io.to_string()),
            ImagingError::Format { .. } => CliError::Io(e.to_string()),
            ImagingError::Solver(s) => s.into(),
            ImagingError::Experiment(x) => x.into(),
            ImagingError::Linop(l) => CliError::Solver(l.to_string()),
            other => CliError::Validation(other.to_string()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Phase,
    Grid,
    Inpaint,
    Separate,
    RobustCs,
}

impl Command {
    pub fn as_str(self) -> &'static str {
        match self {
            Command::Phase => "phase",
            Command::Grid => "grid",
            Command::Inpaint => "inpaint",
            Command::Separate => "separate",
            Command::RobustCs => "robust-cs",
        }
    }

    fn parse(s: &str) -> Result<Self, String> {
        match s {
            "phase" => Ok(Command::Phase),
            "grid" => Ok(Command::Grid),
            "inpaint" => Ok(Command::Inpaint),
            "separate" => Ok(Command::Separate),
            "robust-cs" | "robust_cs" => Ok(Command::RobustCs),
            other => Err(format!("unknown command `{other}` (expected phase, grid, inpaint, separate or robust-cs)")),
        }
    }
}

/// Synthetic instance family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Setup {
    /// DCT plus orthonormal Gaussian, both components sparse.
    Separation,
    /// Orthonormal Gaussian sensing with dense Cauchy noise.
    RobustCs,
}

impl Setup {
    pub fn as_str(self) -> &'static str {
        match self {
            Setup::Separation => "separation",
            Setup::RobustCs => "robust-cs",
        }
    }

    fn parse(s: &str) -> Result<Self, String> {
        match s {
            "separation" => Ok(Setup::Separation),
            "robust-cs" | "robust_cs" => Ok(Setup::RobustCs),
            other => Err(format!("unknown setup `{other}` (expected separation or robust-cs)")),
        }
    }
}

/// Effective settings of one run. Spec fields left `None` take the value
/// of the selected setup.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub solver: SolverKind,
    pub solver_config: SolverConfig,
    /// Empty means the fixed `mu` is used.
    pub mu_grid: Vec<f64>,
    pub setup: Option<Setup>,
    pub m: Option<usize>,
    pub n1: Option<usize>,
    pub n2: Option<usize>,
    pub a1: Option<OperatorKind>,
    pub a2: Option<OperatorKind>,
    pub noise: Option<NoiseModel>,
    pub k: Option<usize>,
    pub k_values: Option<Vec<usize>>,
    pub q1_values: Vec<f64>,
    pub q2_values: Vec<f64>,
    pub fraction: f64,
    pub joint: bool,
    pub input: Option<PathBuf>,
    pub trials: usize,
    pub seed: u64,
    pub out: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            command: Command::Phase,
            solver: SolverKind::Bcd,
            solver_config: SolverConfig::default(),
            mu_grid: Vec::new(),
            setup: None,
            m: None,
            n1: None,
            n2: None,
            a1: None,
            a2: None,
            noise: None,
            k: None,
            k_values: None,
            q1_values: vec![0.2, 0.5, 0.8],
            q2_values: vec![0.2, 0.5, 0.8],
            fraction: 0.3,
            joint: true,
            input: None,
            trials: experiments::DEFAULT_TRIALS,
            seed: 0,
            out: PathBuf::from("out"),
        }
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str, expected: &str) -> Result<T, String> {
    value.parse().map_err(|_| format!("invalid value `{value}` for `{key}`: expected {expected}"))
}

fn parse_list<T: std::str::FromStr>(key: &str, value: &str, expected: &str) -> Result<Vec<T>, String> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse_num(key, s, expected))
        .collect()
}

fn parse_optional_f64(key: &str, value: &str) -> Result<Option<f64>, String> {
    if value == "auto" {
        Ok(None)
    } else {
        parse_num(key, value, "a number or `auto`").map(Some)
    }
}

fn parse_bool(key: &str, value: &str) -> Result<bool, String> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(format!("invalid value `{value}` for `{key}`: expected true or false")),
    }
}

fn join<T: fmt::Display>(v: &[T]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

fn opt<T: fmt::Display>(v: Option<T>) -> String {
    v.map_or_else(|| "auto".to_string(), |x| x.to_string())
}

impl RunConfig {
    /// Sets one field from its textual form. Keys accept `-` or `_`.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        let key = key.trim().replace('-', "_");
        let value = value.trim();
        let c = &mut self.solver_config;
        let real = "a number";
        let count = "a non-negative integer";
        match key.as_str() {
            "command" => self.command = Command::parse(value)?,
            "solver" => self.solver = value.parse()?,
            "q1" => c.q1 = parse_num(&key, value, real)?,
            "q2" => c.q2 = parse_num(&key, value, real)?,
            "mu" => c.mu = parse_num(&key, value, real)?,
            "beta_target" => c.beta_target = parse_num(&key, value, real)?,
            "beta_start" => c.beta_start = parse_num(&key, value, real)?,
            "beta_decay" => c.beta_decay = parse_num(&key, value, real)?,
            "max_iters" => c.max_iters = parse_num(&key, value, count)?,
            "tol" => c.tol = parse_num(&key, value, real)?,
            "eta1" => c.eta1 = parse_optional_f64(&key, value)?,
            "eta2" => c.eta2 = parse_optional_f64(&key, value)?,
            "rho1" => c.rho1 = parse_optional_f64(&key, value)?,
            "rho2" => c.rho2 = parse_optional_f64(&key, value)?,
            "sadmm_rho" => c.sadmm_rho = parse_num(&key, value, real)?,
            "sadmm_c_factor" => c.sadmm_c_factor = parse_num(&key, value, real)?,
            "mu_grid" => {
                self.mu_grid = match value {
                    "default" => experiments::default_mu_grid(),
                    "none" | "" => Vec::new(),
                    v => parse_list(&key, v, "a comma-separated list of numbers")?,
                }
            }
            "setup" => self.setup = if value == "auto" { None } else { Some(Setup::parse(value)?) },
            "m" => self.m = Some(parse_num(&key, value, count)?),
            "n1" => self.n1 = Some(parse_num(&key, value, count)?),
            "n2" => self.n2 = Some(parse_num(&key, value, count)?),
            "a1" => self.a1 = Some(value.parse()?),
            "a2" => self.a2 = Some(value.parse()?),
            "noise" => {
                self.noise = Some(match value {
                    "none" => NoiseModel::None,
                    v => {
                        let (alpha, gamma) = v
                            .strip_prefix("sas:")
                            .and_then(|r| r.split_once(','))
                            .ok_or_else(|| format!("invalid value `{v}` for `noise`: expected none or sas:ALPHA,GAMMA"))?;
                        NoiseModel::Sas { alpha: parse_num(&key, alpha, real)?, gamma: parse_num(&key, gamma, real)? }
                    }
                })
            }
            "k" => self.k = Some(parse_num(&key, value, count)?),
            "k_values" => self.k_values = Some(parse_list(&key, value, "a comma-separated list of integers")?),
            "q1_values" => self.q1_values = parse_list(&key, value, "a comma-separated list of numbers")?,
            "q2_values" => self.q2_values = parse_list(&key, value, "a comma-separated list of numbers")?,
            "fraction" => self.fraction = parse_num(&key, value, real)?,
            "joint" => self.joint = parse_bool(&key, value)?,
            "input" => self.input = if value.is_empty() { None } else { Some(PathBuf::from(value)) },
            "trials" => self.trials = parse_num(&key, value, count)?,
            "seed" => self.seed = parse_num(&key, value, "an unsigned 64-bit integer")?,
            "out" => self.out = PathBuf::from(value),
            other => return Err(format!("unknown setting `{other}`")),
        }
        Ok(())
    }

    /// Applies a flat `key = value` file; `#` starts a comment.
    pub fn apply_file_text(&mut self, text: &str) -> Result<(), String> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) =
                line.split_once('=').ok_or_else(|| format!("line {}: expected `key = value`, got `{line}`", i + 1))?;
            self.set(key, value).map_err(|e| format!("line {}: {e}", i + 1))?;
        }
        Ok(())
    }

    pub fn effective_setup(&self) -> Setup {
        self.setup.unwrap_or(if self.command == Command::RobustCs { Setup::RobustCs } else { Setup::Separation })
    }

    /// The synthetic instance family with all overrides applied.
    pub fn spec(&self) -> SyntheticSpec {
        let (base, default_k) = match self.effective_setup() {
            Setup::Separation => (SyntheticSpec::separation(20, self.seed), 20),
            Setup::RobustCs => (SyntheticSpec::robust_cs(10, self.seed), 10),
        };
        SyntheticSpec {
            m: self.m.unwrap_or(base.m),
            n1: self.n1.unwrap_or(base.n1),
            n2: self.n2.unwrap_or(base.n2),
            sparsity_k: self.k.unwrap_or(default_k),
            a1_kind: self.a1.unwrap_or(base.a1_kind),
            a2_kind: self.a2.unwrap_or(base.a2_kind),
            noise: self.noise.unwrap_or(base.noise),
            seed: self.seed,
        }
    }

    pub fn effective_k_values(&self) -> Vec<usize> {
        self.k_values.clone().unwrap_or_else(|| (1..=10).map(|i| 5 * i).collect())
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.solver_config.validate()?;
        self.spec().validate()?;
        let bad = |m: String| Err(CliError::Validation(m));
        if self.trials == 0 {
            return bad("invalid `trials`: must be at least 1".into());
        }
        if self.mu_grid.iter().any(|&m| !(m > 0.0 && m.is_finite())) {
            return bad("invalid `mu_grid`: values must be positive".into());
        }
        for (field, qs) in [("q1_values", &self.q1_values), ("q2_values", &self.q2_values)] {
            if qs.is_empty() {
                return bad(format!("invalid `{field}`: must not be empty"));
            }
            if let Some(q) = qs.iter().find(|q| !(0.0..=1.0).contains(*q)) {
                return bad(format!("invalid `{field}`: must lie in [0, 1], got {q}"));
            }
        }
        if !(0.0..=1.0).contains(&self.fraction) {
            return bad(format!("invalid `fraction`: must lie in [0, 1], got {}", self.fraction));
        }
        if let Some(k) = self.k_values.as_ref().and_then(|ks| ks.iter().find(|&&k| k > self.spec().n1)) {
            return bad(format!("invalid `k_values`: K = {k} exceeds n1"));
        }
        if self.command == Command::Inpaint && self.input.is_none() {
            return bad("invalid `input`: inpaint needs an input raster file".into());
        }
        if self.command == Command::Separate && self.spec().sparsity_k == 0 {
            return bad("invalid `k`: separate needs a nonzero signal".into());
        }
        Ok(())
    }

    /// `key = value` lines that parse back to this configuration.
    pub fn snapshot(&self) -> String {
        let c = &self.solver_config;
        let spec = self.spec();
        let noise = match spec.noise {
            NoiseModel::None => "none".to_string(),
            NoiseModel::Sas { alpha, gamma } => format!("sas:{alpha},{gamma}"),
        };
        let entries: Vec<(&str, String)> = vec![
            ("command", self.command.as_str().into()),
            ("solver", self.solver.as_str().into()),
            ("q1", c.q1.to_string()),
            ("q2", c.q2.to_string()),
            ("mu", c.mu.to_string()),
            ("mu_grid", if self.mu_grid.is_empty() { "none".into() } else { join(&self.mu_grid) }),
            ("beta_target", c.beta_target.to_string()),
            ("beta_start", c.beta_start.to_string()),
            ("beta_decay", c.beta_decay.to_string()),
            ("max_iters", c.max_iters.to_string()),
            ("tol", c.tol.to_string()),
            ("eta1", opt(c.eta1)),
            ("eta2", opt(c.eta2)),
            ("rho1", opt(c.rho1)),
            ("rho2", opt(c.rho2)),
            ("sadmm_rho", c.sadmm_rho.to_string()),
            ("sadmm_c_factor", c.sadmm_c_factor.to_string()),
            ("setup", self.effective_setup().as_str().into()),
            ("m", spec.m.to_string()),
            ("n1", spec.n1.to_string()),
            ("n2", spec.n2.to_string()),
            ("a1", spec.a1_kind.to_string()),
            ("a2", spec.a2_kind.to_string()),
            ("noise", noise),
            ("k", spec.sparsity_k.to_string()),
            ("k_values", join(&self.effective_k_values())),
            ("q1_values", join(&self.q1_values)),
            ("q2_values", join(&self.q2_values)),
            ("fraction", self.fraction.to_string()),
            ("joint", self.joint.to_string()),
            ("input", self.input.as_ref().map_or_else(String::new, |p| p.display().to_string())),
            ("trials", self.trials.to_string()),
            ("seed", self.seed.to_string()),
            ("out", self.out.display().to_string()),
        ];
        let mut s = String::from("# lqdemix effective configuration\n");
        for (k, v) in entries {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }

    /// `<experiment>_<solver>_<seed>`.
    pub fn stem(&self) -> String {
        format!("{}_{}_{}", self.command.as_str(), self.solver.as_str(), self.seed)
    }
}

#[derive(Debug, Parser)]
#[command(name = "lqdemix", version, about = "Sparse demixing with lq-lq penalties")]
struct Cli {
    #[command(subcommand)]
    command: Option<Sub>,
    #[command(flatten)]
    flags: Flags,
}

#[derive(Debug, Subcommand)]
enum Sub {
    /// Success rate versus sparsity.
    Phase,
    /// Recovery quality over a (q1, q2) grid.
    Grid,
    /// Remove salt-and-pepper noise from a P5/P6 image.
    Inpaint,
    /// Solve one synthetic instance and print the RelErr.
    Separate,
    /// (q1, q2) grid under impulsive measurement noise.
    RobustCs,
}

#[derive(Debug, Args)]
struct Flags {
    /// Flat `key = value` settings file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// bcd, admm, mt-bcd, mt-admm or sadmm.
    #[arg(long, global = true)]
    solver: Option<String>,
    #[arg(long, global = true)]
    q1: Option<String>,
    #[arg(long, global = true)]
    q2: Option<String>,
    #[arg(long, global = true)]
    mu: Option<String>,
    /// Comma-separated μ candidates, `default` or `none`.
    #[arg(long, global = true)]
    mu_grid: Option<String>,
    #[arg(long, global = true)]
    beta_target: Option<String>,
    #[arg(long, global = true)]
    beta_start: Option<String>,
    #[arg(long, global = true)]
    max_iters: Option<String>,
    #[arg(long, global = true)]
    tol: Option<String>,
    #[arg(long, global = true)]
    trials: Option<String>,
    #[arg(long, global = true)]
    seed: Option<String>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<String>,
    /// separation or robust-cs.
    #[arg(long, global = true)]
    setup: Option<String>,
    #[arg(long, global = true)]
    k: Option<String>,
    #[arg(long, global = true)]
    k_values: Option<String>,
    #[arg(long, global = true)]
    q1_values: Option<String>,
    #[arg(long, global = true)]
    q2_values: Option<String>,
    #[arg(long, global = true)]
    m: Option<String>,
    #[arg(long, global = true)]
    n1: Option<String>,
    #[arg(long, global = true)]
    n2: Option<String>,
    #[arg(long, global = true)]
    a1: Option<String>,
    #[arg(long, global = true)]
    a2: Option<String>,
    /// `none` or `sas:ALPHA,GAMMA`.
    #[arg(long, global = true)]
    noise: Option<String>,
    /// Corrupted pixel fraction for inpaint.
    #[arg(long, global = true)]
    fraction: Option<String>,
    #[arg(long, global = true)]
    joint: Option<String>,
    /// Input raster for inpaint.
    #[arg(long, global = true)]
    input: Option<String>,
}

impl Flags {
    fn entries(&self) -> Vec<(&'static str, &String)> {
        let all: [(&'static str, &Option<String>); 26] = [
            ("solver", &self.solver),
            ("q1", &self.q1),
            ("q2", &self.q2),
            ("mu", &self.mu),
            ("mu_grid", &self.mu_grid),
            ("beta_target", &self.beta_target),
            ("beta_start", &self.beta_start),
            ("max_iters", &self.max_iters),
            ("tol", &self.tol),
            ("trials", &self.trials),
            ("seed", &self.seed),
            ("out", &self.out),
            ("setup", &self.setup),
            ("k", &self.k),
            ("k_values", &self.k_values),
            ("q1_values", &self.q1_values),
            ("q2_values", &self.q2_values),
            ("m", &self.m),
            ("n1", &self.n1),
            ("n2", &self.n2),
            ("a1", &self.a1),
            ("a2", &self.a2),
            ("noise", &self.noise),
            ("fraction", &self.fraction),
            ("joint", &self.joint),
            ("input", &self.input),
        ];
        all.into_iter().filter_map(|(k, v)| v.as_ref().map(|v| (k, v))).collect()
    }
}

/// Outcome of argument parsing: a configuration, or text to print
/// (help or version) with exit status 0.
#[derive(Debug)]
pub enum Parsed {
    Run(Box<RunConfig>),
    Print(String),
}

/// Builds the effective configuration: flags over file over defaults.
pub fn parse_config<I, T>(args: I) -> Result<Parsed, CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => Ok(Parsed::Print(e.to_string())),
                _ => Err(CliError::Validation(e.to_string())),
            };
        }
    };
    let mut cfg = RunConfig::default();
    if let Some(path) = &cli.flags.config {
        let text = fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        cfg.apply_file_text(&text).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
    }
    if let Some(sub) = &cli.command {
        cfg.command = match sub {
            Sub::Phase => Command::Phase,
            Sub::Grid => Command::Grid,
            Sub::Inpaint => Command::Inpaint,
            Sub::Separate => Command::Separate,
            Sub::RobustCs => Command::RobustCs,
        };
    }
    for (key, value) in cli.flags.entries() {
        cfg.set(key, value).map_err(CliError::Validation)?;
    }
    Ok(Parsed::Run(Box::new(cfg)))
}

/// Files written by a run plus a one-line summary for the terminal.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub files: Vec<PathBuf>,
    pub summary: String,
}

struct Writer {
    dir: PathBuf,
    stem: String,
    files: Vec<PathBuf>,
}

impl Writer {
    fn put(&mut self, suffix: &str, bytes: impl AsRef<[u8]>) -> Result<(), CliError> {
        let path = self.dir.join(format!("{}{suffix}", self.stem));
        fs::write(&path, bytes).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        self.files.push(path);
        Ok(())
    }
}

fn pretty(v: &serde_json::Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

/// Executes a validated configuration and writes its artifacts.
pub fn run(cfg: &RunConfig) -> Result<RunOutput, CliError> {
    cfg.validate()?;
    fs::create_dir_all(&cfg.out).map_err(|e| CliError::Io(format!("{}: {e}", cfg.out.display())))?;
    let mut w = Writer { dir: cfg.out.clone(), stem: cfg.stem(), files: Vec::new() };
    w.put(".config", cfg.snapshot())?;
    let summary = match cfg.command {
        Command::Phase => run_phase(cfg, &mut w)?,
        Command::Grid | Command::RobustCs => run_grid(cfg, &mut w)?,
        Command::Separate => run_separate(cfg, &mut w)?,
        Command::Inpaint => run_inpaint(cfg, &mut w)?,
    };
    Ok(RunOutput { files: w.files, summary })
}

fn run_phase(cfg: &RunConfig, w: &mut Writer) -> Result<String, CliError> {
    let ks = cfg.effective_k_values();
    let r = experiments::run_phase_transition(&cfg.spec(), cfg.solver, &cfg.solver_config, &ks, cfg.trials, &cfg.mu_grid)?;
    w.put(".csv", r.to_csv())?;
    w.put("_rates.csv", r.rates_csv())?;
    let failures: Vec<_> = r.outcomes.iter().filter(|o| o.error.is_some()).map(|o| json!({"k": o.k, "trial": o.trial, "error": o.error})).collect();
    w.put(
        ".trace.json",
        pretty(&json!({
            "solver": cfg.solver.as_str(),
            "k_values": ks,
            "trials": cfg.trials,
            "success_rate": r.success_rate,
            "mean_iterations": r.outcomes.iter().map(|o| o.iterations as f64).sum::<f64>() / r.outcomes.len() as f64,
            "converged": r.outcomes.iter().filter(|o| o.converged).count(),
            "failures": failures,
        })),
    )?;
    let rates: Vec<String> = ks.iter().zip(&r.success_rate).map(|(k, s)| format!("K={k}:{s}")).collect();
    Ok(format!("success rate {}", rates.join(" ")))
}

fn run_grid(cfg: &RunConfig, w: &mut Writer) -> Result<String, CliError> {
    let r = experiments::run_q_grid(
        &cfg.spec(),
        cfg.solver,
        &cfg.solver_config,
        &cfg.q1_values,
        &cfg.q2_values,
        cfg.trials,
        &cfg.mu_grid,
    )?;
    w.put(".csv", r.to_csv())?;
    w.put(
        ".trace.json",
        pretty(&json!({
            "solver": cfg.solver.as_str(),
            "q1_values": r.q1_values,
            "q2_values": r.q2_values,
            "mean_relerr_db": r.mean_relerr_db,
            "success_rate": r.success_rate,
            "chosen_mu": r.chosen_mu,
            "trials_per_cell": r.trials_per_cell,
        })),
    )?;
    let (q1, q2, db) = r.best_cell();
    Ok(format!("best cell q1={q1} q2={q2} mean RelErr {db:.2} dB"))
}

fn run_separate(cfg: &RunConfig, w: &mut Writer) -> Result<String, CliError> {
    let spec = cfg.spec();
    let seed = experiments::trial_seed(cfg.seed, spec.sparsity_k, 0);
    let inst = experiments::generate_instance(&spec, seed)?;
    let r = experiments::solve_with_protocol(cfg.solver, &inst.problem, &cfg.solver_config)?;
    let rel1 = experiments::relerr(&r.x1_vector(), &inst.x1)?;
    let rel2 = experiments::relerr(&r.x2_vector(), &inst.x2).unwrap_or(f64::NAN);
    w.put(
        ".csv",
        format!(
            "k,seed,relerr_x1,relerr_x2,success,iterations,converged\n{},{seed},{rel1:e},{rel2:e},{},{},{}\n",
            spec.sparsity_k,
            (rel1 <= experiments::SUCCESS_RELERR) as u8,
            r.iterations,
            r.converged as u8
        ),
    )?;
    w.put(".trace.json", format!("{}\n", r.to_json()))?;
    Ok(format!("RelErr(x1) = {rel1:e} after {} iterations (converged: {})", r.iterations, r.converged))
}

fn run_inpaint(cfg: &RunConfig, w: &mut Writer) -> Result<String, CliError> {
    let path = cfg.input.as_ref().expect("validated");
    let reference = imaging::read_image(path)?;
    let (corrupted, mask) = imaging::salt_pepper_corrupt(&reference, cfg.fraction, cfg.seed)?;
    let c = &cfg.solver_config;
    let task = InpaintTask { corrupted: corrupted.clone(), q1: c.q1, q2: c.q2, mu: c.mu, joint: cfg.joint };
    let out = imaging::inpaint(&task, c, cfg.solver)?;
    let psnr_in = imaging::psnr_for_report(imaging::psnr(&corrupted, &reference)?);
    let psnr_out = imaging::psnr_for_report(imaging::psnr(&out.restored, &reference)?);
    let dct = LinearOperator::dct2d(reference.height(), reference.width()).map_err(|e| CliError::Solver(e.to_string()))?;
    let truth = dct.apply_columns(reference.pixels().view()).map_err(|e| CliError::Solver(e.to_string()))?;
    let rel = experiments::relerr(&out.coefficients, &truth)?;
    let ext = if reference.channels() == 1 { "pgm" } else { "ppm" };
    w.put(&format!("_corrupted.{ext}"), imaging::encode_pnm(&corrupted))?;
    w.put(&format!("_restored.{ext}"), imaging::encode_pnm(&out.restored))?;
    w.put(
        ".csv",
        format!(
            "width,height,channels,fraction,corrupted,psnr_corrupted,psnr_restored,relerr_coefficients\n{},{},{},{},{},{psnr_in},{psnr_out},{rel:e}\n",
            reference.width(),
            reference.height(),
            reference.channels(),
            cfg.fraction,
            mask.iter().filter(|&&m| m).count()
        ),
    )?;
    let traces: Vec<_> = out
        .results
        .iter()
        .map(|r| json!({"iterations": r.iterations, "converged": r.converged, "objective_trace": r.objective_trace, "residual_trace": r.residual_trace}))
        .collect();
    w.put(
        ".trace.json",
        pretty(&json!({
            "psnr_corrupted_db": psnr_in,
            "psnr_restored_db": psnr_out,
            "relerr_coefficients": rel,
            "seed": cfg.seed,
            "joint": cfg.joint,
            "solver": cfg.solver.as_str(),
            "config": c,
            "solves": traces,
        })),
    )?;
    Ok(format!("PSNR {psnr_in:.2} dB -> {psnr_out:.2} dB, coefficient RelErr {rel:e}"))
}

/// Parses, runs and reports; returns the process exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cfg = match parse_config(args) {
        Ok(Parsed::Run(cfg)) => cfg,
        Ok(Parsed::Print(text)) => {
            print!("{text}");
            return EXIT_OK;
        }
        Err(e) => {
            eprintln!("lqdemix: {e}");
            return e.exit_code();
        }
    };
    match run(&cfg) {
        Ok(out) => {
            println!("{}", out.summary);
            for f in out.files {
                println!("wrote {}", f.display());
            }
            EXIT_OK
        }
        Err(e) => {
            eprintln!("lqdemix: {e}");
            e.exit_code()
        }
    }
}

/// Parses a snapshot or config file into a map, for comparisons.
pub fn parse_snapshot(text: &str) -> BTreeMap<String, String> {
    text.lines()
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .filter_map(|l| l.split_once('='))
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .collect()
}
