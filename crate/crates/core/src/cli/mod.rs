//! Command-line front end: scenario configs, runs, CSV/JSON output and manifests.

mod output;
mod run;

use crate::error::Error;
use crate::kernel::BandEdgeModel;
use crate::noise::FrequencyGrid;
use crate::quantum::T0Policy;
use crate::series::Grid;
use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::{Path, PathBuf};

pub use output::{CsvTable, RunOutput};

#[derive(Debug, Parser)]
#[command(name = "bandedge", version, about = "Superradiance near a photonic band edge")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// TOML scenario file; flags override its values
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// master seed for every random stream
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// output directory
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// worker threads (results do not depend on this)
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// repeat time-stepped runs at dtau/2 and report the difference
    #[arg(long, global = true)]
    pub convergence_check: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// memory kernel G(Δτ) on a lag grid
    Kernel,
    /// low-excitation amplitude, population and Mandel Q
    Osc,
    /// low-excitation emission spectrum
    Spectrum,
    /// mean-field inversion and polarization
    Meanfield,
    /// search for the transparent detuning
    Transparent,
    /// quantum-initiated ensembles of mean-field trajectories
    Ensemble,
    /// colored-noise paths and their autocorrelation
    Noise,
    /// noise-driven superradiance ensembles
    Stochastic,
    /// discrete-mode oracle against the kernel-based solvers
    OracleCompare {
        #[arg(long, value_enum)]
        case: Option<OracleCase>,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Kernel => "kernel",
            Command::Osc => "osc",
            Command::Spectrum => "spectrum",
            Command::Meanfield => "meanfield",
            Command::Transparent => "transparent",
            Command::Ensemble => "ensemble",
            Command::Noise => "noise",
            Command::Stochastic => "stochastic",
            Command::OracleCompare { .. } => "oracle-compare",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleCase {
    Lowexc,
    Meanfield,
    Growth,
}

/// Scenario file. Every key is optional; unknown keys are rejected.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub command: Option<String>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub model: Option<BandEdgeModel>,
    pub deltas: Option<Vec<f64>>,
    pub grid: Option<Grid>,
    pub kernel: Option<KernelSection>,
    pub osc: Option<OscSection>,
    pub spectrum: Option<SpectrumSection>,
    pub meanfield: Option<MeanfieldSection>,
    pub transparent: Option<TransparentSection>,
    pub ensemble: Option<EnsembleSection>,
    pub noise: Option<NoiseSection>,
    pub stochastic: Option<StochasticSection>,
    pub oracle: Option<OracleSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelSection {
    pub lags: Option<Vec<f64>>,
    pub lag_min: f64,
    pub lag_max: f64,
    pub n_lags: usize,
}

impl Default for KernelSection {
    fn default() -> Self {
        KernelSection { lags: None, lag_min: 0.01, lag_max: 100.0, n_lags: 201 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OscSection {
    /// initial Mandel parameters
    pub q0: Vec<f64>,
}

impl Default for OscSection {
    fn default() -> Self {
        OscSection { q0: vec![0.0, 1.0, 2.0] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectrumSection {
    pub omega_min: f64,
    pub omega_max: f64,
    pub n_omega: usize,
}

impl Default for SpectrumSection {
    fn default() -> Self {
        SpectrumSection { omega_min: -2.0, omega_max: 6.0, n_omega: 801 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeanfieldSection {
    pub r: f64,
    pub phase0: f64,
    /// standard deviation of the per-step Stark shift
    pub dephasing_sigma: Option<f64>,
    pub dephasing_runs: usize,
    pub steady_window: f64,
}

impl Default for MeanfieldSection {
    fn default() -> Self {
        MeanfieldSection { r: 1e-5, phase0: 0.0, dephasing_sigma: None, dephasing_runs: 1, steady_window: 10.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TransparentSection {
    pub r: f64,
    pub lo: f64,
    pub hi: f64,
    pub window: f64,
    pub tol: f64,
}

impl Default for TransparentSection {
    fn default() -> Self {
        let d = crate::meanfield::TransparentSearch::default();
        TransparentSection { r: d.r, lo: d.lo, hi: d.hi, window: d.window, tol: d.tol }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnsembleSection {
    pub n_atoms: u64,
    pub n_realizations: usize,
    /// one or both start-time policies
    pub t0_policies: Vec<T0Policy>,
    pub snapshot_times: Vec<f64>,
    pub histogram_bins: usize,
    pub steady_window: f64,
}

impl Default for EnsembleSection {
    fn default() -> Self {
        EnsembleSection {
            n_atoms: 100,
            n_realizations: 2000,
            t0_policies: vec![T0Policy::AtCrossover],
            snapshot_times: Vec::new(),
            histogram_bins: 40,
            steady_window: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSection {
    pub alpha: u32,
    pub n_terms: usize,
    pub omega_max: f64,
    pub frequency_grid: FrequencyGrid,
    pub strata: u64,
    pub n_paths: usize,
    pub lag_min: f64,
    pub lag_max: f64,
    pub n_lags: usize,
    /// length of the base-time window averaged over
    pub base_span: f64,
    /// number of raw paths written out
    pub export_paths: usize,
    pub export_span: f64,
}

impl Default for NoiseSection {
    fn default() -> Self {
        let d = crate::noise::NoiseSpec::new(1, 1000, 0);
        NoiseSection {
            alpha: 1,
            n_terms: d.n_terms,
            omega_max: d.omega_max,
            frequency_grid: d.grid,
            strata: d.strata,
            n_paths: 2000,
            lag_min: 0.1,
            lag_max: 5.0,
            n_lags: 50,
            base_span: 1300.0,
            export_paths: 3,
            export_span: 10.0,
        }
    }
}

impl NoiseSection {
    pub fn spec(&self, seed: u64) -> crate::noise::NoiseSpec {
        crate::noise::NoiseSpec {
            alpha: self.alpha,
            n_terms: self.n_terms,
            omega_max: self.omega_max,
            seed,
            grid: self.frequency_grid,
            strata: self.strata,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StochasticSection {
    pub n_atoms: Vec<u64>,
    pub n_paths: usize,
    pub noise: NoiseSection,
    /// also run the quantum-initiated ensemble for comparison
    pub compare_ensemble: bool,
}

impl Default for StochasticSection {
    fn default() -> Self {
        // the evenly spaced generator, whose lowest frequency is Δω
        let noise = NoiseSection {
            frequency_grid: FrequencyGrid::Uniform,
            omega_max: 2.0 * std::f64::consts::PI * 100.0,
            ..NoiseSection::default()
        };
        StochasticSection { n_atoms: vec![1000], n_paths: 2000, noise, compare_ensemble: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleSection {
    pub case: OracleCase,
    pub n_modes: usize,
    pub window: f64,
    pub tau_max: f64,
    pub sample_dt: f64,
    pub r: f64,
}

impl Default for OracleSection {
    fn default() -> Self {
        OracleSection { case: OracleCase::Lowexc, n_modes: 2000, window: 200.0, tau_max: 20.0, sample_dt: 0.1, r: 1e-5 }
    }
}

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Numeric(Error),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numeric(_) => 3,
            CliError::Io(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Numeric(e) => write!(f, "{e}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Input(m) | Error::Domain(m) => CliError::Config(m),
            other => CliError::Numeric(other),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

/// Parse a scenario file, reporting the offending line and key on failure.
pub fn load_config(path: &Path) -> Result<ScenarioConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    parse_config(&text).map_err(|m| CliError::Config(format!("{}: {m}", path.display())))
}

pub fn parse_config(text: &str) -> Result<ScenarioConfig, String> {
    toml::from_str::<ScenarioConfig>(text).map_err(|e| {
        let line = e.span().map(|s| text[..s.start].matches('\n').count() + 1);
        match line {
            Some(l) => format!("line {l}: {}", e.message()),
            None => e.message().to_string(),
        }
    })
}

/// Resolved settings for one invocation.
#[derive(Debug, Clone)]
pub struct Invocation {
    pub command: Command,
    pub config: ScenarioConfig,
    pub seed: u64,
    pub out: PathBuf,
    pub workers: Option<usize>,
    pub convergence_check: bool,
}

pub fn resolve(cli: Cli) -> Result<Invocation, CliError> {
    let mut config = match &cli.config {
        Some(p) => load_config(p)?,
        None => ScenarioConfig::default(),
    };
    if let Some(c) = &config.command {
        if c != cli.command.name() {
            return Err(CliError::Config(format!(
                "config is for command `{c}` but `{}` was requested",
                cli.command.name()
            )));
        }
    }
    if let Command::OracleCompare { case: Some(case) } = cli.command {
        config.oracle.get_or_insert_with(OracleSection::default).case = case;
    }
    if let Some(w) = cli.workers {
        if w == 0 {
            return Err(CliError::Config("--workers must be at least 1".into()));
        }
    }
    let seed = cli.seed.or(config.seed).unwrap_or(1);
    config.seed = Some(seed);
    let out = cli
        .out
        .clone()
        .or_else(|| config.out.clone())
        .unwrap_or_else(|| PathBuf::from("out").join(cli.command.name()));
    config.out = Some(out.clone());
    if let Some(m) = &config.model {
        m.validate()?;
    }
    Ok(Invocation {
        command: cli.command,
        config,
        seed,
        out,
        workers: cli.workers,
        convergence_check: cli.convergence_check,
    })
}

/// Entry point used by the binary; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match resolve(cli).and_then(|inv| execute(&inv)) {
        Ok(out) => {
            eprintln!("wrote {} files to {}", out.files.len(), out.dir.display());
            for w in &out.warnings {
                eprintln!("warning: {w}");
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Run an invocation and write its outputs.
pub fn execute(inv: &Invocation) -> Result<RunOutput, CliError> {
    let started = std::time::Instant::now();
    let pool = match inv.workers {
        Some(n) => rayon::ThreadPoolBuilder::new().num_threads(n).build(),
        None => rayon::ThreadPoolBuilder::new().build(),
    }
    .map_err(|e| CliError::Config(format!("cannot start worker pool: {e}")))?;
    let artifacts = pool.install(|| run::dispatch(inv))?;
    output::write_run(inv, artifacts, started.elapsed().as_secs_f64())
}
