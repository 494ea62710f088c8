//! Command-line flags, config files and their merge into a [`RunConfig`].

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use bccwalk::geometry::{DEFAULT_ARM_LENGTH, HBAR, NEUTRON_MASS, NEUTRON_MOMENTUM, SPEED_OF_LIGHT};
use bccwalk::scan::SIDEREAL_DAY;

use crate::error::CliError;

/// Environment variable naming the default output directory.
pub const OUTPUT_DIR_ENV: &str = "BCCWALK_OUTPUT_DIR";
/// Planck length, m; the default lattice spacing.
pub const PLANCK_LENGTH: f64 = 1.616e-35;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Check the algebraic and closed-form invariants
    Verify,
    /// Exact dispersion along a line through the origin of κ-space
    Dispersion,
    /// Evolve a Gaussian packet on the lattice
    WalkSim,
    /// Geometric factor of a layout at one orientation
    Gfactor,
    /// Geometric factor over a full orientation grid
    Scan,
    /// Locally maximize |g| from a starting orientation
    Optimize,
    /// Relative interferometer phase
    Phase,
    /// Phase time series under Earth rotation
    Sidereal,
    /// Lattice-spacing bound from a phase sensitivity
    Bound,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Verify => "verify",
            Command::Dispersion => "dispersion",
            Command::WalkSim => "walk-sim",
            Command::Gfactor => "gfactor",
            Command::Scan => "scan",
            Command::Optimize => "optimize",
            Command::Phase => "phase",
            Command::Sidereal => "sidereal",
            Command::Bound => "bound",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum TableFormat {
    /// Tables go to CSV files next to the report
    Csv,
    /// Tables are embedded in the JSON report
    Json,
}

#[derive(Debug, Parser)]
#[command(name = "bccwalk", version, about = "Quantum walk on a BCC lattice and its interferometer signatures")]
#[command(after_help = "All angles are in radians. Vector flags take comma-separated components, e.g. --orientation 0,1.2,0.")]
pub struct Cli {
    #[command(subcommand)]
    pub command: CliCommand,
}

#[derive(Debug, Subcommand)]
pub enum CliCommand {
    /// Check the algebraic and closed-form invariants
    Verify(Flags),
    /// Exact dispersion along a line through the origin of κ-space
    Dispersion(Flags),
    /// Evolve a Gaussian packet on the lattice
    WalkSim(Flags),
    /// Geometric factor of a layout at one orientation
    Gfactor(Flags),
    /// Geometric factor over a full orientation grid
    Scan(Flags),
    /// Locally maximize |g| from a starting orientation
    Optimize(Flags),
    /// Relative interferometer phase
    Phase(Flags),
    /// Phase time series under Earth rotation
    Sidereal(Flags),
    /// Lattice-spacing bound from a phase sensitivity
    Bound(Flags),
}

impl CliCommand {
    pub fn split(self) -> (Command, Flags) {
        match self {
            CliCommand::Verify(f) => (Command::Verify, f),
            CliCommand::Dispersion(f) => (Command::Dispersion, f),
            CliCommand::WalkSim(f) => (Command::WalkSim, f),
            CliCommand::Gfactor(f) => (Command::Gfactor, f),
            CliCommand::Scan(f) => (Command::Scan, f),
            CliCommand::Optimize(f) => (Command::Optimize, f),
            CliCommand::Phase(f) => (Command::Phase, f),
            CliCommand::Sidereal(f) => (Command::Sidereal, f),
            CliCommand::Bound(f) => (Command::Bound, f),
        }
    }
}

fn parse_vec3(s: &str) -> Result<[f64; 3], String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(format!("expected 3 comma-separated numbers, got {}", parts.len()));
    }
    let mut out = [0.0; 3];
    for (o, p) in out.iter_mut().zip(parts) {
        *o = p.parse().map_err(|e| format!("'{p}': {e}"))?;
    }
    Ok(out)
}

fn parse_grid(s: &str) -> Result<[usize; 3], String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let nums: Vec<usize> = parts
        .iter()
        .map(|p| p.parse().map_err(|e| format!("'{p}': {e}")))
        .collect::<Result<_, _>>()?;
    match nums.as_slice() {
        [n] => Ok([*n; 3]),
        [a, b, c] => Ok([*a, *b, *c]),
        _ => Err("expected one step count or three comma-separated counts".into()),
    }
}

/// Flags shared by every command. Unset flags fall back to the config file,
/// then to built-in defaults.
#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    /// TOML (or JSON, by extension) file with any of the fields below
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Particle mass, kg
    #[arg(long)]
    pub mass: Option<f64>,
    /// Momentum magnitude, kg·m/s
    #[arg(long)]
    pub momentum: Option<f64>,
    /// Speed of light, m/s
    #[arg(long = "c")]
    pub c: Option<f64>,
    /// Reduced Planck constant, J·s
    #[arg(long)]
    pub hbar: Option<f64>,
    /// Lattice spacing Δx, m
    #[arg(long)]
    pub dx: Option<f64>,
    /// Arm length L, m
    #[arg(long)]
    pub arm_length: Option<f64>,
    /// Builtin layout name (fig1, parallelogram) or path to a layout file
    #[arg(long)]
    pub layout: Option<String>,
    /// Euler angles θ1,θ2,θ3 in radians
    #[arg(long, value_parser = parse_vec3, allow_hyphen_values = true)]
    pub orientation: Option<[f64; 3]>,
    /// Orientation grid steps: N or N1,N2,N3
    #[arg(long, value_parser = parse_grid)]
    pub grid: Option<[usize; 3]>,
    /// Spin in the {v1,v2} basis: symmetric, up, down, or a_re,a_im,b_re,b_im
    #[arg(long, allow_hyphen_values = true)]
    pub spin: Option<String>,
    /// Output directory (default: $BCCWALK_OUTPUT_DIR, else the current directory)
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Where tabular outputs go
    #[arg(long, value_enum)]
    pub format: Option<TableFormat>,
    /// Worker threads for scans and series
    #[arg(long)]
    pub workers: Option<usize>,
    /// Phase sensitivity, rad
    #[arg(long)]
    pub sensitivity: Option<f64>,
    /// Assumed geometric factor
    #[arg(long, allow_hyphen_values = true)]
    pub g: Option<f64>,
    /// Earth rotation axis in the lattice frame
    #[arg(long, value_parser = parse_vec3, allow_hyphen_values = true)]
    pub axis: Option<[f64; 3]>,
    /// Series duration, s
    #[arg(long)]
    pub duration: Option<f64>,
    /// Series sample spacing, s
    #[arg(long)]
    pub dt: Option<f64>,
    /// Rotation period, s
    #[arg(long)]
    pub period: Option<f64>,
    /// Dimensionless momentum κ (dispersion direction and extent; packet centre)
    #[arg(long, value_parser = parse_vec3, allow_hyphen_values = true)]
    pub kappa: Option<[f64; 3]>,
    /// Dimensionless mass θ = mcΔx/ħ
    #[arg(long)]
    pub theta: Option<f64>,
    /// Lattice size N (power of two)
    #[arg(long)]
    pub grid_size: Option<usize>,
    /// Packet width σ, sites
    #[arg(long)]
    pub width: Option<f64>,
    /// Walk steps
    #[arg(long)]
    pub steps: Option<usize>,
    /// Dispersion branch 0..3 (ascending eigenphase) for packet projection
    #[arg(long)]
    pub branch: Option<usize>,
    /// Sample count of a dispersion sweep
    #[arg(long)]
    pub points: Option<usize>,
}

/// Config file contents; every field optional.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub command: Option<Command>,
    pub mass: Option<f64>,
    pub momentum: Option<f64>,
    pub c: Option<f64>,
    pub hbar: Option<f64>,
    pub dx: Option<f64>,
    pub arm_length: Option<f64>,
    pub layout: Option<String>,
    pub orientation: Option<[f64; 3]>,
    pub grid: Option<[usize; 3]>,
    pub spin: Option<String>,
    pub output: Option<PathBuf>,
    pub format: Option<TableFormat>,
    pub workers: Option<usize>,
    pub sensitivity: Option<f64>,
    pub g: Option<f64>,
    pub axis: Option<[f64; 3]>,
    pub duration: Option<f64>,
    pub dt: Option<f64>,
    pub period: Option<f64>,
    pub kappa: Option<[f64; 3]>,
    pub theta: Option<f64>,
    pub grid_size: Option<usize>,
    pub width: Option<f64>,
    pub steps: Option<usize>,
    pub branch: Option<usize>,
    pub points: Option<usize>,
}

/// Fully resolved run description; echoed verbatim in every report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: Command,
    pub mass: f64,
    pub momentum: f64,
    pub c: f64,
    pub hbar: f64,
    pub dx: f64,
    pub arm_length: f64,
    pub layout: String,
    pub orientation: [f64; 3],
    pub grid: [usize; 3],
    pub spin: String,
    pub output: PathBuf,
    pub format: TableFormat,
    pub workers: usize,
    pub sensitivity: f64,
    pub g: f64,
    pub axis: [f64; 3],
    pub duration: f64,
    pub dt: f64,
    pub period: f64,
    pub kappa: [f64; 3],
    pub theta: f64,
    pub grid_size: usize,
    pub width: f64,
    pub steps: usize,
    pub branch: usize,
    pub points: usize,
}

pub fn read_config_file(path: &Path) -> Result<FileConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read config file {}: {e}", path.display())))?;
    let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
    if is_json {
        serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    } else {
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

fn default_output() -> PathBuf {
    std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("."))
}

fn positive(name: &str, v: f64) -> Result<(), CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(CliError::Config(format!("field '{name}' = {v} must be positive and finite")))
    }
}

/// Merges flags over the config file over defaults and validates the result.
pub fn parse_config(command: Command, flags: Flags) -> Result<RunConfig, CliError> {
    let file = match &flags.config {
        Some(path) => read_config_file(path)?,
        None => FileConfig::default(),
    };
    if let Some(c) = file.command {
        if c != command {
            return Err(CliError::Config(format!(
                "config file is for command '{}', but '{}' was requested",
                c.name(),
                command.name()
            )));
        }
    }
    macro_rules! pick {
        ($field:ident, $default:expr) => {
            flags.$field.or(file.$field).unwrap_or_else(|| $default)
        };
    }
    let config = RunConfig {
        command,
        mass: pick!(mass, NEUTRON_MASS),
        momentum: pick!(momentum, NEUTRON_MOMENTUM),
        c: pick!(c, SPEED_OF_LIGHT),
        hbar: pick!(hbar, HBAR),
        dx: pick!(dx, PLANCK_LENGTH),
        arm_length: pick!(arm_length, DEFAULT_ARM_LENGTH),
        layout: pick!(layout, "fig1".to_string()),
        orientation: pick!(orientation, [0.0; 3]),
        grid: pick!(grid, [48; 3]),
        spin: pick!(spin, "symmetric".to_string()),
        output: pick!(output, default_output()),
        format: pick!(format, TableFormat::Csv),
        workers: pick!(workers, default_workers()),
        sensitivity: pick!(sensitivity, 1e-6),
        g: pick!(g, 0.1),
        axis: pick!(axis, [0.0, 0.0, 1.0]),
        duration: pick!(duration, 2.0 * SIDEREAL_DAY),
        dt: pick!(dt, SIDEREAL_DAY / 96.0),
        period: pick!(period, SIDEREAL_DAY),
        kappa: pick!(kappa, [0.2, 0.2, 0.0]),
        theta: pick!(theta, 0.2),
        grid_size: pick!(grid_size, 32),
        width: pick!(width, 3.0),
        steps: pick!(steps, 8),
        branch: pick!(branch, 3),
        points: pick!(points, 65),
    };
    validate(&config)?;
    Ok(config)
}

/// Checks the invariants of a resolved config, naming the offending field.
pub fn validate(config: &RunConfig) -> Result<(), CliError> {
    for (name, v) in [
        ("mass", config.mass),
        ("momentum", config.momentum),
        ("c", config.c),
        ("hbar", config.hbar),
        ("dx", config.dx),
        ("arm_length", config.arm_length),
        ("duration", config.duration),
        ("dt", config.dt),
        ("period", config.period),
        ("width", config.width),
    ] {
        positive(name, v)?;
    }
    if config.workers == 0 {
        return Err(CliError::Config("field 'workers' must be at least 1".into()));
    }
    if config.branch > 3 {
        return Err(CliError::Config(format!("field 'branch' = {} must be in 0..=3", config.branch)));
    }
    if config.points < 2 {
        return Err(CliError::Config("field 'points' must be at least 2".into()));
    }
    if !config.theta.is_finite() || config.theta < 0.0 {
        return Err(CliError::Config(format!("field 'theta' = {} must be ≥ 0", config.theta)));
    }
    if bccwalk::geometry::builtin_layout(&config.layout).is_none() && !Path::new(&config.layout).exists() {
        return Err(CliError::Config(format!(
            "field 'layout': '{}' is neither a builtin layout ({}) nor an existing file",
            config.layout,
            bccwalk::geometry::BUILTIN_LAYOUTS.join(", ")
        )));
    }
    crate::commands::parse_spin(&config.spin)?;
    Ok(())
}
