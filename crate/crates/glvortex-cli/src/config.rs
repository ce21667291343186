//! Run configuration: one record per command, every field defaulted, with a
//! canonical JSON form that round-trips exactly.

use clap::{Args, FromArgMatches, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use std::path::PathBuf;

pub const FORMAT_VERSION: u32 = 1;

/// Builds a record from the clap defaults, so defaults live in one place.
fn clap_default<T: Args + FromArgMatches>() -> T {
    let cmd = T::augment_args(clap::Command::new("defaults").no_binary_name(true));
    let m = cmd.try_get_matches_from(Vec::<String>::new()).expect("every flag has a default");
    T::from_arg_matches(&m).expect("every flag has a default")
}

macro_rules! clap_defaults {
    ($($t:ty),*) => {
        $(impl Default for $t {
            fn default() -> Self {
                clap_default()
            }
        })*
    };
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChartChoice {
    Catenoid,
    Cylinder,
    Plane,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Order {
    W0,
    W1,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FarFieldChoice {
    Dirichlet,
    Asymptotic,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProfileArgs {
    #[arg(long, default_value_t = 12.0, allow_negative_numbers = true)]
    pub rmax: f64,
    #[arg(long, default_value_t = 2000)]
    pub n: usize,
    #[arg(long, default_value_t = 1e-8, allow_negative_numbers = true)]
    pub tol: f64,
    #[arg(long, value_enum, default_value_t = FarFieldChoice::Dirichlet)]
    pub far_field: FarFieldChoice,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ResidualScanArgs {
    #[arg(long, value_enum, default_value_t = ChartChoice::Catenoid)]
    pub chart: ChartChoice,
    #[arg(long, value_delimiter = ',', default_value = "0.2,0.1,0.05", allow_hyphen_values = true)]
    pub eps: Vec<f64>,
    #[arg(long, value_enum, default_value_t = Order::W0)]
    pub order: Order,
    /// Tube constant δ in τ = δ log(1 + r).
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub delta: f64,
    /// Largest normal radius |t| sampled.
    #[arg(long, default_value_t = 1.5, allow_negative_numbers = true)]
    pub t_max: f64,
    /// Relative tolerance on each ratio; defaults to 0.25 (0.40 for w1 on the catenoid).
    #[arg(long, allow_negative_numbers = true)]
    pub band: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FieldDumpArgs {
    #[arg(long, value_enum, default_value_t = ChartChoice::Catenoid)]
    pub chart: ChartChoice,
    #[arg(long, default_value_t = 0.05, allow_negative_numbers = true)]
    pub eps: f64,
    #[arg(long, value_enum, default_value_t = Order::W0)]
    pub order: Order,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub delta: f64,
    /// Chart point ξ = (ξ¹, ξ²) of the normal plane.
    #[arg(long, value_delimiter = ',', default_value = "0.3,0.5", allow_hyphen_values = true)]
    pub xi: Vec<f64>,
    #[arg(long, default_value_t = 6.0, allow_negative_numbers = true)]
    pub t_max: f64,
    /// Points per side of the square normal-plane grid (odd, so t = 0 is a node).
    #[arg(long, default_value_t = 41)]
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinopSpectrumArgs {
    #[arg(long = "R", default_value_t = 12.0, allow_negative_numbers = true)]
    #[serde(rename = "R")]
    pub r_outer: f64,
    #[arg(long, default_value_t = 200)]
    pub n_rho: usize,
    #[arg(long, default_value_t = 16)]
    pub n_theta: usize,
    /// Number of low eigenvalues reported.
    #[arg(long, default_value_t = 6)]
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveLambdaArgs {
    #[arg(long = "R", default_value_t = 14.0, allow_negative_numbers = true)]
    #[serde(rename = "R")]
    pub r_outer: f64,
    #[arg(long, default_value_t = 200)]
    pub n_rho: usize,
    #[arg(long, default_value_t = 16)]
    pub n_theta: usize,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct JacobiSolveArgs {
    /// CSV with columns xi1,xi2,f1,f2 in chart-grid order; sech⁴ in slot 1 if absent.
    #[arg(long)]
    pub rhs: Option<PathBuf>,
    /// End coefficients λ₁,λ₂ of the log-growing part (must sum to zero).
    #[arg(long, value_delimiter = ',', default_value = "0,0", allow_hyphen_values = true)]
    pub lambda: Vec<f64>,
    #[arg(long, default_value_t = 8.0, allow_negative_numbers = true)]
    pub s_max: f64,
    #[arg(long, default_value_t = 161)]
    pub n_s: usize,
    #[arg(long, default_value_t = 32)]
    pub n_theta: usize,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SurfaceInfoArgs {
    #[arg(long, value_enum, default_value_t = ChartChoice::Catenoid)]
    pub chart: ChartChoice,
    /// Half extent of the first chart coordinate.
    #[arg(long, default_value_t = 8.0, allow_negative_numbers = true)]
    pub s_max: f64,
    #[arg(long, default_value_t = 161)]
    pub n_s: usize,
    #[arg(long, default_value_t = 32)]
    pub n_theta: usize,
    /// Cylinder radius.
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FermiCheckArgs {
    /// Normal-offset scales for the expansion fit.
    #[arg(long, value_delimiter = ',', default_value = "0.1,0.05,0.025", allow_hyphen_values = true)]
    pub scales: Vec<f64>,
    /// FD steps for the metric check (decreasing).
    #[arg(long, value_delimiter = ',', default_value = "0.004,0.002,0.001", allow_hyphen_values = true)]
    pub steps: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyAllArgs {
    /// Criteria to run (default: all).
    #[arg(long, value_delimiter = ',')]
    pub only: Vec<usize>,
}

clap_defaults!(
    ProfileArgs,
    ResidualScanArgs,
    FieldDumpArgs,
    LinopSpectrumArgs,
    SolveLambdaArgs,
    JacobiSolveArgs,
    SurfaceInfoArgs,
    FermiCheckArgs,
    VerifyAllArgs
);

#[derive(Debug, Clone, PartialEq, Subcommand, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case")]
pub enum CommandConfig {
    /// Solve the radial vortex profile; writes profile.csv and profile.json.
    Profile(ProfileArgs),
    /// Weighted residual of W0 or W1 over a decreasing ε list; writes residual_scan.csv.
    ResidualScan(ResidualScanArgs),
    /// W0 or W1 on a normal plane; writes field_dump.csv.
    FieldDump(FieldDumpArgs),
    /// Kernel, low spectrum and coercivity of the linearized operator; writes linop_spectrum.json.
    LinopSpectrum(LinopSpectrumArgs),
    /// Improvement terms Λ₁ and Λ₁₁; writes lambda.csv and lambda.json.
    SolveLambda(SolveLambdaArgs),
    /// Corrected Jacobi solve on the catenoid; writes jacobi_solution.csv and jacobi.json.
    JacobiSolve(JacobiSolveArgs),
    /// Chart mesh and end data; writes mesh.csv and ends.json.
    SurfaceInfo(SurfaceInfoArgs),
    /// Tube metric and curvature expansion checks; writes fermi_check.json.
    FermiCheck(FermiCheckArgs),
    /// The acceptance suite; writes verify.json.
    VerifyAll(VerifyAllArgs),
}

impl CommandConfig {
    pub fn name(&self) -> &'static str {
        match self {
            CommandConfig::Profile(_) => "profile",
            CommandConfig::ResidualScan(_) => "residual-scan",
            CommandConfig::FieldDump(_) => "field-dump",
            CommandConfig::LinopSpectrum(_) => "linop-spectrum",
            CommandConfig::SolveLambda(_) => "solve-lambda",
            CommandConfig::JacobiSolve(_) => "jacobi-solve",
            CommandConfig::SurfaceInfo(_) => "surface-info",
            CommandConfig::FermiCheck(_) => "fermi-check",
            CommandConfig::VerifyAll(_) => "verify-all",
        }
    }

    /// Every command with all-default parameters.
    pub fn all_defaults() -> Vec<CommandConfig> {
        vec![
            CommandConfig::Profile(Default::default()),
            CommandConfig::ResidualScan(Default::default()),
            CommandConfig::FieldDump(Default::default()),
            CommandConfig::LinopSpectrum(Default::default()),
            CommandConfig::SolveLambda(Default::default()),
            CommandConfig::JacobiSolve(Default::default()),
            CommandConfig::SurfaceInfo(Default::default()),
            CommandConfig::FermiCheck(Default::default()),
            CommandConfig::VerifyAll(Default::default()),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub format_version: u32,
    /// Output directory; resolved against GLVORTEX_OUT when absent.
    #[serde(default)]
    pub out: Option<PathBuf>,
    pub command: CommandConfig,
}

impl RunConfig {
    pub fn new(command: CommandConfig, out: Option<PathBuf>) -> Self {
        RunConfig { format_version: FORMAT_VERSION, out, command }
    }

    pub fn to_canonical(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config serializes");
        s.push('\n');
        s
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        let c: RunConfig = serde_json::from_str(text).map_err(|e| format!("invalid run config: {e}"))?;
        if c.format_version != FORMAT_VERSION {
            return Err(format!("unsupported format_version {} (expected {FORMAT_VERSION})", c.format_version));
        }
        Ok(c)
    }
}
