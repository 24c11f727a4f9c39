//! Command-line front end: subcommand dispatch, parameter resolution and
//! result files.

pub mod commands;
pub mod config;
pub mod output;

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;

pub use output::RunManifest;

/// Deformed sine-kernel determinants and checks of their integrable structure.
#[derive(Debug, Parser)]
#[command(name = "dsine", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fredholm determinant of one weight at one s.
    Det(DetArgs),
    /// σ(y, s) surface with p, q and PDE residuals.
    Surface(SurfaceArgs),
    /// φ, ψ on the λ-grid.
    Fields(FieldsArgs),
    /// Initial datum → profile → small-s reconstruction.
    Scattering(ScatteringArgs),
    /// Thinned sine-kernel determinant against the σ-form ODE.
    Classical(ClassicalArgs),
    /// Run a check and exit 1 if any threshold fails.
    #[command(subcommand)]
    Verify(Verify),
    /// Fit the prefactors linking surface potentials to U₁.
    CalibrateConstants(CalibrateArgs),
}

#[derive(Debug, Subcommand)]
pub enum Verify {
    Zs(VerifyZsArgs),
    Pde(VerifyPdeArgs),
    Trace(VerifyTraceArgs),
    Scattering(VerifyScatteringArgs),
    Classical(VerifyClassicalArgs),
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Flat TOML file whose keys mirror the long flags (`y-range` → `y_range`).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Directory for CSV, JSON, plot scripts and the manifest.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct WeightArgs {
    /// none, fermi, gaussian_square, erf_window, smoothed_indicator; with
    /// --y, a profile family (fermi_factor, gaussian_square, none).
    #[arg(long)]
    pub weight: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Shift y: evaluate the profile weight W(λ² - y).
    #[arg(long, allow_hyphen_values = true)]
    pub y: Option<f64>,
    #[arg(long)]
    pub truncation_tol: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct QuadArgs {
    #[arg(long)]
    pub order: Option<usize>,
    #[arg(long)]
    pub panels: Option<usize>,
    #[arg(long)]
    pub quad_tol: Option<f64>,
    /// conjugated or interval.
    #[arg(long)]
    pub method: Option<String>,
    #[arg(long)]
    pub max_levels: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct DetArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub weight: WeightArgs,
    #[command(flatten)]
    pub quad: QuadArgs,
    #[arg(long)]
    pub s: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct GridArgs {
    /// fermi_factor, gaussian_square or none.
    #[arg(long)]
    pub profile: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub y_range: Option<String>,
    #[arg(long)]
    pub s_range: Option<String>,
    #[arg(long)]
    pub hy: Option<f64>,
    #[arg(long)]
    pub hs: Option<f64>,
    #[arg(long)]
    pub order: Option<usize>,
    /// |q| below which the q-form residual is masked.
    #[arg(long)]
    pub q_threshold: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct SurfaceArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub grid: GridArgs,
}

#[derive(Debug, Clone, Args)]
pub struct VerifyPdeArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub grid: GridArgs,
    /// Allowed |order - 2| for each residual family.
    #[arg(long)]
    pub order_tol: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct FieldsArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub weight: WeightArgs,
    #[arg(long)]
    pub s: Option<f64>,
    #[arg(long)]
    pub order: Option<usize>,
    /// csv or json.
    #[arg(long)]
    pub out: Option<String>,
}

#[derive(Debug, Clone, Args)]
pub struct VerifyZsArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub weight: WeightArgs,
    #[arg(long)]
    pub s: Option<f64>,
    /// Step of the s-flow difference; the order is measured from h and h/2.
    #[arg(long)]
    pub h: Option<f64>,
    /// Step of the determinant differences in the second-log-derivative check.
    #[arg(long)]
    pub h_det: Option<f64>,
    #[arg(long)]
    pub order: Option<usize>,
    #[arg(long)]
    pub order_tol: Option<f64>,
    #[arg(long)]
    pub second_log_tol: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct VerifyTraceArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub weight: WeightArgs,
    /// Comma-separated s values.
    #[arg(long)]
    pub s_list: Option<String>,
    #[arg(long)]
    pub order: Option<usize>,
    #[arg(long)]
    pub threshold: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct ScatteringArgs {
    #[command(flatten)]
    pub common: Common,
    /// gaussian or zero.
    #[arg(long)]
    pub f: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub center: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub amp: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub y_range: Option<String>,
    #[arg(long)]
    pub hy: Option<f64>,
    /// Descending s values for the extrapolation.
    #[arg(long)]
    pub s_seq: Option<String>,
    /// Profile table spacing in r.
    #[arg(long)]
    pub dr: Option<f64>,
    /// Also check the σ-form PDE on the reconstructed surface.
    #[arg(long)]
    pub pde: bool,
}

#[derive(Debug, Clone, Args)]
pub struct VerifyScatteringArgs {
    #[command(flatten)]
    pub run: ScatteringArgs,
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long)]
    pub w0_tol: Option<f64>,
    #[arg(long)]
    pub order_tol: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct ClassicalArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub ell: Option<f64>,
    #[arg(long)]
    pub s_min: Option<f64>,
    #[arg(long)]
    pub s_max: Option<f64>,
    #[arg(long)]
    pub ds: Option<f64>,
    #[arg(long)]
    pub ode_tol: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct VerifyClassicalArgs {
    #[command(flatten)]
    pub run: ClassicalArgs,
    /// Bound on |s∂ₛlog F - ν|; defaults to max(1e-6, 10·ode_tol).
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Bound on |log F - ∫ν/x|.
    #[arg(long)]
    pub log_threshold: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct CalibrateArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub grid: GridArgs,
    /// Flat list y₁,s₁,y₂,s₂,… of sample points.
    #[arg(long, allow_hyphen_values = true)]
    pub samples: Option<String>,
}

/// Parse `argv` (including the program name), run, and return the exit status.
pub fn run_command<I, T>(argv: I) -> (i32, Option<RunManifest>)
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return (code, None);
        }
    };
    match commands::dispatch(cli.command) {
        Ok(outcome) => {
            for f in &outcome.failures {
                eprintln!("FAIL {f}");
            }
            let code = if outcome.failures.is_empty() { 0 } else { 1 };
            (code, Some(outcome.manifest))
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            (exit_code(&e), None)
        }
    }
}

fn exit_code(e: &anyhow::Error) -> i32 {
    if e.downcast_ref::<config::UsageError>().is_some() {
        return 2;
    }
    match e.downcast_ref::<deformed_sine::Error>() {
        Some(deformed_sine::Error::Config(_))
        | Some(deformed_sine::Error::UnsupportedWeight(_)) => 2,
        _ => 1,
    }
}
