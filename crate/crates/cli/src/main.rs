//! `projconn`: catalog browsing, verification suites and integration runs.
//!
//! Exit codes: 0 all checks pass, 1 a numeric gate failed, 2 usage or
//! configuration error.

mod commands;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

pub const DEFAULT_SEED: u64 = 42;

#[derive(Parser, Debug)]
#[command(name = "projconn", version, about = "Projective connections with a projective symmetry")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// List catalog entries and their parameters.
    Catalog(CatalogArgs),
    /// Run the verification suite for one entry.
    Check(CheckArgs),
    /// Integrate a geodesic and monitor its integrals.
    Geodesic(GeodesicArgs),
    /// Integrate the quotient ODE y'' = f0 + f1 y' + f2 y'² + f3 y'³.
    Quotient(QuotientArgs),
    /// Algebraic trajectories and independence rank of the degree-3 family.
    Superintegrable(SuperArgs),
    /// Normal form of a Lie derivative on a 2-dimensional solution space.
    Classify(ClassifyArgs),
}

#[derive(Args, Debug, Serialize)]
pub struct CatalogArgs {
    /// Only this label.
    #[arg(long)]
    pub label: Option<String>,
}

/// A catalog entry with parameters.
#[derive(Args, Debug, Clone, Serialize)]
pub struct EntryArgs {
    #[arg(long)]
    pub label: String,
    /// Parameter as name=value; repeatable.
    #[arg(long = "param", value_parser = parse_kv)]
    pub params: Vec<(String, f64)>,
    #[arg(long)]
    pub xi: Option<f64>,
    #[arg(long)]
    pub h: Option<f64>,
    #[arg(long)]
    pub kappa: Option<f64>,
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long)]
    pub rho: Option<f64>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub theta: Option<f64>,
    #[arg(long)]
    pub phi: Option<f64>,
    /// Unit constant C = ±1, stored as the phase φ ∈ {0, π}.
    #[arg(long = "C", allow_hyphen_values = true)]
    pub c_unit: Option<f64>,
    /// Phase φ of C = e^{iφ}.
    #[arg(long)]
    pub c_phase: Option<f64>,
    /// Chart override x0,x1,y0,y1.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub chart: Option<Vec<f64>>,
}

#[derive(Args, Debug, Serialize)]
pub struct CheckArgs {
    #[command(flatten)]
    pub entry: EntryArgs,
    /// Number of random sample points.
    #[arg(long, default_value_t = 100)]
    pub npoints: usize,
    /// Sampling seed; defaults to PROJCONN_SEED or 42.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Report path (stdout if omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
pub struct RunArgs {
    /// Number of output samples.
    #[arg(long, default_value_t = 100)]
    pub samples: usize,
    #[arg(long, default_value_t = 1e-10)]
    pub rtol: f64,
    #[arg(long, default_value_t = 1e-10)]
    pub atol: f64,
    /// Drift above this bound fails the run.
    #[arg(long, default_value_t = 1e-7)]
    pub gate: f64,
    /// CSV output path.
    #[arg(long)]
    pub out: PathBuf,
    /// Report path (stdout if omitted).
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Also write a gnuplot script next to the CSV.
    #[arg(long)]
    pub emit_plot_script: bool,
}

#[derive(Args, Debug, Serialize)]
pub struct GeodesicArgs {
    #[command(flatten)]
    pub entry: EntryArgs,
    /// Initial condition x,y,xd,yd.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
    pub ic: Vec<f64>,
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    pub t1: f64,
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Args, Debug, Serialize)]
pub struct QuotientArgs {
    #[command(flatten)]
    pub entry: EntryArgs,
    /// Initial condition x,y,yx.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
    pub ic: Vec<f64>,
    /// End abscissa.
    #[arg(long, allow_hyphen_values = true)]
    pub x1: f64,
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Args, Debug, Serialize)]
pub struct SuperArgs {
    #[arg(long)]
    pub theta: f64,
    #[arg(long)]
    pub phi: f64,
    /// Quotient constant c̃1.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub c1: f64,
    /// Quotient constant c̃2.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub c2: f64,
    /// Hamiltonian level.
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    pub k: f64,
    /// Start abscissa of the parametrized trajectory.
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    pub x0: f64,
    /// Sheet of the curve at x0: plus or minus.
    #[arg(long, default_value = "plus")]
    pub branch: String,
    /// Proper time of the parametrized trajectory.
    #[arg(long, default_value_t = 0.5, allow_hyphen_values = true)]
    pub t1: f64,
    /// Abscissa window for the curve samples a,b.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub window: Option<Vec<f64>>,
    #[arg(long, default_value_t = 100)]
    pub samples: usize,
    /// Rank samples.
    #[arg(long, default_value_t = 20)]
    pub rank_points: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output prefix; writes <out>.curve.csv and <out>.trajectory.csv.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[arg(long)]
    pub emit_plot_script: bool,
}

#[derive(Args, Debug, Serialize)]
pub struct ClassifyArgs {
    /// Matrix entries a,b,c,d of [[a, b], [c, d]].
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, conflicts_with = "label")]
    pub m: Option<Vec<f64>>,
    /// Catalog label with an attached projective field.
    #[arg(long)]
    pub label: Option<String>,
}

fn parse_kv(s: &str) -> Result<(String, f64), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("expected name=value, got `{s}`"))?;
    let v: f64 = v.trim().parse().map_err(|e| format!("`{v}`: {e}"))?;
    Ok((k.trim().to_string(), v))
}

/// `--seed`, else `PROJCONN_SEED`, else 42.
pub fn resolve_seed(flag: Option<u64>) -> Result<u64, commands::CliError> {
    if let Some(s) = flag {
        return Ok(s);
    }
    match std::env::var("PROJCONN_SEED") {
        Ok(v) => v.trim().parse().map_err(|_| commands::CliError::Config(format!("PROJCONN_SEED = `{v}` is not an unsigned integer"))),
        Err(_) => Ok(DEFAULT_SEED),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Catalog(a) => commands::catalog(a),
        Command::Check(a) => commands::check(a),
        Command::Geodesic(a) => commands::geodesic(a),
        Command::Quotient(a) => commands::quotient(a),
        Command::Superintegrable(a) => commands::superintegrable(a),
        Command::Classify(a) => commands::classify(a),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(commands::CliError::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(commands::CliError::Io(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
