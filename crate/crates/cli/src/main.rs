//! `conelift` command-line front end.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub const EXIT_OK: u8 = 0;
pub const EXIT_USAGE: u8 = 1;
pub const EXIT_VALIDATION: u8 = 2;
pub const EXIT_INCONSISTENT: u8 = 3;
pub const EXIT_UNDERDETERMINED: u8 = 4;

#[derive(Debug, Parser)]
#[command(
    name = "conelift",
    version,
    about = "Isometric immersions into light cones and their rigidity"
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Tolerance for exact checks (Lorentz residuals, point fits).
    #[arg(long, global = true, env = "CONELIFT_TOL", default_value_t = 1e-9, value_parser = positive)]
    pub tol: f64,
    /// Tolerance for finite-difference (O(h²)) checks.
    #[arg(long = "fd-tol", global = true, default_value_t = 1e-3, value_parser = positive)]
    pub fd_tol: f64,
    /// Output file for reports, or output directory for `gen`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a fixture's chart, pair and oracle files.
    Gen(GenArgs),
    /// Check that a cone chart is an isometric immersion for a metric.
    Verify {
        chart: PathBuf,
        /// Metric file; defaults to the chart's embedded metric.
        metric: Option<PathBuf>,
    },
    /// Recover τ from a correspondence file, sphere pairs, or two charts and a metric.
    Recover {
        #[arg(num_args = 1..=3, required = true)]
        inputs: Vec<PathBuf>,
    },
    /// Extend a sampled cone self-map to an ambient Lorentz map.
    Extend { selfmap: PathBuf },
    /// Convert cone points to another cone.
    Embed {
        points: PathBuf,
        /// Target cone: 0 (Minkowski), 1 (de Sitter) or -1 (anti-de Sitter).
        #[arg(long = "to", visible_alias = "k", allow_hyphen_values = true)]
        to: i64,
    },
    /// Project cone points or a cone chart to the sphere of null rays.
    Project { input: PathBuf },
    /// Lift a conformal sphere chart to a cone chart isometric for a metric.
    Lift {
        chart: PathBuf,
        /// Metric file; defaults to the chart's embedded metric.
        metric: Option<PathBuf>,
        #[arg(long, default_value_t = 0, allow_hyphen_values = true)]
        k: i64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Fixture {
    CircleN2,
    SphereIdentity,
    TauPair,
    ConeSelfmap,
    NonconformalPair,
}

#[derive(Debug, Clone, Args)]
pub struct GenArgs {
    pub fixture: Fixture,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Sphere dimension parameter: charts land in `ℝ^{1,n}`.
    #[arg(long, default_value_t = 4)]
    pub n: usize,
    /// Cone for cone-valued fixtures.
    #[arg(long, default_value_t = 0, allow_hyphen_values = true)]
    pub k: i64,
    /// Grid nodes per axis (default 512 for circle-n2, 33 otherwise).
    #[arg(long)]
    pub nodes: Option<usize>,
    /// Generator count for random Lorentz maps.
    #[arg(long, default_value_t = 8)]
    pub steps: usize,
    /// For cone-selfmap: write the t-dependent corrupted map instead.
    #[arg(long)]
    pub corrupt: bool,
}

fn positive(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(x) if x > 0.0 && x.is_finite() => Ok(x),
        Ok(x) => Err(format!("tolerance must be positive, got {x}")),
        Err(e) => Err(e.to_string()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::Gen(args) => commands::gen(&cli.common, args),
        Command::Verify { chart, metric } => {
            commands::verify(&cli.common, chart, metric.as_deref())
        }
        Command::Recover { inputs } => commands::recover(&cli.common, inputs),
        Command::Extend { selfmap } => commands::extend(&cli.common, selfmap),
        Command::Embed { points, to } => commands::embed(&cli.common, points, *to),
        Command::Project { input } => commands::project(&cli.common, input),
        Command::Lift { chart, metric, k } => {
            commands::lift(&cli.common, chart, metric.as_deref(), *k)
        }
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("conelift: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
