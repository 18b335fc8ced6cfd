//! `hwlca` — batch front end for the hwlca life-cycle assessment library.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hwlca_core::inventory::DEFAULT_TOLERANCE;
use hwlca_core::ErrorKind;

#[derive(Parser, Debug)]
#[command(
    name = "hwlca",
    version,
    about = "Cradle-to-gate LCA of electronic hardware from a bill of materials"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Contributions, totals, hotspots and cut-offs for one database.
    Assess(Common),
    /// Totals of several databases normalized by a reference database.
    Compare(Common),
    /// Production share against use-phase scenarios.
    Scenarios {
        #[command(flatten)]
        common: Common,
        /// Scenario file (mixes and scenario rows).
        #[arg(long)]
        scenarios: PathBuf,
    },
    /// Low / typical / high runs and their relative spread.
    Sensitivity {
        #[command(flatten)]
        common: Common,
        /// Sensitivity bounds file.
        #[arg(long)]
        bounds: PathBuf,
    },
    /// Scaled bill of materials for a related device, with impact ratios.
    Extrapolate {
        #[command(flatten)]
        common: Common,
        /// Extrapolation spec file.
        #[arg(long)]
        spec: PathBuf,
    },
    /// Load and check every given file; exit 3 on any violation.
    Validate {
        #[arg(long)]
        bom: Option<PathBuf>,
        #[arg(long = "db")]
        databases: Vec<PathBuf>,
        #[arg(long)]
        method: Option<PathBuf>,
        #[arg(long)]
        rules: Option<PathBuf>,
        #[arg(long)]
        scenarios: Option<PathBuf>,
        #[arg(long)]
        bounds: Option<PathBuf>,
        #[arg(long)]
        spec: Option<PathBuf>,
    },
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Bill-of-materials file.
    #[arg(long)]
    bom: PathBuf,
    /// Background database file; repeat for several databases.
    #[arg(long = "db", required = true)]
    databases: Vec<PathBuf>,
    /// Characterization method file.
    #[arg(long)]
    method: PathBuf,
    /// Mapping rules file. Defaults to the rule sections of the BOM file.
    #[arg(long)]
    rules: Option<PathBuf>,
    /// Output directory, created if missing.
    #[arg(long)]
    out: PathBuf,
    /// Reference database id for comparisons.
    #[arg(long)]
    reference: Option<String>,
    /// Accepted relative residual of the inventory solve.
    #[arg(long, default_value_t = DEFAULT_TOLERANCE)]
    tol: f64,
    /// Also write the demand and scaling vectors of each solve.
    #[arg(long)]
    dump_solver: bool,
}

/// Failures surfaced to the user, each with its exit code.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Core(hwlca_core::Error),
    Io(String),
}

impl From<hwlca_core::Error> for Failure {
    fn from(e: hwlca_core::Error) -> Self {
        Failure::Core(e)
    }
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Io(_) => 1,
            Failure::Core(e) => match e.kind() {
                ErrorKind::Validation => 3,
                ErrorKind::Resolution => 4,
                ErrorKind::Solver => 5,
            },
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Usage(m) => write!(f, "usage error: {m}"),
            Failure::Core(e) => write!(f, "{e}"),
            Failure::Io(m) => write!(f, "{m}"),
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Assess(c) => commands::assess(&c),
        Command::Compare(c) => commands::compare(&c),
        Command::Scenarios { common, scenarios } => commands::scenarios(&common, &scenarios),
        Command::Sensitivity { common, bounds } => commands::sensitivity(&common, &bounds),
        Command::Extrapolate { common, spec } => commands::extrapolate(&common, &spec),
        Command::Validate {
            bom,
            databases,
            method,
            rules,
            scenarios,
            bounds,
            spec,
        } => commands::validate(commands::ValidateArgs {
            bom,
            databases,
            method,
            rules,
            scenarios,
            bounds,
            spec,
        }),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {failure}");
            ExitCode::from(failure.exit_code())
        }
    }
}
