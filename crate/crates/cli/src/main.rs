//! `orthofree`: build grids and conflict graphs, search for conflict-free
//! selections, filter dense cells, scale and convexify, and merge reports.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::Config;

/// Environment variable naming the default graph cache directory.
pub const CACHE_ENV: &str = "ORTHOFREE_CACHE_DIR";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Infeasible(String),
    #[error("{0}")]
    ResourceCap(String),
    #[error("{0}")]
    Certification(String),
    #[error("{0}")]
    Other(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<orthofree::Error> for CliError {
    fn from(e: orthofree::Error) -> Self {
        use orthofree::Error as E;
        let msg = e.to_string();
        match e {
            E::ResourceCap { .. } => CliError::ResourceCap(msg),
            E::InfeasibleConstants { .. } | E::InfeasibleSelection(_) | E::HullInfeasible(_) => CliError::Infeasible(msg),
            E::EpsilonOutOfRange { .. } | E::InvalidLevel(_) | E::InvalidCell { .. } | E::Parse(_) | E::Domain(_) => {
                CliError::Usage(msg)
            }
            _ => CliError::Other(msg),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Other(_) | CliError::Io(_) => 1,
            CliError::Usage(_) => 2,
            CliError::Infeasible(_) => 3,
            CliError::ResourceCap(_) => 4,
            CliError::Certification(_) => 5,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "orthofree", version, about = "Orthogonal-pair-free sets on the sphere from dyadic cells")]
#[command(after_help = "Exit codes: 0 success, 1 other error, 2 usage, 3 infeasible, 4 resource cap, 5 certification violation.")]
pub struct Cli {
    /// Worker threads for parallel library calls (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Plain-text `key = value` file with defaults for the command's flags.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Conflict-graph cache directory (default: $ORTHOFREE_CACHE_DIR, else no cache).
    #[arg(long, global = true)]
    pub cache_dir: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Cell counts and areas of one grid level.
    Grid(GridArgs),
    /// Build or load the conflict graph of a level and print its statistics.
    Conflicts(ConflictArgs),
    /// Search for a large conflict-free selection.
    Search(SearchArgs),
    /// Select the cells in which a measurable set has density at least 1 − ε.
    Filter(FilterArgs),
    /// Shrink a selection inward and re-certify it.
    Scale(ScaleArgs),
    /// Replace a selection by convex polygons and certify them.
    Convexify(ConvexifyArgs),
    /// Merge artifacts into one report with plot-ready series.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct GridArgs {
    #[arg(long)]
    pub level: Option<u32>,
    /// Write the set of all cells here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GraphArgs {
    #[arg(long)]
    pub level: Option<u32>,
    /// Slack on the dot product when deciding conflicts (default 0).
    #[arg(long)]
    pub margin: Option<f64>,
    /// Highest level a graph may be built for (default 7).
    #[arg(long)]
    pub max_level: Option<u32>,
}

#[derive(Debug, Args)]
pub struct ConflictArgs {
    #[command(flatten)]
    pub graph: GraphArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SearchArgs {
    #[command(flatten)]
    pub graph: GraphArgs,
    /// baseline, greedy, random, local or exact.
    #[arg(long)]
    pub method: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Iteration budget for local search (default 100000).
    #[arg(long)]
    pub iters: Option<u64>,
    /// Starting selection for local search: baseline (default) or greedy.
    #[arg(long)]
    pub init: Option<String>,
    /// Node budget for exact search (default 10000000).
    #[arg(long)]
    pub node_budget: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Leaderboard CSV row.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FilterArgs {
    /// all, double-cap[:radius], cap:theta,phi,radius, sieve:depth, cells:PATH, or a JSON oracle file.
    #[arg(long)]
    pub oracle: Option<String>,
    #[arg(long)]
    pub level: Option<u32>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Monte Carlo samples per cell where no exact density exists (default 4000).
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Accept any ε in (0, 1) instead of (0, 1/64).
    #[arg(long)]
    pub allow_outside_theorem_range: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Per-cell densities.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ScaleArgs {
    /// Cell set, search result or density report JSON.
    #[arg(long)]
    pub selection: Option<PathBuf>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Replace the derived per-cell shrink distance (radians).
    #[arg(long)]
    pub shrink: Option<f64>,
    /// Replace the derived polar cap radius (radians).
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ConvexifyArgs {
    /// Cell set, search result or density report JSON.
    #[arg(long)]
    pub selection: Option<PathBuf>,
    /// Samples per latitude edge at the first hull attempt (default 32).
    #[arg(long)]
    pub initial_samples: Option<usize>,
    /// Largest samples per latitude edge (default 256).
    #[arg(long)]
    pub max_samples: Option<usize>,
    /// Hull area change that ends the doubling (default 1e-8).
    #[arg(long)]
    pub area_tol: Option<f64>,
    /// Polygons at or below this distance are merged (default 1e-9).
    #[arg(long)]
    pub merge_tol: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Artifact JSON files.
    #[arg(long = "input", num_args = 1..)]
    pub inputs: Vec<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// (level, fraction) series for plotting.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut cfg = match &cli.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    let threads = cfg.take("threads", cli.threads)?;
    if let Some(n) = threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Other(e.to_string()))?;
    }
    let cache_dir: Option<PathBuf> =
        cfg.take::<PathBuf>("cache-dir", cli.cache_dir)?.or_else(|| std::env::var_os(CACHE_ENV).map(PathBuf::from));
    let ctx = commands::Context { cache_dir, threads: rayon::current_num_threads() };
    commands::dispatch(cli.command, cfg, &ctx)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
