//! `scalesi` command-line front end.
//!
//! Each subcommand computes everything in memory first and writes its output
//! files only once the computation has succeeded, so a failed run never
//! leaves partial results behind.
//!
//! Exit codes:
//!
//! | code | meaning |
//! |------|---------|
//! | 0 | success |
//! | 2 | usage error (bad command line) |
//! | 3 | I/O error (missing or unreadable input, unwritable output) |
//! | 4 | parse error in an input file |
//! | 5 | invalid configuration or bootstrap scale |
//! | 6 | fitting failed or too little data |
//! | 7 | numeric error (domain, overflow, wrong test mode) |

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use scalesi_core::Error;

pub mod commands;
pub mod config;
pub mod output;
pub mod simulate;

pub use config::RunConfig;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_PARSE: i32 = 4;
pub const EXIT_CONFIG: i32 = 5;
pub const EXIT_FIT: i32 = 6;
pub const EXIT_NUMERIC: i32 = 7;

/// Process exit code for an error.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Io(_) => EXIT_IO,
        Error::Parse { .. } => EXIT_PARSE,
        Error::Config(_) | Error::Scale(_) | Error::Precondition(_) => EXIT_CONFIG,
        Error::Fit { .. } | Error::InsufficientData(_) => EXIT_FIT,
        Error::Domain(_) | Error::Overflow(_) | Error::Mode(_) | Error::Ambiguous(_) => EXIT_NUMERIC,
    }
}

#[derive(Debug, Parser)]
#[command(name = "scalesi", version, about = "Approximately unbiased and selective inference p-values via multiscale bootstrap")]
pub struct Cli {
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Bootstrap, fit and report p-values for every tree and edge.
    Pvalues(PipelineArgs),
    /// Run the multiscale RELL bootstrap only and save the counts.
    Bootstrap(PipelineArgs),
    /// Fit scaling models to saved counts and report p-values.
    Fit(FitArgs),
    /// Geometry and SI from a published (BP, AU) pair.
    Shortcut(ShortcutArgs),
    /// Type-I error and geometry experiments on regions of known shape.
    Simulate(SimulateArgs),
    /// Number of regions, selectable regions and true regions for N taxa.
    Counts(CountsArgs),
    /// Model-map embedding of site-wise log-likelihoods.
    Modelmap(ModelmapArgs),
}

#[derive(Debug, Args)]
pub struct InputArgs {
    /// Site-wise log-likelihood matrix.
    #[arg(long, short)]
    pub input: PathBuf,
    /// Matrix layout: plain (n K, one row per site) or consel_mt (K n, one block per tree).
    #[arg(long, default_value = "plain")]
    pub format: String,
}

#[derive(Debug, Args)]
pub struct PipelineArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// One topology per line, in the order of the matrix columns.
    #[arg(long)]
    pub topologies: Option<PathBuf>,
    /// Outgroup taxon (default: the highest-numbered taxon).
    #[arg(long)]
    pub outgroup: Option<usize>,
    /// wide13, narrow10 or a comma-separated list of sigma^2 values.
    #[arg(long, default_value = "wide13")]
    pub scales: String,
    /// Bootstrap replicates per scale.
    #[arg(long, default_value_t = 100_000)]
    pub nb: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub fit: FitOptions,
    /// Which items to report: trees, edges or all.
    #[arg(long, default_value = "all")]
    pub items: String,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct FitOptions {
    /// Scaling models averaged by Akaike weights.
    #[arg(long, default_value = "poly.2,poly.3,sing.3")]
    pub models: String,
    /// Significance level used to flag p-values.
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Counts TSV written by `bootstrap` or `pvalues`.
    #[arg(long)]
    pub counts: PathBuf,
    #[command(flatten)]
    pub fit: FitOptions,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ShortcutArgs {
    #[arg(long)]
    pub bp: f64,
    #[arg(long)]
    pub au: f64,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// TOML experiment description.
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CountsArgs {
    /// Number of taxa N.
    #[arg(long)]
    pub taxa: usize,
    /// tree or edge; both when omitted.
    #[arg(long)]
    pub target: Option<String>,
    /// inside or outside; both when omitted.
    #[arg(long)]
    pub mode: Option<String>,
}

#[derive(Debug, Args)]
pub struct ModelmapArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Singular values kept for the full model.
    #[arg(long, default_value_t = 10)]
    pub rank: usize,
    /// Embedding dimension, 2 or 3.
    #[arg(long, default_value_t = 2)]
    pub dims: usize,
    /// Keep the full-model direction instead of projecting it out.
    #[arg(long)]
    pub no_project: bool,
    /// mean, origin, or column:K to center on matrix column K (1-based),
    /// which is then dropped from the trees.
    #[arg(long, default_value = "mean")]
    pub center: String,
    /// Biplot exponent: sites U S^a, trees V S^(1-a).
    #[arg(long, default_value_t = 0.0)]
    pub biplot_alpha: f64,
    #[arg(long)]
    pub out: PathBuf,
}

/// Runs a parsed command line and returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("could not size the thread pool: {e}");
        }
    }
    let result = match cli.command {
        Command::Pvalues(a) => RunConfig::from_pipeline(&a).and_then(|c| commands::pvalues(&c)).map(|s| print!("{s}")),
        Command::Bootstrap(a) => RunConfig::from_pipeline(&a).and_then(|c| commands::bootstrap(&c)),
        Command::Fit(a) => commands::fit(&a).map(|s| print!("{s}")),
        Command::Shortcut(a) => commands::shortcut(a.bp, a.au, &mut std::io::stdout().lock()),
        Command::Simulate(a) => simulate::run(&a.config, &a.out),
        Command::Counts(a) => commands::counts(&a, &mut std::io::stdout().lock()),
        Command::Modelmap(a) => commands::modelmap(&a),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("scalesi: {e}");
            exit_code(&e)
        }
    }
}

/// Entry point of the `scalesi` binary.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).try_init();
    run(cli)
}
