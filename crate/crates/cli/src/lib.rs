//! The `smoothdist` command line: build and persist structures, answer
//! queries, sample grids, run the verification suite, measure scaling and run
//! the discontinuity demos.
//!
//! Exit codes: 0 success, 1 verification failure, 2 invalid input or usage,
//! 3 coverage or solver failure, 4 query point outside the polytope.

pub mod commands;
pub mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

pub use report::RunConfig;

/// Seed override read before `--seed`.
pub const SEED_ENV: &str = "SMOOTHDIST_SEED";

#[derive(Debug, Parser)]
#[command(name = "smoothdist", version, about = "Smooth approximate boundary distance for convex polytopes")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a structure from a polytope file and write it as JSON.
    Build {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        epsilon: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        lambda_c: Option<f64>,
        #[arg(long)]
        lambda_p: Option<f64>,
    },
    /// Evaluate the field at one point, in the polytope's own coordinates.
    Query {
        #[arg(long)]
        structure: PathBuf,
        /// Comma-separated coordinates.
        #[arg(long, allow_hyphen_values = true)]
        at: String,
        #[arg(long)]
        gradient: bool,
    },
    /// Sample a regular grid over the bounding box into a CSV file.
    Grid {
        #[arg(long)]
        structure: PathBuf,
        #[arg(long)]
        res: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = FieldKind::Blend)]
        field: FieldKind,
    },
    /// Run the property suite against a structure file.
    Verify {
        #[arg(long)]
        structure: PathBuf,
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Build over a list of epsilons and report size and query scaling.
    Bench {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value = "0.2,0.1,0.05,0.025")]
        eps_list: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1000)]
        queries: usize,
    },
    /// Trace witness and blended walks on a curated scenario.
    Demo {
        #[arg(long)]
        scenario: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum FieldKind {
    Blend,
    Witness,
    Exact,
    Error,
}

/// A verification run that completed with failing checks.
#[derive(Debug)]
pub struct VerifyFailed(pub Vec<&'static str>);

impl std::fmt::Display for VerifyFailed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "verification failed: {}", self.0.join(", "))
    }
}

impl std::error::Error for VerifyFailed {}

/// `--seed`, unless the environment overrides it.
pub fn resolve_seed(flag: u64) -> anyhow::Result<u64> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| anyhow::Error::new(smoothdist::Error::InvalidArgument(format!("{SEED_ENV}={v} is not a seed")))),
        Err(_) => Ok(flag),
    }
}

pub fn exit_code(err: &anyhow::Error) -> u8 {
    use smoothdist::Error as E;
    if err.downcast_ref::<VerifyFailed>().is_some() {
        return 1;
    }
    match err.downcast_ref::<E>() {
        Some(E::CoverageFailure { .. } | E::SolverFailure(_) | E::DegenerateRegion { .. } | E::RepresentativeInvalid { .. }) => 3,
        Some(E::OutsidePolytope | E::PointOutside { .. }) => 4,
        _ => 2,
    }
}

pub fn run(cli: Cli) -> ExitCode {
    match commands::dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
