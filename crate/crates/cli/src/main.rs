//! Command-line front end for the `heis` library.
//!
//! Wires a run configuration to the library modules and leaves three kinds
//! of artifact in the output directory: a JSON report per command (with
//! the tool version and a SHA-256 hash of the effective configuration),
//! RFC-4180 CSV tables for plotting, and binary voxel dumps of built sets.
//! Every command prints one line per checked gate and exits 0 when all
//! gates pass, 1 when a gate fails or a solver reports an error, and 2 on
//! usage problems such as a malformed configuration.
//!
//! Outputs are deterministic: the same configuration and seed produce
//! byte-identical CSV and voxel files, independent of the worker thread
//! count, because every random stream is keyed by (seed, item index) and
//! all floating-point reductions feeding the files run in a fixed order.

mod config;
mod report;
mod run;

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

use config::MetricTag;

/// Failure classes mapped to exit codes: usage problems exit 2, run and
/// verification failures exit 1.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Failed(String),
}

impl From<heis::error::HeisError> for CliError {
    fn from(e: heis::error::HeisError) -> Self {
        CliError::Failed(e.to_string())
    }
}

#[derive(Parser)]
#[command(
    name = "heis",
    version,
    about = "Heisenberg-group geometry toolbox: distances, isometries, Dirichlet \
             domains, self-similar tiles, and a Haar multiresolution analysis",
    arg_required_else_help = true
)]
pub struct Cli {
    #[command(flatten)]
    pub flags: GlobalFlags,
    #[command(subcommand)]
    pub command: Command,
}

/// Flags shared by every subcommand.  Each one overrides the matching
/// field of the configuration file when both are given.
#[derive(Args)]
pub struct GlobalFlags {
    /// JSON run configuration; flags override its fields
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Directory for reports, CSV tables, and voxel dumps
    #[arg(long, global = true, value_name = "DIR", default_value = "out")]
    pub out: PathBuf,
    /// Seed for every random stream
    #[arg(long, global = true, value_name = "U64")]
    pub seed: Option<u64>,
    /// Cells per axis for voxel grids (32..=512)
    #[arg(long, global = true, value_name = "N")]
    pub res: Option<usize>,
    /// Dilation parameter; its reciprocal must be an integer >= 2
    #[arg(long, global = true, value_name = "REAL", allow_hyphen_values = true)]
    pub t: Option<f64>,
    /// Distance used by `dist pair`
    #[arg(long, global = true, value_enum, value_name = "METRIC")]
    pub metric: Option<MetricTag>,
    /// Worker threads; omit or 0 for all available cores
    #[arg(long, global = true, value_name = "N")]
    pub threads: Option<usize>,
}

#[derive(Subcommand)]
pub enum Command {
    /// Random property checks of the group algebra
    #[command(subcommand)]
    Group(GroupCmd),
    /// Point distances and the two-metric comparison estimate
    #[command(subcommand)]
    Dist(DistCmd),
    /// Isometry verification and fixed points of finite actions
    #[command(subcommand)]
    Iso(IsoCmd),
    /// Dirichlet fundamental domain of the lattice action
    #[command(subcommand)]
    Dirichlet(DirichletCmd),
    /// Self-similar tile construction and tiling checks
    #[command(subcommand)]
    Tile(TileCmd),
    /// Multiresolution diagnostics and level projections
    #[command(subcommand)]
    Mra(MraCmd),
    /// Run the full pipeline from one configuration
    All,
}

#[derive(Subcommand)]
pub enum GroupCmd {
    /// Random associativity, inverse, dilation, and model-change checks
    Check,
}

#[derive(Subcommand)]
pub enum DistCmd {
    /// Distance between two points, cross-checked by two solvers
    Pair {
        /// First point as x,y,z in the configured model
        #[arg(long, value_parser = parse_point, allow_hyphen_values = true)]
        p: [f64; 3],
        /// Second point as x,y,z in the configured model
        #[arg(long, value_parser = parse_point, allow_hyphen_values = true)]
        q: [f64; 3],
    },
    /// Sample pairs, compare the metrics, and fit the comparison constant
    Estimate,
}

#[derive(Subcommand)]
pub enum IsoCmd {
    /// Check the cometric identity for the configured rotation group
    Verify,
    /// Common fixed point of the rotation group, with certified displacement
    Fixedpoint,
}

#[derive(Subcommand)]
pub enum DirichletCmd {
    /// Voxelize the Dirichlet cell about the configured base point
    Build,
    /// Build the cell and verify the fundamental-set axioms
    Verify,
}

#[derive(Subcommand)]
pub enum TileCmd {
    /// Iterate the set-valued contraction to the self-similar tile
    Build,
    /// Check self-similarity, measure, tiling multiplicity, and decay
    Verify,
}

#[derive(Subcommand)]
pub enum MraCmd {
    /// Run every multiresolution axiom check against the built tile
    Verify,
    /// Project a test function onto one ladder level and dump coefficients
    Project {
        /// Ladder level j; negative is coarser
        #[arg(long, value_name = "J", allow_hyphen_values = true)]
        level: Option<i32>,
    },
}

fn parse_point(s: &str) -> Result<[f64; 3], String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 3 {
        return Err(format!("expected x,y,z, got {s:?}"));
    }
    let mut v = [0.0; 3];
    for (slot, part) in v.iter_mut().zip(&parts) {
        *slot = part
            .trim()
            .parse::<f64>()
            .map_err(|e| format!("bad coordinate {part:?}: {e}"))?;
        if !slot.is_finite() {
            return Err(format!("coordinate {part:?} is not finite"));
        }
    }
    Ok(v)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run::dispatch(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Failed(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

// TESTS ###############################################################

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn point_parser_accepts_signed_coordinates() {
        assert_eq!(parse_point("1,2,3").unwrap(), [1.0, 2.0, 3.0]);
        assert_eq!(parse_point("-0.5, 0.25, 1e-3").unwrap(), [-0.5, 0.25, 1e-3]);
    }

    #[test]
    fn point_parser_rejects_malformed_input() {
        assert!(parse_point("1,2").is_err());
        assert!(parse_point("1,2,3,4").is_err());
        assert!(parse_point("a,b,c").is_err());
        assert!(parse_point("1,2,inf").is_err());
    }

    #[test]
    fn command_tree_is_well_formed() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
