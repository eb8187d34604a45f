//! Command-line front end. Every subcommand prints one JSON envelope on
//! standard output; bulky tables go to CSV files under `--out-dir`.

mod args;
mod commands;
pub mod envelope;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use serde_json::json;

pub use args::OUT_DIR_ENV;
use args::{parse_count, parse_number, parse_point, BranchArg, CircleArgs, GaugeArg, ModelArgs, OutDirArgs};
use dirac_phase::{Error, ParamPoint};
pub use envelope::ResultEnvelope;

/// Exit status for a finished run whose checks did not all pass, or whose
/// side files could not be written.
pub const EXIT_FAILURE: u8 = 1;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_DOMAIN: u8 = 3;

#[derive(Parser, Debug)]
#[command(
    name = "dirac-phase",
    version,
    about = "Dirac strings and geometric phases of two-mode Hamiltonians"
)]
pub struct Cli {
    /// Print only the JSON envelope, without the summary on standard error.
    #[arg(long, global = true)]
    pub json_only: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Energies and eigenvectors at one point.
    Eigen {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, value_parser = parse_point, allow_hyphen_values = true)]
        at: ParamPoint,
        #[arg(long, value_enum, default_value = "standard")]
        gauge: GaugeArg,
    },
    /// Nodal lines of one branch on a grid.
    Strings {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, value_enum, default_value = "plus")]
        branch: BranchArg,
        #[arg(long, value_enum, default_value = "standard")]
        gauge: GaugeArg,
        /// Grid such as "x=-1:1:0.02,y=-1:1:0.02,z=-1:1:0.02".
        #[arg(
            long,
            default_value = "x=-1:1:0.02,y=-1:1:0.02,z=-1:1:0.02",
            allow_hyphen_values = true
        )]
        grid: String,
        #[command(flatten)]
        out: OutDirArgs,
    },
    /// Real connection at one point.
    Connection {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, value_enum, default_value = "plus")]
        branch: BranchArg,
        #[arg(long, value_parser = parse_point, allow_hyphen_values = true)]
        at: ParamPoint,
        #[arg(long, value_enum, default_value = "standard")]
        gauge: GaugeArg,
        /// Finite-difference step.
        #[arg(long, default_value_t = 1e-5)]
        h: f64,
    },
    /// Curvature at one point.
    Curvature {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, value_enum, default_value = "plus")]
        branch: BranchArg,
        #[arg(long, value_parser = parse_point, allow_hyphen_values = true)]
        at: ParamPoint,
        /// Finite-difference step of the curl.
        #[arg(long, default_value_t = 1e-4)]
        h: f64,
    },
    /// Monopole charge enclosed by a sphere.
    Charge {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, value_enum, default_value = "plus")]
        branch: BranchArg,
        #[arg(long, value_parser = parse_point, allow_hyphen_values = true, default_value = "0,0,0")]
        center: ParamPoint,
        #[arg(long, default_value_t = 1.0)]
        radius: f64,
        #[arg(long, value_enum, default_value = "standard")]
        gauge: GaugeArg,
    },
    /// Phase accumulated around a horizontal circle.
    LoopPhase {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, value_enum, default_value = "plus")]
        branch: BranchArg,
        #[command(flatten)]
        circle: CircleArgs,
        #[arg(long, value_enum, default_value = "all")]
        method: MethodArg,
        /// Surface used by the flux prediction.
        #[arg(long, value_enum, default_value = "upper")]
        cap: CapArg,
        #[arg(long, value_enum, default_value = "standard")]
        gauge: GaugeArg,
    },
    /// Phase relative to a reference point over a grid, along axis sweeps.
    PhaseMap {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, value_enum, default_value = "plus")]
        branch: BranchArg,
        /// Reference point.
        #[arg(long, value_parser = parse_point, allow_hyphen_values = true)]
        rc: ParamPoint,
        /// Order of the axis sweeps, e.g. xyz or zyx.
        #[arg(long, default_value = "xyz")]
        protocol: String,
        #[arg(long, allow_hyphen_values = true)]
        grid: String,
        #[command(flatten)]
        out: OutDirArgs,
    },
    /// Phase along the x-axis through the degeneracy of the base model.
    DegeneratePath {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, value_enum, default_value = "plus")]
        branch: BranchArg,
        #[arg(long, value_enum, default_value = "both")]
        side: SideArg,
        #[arg(long, default_value_t = -1.0, allow_hyphen_values = true)]
        from: f64,
        #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
        to: f64,
        /// Path offsets, largest first, with a constant ratio.
        #[arg(long, value_delimiter = ',', value_parser = parse_number)]
        epsilons: Vec<f64>,
    },
    /// Geometric phase of one adiabatic transport around a circle.
    Adiabatic {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, value_enum, default_value = "plus")]
        branch: BranchArg,
        #[command(flatten)]
        circle: CircleArgs,
        /// Total time.
        #[arg(long = "T", default_value_t = 2000.0)]
        total_time: f64,
        /// Time steps; defaults to T / 0.01.
        #[arg(long, value_parser = parse_count)]
        steps: Option<usize>,
        #[arg(long, value_enum, default_value = "smooth")]
        ramp: RampArg,
    },
    /// Adiabatic phase error against the line integral for several total times.
    AdiabaticSweep {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, value_enum, default_value = "plus")]
        branch: BranchArg,
        #[command(flatten)]
        circle: CircleArgs,
        #[arg(long = "T-list", value_delimiter = ',', value_parser = parse_number, default_value = "250,500,1000,2000")]
        times: Vec<f64>,
        #[arg(long, value_enum, default_value = "smooth")]
        ramp: RampArg,
        #[command(flatten)]
        out: OutDirArgs,
    },
    /// Runs every built-in check against its closed form.
    ReproducePaper {
        /// Grid step of the string scans.
        #[arg(long, default_value_t = 0.02)]
        grid_step: f64,
        /// Total time of the adiabatic check.
        #[arg(long = "T", default_value_t = 2000.0)]
        total_time: f64,
    },
    /// Writes string polylines, density cells and endpoint lists for a figure.
    ExportFigure {
        #[arg(long, value_enum)]
        which: FigureArg,
        #[arg(
            long,
            default_value = "x=-1:1:0.02,y=-1:1:0.02,z=-1:1:0.02",
            allow_hyphen_values = true
        )]
        grid: String,
        #[command(flatten)]
        out: OutDirArgs,
    },
}

#[derive(clap::ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum MethodArg {
    /// Line integral of the connection.
    Analytic,
    Wilson,
    Flux,
    All,
}

#[derive(clap::ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum CapArg {
    Upper,
    Lower,
}

#[derive(clap::ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum SideArg {
    PlusY,
    MinusY,
    Both,
}

#[derive(clap::ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum RampArg {
    Linear,
    Smooth,
}

#[derive(clap::ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum FigureArg {
    Fig1,
    Fig2,
    Fig3a,
    Fig3b,
}

/// Failure of a subcommand after argument parsing.
#[derive(Debug)]
pub enum Failure {
    Library(Error),
    Io(PathBuf, std::io::Error),
    /// The run completed but some checks exceeded their tolerance.
    Checks(Box<ResultEnvelope>, String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Library(e)
    }
}

/// Parses `argv`, runs the subcommand, prints the envelope and returns the
/// exit status.
pub fn run<I, T>(argv: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { 0 };
        }
    };
    let name = command_name(&cli.command);
    match commands::execute(&cli.command) {
        Ok((envelope, summary)) => {
            emit(&envelope);
            if !cli.json_only {
                eprintln!("{summary}");
            }
            0
        }
        Err(Failure::Checks(envelope, summary)) => {
            emit(&envelope);
            if !cli.json_only {
                eprintln!("{summary}");
            }
            EXIT_FAILURE
        }
        Err(failure) => {
            let (code, message, status) = match &failure {
                Failure::Library(e) => (
                    e.code(),
                    e.to_string(),
                    if e.is_domain() { EXIT_DOMAIN } else { EXIT_USAGE },
                ),
                Failure::Io(path, e) => ("io_error", format!("{}: {e}", path.display()), EXIT_FAILURE),
                Failure::Checks(..) => unreachable!(),
            };
            let mut envelope = ResultEnvelope::new(name);
            envelope.outputs = json!({ "error": { "code": code, "message": message } });
            emit(&envelope);
            eprintln!("error [{code}]: {message}");
            status
        }
    }
}

/// Writes the envelope to standard output; a closed pipe is not an error.
fn emit(envelope: &ResultEnvelope) {
    use std::io::Write;
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{}", envelope.to_json()).and_then(|_| out.flush());
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Eigen { .. } => "eigen",
        Command::Strings { .. } => "strings",
        Command::Connection { .. } => "connection",
        Command::Curvature { .. } => "curvature",
        Command::Charge { .. } => "charge",
        Command::LoopPhase { .. } => "loop-phase",
        Command::PhaseMap { .. } => "phase-map",
        Command::DegeneratePath { .. } => "degenerate-path",
        Command::Adiabatic { .. } => "adiabatic",
        Command::AdiabaticSweep { .. } => "adiabatic-sweep",
        Command::ReproducePaper { .. } => "reproduce-paper",
        Command::ExportFigure { .. } => "export-figure",
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn unknown_subcommand_is_a_usage_error() {
        assert_eq!(run(["dirac-phase", "no-such-command"]), EXIT_USAGE);
        assert_eq!(run(["dirac-phase", "eigen", "--at", "0,0"]), EXIT_USAGE);
    }
}
