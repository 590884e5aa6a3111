//! Experiment front end: configuration, verification suites and output files.

pub mod config;
pub mod output;
pub mod runs;
pub mod suites;

pub use config::{load_csv, DataSource, ExperimentConfig};
pub use output::{Check, ResultRecord};
pub use runs::{run_derivs, run_fit, run_optimize, run_scenario_gen, run_verify, VerifyOutcome};
pub use suites::{run_suite, SUITES};

use crate::error::Error;

/// Process exit status for a successful run.
pub const EXIT_OK: i32 = 0;
/// At least one verification record failed.
pub const EXIT_SUITE_FAILURE: i32 = 1;
/// Unreadable or invalid configuration or input data.
pub const EXIT_BAD_INPUT: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

/// Maps an error to the command-line exit status.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Numerical(_) | Error::Domain(_) | Error::Shape { .. } => EXIT_NUMERIC,
        Error::Config(_)
        | Error::Parse { .. }
        | Error::Io(_)
        | Error::Json(_)
        | Error::Csv(_)
        | Error::Precondition(_)
        | Error::Unsupported(_) => EXIT_BAD_INPUT,
    }
}
