//! Config-driven experiment runner behind the `rwrl` binary.

pub mod commands;
pub mod config;
pub mod report;

pub use commands::{cmd_evaluate, cmd_full, cmd_generate_data, cmd_train, load_config, Overrides};
pub use config::SuiteConfig;
pub use report::MetricsReport;

use crate::error::Error;

/// Process exit code for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) => 2,
        Error::Data(_) | Error::Json(_) => 3,
        Error::MissingArtifact(_) => 4,
        _ => 1,
    }
}
