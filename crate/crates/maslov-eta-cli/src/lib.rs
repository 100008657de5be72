//! Scenario runner: parses versioned scenario files, builds the families,
//! runs the Maslov-index and eta-form tasks and renders reports.

pub mod error;
pub mod report;
pub mod run;
pub mod scenario;

pub use error::CliError;
pub use report::{Report, Timings};
pub use run::{run, run_sweep};
pub use scenario::Scenario;
