//! Batch front-end: JSON problem documents in, JSON reports and CSV traces out.

pub mod error;
pub mod report;
pub mod run;
pub mod schema;

pub use error::CliError;
pub use report::{emit_csv, write_checkpoints, CheckResult, ReportDocument, Table};
pub use run::{run, Overrides};
pub use schema::{Check, Mode, ProblemDocument, SystemDoc};
