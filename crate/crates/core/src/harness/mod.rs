//! Experiment front end: run configuration files, ledger persistence,
//! scheme/seed sweeps, static report plots, and the self-test suite.

mod config;
mod ledger;
mod report;
mod selftest;
mod sweep;

pub use config::{ConfigError, FileConfig};
pub use ledger::{ledger_from_csv, ledger_to_csv, read_run, write_run, LedgerError, RunMeta, LEDGER_SCHEMA};
pub use report::{build_report, gaussian_smooth, Report, ReportError};
pub use selftest::{run_selftest, CheckResult};
pub use sweep::{run_sweep, summary_to_csv, CellResult, SchemeSummary, SweepError, SweepSummary};
