//! Scenario files, the seeded runner, reports, and complexity fits.

pub mod builtin;
pub mod fit;
pub mod generate;
pub mod rng;
pub mod runner;
pub mod scenario;

pub use runner::{
    betti_report, compare, run_scenario, run_until_crash, Audit, CrashState, CompareReport, RunError, RunOptions, RunReport, TxnRow, CSV_HEADER,
};
pub use scenario::{ParseError, Protocol, Scenario};
