//! Monte Carlo coverage experiments for the `cheapboot` interval methods.
//!
//! A cell ([`ExperimentConfig`]) fixes a problem, a method and a trial budget;
//! [`run_cell`] draws a fresh dataset per trial, builds intervals and scores
//! them against the known truth. Trials run on the rayon pool and are reduced
//! in trial order, so a report depends only on the config.

pub mod cell;
pub mod config;
pub mod methods;
pub mod report;
pub mod selftest;
pub mod sweep;
pub mod table;

pub use cell::{run_cell, run_cell_with, ExperimentReport};
pub use config::{ExperimentConfig, MethodSpec, PartialConfig};
pub use methods::{ConfiguredMethod, IntervalMethod};
pub use report::{emit_report, parse_report, Format, ReportRecord};
pub use sweep::sensitivity_sweep;
