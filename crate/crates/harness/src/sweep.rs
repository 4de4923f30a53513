//! Step-size sensitivity: one cell per initial step size.

use anyhow::{ensure, Result};
use log::warn;

use crate::cell::{run_cell, ExperimentReport};
use crate::config::ExperimentConfig;

/// The range the comparison tunes `η` over.
pub const TUNING_RANGE: (f64, f64) = (0.2, 0.7);

/// `0.2, 0.3, ..., 0.7`.
pub fn default_eta_grid() -> Vec<f64> {
    (2..=7).map(|k| k as f64 / 10.0).collect()
}

/// Runs `base` once per `η` in `eta_grid`, everything else fixed.
pub fn sensitivity_sweep(base: &ExperimentConfig, eta_grid: &[f64]) -> Result<Vec<ExperimentReport>> {
    ensure!(!eta_grid.is_empty(), "eta grid is empty");
    let configs: Vec<ExperimentConfig> = eta_grid
        .iter()
        .map(|&eta| ExperimentConfig {
            eta,
            ..base.clone()
        })
        .collect();
    for c in &configs {
        c.validate()?;
        if !(TUNING_RANGE.0..=TUNING_RANGE.1).contains(&c.eta) {
            warn!("eta = {} lies outside the usual tuning range [0.2, 0.7]", c.eta);
        }
    }
    configs.iter().map(run_cell).collect()
}
