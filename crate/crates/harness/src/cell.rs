//! Monte Carlo execution of one experiment cell.

use std::time::Instant;

use anyhow::{Context, Result};
use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use cheapboot::problems::{
    estimate_logistic_sandwich, gen_linear, gen_logistic, make_sigma, make_x_star, ProblemKind,
};
use cheapboot::rng::{derive_seed, derive_stream};
use cheapboot::{Dataset64, GroundTruth64, IntervalSet64, Matrix64};

use crate::config::ExperimentConfig;
use crate::methods::{ConfiguredMethod, IntervalMethod};

const PURPOSE_DATA: u64 = 0;
const PURPOSE_METHOD: u64 = 1;
/// Stream label for the Monte Carlo curvature estimate (not a trial index).
const LABEL_CURVATURE: u64 = u64::MAX;
const CURVATURE_DRAWS: usize = 200_000;

/// Aggregated result of a cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    /// Pooled over coordinates and trials.
    pub coverage_mean: f64,
    /// `sqrt(p (1 - p) / (trials d))`.
    pub coverage_se: f64,
    /// Mean of `2 hw_i` over coordinates and trials.
    pub mean_length: f64,
    /// Sd of the per-trial mean lengths over `sqrt(trials)`; 0 for one trial.
    pub length_se: f64,
    pub per_coordinate_coverage: Vec<f64>,
    pub wall_time_s: f64,
}

/// Fresh dataset for `trial`, from the stream `(seed, trial, data)`.
pub fn trial_data(config: &ExperimentConfig, trial: usize) -> Result<(Dataset64, GroundTruth64)> {
    let mut rng = derive_stream(config.seed, &[trial as u64, PURPOSE_DATA]);
    let out = match config.problem {
        ProblemKind::Linear => gen_linear(config.n, config.d, config.sigma, config.noise_sd, &mut rng)?,
        ProblemKind::Logistic => gen_logistic(config.n, config.d, config.sigma, &mut rng)?,
    };
    Ok(out)
}

/// Seed handed to the interval method in `trial`.
pub fn trial_method_seed(config: &ExperimentConfig, trial: usize) -> u64 {
    derive_seed(config.seed, &[trial as u64, PURPOSE_METHOD])
}

/// `G = ∇²H(x*)`: exact for linear regression, a seeded Monte Carlo
/// estimate for logistic regression.
pub fn curvature(config: &ExperimentConfig) -> Result<Matrix64> {
    Ok(match config.problem {
        ProblemKind::Linear => make_sigma(config.sigma, config.d),
        ProblemKind::Logistic => {
            let x_star = make_x_star(config.d)?;
            let mut rng = derive_stream(config.seed, &[LABEL_CURVATURE]);
            estimate_logistic_sandwich(&x_star, config.sigma, CURVATURE_DRAWS, &mut rng)?.0
        }
    })
}

/// For last-iterate SGD with `η_t = η/t`, the limit theory needs `η l > 1/2`
/// with `l` the smallest eigenvalue of `G`. Returns `η l`.
pub fn check_sgd_precondition(config: &ExperimentConfig) -> Result<Option<f64>> {
    if !config.method.is_sgd() {
        return Ok(None);
    }
    let g = curvature(config)?;
    let l = g.symmetric_eigenvalues().min();
    let eta_l = config.eta * l;
    if eta_l <= 0.5 {
        warn!(
            "eta * l = {eta_l:.3} <= 1/2 (eta = {}, smallest curvature {l:.4}); last-iterate SGD intervals may not be valid",
            config.eta
        );
    }
    Ok(Some(eta_l))
}

/// Runs the configured library method for every trial.
pub fn run_cell(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    check_sgd_precondition(config)?;
    let method = ConfiguredMethod::new(config)?;
    run_cell_with(config, &method)
}

/// Runs `method` for every trial of `config` in the current rayon pool.
///
/// Per-trial results are reduced in trial order, so the report is the same
/// for any worker count.
pub fn run_cell_with<M: IntervalMethod + ?Sized>(
    config: &ExperimentConfig,
    method: &M,
) -> Result<ExperimentReport> {
    let start = Instant::now();
    let per_trial = trial_intervals(config, method)?;
    let x_star = make_x_star::<f64>(config.d)?;
    let d = config.d;
    let mut covered = vec![0usize; d];
    let mut trial_lengths = Vec::with_capacity(per_trial.len());
    for iv in &per_trial {
        let mut len = 0.0;
        for i in 0..d {
            if iv.contains(i, x_star[i]) {
                covered[i] += 1;
            }
            len += iv.length(i);
        }
        trial_lengths.push(len / d as f64);
    }
    let trials = per_trial.len() as f64;
    let total: usize = covered.iter().sum();
    let p = total as f64 / (trials * d as f64);
    let mean_length = trial_lengths.iter().sum::<f64>() / trials;
    let length_se = if per_trial.len() > 1 {
        let ss: f64 = trial_lengths.iter().map(|l| (l - mean_length).powi(2)).sum();
        (ss / (trials - 1.0)).sqrt() / trials.sqrt()
    } else {
        0.0
    };
    let report = ExperimentReport {
        config: config.clone(),
        coverage_mean: p,
        coverage_se: (p * (1.0 - p) / (trials * d as f64)).sqrt(),
        mean_length,
        length_se,
        per_coordinate_coverage: covered.iter().map(|&c| c as f64 / trials).collect(),
        wall_time_s: start.elapsed().as_secs_f64(),
    };
    info!(
        "{} {} d={} n={} {}: coverage {:.4} ± {:.4}, length {:.4e} ({:.1}s)",
        config.problem,
        config.method.label(),
        config.d,
        config.n,
        config.sigma,
        report.coverage_mean,
        report.coverage_se,
        report.mean_length,
        report.wall_time_s
    );
    Ok(report)
}

/// The interval set of every trial, in trial order.
pub fn trial_intervals<M: IntervalMethod + ?Sized>(
    config: &ExperimentConfig,
    method: &M,
) -> Result<Vec<IntervalSet64>> {
    (0..config.trials)
        .into_par_iter()
        .map(|trial| {
            let (data, _) = trial_data(config, trial)?;
            method
                .intervals(&data, trial_method_seed(config, trial))
                .with_context(|| format!("trial {trial} of {}", config.method.label()))
        })
        .collect()
}
