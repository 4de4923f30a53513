//! The coverage/length grid: every comparison method on every covariance
//! family.

use std::fmt::Write as _;

use anyhow::{anyhow, bail, Context, Result};

use cheapboot::engine::OutputMode;
use cheapboot::problems::{CovarianceFamily, ProblemKind};

use crate::cell::{check_sgd_precondition, run_cell, ExperimentReport};
use crate::config::{ExperimentConfig, MethodSpec};

const DEFAULTS: &str = include_str!("../defaults.toml");

pub const FAMILIES: [CovarianceFamily; 3] = [
    CovarianceFamily::Identity,
    CovarianceFamily::toeplitz(),
    CovarianceFamily::equicorrelation(),
];

/// Sample size, trial count and dimensions of a grid run.
#[derive(Debug, Clone, PartialEq)]
pub struct TableScale {
    pub n: usize,
    pub trials: usize,
    pub dims: Vec<usize>,
}

impl TableScale {
    /// `n = 10⁴`, 300 trials, `d = 5`.
    pub fn desk() -> Self {
        Self {
            n: 10_000,
            trials: 300,
            dims: vec![5],
        }
    }

    /// `n = 10⁵`, 500 trials, `d ∈ {5, 20, 200}`.
    pub fn full() -> Self {
        Self {
            n: 100_000,
            trials: 500,
            dims: vec![5, 20, 200],
        }
    }
}

/// Row order of the grid.
pub fn table_methods() -> Vec<MethodSpec> {
    let mut m = vec![
        MethodSpec::Delta,
        MethodSpec::BatchMeans { batches: None },
        MethodSpec::OnlineBootstrap { replicates: 10 },
        MethodSpec::OnlineBootstrap { replicates: 100 },
        MethodSpec::HiGrad {
            splits: vec![2, 2],
            segments: None,
        },
    ];
    for mode in [OutputMode::Asgd, OutputMode::Sgd] {
        for b in [3, 5, 10] {
            m.push(MethodSpec::Cofb { replicates: b, mode });
        }
    }
    for b in [3, 5, 10] {
        m.push(MethodSpec::Conb { replicates: b });
    }
    m
}

/// Pinned initial step sizes, from the bundled `defaults.toml` or a file of
/// the same shape.
#[derive(Debug, Clone)]
pub struct EtaDefaults {
    table: toml::Table,
}

impl EtaDefaults {
    pub fn bundled() -> Self {
        Self::parse(DEFAULTS).expect("bundled defaults.toml parses")
    }

    pub fn parse(text: &str) -> Result<Self> {
        Ok(Self {
            table: toml::from_str(text).context("parsing step-size defaults")?,
        })
    }

    pub fn eta(&self, problem: ProblemKind, method: &MethodSpec, family: CovarianceFamily) -> Result<f64> {
        let entry = self
            .table
            .get(problem.as_str())
            .and_then(|t| t.get(method.name()))
            .ok_or_else(|| anyhow!("no step size for {problem} / {}", method.name()))?;
        let value = match entry {
            toml::Value::Table(per_family) => per_family
                .get(family.name())
                .ok_or_else(|| anyhow!("no step size for {problem} / {} / {family}", method.name()))?,
            v => v,
        };
        match value {
            toml::Value::Float(x) => Ok(*x),
            toml::Value::Integer(k) => Ok(*k as f64),
            other => bail!("step size must be a number, got {other}"),
        }
    }
}

/// All cells of the grid, in (d, method, family) order.
pub fn table_grid(
    problem: ProblemKind,
    scale: &TableScale,
    methods: &[MethodSpec],
    defaults: &EtaDefaults,
    seed: u64,
    level: f64,
) -> Result<Vec<ExperimentConfig>> {
    let mut out = Vec::new();
    for &d in &scale.dims {
        for m in methods {
            for fam in FAMILIES {
                out.push(ExperimentConfig {
                    problem,
                    d,
                    n: scale.n,
                    sigma: fam,
                    noise_sd: 1.0,
                    method: m.clone(),
                    eta: defaults.eta(problem, m, fam)?,
                    alpha: 0.501,
                    level,
                    trials: scale.trials,
                    seed,
                });
            }
        }
    }
    for c in &out {
        c.validate()?;
        check_sgd_precondition(c)?;
    }
    Ok(out)
}

pub fn run_table(configs: &[ExperimentConfig]) -> Result<Vec<ExperimentReport>> {
    configs.iter().map(run_cell).collect()
}

/// Text rendering: one row per method, coverage (%) and length (×10⁻²) per
/// family, one block per dimension.
pub fn format_table(reports: &[ExperimentReport]) -> String {
    let mut out = String::new();
    let mut dims: Vec<usize> = reports.iter().map(|r| r.config.d).collect();
    dims.dedup();
    for d in dims {
        let block: Vec<&ExperimentReport> = reports.iter().filter(|r| r.config.d == d).collect();
        let Some(first) = block.first() else { continue };
        let _ = writeln!(out, "{} d={} n={} trials={}", first.config.problem, d, first.config.n, first.config.trials);
        let _ = write!(out, "{:<16}", "method");
        for fam in FAMILIES {
            let _ = write!(out, " | {:^24}", fam.name());
        }
        let _ = writeln!(out);
        let _ = write!(out, "{:<16}", "");
        for _ in FAMILIES {
            let _ = write!(out, " | {:>14} {:>9}", "cov % (se)", "len e-2");
        }
        let _ = writeln!(out);
        let mut labels: Vec<String> = Vec::new();
        for r in &block {
            let l = r.config.method.label();
            if !labels.contains(&l) {
                labels.push(l);
            }
        }
        for label in labels {
            let _ = write!(out, "{label:<16}");
            for fam in FAMILIES {
                match block.iter().find(|r| r.config.method.label() == label && r.config.sigma == fam) {
                    Some(r) => {
                        let _ = write!(
                            out,
                            " | {:>7.2} ({:>4.2}) {:>9.3}",
                            100.0 * r.coverage_mean,
                            100.0 * r.coverage_se,
                            100.0 * r.mean_length
                        );
                    }
                    None => {
                        let _ = write!(out, " | {:>24}", "-");
                    }
                }
            }
            let _ = writeln!(out);
        }
        let _ = writeln!(out);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_defaults_cover_the_grid() {
        let defaults = EtaDefaults::bundled();
        for problem in [ProblemKind::Linear, ProblemKind::Logistic] {
            for m in table_methods() {
                for fam in FAMILIES {
                    let eta = defaults.eta(problem, &m, fam).unwrap();
                    assert!(eta > 0.0);
                }
            }
        }
    }

    #[test]
    fn grid_shape() {
        let methods = table_methods();
        assert_eq!(methods.len(), 14);
        let grid = table_grid(
            ProblemKind::Linear,
            &TableScale::desk(),
            &methods,
            &EtaDefaults::bundled(),
            1,
            0.95,
        )
        .unwrap();
        assert_eq!(grid.len(), 3 * 14);
        let full = TableScale::full();
        assert_eq!(full.dims, vec![5, 20, 200]);
    }

    #[test]
    fn per_family_entries() {
        let d = EtaDefaults::parse("[linear]\ncofb-sgd = { identity = 1, toeplitz = 2.5 }\n").unwrap();
        let m = MethodSpec::parse("cofb-sgd", None).unwrap();
        assert_eq!(d.eta(ProblemKind::Linear, &m, CovarianceFamily::toeplitz()).unwrap(), 2.5);
        assert_eq!(d.eta(ProblemKind::Linear, &m, CovarianceFamily::Identity).unwrap(), 1.0);
        assert!(d.eta(ProblemKind::Linear, &m, CovarianceFamily::equicorrelation()).is_err());
        assert!(d.eta(ProblemKind::Logistic, &m, CovarianceFamily::Identity).is_err());
    }
}
