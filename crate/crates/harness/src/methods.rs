//! Turning a [`MethodSpec`] into something that maps a dataset to intervals.

use anyhow::Result;

use cheapboot::baselines::{
    batch_means_estimator, delta_estimator, higrad_interval, online_bootstrap_interval,
};
use cheapboot::cheap::{cofb, conb};
use cheapboot::problems::{LeastSquares, Logistic, Objective, ProblemKind};
use cheapboot::{Dataset64, IntervalSet64, StepSchedule64, Vector64};

use crate::config::{ExperimentConfig, MethodSpec};

/// Anything that turns one trial's dataset into per-coordinate intervals.
/// `seed` is the trial's own method seed.
pub trait IntervalMethod: Sync {
    fn intervals(&self, data: &Dataset64, seed: u64) -> Result<IntervalSet64>;
}

/// A library method configured from an [`ExperimentConfig`].
#[derive(Debug, Clone)]
pub struct ConfiguredMethod {
    spec: MethodSpec,
    problem: ProblemKind,
    schedule: StepSchedule64,
    level: f64,
    x0: Vector64,
}

impl ConfiguredMethod {
    pub fn new(config: &ExperimentConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            spec: config.method.clone(),
            problem: config.problem,
            schedule: config.schedule()?,
            level: config.level,
            x0: Vector64::zeros(config.d),
        })
    }

    fn run<O: Objective<f64>>(&self, obj: &O, data: &Dataset64, seed: u64) -> Result<IntervalSet64> {
        let (sched, x0, level) = (&self.schedule, &self.x0, self.level);
        let iv = match &self.spec {
            MethodSpec::Cofb { replicates, mode } => {
                cofb(obj, data, sched, x0, *replicates, *mode, level, seed)?
            }
            MethodSpec::Conb { replicates } => conb(obj, data, sched, x0, *replicates, level, seed)?,
            MethodSpec::Delta => delta_estimator(obj, data, sched, x0, level)?,
            MethodSpec::BatchMeans { .. } => {
                let m = self.spec.batch_count(data.len()).expect("batch means");
                batch_means_estimator(obj, data, data.len(), sched, x0, m, level)?
            }
            MethodSpec::OnlineBootstrap { replicates } => {
                online_bootstrap_interval(obj, data, sched, x0, *replicates, level, seed)?
            }
            MethodSpec::HiGrad { .. } => {
                let arch = self.spec.higrad_architecture(data.len())?.expect("higrad");
                higrad_interval(obj, data, sched, x0, &arch, level)?
            }
        };
        Ok(iv)
    }
}

impl IntervalMethod for ConfiguredMethod {
    fn intervals(&self, data: &Dataset64, seed: u64) -> Result<IntervalSet64> {
        let d = self.x0.len();
        match self.problem {
            ProblemKind::Linear => self.run(&LeastSquares { dim: d }, data, seed),
            ProblemKind::Logistic => self.run(&Logistic { dim: d }, data, seed),
        }
    }
}
