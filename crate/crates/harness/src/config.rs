//! Experiment cells and how they are assembled from a config file plus CLI
//! overrides.

use std::path::Path;

use anyhow::{bail, ensure, Context, Result};
use serde::{Deserialize, Serialize};

use cheapboot::baselines::{batch_layout, default_batch_count, HiGradArchitecture};
use cheapboot::engine::{OutputMode, StepSchedule};
use cheapboot::problems::{CovarianceFamily, ProblemKind};
use cheapboot::{MethodTag, StepSchedule64};

/// An interval method together with its tuning parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum MethodSpec {
    Cofb { replicates: usize, mode: OutputMode },
    Conb { replicates: usize },
    Delta,
    /// `batches = None` means `round(n^{1/4})`.
    BatchMeans { batches: Option<usize> },
    OnlineBootstrap { replicates: usize },
    /// `segments = None` means `n/7` per level.
    HiGrad {
        splits: Vec<usize>,
        segments: Option<Vec<usize>>,
    },
}

impl MethodSpec {
    /// Parses a CLI method name; `replicates` falls back to the usual count
    /// for the method (COfB 10, COnB 3, online bootstrap 100).
    pub fn parse(name: &str, replicates: Option<usize>) -> Result<Self> {
        let spec = match name {
            "cofb" | "cofb-asgd" => MethodSpec::Cofb {
                replicates: replicates.unwrap_or(10),
                mode: OutputMode::Asgd,
            },
            "cofb-sgd" => MethodSpec::Cofb {
                replicates: replicates.unwrap_or(10),
                mode: OutputMode::Sgd,
            },
            "conb" | "conb-asgd" => MethodSpec::Conb {
                replicates: replicates.unwrap_or(3),
            },
            "conb-sgd" => bail!("the online cheap bootstrap is only defined for averaged SGD output"),
            "delta" => MethodSpec::Delta,
            "bm" | "batch-means" => MethodSpec::BatchMeans { batches: replicates },
            "ob" | "online-bootstrap" => MethodSpec::OnlineBootstrap {
                replicates: replicates.unwrap_or(100),
            },
            "higrad" => MethodSpec::HiGrad {
                splits: vec![2, 2],
                segments: None,
            },
            other => bail!(
                "unknown method `{other}` (expected cofb-asgd, cofb-sgd, conb, delta, bm, ob, higrad)"
            ),
        };
        Ok(spec)
    }

    pub fn tag(&self) -> MethodTag {
        match self {
            MethodSpec::Cofb { mode: OutputMode::Asgd, .. } => MethodTag::CofbAsgd,
            MethodSpec::Cofb { mode: OutputMode::Sgd, .. } => MethodTag::CofbSgd,
            MethodSpec::Conb { .. } => MethodTag::Conb,
            MethodSpec::Delta => MethodTag::Delta,
            MethodSpec::BatchMeans { .. } => MethodTag::BatchMeans,
            MethodSpec::OnlineBootstrap { .. } => MethodTag::OnlineBootstrap,
            MethodSpec::HiGrad { .. } => MethodTag::HiGrad,
        }
    }

    pub fn name(&self) -> &'static str {
        self.tag().as_str()
    }

    /// The bootstrap replicate count `B`, for the methods that have one.
    pub fn replicates(&self) -> Option<usize> {
        match self {
            MethodSpec::Cofb { replicates, .. }
            | MethodSpec::Conb { replicates }
            | MethodSpec::OnlineBootstrap { replicates } => Some(*replicates),
            _ => None,
        }
    }

    /// Human label such as `cofb-asgd B=10`.
    pub fn label(&self) -> String {
        match self.replicates() {
            Some(b) => format!("{} B={b}", self.name()),
            None => self.name().to_string(),
        }
    }

    pub fn is_sgd(&self) -> bool {
        matches!(self, MethodSpec::Cofb { mode: OutputMode::Sgd, .. })
    }

    pub fn higrad_architecture(&self, n: usize) -> Result<Option<HiGradArchitecture>> {
        let MethodSpec::HiGrad { splits, segments } = self else {
            return Ok(None);
        };
        let segments = match segments {
            Some(s) => s.clone(),
            None => vec![n / (higrad_leaf_weight(splits)); splits.len() + 1],
        };
        Ok(Some(HiGradArchitecture::new(splits.clone(), segments)?))
    }

    pub fn batch_count(&self, n: usize) -> Option<usize> {
        match self {
            MethodSpec::BatchMeans { batches } => Some(batches.unwrap_or_else(|| default_batch_count(n))),
            _ => None,
        }
    }
}

/// `1 + B_1 + B_1 B_2 + ...`: with equal segment lengths `n/w` the tree
/// uses at most `n` observations. For `(2, 2)` this is 7.
fn higrad_leaf_weight(splits: &[usize]) -> usize {
    let mut width = 1;
    let mut total = 1;
    for b in splits {
        width *= b;
        total += width;
    }
    total
}

/// One experiment cell: a problem, a method, and a Monte Carlo budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub problem: ProblemKind,
    pub d: usize,
    pub n: usize,
    #[serde(with = "family_name")]
    pub sigma: CovarianceFamily,
    /// Response noise sd (linear regression only).
    pub noise_sd: f64,
    pub method: MethodSpec,
    pub eta: f64,
    /// Step decay for averaged methods. Last-iterate COfB always uses
    /// `η_t = η / t`; see [`ExperimentConfig::effective_alpha`].
    pub alpha: f64,
    pub level: f64,
    pub trials: usize,
    pub seed: u64,
}

impl ExperimentConfig {
    /// Linear regression, `d = 5`, identity covariance, `n = 10⁴`, COfB-ASGD
    /// with `B = 10`, 300 trials at level 0.95.
    pub fn desk_default() -> Self {
        Self {
            problem: ProblemKind::Linear,
            d: 5,
            n: 10_000,
            sigma: CovarianceFamily::Identity,
            noise_sd: 1.0,
            method: MethodSpec::Cofb {
                replicates: 10,
                mode: OutputMode::Asgd,
            },
            eta: 0.5,
            alpha: 0.501,
            level: 0.95,
            trials: 300,
            seed: 0,
        }
    }

    /// The decay exponent the run actually uses.
    pub fn effective_alpha(&self) -> f64 {
        if self.method.is_sgd() {
            1.0
        } else {
            self.alpha
        }
    }

    pub fn schedule(&self) -> Result<StepSchedule64> {
        Ok(StepSchedule::new(self.eta, self.effective_alpha())?)
    }

    /// Checks everything that can be checked without running a trial.
    pub fn validate(&self) -> Result<()> {
        ensure!(self.trials >= 1, "trials must be at least 1");
        ensure!(self.level > 0.0 && self.level < 1.0, "level must lie in (0, 1), got {}", self.level);
        ensure!(self.d >= 2, "d must be at least 2, got {}", self.d);
        ensure!(self.n >= 1, "n must be at least 1");
        ensure!(
            self.noise_sd >= 0.0 && self.noise_sd.is_finite(),
            "noise_sd must be finite and non-negative"
        );
        self.schedule()?;
        match &self.method {
            MethodSpec::Cofb { replicates, .. } => {
                ensure!(*replicates >= 2, "COfB needs B >= 2, got {replicates}")
            }
            MethodSpec::Conb { replicates } | MethodSpec::OnlineBootstrap { replicates } => {
                ensure!(*replicates >= 1, "{} needs B >= 1", self.method.name())
            }
            MethodSpec::Delta => {}
            MethodSpec::BatchMeans { .. } => {
                let m = self.method.batch_count(self.n).expect("batch means");
                batch_layout(self.n, self.alpha, m)
                    .with_context(|| format!("batch means with n = {}, M = {m}", self.n))?;
            }
            MethodSpec::HiGrad { .. } => {
                let arch = self.method.higrad_architecture(self.n)?.expect("higrad");
                ensure!(
                    arch.consumption() <= self.n,
                    "HiGrad tree needs {} observations, n = {}",
                    arch.consumption(),
                    self.n
                );
            }
        }
        Ok(())
    }
}

pub(crate) mod family_name {
    use cheapboot::problems::CovarianceFamily;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(f: &CovarianceFamily, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(f.name())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<CovarianceFamily, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A config file or a set of CLI flags: every field optional.
///
/// ```toml
/// problem = "linear"
/// method = "cofb-asgd"
/// B = 10
/// d = 5
/// n = 10000
/// sigma = "toeplitz"
/// eta = 0.5
/// trials = 300
/// seed = 7
/// ```
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartialConfig {
    pub problem: Option<String>,
    pub method: Option<String>,
    #[serde(rename = "B")]
    pub replicates: Option<usize>,
    pub d: Option<usize>,
    pub n: Option<usize>,
    pub sigma: Option<String>,
    pub noise_sd: Option<f64>,
    pub eta: Option<f64>,
    pub alpha: Option<f64>,
    pub level: Option<f64>,
    pub trials: Option<usize>,
    pub seed: Option<u64>,
}

impl PartialConfig {
    pub fn from_toml_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    /// Fields of `self` win over `base`.
    pub fn over(self, base: PartialConfig) -> PartialConfig {
        PartialConfig {
            problem: self.problem.or(base.problem),
            method: self.method.or(base.method),
            replicates: self.replicates.or(base.replicates),
            d: self.d.or(base.d),
            n: self.n.or(base.n),
            sigma: self.sigma.or(base.sigma),
            noise_sd: self.noise_sd.or(base.noise_sd),
            eta: self.eta.or(base.eta),
            alpha: self.alpha.or(base.alpha),
            level: self.level.or(base.level),
            trials: self.trials.or(base.trials),
            seed: self.seed.or(base.seed),
        }
    }

    /// Fills gaps from [`ExperimentConfig::desk_default`] and validates.
    pub fn resolve(&self) -> Result<ExperimentConfig> {
        let def = ExperimentConfig::desk_default();
        let method = match &self.method {
            Some(m) => MethodSpec::parse(m, self.replicates)?,
            None => match self.replicates {
                Some(b) => MethodSpec::parse("cofb-asgd", Some(b))?,
                None => def.method.clone(),
            },
        };
        let cfg = ExperimentConfig {
            problem: match &self.problem {
                Some(p) => p.parse()?,
                None => def.problem,
            },
            d: self.d.unwrap_or(def.d),
            n: self.n.unwrap_or(def.n),
            sigma: match &self.sigma {
                Some(s) => s.parse()?,
                None => def.sigma,
            },
            noise_sd: self.noise_sd.unwrap_or(def.noise_sd),
            method,
            eta: self.eta.unwrap_or(def.eta),
            alpha: self.alpha.unwrap_or(def.alpha),
            level: self.level.unwrap_or(def.level),
            trials: self.trials.unwrap_or(def.trials),
            seed: self.seed.unwrap_or(def.seed),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}
