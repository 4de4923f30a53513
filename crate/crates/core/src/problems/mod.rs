//! Objectives and synthetic data for linear and logistic regression.
//!
//! Features are drawn from `N(0, Σ)` with `Σ` one of three [`CovarianceFamily`]
//! shapes, and responses follow a known coefficient vector `x*` so coverage of
//! an interval can be scored exactly.

mod generate;
pub mod io;
mod objective;

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::{Error, Result, Scalar};

pub use generate::{
    estimate_logistic_sandwich, gen_linear, gen_logistic, gen_logistic_with_truth,
    FeatureSampler,
};
pub use objective::{LeastSquares, Logistic, Objective};

/// One data point `ζ = (a, b)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation<T: Scalar> {
    pub features: DVector<T>,
    /// Real response for linear regression, `±1` label for logistic.
    pub response: T,
}

impl<T: Scalar> Observation<T> {
    pub fn new(features: DVector<T>, response: T) -> Self {
        Self { features, response }
    }

    pub fn dim(&self) -> usize {
        self.features.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProblemKind {
    Linear,
    Logistic,
}

impl ProblemKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ProblemKind::Linear => "linear",
            ProblemKind::Logistic => "logistic",
        }
    }
}

impl fmt::Display for ProblemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ProblemKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(ProblemKind::Linear),
            "logistic" => Ok(ProblemKind::Logistic),
            other => Err(Error::domain(format!("unknown problem kind `{other}`"))),
        }
    }
}

/// An indexed, finite sequence of observations.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T: Scalar> {
    kind: ProblemKind,
    dim: usize,
    observations: Vec<Observation<T>>,
}

impl<T: Scalar> Dataset<T> {
    /// Fails if any observation has the wrong dimension or, for logistic
    /// data, a label other than `±1`.
    pub fn new(kind: ProblemKind, dim: usize, observations: Vec<Observation<T>>) -> Result<Self> {
        for (i, o) in observations.iter().enumerate() {
            if o.dim() != dim {
                return Err(Error::Dimension(format!(
                    "observation {i} has {} features, expected {dim}",
                    o.dim()
                )));
            }
            if kind == ProblemKind::Logistic
                && o.response != T::one()
                && o.response != -T::one()
            {
                return Err(Error::domain(format!(
                    "observation {i}: logistic label must be -1 or +1, got {}",
                    o.response
                )));
            }
        }
        Ok(Self {
            kind,
            dim,
            observations,
        })
    }

    pub fn kind(&self) -> ProblemKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn get(&self, i: usize) -> Option<&Observation<T>> {
        self.observations.get(i)
    }

    pub fn observations(&self) -> &[Observation<T>] {
        &self.observations
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Observation<T>> {
        self.observations.iter()
    }

    /// A new dataset holding `self[indices[0]], self[indices[1]], ...`.
    pub fn select(&self, indices: &[usize]) -> Self {
        Self {
            kind: self.kind,
            dim: self.dim,
            observations: indices.iter().map(|&i| self.observations[i].clone()).collect(),
        }
    }
}

impl<'a, T: Scalar> IntoIterator for &'a Dataset<T> {
    type Item = &'a Observation<T>;
    type IntoIter = std::slice::Iter<'a, Observation<T>>;

    fn into_iter(self) -> Self::IntoIter {
        self.observations.iter()
    }
}

/// Covariance shape of the feature distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CovarianceFamily {
    Identity,
    /// `Σ_ij = rho^|i-j|`.
    Toeplitz { rho: f64 },
    /// `Σ_ii = 1`, `Σ_ij = rho` off the diagonal.
    Equicorrelation { rho: f64 },
}

impl CovarianceFamily {
    pub const fn toeplitz() -> Self {
        CovarianceFamily::Toeplitz { rho: 0.5 }
    }

    pub const fn equicorrelation() -> Self {
        CovarianceFamily::Equicorrelation { rho: 0.2 }
    }

    pub fn name(&self) -> &'static str {
        match self {
            CovarianceFamily::Identity => "identity",
            CovarianceFamily::Toeplitz { .. } => "toeplitz",
            CovarianceFamily::Equicorrelation { .. } => "equicorr",
        }
    }
}

impl fmt::Display for CovarianceFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CovarianceFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "identity" => Ok(CovarianceFamily::Identity),
            "toeplitz" => Ok(CovarianceFamily::toeplitz()),
            "equicorr" | "equicorrelation" => Ok(CovarianceFamily::equicorrelation()),
            other => Err(Error::domain(format!("unknown covariance family `{other}`"))),
        }
    }
}

pub fn make_sigma<T: Scalar>(family: CovarianceFamily, d: usize) -> DMatrix<T> {
    DMatrix::from_fn(d, d, |i, j| match family {
        CovarianceFamily::Identity => {
            if i == j {
                T::one()
            } else {
                T::zero()
            }
        }
        CovarianceFamily::Toeplitz { rho } => T::of(rho.powi(i.abs_diff(j) as i32)),
        CovarianceFamily::Equicorrelation { rho } => {
            if i == j {
                T::one()
            } else {
                T::of(rho)
            }
        }
    })
}

/// `x* = [0, 1/(d-1), 2/(d-1), ..., 1]`.
pub fn make_x_star<T: Scalar>(d: usize) -> Result<DVector<T>> {
    if d < 2 {
        return Err(Error::Dimension(format!("x* needs d >= 2, got {d}")));
    }
    let denom = T::of_usize(d - 1);
    Ok(DVector::from_fn(d, |i, _| T::of_usize(i) / denom))
}

/// Known truth for a generated problem.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth<T: Scalar> {
    pub x_star: DVector<T>,
    /// Feature covariance `Σ`.
    pub sigma: DMatrix<T>,
    /// `G = ∇²H(x*)`; `None` when only a Monte Carlo estimate exists.
    pub g: Option<DMatrix<T>>,
    /// `S = E[∇h ∇hᵀ]` at `x*`; `None` when only a Monte Carlo estimate exists.
    pub s: Option<DMatrix<T>>,
}

impl<T: Scalar> GroundTruth<T> {
    pub fn dim(&self) -> usize {
        self.x_star.len()
    }
}
