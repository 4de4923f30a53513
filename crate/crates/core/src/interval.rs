//! Per-coordinate symmetric confidence intervals.

use std::fmt;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::{Error, Result, Scalar};

/// Which procedure produced an [`IntervalSet`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodTag {
    CofbAsgd,
    CofbSgd,
    Conb,
    Delta,
    BatchMeans,
    OnlineBootstrap,
    HiGrad,
    /// Anything not built by this crate (test stubs, external methods).
    External,
}

impl MethodTag {
    pub fn as_str(self) -> &'static str {
        match self {
            MethodTag::CofbAsgd => "cofb-asgd",
            MethodTag::CofbSgd => "cofb-sgd",
            MethodTag::Conb => "conb",
            MethodTag::Delta => "delta",
            MethodTag::BatchMeans => "bm",
            MethodTag::OnlineBootstrap => "ob",
            MethodTag::HiGrad => "higrad",
            MethodTag::External => "external",
        }
    }
}

impl fmt::Display for MethodTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Intervals `[center_i - hw_i, center_i + hw_i]`, one per coordinate.
///
/// Every method in the crate builds its half-widths as `critical * se_i`, so
/// both factors are kept: `standard_errors` is the per-coordinate spread
/// (`s_i` for the cheap bootstraps) and `critical` the Student-t or normal
/// quantile.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalSet<T: Scalar> {
    centers: DVector<T>,
    standard_errors: DVector<T>,
    half_widths: DVector<T>,
    critical: T,
    level: T,
    method: MethodTag,
    replicates: usize,
    n: usize,
}

impl<T: Scalar> IntervalSet<T> {
    /// Builds `centers ± critical * standard_errors`.
    ///
    /// Fails when the vectors disagree in length, a spread or the critical
    /// value is negative or NaN, or `level` is outside `(0, 1)`. Infinite
    /// spreads are allowed.
    pub fn new(
        centers: DVector<T>,
        standard_errors: DVector<T>,
        critical: T,
        level: T,
        method: MethodTag,
        replicates: usize,
        n: usize,
    ) -> Result<Self> {
        if centers.len() != standard_errors.len() {
            return Err(Error::Dimension(format!(
                "{} centers but {} standard errors",
                centers.len(),
                standard_errors.len()
            )));
        }
        check_level(level)?;
        if !(critical >= T::zero()) {
            return Err(Error::domain("critical value must be non-negative"));
        }
        if standard_errors.iter().any(|s| !(*s >= T::zero())) {
            return Err(Error::domain("standard errors must be non-negative"));
        }
        let half_widths = standard_errors.map(|s| {
            // 0 * inf would be NaN; a zero critical value still means zero width.
            if critical == T::zero() {
                T::zero()
            } else {
                critical * s
            }
        });
        Ok(Self {
            centers,
            standard_errors,
            half_widths,
            critical,
            level,
            method,
            replicates,
            n,
        })
    }

    pub fn dim(&self) -> usize {
        self.centers.len()
    }

    pub fn centers(&self) -> &DVector<T> {
        &self.centers
    }

    pub fn half_widths(&self) -> &DVector<T> {
        &self.half_widths
    }

    pub fn standard_errors(&self) -> &DVector<T> {
        &self.standard_errors
    }

    pub fn critical(&self) -> T {
        self.critical
    }

    /// Nominal coverage `1 - gamma`.
    pub fn level(&self) -> T {
        self.level
    }

    pub fn method(&self) -> MethodTag {
        self.method
    }

    /// `B` for bootstrap methods, thread count for HiGrad, batch count for
    /// batch means, 0 for the delta method.
    pub fn replicates(&self) -> usize {
        self.replicates
    }

    pub fn sample_size(&self) -> usize {
        self.n
    }

    pub fn lower(&self, i: usize) -> T {
        self.centers[i] - self.half_widths[i]
    }

    pub fn upper(&self, i: usize) -> T {
        self.centers[i] + self.half_widths[i]
    }

    /// Closed-interval membership of `value` in coordinate `i`.
    pub fn contains(&self, i: usize, value: T) -> bool {
        (value - self.centers[i]).abs() <= self.half_widths[i]
    }

    pub fn length(&self, i: usize) -> T {
        self.half_widths[i] + self.half_widths[i]
    }
}

pub(crate) fn check_level<T: Scalar>(level: T) -> Result<()> {
    if level > T::zero() && level < T::one() {
        Ok(())
    } else {
        Err(Error::domain(format!("level must lie in (0, 1), got {level}")))
    }
}
