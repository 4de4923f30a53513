//! Quantiles, replicate spreads and closed-form asymptotic covariances.
//!
//! Student-t quantiles are found by inverting the CDF, written through the
//! regularized incomplete beta function, with a bracketed Newton iteration.
//! The standard normal uses the same inversion on the incomplete gamma
//! representation of its tail.

mod covariance;
pub mod special;

pub use covariance::{
    asgd_asymptotic_cov, sgd_asymptotic_cov, AsymptoticCovariance, SgdAsymptoticCovariance,
};

use crate::{Error, Result, Scalar};

/// Reference distribution for a pivot or a normal-theory interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Distribution {
    StudentT { df: u32 },
    StandardNormal,
}

impl Distribution {
    pub fn student_t(df: u32) -> Result<Self> {
        if df == 0 {
            return Err(Error::domain("student-t needs df >= 1"));
        }
        Ok(Distribution::StudentT { df })
    }

    pub fn cdf<T: Scalar>(&self, x: T) -> T {
        if x >= T::zero() {
            T::one() - self.upper_tail(x)
        } else {
            self.upper_tail(-x)
        }
    }

    /// `P(X > x)`, evaluated without cancellation for large `x`.
    pub fn upper_tail<T: Scalar>(&self, x: T) -> T {
        let half = T::of(0.5);
        if x < T::zero() {
            return T::one() - self.upper_tail(-x);
        }
        match *self {
            Distribution::StudentT { df } => {
                let v = T::of(df as f64);
                let x2 = x * x;
                if x2 < v {
                    let w = x2 / (v + x2);
                    half - half * special::inc_beta(half, v * half, w)
                } else {
                    let z = v / (v + x2);
                    half * special::inc_beta(v * half, half, z)
                }
            }
            Distribution::StandardNormal => half * special::inc_gamma_upper(half, x * x * half),
        }
    }

    pub fn pdf<T: Scalar>(&self, x: T) -> T {
        let half = T::of(0.5);
        match *self {
            Distribution::StudentT { df } => {
                let v = T::of(df as f64);
                let one = T::one();
                (special::ln_gamma((v + one) * half)
                    - special::ln_gamma(v * half)
                    - half * (v * T::pi()).ln()
                    - (v + one) * half * (x * x / v).ln_1p())
                .exp()
            }
            Distribution::StandardNormal => (-half * x * x).exp() / T::two_pi().sqrt(),
        }
    }
}

/// A quantile request: distribution plus probability in `(0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantileSpec<T> {
    pub distribution: Distribution,
    pub probability: T,
}

impl<T: Scalar> QuantileSpec<T> {
    pub fn new(distribution: Distribution, probability: T) -> Result<Self> {
        let spec = Self {
            distribution,
            probability,
        };
        spec.validate()?;
        Ok(spec)
    }

    fn validate(&self) -> Result<()> {
        if let Distribution::StudentT { df: 0 } = self.distribution {
            return Err(Error::domain("student-t needs df >= 1"));
        }
        if !(self.probability > T::zero() && self.probability < T::one()) {
            return Err(Error::domain(format!(
                "probability must lie in (0, 1), got {}",
                self.probability
            )));
        }
        Ok(())
    }
}

/// Returns `q` with `CDF(q) = probability`.
pub fn quantile<T: Scalar>(spec: QuantileSpec<T>) -> Result<T> {
    spec.validate()?;
    let p = spec.probability;
    let half = T::of(0.5);
    if p == half {
        return Ok(T::zero());
    }
    // Solve on the upper half only; the lower half follows by symmetry.
    if p > half {
        Ok(solve_upper_tail(spec.distribution, T::one() - p))
    } else {
        Ok(-solve_upper_tail(spec.distribution, p))
    }
}

pub fn t_quantile<T: Scalar>(df: u32, probability: T) -> Result<T> {
    quantile(QuantileSpec::new(Distribution::student_t(df)?, probability)?)
}

pub fn normal_quantile<T: Scalar>(probability: T) -> Result<T> {
    quantile(QuantileSpec::new(Distribution::StandardNormal, probability)?)
}

/// Two-sided critical value `q_{1 - gamma/2}` for nominal coverage `level = 1 - gamma`.
pub fn two_sided_critical<T: Scalar>(distribution: Distribution, level: T) -> Result<T> {
    crate::interval::check_level(level)?;
    let gamma = T::one() - level;
    quantile(QuantileSpec::new(
        distribution,
        T::one() - gamma * T::of(0.5),
    )?)
}

/// Finds `x >= 0` with `upper_tail(x) = target`, `0 < target < 1/2`.
fn solve_upper_tail<T: Scalar>(dist: Distribution, target: T) -> T {
    let f = |x: T| dist.upper_tail(x) - target;
    let two = T::of(2.0);

    let mut lo = T::zero();
    let mut hi = T::one();
    while f(hi) > T::zero() {
        lo = hi;
        hi *= two;
        if !hi.is_finite() {
            return hi;
        }
    }

    let tol = T::eps() * T::of(4.0);
    let mut x = (lo + hi) * T::of(0.5);
    for _ in 0..400 {
        let fx = f(x);
        if fx == T::zero() {
            return x;
        }
        // f is decreasing
        if fx > T::zero() {
            lo = x;
        } else {
            hi = x;
        }
        if hi - lo <= tol * (T::one() + x.abs()) {
            break;
        }
        let slope = dist.pdf(x);
        let newton = x + fx / slope;
        x = if slope > T::zero() && newton > lo && newton < hi {
            newton
        } else {
            (lo + hi) * T::of(0.5)
        };
    }
    x
}

/// `sqrt( sum (v_b - mean)^2 / (B - 1) )`, the COfB spread.
pub fn sample_sd_about_mean<T: Scalar>(values: &[T]) -> Result<T> {
    if values.len() < 2 {
        return Err(Error::InsufficientReplicates {
            required: 2,
            got: values.len(),
        });
    }
    let n = T::of_usize(values.len());
    let mean = values.iter().fold(T::zero(), |acc, &v| acc + v) / n;
    let ss = values
        .iter()
        .fold(T::zero(), |acc, &v| acc + (v - mean) * (v - mean));
    Ok((ss / (n - T::one())).sqrt())
}

/// `sqrt( sum (v_b - center)^2 / B )`, the COnB spread about the original run.
pub fn sample_sd_about_center<T: Scalar>(values: &[T], center: T) -> Result<T> {
    if values.is_empty() {
        return Err(Error::InsufficientReplicates {
            required: 1,
            got: 0,
        });
    }
    let n = T::of_usize(values.len());
    let ss = values
        .iter()
        .fold(T::zero(), |acc, &v| acc + (v - center) * (v - center));
    Ok((ss / n).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn t_median_is_zero() {
        assert_eq!(t_quantile(1, 0.5_f64).unwrap(), 0.0);
    }

    #[test]
    fn published_table_values() {
        assert!((t_quantile(1, 0.975_f64).unwrap() - 12.706_204_7).abs() < 1e-7);
        assert!((normal_quantile(0.975_f64).unwrap() - 1.959_964_0).abs() < 1e-7);
        assert!((t_quantile(2, 0.975_f64).unwrap() - 4.302_652_7).abs() < 1e-7);
    }

    #[test]
    fn domain_errors() {
        assert!(t_quantile(0, 0.9_f64).is_err());
        assert!(t_quantile(3, 0.0_f64).is_err());
        assert!(t_quantile(3, 1.0_f64).is_err());
        assert!(normal_quantile(f64::NAN).is_err());
        assert!(two_sided_critical(Distribution::StandardNormal, 1.0_f64).is_err());
    }

    #[test]
    fn t_approaches_normal_from_above() {
        let z = normal_quantile(0.975_f64).unwrap();
        let q: Vec<f64> = [10, 100, 10_000]
            .iter()
            .map(|&df| t_quantile(df, 0.975).unwrap())
            .collect();
        assert!(q[0] > q[1] && q[1] > q[2] && q[2] > z);
        assert!(q[2] - z < 1e-3);
    }

    #[test]
    fn f32_quantile_is_close() {
        let q = t_quantile(4, 0.975_f32).unwrap();
        assert!((q - 2.776_445_1).abs() < 1e-4);
    }

    #[test]
    fn sd_about_mean_examples() {
        assert!((sample_sd_about_mean(&[1.0, -1.0]).unwrap() - 2.0_f64.sqrt()).abs() < 1e-15);
        assert_eq!(sample_sd_about_mean(&[4.2, 4.2, 4.2]).unwrap(), 0.0);
        assert!((sample_sd_about_mean::<f64>(&[3.0, 5.0, 7.0, 9.0]).unwrap() - 2.581_988_897_471_611).abs() < 1e-14);
        assert!(matches!(
            sample_sd_about_mean(&[1.0_f64]),
            Err(Error::InsufficientReplicates { required: 2, got: 1 })
        ));
    }

    #[test]
    fn sd_about_center_examples() {
        assert_eq!(sample_sd_about_center(&[1.0], 0.0).unwrap(), 1.0);
        assert_eq!(sample_sd_about_center(&[2.5, 2.5], 2.5).unwrap(), 0.0);
        assert!((sample_sd_about_center::<f64>(&[2.0, -2.0, 4.0], 1.0).unwrap() - 2.516_611_478_423_583).abs() < 1e-14);
        assert!(sample_sd_about_center::<f64>(&[], 0.0).is_err());
    }

    proptest! {
        #[test]
        fn quantile_antisymmetric(df in 1u32..200, p in 0.001f64..0.999) {
            let a = t_quantile(df, p).unwrap();
            let b = t_quantile(df, 1.0 - p).unwrap();
            prop_assert!((a + b).abs() < 1e-10);
        }

        #[test]
        fn quantile_inverts_cdf(df in 1u32..60, p in 0.001f64..0.999) {
            let q = t_quantile(df, p).unwrap();
            let d = Distribution::student_t(df).unwrap();
            prop_assert!((d.cdf(q) - p).abs() < 1e-12);
        }

        #[test]
        fn quantile_increasing(df in 1u32..100, p in 0.01f64..0.98, dp in 1e-4f64..0.01) {
            prop_assert!(t_quantile(df, p).unwrap() < t_quantile(df, p + dp).unwrap());
            prop_assert!(normal_quantile(p).unwrap() < normal_quantile(p + dp).unwrap());
        }

        #[test]
        fn sd_shift_invariant(v in prop::collection::vec(-100.0f64..100.0, 2..20), c in -100.0f64..100.0) {
            let s = sample_sd_about_mean(&v).unwrap();
            let shifted: Vec<f64> = v.iter().map(|x| x + c).collect();
            let s2 = sample_sd_about_mean(&shifted).unwrap();
            prop_assert!((s - s2).abs() <= 1e-12 * s.max(1.0));
        }
    }
}
