//! Confidence intervals for stochastic gradient descent solutions.
//!
//! The crate implements two cheap bootstrap procedures for (averaged) SGD:
//!
//! * [`cheap::cofb`] — offline: rerun (A)SGD on `B` with-replacement resamples
//!   of the full dataset and pivot on a Student-t with `B - 1` degrees of freedom.
//! * [`cheap::conb`] — online: carry `B` exponentially reweighted ASGD threads
//!   next to the original one in a single pass, pivoting on `t_B`.
//!
//! Four comparison methods live in [`baselines`]: the plug-in delta method,
//! batch means, the large-`B` online bootstrap and HiGrad. Synthetic linear and
//! logistic regression problems with known ground truth are in [`problems`].
//!
//! Everything numeric is generic over [`Scalar`] (`f32` or `f64`). The `*64`
//! aliases below are what most callers want.
//!
//! ```
//! use cheapboot::cheap::cofb;
//! use cheapboot::engine::{OutputMode, StepSchedule};
//! use cheapboot::problems::{gen_linear, CovarianceFamily, LeastSquares};
//! use cheapboot::rng::derive_stream;
//! use cheapboot::Vector64;
//!
//! let (data, truth) = gen_linear::<f64, _>(2_000, 3, CovarianceFamily::Identity, 1.0, &mut derive_stream(7, &[]))?;
//! let sched = StepSchedule::new(0.5, 0.501)?;
//! let iv = cofb(&LeastSquares { dim: 3 }, &data, &sched, &Vector64::zeros(3), 3, OutputMode::Asgd, 0.95, 42)?;
//! for i in 0..3 {
//!     println!("x*[{i}] = {}: [{:.3}, {:.3}]", truth.x_star[i], iv.lower(i), iv.upper(i));
//! }
//! # Ok::<(), cheapboot::Error>(())
//! ```

// `!(x > 0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod cheap;
pub mod engine;
mod error;
pub mod interval;
pub mod problems;
pub mod rng;
mod scalar;
pub mod stats;

pub use error::{Error, Result};
pub use interval::{IntervalSet, MethodTag};
pub use scalar::Scalar;

pub use nalgebra::{DMatrix, DVector};

pub type Vector64 = DVector<f64>;
pub type Matrix64 = DMatrix<f64>;
pub type Observation64 = problems::Observation<f64>;
pub type Dataset64 = problems::Dataset<f64>;
pub type GroundTruth64 = problems::GroundTruth<f64>;
pub type StepSchedule64 = engine::StepSchedule<f64>;
pub type EstimatorRun64 = engine::EstimatorRun<f64>;
pub type IntervalSet64 = IntervalSet<f64>;
pub type AsymptoticCovariance64 = stats::AsymptoticCovariance<f64>;

pub type Vector32 = DVector<f32>;
pub type Matrix32 = DMatrix<f32>;
pub type Observation32 = problems::Observation<f32>;
pub type Dataset32 = problems::Dataset<f32>;
pub type StepSchedule32 = engine::StepSchedule<f32>;
pub type EstimatorRun32 = engine::EstimatorRun<f32>;
pub type IntervalSet32 = IntervalSet<f32>;
