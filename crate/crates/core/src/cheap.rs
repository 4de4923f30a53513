//! The cheap bootstrap intervals.
//!
//! Both procedures report `x_out,i ± t·s_i`, and both need only a handful of
//! replicates because the interval uses a Student-t quantile rather than a
//! normal one:
//!
//! * offline ([`cofb`]): `B ≥ 2` reruns on resampled data; `s_i` is the sample
//!   sd of the rerun outputs (divisor `B - 1`) and `t = t_{B-1}`.
//! * online ([`conb`]): `B ≥ 1` exponentially reweighted threads carried next
//!   to the original run; `s_i` is the root mean square of the thread outputs
//!   about `x_out` (divisor `B`) and `t = t_B`.

use nalgebra::DVector;
use rand::Rng;

use crate::engine::{
    run_perturbed_bank, run_trajectory, BankOutcome, GradientWeights, OutputMode, StepSchedule,
    WeightSource,
};
use crate::problems::{Dataset, Objective, Observation};
use crate::rng::{derive_stream, StreamRng, LABEL_RESAMPLE, LABEL_WEIGHTS};
use crate::stats::{sample_sd_about_center, sample_sd_about_mean, two_sided_critical, Distribution};
use crate::{Error, IntervalSet, MethodTag, Result, Scalar};

/// `n` indices drawn uniformly with replacement from `0..n`.
pub fn resample_indices<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<Vec<usize>> {
    if n == 0 {
        return Err(Error::EmptyInput);
    }
    Ok((0..n).map(|_| rng.random_range(0..n)).collect())
}

/// A bootstrap replicate of `data`; the original is untouched.
pub fn resample_with_replacement<T: Scalar, R: Rng + ?Sized>(
    data: &Dataset<T>,
    rng: &mut R,
) -> Result<Dataset<T>> {
    Ok(data.select(&resample_indices(data.len(), rng)?))
}

/// Replicate count and seed of one cheap bootstrap run.
///
/// Replicate `b` owns the stream `(seed, purpose, b)`, so any replicate can be
/// regenerated alone.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ResamplePlan {
    replicates: usize,
    seed: u64,
    n: usize,
}

impl ResamplePlan {
    /// Offline plan: needs `B ≥ 2` and a non-empty dataset.
    pub fn offline(replicates: usize, seed: u64, n: usize) -> Result<Self> {
        Self::checked(replicates, 2, seed, n)
    }

    /// Online plan: needs `B ≥ 1` and a non-empty stream.
    pub fn online(replicates: usize, seed: u64, n: usize) -> Result<Self> {
        Self::checked(replicates, 1, seed, n)
    }

    fn checked(replicates: usize, required: usize, seed: u64, n: usize) -> Result<Self> {
        if replicates < required {
            return Err(Error::InsufficientReplicates {
                required,
                got: replicates,
            });
        }
        if n == 0 {
            return Err(Error::EmptyInput);
        }
        Ok(Self {
            replicates,
            seed,
            n,
        })
    }

    pub fn replicates(&self) -> usize {
        self.replicates
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Resampling stream of offline replicate `b`.
    pub fn resample_stream(&self, b: usize) -> StreamRng {
        derive_stream(self.seed, &[LABEL_RESAMPLE, b as u64])
    }

    /// Weight stream of online thread `b`.
    pub fn weight_stream(&self, b: usize) -> StreamRng {
        derive_stream(self.seed, &[LABEL_WEIGHTS, b as u64])
    }
}

/// Offline cheap bootstrap.
///
/// Runs (A)SGD once on `data` in its given order for `x_out`, then once per
/// replicate on an independent with-replacement resample, all from `x0`.
#[allow(clippy::too_many_arguments)]
pub fn cofb<T, O>(
    obj: &O,
    data: &Dataset<T>,
    schedule: &StepSchedule<T>,
    x0: &DVector<T>,
    replicates: usize,
    mode: OutputMode,
    level: T,
    seed: u64,
) -> Result<IntervalSet<T>>
where
    T: Scalar,
    O: Objective<T> + ?Sized,
{
    let plan = ResamplePlan::offline(replicates, seed, data.len())?;
    crate::interval::check_level(level)?;
    let original = run_trajectory(obj, data, schedule, x0, &mut WeightSource::Unit, false)?;
    let obs = data.observations();
    let mut outputs = Vec::with_capacity(replicates);
    for b in 0..replicates {
        let idx = resample_indices(obs.len(), &mut plan.resample_stream(b))?;
        let run = run_trajectory(
            obj,
            idx.iter().map(|&i| &obs[i]),
            schedule,
            x0,
            &mut WeightSource::Unit,
            false,
        )?;
        outputs.push(match mode {
            OutputMode::Sgd => run.x_final,
            OutputMode::Asgd => run.x_avg,
        });
    }
    let tag = match mode {
        OutputMode::Sgd => MethodTag::CofbSgd,
        OutputMode::Asgd => MethodTag::CofbAsgd,
    };
    cofb_from_outputs(original.output(mode).clone(), &outputs, level, tag, data.len())
}

/// The offline interval from precomputed replicate outputs.
pub fn cofb_from_outputs<T: Scalar>(
    x_out: DVector<T>,
    replicates: &[DVector<T>],
    level: T,
    method: MethodTag,
    n: usize,
) -> Result<IntervalSet<T>> {
    let b = replicates.len();
    if b < 2 {
        return Err(Error::InsufficientReplicates { required: 2, got: b });
    }
    let s = per_coordinate(&x_out, replicates, |col, _| sample_sd_about_mean(col))?;
    let df = u32::try_from(b - 1).map_err(|_| Error::domain("too many replicates"))?;
    let t = two_sided_critical(Distribution::student_t(df)?, level)?;
    IntervalSet::new(x_out, s, t, level, method, b, n)
}

/// Online cheap bootstrap (averaged output only).
///
/// Reads `data` once, in order; each observation updates the original thread
/// and all `B` reweighted threads before the next one is pulled.
pub fn conb<'a, T, O, I>(
    obj: &O,
    data: I,
    schedule: &StepSchedule<T>,
    x0: &DVector<T>,
    replicates: usize,
    level: T,
    seed: u64,
) -> Result<IntervalSet<T>>
where
    T: Scalar,
    O: Objective<T> + ?Sized,
    I: IntoIterator<Item = &'a Observation<T>>,
{
    let bank = exponential_bank(obj, data, schedule, x0, replicates, level, seed)?;
    conb_from_outputs(bank.original.x_avg, &bank.replicates, level, bank.original.n_steps)
}

/// [`conb`] with caller-supplied weight sources, one per thread.
pub fn conb_with_weights<'a, T, O, I, W>(
    obj: &O,
    data: I,
    schedule: &StepSchedule<T>,
    x0: &DVector<T>,
    weights: Vec<W>,
    level: T,
) -> Result<IntervalSet<T>>
where
    T: Scalar,
    O: Objective<T> + ?Sized,
    I: IntoIterator<Item = &'a Observation<T>>,
    W: GradientWeights<T>,
{
    if weights.is_empty() {
        return Err(Error::InsufficientReplicates { required: 1, got: 0 });
    }
    crate::interval::check_level(level)?;
    let bank = run_perturbed_bank(obj, data, schedule, x0, weights)?;
    conb_from_outputs(bank.original.x_avg, &bank.replicates, level, bank.original.n_steps)
}

/// The online interval from precomputed thread outputs.
pub fn conb_from_outputs<T: Scalar>(
    x_out: DVector<T>,
    replicates: &[DVector<T>],
    level: T,
    n: usize,
) -> Result<IntervalSet<T>> {
    let b = replicates.len();
    if b < 1 {
        return Err(Error::InsufficientReplicates { required: 1, got: 0 });
    }
    let s = per_coordinate(&x_out, replicates, sample_sd_about_center)?;
    let df = u32::try_from(b).map_err(|_| Error::domain("too many replicates"))?;
    let t = two_sided_critical(Distribution::student_t(df)?, level)?;
    IntervalSet::new(x_out, s, t, level, MethodTag::Conb, b, n)
}

/// The original thread plus `B` threads with Exp(1) weights from `seed`.
///
/// Thread `b` always draws from the same stream, so the online bootstrap
/// baseline and [`conb`] see identical thread outputs for equal seeds.
pub(crate) fn exponential_bank<'a, T, O, I>(
    obj: &O,
    data: I,
    schedule: &StepSchedule<T>,
    x0: &DVector<T>,
    replicates: usize,
    level: T,
    seed: u64,
) -> Result<BankOutcome<T>>
where
    T: Scalar,
    O: Objective<T> + ?Sized,
    I: IntoIterator<Item = &'a Observation<T>>,
{
    // n is unknown for a stream; the bank itself rejects an empty one.
    let plan = ResamplePlan::online(replicates, seed, usize::MAX)?;
    crate::interval::check_level(level)?;
    let weights = (0..replicates)
        .map(|b| WeightSource::Exponential(plan.weight_stream(b)))
        .collect();
    run_perturbed_bank(obj, data, schedule, x0, weights)
}

/// Applies `spread(column, center)` to each coordinate of the replicate set.
pub(crate) fn per_coordinate<T: Scalar>(
    center: &DVector<T>,
    replicates: &[DVector<T>],
    spread: impl Fn(&[T], T) -> Result<T>,
) -> Result<DVector<T>> {
    let d = center.len();
    if let Some(r) = replicates.iter().find(|r| r.len() != d) {
        return Err(Error::Dimension(format!(
            "replicate has {} coordinates, expected {d}",
            r.len()
        )));
    }
    let mut col = Vec::with_capacity(replicates.len());
    let mut out = DVector::zeros(d);
    for i in 0..d {
        col.clear();
        col.extend(replicates.iter().map(|r| r[i]));
        out[i] = spread(&col, center[i])?;
    }
    Ok(out)
}

/// `(x_out - x*) / s`, the studentized error of one coordinate.
pub fn pivot_statistic<T: Scalar>(x_out: T, x_star: T, s: T) -> Result<T> {
    if s == T::zero() {
        return Err(Error::DegeneratePivot);
    }
    if !(s > T::zero()) {
        return Err(Error::domain(format!("spread must be positive, got {s}")));
    }
    Ok((x_out - x_star) / s)
}
