//! The (averaged) SGD recursion.
//!
//! Step `t = 1, 2, ...` consumes observation `ζ_t` and applies
//! `x_t = x_{t-1} - η_t W_t ∇h(x_{t-1}, ζ_t)` with `η_t = η t^{-α}`. The
//! running average `x̄_n = (1/n) Σ_{t=1..n} x_t` excludes `x_0`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::problems::{Objective, Observation};
use crate::rng::{exponential, StreamRng};
use crate::{Error, Result, Scalar};

/// Polynomially decaying step sizes `η_t = η t^{-α}`, `α ∈ (1/2, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepSchedule<T> {
    eta: T,
    alpha: T,
}

impl<T: Scalar> StepSchedule<T> {
    pub fn new(eta: T, alpha: T) -> Result<Self> {
        if !(eta > T::zero()) || !eta.is_finite() {
            return Err(Error::domain(format!("eta must be positive, got {eta}")));
        }
        if !(alpha > T::of(0.5) && alpha <= T::one()) {
            return Err(Error::domain(format!("alpha must lie in (1/2, 1], got {alpha}")));
        }
        Ok(Self { eta, alpha })
    }

    pub fn eta(&self) -> T {
        self.eta
    }

    pub fn alpha(&self) -> T {
        self.alpha
    }

    /// `η t^{-α}` for the 1-based step `t`.
    pub fn step_size(&self, t: usize) -> Result<T> {
        if t == 0 {
            return Err(Error::StepIndex);
        }
        Ok(self.rate(t))
    }

    #[inline]
    fn rate(&self, t: usize) -> T {
        if self.alpha == T::one() {
            self.eta / T::of_usize(t)
        } else {
            self.eta * T::of_usize(t).powf(-self.alpha)
        }
    }
}

/// Which iterate a run reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputMode {
    /// Last iterate `x_n`.
    Sgd,
    /// Polyak-Ruppert average `x̄_n`.
    Asgd,
}

/// Multipliers applied to each stochastic gradient.
pub trait GradientWeights<T: Scalar> {
    fn next_weight(&mut self) -> T;
}

#[derive(Debug, Clone)]
#[allow(clippy::large_enum_variant)]
pub enum WeightSource {
    /// `W_t = 1`: plain SGD.
    Unit,
    /// `W_t ~ Exp(1)` from the given stream.
    Exponential(StreamRng),
}

impl<T: Scalar> GradientWeights<T> for WeightSource {
    #[inline]
    fn next_weight(&mut self) -> T {
        match self {
            WeightSource::Unit => T::one(),
            WeightSource::Exponential(rng) => T::of(exponential(rng)),
        }
    }
}

/// Running plug-in averages `G̃_n` and `S̃_n` for the delta method.
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaAccumulators<T: Scalar> {
    /// `(1/n) Σ ∇²h(x_{i-1}, ζ_i)`.
    pub g_tilde: DMatrix<T>,
    /// `(1/n) Σ ∇h(x_{i-1}, ζ_i) ∇h(x_{i-1}, ζ_i)ᵀ`.
    pub s_tilde: DMatrix<T>,
}

/// Output of one pass.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorRun<T: Scalar> {
    pub x_final: DVector<T>,
    pub x_avg: DVector<T>,
    pub n_steps: usize,
    pub delta: Option<DeltaAccumulators<T>>,
}

impl<T: Scalar> EstimatorRun<T> {
    pub fn output(&self, mode: OutputMode) -> &DVector<T> {
        match mode {
            OutputMode::Sgd => &self.x_final,
            OutputMode::Asgd => &self.x_avg,
        }
    }
}

/// Reusable per-step buffers.
#[derive(Debug, Clone)]
pub struct Scratch<T: Scalar> {
    grad: DVector<T>,
    hess: DMatrix<T>,
}

impl<T: Scalar> Scratch<T> {
    pub fn new(d: usize) -> Self {
        Self {
            grad: DVector::zeros(d),
            hess: DMatrix::zeros(0, 0),
        }
    }
}

/// State of a single SGD thread. Cloning forks the thread, history included.
#[derive(Debug, Clone)]
pub struct SgdThread<T: Scalar> {
    x: DVector<T>,
    sum: DVector<T>,
    steps: usize,
    delta: Option<(DMatrix<T>, DMatrix<T>)>,
}

impl<T: Scalar> SgdThread<T> {
    pub fn new(x0: DVector<T>, accumulate_delta: bool) -> Self {
        let d = x0.len();
        Self {
            sum: DVector::zeros(d),
            x: x0,
            steps: 0,
            delta: accumulate_delta.then(|| (DMatrix::zeros(d, d), DMatrix::zeros(d, d))),
        }
    }

    pub fn iterate(&self) -> &DVector<T> {
        &self.x
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Mean of the post-update iterates so far; `x_0` before the first step.
    pub fn average(&self) -> DVector<T> {
        if self.steps == 0 {
            self.x.clone()
        } else {
            &self.sum / T::of_usize(self.steps)
        }
    }

    /// One update on `obs` with gradient multiplier `weight`.
    pub fn step<O: Objective<T> + ?Sized>(
        &mut self,
        obj: &O,
        obs: &Observation<T>,
        schedule: &StepSchedule<T>,
        weight: T,
        scratch: &mut Scratch<T>,
    ) -> Result<()> {
        let t = self.steps + 1;
        obj.gradient_into(&self.x, obs, &mut scratch.grad);
        if !scratch.grad.iter().all(|g| g.is_finite()) {
            return Err(Error::Divergence { step: t });
        }
        if let Some((g_sum, s_sum)) = self.delta.as_mut() {
            let d = self.x.len();
            if scratch.hess.nrows() != d {
                scratch.hess = DMatrix::zeros(d, d);
            }
            obj.hessian_into(&self.x, obs, &mut scratch.hess)?;
            *g_sum += &scratch.hess;
            s_sum.ger(T::one(), &scratch.grad, &scratch.grad, T::one());
        }
        let eta_t = schedule.rate(t);
        self.x.axpy(-(eta_t * weight), &scratch.grad, T::one());
        if !self.x.iter().all(|v| v.is_finite()) {
            return Err(Error::Divergence { step: t });
        }
        self.sum += &self.x;
        self.steps = t;
        Ok(())
    }

    pub fn finish(self) -> EstimatorRun<T> {
        let x_avg = self.average();
        let n = self.steps;
        let delta = self.delta.map(|(g, s)| {
            let inv = T::one() / T::of_usize(n.max(1));
            DeltaAccumulators {
                g_tilde: g * inv,
                s_tilde: s * inv,
            }
        });
        EstimatorRun {
            x_final: self.x,
            x_avg,
            n_steps: n,
            delta,
        }
    }
}

/// Runs SGD over `data` once, reporting both `x_n` and `x̄_n`.
pub fn run_trajectory<'a, T, O, I, W>(
    obj: &O,
    data: I,
    schedule: &StepSchedule<T>,
    x0: &DVector<T>,
    weights: &mut W,
    accumulate_delta: bool,
) -> Result<EstimatorRun<T>>
where
    T: Scalar,
    O: Objective<T> + ?Sized,
    I: IntoIterator<Item = &'a Observation<T>>,
    W: GradientWeights<T> + ?Sized,
{
    run_trajectory_observed(obj, data, schedule, x0, weights, accumulate_delta, |_, _| {})
}

/// [`run_trajectory`] that also hands every iterate `(t, x_t)`, starting with
/// `(0, x_0)`, to `observer`.
pub fn run_trajectory_observed<'a, T, O, I, W, F>(
    obj: &O,
    data: I,
    schedule: &StepSchedule<T>,
    x0: &DVector<T>,
    weights: &mut W,
    accumulate_delta: bool,
    mut observer: F,
) -> Result<EstimatorRun<T>>
where
    T: Scalar,
    O: Objective<T> + ?Sized,
    I: IntoIterator<Item = &'a Observation<T>>,
    W: GradientWeights<T> + ?Sized,
    F: FnMut(usize, &DVector<T>),
{
    check_start(obj, x0)?;
    let mut thread = SgdThread::new(x0.clone(), accumulate_delta);
    let mut scratch = Scratch::new(x0.len());
    observer(0, thread.iterate());
    for obs in data {
        let w = weights.next_weight();
        thread.step(obj, obs, schedule, w, &mut scratch)?;
        observer(thread.steps(), thread.iterate());
    }
    if thread.steps() == 0 {
        return Err(Error::EmptyInput);
    }
    Ok(thread.finish())
}

/// An unweighted original thread and `B` reweighted copies that share the
/// data order.
#[derive(Debug, Clone, PartialEq)]
pub struct BankOutcome<T: Scalar> {
    pub original: EstimatorRun<T>,
    /// Averaged iterate of each reweighted thread.
    pub replicates: Vec<DVector<T>>,
}

/// Advances the original thread (`W = 1`) and one thread per entry of
/// `weights` in lockstep. Each observation is read exactly once.
pub fn run_perturbed_bank<'a, T, O, I, W>(
    obj: &O,
    data: I,
    schedule: &StepSchedule<T>,
    x0: &DVector<T>,
    mut weights: Vec<W>,
) -> Result<BankOutcome<T>>
where
    T: Scalar,
    O: Objective<T> + ?Sized,
    I: IntoIterator<Item = &'a Observation<T>>,
    W: GradientWeights<T>,
{
    check_start(obj, x0)?;
    let mut original = SgdThread::new(x0.clone(), false);
    let mut threads: Vec<SgdThread<T>> = weights
        .iter()
        .map(|_| SgdThread::new(x0.clone(), false))
        .collect();
    let mut scratch = Scratch::new(x0.len());
    for obs in data {
        original.step(obj, obs, schedule, T::one(), &mut scratch)?;
        for (thread, w) in threads.iter_mut().zip(weights.iter_mut()) {
            let w = w.next_weight();
            thread.step(obj, obs, schedule, w, &mut scratch)?;
        }
    }
    if original.steps() == 0 {
        return Err(Error::EmptyInput);
    }
    Ok(BankOutcome {
        original: original.finish(),
        replicates: threads.iter().map(SgdThread::average).collect(),
    })
}

fn check_start<T: Scalar, O: Objective<T> + ?Sized>(obj: &O, x0: &DVector<T>) -> Result<()> {
    if x0.len() != obj.dim() {
        return Err(Error::Dimension(format!(
            "x0 has {} entries, objective has dimension {}",
            x0.len(),
            obj.dim()
        )));
    }
    Ok(())
}
