//! Comparison methods: plug-in delta method, batch means, the large-`B` online
//! bootstrap, and HiGrad.

use nalgebra::{DMatrix, DVector};

use crate::cheap::{exponential_bank, per_coordinate};
use crate::engine::{
    run_trajectory, run_trajectory_observed, EstimatorRun, Scratch, SgdThread, StepSchedule,
    WeightSource,
};
use crate::problems::{Objective, Observation};
use crate::stats::{
    asgd_asymptotic_cov, sample_sd_about_center, sample_sd_about_mean, two_sided_critical,
    Distribution,
};
use crate::{Error, IntervalSet, MethodTag, Result, Scalar};

/// Plug-in sandwich interval `x̄_n,i ± z √((G̃⁻¹ S̃ G̃⁻¹)_ii / n)`.
pub fn delta_interval<T: Scalar>(run: &EstimatorRun<T>, level: T) -> Result<IntervalSet<T>> {
    let acc = run
        .delta
        .as_ref()
        .ok_or_else(|| Error::Unsupported("run was made without delta accumulators".into()))?;
    let cov = asgd_asymptotic_cov(&acc.g_tilde, &acc.s_tilde)?;
    let n = T::of_usize(run.n_steps);
    let se = cov.matrix().diagonal().map(|v| (v.max(T::zero()) / n).sqrt());
    let z = two_sided_critical(Distribution::StandardNormal, level)?;
    IntervalSet::new(run.x_avg.clone(), se, z, level, MethodTag::Delta, 0, run.n_steps)
}

/// One ASGD pass with accumulators, then [`delta_interval`].
pub fn delta_estimator<'a, T, O, I>(
    obj: &O,
    data: I,
    schedule: &StepSchedule<T>,
    x0: &DVector<T>,
    level: T,
) -> Result<IntervalSet<T>>
where
    T: Scalar,
    O: Objective<T> + ?Sized,
    I: IntoIterator<Item = &'a Observation<T>>,
{
    if !obj.has_hessian() {
        return Err(Error::MissingHessian);
    }
    let run = run_trajectory(obj, data, schedule, x0, &mut WeightSource::Unit, true)?;
    delta_interval(&run, level)
}

/// Batch boundaries `e_0 < e_1 < ... < e_M` over iterate indices. Batch `k`
/// (`1..=M`) holds the iterates with index in `(e_{k-1}, e_k]`; iterates up to
/// and including `e_0` are burn-in.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BatchLayout {
    boundaries: Vec<usize>,
}

impl BatchLayout {
    pub fn from_boundaries(boundaries: Vec<usize>) -> Result<Self> {
        if boundaries.len() < 3 {
            return Err(Error::Layout(format!(
                "need at least two batches, got {} boundaries",
                boundaries.len()
            )));
        }
        if let Some(w) = boundaries.windows(2).find(|w| w[1] <= w[0]) {
            return Err(Error::Layout(format!(
                "boundaries must increase strictly, found {} then {}",
                w[0], w[1]
            )));
        }
        Ok(Self { boundaries })
    }

    /// Number of batches `M`.
    pub fn batches(&self) -> usize {
        self.boundaries.len() - 1
    }

    /// `e_0..=e_M`.
    pub fn boundaries(&self) -> &[usize] {
        &self.boundaries
    }

    /// First iterate index of batch `k`.
    pub fn start(&self, k: usize) -> usize {
        self.boundaries[k - 1] + 1
    }

    /// Last iterate index of batch `k`.
    pub fn end(&self, k: usize) -> usize {
        self.boundaries[k]
    }

    pub fn size(&self, k: usize) -> usize {
        self.boundaries[k] - self.boundaries[k - 1]
    }

    /// `e_M - e_0`, the number of iterates that enter some batch.
    pub fn covered(&self) -> usize {
        self.boundaries[self.batches()] - self.boundaries[0]
    }

    /// Batch containing iterate `t`, if any.
    fn batch_of(&self, t: usize) -> Option<usize> {
        if t <= self.boundaries[0] || t > *self.boundaries.last().expect("non-empty") {
            return None;
        }
        Some(self.boundaries.partition_point(|&e| e < t))
    }
}

/// Increasing-size batches matched to the step decay:
/// `N = n^{1-α}/(M+1)`, `e_k = round(((k+1) N)^{1/(1-α)})`.
pub fn batch_layout(n: usize, alpha: f64, batches: usize) -> Result<BatchLayout> {
    if !(alpha > 0.5 && alpha < 1.0) {
        return Err(Error::domain(format!(
            "batch means needs alpha in (1/2, 1), got {alpha}"
        )));
    }
    if batches < 2 {
        return Err(Error::Layout(format!("need M >= 2 batches, got {batches}")));
    }
    let p = 1.0 - alpha;
    let big_n = (n as f64).powf(p) / (batches + 1) as f64;
    let boundaries: Vec<usize> = (0..=batches)
        .map(|k| (((k + 1) as f64 * big_n).powf(1.0 / p)).round() as usize)
        .collect();
    let layout = BatchLayout::from_boundaries(boundaries).map_err(|e| match e {
        Error::Layout(msg) => Error::Layout(format!("n = {n} too small for M = {batches}: {msg}")),
        other => other,
    })?;
    if layout.end(layout.batches()) > n {
        return Err(Error::Layout(format!(
            "last boundary {} exceeds n = {n}",
            layout.end(layout.batches())
        )));
    }
    Ok(layout)
}

/// `round(n^{1/4})`, the batch count used for comparisons.
pub fn default_batch_count(n: usize) -> usize {
    (n as f64).powf(0.25).round() as usize
}

/// Streaming batch sums; feed iterates `(t, x_t)` in order.
///
/// Sums are kept relative to the first batched iterate, which keeps the
/// spread of a near-constant trajectory free of cancellation (and exactly
/// zero for a constant one).
#[derive(Debug, Clone)]
pub struct BatchMeansAccumulator<T: Scalar> {
    layout: BatchLayout,
    shift: Option<DVector<T>>,
    sums: Vec<DVector<T>>,
    last: Option<usize>,
}

impl<T: Scalar> BatchMeansAccumulator<T> {
    pub fn new(layout: BatchLayout, dim: usize) -> Self {
        let m = layout.batches();
        Self {
            layout,
            shift: None,
            sums: vec![DVector::zeros(dim); m],
            last: None,
        }
    }

    pub fn push(&mut self, t: usize, x: &DVector<T>) {
        if let Some(k) = self.layout.batch_of(t) {
            let shift = self.shift.get_or_insert_with(|| x.clone());
            self.sums[k - 1] += x - &*shift;
        }
        self.last = Some(t);
    }

    /// Grand mean `x̄_M` and `V̂ = (1/M) Σ n_k (x̄_k - x̄_M)(x̄_k - x̄_M)ᵀ`.
    pub fn estimate(&self) -> Result<(DVector<T>, DMatrix<T>)> {
        let e_m = self.layout.end(self.layout.batches());
        let shift = match (self.last, &self.shift) {
            (Some(t), Some(shift)) if t >= e_m => shift,
            _ => {
                return Err(Error::Layout(format!(
                    "layout ends at iterate {e_m}, trajectory ended at {}",
                    self.last.map_or("none".to_string(), |t| t.to_string())
                )))
            }
        };
        let m = self.layout.batches();
        let d = self.sums[0].len();
        let grand = self.sums.iter().fold(DVector::zeros(d), |acc, s| acc + s)
            / T::of_usize(self.layout.covered());
        let mut v = DMatrix::zeros(d, d);
        for k in 1..=m {
            let nk = T::of_usize(self.layout.size(k));
            let dev = &self.sums[k - 1] / nk - &grand;
            v.ger(nk, &dev, &dev, T::one());
        }
        v /= T::of_usize(m);
        Ok((grand + shift, v))
    }

    /// `x̄_M,i ± z √(V̂_ii / (e_M - e_0))`.
    pub fn interval(&self, level: T) -> Result<IntervalSet<T>> {
        let (center, v) = self.estimate()?;
        let covered = T::of_usize(self.layout.covered());
        let se = v.diagonal().map(|x| (x.max(T::zero()) / covered).sqrt());
        let z = two_sided_critical(Distribution::StandardNormal, level)?;
        IntervalSet::new(
            center,
            se,
            z,
            level,
            MethodTag::BatchMeans,
            self.layout.batches(),
            self.layout.end(self.layout.batches()),
        )
    }
}

/// Batch-means interval from a stored trajectory, `iterates[t] = x_t`.
pub fn batch_means_interval<T: Scalar>(
    iterates: &[DVector<T>],
    layout: &BatchLayout,
    level: T,
) -> Result<IntervalSet<T>> {
    let d = iterates
        .first()
        .ok_or(Error::EmptyInput)?
        .len();
    let mut acc = BatchMeansAccumulator::new(layout.clone(), d);
    for (t, x) in iterates.iter().enumerate() {
        acc.push(t, x);
    }
    acc.interval(level)
}

/// One ASGD pass over `data` with `M` batches, without storing the trajectory.
#[allow(clippy::too_many_arguments)]
pub fn batch_means_estimator<'a, T, O, I>(
    obj: &O,
    data: I,
    n: usize,
    schedule: &StepSchedule<T>,
    x0: &DVector<T>,
    batches: usize,
    level: T,
) -> Result<IntervalSet<T>>
where
    T: Scalar,
    O: Objective<T> + ?Sized,
    I: IntoIterator<Item = &'a Observation<T>>,
{
    let layout = batch_layout(n, schedule.alpha().to_f64_lossy(), batches)?;
    let mut acc = BatchMeansAccumulator::new(layout, x0.len());
    run_trajectory_observed(obj, data, schedule, x0, &mut WeightSource::Unit, false, |t, x| {
        acc.push(t, x)
    })?;
    acc.interval(level)
}

/// Large-`B` online bootstrap: the same thread bank as [`crate::cheap::conb`]
/// but with spread about the original thread `σ_i² = (1/B) Σ (x^{(b)}_i - x^{(0)}_i)²`
/// and a normal quantile.
pub fn online_bootstrap_interval<'a, T, O, I>(
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
    let sigma = per_coordinate(&bank.original.x_avg, &bank.replicates, sample_sd_about_center)?;
    let z = two_sided_critical(Distribution::StandardNormal, level)?;
    IntervalSet::new(
        bank.original.x_avg,
        sigma,
        z,
        level,
        MethodTag::OnlineBootstrap,
        replicates,
        bank.original.n_steps,
    )
}

/// A HiGrad tree: run `n_0` steps, split into `B_1` branches that each take
/// `n_1` fresh steps, split each of those into `B_2`, and so on.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HiGradArchitecture {
    splits: Vec<usize>,
    segment_lengths: Vec<usize>,
}

impl HiGradArchitecture {
    /// `splits = (B_1..B_K)`, `segment_lengths = (n_0..n_K)`.
    pub fn new(splits: Vec<usize>, segment_lengths: Vec<usize>) -> Result<Self> {
        if splits.is_empty() || segment_lengths.len() != splits.len() + 1 {
            return Err(Error::domain(format!(
                "need K >= 1 splits and K + 1 segment lengths, got {} and {}",
                splits.len(),
                segment_lengths.len()
            )));
        }
        if splits.contains(&0) || segment_lengths.contains(&0) {
            return Err(Error::domain("splits and segment lengths must be positive"));
        }
        let arch = Self {
            splits,
            segment_lengths,
        };
        if arch.threads() < 2 {
            return Err(Error::domain("a HiGrad tree needs at least two leaves"));
        }
        Ok(arch)
    }

    /// `((2, 2), (n/7, n/7, n/7))`, which uses `7 ⌊n/7⌋` observations.
    pub fn two_by_two(n: usize) -> Result<Self> {
        let seg = n / 7;
        Self::new(vec![2, 2], vec![seg; 3])
    }

    pub fn splits(&self) -> &[usize] {
        &self.splits
    }

    pub fn segment_lengths(&self) -> &[usize] {
        &self.segment_lengths
    }

    /// Leaf count `T = Π B_i`.
    pub fn threads(&self) -> usize {
        self.splits.iter().product()
    }

    /// `n_0 + Σ_i (Π_{j≤i} B_j) n_i`, the observations used by the tree.
    pub fn consumption(&self) -> usize {
        let mut width = 1;
        let mut total = self.segment_lengths[0];
        for (b, n) in self.splits.iter().zip(&self.segment_lengths[1..]) {
            width *= b;
            total += width * n;
        }
        total
    }
}

/// HiGrad interval. Each leaf reports the average of all iterates on its
/// root-to-leaf path (the step counter keeps running across forks); the `T`
/// leaf outputs are combined as `mean ± t_{T-1} sd / √T`.
///
/// Fresh observations are handed out breadth-first: the root segment, then
/// every branch of level 1 in turn, then level 2, and so on.
pub fn higrad_interval<'a, T, O, I>(
    obj: &O,
    data: I,
    schedule: &StepSchedule<T>,
    x0: &DVector<T>,
    arch: &HiGradArchitecture,
    level: T,
) -> Result<IntervalSet<T>>
where
    T: Scalar,
    O: Objective<T> + ?Sized,
    I: IntoIterator<Item = &'a Observation<T>>,
{
    crate::interval::check_level(level)?;
    if x0.len() != obj.dim() {
        return Err(Error::Dimension(format!(
            "x0 has {} entries, objective has dimension {}",
            x0.len(),
            obj.dim()
        )));
    }
    let needed = arch.consumption();
    let mut stream = data.into_iter();
    let mut used = 0usize;
    let mut scratch = Scratch::new(x0.len());
    let mut advance = |thread: &mut SgdThread<T>, steps: usize| -> Result<()> {
        for _ in 0..steps {
            let obs = stream.next().ok_or(Error::InsufficientData {
                needed,
                available: used,
            })?;
            used += 1;
            thread.step(obj, obs, schedule, T::one(), &mut scratch)?;
        }
        Ok(())
    };

    let mut root = SgdThread::new(x0.clone(), false);
    advance(&mut root, arch.segment_lengths[0])?;
    let mut frontier = vec![root];
    for (&b, &len) in arch.splits.iter().zip(&arch.segment_lengths[1..]) {
        let mut next = Vec::with_capacity(frontier.len() * b);
        for thread in &frontier {
            for _ in 0..b {
                next.push(thread.clone());
            }
        }
        for thread in next.iter_mut() {
            advance(thread, len)?;
        }
        frontier = next;
    }

    let leaves: Vec<DVector<T>> = frontier.iter().map(SgdThread::average).collect();
    let t_count = leaves.len();
    let d = x0.len();
    let mean = leaves.iter().fold(DVector::zeros(d), |acc, x| acc + x) / T::of_usize(t_count);
    let root_t = T::of_usize(t_count).sqrt();
    let se = per_coordinate(&mean, &leaves, |col, _| Ok(sample_sd_about_mean(col)? / root_t))?;
    let df = u32::try_from(t_count - 1).map_err(|_| Error::domain("too many HiGrad threads"))?;
    let t = two_sided_critical(Distribution::student_t(df)?, level)?;
    IntervalSet::new(mean, se, t, level, MethodTag::HiGrad, t_count, needed)
}
