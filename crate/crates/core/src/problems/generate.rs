use nalgebra::{DMatrix, DVector};
use rand::Rng;

use super::objective::sigmoid;
use super::{
    make_sigma, make_x_star, CovarianceFamily, Dataset, GroundTruth, Logistic, Objective,
    Observation, ProblemKind,
};
use crate::rng::GaussianSampler;
use crate::{Error, Result, Scalar};

/// Draws `a ~ N(0, Σ)` as `L z` with `L` the Cholesky factor of `Σ`.
#[derive(Debug, Clone)]
pub struct FeatureSampler<T: Scalar> {
    chol: DMatrix<T>,
    gauss: GaussianSampler,
    z: DVector<T>,
}

impl<T: Scalar> FeatureSampler<T> {
    pub fn new(sigma: &DMatrix<T>) -> Result<Self> {
        let chol = sigma
            .clone()
            .cholesky()
            .ok_or(Error::SingularMatrix("feature covariance is not positive definite"))?
            .unpack();
        let d = sigma.nrows();
        Ok(Self {
            chol,
            gauss: GaussianSampler::new(),
            z: DVector::zeros(d),
        })
    }

    pub fn dim(&self) -> usize {
        self.z.len()
    }

    pub fn sample<R: Rng + ?Sized>(&mut self, rng: &mut R) -> DVector<T> {
        for zi in self.z.iter_mut() {
            *zi = T::of(self.gauss.sample(rng));
        }
        &self.chol * &self.z
    }

    /// One standard normal from the same polar stream.
    pub fn standard_normal<R: Rng + ?Sized>(&mut self, rng: &mut R) -> T {
        T::of(self.gauss.sample(rng))
    }
}

/// `n` draws of `b = aᵀx* + ε`, `a ~ N(0, Σ)`, `ε ~ N(0, noise_sd²)`.
///
/// The truth carries `G = Σ` and `S = noise_sd² Σ`. A zero `noise_sd` gives
/// noiseless responses.
pub fn gen_linear<T: Scalar, R: Rng + ?Sized>(
    n: usize,
    d: usize,
    family: CovarianceFamily,
    noise_sd: T,
    rng: &mut R,
) -> Result<(Dataset<T>, GroundTruth<T>)> {
    if !(noise_sd >= T::zero()) || !noise_sd.is_finite() {
        return Err(Error::domain(format!(
            "noise_sd must be finite and non-negative, got {noise_sd}"
        )));
    }
    let x_star = make_x_star::<T>(d)?;
    let sigma = make_sigma::<T>(family, d);
    let mut sampler = FeatureSampler::new(&sigma)?;
    let mut obs = Vec::with_capacity(n);
    for _ in 0..n {
        let a = sampler.sample(rng);
        let eps = sampler.standard_normal(rng) * noise_sd;
        let b = a.dot(&x_star) + eps;
        obs.push(Observation::new(a, b));
    }
    let truth = GroundTruth {
        g: Some(sigma.clone()),
        s: Some(&sigma * (noise_sd * noise_sd)),
        x_star,
        sigma,
    };
    Ok((Dataset::new(ProblemKind::Linear, d, obs)?, truth))
}

/// Logistic data with the default `x*` grid.
pub fn gen_logistic<T: Scalar, R: Rng + ?Sized>(
    n: usize,
    d: usize,
    family: CovarianceFamily,
    rng: &mut R,
) -> Result<(Dataset<T>, GroundTruth<T>)> {
    let x_star = make_x_star::<T>(d)?;
    gen_logistic_with_truth(n, family, x_star, rng)
}

/// Logistic data for an arbitrary coefficient vector: `b = +1` with
/// probability `1 / (1 + exp(-aᵀx*))`, else `-1`.
///
/// `G` and `S` have no closed form here and are left empty; see
/// [`estimate_logistic_sandwich`].
pub fn gen_logistic_with_truth<T: Scalar, R: Rng + ?Sized>(
    n: usize,
    family: CovarianceFamily,
    x_star: DVector<T>,
    rng: &mut R,
) -> Result<(Dataset<T>, GroundTruth<T>)> {
    let d = x_star.len();
    if d < 1 {
        return Err(Error::Dimension("logistic problem needs d >= 1".into()));
    }
    let sigma = make_sigma::<T>(family, d);
    let mut sampler = FeatureSampler::new(&sigma)?;
    let mut obs = Vec::with_capacity(n);
    for _ in 0..n {
        let a = sampler.sample(rng);
        let p = sigmoid(a.dot(&x_star)).to_f64_lossy();
        let u: f64 = rng.random();
        let b = if u < p { T::one() } else { -T::one() };
        obs.push(Observation::new(a, b));
    }
    let truth = GroundTruth {
        x_star,
        sigma,
        g: None,
        s: None,
    };
    Ok((Dataset::new(ProblemKind::Logistic, d, obs)?, truth))
}

/// Monte Carlo estimates of `G = E[∇²h(x*, ζ)]` and `S = E[∇h ∇hᵀ]` for the
/// logistic model, averaged over `draws` fresh samples. Approximate by
/// construction; use at least 10⁶ draws for diagnostics.
pub fn estimate_logistic_sandwich<T: Scalar, R: Rng + ?Sized>(
    x_star: &DVector<T>,
    family: CovarianceFamily,
    draws: usize,
    rng: &mut R,
) -> Result<(DMatrix<T>, DMatrix<T>)> {
    if draws == 0 {
        return Err(Error::EmptyInput);
    }
    let d = x_star.len();
    let obj = Logistic { dim: d };
    let sigma = make_sigma::<T>(family, d);
    let mut sampler = FeatureSampler::new(&sigma)?;
    let mut g = DMatrix::zeros(d, d);
    let mut s = DMatrix::zeros(d, d);
    let mut h = DMatrix::zeros(d, d);
    let mut grad = DVector::zeros(d);
    for _ in 0..draws {
        let a = sampler.sample(rng);
        let p = sigmoid(a.dot(x_star)).to_f64_lossy();
        let u: f64 = rng.random();
        let b = if u < p { T::one() } else { -T::one() };
        let o = Observation::new(a, b);
        obj.hessian_into(x_star, &o, &mut h)?;
        g += &h;
        obj.gradient_into(x_star, &o, &mut grad);
        s.ger(T::one(), &grad, &grad, T::one());
    }
    let inv = T::one() / T::of_usize(draws);
    Ok((g * inv, s * inv))
}
