use nalgebra::{DMatrix, DVector};

use super::Observation;
use crate::{Error, Result, Scalar};

/// A per-sample loss `h(x, ζ)` with its gradient and, optionally, Hessian.
///
/// The `_into` methods write into caller-owned buffers so the SGD loop does
/// not allocate per step.
pub trait Objective<T: Scalar>: Send + Sync {
    fn dim(&self) -> usize;

    fn loss(&self, x: &DVector<T>, obs: &Observation<T>) -> T;

    fn gradient_into(&self, x: &DVector<T>, obs: &Observation<T>, out: &mut DVector<T>);

    fn has_hessian(&self) -> bool {
        false
    }

    fn hessian_into(
        &self,
        _x: &DVector<T>,
        _obs: &Observation<T>,
        _out: &mut DMatrix<T>,
    ) -> Result<()> {
        Err(Error::MissingHessian)
    }

    fn gradient(&self, x: &DVector<T>, obs: &Observation<T>) -> DVector<T> {
        let mut g = DVector::zeros(self.dim());
        self.gradient_into(x, obs, &mut g);
        g
    }

    fn hessian(&self, x: &DVector<T>, obs: &Observation<T>) -> Result<DMatrix<T>> {
        let d = self.dim();
        let mut h = DMatrix::zeros(d, d);
        self.hessian_into(x, obs, &mut h)?;
        Ok(h)
    }
}

/// `h(x, ζ) = ½ (aᵀx - b)²`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LeastSquares {
    pub dim: usize,
}

impl<T: Scalar> Objective<T> for LeastSquares {
    fn dim(&self) -> usize {
        self.dim
    }

    fn loss(&self, x: &DVector<T>, obs: &Observation<T>) -> T {
        let r = obs.features.dot(x) - obs.response;
        T::of(0.5) * r * r
    }

    #[inline]
    fn gradient_into(&self, x: &DVector<T>, obs: &Observation<T>, out: &mut DVector<T>) {
        let r = obs.features.dot(x) - obs.response;
        out.copy_from(&obs.features);
        *out *= r;
    }

    fn has_hessian(&self) -> bool {
        true
    }

    fn hessian_into(
        &self,
        _x: &DVector<T>,
        obs: &Observation<T>,
        out: &mut DMatrix<T>,
    ) -> Result<()> {
        out.fill(T::zero());
        out.ger(T::one(), &obs.features, &obs.features, T::zero());
        Ok(())
    }
}

/// `h(x, ζ) = ln(1 + exp(-b aᵀx))` with labels `b ∈ {-1, +1}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Logistic {
    pub dim: usize,
}

/// `1 / (1 + e^{-z})` without overflow for large `|z|`.
#[inline]
pub(crate) fn sigmoid<T: Scalar>(z: T) -> T {
    if z >= T::zero() {
        T::one() / (T::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (T::one() + e)
    }
}

impl<T: Scalar> Objective<T> for Logistic {
    fn dim(&self) -> usize {
        self.dim
    }

    fn loss(&self, x: &DVector<T>, obs: &Observation<T>) -> T {
        // softplus(-m), m = b aᵀx
        let z = -obs.response * obs.features.dot(x);
        z.max(T::zero()) + (-z.abs()).exp().ln_1p()
    }

    #[inline]
    fn gradient_into(&self, x: &DVector<T>, obs: &Observation<T>, out: &mut DVector<T>) {
        // -b a / (1 + e^{b aᵀx})
        let m = obs.response * obs.features.dot(x);
        let w = -obs.response * sigmoid(-m);
        out.copy_from(&obs.features);
        *out *= w;
    }

    fn has_hessian(&self) -> bool {
        true
    }

    fn hessian_into(
        &self,
        x: &DVector<T>,
        obs: &Observation<T>,
        out: &mut DMatrix<T>,
    ) -> Result<()> {
        // a aᵀ / ((1 + e^{u})(1 + e^{-u})) = a aᵀ σ(u) σ(-u)
        let u = obs.features.dot(x);
        let w = sigmoid(u) * sigmoid(-u);
        out.fill(T::zero());
        out.ger(w, &obs.features, &obs.features, T::zero());
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::derive_stream;
    use nalgebra::SymmetricEigen;
    use rand::Rng;

    fn random_point(rng: &mut impl Rng, d: usize, logistic: bool) -> (DVector<f64>, Observation<f64>) {
        let x = DVector::from_fn(d, |_, _| rng.random_range(-2.0..2.0));
        let a = DVector::from_fn(d, |_, _| rng.random_range(-2.0..2.0));
        let b = if logistic {
            if rng.random_bool(0.5) {
                1.0
            } else {
                -1.0
            }
        } else {
            rng.random_range(-3.0..3.0)
        };
        (x, Observation::new(a, b))
    }

    fn rel_err(a: f64, b: f64) -> f64 {
        (a - b).abs() / a.abs().max(b.abs()).max(1e-3)
    }

    /// Central differences of the loss (gradient) and of the gradient (Hessian).
    fn finite_difference_check<O: Objective<f64>>(obj: &O, logistic: bool) {
        let mut rng = derive_stream(5, &[logistic as u64]);
        let d = obj.dim();
        for _ in 0..100 {
            let (x, obs) = random_point(&mut rng, d, logistic);
            let g = obj.gradient(&x, &obs);
            let h = obj.hessian(&x, &obs).unwrap();
            let step = 1e-5;
            for i in 0..d {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[i] += step;
                xm[i] -= step;
                let fd = (obj.loss(&xp, &obs) - obj.loss(&xm, &obs)) / (2.0 * step);
                assert!(rel_err(g[i], fd) <= 1e-5, "grad {i}: {} vs {fd}", g[i]);
                let gp = obj.gradient(&xp, &obs);
                let gm = obj.gradient(&xm, &obs);
                for j in 0..d {
                    let fd = (gp[j] - gm[j]) / (2.0 * step);
                    assert!(rel_err(h[(j, i)], fd) <= 1e-4, "hess {j},{i}: {} vs {fd}", h[(j, i)]);
                }
            }
        }
    }

    #[test]
    fn least_squares_finite_differences() {
        finite_difference_check(&LeastSquares { dim: 4 }, false);
    }

    #[test]
    fn logistic_finite_differences() {
        finite_difference_check(&Logistic { dim: 4 }, true);
    }

    #[test]
    fn logistic_gradient_formula() {
        let a = DVector::from_vec(vec![0.3, -1.2, 2.0]);
        let x = DVector::from_vec(vec![0.5, 0.1, -0.4]);
        for b in [-1.0, 1.0] {
            let obs = Observation::new(a.clone(), b);
            let g = Objective::<f64>::gradient(&Logistic { dim: 3 }, &x, &obs);
            let want = &a * (-b / (1.0 + (b * a.dot(&x)).exp()));
            assert!((g - want).amax() < 1e-15);
        }
    }

    #[test]
    fn logistic_hessian_formula_and_psd() {
        let mut rng = derive_stream(8, &[]);
        for _ in 0..100 {
            let (x, obs) = random_point(&mut rng, 3, true);
            let h = Objective::<f64>::hessian(&Logistic { dim: 3 }, &x, &obs).unwrap();
            let u = obs.features.dot(&x);
            let want = &obs.features * obs.features.transpose() / ((1.0 + u.exp()) * (1.0 + (-u).exp()));
            assert!((&h - want).amax() < 1e-14);
            assert!(SymmetricEigen::new(h).eigenvalues.min() >= -1e-14);
        }
    }

    #[test]
    fn logistic_extreme_margins_stay_finite() {
        let obs = Observation::new(DVector::from_vec(vec![1.0]), 1.0);
        let obj = Logistic { dim: 1 };
        for m in [-800.0, 800.0] {
            let x = DVector::from_vec(vec![m]);
            assert!(Objective::<f64>::loss(&obj, &x, &obs).is_finite());
            assert!(Objective::<f64>::gradient(&obj, &x, &obs)[0].is_finite());
        }
    }
}
