use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::{Error, Result, Scalar};

/// Covariance of the limit of `sqrt(n) * (x_out - x*)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AsymptoticCovariance<T: Scalar> {
    matrix: DMatrix<T>,
}

fn tolerance<T: Scalar>(m: &DMatrix<T>) -> T {
    let scale = m.iter().fold(T::one(), |acc, v| acc.max(v.abs()));
    T::of(1e-10).max(T::eps() * T::of(64.0) * scale)
}

impl<T: Scalar> AsymptoticCovariance<T> {
    /// Accepts a square matrix that is symmetric and has no eigenvalue below
    /// `-1e-10` (absolute).
    pub fn new(matrix: DMatrix<T>) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::Dimension(format!(
                "covariance must be square, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        let tol = tolerance(&matrix);
        if (&matrix - matrix.transpose()).amax() > tol {
            return Err(Error::domain("covariance matrix is not symmetric"));
        }
        if matrix.nrows() > 0 {
            let eig = SymmetricEigen::new(matrix.clone());
            if eig.eigenvalues.min() < -tol {
                return Err(Error::domain("covariance matrix is not positive semi-definite"));
            }
        }
        Ok(Self { matrix })
    }

    pub fn matrix(&self) -> &DMatrix<T> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<T> {
        self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }
}

fn check_pair<T: Scalar>(g: &DMatrix<T>, s: &DMatrix<T>) -> Result<()> {
    if !g.is_square() || g.shape() != s.shape() {
        return Err(Error::Dimension(format!(
            "G is {:?} and S is {:?}; both must be the same square shape",
            g.shape(),
            s.shape()
        )));
    }
    if (g - g.transpose()).amax() > tolerance(g) {
        return Err(Error::domain("G must be symmetric"));
    }
    Ok(())
}

fn symmetrize<T: Scalar>(m: DMatrix<T>) -> DMatrix<T> {
    (&m + m.transpose()) * T::of(0.5)
}

/// Averaged-SGD sandwich `G^{-1} S G^{-1}`.
pub fn asgd_asymptotic_cov<T: Scalar>(
    g: &DMatrix<T>,
    s: &DMatrix<T>,
) -> Result<AsymptoticCovariance<T>> {
    check_pair(g, s)?;
    let chol = g
        .clone()
        .cholesky()
        .ok_or(Error::SingularMatrix("G is not positive definite"))?;
    let g_inv = chol.inverse();
    AsymptoticCovariance::new(symmetrize(&g_inv * s * &g_inv))
}

/// Last-iterate SGD covariance under `eta_t = eta / t`, expressed in the
/// eigenbasis of `G`.
///
/// With `G = Q D Qᵀ` (eigenvalues in decreasing order) the entries are
/// `eta² (eta d_i + eta d_j - 1)^{-1} (Qᵀ S Q)_{ij}`. Eigenvectors are only
/// determined up to sign, so off-diagonal signs follow the returned `basis`.
#[derive(Debug, Clone, PartialEq)]
pub struct SgdAsymptoticCovariance<T: Scalar> {
    pub eigen_cov: AsymptoticCovariance<T>,
    /// Columns are eigenvectors of `G`.
    pub basis: DMatrix<T>,
    /// Eigenvalues of `G`, decreasing.
    pub eigenvalues: DVector<T>,
}

impl<T: Scalar> SgdAsymptoticCovariance<T> {
    /// `Q Σ_eig Qᵀ`, the same covariance in the original coordinates.
    pub fn in_original_basis(&self) -> Result<AsymptoticCovariance<T>> {
        let m = &self.basis * self.eigen_cov.matrix() * self.basis.transpose();
        AsymptoticCovariance::new(symmetrize(m))
    }

    /// Rotates a residual `x_out - x*` into the eigenbasis (`Qᵀ r`).
    pub fn rotate(&self, residual: &DVector<T>) -> DVector<T> {
        self.basis.transpose() * residual
    }
}

pub fn sgd_asymptotic_cov<T: Scalar>(
    g: &DMatrix<T>,
    s: &DMatrix<T>,
    eta: T,
) -> Result<SgdAsymptoticCovariance<T>> {
    check_pair(g, s)?;
    if !(eta > T::zero()) {
        return Err(Error::domain("eta must be positive"));
    }
    let d = g.nrows();
    let eig = SymmetricEigen::new(g.clone());
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .expect("finite eigenvalues")
    });
    let eigenvalues = DVector::from_iterator(d, order.iter().map(|&k| eig.eigenvalues[k]));
    if d > 0 && !(eigenvalues[d - 1] > T::zero()) {
        return Err(Error::SingularMatrix("G is not positive definite"));
    }
    let basis = DMatrix::from_fn(d, d, |r, c| eig.eigenvectors[(r, order[c])]);

    let rotated = basis.transpose() * s * &basis;
    let mut min_denominator = T::max_value().unwrap_or(T::one());
    let mut cov = DMatrix::zeros(d, d);
    for i in 0..d {
        for j in 0..d {
            let denom = eta * eigenvalues[i] + eta * eigenvalues[j] - T::one();
            min_denominator = min_denominator.min(denom);
            cov[(i, j)] = eta * eta / denom * rotated[(i, j)];
        }
    }
    if d > 0 && !(min_denominator > T::zero()) {
        return Err(Error::StepSizeDomain {
            value: min_denominator.to_f64_lossy(),
        });
    }
    Ok(SgdAsymptoticCovariance {
        eigen_cov: AsymptoticCovariance::new(symmetrize(cov))?,
        basis,
        eigenvalues,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn asgd_identity() {
        let i3 = DMatrix::<f64>::identity(3, 3);
        let c = asgd_asymptotic_cov(&i3, &i3).unwrap();
        assert_relative_eq!(c.matrix(), &i3, epsilon = 1e-15);
    }

    #[test]
    fn asgd_linear_regression_sandwich() {
        // G = Σ, S = σ²Σ gives σ²Σ⁻¹; here σ = 1
        let sigma = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 1.0]);
        let c = asgd_asymptotic_cov(&sigma, &sigma).unwrap();
        let want = DMatrix::from_row_slice(2, 2, &[4.0, -2.0, -2.0, 4.0]) / 3.0;
        assert_relative_eq!(c.matrix(), &want, epsilon = 1e-14);
    }

    #[test]
    fn asgd_diagonal() {
        let g = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 4.0]));
        let c = asgd_asymptotic_cov(&g, &DMatrix::identity(2, 2)).unwrap();
        let want = DMatrix::from_diagonal(&DVector::from_vec(vec![0.25, 1.0 / 16.0]));
        assert_relative_eq!(c.matrix(), &want, epsilon = 1e-15);
    }

    #[test]
    fn asgd_singular_g() {
        let g = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(matches!(
            asgd_asymptotic_cov(&g, &DMatrix::identity(2, 2)),
            Err(Error::SingularMatrix(_))
        ));
    }

    #[test]
    fn sgd_scalar_cases() {
        let one = DMatrix::from_element(1, 1, 1.0);
        let c = sgd_asymptotic_cov(&one, &one, 1.0).unwrap();
        assert_relative_eq!(c.eigen_cov.matrix()[(0, 0)], 1.0, epsilon = 1e-15);

        let g = DMatrix::from_element(1, 1, 2.0);
        let s = DMatrix::from_element(1, 1, 4.0);
        let c = sgd_asymptotic_cov(&g, &s, 1.0).unwrap();
        assert_relative_eq!(c.eigen_cov.matrix()[(0, 0)], 4.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn sgd_identity_2d() {
        let i2 = DMatrix::<f64>::identity(2, 2);
        let c = sgd_asymptotic_cov(&i2, &i2, 1.0).unwrap();
        assert_relative_eq!(c.eigen_cov.matrix(), &i2, epsilon = 1e-15);
        assert_relative_eq!(c.in_original_basis().unwrap().matrix(), &i2, epsilon = 1e-15);
    }

    #[test]
    fn sgd_step_size_domain() {
        let i2 = DMatrix::<f64>::identity(2, 2);
        assert!(matches!(
            sgd_asymptotic_cov(&i2, &i2, 0.5),
            Err(Error::StepSizeDomain { .. })
        ));
    }

    #[test]
    fn sgd_eigenvalues_sorted_and_basis_orthonormal() {
        let g = DMatrix::from_row_slice(3, 3, &[2.0, 0.3, 0.1, 0.3, 1.0, 0.2, 0.1, 0.2, 3.0]);
        let s = DMatrix::identity(3, 3);
        let c = sgd_asymptotic_cov(&g, &s, 1.0).unwrap();
        assert!(c.eigenvalues[0] >= c.eigenvalues[1] && c.eigenvalues[1] >= c.eigenvalues[2]);
        let qtq = c.basis.transpose() * &c.basis;
        assert_relative_eq!(qtq, DMatrix::identity(3, 3), epsilon = 1e-12);
        let back = &c.basis * DMatrix::from_diagonal(&c.eigenvalues) * c.basis.transpose();
        assert_relative_eq!(back, g, epsilon = 1e-12);
    }

    #[test]
    fn rejects_asymmetric_and_indefinite() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert!(AsymptoticCovariance::new(a).is_err());
        let b = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(AsymptoticCovariance::new(b).is_err());
    }
}
