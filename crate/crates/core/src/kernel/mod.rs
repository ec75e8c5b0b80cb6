//! Kernels and reduced kernel dictionary learning.
//!
//! A kernel dictionary is a coefficient matrix `A` (`p x n`) whose atoms live
//! in feature space as `phi(B) a_j`, where `B` is a small base: either a
//! random batch of training signals or a pre-trained linear dictionary. All
//! computations only touch the reduced Gram `k(B, B)` (`p x p`) and the
//! partial Gram `k(Y, B)` (`N x p`), never the full `N x N` kernel matrix.

mod omp;
mod train;
mod update;

pub use omp::{kernel_omp, kernel_score, KernelCoder, KernelOmpResult};
pub use train::{init_coefficients, train_rkdl, BaseKind, KdlConfig, KernelModel};
pub use update::{rkdl_d_pass, rkdl_s_pass, RkdlDState, RkdlSState};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, Cholesky, Mat};
use crate::scalar::Real;
use crate::signal::SignalMatrix;

/// Kernel function and its hyperparameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum KernelSpec<T> {
    /// `exp(-gamma ||x - y||^2)`
    Rbf { gamma: T },
    /// `(gamma x^T y + offset)^degree`
    #[serde(rename = "poly")]
    Polynomial { gamma: T, offset: T, degree: u32 },
}

impl<T: Real> KernelSpec<T> {
    pub fn rbf(gamma: T) -> Self {
        KernelSpec::Rbf { gamma }
    }

    pub fn polynomial(gamma: T, offset: T, degree: u32) -> Self {
        KernelSpec::Polynomial { gamma, offset, degree }
    }

    /// Plain inner product, `x^T y`.
    pub fn linear() -> Self {
        Self::polynomial(T::one(), T::zero(), 1)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            KernelSpec::Rbf { gamma } | KernelSpec::Polynomial { gamma, .. } if !(gamma > T::zero()) => {
                Err(Error::param("gamma", format!("{gamma} must be positive")))
            }
            KernelSpec::Polynomial { offset, .. } if !offset.is_finite() => {
                Err(Error::param("alpha", "must be finite"))
            }
            KernelSpec::Polynomial { degree: 0, .. } => Err(Error::param("beta", "degree must be at least 1")),
            _ => Ok(()),
        }
    }

    pub fn eval(&self, x: &[T], y: &[T]) -> T {
        debug_assert_eq!(x.len(), y.len());
        match *self {
            KernelSpec::Rbf { gamma } => {
                let d2: T = x.iter().zip(y).map(|(&a, &b)| (a - b) * (a - b)).sum();
                (-gamma * d2).exp()
            }
            KernelSpec::Polynomial { gamma, offset, degree } => {
                let base = gamma * dot(x, y) + offset;
                base.powi(degree as i32)
            }
        }
    }

    /// `k(a_i, b_j)` for all column pairs, `a.cols() x b.cols()`.
    pub fn gram(&self, a: &Mat<T>, b: &Mat<T>) -> Mat<T> {
        assert_eq!(a.rows(), b.rows(), "gram: row dimension mismatch");
        let cols: Vec<Vec<T>> = (0..b.cols())
            .into_par_iter()
            .map(|j| (0..a.cols()).map(|i| self.eval(a.col(i), b.col(j))).collect())
            .collect();
        Mat::from_columns(a.cols(), &cols).expect("consistent shapes")
    }

    /// Self-Gram, evaluated once per unordered pair so it is exactly symmetric.
    pub fn self_gram(&self, a: &Mat<T>) -> Mat<T> {
        let p = a.cols();
        let upper: Vec<Vec<T>> = (0..p)
            .into_par_iter()
            .map(|j| (0..=j).map(|i| self.eval(a.col(i), a.col(j))).collect())
            .collect();
        let mut g = Mat::zeros(p, p);
        for (j, col) in upper.iter().enumerate() {
            for (i, &v) in col.iter().enumerate() {
                g[(i, j)] = v;
                g[(j, i)] = v;
            }
        }
        g
    }
}

/// Accepts `g` when its smallest eigenvalue is at least `-1e-8 * trace(g)`.
pub fn check_psd<T: Real>(g: &Mat<T>) -> Result<()> {
    let tol = T::lit(1e-8) * g.trace().abs();
    if g.rows() != g.cols() || g.max_abs_diff(&g.transpose()) > T::zero() {
        return Err(Error::IndefiniteGram { tol: tol.as_f64() });
    }
    // g + tol I is positive definite exactly when every eigenvalue exceeds -tol
    if tol > T::zero() && Cholesky::factor_shifted(g, tol).is_some() {
        Ok(())
    } else {
        Err(Error::IndefiniteGram { tol: tol.as_f64() })
    }
}

/// Signals the kernel atoms are expressed over, with their Gram matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelBase<T> {
    kernel: KernelSpec<T>,
    signals: SignalMatrix<T>,
    gram: Mat<T>,
    kind: BaseKind,
}

impl<T: Real> KernelBase<T> {
    pub fn new(kernel: KernelSpec<T>, signals: SignalMatrix<T>, kind: BaseKind) -> Result<Self> {
        kernel.validate()?;
        let gram = kernel.self_gram(signals.as_mat());
        check_psd(&gram)?;
        Ok(KernelBase {
            kernel,
            signals,
            gram,
            kind,
        })
    }

    pub fn kernel(&self) -> &KernelSpec<T> {
        &self.kernel
    }

    pub fn signals(&self) -> &SignalMatrix<T> {
        &self.signals
    }

    /// Reduced Gram `k(B, B)`.
    pub fn gram(&self) -> &Mat<T> {
        &self.gram
    }

    pub fn kind(&self) -> BaseKind {
        self.kind
    }

    /// Base size `p`.
    pub fn size(&self) -> usize {
        self.signals.len()
    }

    pub fn dim(&self) -> usize {
        self.signals.dim()
    }

    /// `k(B, y)`, length `p`.
    pub fn kernel_column(&self, y: &[T]) -> Vec<T> {
        (0..self.size()).map(|i| self.kernel.eval(self.signals.signal(i), y)).collect()
    }

    /// Partial Gram `k(Y, B)`, `N x p`.
    pub fn cross_gram(&self, y: &SignalMatrix<T>) -> Result<Mat<T>> {
        if y.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: y.dim(),
            });
        }
        Ok(self.kernel.gram(y.as_mat(), self.signals.as_mat()))
    }

    /// Cholesky factor of the reduced Gram, jittered when rank deficient:
    /// `1e-10 * trace / p`, escalated tenfold up to three times.
    pub fn gram_factor(&self) -> Result<Cholesky<T>> {
        gram_factor(&self.gram)
    }
}

pub(crate) fn gram_factor<T: Real>(gram: &Mat<T>) -> Result<Cholesky<T>> {
    let p = T::from_usize(gram.rows().max(1)).unwrap();
    let base = T::lit(1e-10) * gram.trace().abs() / p;
    Cholesky::factor_jittered(gram, base, 3).ok_or(Error::SingularKernel)
}

/// Feature-space norm tolerance for kernel atoms.
pub fn feature_norm_tol<T: Real>() -> T {
    T::lit(1e-8).max(T::epsilon() * T::lit(1e4))
}

/// Coefficient matrix `A` (`p x n`) of atoms `phi(B) a_j` with unit feature norm.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelDictionary<T> {
    coeffs: Mat<T>,
}

impl<T: Real> KernelDictionary<T> {
    /// Rescales every column to `a^T K a = 1`.
    pub fn new(base: &KernelBase<T>, mut coeffs: Mat<T>) -> Result<Self> {
        if coeffs.rows() != base.size() {
            return Err(Error::DimensionMismatch {
                expected: base.size(),
                found: coeffs.rows(),
            });
        }
        for j in 0..coeffs.cols() {
            let n2 = quad_form(base.gram(), coeffs.col(j));
            if !(n2 > T::lit(crate::signal::ZERO_NORM)) {
                return Err(Error::ZeroColumn(j));
            }
            let inv = n2.sqrt().recip();
            coeffs.col_mut(j).iter_mut().for_each(|v| *v *= inv);
        }
        Ok(KernelDictionary { coeffs })
    }

    /// Wraps coefficients that must already be feature-unit-norm.
    pub fn from_normalized(base: &KernelBase<T>, coeffs: Mat<T>) -> Result<Self> {
        if coeffs.rows() != base.size() {
            return Err(Error::DimensionMismatch {
                expected: base.size(),
                found: coeffs.rows(),
            });
        }
        let dict = KernelDictionary { coeffs };
        for j in 0..dict.n_atoms() {
            let n2 = quad_form(base.gram(), dict.atom(j));
            if (n2 - T::one()).abs() > feature_norm_tol() {
                return Err(Error::NotUnitNorm {
                    atom: j,
                    norm: n2.sqrt().as_f64(),
                });
            }
        }
        Ok(dict)
    }

    pub(crate) fn from_coeffs_unchecked(coeffs: Mat<T>) -> Self {
        KernelDictionary { coeffs }
    }

    pub fn coeffs(&self) -> &Mat<T> {
        &self.coeffs
    }

    pub fn atom(&self, j: usize) -> &[T] {
        self.coeffs.col(j)
    }

    pub fn n_atoms(&self) -> usize {
        self.coeffs.cols()
    }

    /// Largest `|a_j^T K a_j - 1|`.
    pub fn max_norm_deviation(&self, base: &KernelBase<T>) -> T {
        (0..self.n_atoms())
            .map(|j| (quad_form(base.gram(), self.atom(j)) - T::one()).abs())
            .fold(T::zero(), T::max)
    }
}

/// `a^T K a`
pub(crate) fn quad_form<T: Real>(k: &Mat<T>, a: &[T]) -> T {
    dot(a, &k.matvec(a))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::RngSeed;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn random(m: usize, n: usize, seed: u64) -> Mat<f64> {
        let mut rng = RngSeed(seed).rng();
        Mat::from_fn(m, n, |_, _| rng.sample(StandardNormal))
    }

    #[test]
    fn kernel_values() {
        let x: [f64; 3] = [0.3, -1.2, 2.0];
        assert_eq!(KernelSpec::rbf(0.7).eval(&x, &x), 1.0);
        let y = [1.3, -1.2, 2.0];
        assert!((KernelSpec::rbf(1.0).eval(&x, &y) - 0.36787944117144233).abs() < 1e-15);
        let poly = KernelSpec::polynomial(1.0, 1.0, 3);
        assert_eq!(poly.eval(&[1.0, 0.0], &[0.0, 1.0]), 1.0);
        assert_eq!(poly.eval(&[1.0, 1.0], &[1.0, 1.0]), 27.0);
    }

    #[test]
    fn validation() {
        assert!(KernelSpec::rbf(0.0).validate().is_err());
        assert!(KernelSpec::polynomial(1.0, 1.0, 0).validate().is_err());
        assert!(KernelSpec::polynomial(-1.0, 1.0, 2).validate().is_err());
        assert!(KernelSpec::<f64>::linear().validate().is_ok());
    }

    #[test]
    fn rbf_self_gram_has_unit_diagonal_and_is_symmetric() {
        let a = random(4, 6, 1);
        let g = KernelSpec::rbf(0.3).self_gram(&a);
        for i in 0..6 {
            assert_eq!(g[(i, i)], 1.0);
        }
        assert_eq!(g, g.transpose());
        check_psd(&g).unwrap();
    }

    #[test]
    fn linear_gram_of_orthonormal_columns_is_identity() {
        let e = Mat::<f64>::identity(5).select_columns(&[0, 2, 4]);
        assert_eq!(KernelSpec::linear().self_gram(&e), Mat::identity(3));
    }

    #[test]
    fn gram_matches_scalar_loop() {
        let a = random(3, 3, 2);
        let b = random(3, 3, 3);
        for k in [KernelSpec::rbf(0.5), KernelSpec::polynomial(0.4, 1.0, 3)] {
            let g = k.gram(&a, &b);
            for i in 0..3 {
                for j in 0..3 {
                    assert!((g[(i, j)] - k.eval(a.col(i), b.col(j))).abs() < 1e-12);
                }
            }
            let s = k.self_gram(&a);
            assert!(s.max_abs_diff(&k.gram(&a, &a)) < 1e-12);
        }
    }

    #[test]
    fn indefinite_matrix_is_rejected() {
        let g = Mat::<f64>::from_row_major(2, 2, &[1.0, 2.0, 2.0, 1.0]).unwrap();
        assert!(matches!(check_psd(&g), Err(Error::IndefiniteGram { .. })));
    }

    #[test]
    fn kernel_dictionary_normalizes_in_feature_space() {
        let b = SignalMatrix::new(random(3, 4, 4)).unwrap();
        let base = KernelBase::new(KernelSpec::polynomial(0.5, 1.0, 2), b, BaseKind::Sampled).unwrap();
        let dict = KernelDictionary::new(&base, random(4, 5, 5)).unwrap();
        assert!(dict.max_norm_deviation(&base) < 1e-12);
        assert!(KernelDictionary::from_normalized(&base, dict.coeffs().clone()).is_ok());
        assert!(KernelDictionary::from_normalized(&base, random(4, 5, 5)).is_err());
        assert!(KernelDictionary::new(&base, Mat::zeros(4, 1)).is_err());
    }
}
