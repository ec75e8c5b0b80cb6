//! Dictionary update passes of reduced kernel DL.
//!
//! Both passes update atom `j` from the signals `I_j` that use it. With
//! `W_l = A x_l - a_j x_{j,l}` the coefficient image of everything but atom
//! `j` for signal `l`, the optimal unnormalized atom is
//!
//! ```text
//! a_j = (||x||^2 Kbar)^-1 (Khat_I^T x - Kbar W x)
//! ```
//!
//! then `a_j` is scaled to `a_j^T Kbar a_j = 1` and the coefficients become
//! `x_l = (Khat_l - W_l^T Kbar) a_j`. The sampled-base pass keeps the error
//! `E = I - P A X` through the coefficient images `A X` (one column per
//! signal); the dictionary-base pass keeps the transposed sum
//! `S = sum_i X_i^T a_i^T` (one row per signal). Both touch only the columns
//! in `I_j`.

use crate::error::{Error, Result};
use crate::linalg::{axpy, dot, Cholesky, Mat};
use crate::scalar::Real;
use crate::signal::SparseCode;

use super::{gram_factor, quad_form, KernelDictionary};

/// Storage of the per-signal coefficient images `A x_l`.
trait ImageStore<T> {
    fn image(&self, l: usize) -> Vec<T>;
    fn set_image(&mut self, l: usize, v: &[T]);
}

/// `p x N`, column `l` is `A x_l`; the error is `E = I - P * images`.
struct ErrorImages<T>(Mat<T>);

impl<T: Real> ImageStore<T> for ErrorImages<T> {
    fn image(&self, l: usize) -> Vec<T> {
        self.0.col(l).to_vec()
    }

    fn set_image(&mut self, l: usize, v: &[T]) {
        self.0.col_mut(l).copy_from_slice(v);
    }
}

/// `N x p`, row `l` is `(A x_l)^T`.
struct SumRows<T>(Mat<T>);

impl<T: Real> ImageStore<T> for SumRows<T> {
    fn image(&self, l: usize) -> Vec<T> {
        self.0.row(l)
    }

    fn set_image(&mut self, l: usize, v: &[T]) {
        for (k, &x) in v.iter().enumerate() {
            self.0[(l, k)] = x;
        }
    }
}

struct Core<'a, T, S> {
    gram: &'a Mat<T>,
    /// `Khat^T`, `p x N`, so row `l` of `Khat` is a contiguous column.
    cross_t: Mat<T>,
    factor: Cholesky<T>,
    coeffs: Mat<T>,
    code: SparseCode<T>,
    usage: Vec<Vec<(usize, usize)>>,
    store: S,
}

impl<'a, T: Real, S: ImageStore<T>> Core<'a, T, S> {
    fn build(
        gram: &'a Mat<T>,
        cross: &Mat<T>,
        dict: &KernelDictionary<T>,
        code: &SparseCode<T>,
        make_store: impl FnOnce(&Mat<T>) -> S,
    ) -> Result<Self> {
        let p = gram.rows();
        if gram.cols() != p || cross.cols() != p || dict.coeffs().rows() != p {
            return Err(Error::DimensionMismatch {
                expected: p,
                found: if cross.cols() != p { cross.cols() } else { dict.coeffs().rows() },
            });
        }
        if code.len() != cross.rows() || code.n_atoms() != dict.n_atoms() {
            return Err(Error::InvalidCode(format!(
                "code is {}x{}, expected {}x{}",
                code.n_atoms(),
                code.len(),
                dict.n_atoms(),
                cross.rows()
            )));
        }
        let images = dict.coeffs().matmul(&code.to_dense());
        Ok(Core {
            gram,
            cross_t: cross.transpose(),
            factor: gram_factor(gram)?,
            coeffs: dict.coeffs().clone(),
            usage: code.usage(),
            code: code.clone(),
            store: make_store(&images),
        })
    }

    fn row_x(&self, j: usize) -> Vec<T> {
        self.usage[j]
            .iter()
            .map(|&(l, s)| self.code.column(l).coeffs[s])
            .collect()
    }

    /// Images of signal `l` without atom `j`.
    fn others(&self, j: usize, l: usize, xl: T) -> Vec<T> {
        let mut w = self.store.image(l);
        axpy(-xl, self.coeffs.col(j), &mut w);
        w
    }

    /// `b = Khat_I^T x - Kbar W x`, the right-hand side of the atom equation.
    fn rhs(&self, j: usize, x: &[T]) -> Vec<T> {
        let p = self.gram.rows();
        let mut direct = vec![T::zero(); p];
        let mut wx = vec![T::zero(); p];
        for (&(l, _), &xl) in self.usage[j].iter().zip(x) {
            axpy(xl, self.cross_t.col(l), &mut direct);
            axpy(xl, &self.others(j, l, xl), &mut wx);
        }
        let kwx = self.gram.matvec(&wx);
        direct.iter().zip(&kwx).map(|(&a, &b)| a - b).collect()
    }

    fn closed_form_atom(&self, j: usize) -> Option<Vec<T>> {
        let x = self.row_x(j);
        let xx: T = x.iter().map(|&v| v * v).sum();
        if self.usage[j].is_empty() || !(xx > T::zero()) {
            return None;
        }
        let inv = xx.recip();
        Some(self.factor.solve(&self.rhs(j, &x)).into_iter().map(|v| v * inv).collect())
    }

    fn atom_gradient(&self, j: usize, a: &[T]) -> Vec<T> {
        let x = self.row_x(j);
        let xx: T = x.iter().map(|&v| v * v).sum();
        let ka = self.gram.matvec(a);
        let b = self.rhs(j, &x);
        let two = T::lit(2.0);
        ka.iter().zip(&b).map(|(&k, &bb)| two * xx * k - two * bb).collect()
    }

    fn update_atom(&mut self, j: usize) {
        let Some(mut a) = self.closed_form_atom(j) else { return };
        let n2 = quad_form(self.gram, &a);
        if !(n2 > T::lit(crate::signal::ZERO_NORM)) {
            return;
        }
        let inv = n2.sqrt().recip();
        a.iter_mut().for_each(|v| *v *= inv);
        let ka = self.gram.matvec(&a);

        let users = std::mem::take(&mut self.usage[j]);
        let x = users.iter().map(|&(l, s)| self.code.column(l).coeffs[s]).collect::<Vec<_>>();
        for (&(l, s), &xl) in users.iter().zip(&x) {
            let mut w = self.store.image(l);
            axpy(-xl, self.coeffs.col(j), &mut w);
            let x_new = dot(self.cross_t.col(l), &a) - dot(&w, &ka);
            axpy(x_new, &a, &mut w);
            self.store.set_image(l, &w);
            *self.code.coeff_mut(l, s) = x_new;
        }
        self.usage[j] = users;
        self.coeffs.col_mut(j).copy_from_slice(&a);
    }

    /// `sum_l k(y_l, y_l) - 2 khat_l^T z_l + z_l^T Kbar z_l` with `z_l = A x_l`.
    fn objective(&self, k_diag: &[T]) -> T {
        assert_eq!(k_diag.len(), self.code.len());
        (0..self.code.len())
            .map(|l| {
                let z = self.store.image(l);
                k_diag[l] - T::lit(2.0) * dot(self.cross_t.col(l), &z) + quad_form(self.gram, &z)
            })
            .sum()
    }

    fn into_parts(self) -> (KernelDictionary<T>, SparseCode<T>) {
        (KernelDictionary::from_coeffs_unchecked(self.coeffs), self.code)
    }
}

macro_rules! pass_state {
    ($(#[$doc:meta])* $name:ident, $store:ident, $make:expr) => {
        $(#[$doc])*
        pub struct $name<'a, T: Real> {
            core: Core<'a, T, $store<T>>,
        }

        impl<'a, T: Real> $name<'a, T> {
            /// `gram` is the reduced Gram `k(B, B)`, `cross` the partial Gram
            /// `k(Y, B)` restricted to the coded signals.
            pub fn new(
                gram: &'a Mat<T>,
                cross: &Mat<T>,
                dict: &KernelDictionary<T>,
                code: &SparseCode<T>,
            ) -> Result<Self> {
                Ok($name {
                    core: Core::build(gram, cross, dict, code, $make)?,
                })
            }

            pub fn n_atoms(&self) -> usize {
                self.core.coeffs.cols()
            }

            /// Atom update, normalization and coefficient update for atom `j`.
            /// Atoms nobody uses, or whose coefficients are all zero, are left alone.
            pub fn update_atom(&mut self, j: usize) {
                self.core.update_atom(j)
            }

            /// The minimizer of the atom subproblem before normalization.
            pub fn closed_form_atom(&self, j: usize) -> Option<Vec<T>> {
                self.core.closed_form_atom(j)
            }

            /// Gradient of the atom-`j` subproblem at `a`: `2 ||x||^2 Kbar a - 2 Khat^T F x`.
            pub fn atom_gradient(&self, j: usize, a: &[T]) -> Vec<T> {
                self.core.atom_gradient(j, a)
            }

            /// Feature-space objective `||phi(Y) - phi(B) A X||_F^2`, given the
            /// diagonal `k(y_l, y_l)` of the coded signals.
            pub fn objective(&self, k_diag: &[T]) -> T {
                self.core.objective(k_diag)
            }

            pub fn dictionary(&self) -> &Mat<T> {
                &self.core.coeffs
            }

            pub fn code(&self) -> &SparseCode<T> {
                &self.core.code
            }

            pub fn into_parts(self) -> (KernelDictionary<T>, SparseCode<T>) {
                self.core.into_parts()
            }
        }
    };
}

pass_state!(
    /// Update state of the sampled-base pass, tracking `E = I - P A X`.
    RkdlSState,
    ErrorImages,
    |images: &Mat<T>| ErrorImages(images.clone())
);

pass_state!(
    /// Update state of the dictionary-base pass, tracking `S = sum_i X_i^T a_i^T`.
    RkdlDState,
    SumRows,
    |images: &Mat<T>| SumRows(images.transpose())
);

/// One sweep over all atoms with a sampled signal base.
pub fn rkdl_s_pass<T: Real>(
    gram: &Mat<T>,
    cross: &Mat<T>,
    dict: &KernelDictionary<T>,
    code: &SparseCode<T>,
) -> Result<(KernelDictionary<T>, SparseCode<T>)> {
    let mut state = RkdlSState::new(gram, cross, dict, code)?;
    for j in 0..state.n_atoms() {
        state.update_atom(j);
    }
    Ok(state.into_parts())
}

/// One sweep over all atoms with a trained dictionary base.
pub fn rkdl_d_pass<T: Real>(
    gram: &Mat<T>,
    cross: &Mat<T>,
    dict: &KernelDictionary<T>,
    code: &SparseCode<T>,
) -> Result<(KernelDictionary<T>, SparseCode<T>)> {
    let mut state = RkdlDState::new(gram, cross, dict, code)?;
    for j in 0..state.n_atoms() {
        state.update_atom(j);
    }
    Ok(state.into_parts())
}
