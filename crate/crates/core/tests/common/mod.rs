#![allow(dead_code)]

use dlod_core::linalg::Mat;
use dlod_core::{RngSeed, SignalMatrix, SparseCode, SparseVector};
use rand::seq::index;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    RngSeed(seed).rng()
}

pub fn gaussian(m: usize, n: usize, rng: &mut ChaCha8Rng) -> Mat<f64> {
    Mat::from_fn(m, n, |_, _| rng.sample(StandardNormal))
}

pub fn signals(m: usize, n: usize, rng: &mut ChaCha8Rng) -> SignalMatrix<f64> {
    SignalMatrix::new(gaussian(m, n, rng)).unwrap()
}

/// Orthonormal `m x m` basis by Gram-Schmidt on a Gaussian matrix.
pub fn orthonormal(m: usize, rng: &mut ChaCha8Rng) -> Mat<f64> {
    let mut q = gaussian(m, m, rng);
    for j in 0..m {
        for i in 0..j {
            let d: f64 = (0..m).map(|r| q[(r, i)] * q[(r, j)]).sum();
            for r in 0..m {
                q[(r, j)] -= d * q[(r, i)];
            }
        }
        let n: f64 = (0..m).map(|r| q[(r, j)] * q[(r, j)]).sum::<f64>().sqrt();
        for r in 0..m {
            q[(r, j)] /= n;
        }
    }
    q
}

/// Random `s`-sparse code for `len` signals in which every atom is used
/// at least once (requires `len * s >= n_atoms`).
pub fn covering_code(n_atoms: usize, s: usize, len: usize, rng: &mut ChaCha8Rng) -> SparseCode<f64> {
    let mut columns = Vec::with_capacity(len);
    for l in 0..len {
        let mut support: Vec<usize> = index::sample(rng, n_atoms, s).into_vec();
        let forced = l % n_atoms;
        if l < n_atoms && !support.contains(&forced) {
            support[0] = forced;
        }
        support.sort_unstable();
        let coeffs = support
            .iter()
            .map(|_| {
                let v: f64 = rng.sample(StandardNormal);
                v + v.signum() * 0.3
            })
            .collect();
        columns.push(SparseVector::new(support, coeffs));
    }
    SparseCode::new(n_atoms, s, columns).unwrap()
}

pub fn mat_max_diff(a: &Mat<f64>, b: &Mat<f64>) -> f64 {
    assert_eq!((a.rows(), a.cols()), (b.rows(), b.cols()));
    a.as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// `||Y - D X||_F^2` by explicit dense products.
pub fn frobenius_objective(d: &Mat<f64>, y: &Mat<f64>, x: &Mat<f64>) -> f64 {
    let r = d.matmul(x);
    y.as_slice().iter().zip(r.as_slice()).map(|(a, b)| (a - b) * (a - b)).sum()
}
