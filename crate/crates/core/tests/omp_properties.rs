mod common;

use common::{gaussian, norm, rng};
use dlod_core::omp::{batch_code, omp};
use dlod_core::{Dictionary, SignalMatrix};
use proptest::prelude::*;

fn problem() -> impl Strategy<Value = (usize, usize, usize, u64)> {
    (2usize..10, 1usize..12, 0u64..1_000_000).prop_flat_map(|(m, n, seed)| (Just(m), Just(n), 1..=n.min(m), Just(seed)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn residual_is_orthogonal_to_selected_atoms((m, n, s, seed) in problem()) {
        let mut r = rng(seed);
        let d = Dictionary::from_atoms(gaussian(m, n, &mut r)).unwrap();
        let y = gaussian(m, 1, &mut r);
        let y = y.col(0);
        let res = omp(&d, y, s, 0.0).unwrap();
        let recon = d.reconstruct(&res.code);
        let resid: Vec<f64> = y.iter().zip(&recon).map(|(a, b)| a - b).collect();
        prop_assert!((norm(&resid) - res.residual_norm).abs() <= 1e-10 * (1.0 + norm(y)));
        for &j in &res.code.support {
            let c: f64 = d.atom(j).iter().zip(&resid).map(|(a, b)| a * b).sum();
            prop_assert!(c.abs() <= 1e-8 * norm(y), "atom {} correlation {}", j, c);
        }
        prop_assert!(res.code.nnz() <= s);
        let mut sorted = res.code.support.clone();
        sorted.sort_unstable();
        sorted.dedup();
        prop_assert_eq!(sorted.len(), res.code.nnz());
    }

    #[test]
    fn residual_does_not_grow_with_sparsity((m, n, _s, seed) in problem()) {
        let mut r = rng(seed);
        let d = Dictionary::from_atoms(gaussian(m, n, &mut r)).unwrap();
        let y = gaussian(m, 1, &mut r);
        let mut prev = norm(y.col(0));
        for s in 1..=n.min(m) {
            let res = omp(&d, y.col(0), s, 0.0).unwrap();
            prop_assert!(res.residual_norm <= prev + 1e-12);
            prev = res.residual_norm;
        }
    }

    #[test]
    fn zero_code_bound((m, n, s, seed) in problem()) {
        let mut r = rng(seed);
        let d = Dictionary::from_atoms(gaussian(m, n, &mut r)).unwrap();
        let y = gaussian(m, 1, &mut r);
        let res = omp(&d, y.col(0), s, 0.0).unwrap();
        prop_assert!(res.residual_norm <= norm(y.col(0)) + 1e-12);
    }
}

/// Incoherent 16x20 dictionary: an orthonormal basis plus 4 spread atoms.
/// Signals built from 2 atoms with well-separated coefficients are
/// recovered exactly.
#[test]
fn exact_recovery_on_incoherent_dictionary() {
    let m = 16;
    let mut atoms = dlod_core::linalg::Mat::<f64>::zeros(m, 20);
    for i in 0..m {
        atoms[(i, i)] = 1.0;
    }
    // Hadamard-like rows: every entry +-1/4, coherence with the identity 1/4
    for k in 0..4 {
        for i in 0..m {
            let bits = (i & (k + 1)).count_ones() + k as u32;
            atoms[(i, m + k)] = if bits % 2 == 0 { 0.25 } else { -0.25 };
        }
    }
    let d = Dictionary::from_unit_atoms(atoms).unwrap();
    // mutual coherence below 1/(2s - 1) guarantees OMP recovery at s = 2
    let mut coherence: f64 = 0.0;
    for i in 0..20 {
        for j in 0..i {
            let c: f64 = d.atom(i).iter().zip(d.atom(j)).map(|(a, b)| a * b).sum();
            coherence = coherence.max(c.abs());
        }
    }
    assert!(coherence < 1.0 / 3.0, "coherence {coherence}");
    let mut r = rng(99);
    let mut columns = Vec::new();
    let mut truth = Vec::new();
    for _ in 0..200 {
        let sup: Vec<usize> = rand::seq::index::sample(&mut r, 20, 2).into_vec();
        let mut sup = sup;
        sup.sort_unstable();
        let coeffs: Vec<f64> = sup
            .iter()
            .map(|_| {
                let mag = 1.0 + rand::Rng::random::<f64>(&mut r);
                if rand::Rng::random::<bool>(&mut r) {
                    mag
                } else {
                    -mag
                }
            })
            .collect();
        let x = dlod_core::SparseVector::new(sup.clone(), coeffs);
        columns.push(d.reconstruct(&x));
        truth.push(sup);
    }
    let y = SignalMatrix::from_columns(m, &columns).unwrap();
    let code = batch_code(&d, &y, 2).unwrap();
    for (l, sup) in truth.iter().enumerate() {
        let mut got = code.column(l).support.clone();
        got.sort_unstable();
        assert_eq!(&got, sup, "signal {l}");
        let res = d.residual_norm(y.signal(l), code.column(l));
        assert!(res < 1e-12);
    }
}
