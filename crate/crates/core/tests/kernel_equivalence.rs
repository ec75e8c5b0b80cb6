//! Linear-kernel reductions: every kernel routine must agree with its
//! linear counterpart on the explicit dictionary `B * A`.

mod common;

use common::{covering_code, gaussian, mat_max_diff, orthonormal, rng, signals};
use dlod_core::dl::aksvd_pass;
use dlod_core::kernel::{
    kernel_omp, kernel_score, rkdl_d_pass, rkdl_s_pass, train_rkdl, BaseKind, KdlConfig, KernelBase, KernelDictionary,
    KernelSpec,
};
use dlod_core::omp::omp;
use dlod_core::{Dictionary, RngSeed, SignalMatrix};

fn explicit_dictionary(base: &KernelBase<f64>, dict: &KernelDictionary<f64>) -> Dictionary<f64> {
    Dictionary::from_unit_atoms(base.signals().as_mat().matmul(dict.coeffs())).unwrap()
}

#[test]
fn kernel_omp_matches_linear_omp() {
    for seed in 0..40 {
        let mut r = rng(seed);
        let (m, p, n) = (6 + (seed as usize % 7), 3 + (seed as usize % 6), 2 + (seed as usize % 5));
        let s = 1 + (seed as usize % 3).min(n - 1);
        let base = KernelBase::new(KernelSpec::linear(), signals(m, p, &mut r), BaseKind::Sampled).unwrap();
        let dict = KernelDictionary::new(&base, gaussian(p, n, &mut r)).unwrap();
        let d = explicit_dictionary(&base, &dict);
        let y = gaussian(m, 1, &mut r);
        let y = y.col(0);
        let k_y = base.kernel_column(y);
        let k_yy: f64 = y.iter().map(|v| v * v).sum();
        let kr = kernel_omp(&base, &dict, &k_y, k_yy, s).unwrap();
        let lr = omp(&d, y, s, 0.0).unwrap();
        assert_eq!(kr.code.support, lr.code.support, "seed {seed}");
        for (a, b) in kr.code.coeffs.iter().zip(&lr.code.coeffs) {
            assert!((a - b).abs() < 1e-8, "seed {seed}: {a} vs {b}");
        }
        let score = kernel_score(&base, &dict, y, s).unwrap();
        assert!((score - lr.residual_norm).abs() < 1e-8, "seed {seed}");
    }
}

#[test]
fn passes_match_aksvd_with_orthonormal_base() {
    for seed in 0..20 {
        let mut r = rng(100 + seed);
        let (m, n, len, s) = (5, 4, 12, 2);
        let b = orthonormal(m, &mut r);
        let y = signals(m, len, &mut r);
        let gram = b.tr_matmul(&b);
        let cross = y.as_mat().tr_matmul(&b);
        let base = KernelBase::new(KernelSpec::linear(), SignalMatrix::new(b.clone()).unwrap(), BaseKind::Sampled).unwrap();
        let dict = KernelDictionary::new(&base, gaussian(m, n, &mut r)).unwrap();
        let code = covering_code(n, s, len, &mut r);
        let d = explicit_dictionary(&base, &dict);
        let (d_lin, x_lin) = aksvd_pass(&d, &y, &code).unwrap();
        for pass in [rkdl_s_pass, rkdl_d_pass] {
            let (a_new, x_new) = pass(&gram, &cross, &dict, &code).unwrap();
            let d_ker = b.matmul(a_new.coeffs());
            assert!(mat_max_diff(&d_ker, d_lin.atoms()) < 1e-8, "seed {seed}");
            assert!(mat_max_diff(&x_new.to_dense(), &x_lin.to_dense()) < 1e-8, "seed {seed}");
        }
    }
}

#[test]
fn exact_representation_is_a_fixed_point() {
    let mut r = rng(7);
    let (m, p, n, len) = (6, 5, 3, 9);
    let base = KernelBase::new(KernelSpec::rbf(0.3), signals(m, p, &mut r), BaseKind::TrainedDict).unwrap();
    let dict = KernelDictionary::new(&base, gaussian(p, n, &mut r)).unwrap();
    let code = covering_code(n, 2, len, &mut r);
    // signals whose images are exactly phi(B) A x_l: Khat rows are (Kbar A x_l)^T
    let z = dict.coeffs().matmul(&code.to_dense());
    let cross = base.gram().matmul(&z).transpose();
    for pass in [rkdl_s_pass, rkdl_d_pass] {
        let (a_new, x_new) = pass(base.gram(), &cross, &dict, &code).unwrap();
        for j in 0..n {
            let (old, new) = (dict.atom(j), a_new.atom(j));
            let dot: f64 = old.iter().zip(new).map(|(a, b)| a * b).sum();
            let sign = dot.signum();
            for (a, b) in old.iter().zip(new) {
                assert!((a - sign * b).abs() < 1e-8);
            }
        }
        assert!(mat_max_diff(&x_new.to_dense(), &code.to_dense()) < 1e-8);
    }
}

#[test]
fn vanishing_cross_term_reduces_to_the_sampled_form() {
    // one atom: every other image is zero, so a = (||x||^2 Kbar)^-1 Khat^T x
    let mut r = rng(8);
    let (m, p, len) = (4, 3, 5);
    let base = KernelBase::new(KernelSpec::rbf(0.5), signals(m, p, &mut r), BaseKind::TrainedDict).unwrap();
    let y = signals(m, len, &mut r);
    let cross = base.cross_gram(&y).unwrap();
    let dict = KernelDictionary::new(&base, gaussian(p, 1, &mut r)).unwrap();
    let code = covering_code(1, 1, len, &mut r);
    let x: Vec<f64> = code.columns().iter().map(|c| c.coeffs[0]).collect();
    let xx: f64 = x.iter().map(|v| v * v).sum();
    let rhs = cross.tr_matvec(&x);
    let chol = dlod_core::linalg::Cholesky::factor(base.gram()).unwrap();
    let expected: Vec<f64> = chol.solve(&rhs).iter().map(|v| v / xx).collect();
    let state = dlod_core::kernel::RkdlDState::new(base.gram(), &cross, &dict, &code).unwrap();
    let got = state.closed_form_atom(0).unwrap();
    for (a, b) in got.iter().zip(&expected) {
        assert!((a - b).abs() < 1e-10);
    }
    let (d_pass, _) = rkdl_d_pass(base.gram(), &cross, &dict, &code).unwrap();
    let (s_pass, _) = rkdl_s_pass(base.gram(), &cross, &dict, &code).unwrap();
    assert!(mat_max_diff(d_pass.coeffs(), s_pass.coeffs()) < 1e-12);
}

#[test]
fn trained_linear_model_errors_match_explicit_dictionary() {
    let mut r = rng(9);
    let y = signals(8, 40, &mut r).normalize_columns().unwrap();
    let cfg = KdlConfig {
        dl: dlod_core::dl::DlConfig {
            n_atoms: 6,
            sparsity: 2,
            iterations: 5,
            seed: RngSeed(3),
            ..Default::default()
        },
        base_fraction: 1.0,
        ..KdlConfig::new(KernelSpec::linear(), BaseKind::Sampled)
    };
    let model = train_rkdl(&y, &cfg, None).unwrap();
    assert_eq!(model.base.size(), 40);
    assert!(model.dict.max_norm_deviation(&model.base) < 1e-8);
    let d = Dictionary::from_atoms(y.as_mat().matmul(model.dict.coeffs())).unwrap();
    for l in 0..y.len() {
        let ks = kernel_score(&model.base, &model.dict, y.signal(l), 2).unwrap();
        let ls = omp(&d, y.signal(l), 2, 0.0).unwrap().residual_norm;
        assert!((ks - ls).abs() < 1e-6, "signal {l}: {ks} vs {ls}");
    }
}

#[test]
fn rbf_scores_are_bounded_by_one() {
    let mut r = rng(10);
    let base = KernelBase::new(KernelSpec::rbf(0.2), signals(5, 8, &mut r), BaseKind::Sampled).unwrap();
    let dict = KernelDictionary::new(&base, gaussian(8, 4, &mut r)).unwrap();
    let probes = signals(5, 50, &mut r);
    for l in 0..probes.len() {
        let s = kernel_score(&base, &dict, probes.signal(l), 2).unwrap();
        assert!((0.0..=1.0 + 1e-12).contains(&s));
    }
    // a base signal that is exactly one atom's pre-image scores zero
    let unit = {
        let mut a = dlod_core::linalg::Mat::zeros(8, 1);
        a[(2, 0)] = 1.0;
        KernelDictionary::new(&base, a).unwrap()
    };
    assert!(kernel_score(&base, &unit, base.signals().signal(2), 1).unwrap() < 1e-7);
}
