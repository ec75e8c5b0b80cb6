//! The kernel atom subproblem checked against a dense trace objective.
//!
//! Sampled base: `B = Y P` for an explicit selection matrix `P`, and the
//! objective is `tr(F^T K F)` with `K = k(Y, Y)` and `F = I - P A X`.
//! Dictionary base: with the joint Gram `G = k([Y, B], [Y, B])` and
//! `F = [I; -A X]` the objective is `tr(F^T G F)`.

mod common;

use common::{covering_code, gaussian, norm, rng, signals};
use dlod_core::dl::AksvdState;
use dlod_core::kernel::{KernelDictionary, KernelSpec, RkdlDState, RkdlSState};
use dlod_core::linalg::Mat;
use dlod_core::{Dictionary, SignalMatrix, SparseCode};
use rand::Rng;

struct Instance {
    /// Joint Gram of `[Y, B]`, `(N + p) x (N + p)`.
    joint: Mat<f64>,
    n_signals: usize,
    gram: Mat<f64>,
    cross: Mat<f64>,
    dict: KernelDictionary<f64>,
    code: SparseCode<f64>,
    /// Base column indices into `Y` for the sampled case.
    picks: Option<Vec<usize>>,
}

fn kernel_for(seed: u64, m: usize) -> KernelSpec<f64> {
    if seed % 3 == 0 {
        KernelSpec::polynomial(0.5 / m as f64, 1.0, 2)
    } else {
        KernelSpec::rbf(1.0 / m as f64)
    }
}

fn instance(seed: u64, sampled: bool) -> Instance {
    let mut r = rng(seed);
    let m = r.random_range(2..6);
    let len = r.random_range(5..12);
    let p = r.random_range(2..5usize.min(len));
    let n = r.random_range(1..5);
    let s = r.random_range(1..=n.min(2));
    let kernel = kernel_for(seed, m);
    let y = signals(m, len, &mut r);
    let (b, picks) = if sampled {
        let mut idx = rand::seq::index::sample(&mut r, len, p).into_vec();
        idx.sort_unstable();
        (y.column_subset(&idx).unwrap(), Some(idx))
    } else {
        (signals(m, p, &mut r), None)
    };
    let mut cols: Vec<Vec<f64>> = (0..len).map(|l| y.signal(l).to_vec()).collect();
    cols.extend((0..p).map(|i| b.signal(i).to_vec()));
    let all = SignalMatrix::from_columns(m, &cols).unwrap();
    let joint = kernel.gram(all.as_mat(), all.as_mat());
    let gram = kernel.gram(b.as_mat(), b.as_mat());
    let cross = kernel.gram(y.as_mat(), b.as_mat());
    let base = dlod_core::kernel::KernelBase::new(kernel, b, dlod_core::kernel::BaseKind::Sampled).unwrap();
    let dict = KernelDictionary::new(&base, gaussian(p, n, &mut r)).unwrap();
    let code = covering_code(n, s, len, &mut r);
    Instance {
        joint,
        n_signals: len,
        gram,
        cross,
        dict,
        code,
        picks,
    }
}

/// Dense oracle: `tr(F^T K F)` with `F = I - P A X` for a sampled base, or
/// `tr(F^T G F)` with `F = [I; -A X]` for a separate base.
fn trace_objective(inst: &Instance, a: &Mat<f64>, x: &Mat<f64>) -> f64 {
    let nn = inst.n_signals;
    let ax = a.matmul(x);
    match &inst.picks {
        Some(picks) => {
            let k = Mat::from_fn(nn, nn, |i, j| inst.joint[(i, j)]);
            let p_mat = Mat::from_fn(nn, picks.len(), |i, c| if picks[c] == i { 1.0 } else { 0.0 });
            let pax = p_mat.matmul(&ax);
            let f = Mat::from_fn(nn, nn, |i, j| if i == j { 1.0 } else { 0.0 } - pax[(i, j)]);
            f.tr_matmul(&k.matmul(&f)).trace()
        }
        None => {
            let p = a.rows();
            let f = Mat::from_fn(nn + p, nn, |i, j| {
                if i < nn {
                    if i == j {
                        1.0
                    } else {
                        0.0
                    }
                } else {
                    -ax[(i - nn, j)]
                }
            });
            f.tr_matmul(&inst.joint.matmul(&f)).trace()
        }
    }
}

fn with_column(a: &Mat<f64>, j: usize, col: &[f64]) -> Mat<f64> {
    let mut out = a.clone();
    out.col_mut(j).copy_from_slice(col);
    out
}

fn k_diag(inst: &Instance) -> Vec<f64> {
    (0..inst.n_signals).map(|l| inst.joint[(l, l)]).collect()
}

enum State<'a> {
    S(RkdlSState<'a, f64>),
    D(RkdlDState<'a, f64>),
}

impl State<'_> {
    fn gradient(&self, j: usize, a: &[f64]) -> Vec<f64> {
        match self {
            State::S(s) => s.atom_gradient(j, a),
            State::D(s) => s.atom_gradient(j, a),
        }
    }
    fn closed_form(&self, j: usize) -> Option<Vec<f64>> {
        match self {
            State::S(s) => s.closed_form_atom(j),
            State::D(s) => s.closed_form_atom(j),
        }
    }
    fn update(&mut self, j: usize) {
        match self {
            State::S(s) => s.update_atom(j),
            State::D(s) => s.update_atom(j),
        }
    }
    fn parts(&self) -> (Mat<f64>, Mat<f64>, usize) {
        match self {
            State::S(s) => (s.dictionary().clone(), s.code().to_dense(), s.n_atoms()),
            State::D(s) => (s.dictionary().clone(), s.code().to_dense(), s.n_atoms()),
        }
    }
    fn objective(&self, k_diag: &[f64]) -> f64 {
        match self {
            State::S(s) => s.objective(k_diag),
            State::D(s) => s.objective(k_diag),
        }
    }
}

fn state(inst: &Instance) -> State<'_> {
    if inst.picks.is_some() {
        State::S(RkdlSState::new(&inst.gram, &inst.cross, &inst.dict, &inst.code).unwrap())
    } else {
        State::D(RkdlDState::new(&inst.gram, &inst.cross, &inst.dict, &inst.code).unwrap())
    }
}

fn check_gradient(seed: u64, sampled: bool) {
    let inst = instance(seed, sampled);
    let st = state(&inst);
    let (a, x, n) = st.parts();
    let mut r = rng(seed + 10_000);
    for j in 0..n {
        let probe: Vec<f64> = (0..a.rows()).map(|_| r.random_range(-1.0..1.0)).collect();
        let g = st.gradient(j, &probe);
        let h = 1e-5;
        let fd: Vec<f64> = (0..probe.len())
            .map(|i| {
                let mut up = probe.clone();
                let mut down = probe.clone();
                up[i] += h;
                down[i] -= h;
                let fu = trace_objective(&inst, &with_column(&a, j, &up), &x);
                let fl = trace_objective(&inst, &with_column(&a, j, &down), &x);
                (fu - fl) / (2.0 * h)
            })
            .collect();
        let diff: Vec<f64> = g.iter().zip(&fd).map(|(a, b)| a - b).collect();
        let scale = norm(&g).max(1e-3);
        assert!(norm(&diff) / scale < 1e-5, "seed {seed} atom {j}: {g:?} vs {fd:?}");

        if let Some(star) = st.closed_form(j) {
            let at_star = st.gradient(j, &star);
            let at_zero = st.gradient(j, &vec![0.0; star.len()]);
            let span: Vec<f64> = at_star.iter().zip(&at_zero).map(|(a, b)| a - b).collect();
            let scaled = norm(&at_star) / (norm(&at_zero) + norm(&span));
            assert!(scaled < 1e-8, "seed {seed} atom {j}: scaled gradient {scaled}");
        }
    }
}

#[test]
fn sampled_base_gradient_matches_finite_differences() {
    for seed in 0..50 {
        check_gradient(seed, true);
    }
}

#[test]
fn dictionary_base_gradient_matches_finite_differences() {
    for seed in 0..50 {
        check_gradient(1000 + seed, false);
    }
}

fn check_monotone(seed: u64, sampled: bool) {
    let inst = instance(seed, sampled);
    let diag = k_diag(&inst);
    let mut st = state(&inst);
    let (a, x, n) = st.parts();
    let mut prev = trace_objective(&inst, &a, &x);
    assert!((st.objective(&diag) - prev).abs() < 1e-9 * prev.max(1.0));
    for j in 0..n {
        st.update(j);
        let (a, x, _) = st.parts();
        let now = trace_objective(&inst, &a, &x);
        assert!(now <= prev + 1e-9 * prev.max(1.0), "seed {seed} atom {j}: {prev} -> {now}");
        assert!((st.objective(&diag) - now).abs() < 1e-9 * now.max(1.0), "tracked objective drifted");
        prev = now;
    }
}

#[test]
fn kernel_updates_do_not_increase_the_trace_objective() {
    for seed in 0..50 {
        check_monotone(2000 + seed, true);
        check_monotone(3000 + seed, false);
    }
}

#[test]
fn aksvd_updates_do_not_increase_the_frobenius_objective() {
    for seed in 0..100 {
        let mut r = rng(4000 + seed);
        let m = r.random_range(2..8);
        let n = r.random_range(1..6);
        let len = r.random_range(n..20);
        let s = r.random_range(1..=n.min(3));
        let y = signals(m, len, &mut r);
        let d = Dictionary::from_atoms(gaussian(m, n, &mut r)).unwrap();
        let code = covering_code(n, s, len, &mut r);
        let mut st = AksvdState::new(&d, &y, &code).unwrap();
        let mut prev = common::frobenius_objective(d.atoms(), y.as_mat(), &code.to_dense());
        for j in 0..n {
            st.update_atom(j);
            let now = st.objective();
            assert!(now <= prev + 1e-9 * prev.max(1.0), "seed {seed} atom {j}: {prev} -> {now}");
            prev = now;
        }
        let (d2, x2) = st.into_parts();
        let direct = common::frobenius_objective(d2.atoms(), y.as_mat(), &x2.to_dense());
        assert!((direct - prev).abs() < 1e-9 * prev.max(1.0));
        assert!(d2.max_norm_deviation() < 1e-9);
    }
}
