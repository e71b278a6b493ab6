//! Worked values, each certified by an independent reference computation
//! before the library result is compared with it.

use macroent::correlation::{
    c_expectation, cauchy_schwarz_bound, eta_optimal, mermin_score, single_site_conversion,
    ProjectorSpec, TwoBranchState,
};
use macroent::linalg::{hermitian_eigenvalues, ComplexVector, HermitianMatrix};
use macroent::observables::{covariance_matrix, expectation, variance, AdditiveObservable, Axis};
use macroent::optimizer::{maximize_c, OptimizerConfig};
use macroent::oracle::{
    column, density_matrix, eigenbasis_reference, grid_search_a, jacobi_eigen, k_matrix,
    observable_matrix, positive_sum, two_branch_analytic, Dense,
};
use macroent::scaling::{sweep, SweepMode};
use macroent::states::{
    make_cat, make_ex1, make_ex2_ensemble, make_ex3_ensemble, make_haar_state, make_psi1,
    make_psi2, make_random_mixed, single_flip_pair, PureState, StateSpec,
};
use macroent::C64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

const H: f64 = std::f64::consts::FRAC_1_SQRT_2;

fn close(a: f64, b: f64, tol: f64) {
    assert!((a - b).abs() <= tol * (1.0 + b.abs()), "{a} vs {b}");
}

/// `⟨A⟩` and `Var(A)` from explicit matrices.
fn dense_moments(a: &AdditiveObservable, s: &PureState) -> (f64, f64) {
    let m = observable_matrix(a);
    let v = s.amplitudes();
    let mean = m.sandwich(v, v).re;
    let second = m.mul(&m).sandwich(v, v).re;
    (mean, second - mean * mean)
}

fn nonzero_sorted(values: &[f64]) -> Vec<f64> {
    let scale = values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let mut out: Vec<f64> = values
        .iter()
        .copied()
        .filter(|v| v.abs() > 1e-9 * scale.max(1.0))
        .collect();
    out.sort_by(f64::total_cmp);
    out
}

#[test]
fn jacobi_agrees_with_library_eigensolver() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let raw: Vec<C64> = (0..64)
        .map(|_| {
            C64::new(
                StandardNormal.sample(&mut rng),
                StandardNormal.sample(&mut rng),
            )
        })
        .collect();
    let h =
        HermitianMatrix::from_fn(8, |i, j| (raw[i * 8 + j] + raw[j * 8 + i].conj()) * 0.5).unwrap();
    let dense = Dense::from_hermitian(&h).unwrap();
    let (oracle, _) = jacobi_eigen(&dense);
    let lib = hermitian_eigenvalues(&h).unwrap();
    for (x, y) in oracle.iter().zip(&lib) {
        assert!((x - y).abs() <= 1e-9);
    }
}

#[test]
fn additive_apply_matches_kronecker_matrix() {
    let a = AdditiveObservable::new(vec![[0.3, -0.2, 0.5], [0.0, 0.7, -0.1], [-0.6, 0.0, 0.4]])
        .unwrap();
    let s = make_haar_state(3, 13).unwrap();
    let m = observable_matrix(&a);
    let got = a.apply(s.vector()).unwrap();
    for (i, g) in got.as_slice().iter().enumerate() {
        let row: C64 = (0..8).map(|j| m.get(i, j) * s.amplitudes()[j]).sum();
        assert!((g - row).norm() <= 1e-12);
    }
}

#[test]
fn moments_of_named_states() {
    let mz4 = AdditiveObservable::m_z(4);
    let cat4 = make_cat(4).unwrap();
    let (_, v) = dense_moments(&mz4, &cat4);
    close(v, 16.0, 1e-12);
    close(variance(&mz4, &cat4).unwrap(), v, 1e-12);

    let psi = make_psi1(4).unwrap();
    let (mean, var) = dense_moments(&mz4, &psi);
    close(mean, -2.0, 1e-12);
    close(var, 12.0, 1e-12);
    close(expectation(&mz4, &psi).unwrap(), mean, 1e-12);
    close(variance(&mz4, &psi).unwrap(), var, 1e-12);

    let psi2 = make_psi2(8).unwrap();
    // nine equally weighted M_z values -8, -6, ..., 8: variance 4·(81-1)/12
    let (_, var) = dense_moments(&AdditiveObservable::m_z(8), &psi2);
    close(var, 80.0 / 3.0, 1e-10);
    close(
        variance(&AdditiveObservable::m_z(8), &psi2).unwrap(),
        var,
        1e-10,
    );

    let mz6 = AdditiveObservable::m_z(6);
    let (_, comps) = make_ex2_ensemble(6)
        .unwrap()
        .components()
        .map(|(w, c)| (w.to_vec(), c.to_vec()))
        .unwrap();
    for c in &comps {
        close(dense_moments(&mz6, c).1, 16.0, 1e-12);
        close(variance(&mz6, c).unwrap(), 16.0, 1e-12);
    }
    close(
        dense_moments(&mz6, &single_flip_pair(6, 2).unwrap()).1,
        16.0,
        1e-12,
    );

    // ex3 components: λ up spins, branch values ±(N-2λ)
    let ex3 = make_ex3_ensemble(6).unwrap();
    let (_, comps) = ex3.components().unwrap();
    for (c, want) in comps.iter().zip([16.0, 4.0]) {
        close(dense_moments(&mz6, c).1, want, 1e-12);
        close(variance(&mz6, c).unwrap(), want, 1e-12);
    }
}

#[test]
fn covariance_entries_from_variances() {
    // Cov(X, Y) = (Var(X+Y) - Var X - Var Y) / 2 with explicit matrices
    let s = make_cat(2).unwrap();
    let z1 = AdditiveObservable::new(vec![[0.0, 0.0, 1.0], [0.0; 3]]).unwrap();
    let z2 = AdditiveObservable::new(vec![[0.0; 3], [0.0, 0.0, 1.0]]).unwrap();
    let both = AdditiveObservable::m_z(2);
    let cov =
        (dense_moments(&both, &s).1 - dense_moments(&z1, &s).1 - dense_moments(&z2, &s).1) / 2.0;
    close(cov, 1.0, 1e-12);
    let v = covariance_matrix(&s).unwrap();
    close(v.get(0, Axis::Z, 1, Axis::Z), cov, 1e-12);

    let cat4 = make_cat(4).unwrap();
    let (top, vec) = covariance_matrix(&cat4).unwrap().top_eigenpair().unwrap();
    close(
        top,
        dense_moments(&AdditiveObservable::m_z(4), &cat4).1 / 4.0,
        1e-10,
    );
    for l in 0..4 {
        close(vec[3 * l + 2].abs(), 0.5, 1e-9);
    }
}

#[test]
fn k_spectra_of_two_branch_states() {
    let mz = AdditiveObservable::m_z(4);
    let (_, lam_cat) = two_branch_analytic(H, H, -4.0, 4.0).unwrap();
    let (_, lam_psi) = two_branch_analytic((0.75f64).sqrt(), 0.5, -4.0, 4.0).unwrap();
    close(lam_cat, 32.0, 1e-12);
    close(lam_psi, 16.0 * 3f64.sqrt(), 1e-12);
    for (s, lam) in [
        (make_cat(4).unwrap(), lam_cat),
        (make_psi1(4).unwrap(), lam_psi),
    ] {
        let (oracle, _) = jacobi_eigen(&k_matrix(&mz, &s));
        assert_eq!(nonzero_sorted(&oracle).len(), 2);
        close(nonzero_sorted(&oracle)[1], lam, 1e-10);
        close(nonzero_sorted(&oracle)[0], -lam, 1e-10);
        let result = eta_optimal(&mz, &s).unwrap();
        close(result.value, lam, 1e-10);
        assert_eq!(result.optimal_eta.rank(), 1);
    }
    let cat4 = make_cat(4).unwrap();
    let best = eta_optimal(&mz, &cat4).unwrap();
    let phi = &best.optimal_eta.vectors()[0];
    close(phi.dot(cat4.vector()).norm(), 1.0, 1e-10);
}

#[test]
fn correlation_values_against_explicit_k() {
    let mz = AdditiveObservable::m_z(4);
    let cat4 = make_cat(4).unwrap();
    let k = k_matrix(&mz, &cat4);
    let explicit = k.sandwich(cat4.amplitudes(), cat4.amplitudes()).re;
    close(explicit, 32.0, 1e-12);
    let eta = ProjectorSpec::rank_one(cat4.vector()).unwrap();
    close(c_expectation(&mz, &eta, &cat4).unwrap(), explicit, 1e-12);

    let cat2 = make_cat(2).unwrap();
    let eta2 = ProjectorSpec::rank_one(cat2.vector()).unwrap();
    let reference = eigenbasis_reference(&AdditiveObservable::m_z(2), &eta2, &cat2).unwrap();
    close(reference, 8.0, 1e-10);
    close(
        c_expectation(&AdditiveObservable::m_z(2), &eta2, &cat2).unwrap(),
        reference,
        1e-10,
    );

    let cat6 = make_cat(6).unwrap();
    let (vals, _) = jacobi_eigen(&k_matrix(&AdditiveObservable::m_z(6), &cat6));
    close(positive_sum(&vals, 0.0), 72.0, 1e-10);
    close(
        eta_optimal(&AdditiveObservable::m_z(6), &cat6)
            .unwrap()
            .value,
        72.0,
        1e-10,
    );
}

#[test]
fn psi2_against_dense_oracle() {
    let s = make_psi2(8).unwrap();
    let a = AdditiveObservable::m_z(8);
    let (vals, _) = jacobi_eigen(&k_matrix(&a, &s));
    let oracle = positive_sum(&vals, 1e-12);
    close(eta_optimal(&a, &s).unwrap().value, oracle, 1e-9);
}

#[test]
fn random_rank_one_against_explicit_trace() {
    let s = make_haar_state(3, 11).unwrap();
    let phi = make_haar_state(3, 12).unwrap();
    let a = AdditiveObservable::m_z(3);
    let oracle = k_matrix(&a, &s)
        .sandwich(phi.amplitudes(), phi.amplitudes())
        .re;
    let eta = ProjectorSpec::rank_one(phi.vector()).unwrap();
    close(c_expectation(&a, &eta, &s).unwrap(), oracle, 1e-8);
    close(eigenbasis_reference(&a, &eta, &s).unwrap(), oracle, 1e-8);
}

#[test]
fn cauchy_schwarz_equality_cases() {
    let mz = AdditiveObservable::m_z(4);
    // ψ1(4): Var_φ = 16 (balanced branches), Var_ψ = 12
    let (var_psi, lam) = two_branch_analytic((0.75f64).sqrt(), 0.5, -4.0, 4.0).unwrap();
    let (var_phi, _) = two_branch_analytic(H, H, -4.0, 4.0).unwrap();
    let rhs = 2.0 * (var_phi * var_psi).sqrt();
    close(rhs, lam, 1e-12);
    let cs = cauchy_schwarz_bound(&mz, &make_psi1(4).unwrap()).unwrap();
    close(cs.lhs, lam, 1e-10);
    close(cs.rhs, rhs, 1e-10);
    let cs = cauchy_schwarz_bound(&mz, &make_cat(4).unwrap()).unwrap();
    close(cs.lhs, 32.0, 1e-10);
    close(cs.rhs, 32.0, 1e-10);
}

/// `|⟨⊗_l (σx + iσy)⟩|` from the explicit tensor product; `σx + iσy = 2|↑⟩⟨↓|`.
fn mermin_raw_explicit(s: &PureState) -> f64 {
    let raise = Dense::from_rows(&[
        vec![C64::new(0.0, 0.0), C64::new(0.0, 0.0)],
        vec![C64::new(2.0, 0.0), C64::new(0.0, 0.0)],
    ]);
    let mut op = Dense::identity(1);
    for _ in 0..s.n_sites() {
        op = op.kron(&raise);
    }
    op.sandwich(s.amplitudes(), s.amplitudes()).norm()
}

#[test]
fn mermin_values_against_explicit_operator() {
    let cat5 = make_cat(5).unwrap();
    let raw = mermin_raw_explicit(&cat5);
    close(raw, 16.0, 1e-12);
    let r = mermin_score(&cat5);
    close(r.raw, raw, 1e-12);
    close(r.lhv_bound, 4.0, 1e-12);
    close(r.ratio, 4.0, 1e-12);

    let psi = make_psi1(4).unwrap();
    let raw = mermin_raw_explicit(&psi);
    close(
        raw / 2f64.powf(1.5),
        4.0 * 3f64.sqrt() / (2.0 * 2f64.sqrt()),
        1e-12,
    );
    close(mermin_score(&psi).raw, raw, 1e-12);
}

/// Probability and post-state of projecting `site` onto `m`, by contracting
/// the full state vector.
fn project_site(s: &PureState, site: usize, m: [C64; 2]) -> (f64, Vec<C64>) {
    let bit = site - 1;
    let v = s.amplitudes();
    let mut rest = vec![C64::new(0.0, 0.0); v.len() / 2];
    for (i, amp) in v.iter().enumerate() {
        let local = (i >> bit) & 1;
        let r = (i & ((1 << bit) - 1)) | ((i >> (bit + 1)) << bit);
        rest[r] += m[local].conj() * amp;
    }
    let p: f64 = rest.iter().map(|z| z.norm_sqr()).sum();
    (p, rest.into_iter().map(|z| z / p.sqrt()).collect())
}

#[test]
fn conversion_against_full_vector_projection() {
    for (n, site, want) in [(4usize, 2usize, 0.375), (16, 1, 30.0 / 256.0)] {
        let tb = TwoBranchState::psi1(n).unwrap();
        let out = single_site_conversion(&tb, site).unwrap();
        let (p, post) = project_site(&tb.to_pure().unwrap(), site, out.measurement);
        close(p, want, 1e-12);
        close(out.success_prob, p, 1e-12);
        let lib_post = out.post_state.to_pure().unwrap();
        for (x, y) in post.iter().zip(lib_post.amplitudes()) {
            assert!((x - y).norm() <= 1e-12);
        }
    }
}

#[test]
fn grid_search_examples() {
    let g = grid_search_a(&make_cat(2).unwrap(), 9).unwrap();
    close(g.best, 8.0, 1e-9);
    // the two-site cat is also a cat along x, so the grid maximum is degenerate;
    // the all-z point is one of the maximizers
    close(
        eta_optimal(&AdditiveObservable::m_z(2), &make_cat(2).unwrap())
            .unwrap()
            .value,
        g.best,
        1e-9,
    );

    let g = grid_search_a(&make_ex1(2).unwrap(), 9).unwrap();
    assert!(g.best <= 4.0 * 2.0 + 1e-9 && g.best >= 0.0);
    let z_only = eta_optimal(&AdditiveObservable::m_z(2), &make_ex1(2).unwrap())
        .unwrap()
        .value;
    assert_eq!(z_only, 0.0);

    let s = make_random_mixed(2, 2, 3).unwrap();
    let g = grid_search_a(&s, 9).unwrap();
    let o = maximize_c(&s, &OptimizerConfig::default()).unwrap();
    assert!(o.value >= g.best - 1e-6, "{} < {}", o.value, g.best);
}

#[test]
fn optimizer_reaches_two_branch_optimum() {
    let (_, lam) = two_branch_analytic(H, H, -6.0, 6.0).unwrap();
    let o = maximize_c(&make_cat(6).unwrap(), &OptimizerConfig::default()).unwrap();
    assert!(o.value >= lam - 1e-6);
}

#[test]
fn cat_sweep_matches_analytic_values() {
    let ns = [4usize, 6, 8, 10];
    let points = sweep(
        &StateSpec::Cat,
        &ns,
        SweepMode::Optimized,
        &OptimizerConfig::default(),
    )
    .unwrap();
    for (p, &n) in points.iter().zip(&ns) {
        let nf = n as f64;
        let (_, lam) = two_branch_analytic(H, H, -nf, nf).unwrap();
        close(p.raw_value, lam, 1e-6);
    }
}

#[test]
fn density_matrix_reference_matches_library() {
    let s = make_random_mixed(3, 3, 21).unwrap();
    let oracle = density_matrix(&s);
    let lib = macroent::states::density_matrix_of(&s).unwrap();
    for i in 0..8 {
        for j in 0..8 {
            assert!((oracle.get(i, j) - lib[(i, j)]).norm() <= 1e-14);
        }
    }
    let (_, vecs) = jacobi_eigen(&oracle);
    assert_eq!(column(&vecs, 0).len(), s.dim());
    assert!(ComplexVector::new(column(&vecs, 7)).unwrap().norm() > 0.99);
}
