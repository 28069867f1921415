//! Randomized invariants across modules.

use ncpot_core::analysis::{
    fit_rho_qr, random_family_params, sweep_interpolation, FamilyParams, FitOptions, Measure,
};
use ncpot_core::linalg::{hermitian_eigenvalues, ComplexMatrix};
use ncpot_core::measures::pure_state_concurrence;
use ncpot_core::random::{conjugate, density_matrix, pure_vector, unitary};
use ncpot_core::reconstruction::{physicality_repair, reconstruct_file, BlockEstimate};
use ncpot_core::simulator::{propagate, simulate_schedule, DetectorModel};
use ncpot_core::states::{mix_on_ideal_bs, mix_on_imperfect_bs};
use ncpot_core::wigner::{wigner_function, GridSpec};
use ncpot_core::{
    bures_distance, fidelity, measure_triple, BeamSplitter, DensityMatrix, QubitState, C64,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_state(seed: u64, dim: usize) -> DensityMatrix {
    let mut r = rng(seed);
    let rank = r.random_range(1..=dim);
    density_matrix(dim, rank, &mut r)
}

fn random_hermitian(seed: u64, dim: usize) -> ComplexMatrix {
    let mut r = rng(seed);
    let m = ComplexMatrix::from_fn(dim, |_, _| {
        C64::new(r.random_range(-1.0..1.0), r.random_range(-1.0..1.0))
    });
    (&m + &m.adjoint()).scale_real(0.5)
}

fn qubit_strategy() -> impl Strategy<Value = (f64, f64, f64)> {
    (0.0..=1.0f64, 0.0..=1.0f64, 0.0..std::f64::consts::TAU)
        .prop_map(|(p, u, phi)| (p, u * (p * (1.0 - p)).sqrt(), phi))
}

fn splitter_strategy() -> impl Strategy<Value = BeamSplitter> {
    (0.0..=1.0f64, 0.0..=1.0f64).prop_map(|(r, q)| BeamSplitter::from_reflection(r, q).unwrap())
}

/// Determinant by Gaussian elimination with partial pivoting.
fn det(m: &ComplexMatrix) -> C64 {
    let n = m.dim();
    let mut a: Vec<Vec<C64>> = (0..n)
        .map(|i| (0..n).map(|j| m[(i, j)]).collect())
        .collect();
    let mut d = C64::new(1.0, 0.0);
    for k in 0..n {
        let piv = (k..n)
            .max_by(|&i, &j| a[i][k].norm().total_cmp(&a[j][k].norm()))
            .unwrap();
        if a[piv][k].norm() == 0.0 {
            return C64::new(0.0, 0.0);
        }
        if piv != k {
            a.swap(piv, k);
            d = -d;
        }
        d *= a[k][k];
        let (top, rest) = a.split_at_mut(k + 1);
        let pivot = &top[k];
        for row in rest {
            let f = row[k] / pivot[k];
            for (x, &v) in row.iter_mut().zip(pivot.iter()).skip(k) {
                *x -= f * v;
            }
        }
    }
    d
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn eigenvalue_sum_equals_trace(seed in any::<u64>(), dim in 2usize..=9) {
        let m = random_hermitian(seed, dim);
        let ev = hermitian_eigenvalues(&m).unwrap();
        prop_assert!((ev.iter().sum::<f64>() - m.trace().re).abs() < 1e-9);
        prop_assert!(ev.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn eigenvalues_are_characteristic_roots(seed in any::<u64>(), dim in 2usize..=6) {
        let m = random_hermitian(seed, dim);
        let scale = (0..dim).flat_map(|i| (0..dim).map(move |j| (i, j)))
            .map(|(i, j)| m[(i, j)].norm())
            .fold(0.0, f64::max);
        for lambda in hermitian_eigenvalues(&m).unwrap() {
            let shifted = &m - &ComplexMatrix::identity(dim).scale_real(lambda);
            // |det(M − λI)| is bounded by the distance to the root times the
            // product of the other gaps, each at most 2·dim·scale.
            let bound = 1e-11 * (2.0 * dim as f64 * scale).powi(dim as i32 - 1);
            prop_assert!(det(&shifted).norm() < bound, "λ = {lambda}: {:e}", det(&shifted).norm());
        }
    }

    #[test]
    fn fidelity_is_symmetric(sa in any::<u64>(), sb in any::<u64>(), dim in 2usize..=4) {
        let (a, b) = (random_state(sa, dim), random_state(sb, dim));
        let (fab, fba) = (fidelity(&a, &b).unwrap(), fidelity(&b, &a).unwrap());
        prop_assert!((fab - fba).abs() < 1e-9, "{fab} vs {fba}");
        prop_assert!((0.0..=1.0).contains(&fab));
    }

    #[test]
    fn bures_triangle_inequality(sa in any::<u64>(), sb in any::<u64>(), sc in any::<u64>()) {
        let (a, b, c) = (random_state(sa, 4), random_state(sb, 4), random_state(sc, 4));
        let ab = bures_distance(&a, &b).unwrap();
        let bc = bures_distance(&b, &c).unwrap();
        let ac = bures_distance(&a, &c).unwrap();
        prop_assert!(ac <= ab + bc + 1e-8);
    }

    #[test]
    fn kron_is_associative(
        ea in prop::collection::vec((-5i32..=5, -5i32..=5), 4),
        eb in prop::collection::vec((-5i32..=5, -5i32..=5), 4),
        ec in prop::collection::vec((-5i32..=5, -5i32..=5), 4),
    ) {
        let mk = |e: &[(i32, i32)]| ComplexMatrix::from_fn(2, |i, j| {
            let (re, im) = e[2 * i + j];
            C64::new(re as f64, im as f64)
        });
        let (a, b, c) = (mk(&ea), mk(&eb), mk(&ec));
        let left = a.kron(&b).unwrap().kron(&c).unwrap();
        let right = a.kron(&b.kron(&c).unwrap()).unwrap();
        prop_assert_eq!(left, right);
    }

    #[test]
    fn local_unitaries_leave_measures_unchanged(seed in any::<u64>()) {
        let mut r = rng(seed);
        let rank = r.random_range(1..=4);
        let rho = density_matrix(4, rank, &mut r);
        let u = unitary(2, &mut r).kron(&unitary(2, &mut r)).unwrap();
        let t0 = measure_triple(&rho).unwrap();
        let t1 = measure_triple(&conjugate(&rho, &u)).unwrap();
        prop_assert!((t0.c - t1.c).abs() <= 1e-8);
        prop_assert!((t0.s - t1.s).abs() <= 1e-8);
        prop_assert!((t0.b - t1.b).abs() <= 1e-8);
    }

    #[test]
    fn pure_state_concurrence_formula(seed in any::<u64>()) {
        let v = pure_vector(4, &mut rng(seed));
        let psi = [v[0], v[1], v[2], v[3]];
        let oracle = 2.0 * (psi[0] * psi[3] - psi[1] * psi[2]).norm();
        let rho = DensityMatrix::new(ComplexMatrix::projector(&v)).unwrap();
        let c = ncpot_core::measures::concurrence(&rho).unwrap();
        prop_assert!((c - oracle).abs() < 1e-9, "{c} vs {oracle}");
        prop_assert!((pure_state_concurrence(&psi) - oracle).abs() < 1e-12);
    }

    #[test]
    fn ideal_output_has_empty_eleven_sector((p, x, phi) in qubit_strategy()) {
        let rho = mix_on_ideal_bs(&QubitState::new(p, C64::from_polar(x, phi)).unwrap());
        let m = rho.matrix();
        for k in 0..4 {
            prop_assert_eq!(m[(3, k)], C64::new(0.0, 0.0));
            prop_assert_eq!(m[(k, 3)], C64::new(0.0, 0.0));
        }
    }

    #[test]
    fn phase_of_x_does_not_change_measures((p, x, phi) in qubit_strategy(), bs in splitter_strategy()) {
        let complex = QubitState::new(p, C64::from_polar(x, phi)).unwrap();
        let real = QubitState::real(p, x).unwrap();
        let a = measure_triple(&mix_on_imperfect_bs(&complex, &bs)).unwrap();
        let b = measure_triple(&mix_on_imperfect_bs(&real, &bs)).unwrap();
        prop_assert!((a.c - b.c).abs() < 1e-9);
        prop_assert!((a.s - b.s).abs() < 1e-9);
        prop_assert!((a.b - b.b).abs() < 1e-9);
    }

    #[test]
    fn propagation_conserves_probability((p, x, phi) in qubit_strategy(), bs in splitter_strategy()) {
        let s = QubitState::new(p, C64::from_polar(x, phi)).unwrap();
        let total: f64 = propagate(&s, &bs).unwrap().iter().map(|w| w.weight * w.state.norm_sqr()).sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn repair_yields_psd_with_fixed_blocks(
        diag in prop::array::uniform3(0.0..1.0f64),
        u_b in 0.0..=1.0f64,
        excess in prop::array::uniform2(0.0..2.0f64),
    ) {
        let total: f64 = diag.iter().sum::<f64>().max(1e-9);
        let d = diag.map(|v| v / total);
        let b01 = u_b * (d[1] * d[2]).sqrt();
        let est = BlockEstimate {
            m_a: d[0],
            m_b: [[d[1], b01], [b01, d[2]]],
            m_c: excess[0] * (d[0] * d[1]).sqrt(),
            m_d: excess[1] * (d[0] * d[2]).sqrt(),
        };
        let (m, _) = physicality_repair(&est).unwrap();
        prop_assert_eq!(m[0][0], est.m_a);
        prop_assert_eq!([[m[1][1], m[1][2]], [m[2][1], m[2][2]]], est.m_b);
        prop_assert!(m[0][1] <= est.m_c && m[0][2] <= est.m_d);
        let mat = ComplexMatrix::from_fn(3, |i, j| C64::new(m[i][j], 0.0));
        prop_assert!(hermitian_eigenvalues(&mat).unwrap()[0] >= -1e-10);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn rho_qr_is_a_state((p, x, phi) in qubit_strategy(), bs in splitter_strategy()) {
        let s = QubitState::new(p, C64::from_polar(x, phi)).unwrap();
        let rho = mix_on_imperfect_bs(&s, &bs);
        prop_assert!((rho.matrix().trace() - C64::new(1.0, 0.0)).norm() < 1e-12);
        prop_assert!(rho.eigenvalues()[0] >= -1e-10);
    }

    #[test]
    fn family_hierarchy(seed in any::<u64>()) {
        let params = random_family_params(&mut rng(seed));
        let t = measure_triple(&params.state().unwrap()).unwrap();
        prop_assert!(t.c >= t.s - 1e-9 && t.s >= t.b - 1e-9, "{params:?}: {t:?}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn wigner_normalized_for_random_qubits_and_qutrits(seed in any::<u64>(), dim in 2usize..=3) {
        let rho = random_state(seed, dim);
        let g = wigner_function(&rho, &GridSpec::default()).unwrap();
        prop_assert!((g.normalization() - 1.0).abs() < 2e-3, "{}", g.normalization());
    }

    #[test]
    fn fit_is_idempotent_on_family_members(
        p in 0.2..0.9f64, u in 0.1..0.9f64, r in 0.2..0.9f64, q in 0.05..0.9f64,
    ) {
        let truth = FamilyParams { p, x: u * (p * (1.0 - p)).sqrt(), r, q };
        let opts = FitOptions { seed: 1, ..FitOptions::default() };
        let first = fit_rho_qr(&truth.state().unwrap(), &opts).unwrap();
        let second = fit_rho_qr(&first.params().state().unwrap(), &opts).unwrap();
        for (a, b) in [(first.p, second.p), (first.x, second.x), (first.r, second.r), (first.q, second.q)] {
            prop_assert!((a - b).abs() < 1e-6, "{first:?} vs {second:?}");
        }
    }
}

#[test]
fn measures_stay_in_unit_interval() {
    let mut r = rng(2024);
    for _ in 0..100_000 {
        let rank = r.random_range(1..=4);
        let t = measure_triple(&density_matrix(4, rank, &mut r)).unwrap();
        for v in t.as_array() {
            assert!((0.0..=1.0).contains(&v), "{t:?}");
        }
    }
}

#[test]
fn sweeps_are_continuous() {
    let mut r = rng(77);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let a = random_family_params(&mut r).state().unwrap();
        let b = random_family_params(&mut r).state().unwrap();
        let curve = sweep_interpolation(&a, &b, 101).unwrap();
        for m in Measure::ALL {
            let v = curve.values(m);
            assert!(v.iter().all(|x| x.is_finite()));
            worst = v
                .windows(2)
                .map(|w| (w[1] - w[0]).abs())
                .fold(worst, f64::max);
        }
    }
    assert!(worst <= 0.1, "largest step {worst}");
}

#[test]
fn reconstruction_fuzz_gives_valid_states() {
    let mut r = rng(5150);
    for case in 0..1000 {
        let params = random_family_params(&mut r);
        let pairs = 10f64.powf(r.random_range(3.0..6.0));
        let det = DetectorModel::default().with_pairs_per_record(pairs);
        let counts = simulate_schedule(
            &params.qubit().unwrap(),
            &params.beam_splitter().unwrap(),
            &det,
            case,
        )
        .unwrap();
        let rec =
            reconstruct_file(&counts).unwrap_or_else(|e| panic!("case {case} {params:?}: {e}"));
        let rho = rec.two_qubit();
        assert!((rho.matrix().trace().re - 1.0).abs() < 1e-9);
        assert!(rho.eigenvalues()[0] >= -1e-9, "case {case}");
        // Fixed-block contract: the diagonal blocks survive repair unchanged.
        let m = rec.qutrit.matrix();
        assert!((m[(0, 0)].re - rec.blocks.m_a).abs() < 1e-12);
        assert!((m[(1, 1)].re - rec.blocks.m_b[0][0]).abs() < 1e-12);
        assert!((m[(2, 2)].re - rec.blocks.m_b[1][1]).abs() < 1e-12);
    }
}

#[test]
fn reconstruction_error_shrinks_with_statistics() {
    let truth_params = FamilyParams {
        p: 0.6,
        x: 0.3,
        r: 0.65,
        q: 0.1,
    };
    let truth = truth_params.state().unwrap();
    let mean_error = |pairs: f64| -> f64 {
        (0..4)
            .map(|seed| {
                let det = DetectorModel::default().with_pairs_per_record(pairs);
                let counts = simulate_schedule(
                    &truth_params.qubit().unwrap(),
                    &truth_params.beam_splitter().unwrap(),
                    &det,
                    seed,
                )
                .unwrap();
                bures_distance(&reconstruct_file(&counts).unwrap().two_qubit(), &truth).unwrap()
            })
            .sum::<f64>()
            / 4.0
    };
    let errors = [mean_error(1e4), mean_error(1e5), mean_error(1e6)];
    assert!(errors[0] > errors[1] && errors[1] > errors[2], "{errors:?}");
}

#[test]
fn uniform_efficiency_scaling_leaves_reconstruction_unchanged() {
    let s = QubitState::real(0.5, 0.35).unwrap();
    let bs = BeamSplitter::balanced();
    let base = DetectorModel::default().with_pairs_per_record(1e6);
    let halved = DetectorModel {
        efficiency_a: base.efficiency_a / 2f64.sqrt(),
        efficiency_b: base.efficiency_b / 2f64.sqrt(),
        efficiency_c: base.efficiency_c / 2f64.sqrt(),
        ..base
    };
    let a = reconstruct_file(&simulate_schedule(&s, &bs, &base, 9).unwrap()).unwrap();
    let b = reconstruct_file(&simulate_schedule(&s, &bs, &halved, 9).unwrap()).unwrap();
    let d = bures_distance(&a.two_qubit(), &b.two_qubit()).unwrap();
    assert!(d < 0.02, "{d}");
}
