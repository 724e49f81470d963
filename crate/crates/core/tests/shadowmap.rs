mod common;

use common::{design_mean_estimator, quadrature_shadow_map, random_density, random_hermitian_obs, random_matrix};
use hshadow::models::{gue_hamiltonian, hadamard_hamiltonian};
use hshadow::qmatrix::*;
use hshadow::rdu::{DiagonalDesign, PhaseVector};
use hshadow::shadowmap::*;
use nalgebra::DVector;
use proptest::prelude::*;

fn diag_h(e: &[f64]) -> SpectralHamiltonian {
    let m = ComplexMatrix::from_diagonal(&DVector::from_iterator(e.len(), e.iter().map(|&x| C64::new(x, 0.0))));
    hermitian_spectral(&m).unwrap()
}

/// `Σ_b p_b U†|b⟩⟨b|U` averaged over the diagonal 2-design.
fn design_forward(h: &SpectralHamiltonian, rho: &DensityMatrix) -> ComplexMatrix {
    let d = h.dim();
    let design = DiagonalDesign::new(2, d).unwrap().enumerate().unwrap();
    let mut acc = ComplexMatrix::zeros(d, d);
    for p in &design {
        let u = h.unitary_from_phases(p.phases());
        let probs = common::born(&u, rho);
        for (b, pb) in probs.iter().enumerate() {
            let y: ComplexVector = u.adjoint() * basis_ket(d, b);
            acc += (&y * y.adjoint()).scale(*pb);
        }
    }
    acc.unscale(design.len() as f64)
}

#[test]
fn ideal_forward_map_matches_design_average() {
    for (d, seed) in [(2, 1), (3, 2), (5, 3)] {
        let inv = build_inverter(gue_hamiltonian(d, seed).unwrap(), InverterMode::IdealRdu).unwrap();
        let rho = random_density(d, seed + 10);
        let err = max_abs_diff(&shadow_map_forward(&inv, &rho), &design_forward(inv.hamiltonian(), &rho));
        assert!(err < 1e-12, "d={d}: {err:e}");
    }
}

#[test]
fn finite_time_forward_matches_quadrature() {
    for (d, seed, window) in [(3, 4, (0.0, 3.0)), (4, 5, (1.0, 6.5))] {
        let h = gue_hamiltonian(d, seed).unwrap();
        let rho = random_density(d, seed);
        let inv = build_inverter(h.clone(), InverterMode::FiniteTime { t_min: window.0, t_max: window.1 }).unwrap();
        let oracle = quadrature_shadow_map(&h, &rho, window.0, window.1, 4000);
        let err = max_abs_diff(&shadow_map_forward(&inv, &rho), &oracle);
        assert!(err < 1e-6, "d={d}: {err:e}");
        let v = h.eigenbasis();
        let sigma = v.adjoint() * rho.matrix() * v;
        let direct = v * finite_time_forward(&h, &sigma, window.0, window.1).unwrap() * v.adjoint();
        assert!(max_abs_diff(&direct, &oracle) < 1e-6);
    }
}

#[test]
fn finite_time_inverse_tends_to_ideal_for_long_windows() {
    let h = gue_hamiltonian(3, 8).unwrap();
    let ideal = build_inverter(h.clone(), InverterMode::IdealRdu).unwrap();
    let long = build_inverter(h, InverterMode::FiniteTime { t_min: 0.0, t_max: 1e6 }).unwrap();
    let m = random_hermitian_obs(3, 2);
    let err = max_abs_diff(&ideal.shadow_map_inverse(&m).unwrap(), &long.shadow_map_inverse(&m).unwrap());
    assert!(err < 1e-3, "{err:e}");
}

#[test]
fn window_weight_is_the_sinc_average() {
    assert_eq!(window_weight(0.0, 1.0, 4.0, 1e-12), C64::new(1.0, 0.0));
    let (omega, a, b) = (1.7, 0.5, 3.0);
    let n = 20000;
    let step = (b - a) / n as f64;
    let mid: C64 = (0..n).map(|i| C64::cis(-omega * (a + (i as f64 + 0.5) * step))).sum::<C64>() / n as f64;
    assert!((window_weight(omega, a, b, 1e-12) - mid).norm() < 1e-8);
}

#[test]
fn degenerate_spectrum_is_incomplete() {
    let inv = build_inverter(diag_h(&[1.0, 1.0, 2.0, 3.0]), InverterMode::IdealRdu).unwrap();
    let diag = inv.diagnosis();
    assert_eq!(diag.verdict, Verdict::Incomplete);
    assert!(diag.reasons.contains(&IncompletenessReason::EnergyDegeneracy(vec![(0, 1)])));
    assert!(inv.require_invertible().is_err());
    assert!(inv.build_estimator(&Snapshot::at_time(0.3, 0)).is_err());
}

#[test]
fn basis_aligned_eigenvector_is_reported() {
    // |0⟩ is an eigenvector; the remaining block is generic.
    let mut m = random_hermitian_obs(3, 6);
    for k in 1..3 {
        m[(0, k)] = C64::new(0.0, 0.0);
        m[(k, 0)] = C64::new(0.0, 0.0);
    }
    m[(0, 0)] = C64::new(5.0, 0.0);
    let diag = diagnose_detection(&hermitian_spectral(&m).unwrap());
    assert!(!diag.is_complete());
    assert!(diag.reasons.iter().any(|r| matches!(r, IncompletenessReason::BasisAlignedEigenstate(ks) if ks.len() == 1)));
    assert!(diag.reasons.iter().any(|r| matches!(r, IncompletenessReason::ZeroOffDiagonal { .. })));
}

#[test]
fn resonant_but_nondegenerate_spectrum_is_complete() {
    let v = gue_hamiltonian(4, 11).unwrap().eigenbasis().clone();
    let h = SpectralHamiltonian::from_parts(vec![1.0, 2.0, 3.0, 4.0], v).unwrap();
    let diag = diagnose_detection(&h);
    assert!(diag.is_complete(), "{}", diag.summary());
    assert!(!diag.resonances.is_empty());
}

#[test]
fn block_diagonal_hamiltonian_is_split_and_estimable() {
    let a = random_hermitian_obs(2, 3);
    let b = random_hermitian_obs(3, 4);
    let mut m = ComplexMatrix::zeros(5, 5);
    m.view_mut((0, 0), (2, 2)).copy_from(&a);
    m.view_mut((2, 2), (3, 3)).copy_from(&b);
    let h = hermitian_spectral(&m).unwrap();
    let diag = diagnose_detection(&h);
    assert!(diag.reasons.iter().any(|r| matches!(r, IncompletenessReason::BlockDiagonal(bl) if bl.len() == 2)));

    let shadow = BlockShadow::new(&h).unwrap();
    assert_eq!(shadow.num_blocks(), 2);
    let mut rows = shadow.block_rows();
    rows.sort();
    assert_eq!(rows, vec![vec![0, 1], vec![2, 3, 4]]);

    // Exact expectation over phases and outcomes of the block estimator.
    let rho = random_density(5, 9);
    let mut o = ComplexMatrix::zeros(5, 5);
    o.view_mut((0, 0), (2, 2)).copy_from(&random_hermitian_obs(2, 5));
    o.view_mut((2, 2), (3, 3)).copy_from(&random_hermitian_obs(3, 6));
    let prepared = shadow.prepare(&o).unwrap();
    let design = DiagonalDesign::new(2, 5).unwrap().enumerate().unwrap();
    let mut mean = 0.0;
    for p in &design {
        let probs = common::born(&h.unitary_from_phases(p.phases()), &rho);
        for (outcome, pb) in probs.iter().enumerate() {
            mean += pb * shadow.estimate(&prepared, &Snapshot::with_phases(p.clone(), outcome)).unwrap();
        }
    }
    mean /= design.len() as f64;
    assert!((mean - rho.expectation(&o)).abs() < 1e-10);

    let mut coupling = ComplexMatrix::zeros(5, 5);
    coupling[(0, 3)] = C64::new(1.0, 0.0);
    coupling[(3, 0)] = C64::new(1.0, 0.0);
    assert!(shadow.prepare(&coupling).is_err());
}

#[test]
fn hadamard_pseudo_inverse_recovers_the_off_diagonal_part() {
    let h = hadamard_hamiltonian(2, 3).unwrap();
    let inv = build_inverter(h.clone(), InverterMode::PseudoInverse).unwrap();
    assert!(!inv.diagnosis().is_complete());
    let rho = random_density(4, 12);
    let v = h.eigenbasis();
    let a = v.adjoint() * rho.matrix() * v;
    let off = ComplexMatrix::from_fn(4, 4, |i, j| if i == j { C64::new(0.0, 0.0) } else { a[(i, j)] });
    let expected = v * off * v.adjoint();
    assert!(max_abs_diff(&design_mean_estimator(&inv, &rho, 2), &expected) < 1e-12);
}

#[test]
fn local_estimator_on_one_patch_is_the_global_one() {
    let inv = build_inverter(gue_hamiltonian(3, 2).unwrap(), InverterMode::IdealRdu).unwrap();
    let snap = Snapshot::with_phases(PhaseVector::new(vec![0.1, 2.0, 4.4]), 2);
    let local = build_local_estimator(&[&inv], std::slice::from_ref(&snap)).unwrap();
    assert!(max_abs_diff(&local, &inv.build_estimator(&snap).unwrap()) < 1e-14);
}

#[test]
fn local_product_estimator_is_unbiased_on_product_states() {
    let (ha, hb) = (gue_hamiltonian(2, 1).unwrap(), gue_hamiltonian(2, 2).unwrap());
    let (ia, ib) = (
        build_inverter(ha.clone(), InverterMode::IdealRdu).unwrap(),
        build_inverter(hb.clone(), InverterMode::IdealRdu).unwrap(),
    );
    let (ra, rb) = (random_density(2, 3), random_density(2, 4));
    let (oa, ob) = (random_hermitian_obs(2, 5), random_hermitian_obs(2, 6));
    let transformed = [ia.transformed_observable(&oa).unwrap(), ib.transformed_observable(&ob).unwrap()];
    let design = DiagonalDesign::new(2, 2).unwrap().enumerate().unwrap();
    let mut mean = 0.0;
    for pa in &design {
        let prob_a = common::born(&ha.unitary_from_phases(pa.phases()), &ra);
        for pb in &design {
            let prob_b = common::born(&hb.unitary_from_phases(pb.phases()), &rb);
            for a in 0..2 {
                for b in 0..2 {
                    let snaps = [Snapshot::with_phases(pa.clone(), a), Snapshot::with_phases(pb.clone(), b)];
                    let value = local_product_value(&[&ia, &ib], &transformed, &snaps).unwrap();
                    let full = build_local_estimator(&[&ia, &ib], &snaps).unwrap();
                    let slow = trace_product_re(&tensor_product(&oa, &ob), &full);
                    assert!((value - slow).abs() < 1e-10);
                    mean += prob_a[a] * prob_b[b] * value;
                }
            }
        }
    }
    mean /= (design.len() * design.len()) as f64;
    assert!((mean - ra.expectation(&oa) * rb.expectation(&ob)).abs() < 1e-10);
}

#[test]
fn shared_gaps_between_patches_are_flagged() {
    let a = diag_h(&[0.0, 1.3]);
    let v = gue_hamiltonian(2, 3).unwrap().eigenbasis().clone();
    let b = SpectralHamiltonian::from_parts(vec![0.5, 1.8], v).unwrap();
    assert_eq!(shared_time_warnings(&[&a, &b]).len(), 1);
    let c = SpectralHamiltonian::from_parts(vec![0.5, 2.2], b.eigenbasis().clone()).unwrap();
    assert!(shared_time_warnings(&[&a, &c]).is_empty());
}

#[test]
fn fingerprint_separates_hamiltonians() {
    let (a, b) = (gue_hamiltonian(3, 1).unwrap(), gue_hamiltonian(3, 2).unwrap());
    assert_eq!(fingerprint(&a), fingerprint(&a.clone()));
    assert_ne!(fingerprint(&a), fingerprint(&b));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn v_sq_is_doubly_stochastic_and_x_h_inverts(seed in any::<u64>(), d in 2usize..7) {
        let inv = build_inverter(gue_hamiltonian(d, seed).unwrap(), InverterMode::IdealRdu).unwrap();
        let v_sq = inv.v_sq();
        for i in 0..d {
            prop_assert!((v_sq.row(i).sum() - 1.0).abs() < 1e-12);
            prop_assert!((v_sq.column(i).sum() - 1.0).abs() < 1e-12);
        }
        prop_assert!((inv.x_h() - v_sq.transpose() * v_sq).abs().max() < 1e-15);
        let xi = inv.x_h_inverse().unwrap();
        let id = nalgebra::DMatrix::<f64>::identity(d, d);
        prop_assert!((inv.x_h() * xi - id).abs().max() < 1e-8 * inv.diagnosis().condition_number.max(1.0));
    }

    #[test]
    fn inverse_undoes_forward_and_keeps_trace(seed in any::<u64>(), d in 2usize..6) {
        let inv = build_inverter(gue_hamiltonian(d, seed).unwrap(), InverterMode::IdealRdu).unwrap();
        let sigma = random_matrix(d, seed ^ 0xff);
        let back = inv.apply_n_inverse(&inv.apply_n(&sigma)).unwrap();
        prop_assert!(max_abs_diff(&back, &sigma) < 1e-8 * (1.0 + max_abs(&sigma)));
        let once = inv.apply_n_inverse(&sigma).unwrap();
        prop_assert!((once.trace() - sigma.trace()).norm() < 1e-8 * (1.0 + max_abs(&sigma)));
        let rho = random_density(d, seed);
        let forward = shadow_map_forward(&inv, &rho);
        prop_assert!(is_density(&forward, 1e-10));
        prop_assert!(max_abs_diff(&shadow_map_inverse(&inv, &forward).unwrap(), rho.matrix()) < 1e-8);
    }

    #[test]
    fn snapshots_have_unit_trace_and_fast_path_agrees(seed in any::<u64>(), d in 2usize..6, outcome in 0usize..6) {
        let h = gue_hamiltonian(d, seed).unwrap();
        let inv = build_inverter(h, InverterMode::IdealRdu).unwrap();
        let snap = Snapshot::at_time(1.0 + (seed % 97) as f64 * 0.13, outcome % d);
        let est = inv.build_estimator(&snap).unwrap();
        prop_assert!((est.trace() - C64::new(1.0, 0.0)).norm() < 1e-8);
        prop_assert!(is_hermitian(&est, 1e-8));
        let o = random_hermitian_obs(d, seed ^ 3);
        let b = inv.transformed_observable(&o).unwrap();
        let fast = inv.single_shot_value(&b, &snap).unwrap();
        prop_assert!((fast - trace_product_re(&o, &est)).abs() < 1e-8 * (1.0 + fast.abs()));
    }
}
