mod common;

use common::{born, random_density};
use hshadow::models::gue_hamiltonian;
use hshadow::qmatrix::{DensityMatrix, SpectralHamiltonian, tensor_product};
use hshadow::rdu::DiagonalDesign;
use hshadow::sampler::*;
use hshadow::shadowmap::{fingerprint, Setting};
use proptest::prelude::*;

/// Upper 0.1% point of the χ² distribution with 3 degrees of freedom.
const CHI2_3DOF_999: f64 = 16.266;

fn counts(outcomes: impl Iterator<Item = usize>, d: usize) -> Vec<f64> {
    let mut c = vec![0.0; d];
    for b in outcomes {
        c[b] += 1.0;
    }
    c
}

/// `P(b) = Σ_k |V_bk|² ⟨k|V†ρV|k⟩`, the phase-averaged Born distribution.
fn dephased_distribution(h: &SpectralHamiltonian, rho: &DensityMatrix) -> Vec<f64> {
    let v = h.eigenbasis();
    let a = v.adjoint() * rho.matrix() * v;
    (0..h.dim()).map(|b| (0..h.dim()).map(|k| v[(b, k)].norm_sqr() * a[(k, k)].re).sum()).collect()
}

/// Each frequency within 4 binomial standard errors of `p`.
fn assert_frequencies(c: &[f64], p: &[f64]) {
    let n: f64 = c.iter().sum();
    for (b, (&cb, &pb)) in c.iter().zip(p).enumerate() {
        let se = (pb * (1.0 - pb) / n).sqrt();
        assert!((cb / n - pb).abs() <= 4.0 * se + 1e-12, "outcome {b}: {} vs {pb} ± {se}", cb / n);
    }
}

#[test]
fn fixed_time_outcomes_pass_chi_square() {
    let h = gue_hamiltonian(4, 3).unwrap();
    let rho = random_density(4, 5);
    let t = 1.7;
    let set = run_batch(&h, &rho, TimeModel::UniformWindow { t_min: t, t_max: t + 1e-12 }, 10_000, 42).unwrap();
    let p = born(&h.propagator(t), &rho);
    let c = counts(set.snapshots.iter().map(|s| s.outcome), 4);
    let chi2: f64 = c.iter().zip(&p).map(|(o, pb)| (o - 1e4 * pb).powi(2) / (1e4 * pb)).sum();
    assert!(chi2 < CHI2_3DOF_999, "χ² = {chi2}");
}

#[test]
fn simulator_probabilities_match_dense_born_rule() {
    let h = gue_hamiltonian(5, 2).unwrap();
    let rho = random_density(5, 8);
    let sim = Simulator::new(&h, &rho, TimeModel::IdealRdu).unwrap();
    for t in [0.0, 0.9, 3.3] {
        let p = sim.probabilities(&Setting::Time(t)).unwrap();
        for (a, b) in p.iter().zip(born(&h.propagator(t), &rho)) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}

#[test]
fn random_phase_outcomes_follow_the_dephased_distribution() {
    let h = gue_hamiltonian(4, 7).unwrap();
    let rho = random_density(4, 1);
    let set = run_batch(&h, &rho, TimeModel::IdealRdu, 100_000, 3).unwrap();
    let p = dephased_distribution(&h, &rho);
    assert_frequencies(&counts(set.snapshots.iter().map(|s| s.outcome), 4), &p);
}

#[test]
fn maximally_mixed_outcomes_are_uniform() {
    let h = gue_hamiltonian(8, 1).unwrap();
    let set = run_batch(&h, &DensityMatrix::maximally_mixed(8), TimeModel::UniformWindow { t_min: 0.0, t_max: 5.0 }, 40_000, 9).unwrap();
    assert_frequencies(&counts(set.snapshots.iter().map(|s| s.outcome), 8), &[0.125; 8]);
}

#[test]
fn design_model_draws_design_elements() {
    let h = gue_hamiltonian(3, 1).unwrap();
    let design = DiagonalDesign::new(2, 3).unwrap().enumerate().unwrap();
    let set = run_batch(&h, &random_density(3, 2), TimeModel::Design { k: 2 }, 200, 4).unwrap();
    for s in &set.snapshots {
        let Setting::Phases(p) = &s.setting else { panic!("design shots carry phases") };
        assert!(design.contains(p));
    }
}

#[test]
fn batches_are_reproducible_and_thread_independent() {
    let h = gue_hamiltonian(4, 2).unwrap();
    let rho = random_density(4, 2);
    let tm = TimeModel::UniformWindow { t_min: 0.0, t_max: 10.0 };
    let single = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let a = single.install(|| run_batch(&h, &rho, tm, 500, 11).unwrap());
    let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
    let b = four.install(|| run_batch(&h, &rho, tm, 500, 11).unwrap());
    assert_eq!(a, b);
    assert_eq!(a.to_text(), b.to_text());
    let c = run_batch(&h, &rho, tm, 500, 12).unwrap();
    assert_ne!(a.snapshots, c.snapshots);
    // Shot i depends only on (seed, i).
    let longer = run_batch(&h, &rho, tm, 800, 11).unwrap();
    assert_eq!(&longer.snapshots[..500], &a.snapshots[..]);
}

#[test]
fn snapshot_file_rejects_malformed_input() {
    let h = gue_hamiltonian(2, 2).unwrap();
    let set = run_batch(&h, &random_density(2, 1), TimeModel::IdealRdu, 3, 1).unwrap();
    let text = set.to_text();
    assert_eq!(SnapshotSet::read_from(text.as_bytes()).unwrap(), set);
    assert!(SnapshotSet::read_from(text.replacen("v1", "v9", 1).as_bytes()).is_err());
    let bad_outcome = format!("{}0.1,0.2 5\n", text);
    assert!(SnapshotSet::read_from(bad_outcome.as_bytes()).is_err());
    assert!(set.check_fingerprint("0000").is_err());
    assert!(run_batch(&h, &random_density(2, 1), TimeModel::IdealRdu, 0, 1).is_err());
    assert!(run_batch(&h, &random_density(3, 1), TimeModel::IdealRdu, 5, 1).is_err());
}

#[test]
fn local_batch_marginals_match_each_patch() {
    let (ha, hb) = (gue_hamiltonian(2, 4).unwrap(), gue_hamiltonian(2, 5).unwrap());
    let (ra, rb) = (random_density(2, 6), random_density(2, 7));
    let joint = DensityMatrix::new(tensor_product(ra.matrix(), rb.matrix())).unwrap();
    let batch = run_local_batch(&[ha.clone(), hb.clone()], &joint, TimeModel::IdealRdu, PatchTiming::PerPatch, 50_000, 2).unwrap();
    assert!(batch.warnings.is_empty());
    for (set, (h, rho)) in batch.sets.iter().zip([(ha, ra), (hb, rb)]) {
        assert_eq!(set.fingerprint, fingerprint(&h));
        assert_frequencies(&counts(set.snapshots.iter().map(|s| s.outcome), 2), &dephased_distribution(&h, &rho));
    }
}

#[test]
fn shared_time_warns_only_on_shared_gaps() {
    let v = gue_hamiltonian(2, 1).unwrap().eigenbasis().clone();
    let a = SpectralHamiltonian::from_parts(vec![0.0, 1.5], v.clone()).unwrap();
    let b = SpectralHamiltonian::from_parts(vec![2.0, 3.5], v).unwrap();
    let rho = DensityMatrix::maximally_mixed(4);
    let tm = TimeModel::UniformWindow { t_min: 0.0, t_max: 4.0 };
    let shared = run_local_batch(&[a.clone(), b.clone()], &rho, tm, PatchTiming::Shared, 10, 1).unwrap();
    assert_eq!(shared.warnings.len(), 1);
    for (sa, sb) in shared.sets[0].snapshots.iter().zip(&shared.sets[1].snapshots) {
        assert_eq!(sa.setting, sb.setting);
    }
    let per_patch = run_local_batch(&[a, b], &rho, tm, PatchTiming::PerPatch, 10, 1).unwrap();
    assert!(per_patch.warnings.is_empty());
}

#[test]
fn invalid_time_models_are_rejected() {
    assert!(TimeModel::UniformWindow { t_min: 2.0, t_max: 2.0 }.validate().is_err());
    assert!(TimeModel::UniformWindow { t_min: -1.0, t_max: 2.0 }.validate().is_err());
    assert!(TimeModel::Design { k: 4 }.validate().is_err());
    assert!(TimeModel::parse("uniform-window 1 x").is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn outcomes_and_times_stay_in_range(seed in any::<u64>(), d in 2usize..6) {
        let h = gue_hamiltonian(d, seed).unwrap();
        let set = run_batch(&h, &random_density(d, seed), TimeModel::UniformWindow { t_min: 1.0, t_max: 2.5 }, 64, seed).unwrap();
        for s in &set.snapshots {
            prop_assert!(s.outcome < d);
            let Setting::Time(t) = s.setting else { panic!("window shots carry times") };
            prop_assert!((1.0..2.5).contains(&t));
        }
    }
}
