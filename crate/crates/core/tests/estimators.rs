mod common;

use common::{random_density, random_hermitian_obs};
use hshadow::estimators::*;
use hshadow::models::{ghz_vector, gue_hamiltonian, prepare_state, projector, StateSpec};
use hshadow::qmatrix::{is_unitary, pauli_string, DensityMatrix};
use hshadow::rng::substream;
use hshadow::sampler::{run_batch, TimeModel};
use hshadow::shadowmap::{build_inverter, InverterMode};
use proptest::prelude::*;
use rand::Rng;
use rand_distr::StandardNormal;

fn within(report: &EstimateReport, truth: f64, z: f64) -> bool {
    (report.value - truth).abs() <= z * report.std_error
}

#[test]
fn fast_path_matches_explicit_estimators() {
    let h = gue_hamiltonian(8, 3).unwrap();
    let rho = random_density(8, 4);
    let o = Observable::new("o", random_hermitian_obs(8, 5), 1).unwrap();
    for (mode, tm) in [
        (InverterMode::IdealRdu, TimeModel::IdealRdu),
        (InverterMode::FiniteTime { t_min: 0.0, t_max: 4.0 }, TimeModel::UniformWindow { t_min: 0.0, t_max: 4.0 }),
    ] {
        let inv = build_inverter(h.clone(), mode).unwrap();
        let set = run_batch(&h, &rho, tm, 200, 6).unwrap();
        let fast = per_snapshot_linear(&inv, &set.snapshots, &o).unwrap();
        let slow = per_snapshot_linear_slow(&inv, &set.snapshots, &o).unwrap();
        for (a, b) in fast.iter().zip(&slow) {
            assert!((a - b).abs() < 1e-10 * (1.0 + b.abs()), "{mode:?}: {a} vs {b}");
        }
    }
}

#[test]
fn linear_estimate_is_consistent() {
    let h = gue_hamiltonian(8, 1).unwrap();
    let rho = prepare_state(&StateSpec::Ghz(3)).unwrap();
    let inv = build_inverter(h.clone(), InverterMode::IdealRdu).unwrap();
    let set = run_batch(&h, &rho, TimeModel::IdealRdu, 20_000, 2).unwrap();
    let o = Observable::new("ZZI", pauli_string("ZZI"), 1).unwrap();
    let report = estimate_linear(&inv, &set, &o).unwrap();
    assert!(within(&report, rho.expectation(o.matrix()), 4.0), "{report:?}");
    let mom = estimate_linear_mom(&inv, &set, &o, 10).unwrap();
    assert!(within(&mom, rho.expectation(o.matrix()), 4.0), "{mom:?}");
    // Identity is reproduced by every snapshot.
    let id = per_snapshot_linear(&inv, &set.snapshots[..50], &Observable::identity(8)).unwrap();
    assert!(id.iter().all(|v| (v - 1.0).abs() < 1e-9));
}

#[test]
fn u_statistic_purity() {
    let h = gue_hamiltonian(4, 2).unwrap();
    let inv = build_inverter(h.clone(), InverterMode::IdealRdu).unwrap();
    let swap = Observable::swap(4);

    let pure = DensityMatrix::from_pure(&ghz_vector(2).unwrap()).unwrap();
    let set = run_batch(&h, &pure, TimeModel::IdealRdu, 20_000, 5).unwrap();
    let report = estimate_nonlinear(&inv, &set, &swap).unwrap();
    assert!(within(&report, 1.0, 4.0), "{report:?}");
    assert_eq!(report.method, Method::UStatistic);

    let mixed = DensityMatrix::maximally_mixed(4);
    let set = run_batch(&h, &mixed, TimeModel::IdealRdu, 20_000, 6).unwrap();
    let report = estimate_nonlinear(&inv, &set, &swap).unwrap();
    assert!(within(&report, 0.25, 4.0), "{report:?}");
}

#[test]
fn identity_pair_is_exactly_one() {
    let h = gue_hamiltonian(3, 7).unwrap();
    let inv = build_inverter(h.clone(), InverterMode::IdealRdu).unwrap();
    let set = run_batch(&h, &random_density(3, 1), TimeModel::IdealRdu, 300, 1).unwrap();
    let report = estimate_nonlinear(&inv, &set, &Observable::identity_pair(3)).unwrap();
    assert!((report.value - 1.0).abs() < 1e-9);
    assert!(report.std_error < 1e-6);
}

#[test]
fn u_statistic_matches_brute_force_pair_sum() {
    let h = gue_hamiltonian(3, 9).unwrap();
    let inv = build_inverter(h.clone(), InverterMode::IdealRdu).unwrap();
    let set = run_batch(&h, &random_density(3, 2), TimeModel::IdealRdu, 12, 3).unwrap();
    let swap = Observable::swap(3);
    let ests: Vec<_> = set.snapshots.iter().map(|s| inv.build_estimator(s).unwrap()).collect();
    let k = ests.len();
    let mut total = 0.0;
    for i in 0..k {
        for j in 0..k {
            if i != j {
                total += (&ests[i] * &ests[j]).trace().re;
            }
        }
    }
    let report = estimate_nonlinear(&inv, &set, &swap).unwrap();
    assert!((report.value - total / (k * (k - 1)) as f64).abs() < 1e-10);
}

#[test]
fn median_of_means_beats_the_mean_on_heavy_tails() {
    // 1% symmetric contamination at ±10⁴ on top of N(0,1); true mean 0.
    let mut wins = 0;
    for trial in 0..100 {
        let mut rng = substream(404, trial);
        let values: Vec<f64> = (0..1000)
            .map(|_| {
                let g: f64 = rng.sample(StandardNormal);
                if rng.random::<f64>() < 0.01 {
                    g + if rng.random::<bool>() { 1e4 } else { -1e4 }
                } else {
                    g
                }
            })
            .collect();
        let mean = mean_report(&values).unwrap().value;
        let mom = median_of_means(&values, 20).unwrap().value;
        if mom.abs() < mean.abs() {
            wins += 1;
        }
    }
    assert!(wins >= 80, "median of means won {wins} of 100");
}

#[test]
fn median_of_means_bookkeeping() {
    let values = [1.0, 2.0, 3.0, 4.0, 100.0, 7.0, 9.0];
    let r = median_of_means(&values, 5).unwrap();
    assert_eq!(r.value, 3.0);
    assert_eq!(r.num_snapshots, 5);
    assert_eq!(r.method, Method::MedianOfMeans { batches: 5, dropped: 2 });
    let r = median_of_means(&values[..6], 2).unwrap();
    assert_eq!(r.value, (2.0 + (4.0 + 100.0 + 7.0) / 3.0) / 2.0);
    assert!(median_of_means(&values, 0).is_err());
    assert!(median_of_means(&values, 8).is_err());
    assert!(mean_report(&[]).is_err());
    assert!(mean_report(&[2.0]).unwrap().std_error.is_infinite());
}

#[test]
fn global_shadow_baseline_is_unbiased_with_bounded_variance() {
    let d = 8;
    let rho = prepare_state(&StateSpec::RandomPure { dim: d, seed: 3 }).unwrap();
    let o = Observable::new("XYZ", pauli_string("XYZ"), 1).unwrap();
    let shots = 20_000;
    let values = global_shadow_values(&rho, shots, 8, &o).unwrap();
    let report = mean_report(&values).unwrap();
    assert!(within(&report, rho.expectation(o.matrix()), 4.0), "{report:?}");

    // Var ≤ 3 Tr(O²) for traceless O; the variance estimate gets 5 standard errors.
    let n = values.len() as f64;
    let sq: Vec<f64> = values.iter().map(|v| (v - report.value).powi(2)).collect();
    let var = sq.iter().sum::<f64>() / (n - 1.0);
    let var_se = (sq.iter().map(|s| (s - var).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt();
    assert!(var <= 3.0 * d as f64 + 5.0 * var_se, "var {var} ± {var_se}");

    let id = global_shadow_values(&rho, 20, 1, &Observable::identity(d)).unwrap();
    assert!(id.iter().all(|v| (v - 1.0).abs() < 1e-9));
}

#[test]
fn wrong_post_processing_is_trace_preserving() {
    let h = gue_hamiltonian(8, 1).unwrap();
    let psi = ghz_vector(3).unwrap();
    let rho = DensityMatrix::from_pure(&psi).unwrap();
    let inv = build_inverter(h.clone(), InverterMode::IdealRdu).unwrap();
    let set = run_batch(&h, &rho, TimeModel::IdealRdu, 200, 1).unwrap();
    let id = wrong_postprocessing_values(&inv, &set.snapshots, &Observable::identity(8)).unwrap();
    assert!(id.iter().all(|v| (v - 1.0).abs() < 1e-9));
    assert!(wrong_postprocessing_values(&inv, &set.snapshots, &Observable::swap(8)).is_err());
    let fid = Observable::new("fidelity", projector(&psi), 1).unwrap();
    assert_eq!(wrong_postprocessing_values(&inv, &set.snapshots, &fid).unwrap().len(), 200);
}

#[test]
fn observable_validation() {
    assert!(Observable::new("bad", random_hermitian_obs(4, 1), 3).is_err());
    assert!(Observable::new("odd", random_hermitian_obs(3, 1), 2).is_err());
    let h = gue_hamiltonian(4, 1).unwrap();
    let inv = build_inverter(h.clone(), InverterMode::IdealRdu).unwrap();
    let set = run_batch(&h, &random_density(4, 1), TimeModel::IdealRdu, 10, 1).unwrap();
    assert!(estimate_linear(&inv, &set, &Observable::swap(4)).is_err());
    assert!(estimate_nonlinear(&inv, &set, &Observable::identity(4)).is_err());
    let other = build_inverter(gue_hamiltonian(4, 2).unwrap(), InverterMode::IdealRdu).unwrap();
    assert!(estimate_linear(&other, &set, &Observable::identity(4)).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn haar_unitaries_are_unitary(seed in any::<u64>(), d in 1usize..9) {
        prop_assert!(is_unitary(&haar_unitary(d, &mut substream(seed, 0)), 1e-10));
    }

    #[test]
    fn median_of_means_lies_between_batch_extremes(values in prop::collection::vec(-1e3f64..1e3, 10..200), b in 1usize..10) {
        let r = median_of_means(&values, b).unwrap();
        let size = values.len() / b;
        let means: Vec<f64> = values[..size * b].chunks(size).map(|c| c.iter().sum::<f64>() / size as f64).collect();
        let lo = means.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = means.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(r.value >= lo - 1e-9 && r.value <= hi + 1e-9);
    }
}
