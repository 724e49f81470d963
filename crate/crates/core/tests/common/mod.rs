//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use hshadow::qmatrix::{basis_ket, ComplexMatrix, ComplexVector, DensityMatrix, SpectralHamiltonian, C64};
use hshadow::rdu::DiagonalDesign;
use hshadow::rng::substream;
use hshadow::shadowmap::{ShadowInverter, Snapshot};
use hshadow::rdu::PhaseVector;
use rand::Rng;
use rand_distr::StandardNormal;

pub fn random_matrix(d: usize, seed: u64) -> ComplexMatrix {
    let mut rng = substream(seed, 77);
    ComplexMatrix::from_fn(d, d, |_, _| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
}

/// Mixed state `G G† / Tr(G G†)` with complex Ginibre `G`.
pub fn random_density(d: usize, seed: u64) -> DensityMatrix {
    let g = random_matrix(d, seed);
    let m = &g * g.adjoint();
    let tr = m.trace().re;
    DensityMatrix::new(m.unscale(tr)).unwrap()
}

pub fn random_hermitian_obs(d: usize, seed: u64) -> ComplexMatrix {
    let g = random_matrix(d, seed);
    (&g + g.adjoint()).scale(0.5)
}

/// `⟨b|U ρ U†|b⟩` computed from the dense unitary.
pub fn born(u: &ComplexMatrix, rho: &DensityMatrix) -> Vec<f64> {
    let evolved = u * rho.matrix() * u.adjoint();
    (0..u.nrows()).map(|b| evolved[(b, b)].re).collect()
}

/// `E ρ̂` over a full diagonal design and all outcomes, with explicit estimators.
pub fn design_mean_estimator(inv: &ShadowInverter, rho: &DensityMatrix, k: usize) -> ComplexMatrix {
    let h = inv.hamiltonian();
    let d = h.dim();
    let design = DiagonalDesign::new(k, d).unwrap().enumerate().unwrap();
    let mut acc = ComplexMatrix::zeros(d, d);
    for phases in &design {
        let u = h.unitary_from_phases(phases.phases());
        let p = born(&u, rho);
        for (b, pb) in p.iter().enumerate() {
            let est = inv.build_estimator(&Snapshot::with_phases(phases.clone(), b)).unwrap();
            acc += est.scale(*pb);
        }
    }
    acc.unscale(design.len() as f64)
}

/// `E Tr(Oρ̂)²` over the diagonal 3-design and all outcomes.
pub fn design_second_moment(inv: &ShadowInverter, o: &ComplexMatrix, rho: &DensityMatrix) -> f64 {
    let h = inv.hamiltonian();
    let d = h.dim();
    let design = DiagonalDesign::new(3, d).unwrap().enumerate().unwrap();
    let mut acc = 0.0;
    for phases in &design {
        let u = h.unitary_from_phases(phases.phases());
        let p = born(&u, rho);
        for (b, pb) in p.iter().enumerate() {
            let est = inv.build_estimator(&Snapshot::with_phases(phases.clone(), b)).unwrap();
            let val = (o * est).trace().re;
            acc += pb * val * val;
        }
    }
    acc / design.len() as f64
}

/// `(1/Δt) ∫ Σ_b p_b(t) U_t†|b⟩⟨b|U_t dt` by composite Simpson with `n` intervals.
pub fn quadrature_shadow_map(h: &SpectralHamiltonian, rho: &DensityMatrix, t_min: f64, t_max: f64, n: usize) -> ComplexMatrix {
    assert!(n % 2 == 0);
    let d = h.dim();
    let step = (t_max - t_min) / n as f64;
    let mut acc = ComplexMatrix::zeros(d, d);
    for i in 0..=n {
        let w = if i == 0 || i == n { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
        let u = h.propagator(t_min + i as f64 * step);
        let p = born(&u, rho);
        for (b, pb) in p.iter().enumerate() {
            let y: ComplexVector = u.adjoint() * basis_ket(d, b);
            acc += (&y * y.adjoint()).scale(w * pb);
        }
    }
    acc.scale(step / 3.0 / (t_max - t_min))
}

pub fn phases(v: Vec<f64>) -> PhaseVector {
    PhaseVector::new(v)
}
