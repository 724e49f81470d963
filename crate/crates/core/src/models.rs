//! Physical models, target states and benchmark unitary families.
//!
//! Energies are angular frequencies in 2π·MHz; positions are in μm.

use std::f64::consts::{FRAC_1_SQRT_2, TAU};

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{guard, Result, ShadowError};
use crate::qmatrix::{
    hadamard, hermitian_spectral, pauli, tensor_all, ComplexMatrix, ComplexVector, DensityMatrix, SpectralHamiltonian, C64,
    ONE,
};
use crate::rng::{derive_seed, substream};
use crate::shadowmap::{build_inverter, InverterMode};

pub const OMEGA: f64 = 1.1 * TAU;
pub const PHI: f64 = 2.1;
pub const DELTA: f64 = 1.2 * TAU;
/// `C` in `V_jk = C/|x_j − x_k|⁶`, 2π·MHz·μm⁶.
pub const C6: f64 = TAU * 862_690.0;
pub const SPACING: f64 = 8.781;
pub const JITTER: f64 = 0.488;
pub const LADDER_SEPARATION: f64 = 10.733;
pub const MAX_ATOMS: usize = 12;
const MIN_SEPARATION: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct RydbergParams {
    pub omega: f64,
    pub phi: f64,
    pub delta: f64,
    pub c6: f64,
    /// `(x, y)` per atom; atom `j` is qubit `j`.
    pub positions: Vec<[f64; 2]>,
}

impl RydbergParams {
    pub fn with_positions(positions: Vec<[f64; 2]>) -> Self {
        Self { omega: OMEGA, phi: PHI, delta: DELTA, c6: C6, positions }
    }

    pub fn num_atoms(&self) -> usize {
        self.positions.len()
    }

    pub fn interaction(&self, j: usize, k: usize) -> f64 {
        let (a, b) = (self.positions[j], self.positions[k]);
        let r2 = (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2);
        self.c6 / r2.powi(3)
    }
}

/// `H = (Ω/2)Σ_j(e^{iφ}|0⟩⟨1|_j + h.c.) − Δ Σ_j n_j + Σ_{j<k} V_jk n_j n_k`, `n = |1⟩⟨1|`.
pub fn rydberg_matrix(p: &RydbergParams) -> Result<ComplexMatrix> {
    let n = p.num_atoms();
    if n == 0 {
        return Err(ShadowError::InvalidInput("no atoms".into()));
    }
    guard("Rydberg atom count", n as f64, MAX_ATOMS as f64)?;
    for j in 0..n {
        for k in j + 1..n {
            let (a, b) = (p.positions[j], p.positions[k]);
            if ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt() <= MIN_SEPARATION {
                return Err(ShadowError::InvalidInput(format!("atoms {j} and {k} coincide")));
            }
        }
    }
    let d = 1usize << n;
    let bit = |s: usize, j: usize| (s >> (n - 1 - j)) & 1;
    let hop = C64::from_polar(p.omega / 2.0, p.phi);
    let mut h = ComplexMatrix::zeros(d, d);
    for s in 0..d {
        let mut diag = 0.0;
        for j in 0..n {
            if bit(s, j) == 1 {
                diag -= p.delta;
                for k in j + 1..n {
                    if bit(s, k) == 1 {
                        diag += p.interaction(j, k);
                    }
                }
            } else {
                let flipped = s | (1 << (n - 1 - j));
                h[(s, flipped)] = hop;
                h[(flipped, s)] = hop.conj();
            }
        }
        h[(s, s)] = C64::new(diag, 0.0);
    }
    Ok(h)
}

pub fn rydberg_hamiltonian(p: &RydbergParams) -> Result<SpectralHamiltonian> {
    hermitian_spectral(&rydberg_matrix(p)?)
}

/// Chain `x_j = j·spacing + δ_j` with `δ_j` uniform in `[−jitter, jitter]`.
pub fn random_positions(n: usize, spacing: f64, jitter: f64, seed: u64) -> Result<Vec<[f64; 2]>> {
    if !(jitter >= 0.0 && jitter < spacing / 2.0) {
        return Err(ShadowError::InvalidInput(format!("jitter {jitter} must lie in [0, spacing/2)")));
    }
    let mut rng = substream(seed, 0);
    Ok((0..n)
        .map(|j| {
            let delta = if jitter > 0.0 { rng.random_range(-jitter..=jitter) } else { 0.0 };
            [j as f64 * spacing + delta, 0.0]
        })
        .collect())
}

/// Default cap on the `X_H` condition number for [`conditioned_chain`].
pub const LAYOUT_MAX_CONDITION: f64 = 1e5;
const LAYOUT_ATTEMPTS: u64 = 64;

/// A random chain whose Rydberg Hamiltonian has `cond(X_H) ≤ max_condition`.
///
/// Draw `a` uses seed `derive_seed(seed, a)`; the first acceptable draw is
/// returned together with its index. Near-reflection-symmetric layouts are
/// rejected this way. Two atoms are always reflection symmetric and fail.
pub fn conditioned_chain(n: usize, seed: u64, max_condition: f64) -> Result<(RydbergParams, u64)> {
    let mut best = f64::INFINITY;
    for attempt in 0..LAYOUT_ATTEMPTS {
        let p = RydbergParams::with_positions(random_positions(n, SPACING, JITTER, derive_seed(seed, attempt))?);
        let cond = build_inverter(rydberg_hamiltonian(&p)?, InverterMode::IdealRdu)?.diagnosis().condition_number;
        if cond <= max_condition {
            return Ok((p, attempt));
        }
        best = best.min(cond);
    }
    Err(ShadowError::Incomplete(format!(
        "no {n}-atom layout with X_H condition number ≤ {max_condition:e} in {LAYOUT_ATTEMPTS} draws (best {best:e})"
    )))
}

/// Two-leg ladder: lower leg (`y = 0`) is atoms `0..n_per_leg`, upper leg follows.
pub fn ladder_positions(n_per_leg: usize, spacing: f64, separation: f64, jitter: f64, seed: u64) -> Result<Vec<[f64; 2]>> {
    let lower = random_positions(n_per_leg, spacing, jitter, seed)?;
    let upper = random_positions(n_per_leg, spacing, jitter, seed.wrapping_add(1))?;
    Ok(lower.into_iter().chain(upper.into_iter().map(|[x, _]| [x, separation])).collect())
}

#[derive(Clone, Debug)]
pub enum StateSpec {
    /// `(|0101…⟩ + |1010…⟩)/√2`.
    Ghz(usize),
    /// `|+⟩^{⊗N}` followed by CZ on nearest neighbours of an open chain.
    Cluster(usize),
    /// `|0⟩^{⊗n_down} ⊗ |1⟩^{⊗n_up}`; the lower leg holds the leading qubits.
    Ladder { n_down: usize, n_up: usize },
    RandomPure { dim: usize, seed: u64 },
    /// `e^{−βH}/Tr e^{−βH}`.
    Thermal { hamiltonian: SpectralHamiltonian, beta: f64 },
}

fn check_qubits(n: usize) -> Result<()> {
    if n == 0 || n > MAX_ATOMS {
        return Err(ShadowError::InvalidInput(format!("{n} qubits not in 1..={MAX_ATOMS}")));
    }
    Ok(())
}

pub fn ghz_vector(n: usize) -> Result<ComplexVector> {
    check_qubits(n)?;
    let d = 1usize << n;
    // Qubit j is 1 in the second branch iff j is even.
    let second: usize = (0..n).filter(|j| j % 2 == 0).map(|j| 1 << (n - 1 - j)).sum();
    let first = (d - 1) ^ second;
    let mut psi = ComplexVector::zeros(d);
    psi[first] = C64::new(FRAC_1_SQRT_2, 0.0);
    psi[second] = C64::new(FRAC_1_SQRT_2, 0.0);
    Ok(psi)
}

pub fn cluster_vector(n: usize) -> Result<ComplexVector> {
    check_qubits(n)?;
    let d = 1usize << n;
    let amp = (d as f64).sqrt().recip();
    Ok(ComplexVector::from_fn(d, |s, _| {
        let edges = (0..n - 1).filter(|&j| (s >> (n - 1 - j)) & 1 == 1 && (s >> (n - 2 - j)) & 1 == 1).count();
        C64::new(if edges % 2 == 0 { amp } else { -amp }, 0.0)
    }))
}

pub fn prepare_state(spec: &StateSpec) -> Result<DensityMatrix> {
    match spec {
        StateSpec::Ghz(n) => DensityMatrix::from_pure(&ghz_vector(*n)?),
        StateSpec::Cluster(n) => DensityMatrix::from_pure(&cluster_vector(*n)?),
        StateSpec::Ladder { n_down, n_up } => {
            check_qubits(n_down + n_up)?;
            let d = 1usize << (n_down + n_up);
            let mut psi = ComplexVector::zeros(d);
            psi[(1 << n_up) - 1] = ONE;
            DensityMatrix::from_pure(&psi)
        }
        StateSpec::RandomPure { dim, seed } => {
            let mut rng = substream(*seed, 0);
            let mut psi = ComplexVector::from_fn(*dim, |_, _| {
                C64::new(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal))
            });
            let norm = psi.norm();
            psi.unscale_mut(norm);
            DensityMatrix::from_pure(&psi)
        }
        StateSpec::Thermal { hamiltonian, beta } => {
            let e = hamiltonian.energies();
            let e_min = e.iter().copied().fold(f64::INFINITY, f64::min);
            let w: Vec<f64> = e.iter().map(|x| (-beta * (x - e_min)).exp()).collect();
            let z: f64 = w.iter().sum();
            let v = hamiltonian.eigenbasis();
            let mut scaled = v.clone();
            for (k, wk) in w.iter().enumerate() {
                scaled.column_mut(k).scale_mut(wk / z);
            }
            DensityMatrix::new(scaled * v.adjoint())
        }
    }
}

/// GUE sample: real `N(0,1)` diagonal, off-diagonal real and imaginary parts `N(0,1/2)`.
pub fn random_hermitian(d: usize, seed: u64) -> ComplexMatrix {
    let mut rng = substream(seed, 0);
    let mut m = ComplexMatrix::zeros(d, d);
    for i in 0..d {
        m[(i, i)] = C64::new(rng.sample(StandardNormal), 0.0);
        for j in i + 1..d {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            let z = C64::new(re, im) * FRAC_1_SQRT_2;
            m[(i, j)] = z;
            m[(j, i)] = z.conj();
        }
    }
    m
}

pub fn gue_hamiltonian(d: usize, seed: u64) -> Result<SpectralHamiltonian> {
    hermitian_spectral(&random_hermitian(d, seed))
}

/// `e^{iPθ}` for the GUE matrix `P` drawn from `p_seed`.
pub fn exp_family_vh(d: usize, p_seed: u64, theta: f64) -> Result<ComplexMatrix> {
    let p = gue_hamiltonian(d, p_seed)?;
    let phases: Vec<f64> = p.energies().iter().map(|e| e * theta).collect();
    Ok(p.unitary_from_phases(&phases))
}

/// Sorted iid `N(0,1)` energies, generic with probability one.
pub fn generic_energies(d: usize, seed: u64) -> Vec<f64> {
    let mut rng = substream(seed, 1);
    let mut e: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
    e.sort_by(f64::total_cmp);
    e
}

/// Hamiltonian with eigenbasis `e^{iPθ}` and generic energies.
pub fn exp_family_hamiltonian(d: usize, p_seed: u64, theta: f64, energy_seed: u64) -> Result<SpectralHamiltonian> {
    SpectralHamiltonian::from_parts(generic_energies(d, energy_seed), exp_family_vh(d, p_seed, theta)?)
}

/// `cos θ Z + sin θ X`.
pub fn single_qubit_theta(theta: f64) -> ComplexMatrix {
    pauli('Z').scale(theta.cos()) + pauli('X').scale(theta.sin())
}

/// Eigenbasis `h^{⊗n}` with generic energies.
pub fn hadamard_hamiltonian(n: usize, energy_seed: u64) -> Result<SpectralHamiltonian> {
    check_qubits(n)?;
    let v = tensor_all(&vec![hadamard(); n]);
    SpectralHamiltonian::from_parts(generic_energies(1 << n, energy_seed), v)
}

/// Fidelity observable `|ψ⟩⟨ψ|`.
pub fn projector(psi: &ComplexVector) -> ComplexMatrix {
    psi * psi.adjoint()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qmatrix::{is_unitary, max_abs_diff, pauli_string, ZERO};
    use crate::shadowmap::diagnose_detection;
    use approx::assert_relative_eq;

    #[test]
    fn nearest_neighbour_interaction() {
        let p = RydbergParams::with_positions(vec![[0.0, 0.0], [SPACING, 0.0]]);
        // C/D⁶ evaluated independently.
        assert_relative_eq!(p.interaction(0, 1), 11.824172837623406, max_relative = 1e-12);
        let h = rydberg_matrix(&p).unwrap();
        assert_relative_eq!(h[(3, 3)].re, 11.824172837623406 - 2.0 * DELTA, max_relative = 1e-12);
        assert_eq!(h[(0, 2)], C64::from_polar(OMEGA / 2.0, PHI));
    }

    #[test]
    fn far_atoms_decouple() {
        let p = RydbergParams::with_positions(vec![[0.0, 0.0], [1e3, 0.0]]);
        assert!(p.interaction(0, 1) < 1e-10 * OMEGA);
    }

    #[test]
    fn coincident_atoms_rejected() {
        let p = RydbergParams::with_positions(vec![[1.0, 0.0], [1.0, 0.0]]);
        assert!(rydberg_matrix(&p).is_err());
    }

    #[test]
    fn interaction_only_limit_is_incomplete() {
        let mut p = RydbergParams::with_positions(random_positions(3, SPACING, JITTER, 4).unwrap());
        p.omega = 0.0;
        p.delta = 0.0;
        let m = rydberg_matrix(&p).unwrap();
        assert!((0..8).all(|i| (0..8).all(|j| i == j || m[(i, j)] == ZERO)));
        assert!(!diagnose_detection(&rydberg_hamiltonian(&p).unwrap()).is_complete());
    }

    #[test]
    fn ghz_and_cluster_states() {
        let psi = ghz_vector(2).unwrap();
        assert_relative_eq!(psi[1].re, FRAC_1_SQRT_2);
        assert_relative_eq!(psi[2].re, FRAC_1_SQRT_2);
        let rho = prepare_state(&StateSpec::Cluster(6)).unwrap();
        for i in 1..5 {
            let labels: String = (0..6).map(|q| if q == i { 'X' } else if q + 1 == i || q == i + 1 { 'Z' } else { 'I' }).collect();
            assert_relative_eq!(rho.expectation(&pauli_string(&labels)), 1.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn ladder_layout() {
        let rho = prepare_state(&StateSpec::Ladder { n_down: 2, n_up: 1 }).unwrap();
        assert_eq!(rho.matrix()[(1, 1)], ONE);
    }

    #[test]
    fn thermal_state_commutes() {
        let h = gue_hamiltonian(6, 3).unwrap();
        let rho = prepare_state(&StateSpec::Thermal { hamiltonian: h.clone(), beta: 0.5 }).unwrap();
        let hm = h.matrix();
        let comm = &hm * rho.matrix() - rho.matrix() * &hm;
        assert!(crate::qmatrix::max_abs(&comm) < 1e-10);
    }

    #[test]
    fn exp_family_properties() {
        assert!(max_abs_diff(&exp_family_vh(4, 1, 0.0).unwrap(), &ComplexMatrix::identity(4, 4)) < 1e-12);
        for theta in [0.1, 1.0, 3.0] {
            assert!(is_unitary(&exp_family_vh(8, 2, theta).unwrap(), 1e-10));
        }
        let a = exp_family_vh(4, 5, 0.4).unwrap() * exp_family_vh(4, 5, 0.7).unwrap();
        assert!(max_abs_diff(&a, &exp_family_vh(4, 5, 1.1).unwrap()) < 1e-9);
    }

    #[test]
    fn positions_are_reproducible() {
        assert_eq!(random_positions(4, SPACING, JITTER, 9).unwrap(), random_positions(4, SPACING, JITTER, 9).unwrap());
        let exact = random_positions(3, 2.0, 0.0, 1).unwrap();
        assert_eq!(exact, vec![[0.0, 0.0], [2.0, 0.0], [4.0, 0.0]]);
        assert!(random_positions(3, 2.0, 1.0, 1).is_err());
    }
}
