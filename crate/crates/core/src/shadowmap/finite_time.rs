use crate::error::{guard, Result, ShadowError};
use crate::qmatrix::{ComplexMatrix, SpectralHamiltonian, C64};
use crate::rdu::DEFAULT_RESOLUTION;

use super::SINGULAR_CONDITION;

/// Dense `d²×d²` inversion is limited to `d ≤ 32`.
pub const FINITE_TIME_DIM_LIMIT: usize = 32;

/// `E_t e^{-iωt}` for `t` uniform on `[t_min, t_max]`; exactly 1 when `|ω| < resolution`.
pub fn window_weight(omega: f64, t_min: f64, t_max: f64, resolution: f64) -> C64 {
    if omega.abs() < resolution {
        return C64::new(1.0, 0.0);
    }
    let half = omega * (t_max - t_min) / 2.0;
    C64::cis(-omega * (t_min + t_max) / 2.0) * (half.sin() / half)
}

/// Second-moment data of a quench with times uniform on a finite window.
#[derive(Clone, Debug)]
pub struct FiniteTimeChoi {
    /// `Φ₂^Δt(X₂)` with `X₂ = Σ_b (V†|b⟩⟨b|V)^{⊗2}`, rows `(i,j)`, columns `(k,l)`.
    pub choi: ComplexMatrix,
    /// Matrix of `N` acting on row-major `vec(σ)`, index `m·d + n`.
    pub superoperator: ComplexMatrix,
    pub inverse_superoperator: Option<ComplexMatrix>,
    pub condition_number: f64,
    pub t_min: f64,
    pub t_max: f64,
}

fn vectorize(m: &ComplexMatrix) -> nalgebra::DVector<C64> {
    let d = m.nrows();
    nalgebra::DVector::from_fn(d * d, |r, _| m[(r / d, r % d)])
}

fn unvectorize(v: &nalgebra::DVector<C64>, d: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(d, d, |i, j| v[i * d + j])
}

pub(crate) fn assemble(h: &SpectralHamiltonian, t_min: f64, t_max: f64) -> Result<FiniteTimeChoi> {
    if !(t_max > t_min) || !t_min.is_finite() || !t_max.is_finite() {
        return Err(ShadowError::InvalidInput(format!("time window [{t_min}, {t_max}] is empty")));
    }
    let d = h.dim();
    guard("finite-time superoperator dimension", d as f64, FINITE_TIME_DIM_LIMIT as f64)?;
    let e = h.energies();
    let v = h.eigenbasis();
    // Column b holds u_m conj(u_n) (for S) or u_i u_j (for the Choi matrix), u = V†|b⟩.
    let mut p = ComplexMatrix::zeros(d * d, d);
    let mut q = ComplexMatrix::zeros(d * d, d);
    for b in 0..d {
        for m in 0..d {
            let um = v[(b, m)].conj();
            for n in 0..d {
                let un = v[(b, n)].conj();
                p[(m * d + n, b)] = um * un.conj();
                q[(m * d + n, b)] = um * un;
            }
        }
    }
    let w = |omega: f64| window_weight(omega, t_min, t_max, DEFAULT_RESOLUTION);

    let mut superoperator = &p * p.adjoint();
    for r in 0..d * d {
        let (m, n) = (r / d, r % d);
        for c in 0..d * d {
            let (k, l) = (c / d, c % d);
            superoperator[(r, c)] *= w(e[k] + e[n] - e[l] - e[m]);
        }
    }
    let mut choi = &q * q.adjoint();
    for r in 0..d * d {
        let (i, j) = (r / d, r % d);
        for c in 0..d * d {
            let (k, l) = (c / d, c % d);
            choi[(r, c)] *= w(e[i] + e[j] - e[k] - e[l]);
        }
    }

    // S is Hermitian since w(−ω)* = w(ω), so singular values are |eigenvalues|.
    let sv = nalgebra::SymmetricEigen::new(superoperator.clone()).eigenvalues;
    let smax = sv.iter().map(|x| x.abs()).fold(0.0, f64::max);
    let smin = sv.iter().map(|x| x.abs()).fold(f64::INFINITY, f64::min);
    let condition_number = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    let inverse_superoperator =
        if condition_number <= SINGULAR_CONDITION { superoperator.clone().lu().try_inverse() } else { None };
    Ok(FiniteTimeChoi { choi, superoperator, inverse_superoperator, condition_number, t_min, t_max })
}

/// Assemble and invert the finite-window map; errors when it is singular.
pub fn finite_time_choi(h: &SpectralHamiltonian, t_min: f64, t_max: f64) -> Result<FiniteTimeChoi> {
    let ft = assemble(h, t_min, t_max)?;
    if ft.inverse_superoperator.is_none() {
        return Err(ShadowError::SingularSuperoperator(ft.condition_number));
    }
    Ok(ft)
}

/// `N_Δt(σ)` for an eigenframe `σ` without assembling the superoperator; `O(d⁵)`.
pub fn finite_time_forward(h: &SpectralHamiltonian, sigma: &ComplexMatrix, t_min: f64, t_max: f64) -> Result<ComplexMatrix> {
    if !(t_max > t_min) || !t_min.is_finite() || !t_max.is_finite() {
        return Err(ShadowError::InvalidInput(format!("time window [{t_min}, {t_max}] is empty")));
    }
    let d = h.dim();
    if sigma.shape() != (d, d) {
        return Err(ShadowError::DimensionMismatch(format!("operator {:?} for dimension {d}", sigma.shape())));
    }
    let e = h.energies();
    let v = h.eigenbasis();
    let mut weights = vec![C64::new(0.0, 0.0); d * d * d * d];
    for k in 0..d {
        for n in 0..d {
            for l in 0..d {
                for m in 0..d {
                    weights[((k * d + n) * d + l) * d + m] =
                        window_weight(e[k] + e[n] - e[l] - e[m], t_min, t_max, DEFAULT_RESOLUTION);
                }
            }
        }
    }
    let mut out = ComplexMatrix::zeros(d, d);
    for b in 0..d {
        let u: Vec<C64> = (0..d).map(|m| v[(b, m)].conj()).collect();
        for m in 0..d {
            for n in 0..d {
                let mut acc = C64::new(0.0, 0.0);
                for k in 0..d {
                    for l in 0..d {
                        acc += u[k].conj() * u[l] * sigma[(k, l)] * weights[((k * d + n) * d + l) * d + m];
                    }
                }
                out[(m, n)] += u[m] * u[n].conj() * acc;
            }
        }
    }
    Ok(out)
}

impl FiniteTimeChoi {
    pub fn dim(&self) -> usize {
        (self.superoperator.nrows() as f64).sqrt().round() as usize
    }

    pub fn apply_forward(&self, sigma: &ComplexMatrix) -> ComplexMatrix {
        unvectorize(&(&self.superoperator * vectorize(sigma)), self.dim())
    }

    fn inverse(&self) -> Result<&ComplexMatrix> {
        self.inverse_superoperator.as_ref().ok_or(ShadowError::SingularSuperoperator(self.condition_number))
    }

    pub fn apply_inverse(&self, sigma: &ComplexMatrix) -> Result<ComplexMatrix> {
        Ok(unvectorize(&(self.inverse()? * vectorize(sigma)), self.dim()))
    }

    /// `B` with `Tr(A N⁻¹(σ)) = Tr(B σ)`: `vec(Bᵀ) = S⁻ᵀ vec(Aᵀ)`.
    pub fn adjoint_inverse(&self, a: &ComplexMatrix) -> Result<ComplexMatrix> {
        let bt = self.inverse()?.transpose() * vectorize(&a.transpose());
        Ok(unvectorize(&bt, self.dim()).transpose())
    }
}
