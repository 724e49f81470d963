//! Second-moment theory for Hamiltonian-shadow estimators.
//!
//! With `x = Λ̄ V†|b⟩`, the single-shot value is `ô = x†Bx` and the outcome
//! probability is `x†Rx` with `R = V†ρV`. Averaging `Λ` over independent
//! uniform phases keeps only index triples whose row and column multisets
//! agree, which gives
//!
//! `E ô² = Σ_i T_i Σ_{j ∈ perms(i)} B_{i1 j1} B_{i2 j2} R_{i3 j3}`,
//! `T_i = Σ_b |V_{b i1}|² |V_{b i2}|² |V_{b i3}|²`,
//!
//! where `perms(i)` are the distinct permutations of `i`.

use nalgebra::SymmetricEigen;

use crate::error::{guard, Result, ShadowError};
use crate::estimators::Observable;
use crate::qmatrix::{ComplexMatrix, DensityMatrix, C64, ZERO};
use crate::shadowmap::{ShadowInverter, ZERO_OFFDIAGONAL_TOL};

/// Dense three-copy contraction is limited to `d³ ≤ 2²⁴`.
pub const THREE_COPY_LIMIT: f64 = (1u64 << 24) as f64;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ApproxForm {
    /// `(1/d) Σ_{i≠j} |A_ij|²/X_ij`, as derived.
    Appendix,
    /// The same sum without the `1/d` prefactor.
    MainText,
}

#[derive(Clone, Debug, PartialEq)]
pub struct VarianceReport {
    pub exact_second_moment: Option<f64>,
    pub shadow_norm_sq: Option<f64>,
    pub approx_f: f64,
    pub empirical_variance: Option<f64>,
    pub dim: usize,
    pub method: String,
}

fn distinct_permutations(i: [usize; 3]) -> Vec<[usize; 3]> {
    const PERMS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    let mut out: Vec<[usize; 3]> = Vec::with_capacity(6);
    for p in PERMS {
        let j = [i[p[0]], i[p[1]], i[p[2]]];
        if !out.contains(&j) {
            out.push(j);
        }
    }
    out
}

fn check_single_copy(inv: &ShadowInverter, o: &Observable) -> Result<()> {
    if o.copies() != 1 || o.dim() != inv.dim() {
        return Err(ShadowError::DimensionMismatch(format!(
            "single-copy observable of dimension {} required, got copies={} dim={}",
            inv.dim(),
            o.copies(),
            o.dim()
        )));
    }
    Ok(())
}

/// `C` with `E ô² = Σ_{ab} C_ab R_ab`, in the eigenframe.
fn moment_kernel(inv: &ShadowInverter, o: &Observable) -> Result<ComplexMatrix> {
    check_single_copy(inv, o)?;
    let d = inv.dim();
    guard("three-copy contraction", (d as f64).powi(3), THREE_COPY_LIMIT)?;
    let b = inv.transformed_observable(o.matrix())?;
    let v_sq = inv.v_sq();
    let mut c = ComplexMatrix::zeros(d, d);
    for i1 in 0..d {
        for i2 in 0..d {
            let pair: Vec<f64> = (0..d).map(|r| v_sq[(r, i1)] * v_sq[(r, i2)]).collect();
            for i3 in 0..d {
                let t: f64 = (0..d).map(|r| pair[r] * v_sq[(r, i3)]).sum();
                for j in distinct_permutations([i1, i2, i3]) {
                    c[(i3, j[2])] += b[(i1, j[0])] * b[(i2, j[1])] * t;
                }
            }
        }
    }
    Ok(c)
}

/// `E ô²` under ideal random phases.
pub fn second_moment_exact(inv: &ShadowInverter, o: &Observable, rho: &DensityMatrix) -> Result<f64> {
    let c = moment_kernel(inv, o)?;
    let v = inv.hamiltonian().eigenbasis();
    let r = v.adjoint() * rho.matrix() * v;
    Ok(c.iter().zip(r.iter()).map(|(x, y)| x * y).sum::<C64>().re)
}

/// `E ô² − Tr(Oρ)²`.
pub fn variance_exact(inv: &ShadowInverter, o: &Observable, rho: &DensityMatrix) -> Result<f64> {
    let mean = rho.expectation(o.matrix());
    Ok(second_moment_exact(inv, o, rho)? - mean * mean)
}

/// Hermitian `A` with `E ô² = Tr(Aρ)` for every state.
pub fn second_moment_operator(inv: &ShadowInverter, o: &Observable) -> Result<ComplexMatrix> {
    let ct = moment_kernel(inv, o)?.transpose();
    let herm = (&ct + ct.adjoint()).scale(0.5);
    let v = inv.hamiltonian().eigenbasis();
    Ok(v * herm * v.adjoint())
}

/// `max_ρ E ô² = λ_max(A)`.
pub fn shadow_norm_sq(inv: &ShadowInverter, o: &Observable) -> Result<f64> {
    let a = second_moment_operator(inv, o)?;
    Ok(SymmetricEigen::new(a).eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max))
}

/// `f(O, V)`: leading-order approximation of the second moment.
pub fn variance_approx_linear(inv: &ShadowInverter, o: &Observable, form: ApproxForm) -> Result<f64> {
    check_single_copy(inv, o)?;
    let d = inv.dim();
    let v = inv.hamiltonian().eigenbasis();
    let a = v.adjoint() * o.matrix() * v;
    let x = inv.x_h();
    let mut total = 0.0;
    for i in 0..d {
        for j in 0..d {
            if i == j {
                continue;
            }
            if x[(i, j)].abs() < ZERO_OFFDIAGONAL_TOL {
                return Err(ShadowError::ZeroOffDiagonal(i, j));
            }
            total += a[(i, j)].norm_sqr() / x[(i, j)];
        }
    }
    Ok(match form {
        ApproxForm::Appendix => total / d as f64,
        ApproxForm::MainText => total,
    })
}

/// `(1/d²) Σ_{i≠j, i'≠j'} |⟨jj'|W|ii'⟩|² / (X_ij X_i'j')` with `W = (V⊗V)† O (V⊗V)`.
pub fn variance_approx_nonlinear(inv: &ShadowInverter, o: &Observable) -> Result<f64> {
    let d = inv.dim();
    if o.copies() != 2 || o.dim() != d {
        return Err(ShadowError::DimensionMismatch(format!("two-copy observable of dimension {d}² required")));
    }
    let x = inv.x_h();
    for i in 0..d {
        for j in 0..d {
            if i != j && x[(i, j)].abs() < ZERO_OFFDIAGONAL_TOL {
                return Err(ShadowError::ZeroOffDiagonal(i, j));
            }
        }
    }
    let vv = inv.hamiltonian().eigenbasis().kronecker(inv.hamiltonian().eigenbasis());
    let w = vv.adjoint() * o.matrix() * &vv;
    let mut total = 0.0;
    for i in 0..d {
        for ip in 0..d {
            let col = i * d + ip;
            for j in 0..d {
                if j == i {
                    continue;
                }
                for jp in 0..d {
                    if jp == ip {
                        continue;
                    }
                    let el = w[(j * d + jp, col)];
                    if el != ZERO {
                        total += el.norm_sqr() / (x[(i, j)] * x[(ip, jp)]);
                    }
                }
            }
        }
    }
    Ok(total / (d * d) as f64)
}

/// Swap specialization: `(1/d²) Σ_{i≠j} 1/X_ij²`.
pub fn variance_approx_purity(inv: &ShadowInverter) -> Result<f64> {
    let d = inv.dim();
    let x = inv.x_h();
    let mut total = 0.0;
    for i in 0..d {
        for j in 0..d {
            if i != j {
                if x[(i, j)].abs() < ZERO_OFFDIAGONAL_TOL {
                    return Err(ShadowError::ZeroOffDiagonal(i, j));
                }
                total += 1.0 / (x[(i, j)] * x[(i, j)]);
            }
        }
    }
    Ok(total / (d * d) as f64)
}

/// Unbiased sample variance.
pub fn empirical_variance(values: &[f64]) -> Result<f64> {
    if values.len() < 2 {
        return Err(ShadowError::TooFewSamples { needed: 2, got: values.len() });
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    Ok(values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0))
}

/// Shot count `⌈max‖O‖² · max(ln M, 1) / ε²⌉`. The constant is 1 by convention;
/// only the scaling is meaningful.
pub fn sample_complexity(norms_sq: &[f64], epsilon: f64) -> Result<u64> {
    if norms_sq.is_empty() || !(epsilon > 0.0) {
        return Err(ShadowError::InvalidInput("need at least one norm and a positive accuracy".into()));
    }
    let max = norms_sq.iter().copied().fold(0.0, f64::max);
    let log_m = (norms_sq.len() as f64).ln().max(1.0);
    Ok((max * log_m / (epsilon * epsilon)).ceil() as u64)
}

/// Collect whichever quantities are computable for this observable.
pub fn variance_report(
    inv: &ShadowInverter,
    o: &Observable,
    rho: Option<&DensityMatrix>,
    per_snapshot: Option<&[f64]>,
) -> Result<VarianceReport> {
    let d = inv.dim();
    let within_guard = (d as f64).powi(3) <= THREE_COPY_LIMIT;
    let (approx_f, method) = if o.copies() == 2 {
        (variance_approx_nonlinear(inv, o)?, "approx-nonlinear")
    } else {
        (variance_approx_linear(inv, o, ApproxForm::Appendix)?, "approx-linear")
    };
    let mut report = VarianceReport {
        exact_second_moment: None,
        shadow_norm_sq: None,
        approx_f,
        empirical_variance: per_snapshot.map(empirical_variance).transpose()?,
        dim: d,
        method: method.into(),
    };
    if within_guard && o.copies() == 1 {
        report.shadow_norm_sq = Some(shadow_norm_sq(inv, o)?);
        if let Some(rho) = rho {
            report.exact_second_moment = Some(second_moment_exact(inv, o, rho)?);
        }
        report.method = "exact+approx-linear".into();
    }
    Ok(report)
}
