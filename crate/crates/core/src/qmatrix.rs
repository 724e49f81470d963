//! Dense complex matrices and the quantum primitives built on them.

use std::cmp::Ordering;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Result, ShadowError};

pub type C64 = Complex64;
pub type ComplexMatrix = DMatrix<C64>;
pub type ComplexVector = DVector<C64>;
pub type RealMatrix = DMatrix<f64>;

pub const STRUCTURAL_TOL: f64 = 1e-10;
pub const RECONSTRUCTION_TOL: f64 = 1e-9;
/// Most negative eigenvalue accepted for a density matrix.
pub const MIN_EIGENVALUE: f64 = -1e-8;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

pub fn max_abs(m: &ComplexMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn max_abs_diff(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    assert_eq!(a.shape(), b.shape());
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

pub fn hermiticity_deviation(m: &ComplexMatrix) -> f64 {
    if !m.is_square() {
        return f64::INFINITY;
    }
    let n = m.nrows();
    let mut dev: f64 = 0.0;
    for i in 0..n {
        for j in i..n {
            dev = dev.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    dev
}

pub fn is_hermitian(m: &ComplexMatrix, tol: f64) -> bool {
    hermiticity_deviation(m) <= tol
}

pub fn unitarity_deviation(m: &ComplexMatrix) -> f64 {
    if !m.is_square() {
        return f64::INFINITY;
    }
    let id = ComplexMatrix::identity(m.nrows(), m.ncols());
    max_abs_diff(&(m.adjoint() * m), &id)
}

pub fn is_unitary(m: &ComplexMatrix, tol: f64) -> bool {
    unitarity_deviation(m) <= tol
}

/// Hermitian within `tol`, unit trace within `tol`, eigenvalues ≥ `MIN_EIGENVALUE`.
pub fn is_density(m: &ComplexMatrix, tol: f64) -> bool {
    density_violation(m, tol).is_none()
}

fn density_violation(m: &ComplexMatrix, tol: f64) -> Option<String> {
    if !m.is_square() || m.nrows() == 0 {
        return Some(format!("shape {:?} is not square", m.shape()));
    }
    let herm = hermiticity_deviation(m);
    if herm > tol {
        return Some(format!("Hermiticity deviation {herm:.3e}"));
    }
    let tr = m.trace();
    if (tr - ONE).norm() > tol {
        return Some(format!("trace {tr}"));
    }
    let min = hermitian_eigenvalues(m).iter().copied().fold(f64::INFINITY, f64::min);
    if min < MIN_EIGENVALUE {
        return Some(format!("minimum eigenvalue {min:.3e}"));
    }
    None
}

fn symmetrized(m: &ComplexMatrix) -> ComplexMatrix {
    (m + m.adjoint()).scale(0.5)
}

/// Eigenvalues (ascending) of the Hermitian part of `m`.
pub fn hermitian_eigenvalues(m: &ComplexMatrix) -> Vec<f64> {
    let mut ev: Vec<f64> = SymmetricEigen::new(symmetrized(m)).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Kronecker product; the first factor is the most significant index.
pub fn tensor_product(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a.kronecker(b)
}

pub fn tensor_all(factors: &[ComplexMatrix]) -> ComplexMatrix {
    factors
        .iter()
        .fold(ComplexMatrix::identity(1, 1), |acc, f| acc.kronecker(f))
}

/// Reduced matrix on the subsystems listed in `keep` (in ascending order of
/// subsystem index, regardless of the order given).
pub fn partial_trace(m: &ComplexMatrix, subsystem_dims: &[usize], keep: &[usize]) -> Result<ComplexMatrix> {
    let total: usize = subsystem_dims.iter().product();
    if !m.is_square() || m.nrows() != total || subsystem_dims.contains(&0) {
        return Err(ShadowError::DimensionMismatch(format!(
            "subsystem dims {subsystem_dims:?} do not match a {}x{} matrix",
            m.nrows(),
            m.ncols()
        )));
    }
    let n = subsystem_dims.len();
    let mut kept = vec![false; n];
    for &k in keep {
        if k >= n {
            return Err(ShadowError::DimensionMismatch(format!("subsystem {k} out of range 0..{n}")));
        }
        kept[k] = true;
    }
    let kept_idx: Vec<usize> = (0..n).filter(|&s| kept[s]).collect();
    let traced_idx: Vec<usize> = (0..n).filter(|&s| !kept[s]).collect();
    let strides: Vec<usize> = (0..n).map(|s| subsystem_dims[s + 1..].iter().product()).collect();

    // Offset of a multi-index restricted to the given subsystems.
    let offsets = |subs: &[usize]| -> Vec<usize> {
        let count: usize = subs.iter().map(|&s| subsystem_dims[s]).product();
        (0..count)
            .map(|mut c| {
                let mut off = 0;
                for &s in subs.iter().rev() {
                    off += (c % subsystem_dims[s]) * strides[s];
                    c /= subsystem_dims[s];
                }
                off
            })
            .collect()
    };
    let kept_off = offsets(&kept_idx);
    let traced_off = offsets(&traced_idx);

    let out_dim = kept_off.len();
    let mut out = ComplexMatrix::zeros(out_dim, out_dim);
    for (r, &ro) in kept_off.iter().enumerate() {
        for (c, &co) in kept_off.iter().enumerate() {
            out[(r, c)] = traced_off.iter().map(|&t| m[(ro + t, co + t)]).sum();
        }
    }
    Ok(out)
}

/// `S = Σ_{ij} |ij⟩⟨ji|` on `d²` dimensions.
pub fn swap_operator(d: usize) -> ComplexMatrix {
    let mut s = ComplexMatrix::zeros(d * d, d * d);
    for i in 0..d {
        for j in 0..d {
            s[(i * d + j, j * d + i)] = ONE;
        }
    }
    s
}

pub fn pauli(c: char) -> ComplexMatrix {
    match c {
        'I' => ComplexMatrix::identity(2, 2),
        'X' => ComplexMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO]),
        'Y' => ComplexMatrix::from_row_slice(2, 2, &[ZERO, -I, I, ZERO]),
        'Z' => ComplexMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE]),
        _ => panic!("unknown Pauli label {c:?}"),
    }
}

/// Tensor product of Pauli labels, e.g. `"ZXZ"`; the first label acts on qubit 0.
pub fn pauli_string(labels: &str) -> ComplexMatrix {
    let factors: Vec<ComplexMatrix> = labels.chars().map(pauli).collect();
    tensor_all(&factors)
}

pub fn hadamard() -> ComplexMatrix {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    ComplexMatrix::from_row_slice(2, 2, &[h.into(), h.into(), h.into(), (-h).into()])
}

pub fn basis_ket(d: usize, b: usize) -> ComplexVector {
    let mut v = ComplexVector::zeros(d);
    v[b] = ONE;
    v
}

/// `Re Tr(AB)` without forming the product.
pub fn trace_product_re(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    trace_product(a, b).re
}

pub fn trace_product(a: &ComplexMatrix, b: &ComplexMatrix) -> C64 {
    assert_eq!(a.ncols(), b.nrows());
    assert_eq!(a.nrows(), b.ncols());
    let mut acc = ZERO;
    for i in 0..a.nrows() {
        for k in 0..a.ncols() {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}

/// Quadratic form `x† M x`.
pub fn quad_form(m: &ComplexMatrix, x: &[C64]) -> C64 {
    let d = x.len();
    let mut acc = ZERO;
    for i in 0..d {
        let mut row = ZERO;
        for j in 0..d {
            row += m[(i, j)] * x[j];
        }
        acc += x[i].conj() * row;
    }
    acc
}

#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    matrix: ComplexMatrix,
}

impl DensityMatrix {
    pub fn new(matrix: ComplexMatrix) -> Result<Self> {
        if let Some(why) = density_violation(&matrix, STRUCTURAL_TOL) {
            return Err(ShadowError::InvalidState(why));
        }
        Ok(Self { matrix })
    }

    /// Skip validation for matrices that are density matrices by construction.
    pub(crate) fn new_unchecked(matrix: ComplexMatrix) -> Self {
        Self { matrix }
    }

    pub fn from_pure(psi: &ComplexVector) -> Result<Self> {
        let norm = psi.norm();
        if (norm - 1.0).abs() > STRUCTURAL_TOL {
            return Err(ShadowError::InvalidState(format!("state vector norm {norm}")));
        }
        Ok(Self { matrix: psi * psi.adjoint() })
    }

    pub fn maximally_mixed(d: usize) -> Self {
        Self { matrix: ComplexMatrix::identity(d, d).unscale(d as f64) }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }

    pub fn purity(&self) -> f64 {
        trace_product_re(&self.matrix, &self.matrix)
    }

    pub fn expectation(&self, o: &ComplexMatrix) -> f64 {
        trace_product_re(o, &self.matrix)
    }

    /// Pure-state components `(λ_r, |r⟩)` with `λ_r > 1e-14`.
    pub fn pure_components(&self) -> Vec<(f64, ComplexVector)> {
        let eig = SymmetricEigen::new(symmetrized(&self.matrix));
        (0..self.dim())
            .filter(|&r| eig.eigenvalues[r] > 1e-14)
            .map(|r| (eig.eigenvalues[r], eig.eigenvectors.column(r).into_owned()))
            .collect()
    }
}

/// A Hermitian operator stored by its eigen-decomposition `H = V diag(E) V†`.
#[derive(Clone, Debug)]
pub struct SpectralHamiltonian {
    energies: Vec<f64>,
    eigenbasis: ComplexMatrix,
}

impl SpectralHamiltonian {
    /// Build from energies and eigenvectors (columns). Columns are reordered so
    /// that energies ascend.
    pub fn from_parts(energies: Vec<f64>, eigenbasis: ComplexMatrix) -> Result<Self> {
        let d = energies.len();
        if eigenbasis.shape() != (d, d) || d == 0 {
            return Err(ShadowError::DimensionMismatch(format!(
                "{d} energies for a {:?} eigenbasis",
                eigenbasis.shape()
            )));
        }
        if energies.iter().any(|e| !e.is_finite()) {
            return Err(ShadowError::InvalidInput("non-finite energy".into()));
        }
        let dev = unitarity_deviation(&eigenbasis);
        if dev > STRUCTURAL_TOL {
            return Err(ShadowError::NotUnitary(dev));
        }
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&a, &b| energies[a].total_cmp(&energies[b]));
        Ok(Self::permuted(&energies, &eigenbasis, &order))
    }

    fn permuted(energies: &[f64], v: &ComplexMatrix, order: &[usize]) -> Self {
        let d = order.len();
        let mut basis = ComplexMatrix::zeros(d, d);
        for (new, &old) in order.iter().enumerate() {
            basis.set_column(new, &v.column(old));
        }
        Self { energies: order.iter().map(|&o| energies[o]).collect(), eigenbasis: basis }
    }

    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn eigenbasis(&self) -> &ComplexMatrix {
        &self.eigenbasis
    }

    pub fn matrix(&self) -> ComplexMatrix {
        let v = &self.eigenbasis;
        let mut scaled = v.clone();
        for (k, e) in self.energies.iter().enumerate() {
            scaled.column_mut(k).scale_mut(*e);
        }
        scaled * v.adjoint()
    }

    /// `θ_k = -E_k t`, i.e. `e^{-iHt} = V diag(e^{iθ}) V†`.
    pub fn phases_at(&self, t: f64) -> Vec<f64> {
        self.energies.iter().map(|e| -e * t).collect()
    }

    /// `V diag(e^{iθ}) V†`.
    pub fn unitary_from_phases(&self, phases: &[f64]) -> ComplexMatrix {
        let v = &self.eigenbasis;
        let mut scaled = v.clone();
        for (k, th) in phases.iter().enumerate() {
            let mut col = scaled.column_mut(k);
            col *= C64::cis(*th);
        }
        scaled * v.adjoint()
    }

    pub fn propagator(&self, t: f64) -> ComplexMatrix {
        self.unitary_from_phases(&self.phases_at(t))
    }

    /// Restriction to the given basis rows and eigen-columns, for block-diagonal Hamiltonians.
    pub fn restricted(&self, rows: &[usize], cols: &[usize]) -> Result<Self> {
        let sub = ComplexMatrix::from_fn(rows.len(), cols.len(), |r, c| self.eigenbasis[(rows[r], cols[c])]);
        Self::from_parts(cols.iter().map(|&c| self.energies[c]).collect(), sub)
    }
}

/// Largest-magnitude component made real-positive; ties resolved to the lowest index.
fn canonical_phase(v: &mut ComplexMatrix, col: usize) {
    let max = v.column(col).iter().map(|z| z.norm()).fold(0.0, f64::max);
    let pivot = v.column(col).iter().position(|z| z.norm() >= max - 1e-10).unwrap_or(0);
    let z = v[(pivot, col)];
    if z.norm() > 0.0 {
        let phase = z.conj() / z.norm();
        let mut c = v.column_mut(col);
        c *= phase;
    }
}

fn compare_columns(v: &ComplexMatrix, a: usize, b: usize) -> Ordering {
    for r in 0..v.nrows() {
        let (x, y) = (v[(r, a)], v[(r, b)]);
        if (x.re - y.re).abs() > 1e-12 {
            return x.re.total_cmp(&y.re);
        }
        if (x.im - y.im).abs() > 1e-12 {
            return x.im.total_cmp(&y.im);
        }
    }
    Ordering::Equal
}

/// Eigen-decompose a Hermitian matrix. Energies ascend; exactly degenerate
/// eigenvectors are ordered by their first differing component.
pub fn hermitian_spectral(h: &ComplexMatrix) -> Result<SpectralHamiltonian> {
    if !h.is_square() || h.nrows() == 0 {
        return Err(ShadowError::DimensionMismatch(format!("{:?} is not square", h.shape())));
    }
    let dev = hermiticity_deviation(h);
    if dev > 1e-8 {
        return Err(ShadowError::NotHermitian(dev));
    }
    let eig = SymmetricEigen::new(symmetrized(h));
    let d = h.nrows();
    let mut v = eig.eigenvectors;
    for c in 0..d {
        canonical_phase(&mut v, c);
    }
    let energies: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| energies[a].total_cmp(&energies[b]));
    // Within runs of equal energy, order by eigenvector components.
    let mut start = 0;
    while start < d {
        let mut end = start + 1;
        let scale = energies[order[start]].abs().max(1.0);
        while end < d && energies[order[end]] - energies[order[start]] <= 1e-12 * scale {
            end += 1;
        }
        order[start..end].sort_by(|&a, &b| compare_columns(&v, a, b));
        start = end;
    }
    Ok(SpectralHamiltonian::permuted(&energies, &v, &order))
}

/// `e^{-iHt} ρ e^{iHt}`.
pub fn evolve(h: &SpectralHamiltonian, t: f64, rho: &DensityMatrix) -> DensityMatrix {
    let u = h.propagator(t);
    DensityMatrix::new_unchecked(&u * rho.matrix() * u.adjoint())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn tensor_product_matches_index_formula() {
        let a = ComplexMatrix::from_row_slice(2, 2, &[c(1.0, 0.5), c(-2.0, 0.0), c(0.3, -1.0), c(0.0, 2.0)]);
        let b = ComplexMatrix::from_row_slice(2, 2, &[c(0.7, 0.0), c(1.0, 1.0), c(-0.4, 0.2), c(3.0, 0.0)]);
        let p = tensor_product(&a, &b);
        for i in 0..2 {
            for k in 0..2 {
                for j in 0..2 {
                    for l in 0..2 {
                        assert_eq!(p[(2 * i + k, 2 * j + l)], a[(i, j)] * b[(k, l)]);
                    }
                }
            }
        }
        let zz = tensor_product(&pauli('Z'), &pauli('Z'));
        let diag: Vec<f64> = (0..4).map(|i| zz[(i, i)].re).collect();
        assert_eq!(diag, vec![1.0, -1.0, -1.0, 1.0]);
    }

    #[test]
    fn bell_state_reduces_to_maximally_mixed() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let psi = ComplexVector::from_vec(vec![s.into(), ZERO, ZERO, s.into()]);
        let rho = DensityMatrix::from_pure(&psi).unwrap();
        for keep in [0, 1] {
            let r = partial_trace(rho.matrix(), &[2, 2], &[keep]).unwrap();
            assert!(max_abs_diff(&r, &ComplexMatrix::identity(2, 2).unscale(2.0)) < 1e-15);
        }
    }

    #[test]
    fn partial_trace_rejects_bad_dims() {
        assert!(partial_trace(&ComplexMatrix::identity(4, 4), &[2, 3], &[0]).is_err());
    }

    #[test]
    fn x_spectrum_and_diagonal_permutation() {
        let s = hermitian_spectral(&pauli('X')).unwrap();
        assert_relative_eq!(s.energies()[0], -1.0, epsilon = 1e-14);
        assert_relative_eq!(s.energies()[1], 1.0, epsilon = 1e-14);

        let h = ComplexMatrix::from_diagonal(&DVector::from_vec(vec![c(3.0, 0.0), c(1.0, 0.0), c(2.0, 0.0)]));
        let s = hermitian_spectral(&h).unwrap();
        assert_eq!(s.energies(), &[1.0, 2.0, 3.0]);
        let v = s.eigenbasis();
        for col in 0..3 {
            let ones = v.column(col).iter().filter(|z| (z.norm() - 1.0).abs() < 1e-14).count();
            assert_eq!(ones, 1);
        }
        assert_eq!(v[(1, 0)], ONE);
    }

    #[test]
    fn rejects_non_hermitian() {
        let m = ComplexMatrix::from_row_slice(2, 2, &[ONE, ONE, ZERO, ONE]);
        assert!(matches!(hermitian_spectral(&m), Err(ShadowError::NotHermitian(_))));
    }

    #[test]
    fn rabi_oscillation() {
        let omega = 1.3;
        let h = hermitian_spectral(&pauli('X').scale(omega / 2.0)).unwrap();
        let rho = DensityMatrix::from_pure(&basis_ket(2, 0)).unwrap();
        for t in [0.0, 0.4, 1.7, 5.0] {
            let p1 = evolve(&h, t, &rho).matrix()[(1, 1)].re;
            assert_relative_eq!(p1, (omega * t / 2.0).sin().powi(2), epsilon = 1e-12);
        }
    }

    #[test]
    fn swap_trick_on_small_cases() {
        let s = swap_operator(2);
        assert_eq!(s[(2, 1)], ONE);
        let mixed = DensityMatrix::maximally_mixed(3);
        let pair = tensor_product(mixed.matrix(), mixed.matrix());
        assert_relative_eq!(trace_product_re(&swap_operator(3), &pair), 1.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn density_validation() {
        assert!(DensityMatrix::new(ComplexMatrix::identity(2, 2)).is_err());
        let bad = ComplexMatrix::from_row_slice(2, 2, &[c(1.5, 0.0), ZERO, ZERO, c(-0.5, 0.0)]);
        assert!(DensityMatrix::new(bad).is_err());
        assert!(DensityMatrix::new(DensityMatrix::maximally_mixed(4).into_matrix()).is_ok());
    }
}
