//! The Hamiltonian shadow map `M_H(ρ) = V N(V†ρV) V†`, its inverse and
//! per-snapshot estimators.

mod block;
mod diagnosis;
mod finite_time;
mod local;

pub use block::{BlockObservable, BlockShadow};
pub use diagnosis::{diagnose_detection, CompletenessDiagnosis, IncompletenessReason, Verdict};
pub use finite_time::{finite_time_choi, finite_time_forward, window_weight, FiniteTimeChoi, FINITE_TIME_DIM_LIMIT};
pub use local::{build_local_estimator, local_product_value, shared_time_warnings};

use nalgebra::SymmetricEigen;
use sha2::{Digest, Sha256};

use crate::error::{Result, ShadowError};
use crate::qmatrix::{quad_form, ComplexMatrix, DensityMatrix, RealMatrix, SpectralHamiltonian, C64, ZERO};
use crate::rdu::PhaseVector;

/// `|X_ij|` below this counts as zero.
pub const ZERO_OFFDIAGONAL_TOL: f64 = 1e-12;
pub const SINGULAR_CONDITION: f64 = 1e12;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum InverterMode {
    /// Phases iid uniform; closed-form inverse.
    IdealRdu,
    /// Times uniform on `[t_min, t_max]`; dense inverse of the corrected map.
    FiniteTime { t_min: f64, t_max: f64 },
    /// Recover only off-diagonal elements with nonzero `X_ij`.
    PseudoInverse,
}

impl InverterMode {
    pub fn label(&self) -> String {
        match self {
            InverterMode::IdealRdu => "ideal-rdu".into(),
            InverterMode::FiniteTime { t_min, t_max } => format!("finite-time[{t_min},{t_max}]"),
            InverterMode::PseudoInverse => "pseudo-inverse".into(),
        }
    }
}

/// How the diagonal unitary of one shot was chosen.
#[derive(Clone, Debug, PartialEq)]
pub enum Setting {
    /// Evolution time in μs.
    Time(f64),
    Phases(PhaseVector),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub setting: Setting,
    pub outcome: usize,
}

impl Snapshot {
    pub fn at_time(t: f64, outcome: usize) -> Self {
        Self { setting: Setting::Time(t), outcome }
    }

    pub fn with_phases(phases: PhaseVector, outcome: usize) -> Self {
        Self { setting: Setting::Phases(phases), outcome }
    }

    /// `θ` with `U = V diag(e^{iθ}) V†`.
    pub fn phases(&self, h: &SpectralHamiltonian) -> Vec<f64> {
        match &self.setting {
            Setting::Time(t) => h.phases_at(*t),
            Setting::Phases(p) => p.phases().to_vec(),
        }
    }

    /// `x = Λ̄ V†|b⟩`, so that `V† U†|b⟩⟨b|U V = x x†`.
    pub fn frame_vector(&self, h: &SpectralHamiltonian) -> Result<Vec<C64>> {
        let d = h.dim();
        if self.outcome >= d {
            return Err(ShadowError::DimensionMismatch(format!("outcome {} ≥ dimension {d}", self.outcome)));
        }
        let phases = self.phases(h);
        if phases.len() != d {
            return Err(ShadowError::DimensionMismatch(format!("{} phases for dimension {d}", phases.len())));
        }
        let v = h.eigenbasis();
        Ok((0..d).map(|k| C64::cis(-phases[k]) * v[(self.outcome, k)].conj()).collect())
    }
}

/// Hex digest of the energies and eigenbasis, printed at 12 significant digits.
pub fn fingerprint(h: &SpectralHamiltonian) -> String {
    let mut hasher = Sha256::new();
    for e in h.energies() {
        hasher.update(format!("{e:.12e};").as_bytes());
    }
    for z in h.eigenbasis().iter() {
        hasher.update(format!("{:.12e},{:.12e};", z.re, z.im).as_bytes());
    }
    hex::encode(&hasher.finalize()[..16])
}

/// Precomputed inversion data for one Hamiltonian.
#[derive(Clone, Debug)]
pub struct ShadowInverter {
    hamiltonian: SpectralHamiltonian,
    v_sq: RealMatrix,
    x_h: RealMatrix,
    x_h_inverse: Option<RealMatrix>,
    diagnosis: CompletenessDiagnosis,
    mode: InverterMode,
    finite_time: Option<FiniteTimeChoi>,
    fingerprint: String,
}

pub(crate) fn v_sq_of(h: &SpectralHamiltonian) -> RealMatrix {
    h.eigenbasis().map(|z| z.norm_sqr())
}

pub(crate) fn condition_number_psd(x: &RealMatrix) -> f64 {
    let ev = SymmetricEigen::new(x.clone()).eigenvalues;
    let max = ev.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let min = ev.iter().copied().fold(f64::INFINITY, f64::min);
    if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Construct the inverter. Failures are recorded in the diagnosis; only an
/// invalid time window or an oversized finite-time request is an error.
pub fn build_inverter(h: SpectralHamiltonian, mode: InverterMode) -> Result<ShadowInverter> {
    let v_sq = v_sq_of(&h);
    let x_h = v_sq.transpose() * &v_sq;
    let mut diagnosis = diagnose_detection(&h);
    let x_h_inverse =
        if diagnosis.condition_number <= SINGULAR_CONDITION { x_h.clone().try_inverse() } else { None };
    let finite_time = match mode {
        InverterMode::FiniteTime { t_min, t_max } => {
            let choi = finite_time::assemble(&h, t_min, t_max)?;
            if choi.inverse_superoperator.is_none() {
                diagnosis.push(IncompletenessReason::SingularSuperoperator {
                    condition_number: choi.condition_number,
                });
            }
            Some(choi)
        }
        _ => None,
    };
    let fingerprint = fingerprint(&h);
    Ok(ShadowInverter { hamiltonian: h, v_sq, x_h, x_h_inverse, diagnosis, mode, finite_time, fingerprint })
}

impl ShadowInverter {
    pub fn hamiltonian(&self) -> &SpectralHamiltonian {
        &self.hamiltonian
    }

    pub fn dim(&self) -> usize {
        self.hamiltonian.dim()
    }

    pub fn v_sq(&self) -> &RealMatrix {
        &self.v_sq
    }

    pub fn x_h(&self) -> &RealMatrix {
        &self.x_h
    }

    pub fn x_h_inverse(&self) -> Option<&RealMatrix> {
        self.x_h_inverse.as_ref()
    }

    pub fn diagnosis(&self) -> &CompletenessDiagnosis {
        &self.diagnosis
    }

    pub fn mode(&self) -> InverterMode {
        self.mode
    }

    pub fn finite_time(&self) -> Option<&FiniteTimeChoi> {
        self.finite_time.as_ref()
    }

    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    /// Error unless the inverse map is usable in the current mode.
    pub fn require_invertible(&self) -> Result<()> {
        match self.mode {
            InverterMode::PseudoInverse => Ok(()),
            _ if self.diagnosis.is_complete() => Ok(()),
            _ => Err(ShadowError::Incomplete(self.diagnosis.summary())),
        }
    }

    /// `N(σ)` in the eigenframe.
    pub fn apply_n(&self, sigma: &ComplexMatrix) -> ComplexMatrix {
        let d = self.dim();
        assert_eq!(sigma.shape(), (d, d));
        if let Some(ft) = &self.finite_time {
            return ft.apply_forward(sigma);
        }
        let x = &self.x_h;
        ComplexMatrix::from_fn(d, d, |i, j| {
            if i == j {
                (0..d).map(|k| sigma[(k, k)] * x[(i, k)]).sum()
            } else {
                sigma[(i, j)] * x[(i, j)]
            }
        })
    }

    /// `N⁻¹(σ)` in the eigenframe.
    pub fn apply_n_inverse(&self, sigma: &ComplexMatrix) -> Result<ComplexMatrix> {
        let d = self.dim();
        if sigma.shape() != (d, d) {
            return Err(ShadowError::DimensionMismatch(format!("{:?} for dimension {d}", sigma.shape())));
        }
        self.require_invertible()?;
        let x = &self.x_h;
        match self.mode {
            InverterMode::FiniteTime { .. } => {
                let ft = self.finite_time.as_ref().expect("finite-time data");
                ft.apply_inverse(sigma)
            }
            InverterMode::PseudoInverse => Ok(ComplexMatrix::from_fn(d, d, |i, j| {
                if i == j || x[(i, j)].abs() < ZERO_OFFDIAGONAL_TOL {
                    ZERO
                } else {
                    sigma[(i, j)] / x[(i, j)]
                }
            })),
            InverterMode::IdealRdu => {
                let xi = self.x_h_inverse.as_ref().expect("complete inverter has X_H inverse");
                Ok(ComplexMatrix::from_fn(d, d, |i, j| {
                    if i == j {
                        (0..d).map(|k| sigma[(k, k)] * xi[(i, k)]).sum()
                    } else {
                        sigma[(i, j)] / x[(i, j)]
                    }
                }))
            }
        }
    }

    /// `B` with `Tr(O · V N⁻¹(σ) V†) = Tr(B σ)` for every `σ`.
    pub fn transformed_observable(&self, o: &ComplexMatrix) -> Result<ComplexMatrix> {
        let d = self.dim();
        if o.shape() != (d, d) {
            return Err(ShadowError::DimensionMismatch(format!("observable {:?} for dimension {d}", o.shape())));
        }
        self.require_invertible()?;
        let v = self.hamiltonian.eigenbasis();
        let a = v.adjoint() * o * v;
        match self.mode {
            InverterMode::FiniteTime { .. } => {
                self.finite_time.as_ref().expect("finite-time data").adjoint_inverse(&a)
            }
            InverterMode::PseudoInverse => {
                let diag = (0..d).map(|i| a[(i, i)].norm()).fold(0.0, f64::max);
                if diag > 1e-10 {
                    return Err(ShadowError::UnsupportedObservable(format!(
                        "pseudo-inverse needs a zero diagonal in the eigenframe, found |A_ii| up to {diag:.3e}"
                    )));
                }
                for i in 0..d {
                    for j in 0..d {
                        if i != j && self.x_h[(i, j)].abs() < ZERO_OFFDIAGONAL_TOL && a[(i, j)].norm() > 1e-10 {
                            return Err(ShadowError::UnsupportedObservable(format!(
                                "element ({i}, {j}) is not recoverable (X_H is zero there)"
                            )));
                        }
                    }
                }
                self.apply_n_inverse(&a)
            }
            // N⁻¹ is self-adjoint under the trace pairing.
            InverterMode::IdealRdu => self.apply_n_inverse(&a),
        }
    }

    /// `ρ̂ = V N⁻¹(x x†) V†` for one snapshot.
    pub fn build_estimator(&self, snap: &Snapshot) -> Result<ComplexMatrix> {
        let x = self.frame_vector(snap)?;
        let xx = ComplexMatrix::from_fn(x.len(), x.len(), |i, j| x[i] * x[j].conj());
        let v = self.hamiltonian.eigenbasis();
        Ok(v * self.apply_n_inverse(&xx)? * v.adjoint())
    }

    pub fn frame_vector(&self, snap: &Snapshot) -> Result<Vec<C64>> {
        snap.frame_vector(&self.hamiltonian)
    }

    /// `ô = x† B x` for a transformed observable `B`.
    pub fn single_shot_value(&self, b: &ComplexMatrix, snap: &Snapshot) -> Result<f64> {
        Ok(quad_form(b, &self.frame_vector(snap)?).re)
    }

    /// `M_H(ρ)`.
    pub fn shadow_map_forward(&self, rho: &ComplexMatrix) -> ComplexMatrix {
        let v = self.hamiltonian.eigenbasis();
        v * self.apply_n(&(v.adjoint() * rho * v)) * v.adjoint()
    }

    /// `M_H⁻¹(m)`.
    pub fn shadow_map_inverse(&self, m: &ComplexMatrix) -> Result<ComplexMatrix> {
        let v = self.hamiltonian.eigenbasis();
        Ok(v * self.apply_n_inverse(&(v.adjoint() * m * v))? * v.adjoint())
    }

    /// Dense `d²×d²` matrix of `N` on row-major vectorized inputs.
    pub fn forward_superoperator(&self) -> ComplexMatrix {
        dense_superoperator(self.dim(), |s| self.apply_n(s))
    }

    /// Dense `d²×d²` matrix of `N⁻¹`.
    pub fn inverse_superoperator(&self) -> Result<ComplexMatrix> {
        self.require_invertible()?;
        let d = self.dim();
        let mut out = ComplexMatrix::zeros(d * d, d * d);
        for c in 0..d * d {
            let mut e = ComplexMatrix::zeros(d, d);
            e[(c / d, c % d)] = C64::new(1.0, 0.0);
            let img = self.apply_n_inverse(&e)?;
            for r in 0..d * d {
                out[(r, c)] = img[(r / d, r % d)];
            }
        }
        Ok(out)
    }
}

fn dense_superoperator(d: usize, f: impl Fn(&ComplexMatrix) -> ComplexMatrix) -> ComplexMatrix {
    let mut out = ComplexMatrix::zeros(d * d, d * d);
    for c in 0..d * d {
        let mut e = ComplexMatrix::zeros(d, d);
        e[(c / d, c % d)] = C64::new(1.0, 0.0);
        let img = f(&e);
        for r in 0..d * d {
            out[(r, c)] = img[(r / d, r % d)];
        }
    }
    out
}

/// `M_H(ρ)` for a validated state.
pub fn shadow_map_forward(inv: &ShadowInverter, rho: &DensityMatrix) -> ComplexMatrix {
    inv.shadow_map_forward(rho.matrix())
}

pub fn shadow_map_inverse(inv: &ShadowInverter, m: &ComplexMatrix) -> Result<ComplexMatrix> {
    inv.shadow_map_inverse(m)
}

pub fn apply_n_inverse(inv: &ShadowInverter, sigma: &ComplexMatrix) -> Result<ComplexMatrix> {
    inv.apply_n_inverse(sigma)
}

pub fn build_estimator(inv: &ShadowInverter, snap: &Snapshot) -> Result<ComplexMatrix> {
    inv.build_estimator(snap)
}
