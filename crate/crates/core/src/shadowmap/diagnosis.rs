use std::fmt;

use crate::qmatrix::SpectralHamiltonian;
use crate::rdu::{DegeneracySpec, Resonance};

use super::{condition_number_psd, v_sq_of, SINGULAR_CONDITION, ZERO_OFFDIAGONAL_TOL};

/// At most this many index pairs are listed per reason.
const LISTING_CAP: usize = 64;
/// `|V_bk|²` above this makes eigenvector `k` a basis state.
const ALIGNED_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Complete,
    Incomplete,
}

#[derive(Clone, Debug, PartialEq)]
pub enum IncompletenessReason {
    XhSingular { condition_number: f64 },
    /// Up to 64 pairs `i < j` with `X_ij = 0`, plus the full count.
    ZeroOffDiagonal { pairs: Vec<(usize, usize)>, total: usize },
    EnergyDegeneracy(Vec<(usize, usize)>),
    /// Eigen-indices whose eigenvector is a computational basis state.
    BasisAlignedEigenstate(Vec<usize>),
    /// Basis indices of each block when `V` is block diagonal up to permutation.
    BlockDiagonal(Vec<Vec<usize>>),
    SingularSuperoperator { condition_number: f64 },
}

impl fmt::Display for IncompletenessReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::XhSingular { condition_number } => {
                write!(f, "X_H is singular (condition number {condition_number:.3e})")
            }
            Self::ZeroOffDiagonal { pairs, total } => {
                write!(f, "{total} zero off-diagonal X_H elements, first {:?}", &pairs[..pairs.len().min(8)])
            }
            Self::EnergyDegeneracy(pairs) => write!(f, "degenerate energy pairs {pairs:?}"),
            Self::BasisAlignedEigenstate(ks) => write!(f, "eigenvectors {ks:?} are computational basis states"),
            Self::BlockDiagonal(blocks) => write!(f, "eigenbasis splits into {} blocks", blocks.len()),
            Self::SingularSuperoperator { condition_number } => {
                write!(f, "finite-time superoperator is singular (condition number {condition_number:.3e})")
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CompletenessDiagnosis {
    pub verdict: Verdict,
    pub reasons: Vec<IncompletenessReason>,
    /// Second-order resonances; informational only.
    pub resonances: Vec<Resonance>,
    /// Condition number of `X_H`.
    pub condition_number: f64,
}

impl CompletenessDiagnosis {
    pub fn is_complete(&self) -> bool {
        self.verdict == Verdict::Complete
    }

    pub(crate) fn push(&mut self, reason: IncompletenessReason) {
        self.reasons.push(reason);
        self.verdict = Verdict::Incomplete;
    }

    pub fn summary(&self) -> String {
        if self.reasons.is_empty() {
            return "complete".into();
        }
        self.reasons.iter().map(|r| r.to_string()).collect::<Vec<_>>().join("; ")
    }
}

impl fmt::Display for CompletenessDiagnosis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = if self.is_complete() { "complete" } else { "incomplete" };
        writeln!(f, "verdict: {verdict}")?;
        writeln!(f, "x_h condition number: {:.6e}", self.condition_number)?;
        for r in &self.reasons {
            writeln!(f, "reason: {r}")?;
        }
        for r in &self.resonances {
            writeln!(f, "note: resonance E{:?} = E{:?} (harmless)", r.left, r.right)?;
        }
        Ok(())
    }
}

/// Connected components of the bipartite graph linking basis index `b` and
/// eigen-index `k` when `|V_bk|² > 1e-12`, as `(basis indices, eigen-indices)`.
pub(crate) fn eigen_blocks(h: &SpectralHamiltonian) -> Vec<(Vec<usize>, Vec<usize>)> {
    let d = h.dim();
    let v_sq = v_sq_of(h);
    // Nodes 0..d are basis indices, d..2d eigen-indices.
    let mut parent: Vec<usize> = (0..2 * d).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for b in 0..d {
        for k in 0..d {
            if v_sq[(b, k)] > ZERO_OFFDIAGONAL_TOL {
                let (rb, rk) = (find(&mut parent, b), find(&mut parent, d + k));
                if rb != rk {
                    parent[rb.max(rk)] = rb.min(rk);
                }
            }
        }
    }
    let mut blocks: Vec<(usize, Vec<usize>, Vec<usize>)> = Vec::new();
    for node in 0..2 * d {
        let root = find(&mut parent, node);
        let pos = match blocks.iter().position(|(r, _, _)| *r == root) {
            Some(p) => p,
            None => {
                blocks.push((root, Vec::new(), Vec::new()));
                blocks.len() - 1
            }
        };
        if node < d {
            blocks[pos].1.push(node);
        } else {
            blocks[pos].2.push(node - d);
        }
    }
    blocks.into_iter().map(|(_, rows, cols)| (rows, cols)).collect()
}

/// Check a Hamiltonian for every known cause of tomographic incompleteness.
pub fn diagnose_detection(h: &SpectralHamiltonian) -> CompletenessDiagnosis {
    let d = h.dim();
    let v_sq = v_sq_of(h);
    let x_h = v_sq.transpose() * &v_sq;
    let condition_number = condition_number_psd(&x_h);
    let spec = DegeneracySpec::new(h.energies().to_vec());
    let mut diag = CompletenessDiagnosis {
        verdict: Verdict::Complete,
        reasons: Vec::new(),
        resonances: spec.second_order_resonances(LISTING_CAP),
        condition_number,
    };
    if d == 1 {
        return diag;
    }

    let degenerate = spec.first_order_pairs();
    if !degenerate.is_empty() {
        diag.push(IncompletenessReason::EnergyDegeneracy(degenerate));
    }

    let aligned: Vec<usize> =
        (0..d).filter(|&k| (0..d).any(|b| v_sq[(b, k)] > 1.0 - ALIGNED_TOL)).collect();
    if !aligned.is_empty() {
        diag.push(IncompletenessReason::BasisAlignedEigenstate(aligned));
    }

    let blocks = eigen_blocks(h);
    if blocks.len() > 1 {
        diag.push(IncompletenessReason::BlockDiagonal(blocks.into_iter().map(|(rows, _)| rows).collect()));
    }

    if condition_number > SINGULAR_CONDITION {
        diag.push(IncompletenessReason::XhSingular { condition_number });
    }

    let mut pairs = Vec::new();
    let mut total = 0;
    for i in 0..d {
        for j in i + 1..d {
            if x_h[(i, j)].abs() < ZERO_OFFDIAGONAL_TOL {
                total += 1;
                if pairs.len() < LISTING_CAP {
                    pairs.push((i, j));
                }
            }
        }
    }
    if total > 0 {
        diag.push(IncompletenessReason::ZeroOffDiagonal { pairs, total });
    }
    diag
}
