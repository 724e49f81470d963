use crate::error::{Result, ShadowError};
use crate::qmatrix::{quad_form, tensor_product, ComplexMatrix, SpectralHamiltonian};
use crate::rdu::DEFAULT_RESOLUTION;

use super::{ShadowInverter, Snapshot};

fn check_patches(invs: &[&ShadowInverter], snaps: &[Snapshot]) -> Result<()> {
    if invs.is_empty() || invs.len() != snaps.len() {
        return Err(ShadowError::DimensionMismatch(format!(
            "{} patch inverters for {} patch snapshots",
            invs.len(),
            snaps.len()
        )));
    }
    Ok(())
}

/// `⊗_p ρ̂_p` from one snapshot per patch.
pub fn build_local_estimator(invs: &[&ShadowInverter], snaps: &[Snapshot]) -> Result<ComplexMatrix> {
    check_patches(invs, snaps)?;
    let mut acc = ComplexMatrix::identity(1, 1);
    for (inv, snap) in invs.iter().zip(snaps) {
        acc = tensor_product(&acc, &inv.build_estimator(snap)?);
    }
    Ok(acc)
}

/// `Π_p x_p† B_p x_p` for a product observable with transformed factors `B_p`.
pub fn local_product_value(invs: &[&ShadowInverter], transformed: &[ComplexMatrix], snaps: &[Snapshot]) -> Result<f64> {
    check_patches(invs, snaps)?;
    if transformed.len() != invs.len() {
        return Err(ShadowError::DimensionMismatch("one transformed factor per patch required".into()));
    }
    let mut value = 1.0;
    for ((inv, b), snap) in invs.iter().zip(transformed).zip(snaps) {
        value *= quad_form(b, &inv.frame_vector(snap)?).re;
    }
    Ok(value)
}

fn nonzero_gaps(h: &SpectralHamiltonian) -> Vec<f64> {
    let e = h.energies();
    let mut gaps: Vec<f64> = Vec::new();
    for a in 0..e.len() {
        for b in 0..e.len() {
            let g = e[a] - e[b];
            if g > DEFAULT_RESOLUTION {
                gaps.push(g);
            }
        }
    }
    gaps.sort_by(f64::total_cmp);
    gaps
}

/// Warnings for patch pairs that share an energy gap. With one common
/// evolution time such a coincidence makes the joint spectrum degenerate.
pub fn shared_time_warnings(patch_hs: &[&SpectralHamiltonian]) -> Vec<String> {
    let gaps: Vec<Vec<f64>> = patch_hs.iter().map(|h| nonzero_gaps(h)).collect();
    let mut out = Vec::new();
    for p in 0..gaps.len() {
        for q in p + 1..gaps.len() {
            let (mut i, mut j) = (0, 0);
            while i < gaps[p].len() && j < gaps[q].len() {
                let diff = gaps[p][i] - gaps[q][j];
                if diff.abs() <= DEFAULT_RESOLUTION {
                    out.push(format!(
                        "patches {p} and {q} share the energy gap {:.6e}; a common evolution time induces degeneracy",
                        gaps[p][i]
                    ));
                    break;
                }
                if diff < 0.0 {
                    i += 1;
                } else {
                    j += 1;
                }
            }
        }
    }
    out
}
