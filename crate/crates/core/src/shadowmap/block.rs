use crate::error::{Result, ShadowError};
use crate::qmatrix::{ComplexMatrix, SpectralHamiltonian};
use crate::rdu::PhaseVector;

use super::diagnosis::eigen_blocks;
use super::{build_inverter, InverterMode, Setting, ShadowInverter, Snapshot};

struct BlockPart {
    rows: Vec<usize>,
    cols: Vec<usize>,
    inverter: ShadowInverter,
}

/// Estimation for a Hamiltonian whose eigenbasis is block diagonal: each
/// outcome is routed to its block and inverted with that block's map. Only
/// block-diagonal observables are supported.
pub struct BlockShadow {
    blocks: Vec<BlockPart>,
    /// Basis index to (block, index within block).
    locate: Vec<(usize, usize)>,
}

/// Per-block transformed observables.
pub struct BlockObservable {
    factors: Vec<ComplexMatrix>,
}

impl BlockShadow {
    pub fn new(h: &SpectralHamiltonian) -> Result<Self> {
        let mut locate = vec![(0, 0); h.dim()];
        let mut blocks = Vec::new();
        for (index, (rows, cols)) in eigen_blocks(h).into_iter().enumerate() {
            if rows.len() != cols.len() {
                return Err(ShadowError::InvalidInput("eigenbasis blocks are not square".into()));
            }
            for (local, &b) in rows.iter().enumerate() {
                locate[b] = (index, local);
            }
            let inverter = build_inverter(h.restricted(&rows, &cols)?, InverterMode::IdealRdu)?;
            if !inverter.diagnosis().is_complete() {
                return Err(ShadowError::Incomplete(format!(
                    "block on basis states {rows:?}: {}",
                    inverter.diagnosis().summary()
                )));
            }
            blocks.push(BlockPart { rows, cols, inverter });
        }
        Ok(Self { blocks, locate })
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn block_rows(&self) -> Vec<Vec<usize>> {
        self.blocks.iter().map(|b| b.rows.clone()).collect()
    }

    /// Split `o` into its diagonal blocks; errors if it couples blocks.
    pub fn prepare(&self, o: &ComplexMatrix) -> Result<BlockObservable> {
        let d = self.locate.len();
        if o.shape() != (d, d) {
            return Err(ShadowError::DimensionMismatch(format!("observable {:?} for dimension {d}", o.shape())));
        }
        for i in 0..d {
            for j in 0..d {
                if self.locate[i].0 != self.locate[j].0 && o[(i, j)].norm() > 1e-10 {
                    return Err(ShadowError::UnsupportedObservable(format!(
                        "element ({i}, {j}) couples two blocks"
                    )));
                }
            }
        }
        let factors = self
            .blocks
            .iter()
            .map(|part| {
                let sub = ComplexMatrix::from_fn(part.rows.len(), part.rows.len(), |r, c| o[(part.rows[r], part.rows[c])]);
                part.inverter.transformed_observable(&sub)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(BlockObservable { factors })
    }

    /// Single-shot estimate of `Tr(Oρ)`; the outcome selects the block.
    pub fn estimate(&self, obs: &BlockObservable, snap: &Snapshot) -> Result<f64> {
        let (index, local) = *self
            .locate
            .get(snap.outcome)
            .ok_or_else(|| ShadowError::DimensionMismatch(format!("outcome {} out of range", snap.outcome)))?;
        let part = &self.blocks[index];
        let setting = match &snap.setting {
            Setting::Time(t) => Setting::Time(*t),
            Setting::Phases(p) => Setting::Phases(PhaseVector::new(part.cols.iter().map(|&k| p.phases()[k]).collect())),
        };
        let local_snap = Snapshot { setting, outcome: local };
        part.inverter.single_shot_value(&obs.factors[index], &local_snap)
    }
}
