//! Hamiltonian-shadow tomography: simulate single-Hamiltonian quench
//! experiments, invert the resulting shadow map, and analyze estimator
//! variance.
//!
//! Conventions used throughout:
//! - energies are angular frequencies in 2π·MHz and times are in μs, so
//!   `E * t` is a phase in radians;
//! - qubit 0 is the most significant bit of a basis index;
//! - `V` denotes the eigenbasis of the Hamiltonian (columns are eigenvectors,
//!   energies ascending) and `Λ = diag(e^{iθ})` a diagonal unitary in that
//!   frame, so a quench is `V Λ V†` with `θ_k = -E_k t`.

pub mod error;
pub mod estimators;
pub mod models;
pub mod qmatrix;
pub mod rdu;
pub mod reproduce;
pub mod rng;
pub mod sampler;
pub mod shadowmap;
pub mod variance;

pub use error::{Result, ShadowError};
pub use qmatrix::{ComplexMatrix, DensityMatrix, SpectralHamiltonian, C64};
