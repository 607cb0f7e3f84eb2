//! Truncated two-mode Fock space: parity projectors, phase-randomized
//! coherent pairs, pseudo-Fock states and the fidelity bounds built on them.

mod error;
pub mod fidelity;
pub mod report;
pub mod space;
pub mod states;

pub use error::{FockError, Result};
pub use fidelity::{fidelity, fidelity_pure, pure_infidelity, yield_deviation_bound};
pub use report::{verify_symmetry, CheckRow, SymmetryReport, VerifyOptions};
pub use space::{
    dimension, index, photon_numbers, DensityMatrix, FockOperator, FockVector, OperatorLabel,
};
pub use states::{
    coherent_pair, discrete_pseudo_fock, fock_mixture, k_photon_component, key_mixed_k_photon,
    parity_decompose, parity_mixture, parity_state, phase_averaged_pair, pseudo_fock_mixture,
    ParityParts, DEFAULT_K_MAX,
};
