//! Deterministic simulator for quench dynamics of long-range XY spin chains
//! realized in trapped-ion crystals.
//!
//! The pipeline goes trap parameters -> ion equilibrium positions ->
//! transverse phonon modes -> spin-spin couplings J_ij -> exact
//! single-excitation dynamics -> ensemble predictions and the dynamical
//! phase diagram over the interaction range. Everything runs in closed form
//! on top of one dense symmetric eigensolve; there is no randomness and no
//! wall-clock anywhere, so identical inputs give bit-identical outputs.
//!
//! Energy is measured in units of the pair-averaged coupling J0 and time in
//! 1/J0 throughout the dynamics layer; the physical scale (Hz, seconds)
//! enters only when coupling matrices are built or exported.

pub mod config;
pub mod coupling;
pub mod dynamics;
pub mod ensembles;
pub mod error;
pub mod experiments;
pub mod ion_chain;
pub mod oracle;
pub mod output;
pub mod validate;

#[cfg(test)]
mod test_oracles;

pub use coupling::{CouplingMatrix, CouplingSource};
pub use dynamics::{QuenchState, SingleExcitationHamiltonian, SpectralDecomposition};
pub use ensembles::{BranchReport, EnsembleKind, EnsemblePrediction, GapStructure};
pub use error::{Error, Result};
pub use experiments::{PhaseLabel, Pipeline, QuenchBundle, SweepPoint, SweepResult};
pub use ion_chain::{IonChain, PhononSpectrum, TrapConfig};
