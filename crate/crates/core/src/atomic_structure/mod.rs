//! Hyperfine and Zeeman structure of alkali manifolds and the optical lines
//! connecting them.

pub mod angular;
pub mod data;
pub mod hamiltonian;
pub mod lines;

pub use data::{AtomData, IsotopeData, ManifoldConstants, TransitionConstants, VaporPressureModel};
pub use hamiltonian::{
    build_hamiltonian, diagonalize, zeeman_spectrum, LevelLabel, ManifoldHamiltonian, ZeemanSpectrum,
};
pub use lines::{transition_lines, transition_lines_with, Polarization, PopulationModel, TransitionLine};
