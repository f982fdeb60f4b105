//! Simulation models for atom-resonant photon pairs: rubidium hyperfine
//! structure, vapor-cell optics and filters, cavity-enhanced down-conversion,
//! coincidence statistics, two-photon interference and NooN-state sensing.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` also rejects NaN

pub mod atomic_structure;
pub mod cespdc_source;
pub mod constants;
pub mod correlations;
pub mod error;
pub mod faddeeva;
pub mod filter_models;
pub mod grid;
pub mod noon_sensing;
pub mod quadrature;
pub mod two_photon_interference;
pub mod vapor_optics;

pub use error::{Error, Result};
