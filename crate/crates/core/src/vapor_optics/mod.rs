//! Doppler-broadened susceptibility of alkali vapor and polarized propagation
//! through magnetized cells.

mod cell;
mod export;
mod index;
mod transfer;

pub use cell::{buffer_gas_broadening_hz, number_density, DroopShape, FieldProfile, VaporCellConfig};
pub use export::{read_index_json, write_index_csv, write_index_json};
pub use index::{complex_index, d1_line_sets, voigt_fwhm_hz, ComplexIndexSpectrum, IndexSource, LineSet, VaporModel};
pub use transfer::{blocking_cell_transmission, cell_transfer, scalar_transmission, CellTransfer, Jones};
