use std::collections::BTreeMap;
use std::f64::consts::PI;

use nalgebra::Matrix2;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cell::{FieldProfile, VaporCellConfig};
use super::index::{complex_index, d1_line_sets, ComplexIndexSpectrum, IndexSource};
use crate::atomic_structure::AtomData;
use crate::constants::SPEED_OF_LIGHT;
use crate::error::{Error, Result};
use crate::grid::FrequencyGrid;

/// Single-photon polarization transfer matrix.
pub type Jones = Matrix2<Complex64>;

// 3-point Gauss–Legendre nodes and weights on [-1, 1]
const GL_NODES: [f64; 3] = [-0.774_596_669_241_483_4, 0.0, 0.774_596_669_241_483_4];
const GL_WEIGHTS: [f64; 3] = [5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0];

/// Transfer of a cell with axial field: diagonal in the circular basis,
/// `t± = exp(i·phase±)` with complex accumulated phase.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellTransfer {
    pub grid: FrequencyGrid,
    pub phase_plus: Vec<Complex64>,
    pub phase_minus: Vec<Complex64>,
}

fn circular_to_linear(t_plus: Complex64, t_minus: Complex64) -> Jones {
    // basis e± = (H ± iV)/sqrt2
    let s = (t_plus + t_minus) * 0.5;
    let d = (t_plus - t_minus) * 0.5;
    let i = Complex64::i();
    Jones::new(s, -i * d, i * d, s)
}

impl CellTransfer {
    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn t_plus(&self, i: usize) -> Complex64 {
        (Complex64::i() * self.phase_plus[i]).exp()
    }

    pub fn t_minus(&self, i: usize) -> Complex64 {
        (Complex64::i() * self.phase_minus[i]).exp()
    }

    /// Jones matrix in the circular `(σ+, σ−)` basis.
    pub fn jones_circular(&self, i: usize) -> Jones {
        Jones::new(
            self.t_plus(i),
            Complex64::new(0.0, 0.0),
            Complex64::new(0.0, 0.0),
            self.t_minus(i),
        )
    }

    /// Jones matrix in the linear `(H, V)` basis.
    pub fn jones_linear(&self, i: usize) -> Jones {
        circular_to_linear(self.t_plus(i), self.t_minus(i))
    }

    /// Linear-basis Jones matrix at an arbitrary detuning, interpolating the
    /// accumulated phases.
    pub fn jones_linear_at(&self, detuning_hz: f64) -> Result<Jones> {
        let interp = |v: &[Complex64]| -> Result<Complex64> {
            let re: Vec<f64> = v.iter().map(|c| c.re).collect();
            let im: Vec<f64> = v.iter().map(|c| c.im).collect();
            Ok(Complex64::new(
                self.grid.interpolate(&re, detuning_hz)?,
                self.grid.interpolate(&im, detuning_hz)?,
            ))
        };
        let p = interp(&self.phase_plus)?;
        let m = interp(&self.phase_minus)?;
        let i = Complex64::i();
        Ok(circular_to_linear((i * p).exp(), (i * m).exp()))
    }

    /// Faraday rotation angle (rad), not wrapped.
    pub fn rotation_angle(&self, i: usize) -> f64 {
        (self.phase_plus[i].re - self.phase_minus[i].re) / 2.0
    }

    /// Transmission of unpolarized light.
    pub fn transmission(&self, i: usize) -> f64 {
        (self.t_plus(i).norm_sqr() + self.t_minus(i).norm_sqr()) / 2.0
    }

    pub fn max_singular_value(&self, i: usize) -> f64 {
        self.t_plus(i).norm().max(self.t_minus(i).norm())
    }
}

fn path_phase_factor(grid: &FrequencyGrid, i: usize) -> f64 {
    2.0 * PI * grid.frequency(i) / SPEED_OF_LIGHT
}

/// Integrates the index along the cell, splitting the path into `slices`
/// pieces with the local field of `cell.field`.
pub fn cell_transfer<S: IndexSource + ?Sized>(
    source: &S,
    cell: &VaporCellConfig,
    slices: usize,
) -> Result<CellTransfer> {
    if slices == 0 {
        return Err(Error::Contract("cell transfer needs at least one slice".into()));
    }
    let grid = source.grid().clone();
    let profile: FieldProfile = cell.field;
    let quadrature_points: Vec<(f64, f64)> = if profile.is_uniform() {
        vec![(profile.center_t, cell.length_m)]
    } else {
        let slice_u = 2.0 / slices as f64;
        let mut points = Vec::with_capacity(3 * slices);
        for j in 0..slices {
            let mid = -1.0 + (j as f64 + 0.5) * slice_u;
            for (x, w) in GL_NODES.iter().zip(GL_WEIGHTS) {
                let u = mid + x * slice_u / 2.0;
                let dz = w * cell.length_m / (2.0 * slices as f64);
                points.push((profile.at(u), dz));
            }
        }
        points
    };

    // group path lengths by field so each spectrum is evaluated once
    let mut by_field: BTreeMap<u64, f64> = BTreeMap::new();
    for &(b, dz) in &quadrature_points {
        *by_field.entry(b.to_bits()).or_insert(0.0) += dz;
    }
    let spectra: Vec<(std::sync::Arc<ComplexIndexSpectrum>, f64)> = by_field
        .into_par_iter()
        .map(|(bits, dz)| source.index_at(f64::from_bits(bits)).map(|s| (s, dz)))
        .collect::<Result<_>>()?;

    let mut phase_plus = vec![Complex64::new(0.0, 0.0); grid.len()];
    let mut phase_minus = vec![Complex64::new(0.0, 0.0); grid.len()];
    for (spec, dz) in &spectra {
        if spec.grid != grid {
            return Err(Error::Contract("index spectrum grid differs from source grid".into()));
        }
        for i in 0..grid.len() {
            let k = path_phase_factor(&grid, i) * dz;
            phase_plus[i] += (spec.n_plus[i] - 1.0) * k;
            phase_minus[i] += (spec.n_minus[i] - 1.0) * k;
        }
    }
    Ok(CellTransfer {
        grid,
        phase_plus,
        phase_minus,
    })
}

/// Intensity transmission `exp(-4πν Im n L / c)` of the σ+ index.
pub fn scalar_transmission(index: &ComplexIndexSpectrum, length_m: f64) -> Vec<f64> {
    (0..index.len())
        .map(|i| (-2.0 * path_phase_factor(&index.grid, i) * index.n_plus[i].im * length_m).exp())
        .collect()
}

/// Zero-field, polarization-independent transmission of a (possibly
/// buffer-gas broadened) absorbing cell.
pub fn blocking_cell_transmission(atoms: &AtomData, cell: &VaporCellConfig, grid: &FrequencyGrid) -> Result<Vec<f64>> {
    cell.validate(atoms)?;
    let zero_field = VaporCellConfig {
        field: FieldProfile::uniform(0.0),
        ..cell.clone()
    };
    let sets = d1_line_sets(atoms, &zero_field, 0.0)?;
    let index = complex_index(&sets, &zero_field, grid)?;
    Ok(scalar_transmission(&index, cell.length_m))
}
