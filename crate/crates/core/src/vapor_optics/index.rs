use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cell::VaporCellConfig;
use crate::atomic_structure::{transition_lines, zeeman_spectrum, AtomData, Polarization, TransitionLine};
use crate::constants::{BOLTZMANN, EPSILON_0, HBAR, SPEED_OF_LIGHT};
use crate::error::{Error, Result};
use crate::faddeeva::faddeeva;
use crate::grid::FrequencyGrid;

/// Lines of one isotope with what is needed to broaden them.
#[derive(Debug, Clone)]
pub struct LineSet {
    pub isotope: String,
    pub density_m3: f64,
    pub mass_kg: f64,
    pub linewidth_hz: f64,
    pub reduced_dipole_cm: f64,
    pub lines: Vec<TransitionLine>,
}

/// D1 σ± lines of every isotope present in the cell at a given field.
pub fn d1_line_sets(atoms: &AtomData, cell: &VaporCellConfig, field_t: f64) -> Result<Vec<LineSet>> {
    let mut sets = Vec::new();
    for (name, &fraction) in &cell.isotope_fractions {
        if fraction == 0.0 {
            continue;
        }
        let iso = atoms.isotope(name)?;
        let d1 = iso.d1()?;
        let ground = zeeman_spectrum(iso, &d1.lower, field_t)?;
        let excited = zeeman_spectrum(iso, &d1.upper, field_t)?;
        let mut lines = Vec::new();
        for pol in [Polarization::SigmaPlus, Polarization::SigmaMinus] {
            lines.extend(
                transition_lines(&ground, &excited, pol, iso, cell.temperature_k)?
                    .into_iter()
                    .filter(|l| l.strength > 1e-14),
            );
        }
        sets.push(LineSet {
            isotope: name.clone(),
            density_m3: cell.partial_density(atoms, name)?,
            mass_kg: iso.mass_kg,
            linewidth_hz: d1.linewidth_hz,
            reduced_dipole_cm: d1.reduced_dipole_cm,
            lines,
        });
    }
    Ok(sets)
}

/// Voigt FWHM (Olivero–Longbothum approximation) for a line at `frequency_hz`.
pub fn voigt_fwhm_hz(frequency_hz: f64, lorentz_fwhm_hz: f64, temperature_k: f64, mass_kg: f64) -> f64 {
    let doppler =
        frequency_hz / SPEED_OF_LIGHT * (8.0 * std::f64::consts::LN_2 * BOLTZMANN * temperature_k / mass_kg).sqrt();
    0.5346 * lorentz_fwhm_hz + (0.2166 * lorentz_fwhm_hz * lorentz_fwhm_hz + doppler * doppler).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexIndexSpectrum {
    pub grid: FrequencyGrid,
    pub n_plus: Vec<Complex64>,
    pub n_minus: Vec<Complex64>,
}

impl ComplexIndexSpectrum {
    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }
}

struct BroadenedLine {
    detuning_hz: f64,
    doppler_hz: f64,
    half_width_hz: f64,
    coefficient: f64,
    plus: bool,
}

/// Sums Voigt-broadened susceptibilities of all lines on `grid`.
pub fn complex_index(sets: &[LineSet], cell: &VaporCellConfig, grid: &FrequencyGrid) -> Result<ComplexIndexSpectrum> {
    if sets.iter().all(|s| s.lines.is_empty()) {
        return Err(Error::Contract("no transition lines to broaden".into()));
    }
    let lorentz_hz = |s: &LineSet| s.linewidth_hz + cell.buffer_broadening_hz;
    if grid.len() > 1 {
        let required = sets
            .iter()
            .filter(|s| !s.lines.is_empty())
            .map(|s| voigt_fwhm_hz(s.lines[0].frequency_hz, lorentz_hz(s), cell.temperature_k, s.mass_kg) / 10.0)
            .fold(f64::INFINITY, f64::min);
        if grid.step_hz > required {
            return Err(Error::Resolution {
                spacing_hz: grid.step_hz,
                required_hz: required,
            });
        }
    }

    let mut broadened = Vec::new();
    for s in sets {
        let thermal_speed = (2.0 * BOLTZMANN * cell.temperature_k / s.mass_kg).sqrt();
        for l in &s.lines {
            let doppler_hz = l.frequency_hz * thermal_speed / SPEED_OF_LIGHT;
            let ku = 2.0 * std::f64::consts::PI * doppler_hz;
            let weight = s.density_m3 * l.population * l.strength;
            broadened.push(BroadenedLine {
                detuning_hz: l.frequency_hz - grid.reference_hz,
                doppler_hz,
                half_width_hz: lorentz_hz(s) / 2.0,
                coefficient: weight * s.reduced_dipole_cm.powi(2) * std::f64::consts::PI.sqrt()
                    / (EPSILON_0 * HBAR * ku),
                plus: l.polarization == Polarization::SigmaPlus,
            });
        }
    }

    let (n_plus, n_minus): (Vec<Complex64>, Vec<Complex64>) = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let nu = grid.detuning(i);
            let mut chi = [Complex64::new(0.0, 0.0); 2];
            for b in &broadened {
                let z = Complex64::new(nu - b.detuning_hz, b.half_width_hz) / b.doppler_hz;
                chi[usize::from(!b.plus)] += Complex64::i() * b.coefficient * faddeeva(z);
            }
            ((1.0 + chi[0]).sqrt(), (1.0 + chi[1]).sqrt())
        })
        .unzip();
    Ok(ComplexIndexSpectrum {
        grid: grid.clone(),
        n_plus,
        n_minus,
    })
}

/// Anything that can supply `n±` on a fixed grid for a given uniform field.
pub trait IndexSource: Sync {
    fn grid(&self) -> &FrequencyGrid;
    fn index_at(&self, field_t: f64) -> Result<Arc<ComplexIndexSpectrum>>;
}

/// Index source for a vapor cell, caching spectra by field value.
pub struct VaporModel {
    atoms: AtomData,
    cell: VaporCellConfig,
    grid: FrequencyGrid,
    cache: Mutex<HashMap<u64, Arc<ComplexIndexSpectrum>>>,
}

impl VaporModel {
    pub fn new(atoms: AtomData, cell: VaporCellConfig, grid: FrequencyGrid) -> Result<Self> {
        cell.validate(&atoms)?;
        Ok(Self {
            atoms,
            cell,
            grid,
            cache: Mutex::new(HashMap::new()),
        })
    }

    pub fn atoms(&self) -> &AtomData {
        &self.atoms
    }

    pub fn cell(&self) -> &VaporCellConfig {
        &self.cell
    }
}

impl IndexSource for VaporModel {
    fn grid(&self) -> &FrequencyGrid {
        &self.grid
    }

    fn index_at(&self, field_t: f64) -> Result<Arc<ComplexIndexSpectrum>> {
        let key = field_t.to_bits();
        if let Some(hit) = self.cache.lock().expect("index cache poisoned").get(&key) {
            return Ok(Arc::clone(hit));
        }
        let sets = d1_line_sets(&self.atoms, &self.cell, field_t)?;
        let spectrum = Arc::new(complex_index(&sets, &self.cell, &self.grid)?);
        self.cache
            .lock()
            .expect("index cache poisoned")
            .insert(key, Arc::clone(&spectrum));
        Ok(spectrum)
    }
}
