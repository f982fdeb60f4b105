//! Optical transition lines between Zeeman-resolved manifolds.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::angular::clebsch_gordan;
use super::data::IsotopeData;
use super::hamiltonian::{LevelLabel, ZeemanSpectrum};
use crate::constants::{BOLTZMANN, PLANCK};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Polarization {
    SigmaPlus,
    SigmaMinus,
    Pi,
}

impl Polarization {
    pub const ALL: [Polarization; 3] = [Polarization::SigmaPlus, Polarization::SigmaMinus, Polarization::Pi];

    /// Change of `m` on absorption.
    pub fn delta_m(self) -> i32 {
        match self {
            Polarization::SigmaPlus => 1,
            Polarization::SigmaMinus => -1,
            Polarization::Pi => 0,
        }
    }
}

/// How the lower-manifold sublevels are populated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum PopulationModel {
    /// Equal weight on every sublevel.
    #[default]
    Uniform,
    /// Boltzmann weights from the sublevel energies.
    Boltzmann,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransitionLine {
    /// Level index into the lower spectrum.
    pub lower: usize,
    /// Level index into the upper spectrum.
    pub upper: usize,
    pub lower_label: LevelLabel,
    pub upper_label: LevelLabel,
    pub frequency_hz: f64,
    pub polarization: Polarization,
    /// Relative strength; sums to 1 over all upper levels and polarizations
    /// for every lower level.
    pub strength: f64,
    pub population: f64,
}

fn populations(ground: &ZeemanSpectrum, model: PopulationModel, temperature_k: f64) -> Vec<f64> {
    let n = ground.dim();
    match model {
        PopulationModel::Uniform => vec![1.0 / n as f64; n],
        PopulationModel::Boltzmann => {
            let e0 = ground.energies_hz[0];
            let w: Vec<f64> = ground
                .energies_hz
                .iter()
                .map(|e| (-(e - e0) * PLANCK / (BOLTZMANN * temperature_k)).exp())
                .collect();
            let z: f64 = w.iter().sum();
            w.into_iter().map(|x| x / z).collect()
        }
    }
}

/// Spherical dipole component `q` between product bases, Wigner–Eckart reduced
/// matrix element stripped. Rows index the upper basis.
fn dipole_component(ground: &ZeemanSpectrum, excited: &ZeemanSpectrum, q: i32) -> DMatrix<f64> {
    let two_j = ground.two_j as i32;
    let two_jp = excited.two_j as i32;
    DMatrix::from_fn(excited.basis.len(), ground.basis.len(), |r, c| {
        let e = excited.basis[r];
        let g = ground.basis[c];
        if e.two_mi != g.two_mi {
            return 0.0;
        }
        clebsch_gordan(two_j, g.two_mj, 2, 2 * q, two_jp, e.two_mj)
    })
}

/// All lines between `ground` and `excited` for one polarization, populations uniform.
pub fn transition_lines(
    ground: &ZeemanSpectrum,
    excited: &ZeemanSpectrum,
    pol: Polarization,
    iso: &IsotopeData,
    temperature_k: f64,
) -> Result<Vec<TransitionLine>> {
    transition_lines_with(ground, excited, pol, iso, temperature_k, PopulationModel::Uniform)
}

pub fn transition_lines_with(
    ground: &ZeemanSpectrum,
    excited: &ZeemanSpectrum,
    pol: Polarization,
    iso: &IsotopeData,
    temperature_k: f64,
    model: PopulationModel,
) -> Result<Vec<TransitionLine>> {
    if ground.field_t != excited.field_t {
        return Err(Error::Contract(format!(
            "lower spectrum at {} T, upper at {} T",
            ground.field_t, excited.field_t
        )));
    }
    if ground.two_i != iso.two_i || excited.two_i != iso.two_i {
        return Err(Error::Contract(format!("spectra do not belong to {}", iso.name)));
    }
    if !(temperature_k > 0.0) {
        return Err(Error::Domain {
            quantity: "temperature_k",
            value: temperature_k,
            reason: "must be positive".into(),
        });
    }
    let q = pol.delta_m();
    let d = dipole_component(ground, excited, q);
    let amplitudes = excited.eigenvectors.transpose() * d * &ground.eigenvectors;
    let degeneracy = (ground.two_j + 1) as f64 / (excited.two_j + 1) as f64;
    let pops = populations(ground, model, temperature_k);

    let mut lines = Vec::new();
    for (g, g_label) in ground.labels.iter().enumerate() {
        for (e, e_label) in excited.labels.iter().enumerate() {
            if e_label.two_mf - g_label.two_mf != 2 * q {
                continue;
            }
            let a = amplitudes[(e, g)];
            lines.push(TransitionLine {
                lower: g,
                upper: e,
                lower_label: *g_label,
                upper_label: *e_label,
                frequency_hz: excited.energies_hz[e] - ground.energies_hz[g],
                polarization: pol,
                strength: degeneracy * a * a,
                population: pops[g],
            });
        }
    }
    Ok(lines)
}
