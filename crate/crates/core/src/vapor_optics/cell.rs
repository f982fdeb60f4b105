use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::atomic_structure::{AtomData, VaporPressureModel};
use crate::constants::{BOLTZMANN, TORR_TO_PA};
use crate::error::{Error, Result};

const DENSITY_RANGE_K: (f64, f64) = (250.0, 450.0);

/// Rb D1 collisional broadening by N2, FWHM per amagat.
pub const N2_BROADENING_HZ_PER_AMAGAT: f64 = 17.8e9;

/// Saturated vapor number density (m^-3) of the element at `temperature_k`.
pub fn number_density(vapor: &VaporPressureModel, temperature_k: f64) -> Result<f64> {
    if !(temperature_k > DENSITY_RANGE_K.0 && temperature_k < DENSITY_RANGE_K.1) {
        return Err(Error::Domain {
            quantity: "temperature_k",
            value: temperature_k,
            reason: format!(
                "vapor-pressure correlation used only in ({}, {}) K",
                DENSITY_RANGE_K.0, DENSITY_RANGE_K.1
            ),
        });
    }
    let pressure_pa = vapor.pressure_torr(temperature_k) * TORR_TO_PA;
    Ok(pressure_pa / (BOLTZMANN * temperature_k))
}

/// Lorentzian FWHM from an N2 fill of `pressure_torr` sealed at `fill_temperature_k`.
pub fn buffer_gas_broadening_hz(pressure_torr: f64, fill_temperature_k: f64) -> f64 {
    let amagat = pressure_torr / 760.0 * 273.15 / fill_temperature_k;
    N2_BROADENING_HZ_PER_AMAGAT * amagat
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DroopShape {
    #[default]
    Quadratic,
    Linear,
}

/// Axial field along the cell: `center_t` at the middle, falling by the
/// fraction `droop` at either face.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FieldProfile {
    pub center_t: f64,
    #[serde(default)]
    pub droop: f64,
    #[serde(default)]
    pub shape: DroopShape,
}

impl FieldProfile {
    pub fn uniform(field_t: f64) -> Self {
        Self {
            center_t: field_t,
            droop: 0.0,
            shape: DroopShape::Quadratic,
        }
    }

    pub fn with_center(self, center_t: f64) -> Self {
        Self { center_t, ..self }
    }

    /// Field at normalized position `u = 2z/L` in `[-1, 1]`.
    pub fn at(&self, u: f64) -> f64 {
        let falloff = match self.shape {
            DroopShape::Quadratic => u * u,
            DroopShape::Linear => u.abs(),
        };
        self.center_t * (1.0 - self.droop * falloff)
    }

    pub fn is_uniform(&self) -> bool {
        self.droop == 0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VaporCellConfig {
    pub length_m: f64,
    pub temperature_k: f64,
    /// Isotope name to fraction; must sum to 1.
    pub isotope_fractions: BTreeMap<String, f64>,
    /// Extra Lorentzian FWHM from buffer gas (Hz).
    #[serde(default)]
    pub buffer_broadening_hz: f64,
    #[serde(default)]
    pub field: FieldProfile,
}

impl VaporCellConfig {
    pub fn natural(atoms: &AtomData, length_m: f64, temperature_k: f64) -> Self {
        Self {
            length_m,
            temperature_k,
            isotope_fractions: atoms.natural_fractions(),
            buffer_broadening_hz: 0.0,
            field: FieldProfile::default(),
        }
    }

    /// Buffer-gas filled cell heated until opaque near resonance.
    pub fn hot_blocking(atoms: &AtomData) -> Self {
        Self {
            buffer_broadening_hz: buffer_gas_broadening_hz(10.0, 295.0),
            ..Self::natural(atoms, 0.05, 420.0)
        }
    }

    /// The blocking cell left at room temperature.
    pub fn cold_blocking(atoms: &AtomData) -> Self {
        Self::natural(atoms, 0.10, 295.0)
    }

    pub fn with_field(mut self, field: FieldProfile) -> Self {
        self.field = field;
        self
    }

    pub fn validate(&self, atoms: &AtomData) -> Result<()> {
        if !(self.length_m > 0.0) || !self.length_m.is_finite() {
            return Err(Error::config("cell.length_m", "must be positive"));
        }
        if !(self.temperature_k > 0.0) || !self.temperature_k.is_finite() {
            return Err(Error::config("cell.temperature_k", "must be positive"));
        }
        if !(self.buffer_broadening_hz >= 0.0) {
            return Err(Error::config("cell.buffer_broadening_hz", "must be non-negative"));
        }
        if !(0.0..0.5).contains(&self.field.droop) {
            return Err(Error::config("cell.field.droop", "must lie in [0, 0.5)"));
        }
        if !(self.field.center_t >= 0.0) {
            return Err(Error::config("cell.field.center_t", "must be non-negative"));
        }
        let mut total = 0.0;
        for (name, &f) in &self.isotope_fractions {
            atoms.isotope(name)?;
            if !(0.0..=1.0).contains(&f) {
                return Err(Error::config(
                    format!("cell.isotope_fractions.{name}"),
                    "must lie in [0, 1]",
                ));
            }
            total += f;
        }
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::config(
                "cell.isotope_fractions",
                format!("fractions sum to {total}, not 1"),
            ));
        }
        Ok(())
    }

    /// Partial number density of one isotope (m^-3).
    pub fn partial_density(&self, atoms: &AtomData, isotope: &str) -> Result<f64> {
        let fraction = self.isotope_fractions.get(isotope).copied().unwrap_or(0.0);
        Ok(fraction * number_density(&atoms.vapor_pressure, self.temperature_k)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn density_near_65_celsius() {
        let atoms = AtomData::shipped();
        let n = number_density(&atoms.vapor_pressure, 338.15).unwrap() * 1e-6;
        assert!(n > 5e11 / 1.5 && n < 5e11 * 1.5, "{n:e} cm^-3");
    }

    #[test]
    fn density_increases_with_temperature() {
        let atoms = AtomData::shipped();
        let mut prev = 0.0;
        for k in 0..190 {
            let t = 251.0 + k as f64;
            let n = number_density(&atoms.vapor_pressure, t).unwrap();
            assert!(n > prev, "not increasing at {t}");
            prev = n;
        }
    }

    #[test]
    fn density_rejects_out_of_range() {
        let atoms = AtomData::shipped();
        assert!(matches!(
            number_density(&atoms.vapor_pressure, 200.0),
            Err(Error::Domain { .. })
        ));
        assert!(matches!(
            number_density(&atoms.vapor_pressure, 460.0),
            Err(Error::Domain { .. })
        ));
    }

    #[test]
    fn partial_density_is_linear_in_fraction() {
        let atoms = AtomData::shipped();
        let mut cell = VaporCellConfig::natural(&atoms, 0.1, 340.0);
        cell.isotope_fractions = [("85Rb".to_string(), 0.25), ("87Rb".to_string(), 0.75)].into();
        let a = cell.partial_density(&atoms, "85Rb").unwrap();
        cell.isotope_fractions = [("85Rb".to_string(), 0.5), ("87Rb".to_string(), 0.5)].into();
        let b = cell.partial_density(&atoms, "85Rb").unwrap();
        assert!((b / a - 2.0).abs() < 1e-12);
    }

    #[test]
    fn validation_names_fields() {
        let atoms = AtomData::shipped();
        let mut cell = VaporCellConfig::natural(&atoms, 0.1, 340.0);
        cell.field.droop = 0.6;
        match cell.validate(&atoms) {
            Err(Error::Config { field, .. }) => assert_eq!(field, "cell.field.droop"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn quadratic_profile_endpoints() {
        let p = FieldProfile {
            center_t: 0.05,
            droop: 0.15,
            shape: DroopShape::Quadratic,
        };
        assert_eq!(p.at(0.0), 0.05);
        assert!((p.at(1.0) - 0.0425).abs() < 1e-15);
        assert_eq!(p.at(-1.0), p.at(1.0));
    }
}
