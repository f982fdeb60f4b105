//! Isotope constants and the structured data file they are loaded from.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};

/// Shipped rubidium constants, embedded at compile time.
pub const DEFAULT_ATOM_DATA: &str = include_str!("../../data/rubidium.toml");

/// Constants of one fine-structure manifold (e.g. `5P1/2`) of one isotope.
#[derive(Debug, Clone, PartialEq)]
pub struct ManifoldConstants {
    pub two_j: u32,
    /// Fine-structure centroid relative to the ground-state centroid (Hz).
    pub energy_offset_hz: f64,
    pub a_hfs_hz: f64,
    pub b_hfs_hz: f64,
    pub g_j: f64,
}

/// Radiative data for an optical transition between two manifolds.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionConstants {
    pub name: String,
    pub lower: String,
    pub upper: String,
    /// Natural linewidth Γ/2π (Hz).
    pub linewidth_hz: f64,
    /// Reduced dipole matrix element `<J||er||J'>` (C·m).
    pub reduced_dipole_cm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IsotopeData {
    pub name: String,
    pub two_i: u32,
    pub abundance: f64,
    pub mass_kg: f64,
    pub g_i: f64,
    pub manifolds: BTreeMap<String, ManifoldConstants>,
    pub transitions: Vec<TransitionConstants>,
}

impl IsotopeData {
    pub fn nuclear_spin(&self) -> f64 {
        self.two_i as f64 / 2.0
    }

    pub fn manifold(&self, label: &str) -> Result<&ManifoldConstants> {
        self.manifolds.get(label).ok_or_else(|| {
            Error::config(
                format!("isotope.{}.manifold.{label}", self.name),
                "unknown manifold label",
            )
        })
    }

    pub fn transition(&self, lower: &str, upper: &str) -> Result<&TransitionConstants> {
        self.transitions
            .iter()
            .find(|t| t.lower == lower && t.upper == upper)
            .ok_or_else(|| {
                Error::config(
                    format!("isotope.{}.transition", self.name),
                    format!("no transition {lower} -> {upper}"),
                )
            })
    }

    pub fn d1(&self) -> Result<&TransitionConstants> {
        self.transition("5S1/2", "5P1/2")
    }
}

/// `log10(P/Torr) = a + b/T + c·T + d·log10(T)`.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
pub struct VaporPressureCoefficients {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl VaporPressureCoefficients {
    pub fn log10_torr(&self, t_k: f64) -> f64 {
        self.a + self.b / t_k + self.c * t_k + self.d * t_k.log10()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VaporPressureModel {
    pub melting_point_k: f64,
    pub solid: VaporPressureCoefficients,
    pub liquid: VaporPressureCoefficients,
}

impl VaporPressureModel {
    pub fn pressure_torr(&self, t_k: f64) -> f64 {
        let phase = if t_k < self.melting_point_k {
            &self.solid
        } else {
            &self.liquid
        };
        10f64.powf(phase.log10_torr(t_k))
    }
}

/// Everything read from an atom data file.
#[derive(Debug, Clone, PartialEq)]
pub struct AtomData {
    pub isotopes: Vec<IsotopeData>,
    pub vapor_pressure: VaporPressureModel,
}

impl AtomData {
    pub fn shipped() -> Self {
        Self::from_toml_str(DEFAULT_ATOM_DATA).expect("shipped atom data is valid")
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::config(path.display().to_string(), e.to_string()))?;
        Self::from_toml_str(&text)
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let raw: RawFile = toml::from_str(text).map_err(|e| Error::config("atom-data", e.to_string()))?;
        raw.validate()
    }

    pub fn isotope(&self, name: &str) -> Result<&IsotopeData> {
        self.isotopes
            .iter()
            .find(|i| i.name == name)
            .ok_or_else(|| Error::config(format!("isotope.{name}"), "isotope not present in atom data"))
    }

    /// Abundance-weighted centroid of the D1 line over the natural mixture,
    /// used as the zero of all detuning axes.
    pub fn d1_centroid_hz(&self) -> f64 {
        let total: f64 = self.isotopes.iter().map(|i| i.abundance).sum();
        self.isotopes
            .iter()
            .filter_map(|i| i.manifolds.get("5P1/2").map(|m| i.abundance * m.energy_offset_hz))
            .sum::<f64>()
            / total
    }

    /// Natural-abundance isotope fractions.
    pub fn natural_fractions(&self) -> BTreeMap<String, f64> {
        self.isotopes.iter().map(|i| (i.name.clone(), i.abundance)).collect()
    }
}

// Raw serde mirror of the file. Numeric fields are optional so a missing one
// is reported with its full path instead of a generic parse failure.

#[derive(Deserialize)]
struct RawFile {
    vapor_pressure: Option<RawVapor>,
    #[serde(default)]
    isotope: Vec<RawIsotope>,
}

#[derive(Deserialize)]
struct RawVapor {
    melting_point_k: Option<f64>,
    solid: Option<VaporPressureCoefficients>,
    liquid: Option<VaporPressureCoefficients>,
}

#[derive(Deserialize)]
struct RawIsotope {
    name: Option<String>,
    nuclear_spin: Option<f64>,
    abundance: Option<f64>,
    mass_kg: Option<f64>,
    g_i: Option<f64>,
    #[serde(default)]
    manifold: BTreeMap<String, RawManifold>,
    #[serde(default)]
    transition: Vec<RawTransition>,
}

#[derive(Deserialize)]
struct RawManifold {
    j: Option<f64>,
    energy_offset_hz: Option<f64>,
    a_hfs_hz: Option<f64>,
    b_hfs_hz: Option<f64>,
    g_j: Option<f64>,
}

#[derive(Deserialize)]
struct RawTransition {
    name: Option<String>,
    lower: Option<String>,
    upper: Option<String>,
    linewidth_hz: Option<f64>,
    reduced_dipole_cm: Option<f64>,
}

fn req<T>(value: Option<T>, field: impl FnOnce() -> String) -> Result<T> {
    value.ok_or_else(|| Error::config(field(), "missing value"))
}

fn positive(value: f64, field: String) -> Result<f64> {
    if value > 0.0 && value.is_finite() {
        Ok(value)
    } else {
        Err(Error::config(field, format!("must be strictly positive, got {value}")))
    }
}

fn doubled_half_integer(value: f64, field: String) -> Result<u32> {
    let twice = 2.0 * value;
    if value < 0.0 || (twice - twice.round()).abs() > 1e-9 {
        return Err(Error::config(
            field,
            format!("{value} is not a non-negative half-integer"),
        ));
    }
    Ok(twice.round() as u32)
}

impl RawFile {
    fn validate(self) -> Result<AtomData> {
        let vp = req(self.vapor_pressure, || "vapor_pressure".into())?;
        let vapor_pressure = VaporPressureModel {
            melting_point_k: positive(
                req(vp.melting_point_k, || "vapor_pressure.melting_point_k".into())?,
                "vapor_pressure.melting_point_k".into(),
            )?,
            solid: req(vp.solid, || "vapor_pressure.solid".into())?,
            liquid: req(vp.liquid, || "vapor_pressure.liquid".into())?,
        };
        if self.isotope.is_empty() {
            return Err(Error::config("isotope", "no isotopes defined"));
        }
        let mut isotopes = Vec::with_capacity(self.isotope.len());
        for (k, iso) in self.isotope.into_iter().enumerate() {
            let at = |f: &str| format!("isotope[{k}].{f}");
            let name = req(iso.name, || at("name"))?;
            let two_i = doubled_half_integer(req(iso.nuclear_spin, || at("nuclear_spin"))?, at("nuclear_spin"))?;
            let abundance = req(iso.abundance, || at("abundance"))?;
            if !(0.0..=1.0).contains(&abundance) {
                return Err(Error::config(at("abundance"), "must lie in [0, 1]"));
            }
            let mass_kg = positive(req(iso.mass_kg, || at("mass_kg"))?, at("mass_kg"))?;
            let g_i = req(iso.g_i, || at("g_i"))?;

            let mut manifolds = BTreeMap::new();
            for (label, m) in iso.manifold {
                let mat = |f: &str| format!("isotope[{k}].manifold.{label}.{f}");
                let two_j = doubled_half_integer(req(m.j, || mat("j"))?, mat("j"))?;
                let constants = ManifoldConstants {
                    two_j,
                    energy_offset_hz: req(m.energy_offset_hz, || mat("energy_offset_hz"))?,
                    a_hfs_hz: req(m.a_hfs_hz, || mat("a_hfs_hz"))?,
                    b_hfs_hz: m.b_hfs_hz.unwrap_or(0.0),
                    g_j: req(m.g_j, || mat("g_j"))?,
                };
                if constants.energy_offset_hz < 0.0 {
                    return Err(Error::config(mat("energy_offset_hz"), "must be non-negative"));
                }
                manifolds.insert(label, constants);
            }

            let mut transitions = Vec::new();
            for (t, tr) in iso.transition.into_iter().enumerate() {
                let tat = |f: &str| format!("isotope[{k}].transition[{t}].{f}");
                let lower = req(tr.lower, || tat("lower"))?;
                let upper = req(tr.upper, || tat("upper"))?;
                for label in [&lower, &upper] {
                    if !manifolds.contains_key(label) {
                        return Err(Error::config(tat("lower/upper"), format!("unknown manifold {label}")));
                    }
                }
                transitions.push(TransitionConstants {
                    name: tr.name.unwrap_or_else(|| format!("{lower}-{upper}")),
                    lower,
                    upper,
                    linewidth_hz: positive(req(tr.linewidth_hz, || tat("linewidth_hz"))?, tat("linewidth_hz"))?,
                    reduced_dipole_cm: positive(
                        req(tr.reduced_dipole_cm, || tat("reduced_dipole_cm"))?,
                        tat("reduced_dipole_cm"),
                    )?,
                });
            }
            isotopes.push(IsotopeData {
                name,
                two_i,
                abundance,
                mass_kg,
                g_i,
                manifolds,
                transitions,
            });
        }
        let total: f64 = isotopes.iter().map(|i| i.abundance).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::config(
                "isotope[].abundance",
                format!("abundances sum to {total}, not 1"),
            ));
        }
        Ok(AtomData {
            isotopes,
            vapor_pressure,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_data_loads() {
        let data = AtomData::shipped();
        let rb87 = data.isotope("87Rb").unwrap();
        let rb85 = data.isotope("85Rb").unwrap();
        assert_eq!(rb87.two_i, 3);
        assert_eq!(rb85.two_i, 5);
        assert!(rb87.d1().unwrap().linewidth_hz > 0.0);
        let total: f64 = data.isotopes.iter().map(|i| i.abundance).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn missing_constant_names_the_field() {
        let broken = DEFAULT_ATOM_DATA.replacen("a_hfs_hz = 120.527e6\n", "", 1);
        let err = AtomData::from_toml_str(&broken).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("manifold.5P1/2.a_hfs_hz"), "{msg}");
    }

    #[test]
    fn abundances_must_sum_to_one() {
        let broken = DEFAULT_ATOM_DATA.replace("abundance = 0.7217", "abundance = 0.7");
        assert!(matches!(AtomData::from_toml_str(&broken), Err(Error::Config { .. })));
    }

    #[test]
    fn d1_centroid_between_isotope_lines() {
        let data = AtomData::shipped();
        let c = data.d1_centroid_hz();
        assert!(c > 377.107385e12 && c < 377.107464e12);
    }
}
