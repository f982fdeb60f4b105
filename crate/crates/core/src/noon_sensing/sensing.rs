use std::collections::BTreeMap;

use nalgebra::{Matrix2, Matrix4};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::elements::{apply_jones, oscillation_count, retarder, visibility, Analyzer, MeasurementRates};
use super::state::{c, TwoPhotonPolState};
use crate::atomic_structure::{AtomData, IsotopeData, ManifoldConstants};
use crate::error::{Error, Result};
use crate::filter_models::DEFAULT_SLICES;
use crate::grid::FrequencyGrid;
use crate::vapor_optics::{cell_transfer, DroopShape, FieldProfile, Jones, VaporCellConfig, VaporModel};

/// Highest field the sensing model is used at (T).
pub const MAX_SENSING_FIELD_T: f64 = 0.060;

/// Zero-field hyperfine energy of level `f` in a manifold (Hz).
fn hyperfine_energy_hz(m: &ManifoldConstants, two_i: u32, f: f64) -> f64 {
    let i = two_i as f64 / 2.0;
    let j = m.two_j as f64 / 2.0;
    let k = f * (f + 1.0) - i * (i + 1.0) - j * (j + 1.0);
    let quadrupole = if m.two_j > 1 && two_i > 1 {
        m.b_hfs_hz * (1.5 * k * (k + 1.0) - 2.0 * i * (i + 1.0) * j * (j + 1.0))
            / (4.0 * i * (2.0 * i - 1.0) * j * (2.0 * j - 1.0))
    } else {
        0.0
    };
    m.energy_offset_hz + m.a_hfs_hz * k / 2.0 + quadrupole
}

/// Zero-field frequency of the hyperfine line `lower, f_lower -> upper, f_upper`.
pub fn hyperfine_line_hz(iso: &IsotopeData, lower: &str, f_lower: f64, upper: &str, f_upper: f64) -> Result<f64> {
    let lo = iso.manifold(lower)?;
    let up = iso.manifold(upper)?;
    Ok(hyperfine_energy_hz(up, iso.two_i, f_upper) - hyperfine_energy_hz(lo, iso.two_i, f_lower))
}

/// Probe tuned to 87Rb D1 `F=2 -> F'=1`, as a detuning from the D1 centroid.
pub fn noon_probe_detuning_hz(atoms: &AtomData) -> Result<f64> {
    let rb87 = atoms.isotope("87Rb")?;
    Ok(hyperfine_line_hz(rb87, "5S1/2", 2.0, "5P1/2", 1.0)? - atoms.d1_centroid_hz())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensingSetup {
    pub cell: VaporCellConfig,
    pub probe_detuning_hz: f64,
    #[serde(default)]
    pub analyzer: Analyzer,
    #[serde(default = "unit")]
    pub detection_efficiency: f64,
    #[serde(default = "default_slices")]
    pub slices: usize,
}

fn unit() -> f64 {
    1.0
}

fn default_slices() -> usize {
    DEFAULT_SLICES
}

impl SensingSetup {
    /// Enriched 85Rb cell with a 0.5% 87Rb residue, 75 mm, 70 °C, field
    /// falling 15% from the centre to the faces.
    pub fn enriched_cell(atoms: &AtomData) -> Result<Self> {
        let cell = VaporCellConfig {
            length_m: 0.075,
            temperature_k: 343.15,
            isotope_fractions: BTreeMap::from([("85Rb".to_string(), 0.995), ("87Rb".to_string(), 0.005)]),
            buffer_broadening_hz: 0.0,
            field: FieldProfile {
                center_t: 0.0,
                droop: 0.15,
                shape: DroopShape::Quadratic,
            },
        };
        Ok(Self {
            cell,
            probe_detuning_hz: noon_probe_detuning_hz(atoms)?,
            analyzer: Analyzer::default(),
            detection_efficiency: 1.0,
            slices: DEFAULT_SLICES,
        })
    }

    pub fn validate(&self, atoms: &AtomData) -> Result<()> {
        self.cell.validate(atoms)?;
        if !(self.detection_efficiency > 0.0 && self.detection_efficiency <= 1.0) {
            return Err(Error::config("sensing.detection_efficiency", "must lie in (0, 1]"));
        }
        if self.slices == 0 {
            return Err(Error::config("sensing.slices", "must be positive"));
        }
        if !self.probe_detuning_hz.is_finite() {
            return Err(Error::config("sensing.probe_detuning_hz", "must be finite"));
        }
        Ok(())
    }

    /// Single-photon Jones matrices of the cell at the probe for each field.
    pub fn cell_jones(&self, atoms: &AtomData, fields_t: &[f64]) -> Result<Vec<Jones>> {
        self.validate(atoms)?;
        for &b in fields_t {
            if !(0.0..=MAX_SENSING_FIELD_T).contains(&b) {
                return Err(Error::Domain {
                    quantity: "sensing field (T)",
                    value: b,
                    reason: format!("model covers 0 to {MAX_SENSING_FIELD_T} T"),
                });
            }
        }
        let nu = self.probe_detuning_hz;
        let grid = FrequencyGrid::new(atoms.d1_centroid_hz(), nu - 20e6, nu + 20e6, 5e6)?;
        let model = VaporModel::new(atoms.clone(), self.cell.clone(), grid)?;
        fields_t
            .par_iter()
            .map(|&b| {
                let cell = self.cell.clone().with_field(self.cell.field.with_center(b));
                cell_transfer(&model, &cell, self.slices)?.jones_linear_at(nu)
            })
            .collect()
    }
}

/// Per-pair probabilities of every detection pattern, including lost photons.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct OutcomeProbabilities {
    pub hh: f64,
    pub hv: f64,
    pub vv: f64,
    /// Exactly one photon detected, in H (V).
    pub h_only: f64,
    pub v_only: f64,
    pub none: f64,
}

impl OutcomeProbabilities {
    pub fn as_array(&self) -> [f64; 6] {
        [self.hh, self.hv, self.vv, self.h_only, self.v_only, self.none]
    }

    pub fn rates(&self) -> MeasurementRates {
        MeasurementRates {
            singles_h: 2.0 * self.hh + self.hv + self.h_only,
            singles_v: self.hv + 2.0 * self.vv + self.v_only,
            coincidence_hh: self.hh,
            coincidence_hv: self.hv,
            coincidence_vv: self.vv,
        }
    }
}

/// Single-photon POVM `[H, V, lost]` for channel `j`, analyzer `a` and detector efficiency.
pub(crate) fn photon_povm(j: &Jones, analyzer: &Jones, efficiency: f64) -> [Matrix2<Complex64>; 3] {
    let m = analyzer * j;
    let proj = |k: usize| {
        let row = m.row(k);
        row.adjoint() * row * c(efficiency, 0.0)
    };
    let h = proj(0);
    let v = proj(1);
    [h, v, Matrix2::identity() - h - v]
}

pub fn outcome_probabilities(
    rho: &TwoPhotonPolState,
    j: &Jones,
    analyzer: &Analyzer,
    detection_efficiency: f64,
) -> OutcomeProbabilities {
    let [h, v, lost] = photon_povm(j, &analyzer.jones(), detection_efficiency);
    let r = rho.matrix();
    let p = |a: &Matrix2<Complex64>, b: &Matrix2<Complex64>| -> f64 {
        let e: Matrix4<Complex64> = a.kronecker(b);
        (e * r).trace().re.max(0.0)
    };
    OutcomeProbabilities {
        hh: p(&h, &h),
        hv: p(&h, &v) + p(&v, &h),
        vv: p(&v, &v),
        h_only: p(&h, &lost) + p(&lost, &h),
        v_only: p(&v, &lost) + p(&lost, &v),
        none: p(&lost, &lost),
    }
}

/// Circular amplitudes `(t+, t-)` of a Jones matrix diagonal in the circular basis.
pub fn circular_amplitudes(j: &Jones) -> Result<(Complex64, Complex64)> {
    let scale = j.iter().map(|z| z.norm()).fold(1e-300, f64::max);
    if (j[(0, 0)] - j[(1, 1)]).norm() > 1e-9 * scale || (j[(0, 1)] + j[(1, 0)]).norm() > 1e-9 * scale {
        return Err(Error::Contract(
            "Jones matrix is not diagonal in the circular basis".into(),
        ));
    }
    let s = j[(0, 0)];
    let d = Complex64::i() * j[(0, 1)];
    Ok((s + d, s - d))
}

pub fn jones_from_circular(t_plus: Complex64, t_minus: Complex64) -> Jones {
    let s = (t_plus + t_minus) * 0.5;
    let d = (t_plus - t_minus) * 0.5;
    let i = Complex64::i();
    Jones::new(s, -i * d, i * d, s)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensingScanPoint {
    pub field_t: f64,
    /// Faraday rotation of linear polarization, unwrapped along the scan.
    pub rotation_rad: f64,
    /// Fraction of pairs with both photons through the cell.
    pub transmission: f64,
    pub rates: MeasurementRates,
    pub outcomes: OutcomeProbabilities,
    /// Row-major single-photon Jones matrix of the channel.
    pub jones: [Complex64; 4],
}

impl SensingScanPoint {
    pub fn jones_matrix(&self) -> Jones {
        Jones::new(self.jones[0], self.jones[1], self.jones[2], self.jones[3])
    }
}

/// Builds scan points from a channel already evaluated at each parameter value.
pub fn scan_with_jones(
    rho: &TwoPhotonPolState,
    channel: &[(f64, Jones)],
    analyzer: &Analyzer,
    detection_efficiency: f64,
) -> Result<Vec<SensingScanPoint>> {
    rho.validate()?;
    let input_trace = rho.trace();
    let mut unwrapped = 0.0;
    let mut previous: Option<f64> = None;
    channel
        .iter()
        .map(|(param, j)| {
            let (tp, tm) = circular_amplitudes(j)?;
            // t+ carries exp(-iθ) for a rotation by θ
            let raw = (tm.arg() - tp.arg()) / 2.0;
            unwrapped = match previous {
                None => raw,
                Some(p) => {
                    let step = (raw - p + std::f64::consts::FRAC_PI_2).rem_euclid(std::f64::consts::PI)
                        - std::f64::consts::FRAC_PI_2;
                    unwrapped + step
                }
            };
            previous = Some(raw);
            let out = apply_jones(rho, j);
            let outcomes = outcome_probabilities(rho, j, analyzer, detection_efficiency);
            Ok(SensingScanPoint {
                field_t: *param,
                rotation_rad: unwrapped,
                transmission: if input_trace > 0.0 {
                    out.trace() / input_trace
                } else {
                    0.0
                },
                rates: outcomes.rates(),
                outcomes,
                jones: [j[(0, 0)], j[(0, 1)], j[(1, 0)], j[(1, 1)]],
            })
        })
        .collect()
}

/// Propagates `rho` through the cell at each field and records rates.
pub fn sensing_scan(
    atoms: &AtomData,
    setup: &SensingSetup,
    rho: &TwoPhotonPolState,
    fields_t: &[f64],
) -> Result<Vec<SensingScanPoint>> {
    let jones = setup.cell_jones(atoms, fields_t)?;
    let channel: Vec<(f64, Jones)> = fields_t.iter().copied().zip(jones).collect();
    scan_with_jones(rho, &channel, &setup.analyzer, setup.detection_efficiency)
}

/// Input for the sensing scan: the H/V state returned to the cavity frame by
/// a QWP at -45°, with weight `imbalance` moved to `|HH⟩` so that singles
/// carry a single-photon fringe.
pub fn cavity_frame_input(hv_noon: &TwoPhotonPolState, imbalance: f64) -> Result<TwoPhotonPolState> {
    let back = apply_jones(
        hv_noon,
        &retarder(-std::f64::consts::FRAC_PI_4, std::f64::consts::FRAC_PI_2),
    );
    back.mix(
        &TwoPhotonPolState::product(super::state::Basis2::H, super::state::Basis2::H),
        imbalance,
    )
}

/// Fringe content of a field scan. Oscillations are counted on the
/// normalized fractions `V/(H+V)` and `XY/(HH+HV+VV)` so that the
/// transmission envelope does not add turning points; visibilities use the
/// raw rates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FringeSummary {
    pub singles_oscillations: f64,
    /// HH, HV, VV.
    pub coincidence_oscillations: [f64; 3],
    pub coincidence_visibility: [f64; 3],
    pub total_rotation_rad: f64,
}

pub fn summarize_scan(scan: &[SensingScanPoint]) -> Result<FringeSummary> {
    if scan.len() < 3 {
        return Err(Error::Coverage("scan needs at least three points".into()));
    }
    let column = |f: &dyn Fn(&SensingScanPoint) -> f64| scan.iter().map(f).collect::<Vec<f64>>();
    let singles = column(&|p| {
        let total = p.rates.singles_h + p.rates.singles_v;
        if total > 0.0 {
            p.rates.singles_v / total
        } else {
            0.0
        }
    });
    let fraction = |pick: fn(&MeasurementRates) -> f64| {
        column(&|p| {
            let r = &p.rates;
            let total = r.coincidence_hh + r.coincidence_hv + r.coincidence_vv;
            if total > 0.0 {
                pick(r) / total
            } else {
                0.0
            }
        })
    };
    let picks: [fn(&MeasurementRates) -> f64; 3] = [|r| r.coincidence_hh, |r| r.coincidence_hv, |r| r.coincidence_vv];
    Ok(FringeSummary {
        singles_oscillations: oscillation_count(&singles),
        coincidence_oscillations: picks.map(|f| oscillation_count(&fraction(f))),
        coincidence_visibility: picks.map(|f| visibility(&column(&|p| f(&p.rates)))),
        total_rotation_rad: scan[scan.len() - 1].rotation_rad - scan[0].rotation_rad,
    })
}

/// Writes the scan as CSV.
pub fn write_scan_csv<W: std::io::Write>(scan: &[SensingScanPoint], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::Numeric(format!("writing scan: {e}"));
    w.write_record([
        "field_t",
        "rotation_rad",
        "transmission",
        "singles_h",
        "singles_v",
        "coincidence_hh",
        "coincidence_hv",
        "coincidence_vv",
    ])
    .map_err(io)?;
    for p in scan {
        w.write_record(
            [
                p.field_t,
                p.rotation_rad,
                p.transmission,
                p.rates.singles_h,
                p.rates.singles_v,
                p.rates.coincidence_hh,
                p.rates.coincidence_hv,
                p.rates.coincidence_vv,
            ]
            .map(|v| format!("{v:.12e}")),
        )
        .map_err(io)?;
    }
    w.flush().map_err(|e| Error::Numeric(format!("writing scan: {e}")))
}

#[cfg(test)]
mod tests {
    use super::super::elements::rotator;
    use super::super::state::{make_noon_from_pair, surrogate_noon_state};
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn probe_sits_three_ghz_red() {
        let atoms = AtomData::shipped();
        let nu = noon_probe_detuning_hz(&atoms).unwrap();
        // F=2 ground shift 3A/4, F'=1 excited shift -5A'/4
        let rb87 = atoms.isotope("87Rb").unwrap();
        let g = rb87.manifold("5S1/2").unwrap();
        let e = rb87.manifold("5P1/2").unwrap();
        let expected = e.energy_offset_hz - 1.25 * e.a_hfs_hz - 0.75 * g.a_hfs_hz - atoms.d1_centroid_hz();
        assert_abs_diff_eq!(nu, expected, epsilon = 1e-3);
        assert!((-3.1e9..-2.9e9).contains(&nu), "{nu}");
    }

    #[test]
    fn rotation_channel_round_trip() {
        let r = rotator(0.3);
        let (tp, tm) = circular_amplitudes(&r).unwrap();
        assert_abs_diff_eq!((tm.arg() - tp.arg()) / 2.0, 0.3, epsilon = 1e-14);
        let back = jones_from_circular(tp, tm);
        assert!((back - r).iter().all(|z| z.norm() < 1e-15));
    }

    #[test]
    fn outcomes_sum_to_one() {
        let rho = surrogate_noon_state();
        let j = jones_from_circular(Complex64::from_polar(0.8, 0.4), Complex64::from_polar(0.6, -0.1));
        let p = outcome_probabilities(&rho, &j, &Analyzer::hwp(0.2), 0.7);
        assert_abs_diff_eq!(p.as_array().iter().sum::<f64>(), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn zero_field_is_uniform_attenuation() {
        let atoms = AtomData::shipped();
        let setup = SensingSetup::enriched_cell(&atoms).unwrap();
        let j = setup.cell_jones(&atoms, &[0.0]).unwrap()[0];
        assert!(j[(0, 1)].norm() < 1e-12 * j[(0, 0)].norm());
        assert!((j[(0, 0)] - j[(1, 1)]).norm() < 1e-15);
        let t = j[(0, 0)].norm_sqr();
        assert!(t > 0.0 && t < 1.0);

        let rho = make_noon_from_pair();
        let scan = sensing_scan(&atoms, &setup, &rho, &[0.0]).unwrap();
        let ideal = super::super::elements::measurement_rates(&rho, &setup.analyzer);
        assert_abs_diff_eq!(
            scan[0].rates.coincidence_hv,
            ideal.coincidence_hv * t * t,
            epsilon = 1e-14
        );
        assert_abs_diff_eq!(scan[0].transmission, t * t, epsilon = 1e-14);
    }

    #[test]
    fn field_outside_model_range_is_rejected() {
        let atoms = AtomData::shipped();
        let setup = SensingSetup::enriched_cell(&atoms).unwrap();
        assert!(matches!(setup.cell_jones(&atoms, &[0.07]), Err(Error::Domain { .. })));
    }
}
