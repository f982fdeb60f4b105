//! Interference of a biphoton amplitude with the two-photon part of a
//! coherent reference, and per-delay reconstruction of the amplitude.

use std::f64::consts::{LN_2, PI};

use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Two-photon amplitude on a delay grid `τ_i = i·step` for `i ∈ [-n, n]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiphotonWaveFunction {
    pub step_s: f64,
    pub psi: Vec<Complex64>,
    #[serde(default)]
    pub bandwidth_hz: Option<f64>,
}

impl BiphotonWaveFunction {
    pub fn half_len(&self) -> usize {
        self.psi.len() / 2
    }

    pub fn delay(&self, i: usize) -> f64 {
        (i as f64 - self.half_len() as f64) * self.step_s
    }

    pub fn delays(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.psi.len()).map(|i| self.delay(i))
    }

    pub fn centre(&self) -> Complex64 {
        self.psi[self.half_len()]
    }
}

/// Ideal sub-threshold cavity output: `|ψ| ∝ exp(-π·bandwidth·|τ|)`, constant phase.
pub fn ideal_opo_psi(bandwidth_hz: f64, phase_rad: f64, step_s: f64, half_len: usize) -> Result<BiphotonWaveFunction> {
    if !(bandwidth_hz > 0.0 && bandwidth_hz.is_finite()) {
        return Err(Error::config("biphoton.bandwidth_hz", "must be positive"));
    }
    if !(step_s > 0.0) {
        return Err(Error::config("biphoton.step_s", "must be positive"));
    }
    let n = half_len as i64;
    let psi = (-n..=n)
        .map(|i| Complex64::from_polar((-PI * bandwidth_hz * (i as f64 * step_s).abs()).exp(), phase_rad))
        .collect();
    Ok(BiphotonWaveFunction {
        step_s,
        psi,
        bandwidth_hz: Some(bandwidth_hz),
    })
}

/// FWHM of `|ψ|²` for the ideal amplitude, `ln2 / (π·bandwidth)`.
pub fn ideal_intensity_fwhm_s(bandwidth_hz: f64) -> f64 {
    LN_2 / (PI * bandwidth_hz)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoherentRef {
    pub amplitude: Complex64,
    /// Analyzer phase φ.
    pub phase_rad: f64,
}

impl CoherentRef {
    /// Two-photon amplitude `(α²/2) e^{2iφ}` of the reference.
    pub fn pair_amplitude(&self) -> Complex64 {
        self.amplitude * self.amplitude / 2.0 * Complex64::from_polar(1.0, 2.0 * self.phase_rad)
    }
}

/// `|ψ(τ) + (α²/2) e^{2iφ}|² + floor` at grid index `i`.
pub fn coincidence_rate(psi: &BiphotonWaveFunction, reference: &CoherentRef, i: usize, floor: f64) -> f64 {
    (psi.psi[i] + reference.pair_amplitude()).norm_sqr() + floor
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterferenceRecord {
    pub phase_rad: f64,
    pub step_s: f64,
    /// Counts (or exact expected counts) per delay bin, centred on τ = 0.
    pub counts: Vec<f64>,
    /// Counts per unit rate.
    pub exposure: f64,
    /// Additive accidental rate included in `counts`.
    #[serde(default)]
    pub floor_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordSimulation {
    /// Reference amplitude |α| (real; the reference fixes zero phase).
    pub amplitude: f64,
    pub phases_rad: Vec<f64>,
    pub exposure: f64,
    #[serde(default)]
    pub floor_rate: f64,
    pub noise: bool,
    #[serde(default)]
    pub seed: u64,
}

fn distinct_phases_mod_pi(phases: &[f64]) -> usize {
    let mut reduced: Vec<f64> = phases.iter().map(|p| p.rem_euclid(PI)).collect();
    reduced.sort_by(f64::total_cmp);
    let mut count = 0;
    for (k, &p) in reduced.iter().enumerate() {
        let wraps_to_first = k > 0 && (PI - p + reduced[0]) < 1e-9;
        if (k == 0 || p - reduced[k - 1] > 1e-9) && !wraps_to_first {
            count += 1;
        }
    }
    count
}

pub fn simulate_records(psi: &BiphotonWaveFunction, sim: &RecordSimulation) -> Result<Vec<InterferenceRecord>> {
    if distinct_phases_mod_pi(&sim.phases_rad) < 3 {
        return Err(Error::Conditioning("need at least three phases distinct mod pi".into()));
    }
    if !(sim.exposure >= 0.0) {
        return Err(Error::config("records.exposure", "must be non-negative"));
    }
    sim.phases_rad
        .iter()
        .enumerate()
        .map(|(k, &phase)| {
            let reference = CoherentRef {
                amplitude: Complex64::new(sim.amplitude, 0.0),
                phase_rad: phase,
            };
            let mut rng = ChaCha8Rng::seed_from_u64(sim.seed);
            rng.set_stream(k as u64);
            let counts = (0..psi.psi.len())
                .map(|i| {
                    let mean = sim.exposure * coincidence_rate(psi, &reference, i, sim.floor_rate);
                    if !sim.noise || mean == 0.0 {
                        return Ok(mean);
                    }
                    Poisson::new(mean)
                        .map(|p| p.sample(&mut rng))
                        .map_err(|e| Error::Numeric(e.to_string()))
                })
                .collect::<Result<_>>()?;
            Ok(InterferenceRecord {
                phase_rad: phase,
                step_s: psi.step_s,
                counts,
                exposure: sim.exposure,
                floor_rate: sim.floor_rate,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reconstruction {
    pub psi: BiphotonWaveFunction,
    /// One-sigma uncertainty of arg ψ (rad).
    pub phase_sigma_rad: Vec<f64>,
    /// `|ψ|²` from the phase-independent part of the rates, clipped at zero.
    pub intensity_from_mean: Vec<f64>,
    /// Delays where the phase-independent estimate went negative.
    pub clipped: usize,
}

impl Reconstruction {
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let err = |e: csv::Error| Error::Numeric(format!("csv write: {e}"));
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["tau_s", "psi_abs_sq", "arg_psi_rad", "sigma_phase_rad"])
            .map_err(err)?;
        for (i, tau) in self.psi.delays().enumerate() {
            let p = self.psi.psi[i];
            w.write_record([
                format!("{tau:e}"),
                format!("{:e}", p.norm_sqr()),
                format!("{:e}", p.arg()),
                format!("{:e}", self.phase_sigma_rad[i]),
            ])
            .map_err(err)?;
        }
        w.flush().map_err(|e| Error::Numeric(format!("csv write: {e}")))
    }
}

const REWEIGHT_PASSES: usize = 3;

/// Per-delay weighted least-squares inversion of
/// `R_φ = |ψ|² + β² + 2β(x cos2φ + y sin2φ)` with `β = |α|²/2`; arg ψ is
/// reported relative to the reference plus `phase_offset_rad`.
pub fn reconstruct_wavefunction(
    records: &[InterferenceRecord],
    amplitude: f64,
    phase_offset_rad: f64,
) -> Result<Reconstruction> {
    if !(amplitude > 0.0) {
        return Err(Error::config(
            "records.amplitude",
            "reference amplitude must be positive",
        ));
    }
    let phases: Vec<f64> = records.iter().map(|r| r.phase_rad).collect();
    if distinct_phases_mod_pi(&phases) < 3 {
        return Err(Error::Conditioning("need at least three phases distinct mod pi".into()));
    }
    let len = records[0].counts.len();
    if len.is_multiple_of(2)
        || records
            .iter()
            .any(|r| r.counts.len() != len || r.step_s != records[0].step_s)
    {
        return Err(Error::Contract("records must share one odd-length delay grid".into()));
    }
    if records.iter().any(|r| !(r.exposure > 0.0)) {
        return Err(Error::Contract("records need positive exposure".into()));
    }
    let beta = amplitude * amplitude / 2.0;
    let rows: Vec<Vector3<f64>> = phases
        .iter()
        .map(|p| Vector3::new(1.0, (2.0 * p).cos(), (2.0 * p).sin()))
        .collect();
    let gram: Matrix3<f64> = rows.iter().map(|r| r * r.transpose()).sum();
    let eig = gram.symmetric_eigenvalues();
    if eig.min() < 1e-8 * eig.max() {
        return Err(Error::Conditioning(
            "phase settings leave the cosine fit singular".into(),
        ));
    }

    let per_delay: Vec<(Complex64, f64, f64)> = (0..len)
        .into_par_iter()
        .map(|i| {
            // observed counts seed the weights; later passes use the fitted rates
            let mut expected: Vec<f64> = records.iter().map(|r| r.counts[i]).collect();
            let mut solution = None;
            for _ in 0..REWEIGHT_PASSES {
                let mut normal = Matrix3::zeros();
                let mut rhs = Vector3::zeros();
                for ((r, row), n) in records.iter().zip(&rows).zip(&expected) {
                    let rate = r.counts[i] / r.exposure - r.floor_rate;
                    let variance = n.max(1.0) / (r.exposure * r.exposure);
                    normal += row * row.transpose() / variance;
                    rhs += row * (rate / variance);
                }
                let cov = normal
                    .try_inverse()
                    .ok_or_else(|| Error::Conditioning("singular normal matrix".into()))?;
                let c = cov * rhs;
                for ((r, row), n) in records.iter().zip(&rows).zip(expected.iter_mut()) {
                    *n = (row.dot(&c) + r.floor_rate) * r.exposure;
                }
                solution = Some((cov, c));
            }
            let (cov, c) = solution.expect("at least one pass");
            let (x, y) = (c[1] / (2.0 * beta), c[2] / (2.0 * beta));
            let psi = Complex64::new(x, y) * Complex64::from_polar(1.0, phase_offset_rad);
            let (sxx, syy, sxy) = (
                cov[(1, 1)] / (4.0 * beta * beta),
                cov[(2, 2)] / (4.0 * beta * beta),
                cov[(1, 2)] / (4.0 * beta * beta),
            );
            let r2 = x * x + y * y;
            let sigma = if r2 > 0.0 {
                ((y * y * sxx + x * x * syy - 2.0 * x * y * sxy).max(0.0)).sqrt() / r2
            } else {
                PI
            };
            Ok((psi, sigma, c[0] - beta * beta))
        })
        .collect::<Result<_>>()?;

    let clipped = per_delay.iter().filter(|d| d.2 < 0.0).count();
    Ok(Reconstruction {
        psi: BiphotonWaveFunction {
            step_s: records[0].step_s,
            psi: per_delay.iter().map(|d| d.0).collect(),
            bandwidth_hz: None,
        },
        phase_sigma_rad: per_delay.iter().map(|d| d.1).collect(),
        intensity_from_mean: per_delay.iter().map(|d| d.2.max(0.0)).collect(),
        clipped,
    })
}

/// Exposure for which the coherent-only term alone gives `counts` per bin
/// at amplitude `amplitude`.
pub fn exposure_for_floor_counts(amplitude: f64, counts: f64) -> f64 {
    counts / (amplitude.powi(4) / 4.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn psi() -> BiphotonWaveFunction {
        ideal_opo_psi(8.1e6, 0.7, 1e-9, 100).unwrap()
    }

    fn phases(n: usize) -> Vec<f64> {
        (0..n).map(|k| k as f64 * PI / n as f64).collect()
    }

    // matched contrast: reference pair amplitude equals |ψ(0)|
    fn matched_amplitude(p: &BiphotonWaveFunction) -> f64 {
        (2.0 * p.centre().norm()).sqrt()
    }

    #[test]
    fn ideal_shape() {
        let p = psi();
        let n = p.half_len();
        for k in 1..=n {
            assert_eq!(p.psi[n + k].norm(), p.psi[n - k].norm());
            assert!((p.psi[n + k].arg() - 0.7).abs() < 1e-15);
        }
        let fwhm = ideal_intensity_fwhm_s(8.1e6);
        assert!((fwhm - 27.2e-9).abs() < 0.1e-9);
        let at_half = (-PI * 8.1e6 * fwhm / 2.0).exp().powi(2);
        assert!((at_half - 0.5).abs() < 1e-12);
    }

    #[test]
    fn limiting_rates() {
        let zero = BiphotonWaveFunction {
            psi: vec![Complex64::new(0.0, 0.0); 5],
            ..psi()
        };
        let r = CoherentRef {
            amplitude: Complex64::new(0.8, 0.0),
            phase_rad: 0.3,
        };
        for i in 0..5 {
            assert!((coincidence_rate(&zero, &r, i, 0.0) - 0.8f64.powi(4) / 4.0).abs() < 1e-15);
        }
        let p = psi();
        let dark = CoherentRef {
            amplitude: Complex64::new(0.0, 0.0),
            phase_rad: 1.0,
        };
        for i in 0..p.psi.len() {
            assert_eq!(coincidence_rate(&p, &dark, i, 0.0), p.psi[i].norm_sqr());
        }
    }

    #[test]
    fn destructive_setting_dips_below_coherent_floor() {
        let p = psi();
        let a = matched_amplitude(&p) * 0.9;
        let floor = a.powi(4) / 4.0;
        let n = p.half_len();
        // arg ψ = 0.7, so 2φ = 0.7 + π cancels
        let destructive = CoherentRef {
            amplitude: Complex64::new(a, 0.0),
            phase_rad: (0.7 + PI) / 2.0,
        };
        let constructive = CoherentRef {
            phase_rad: 0.35,
            ..destructive
        };
        assert!(coincidence_rate(&p, &destructive, n, 0.0) < floor);
        assert!(coincidence_rate(&p, &constructive, n, 0.0) > floor);
    }

    #[test]
    fn zero_exposure_gives_empty_records() {
        let sim = RecordSimulation {
            amplitude: 0.5,
            phases_rad: phases(4),
            exposure: 0.0,
            floor_rate: 0.0,
            noise: true,
            seed: 1,
        };
        let recs = simulate_records(&psi(), &sim).unwrap();
        assert!(recs.iter().all(|r| r.counts.iter().all(|&c| c == 0.0)));
    }

    #[test]
    fn degenerate_phases_rejected() {
        let p = psi();
        let sim = RecordSimulation {
            amplitude: 0.5,
            phases_rad: vec![0.0, PI, 0.5, 0.5 + PI],
            exposure: 1.0,
            floor_rate: 0.0,
            noise: false,
            seed: 0,
        };
        assert!(matches!(simulate_records(&p, &sim), Err(Error::Conditioning(_))));
    }

    #[test]
    fn noise_free_round_trip_is_exact() {
        let p = psi();
        let sim = RecordSimulation {
            amplitude: matched_amplitude(&p),
            phases_rad: phases(4),
            exposure: 1e3,
            floor_rate: 0.02,
            noise: false,
            seed: 0,
        };
        let recs = simulate_records(&p, &sim).unwrap();
        assert_eq!(recs, simulate_records(&p, &sim).unwrap());
        let rec = reconstruct_wavefunction(&recs, sim.amplitude, 0.0).unwrap();
        for (a, b) in rec.psi.psi.iter().zip(&p.psi) {
            assert!((a - b).norm() <= 1e-10 * b.norm());
        }
        assert_eq!(rec.clipped, 0);
        for (m, b) in rec.intensity_from_mean.iter().zip(&p.psi) {
            assert!((m - b.norm_sqr()).abs() < 1e-9 * p.centre().norm_sqr());
        }
    }

    #[test]
    fn noisy_phase_uncertainty_near_six_degrees() {
        let p = psi();
        let amplitude = matched_amplitude(&p);
        let sim = RecordSimulation {
            amplitude,
            phases_rad: phases(4),
            exposure: exposure_for_floor_counts(amplitude, 25.0),
            floor_rate: 0.0,
            noise: true,
            seed: 8,
        };
        let rec = reconstruct_wavefunction(&simulate_records(&p, &sim).unwrap(), amplitude, 0.0).unwrap();
        let n = p.half_len();
        let centre_deg = rec.phase_sigma_rad[n].to_degrees();
        assert!((4.0..9.0).contains(&centre_deg), "{centre_deg}");
        assert!(rec.phase_sigma_rad[n + 60] > 2.0 * rec.phase_sigma_rad[n]);
    }

    #[test]
    fn linear_phase_ramp_recovered() {
        let mut p = psi();
        let slope = 0.01; // rad per bin
        let n = p.half_len() as f64;
        for (i, v) in p.psi.iter_mut().enumerate() {
            *v *= Complex64::from_polar(1.0, slope * (i as f64 - n));
        }
        let amplitude = matched_amplitude(&p);
        let sim = RecordSimulation {
            amplitude,
            phases_rad: phases(6),
            exposure: exposure_for_floor_counts(amplitude, 400.0),
            floor_rate: 0.0,
            noise: true,
            seed: 4,
        };
        let rec = reconstruct_wavefunction(&simulate_records(&p, &sim).unwrap(), amplitude, 0.0).unwrap();
        // weighted straight-line fit of the phase within ±30 bins
        let (mut sw, mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for i in (n as usize - 30)..=(n as usize + 30) {
            let w = rec.phase_sigma_rad[i].powi(-2);
            let x = i as f64 - n;
            let y = rec.psi.psi[i].arg();
            sw += w;
            sx += w * x;
            sy += w * y;
            sxx += w * x * x;
            sxy += w * x * y;
        }
        let det = sw * sxx - sx * sx;
        let fitted = (sw * sxy - sx * sy) / det;
        let sigma = (sw / det).sqrt();
        assert!((fitted - slope).abs() < 3.0 * sigma, "{fitted} vs {slope} +- {sigma}");
    }

    proptest! {
        #[test]
        fn rate_has_period_pi_and_fixed_contrast(
            re in -2.0..2.0f64, im in -2.0..2.0f64, a in 0.0..2.0f64, phi in -6.0..6.0f64,
        ) {
            let p = BiphotonWaveFunction { step_s: 1e-9, psi: vec![Complex64::new(re, im)], bandwidth_hz: None };
            let r = CoherentRef { amplitude: Complex64::new(a, 0.0), phase_rad: phi };
            let shifted = CoherentRef { phase_rad: phi + PI, ..r };
            let base = coincidence_rate(&p, &r, 0, 0.0);
            prop_assert!(base >= 0.0);
            prop_assert!((base - coincidence_rate(&p, &shifted, 0, 0.0)).abs() <= 1e-12 * base.max(1.0));
            // extrema where the reference is in phase / in quadrature-squared with ψ
            let at = |phase: f64| coincidence_rate(&p, &CoherentRef { phase_rad: phase, ..r }, 0, 0.0);
            let best = p.psi[0].arg() / 2.0;
            let (hi, lo) = (at(best), at(best + PI / 2.0));
            prop_assert!(hi >= base - 1e-12 && base >= lo - 1e-12);
            let expected = 2.0 * p.psi[0].norm() * a * a;
            prop_assert!((hi - lo - expected).abs() <= 1e-9);
        }
    }
}
