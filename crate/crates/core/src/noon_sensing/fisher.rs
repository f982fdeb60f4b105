use std::f64::consts::PI;

use nalgebra::{Matrix2, Matrix4, Vector2};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::elements::Analyzer;
use super::sensing::{circular_amplitudes, jones_from_circular, SensingScanPoint};
use super::state::{c, TwoPhotonPolState};
use crate::error::{Error, Result};
use crate::vapor_optics::Jones;

/// Largest scan spacing accepted for field derivatives (T).
pub const MAX_FIELD_STEP_T: f64 = 0.5e-3;
/// Allowed disagreement between plain and Richardson-extrapolated FI.
pub const RICHARDSON_TOLERANCE: f64 = 0.05;

const MIN_PROBABILITY: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FisherOptions {
    pub analyzer: Analyzer,
    pub detection_efficiency: f64,
    /// Upper bound on the scan spacing; `None` skips the check.
    pub max_step: Option<f64>,
}

impl Default for FisherOptions {
    fn default() -> Self {
        Self {
            analyzer: Analyzer::default(),
            detection_efficiency: 1.0,
            max_step: Some(MAX_FIELD_STEP_T),
        }
    }
}

/// Fisher information about the scanned parameter at one scan point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FisherReport {
    pub parameter: f64,
    pub detection_efficiency: f64,
    pub probe_per_photon: f64,
    pub probe_per_scattered_photon: Option<f64>,
    /// Probe FI with the channel's loss held at its value at `parameter`.
    pub probe_frozen_loss_per_photon: f64,
    pub sql_per_photon: f64,
    pub sql_per_scattered_photon: Option<f64>,
    pub ratio: f64,
    pub ratio_per_scattered_photon: Option<f64>,
    /// Ratio recomputed with ideal detectors.
    pub ratio_ideal_detection: f64,
    /// Best product-state input (Bloch polar, azimuth) and analyzer basis.
    pub sql_state: [f64; 2],
    pub sql_analyzer: [f64; 2],
}

/// Five channel samples centred on the requested point.
struct Stencil {
    step: f64,
    jones: [Jones; 5],
}

fn stencil(scan: &[SensingScanPoint], at: f64, max_step: Option<f64>) -> Result<Stencil> {
    let i = scan
        .iter()
        .position(|p| (p.field_t - at).abs() <= 1e-9 * at.abs().max(1e-6))
        .ok_or_else(|| Error::Coverage(format!("no scan point at {at}")))?;
    if i < 2 || i + 2 >= scan.len() {
        return Err(Error::Coverage(format!(
            "scan point {at} needs two neighbours on each side for the derivative check"
        )));
    }
    let window = &scan[i - 2..=i + 2];
    let step = window[3].field_t - window[2].field_t;
    if !(step > 0.0)
        || window
            .windows(2)
            .any(|w| ((w[1].field_t - w[0].field_t) - step).abs() > 1e-6 * step)
    {
        return Err(Error::Contract(
            "scan must be uniformly spaced and increasing around the point".into(),
        ));
    }
    if let Some(limit) = max_step {
        if step > limit * (1.0 + 1e-9) {
            return Err(Error::config("scan.step", format!("spacing {step} exceeds {limit}")));
        }
    }
    Ok(Stencil {
        step,
        jones: std::array::from_fn(|k| window[k].jones_matrix()),
    })
}

impl Stencil {
    /// Centred and Richardson-extrapolated derivatives of the Jones matrix.
    fn derivatives(&self) -> (Jones, Jones) {
        let h = c(self.step, 0.0);
        let d1 = (self.jones[3] - self.jones[1]) / (h * 2.0);
        let d2 = (self.jones[4] - self.jones[0]) / (h * 4.0);
        (d1, (d1 * c(4.0, 0.0) - d2) / c(3.0, 0.0))
    }
}

type Povm = [Matrix2<Complex64>; 3];

/// `[H, V, lost]` POVM of one photon and its derivative.
fn povm_with_derivative(j: &Jones, dj: &Jones, analyzer: &Jones, efficiency: f64) -> (Povm, Povm) {
    let m = analyzer * j;
    let dm = analyzer * dj;
    let eta = c(efficiency, 0.0);
    let proj = |k: usize| {
        let (row, drow) = (m.row(k), dm.row(k));
        (
            row.adjoint() * row * eta,
            (drow.adjoint() * row + row.adjoint() * drow) * eta,
        )
    };
    let (h, dh) = proj(0);
    let (v, dv) = proj(1);
    ([h, v, Matrix2::identity() - h - v], [dh, dv, -dh - dv])
}

// outcome classes as (first photon, second photon) POVM indices
const PAIR_CLASSES: [&[(usize, usize)]; 6] = [
    &[(0, 0)],
    &[(0, 1), (1, 0)],
    &[(1, 1)],
    &[(0, 2), (2, 0)],
    &[(1, 2), (2, 1)],
    &[(2, 2)],
];

fn pair_fisher(rho: &TwoPhotonPolState, j: &Jones, dj: &Jones, analyzer: &Analyzer, efficiency: f64) -> f64 {
    let (e, de) = povm_with_derivative(j, dj, &analyzer.jones(), efficiency);
    let r = rho.matrix();
    let tr = |m: Matrix4<Complex64>| (m * r).trace().re;
    PAIR_CLASSES
        .iter()
        .map(|class| {
            let (p, dp) = class.iter().fold((0.0, 0.0), |(p, dp), &(a, b)| {
                (
                    p + tr(e[a].kronecker(&e[b])),
                    dp + tr(de[a].kronecker(&e[b]) + e[a].kronecker(&de[b])),
                )
            });
            if p > MIN_PROBABILITY {
                dp * dp / p
            } else {
                0.0
            }
        })
        .sum()
}

fn checked(plain: f64, extrapolated: f64, step: f64, what: &str) -> Result<f64> {
    let floor = 1e-12 / (step * step);
    if (extrapolated - plain).abs() > RICHARDSON_TOLERANCE * extrapolated.abs() + floor {
        return Err(Error::Numeric(format!(
            "{what}: finite-difference FI {plain:e} and Richardson estimate {extrapolated:e} disagree by more than {}%",
            RICHARDSON_TOLERANCE * 100.0
        )));
    }
    Ok(extrapolated)
}

fn two_photon_absorbed(rho: &TwoPhotonPolState, j: &Jones) -> f64 {
    let loss = Matrix2::identity() - j.adjoint() * j;
    let op: Matrix4<Complex64> = loss.kronecker(&Matrix2::identity()) + Matrix2::identity().kronecker(&loss);
    (op * rho.matrix()).trace().re.max(0.0)
}

fn bloch_vector(polar: f64, azimuth: f64) -> Vector2<Complex64> {
    Vector2::new(
        c((polar / 2.0).cos(), 0.0),
        Complex64::from_polar((polar / 2.0).sin(), azimuth),
    )
}

/// FI of one photon prepared in `input` and measured in the basis `{basis, basis⊥}`.
fn single_photon_fisher(
    j: &Jones,
    dj: &Jones,
    input: &Vector2<Complex64>,
    basis: &Vector2<Complex64>,
    efficiency: f64,
) -> f64 {
    let out = j * input;
    let dout = dj * input;
    let orth = Vector2::new(-basis[1].conj(), basis[0].conj());
    let mut fi = 0.0;
    for m in [basis, &orth] {
        let a = m.dotc(&out);
        let da = m.dotc(&dout);
        let p = efficiency * a.norm_sqr();
        let dp = 2.0 * efficiency * (a.conj() * da).re;
        if p > MIN_PROBABILITY {
            fi += dp * dp / p;
        }
    }
    let lost = 1.0 - efficiency * out.norm_squared();
    let dlost = -2.0 * efficiency * out.dotc(&dout).re;
    if lost > MIN_PROBABILITY {
        fi += dlost * dlost / lost;
    }
    fi
}

fn single_photon_absorbed(j: &Jones, input: &Vector2<Complex64>) -> f64 {
    (1.0 - (j * input).norm_squared()).max(0.0)
}

/// Grid search then compass refinement over input and analyzer Bloch angles.
fn maximize(objective: impl Fn(&[f64; 4]) -> f64) -> ([f64; 4], f64) {
    let polar: Vec<f64> = (0..=8).map(|k| PI * k as f64 / 8.0).collect();
    let azimuth: Vec<f64> = (0..12).map(|k| 2.0 * PI * k as f64 / 12.0).collect();
    let mut seeds: Vec<([f64; 4], f64)> = Vec::new();
    for &a in &polar {
        for &b in &azimuth {
            for &p in &polar {
                for &q in &azimuth {
                    let x = [a, b, p, q];
                    let v = objective(&x);
                    if v.is_finite() {
                        seeds.push((x, v));
                    }
                }
            }
        }
    }
    seeds.sort_by(|l, r| r.1.total_cmp(&l.1).then_with(|| l.0.partial_cmp(&r.0).unwrap()));
    seeds.truncate(6);
    let mut best = seeds.first().copied().unwrap_or(([0.0; 4], 0.0));
    for (mut x, mut v) in seeds {
        let mut delta = 0.2;
        while delta > 1e-7 {
            let mut improved = false;
            for dim in 0..4 {
                for sign in [1.0, -1.0] {
                    let mut trial = x;
                    trial[dim] += sign * delta;
                    let tv = objective(&trial);
                    if tv > v {
                        x = trial;
                        v = tv;
                        improved = true;
                    }
                }
            }
            if !improved {
                delta /= 2.0;
            }
        }
        if v > best.1 {
            best = (x, v);
        }
    }
    best
}

fn probe_fisher(s: &Stencil, rho: &TwoPhotonPolState, analyzer: &Analyzer, efficiency: f64, what: &str) -> Result<f64> {
    let (d1, rich) = s.derivatives();
    let j = &s.jones[2];
    checked(
        pair_fisher(rho, j, &d1, analyzer, efficiency),
        pair_fisher(rho, j, &rich, analyzer, efficiency),
        s.step,
        what,
    )
}

struct Sql {
    per_photon: f64,
    per_scattered: Option<f64>,
    state: [f64; 4],
}

fn standard_quantum_limit(s: &Stencil, efficiency: f64) -> Result<Sql> {
    let (d1, rich) = s.derivatives();
    let j = s.jones[2];
    let fi = |x: &[f64; 4], dj: &Jones| {
        single_photon_fisher(&j, dj, &bloch_vector(x[0], x[1]), &bloch_vector(x[2], x[3]), efficiency)
    };
    let (x, best) = maximize(|x| fi(x, &rich));
    let per_photon = checked(fi(&x, &d1), best, s.step, "standard quantum limit")?;

    let lossy = (Matrix2::identity() - j.adjoint() * j).norm() > 1e-12;
    let per_scattered = lossy.then(|| {
        maximize(|x| {
            let absorbed = single_photon_absorbed(&j, &bloch_vector(x[0], x[1]));
            if absorbed > 1e-15 {
                fi(x, &rich) / absorbed
            } else {
                f64::NAN
            }
        })
        .1
    });
    Ok(Sql {
        per_photon,
        per_scattered,
        state: x,
    })
}

/// Multinomial FI of the pair outcomes `{HH, HV, VV, H only, V only, none}`
/// with respect to the scan parameter at `at`, compared with the best
/// product-state probe through the same channel.
pub fn fisher_information(
    scan: &[SensingScanPoint],
    at: f64,
    rho: &TwoPhotonPolState,
    options: &FisherOptions,
) -> Result<FisherReport> {
    rho.validate()?;
    let eta = options.detection_efficiency;
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::config("fisher.detection_efficiency", "must lie in (0, 1]"));
    }
    let s = stencil(scan, at, options.max_step)?;
    let photons = 2.0 * rho.trace();
    if !(photons > 0.0) {
        return Err(Error::Domain {
            quantity: "probe trace",
            value: rho.trace(),
            reason: "probe state carries no photons".into(),
        });
    }

    let probe = probe_fisher(&s, rho, &options.analyzer, eta, "probe")?;
    for j in &s.jones {
        circular_amplitudes(j)?;
    }
    let centre = circular_amplitudes(&s.jones[2])?;
    let frozen = Stencil {
        step: s.step,
        jones: std::array::from_fn(|k| {
            let (tp, tm) = circular_amplitudes(&s.jones[k]).expect("checked above");
            jones_from_circular(
                Complex64::from_polar(centre.0.norm(), tp.arg()),
                Complex64::from_polar(centre.1.norm(), tm.arg()),
            )
        }),
    };
    let probe_frozen = probe_fisher(&frozen, rho, &options.analyzer, eta, "frozen-loss probe")?;
    let absorbed = two_photon_absorbed(rho, &s.jones[2]);

    let sql = standard_quantum_limit(&s, eta)?;
    let ratio_ideal_detection = if eta == 1.0 {
        probe / photons / sql.per_photon
    } else {
        let probe1 = probe_fisher(&s, rho, &options.analyzer, 1.0, "probe")?;
        probe1 / photons / standard_quantum_limit(&s, 1.0)?.per_photon
    };

    let per_photon = probe / photons;
    let per_scattered = (absorbed > 1e-15).then(|| probe / absorbed);
    Ok(FisherReport {
        parameter: at,
        detection_efficiency: eta,
        probe_per_photon: per_photon,
        probe_per_scattered_photon: per_scattered,
        probe_frozen_loss_per_photon: probe_frozen / photons,
        sql_per_photon: sql.per_photon,
        sql_per_scattered_photon: sql.per_scattered,
        ratio: per_photon / sql.per_photon,
        ratio_per_scattered_photon: per_scattered.zip(sql.per_scattered).map(|(a, b)| a / b),
        ratio_ideal_detection,
        sql_state: [sql.state[0], sql.state[1]],
        sql_analyzer: [sql.state[2], sql.state[3]],
    })
}

#[cfg(test)]
mod tests {
    use super::super::elements::rotator;
    use super::super::sensing::scan_with_jones;
    use super::super::state::make_noon_from_pair;
    use super::*;
    use approx::assert_abs_diff_eq;

    fn rotation_scan(centre: f64, step: f64, loss: impl Fn(f64) -> f64) -> Vec<SensingScanPoint> {
        let channel: Vec<(f64, Jones)> = (-3..=3)
            .map(|k| {
                let t = centre + k as f64 * step;
                (t, rotator(t) * c(loss(t), 0.0))
            })
            .collect();
        scan_with_jones(&make_noon_from_pair(), &channel, &Analyzer::default(), 1.0).unwrap()
    }

    fn no_limit() -> FisherOptions {
        FisherOptions {
            max_step: None,
            ..FisherOptions::default()
        }
    }

    #[test]
    fn lossless_noon_doubles_the_sql() {
        let scan = rotation_scan(0.3, 1e-4, |_| 1.0);
        let r = fisher_information(&scan, 0.3, &make_noon_from_pair(), &no_limit()).unwrap();
        // circular phase difference 2θ: N² = 4 per pair in that phase, 16 in θ
        assert_abs_diff_eq!(r.probe_per_photon * 2.0, 16.0, epsilon = 16.0 * 1e-4);
        assert_abs_diff_eq!(r.sql_per_photon, 4.0, epsilon = 4.0 * 1e-4);
        assert_abs_diff_eq!(r.ratio, 2.0, epsilon = 1e-3);
        assert!(r.probe_per_scattered_photon.is_none());
    }

    #[test]
    fn flat_channel_has_no_information() {
        let channel: Vec<(f64, Jones)> = (0..5).map(|k| (k as f64, rotator(0.2))).collect();
        let scan = scan_with_jones(&make_noon_from_pair(), &channel, &Analyzer::default(), 1.0).unwrap();
        let r = fisher_information(&scan, 2.0, &make_noon_from_pair(), &no_limit()).unwrap();
        assert_eq!(r.probe_per_photon, 0.0);
    }

    #[test]
    fn varying_loss_adds_information() {
        let scan = rotation_scan(0.3, 1e-4, |t| (0.9 - 0.5 * t).sqrt());
        let r = fisher_information(&scan, 0.3, &make_noon_from_pair(), &no_limit()).unwrap();
        assert!(r.probe_per_photon > r.probe_frozen_loss_per_photon);
        assert!(r.probe_per_scattered_photon.is_some());
    }

    #[test]
    fn coarse_scan_is_rejected() {
        let scan = rotation_scan(0.3, 1e-3, |_| 1.0);
        assert!(matches!(
            fisher_information(&scan, 0.3, &make_noon_from_pair(), &FisherOptions::default()),
            Err(Error::Config { .. })
        ));
    }

    #[test]
    fn rough_derivative_fails_the_richardson_check() {
        // step so large that the fourth-harmonic signal is badly sampled
        let scan = rotation_scan(0.3, 0.6, |_| 1.0);
        assert!(matches!(
            fisher_information(&scan, 0.3, &make_noon_from_pair(), &no_limit()),
            Err(Error::Numeric(_))
        ));
    }

    #[test]
    fn edge_point_lacks_neighbours() {
        let scan = rotation_scan(0.3, 1e-4, |_| 1.0);
        let first = scan[0].field_t;
        assert!(matches!(
            fisher_information(&scan, first, &make_noon_from_pair(), &no_limit()),
            Err(Error::Coverage(_))
        ));
    }
}
