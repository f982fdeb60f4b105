use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{Matrix2, Matrix4};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::state::{c, TwoPhotonPolState};
use crate::error::{Error, Result};
use crate::vapor_optics::{CellTransfer, Jones};

/// Single-photon element acting identically on both photons of a pair.
#[derive(Debug, Clone)]
pub enum OpticalElement {
    HalfWave {
        axis_rad: f64,
    },
    QuarterWave {
        axis_rad: f64,
    },
    /// Magnetized vapor cell, evaluated at the probe detuning.
    FaradayCell(Arc<CellTransfer>),
    /// Linear polarizer with intensity leakage `extinction` on the blocked axis.
    Polarizer {
        axis_rad: f64,
        extinction: f64,
    },
    /// Any fixed Jones matrix.
    Fixed(Jones),
}

fn rotation(angle: f64) -> Jones {
    let (s, co) = angle.sin_cos();
    Matrix2::new(c(co, 0.0), c(-s, 0.0), c(s, 0.0), c(co, 0.0))
}

/// Linear retarder with fast axis at `axis_rad`, phase `retardance` on the slow axis.
pub fn retarder(axis_rad: f64, retardance: f64) -> Jones {
    let r = rotation(axis_rad);
    let d = Matrix2::new(
        c(1.0, 0.0),
        c(0.0, 0.0),
        c(0.0, 0.0),
        Complex64::from_polar(1.0, retardance),
    );
    r * d * r.transpose()
}

/// Rotation of the linear polarization by `angle`, the lossless Faraday channel.
pub fn rotator(angle: f64) -> Jones {
    rotation(angle)
}

impl OpticalElement {
    pub fn jones(&self, detuning_hz: f64) -> Result<Jones> {
        Ok(match self {
            Self::HalfWave { axis_rad } => retarder(*axis_rad, PI),
            Self::QuarterWave { axis_rad } => retarder(*axis_rad, PI / 2.0),
            Self::FaradayCell(transfer) => transfer.jones_linear_at(detuning_hz)?,
            Self::Polarizer { axis_rad, extinction } => {
                if !(0.0..=1.0).contains(extinction) {
                    return Err(Error::Domain {
                        quantity: "polarizer extinction",
                        value: *extinction,
                        reason: "must lie in [0, 1]".into(),
                    });
                }
                let r = rotation(*axis_rad);
                let d = Matrix2::new(c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(extinction.sqrt(), 0.0));
                r * d * r.transpose()
            }
            Self::Fixed(j) => *j,
        })
    }
}

/// `(J⊗J) ρ (J⊗J)†`.
pub fn apply_jones(rho: &TwoPhotonPolState, j: &Jones) -> TwoPhotonPolState {
    let jj: Matrix4<Complex64> = j.kronecker(j);
    TwoPhotonPolState::new_unchecked(jj * rho.matrix() * jj.adjoint())
}

pub fn apply_element(rho: &TwoPhotonPolState, element: &OpticalElement, detuning_hz: f64) -> Result<TwoPhotonPolState> {
    rho.validate()?;
    let j = element.jones(detuning_hz)?;
    let jj: Matrix4<Complex64> = j.kronecker(&j);
    let norm = jj.adjoint() * jj;
    let gain = (norm - Matrix4::identity()).symmetric_eigenvalues().max();
    if gain > 1e-12 {
        return Err(Error::Contract("element amplifies light".into()));
    }
    Ok(apply_jones(rho, &j))
}

/// `tr ρ′ / tr ρ` after an element.
pub fn transmitted_fraction(before: &TwoPhotonPolState, after: &TwoPhotonPolState) -> f64 {
    let t = before.trace();
    if t > 0.0 {
        after.trace() / t
    } else {
        0.0
    }
}

/// Analyzer before the polarizing beam splitter: optional QWP, then HWP.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Analyzer {
    #[serde(default)]
    pub qwp_axis_rad: Option<f64>,
    #[serde(default)]
    pub hwp_axis_rad: f64,
}

impl Analyzer {
    pub fn hwp(axis_rad: f64) -> Self {
        Self {
            qwp_axis_rad: None,
            hwp_axis_rad: axis_rad,
        }
    }

    pub fn jones(&self) -> Jones {
        let h = retarder(self.hwp_axis_rad, PI);
        match self.qwp_axis_rad {
            Some(q) => h * retarder(q, PI / 2.0),
            None => h,
        }
    }
}

/// Detection probabilities per pair behind the beam splitter.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MeasurementRates {
    /// Mean number of H (V) detections per pair.
    pub singles_h: f64,
    pub singles_v: f64,
    pub coincidence_hh: f64,
    /// Both orderings.
    pub coincidence_hv: f64,
    pub coincidence_vv: f64,
}

pub fn measurement_rates(rho: &TwoPhotonPolState, analyzer: &Analyzer) -> MeasurementRates {
    let r = apply_jones(rho, &analyzer.jones());
    let p = |i: usize| r.matrix()[(i, i)].re.max(0.0);
    MeasurementRates {
        singles_h: 2.0 * p(0) + p(1) + p(2),
        singles_v: p(1) + p(2) + 2.0 * p(3),
        coincidence_hh: p(0),
        coincidence_hv: p(1) + p(2),
        coincidence_vv: p(3),
    }
}

/// `(max - min)/(max + min)` of a sampled curve.
pub fn visibility(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    if max + min > 0.0 {
        (max - min) / (max + min)
    } else {
        0.0
    }
}

/// Period of the strongest harmonic of a curve sampled uniformly over one
/// full turn of `span_rad`.
pub fn dominant_period(values: &[f64], span_rad: f64) -> Result<f64> {
    let n = values.len();
    if n < 8 {
        return Err(Error::Coverage("need at least 8 samples for a period estimate".into()));
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let (best, power) = (1..n / 2)
        .map(|k| {
            let amp: Complex64 = values
                .iter()
                .enumerate()
                .map(|(i, v)| Complex64::from_polar(v - mean, -2.0 * PI * (k * i) as f64 / n as f64))
                .sum();
            (k, amp.norm())
        })
        .fold((0, 0.0), |acc, x| if x.1 > acc.1 { x } else { acc });
    if best == 0 || power == 0.0 {
        return Err(Error::Numeric("curve has no oscillating component".into()));
    }
    Ok(span_rad / best as f64)
}

/// Oscillations completed by a sampled curve: total variation of
/// `arccos` of the curve rescaled to `[-1, 1]`, divided by `2π`.
pub fn oscillation_count(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    if !(max - min > 1e-9 * max.abs().max(min.abs())) {
        return 0.0;
    }
    let phase: Vec<f64> = values
        .iter()
        .map(|v| (2.0 * (v - min) / (max - min) - 1.0).clamp(-1.0, 1.0).acos())
        .collect();
    phase.windows(2).map(|w| (w[1] - w[0]).abs()).sum::<f64>() / (2.0 * PI)
}
