use std::f64::consts::{LN_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::gauss_legendre;

/// Field decay rates of the two cavity loss channels (s^-1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct G2Envelope {
    pub output_coupling_rate: f64,
    pub loss_rate: f64,
}

impl G2Envelope {
    /// Envelope of a cavity with mode FWHM `linewidth_hz`, split by `escape` (γ₁ share).
    pub fn from_linewidth(linewidth_hz: f64, escape: f64) -> Self {
        let total = 2.0 * PI * linewidth_hz;
        Self {
            output_coupling_rate: escape * total,
            loss_rate: (1.0 - escape) * total,
        }
    }

    pub fn decay_rate(&self) -> f64 {
        self.output_coupling_rate + self.loss_rate
    }

    pub fn fwhm_s(&self) -> f64 {
        2.0 * LN_2 / self.decay_rate()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.output_coupling_rate >= 0.0 && self.loss_rate >= 0.0) || !(self.decay_rate() > 0.0) {
            return Err(Error::config(
                "envelope",
                "decay rates must be non-negative with a positive sum",
            ));
        }
        if !self.decay_rate().is_finite() {
            return Err(Error::config("envelope", "decay rates must be finite"));
        }
        Ok(())
    }
}

/// Normalized single-mode correlation `exp(-|T| (γ₁+γ₂))`.
pub fn g2_single(delay_s: f64, env: &G2Envelope) -> f64 {
    (-delay_s.abs() * env.decay_rate()).exp()
}

/// Comb kernel `sin²(MπT/τ) / (M sin²(πT/τ))` for `M = 2N+1` modes.
pub fn comb_kernel(delay_s: f64, period_s: f64, modes_each_side: usize) -> f64 {
    let m = (2 * modes_each_side + 1) as f64;
    let x = PI * delay_s / period_s;
    let s = x.sin();
    if s.abs() < 1e-12 {
        return m;
    }
    (m * x).sin().powi(2) / (m * s * s)
}

/// Multimode correlation with the exact finite-comb kernel.
pub fn g2_multi_exact(delay_s: f64, env: &G2Envelope, period_s: f64, modes_each_side: usize) -> f64 {
    g2_single(delay_s, env) * comb_kernel(delay_s, period_s, modes_each_side)
}

/// One tooth of the delta-comb approximation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CombTooth {
    pub index: i64,
    pub delay_s: f64,
    pub weight: f64,
}

/// Relative weight below which comb teeth are dropped.
pub const TOOTH_CUTOFF: f64 = 1e-6;

/// Delta-comb teeth `G_single(nτ)` at delays `nτ`, kept while above [`TOOTH_CUTOFF`].
pub fn g2_multi_weights(env: &G2Envelope, period_s: f64) -> Result<Vec<CombTooth>> {
    env.validate()?;
    if !(period_s > 0.0) {
        return Err(Error::config("detection.comb_period_s", "must be positive"));
    }
    let reach = (-TOOTH_CUTOFF.ln() / (env.decay_rate() * period_s)).floor() as i64;
    Ok((-reach..=reach)
        .map(|n| {
            let delay_s = n as f64 * period_s;
            CombTooth {
                index: n,
                delay_s,
                weight: g2_single(delay_s, env),
            }
        })
        .collect())
}

/// Composite 5-point Gauss–Legendre integral of `f` over `[a, b]` in `pieces` parts.
pub(crate) fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, pieces: usize) -> f64 {
    let rule = gauss_legendre(5);
    let h = (b - a) / pieces as f64;
    (0..pieces)
        .map(|p| {
            let mid = a + (p as f64 + 0.5) * h;
            rule.iter().map(|&(x, w)| w * f(mid + x * h / 2.0)).sum::<f64>() * h / 2.0
        })
        .sum()
}
