//! Uniform optical-frequency grids expressed as detunings from a reference.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyGrid {
    /// Absolute optical frequency of zero detuning (Hz).
    pub reference_hz: f64,
    pub start_hz: f64,
    pub step_hz: f64,
    pub len: usize,
}

impl FrequencyGrid {
    /// Grid from `start` to `stop` detuning (inclusive, rounded to whole steps).
    pub fn new(reference_hz: f64, start_hz: f64, stop_hz: f64, step_hz: f64) -> Result<Self> {
        if !(step_hz > 0.0) || !step_hz.is_finite() {
            return Err(Error::config(
                "grid.step_hz",
                format!("must be positive, got {step_hz}"),
            ));
        }
        if !(stop_hz >= start_hz) {
            return Err(Error::config("grid.stop_hz", "must not be below start"));
        }
        if !(reference_hz > 0.0) {
            return Err(Error::config("grid.reference_hz", "must be positive"));
        }
        let len = ((stop_hz - start_hz) / step_hz + 1e-9).floor() as usize + 1;
        Ok(Self {
            reference_hz,
            start_hz,
            step_hz,
            len,
        })
    }

    pub fn centered(reference_hz: f64, half_span_hz: f64, step_hz: f64) -> Result<Self> {
        Self::new(reference_hz, -half_span_hz, half_span_hz, step_hz)
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn detuning(&self, i: usize) -> f64 {
        self.start_hz + i as f64 * self.step_hz
    }

    pub fn frequency(&self, i: usize) -> f64 {
        self.reference_hz + self.detuning(i)
    }

    pub fn stop_hz(&self) -> f64 {
        self.detuning(self.len.saturating_sub(1))
    }

    pub fn detunings(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len).map(|i| self.detuning(i))
    }

    pub fn contains(&self, detuning_hz: f64) -> bool {
        detuning_hz >= self.start_hz && detuning_hz <= self.stop_hz()
    }

    /// Same span with the step divided by `factor`.
    pub fn refined(&self, factor: usize) -> Self {
        let factor = factor.max(1);
        Self {
            reference_hz: self.reference_hz,
            start_hz: self.start_hz,
            step_hz: self.step_hz / factor as f64,
            len: (self.len - 1) * factor + 1,
        }
    }

    /// Linear interpolation of `values` (sampled on this grid) at a detuning.
    pub fn interpolate(&self, values: &[f64], detuning_hz: f64) -> Result<f64> {
        debug_assert_eq!(values.len(), self.len);
        if !self.contains(detuning_hz) {
            return Err(Error::Coverage(format!(
                "detuning {detuning_hz:.6e} Hz outside grid [{:.6e}, {:.6e}]",
                self.start_hz,
                self.stop_hz()
            )));
        }
        if self.len == 1 {
            return Ok(values[0]);
        }
        let x = (detuning_hz - self.start_hz) / self.step_hz;
        let i = (x.floor() as usize).min(self.len - 2);
        let frac = x - i as f64;
        Ok(values[i] * (1.0 - frac) + values[i + 1] * frac)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_span_has_expected_points() {
        let g = FrequencyGrid::centered(377e12, 8e9, 1e6).unwrap();
        assert_eq!(g.len(), 16_001);
        assert_eq!(g.detuning(8000), 0.0);
        assert_eq!(g.stop_hz(), 8e9);
    }

    #[test]
    fn refinement_keeps_span() {
        let g = FrequencyGrid::centered(377e12, 1e9, 2e6).unwrap();
        let r = g.refined(2);
        assert_eq!(r.len(), 2 * g.len() - 1);
        assert_eq!(r.stop_hz(), g.stop_hz());
    }

    #[test]
    fn interpolation_and_coverage() {
        let g = FrequencyGrid::new(1.0, 0.0, 3.0, 1.0).unwrap();
        let v = [0.0, 10.0, 20.0, 30.0];
        assert_eq!(g.interpolate(&v, 1.5).unwrap(), 15.0);
        assert_eq!(g.interpolate(&v, 3.0).unwrap(), 30.0);
        assert!(matches!(g.interpolate(&v, 3.5), Err(Error::Coverage(_))));
    }
}
