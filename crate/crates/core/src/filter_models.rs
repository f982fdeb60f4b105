//! Filter spectra built from vapor cells and polarizers, and their figures of merit.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::atomic_structure::AtomData;
use crate::error::{Error, Result};
use crate::grid::FrequencyGrid;
use crate::vapor_optics::{cell_transfer, CellTransfer, Jones, VaporCellConfig, VaporModel};

/// Slices used when integrating a drooping field profile.
pub const DEFAULT_SLICES: usize = 16;

/// Measured intensity leakage of the polarizers in the dual-channel filter.
pub const DEFAULT_EXTINCTION: f64 = 1.8e-6;

/// Input polarizer along H, analyzer at `angle_rad` from it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolarizerPair {
    pub extinction: f64,
    pub angle_rad: f64,
}

impl PolarizerPair {
    pub fn crossed(extinction: f64) -> Self {
        Self {
            extinction,
            angle_rad: std::f64::consts::FRAC_PI_2,
        }
    }

    pub fn parallel(extinction: f64) -> Self {
        Self {
            extinction,
            angle_rad: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..0.1).contains(&self.extinction) {
            return Err(Error::config("polarizers.extinction", "must lie in [0, 0.1)"));
        }
        if !self.angle_rad.is_finite() {
            return Err(Error::config("polarizers.angle_rad", "must be finite"));
        }
        Ok(())
    }

    /// Power through the analyzer for H input, with leakage of the blocked
    /// component added incoherently.
    pub fn transmit(&self, jones: &Jones) -> f64 {
        let out = jones * nalgebra::Vector2::new(Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0));
        let (c, s) = (self.angle_rad.cos(), self.angle_rad.sin());
        let pass = (out[0] * c + out[1] * s).norm_sqr();
        let blocked = (out[1] * c - out[0] * s).norm_sqr();
        (pass + self.extinction * blocked).clamp(0.0, 1.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterSpectrum {
    pub grid: FrequencyGrid,
    pub transmission: Vec<f64>,
    #[serde(skip)]
    pub transfer: Option<CellTransfer>,
}

impl FilterSpectrum {
    pub fn flat(grid: &FrequencyGrid, value: f64) -> Self {
        Self {
            grid: grid.clone(),
            transmission: vec![value; grid.len()],
            transfer: None,
        }
    }

    /// Transmission at a detuning, linearly interpolated.
    pub fn at(&self, detuning_hz: f64) -> Result<f64> {
        self.grid.interpolate(&self.transmission, detuning_hz)
    }

    pub fn peak_index(&self) -> usize {
        self.transmission
            .iter()
            .enumerate()
            .fold(0, |best, (i, &t)| if t > self.transmission[best] { i } else { best })
    }

    pub fn peak_detuning(&self) -> f64 {
        self.grid.detuning(self.peak_index())
    }

    /// Columns `detuning_hz, transmission`.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let err = |e: csv::Error| Error::Numeric(format!("csv write: {e}"));
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["detuning_hz", "transmission"]).map_err(err)?;
        for (x, t) in self.grid.detunings().zip(&self.transmission) {
            w.write_record([format!("{x:e}"), format!("{t:e}")]).map_err(err)?;
        }
        w.flush().map_err(|e| Error::Numeric(format!("csv write: {e}")))
    }
}

/// Polarizer-sandwiched transmission of an already propagated cell.
pub fn filter_from_transfer(transfer: CellTransfer, pol: &PolarizerPair) -> Result<FilterSpectrum> {
    pol.validate()?;
    let transmission = (0..transfer.len())
        .map(|i| pol.transmit(&transfer.jones_linear(i)))
        .collect();
    Ok(FilterSpectrum {
        grid: transfer.grid.clone(),
        transmission,
        transfer: Some(transfer),
    })
}

/// Faraday filter: `cell` in an axial field `field_t` (cell droop applies)
/// between the polarizers.
pub fn fadof_spectrum(
    atoms: &AtomData,
    cell: &VaporCellConfig,
    field_t: f64,
    pol: &PolarizerPair,
    grid: &FrequencyGrid,
) -> Result<FilterSpectrum> {
    let cell = cell.clone().with_field(cell.field.with_center(field_t));
    let model = VaporModel::new(atoms.clone(), cell.clone(), grid.clone())?;
    let transfer = cell_transfer(&model, &cell, DEFAULT_SLICES)?;
    filter_from_transfer(transfer, pol)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterMetrics {
    pub peak_transmission: f64,
    pub peak_detuning_hz: f64,
    pub fwhm_hz: f64,
    pub enbw_hz: f64,
    /// Estimated share of the transmission integral lying beyond the grid.
    pub tail_fraction: f64,
    /// `None` when no grid point lies outside the passband window.
    pub rejection_db: Option<f64>,
}

/// Area beyond one grid edge, extrapolating a power-law decay (in distance
/// from the peak) fitted between the edge and a point a tenth of the span in.
fn tail_estimate(s: &FilterSpectrum, peak_at: f64, edge: usize) -> f64 {
    let n = s.transmission.len();
    let step_in = (n / 10).max(1);
    let inner = if edge == 0 { step_in } else { edge - step_in };
    let (t_edge, t_inner) = (s.transmission[edge], s.transmission[inner]);
    let d_edge = (s.grid.detuning(edge) - peak_at).abs();
    let d_inner = (s.grid.detuning(inner) - peak_at).abs();
    if t_edge <= 0.0 {
        return 0.0;
    }
    if t_inner <= t_edge || d_edge <= d_inner {
        return f64::INFINITY;
    }
    let power = (t_inner / t_edge).ln() / (d_edge / d_inner).ln();
    if power <= 1.0 {
        f64::INFINITY
    } else {
        t_edge * d_edge / (power - 1.0)
    }
}

/// Peak, FWHM of the tallest peak, equivalent noise bandwidth and
/// out-of-window rejection. `window` is a detuning range in Hz.
pub fn filter_metrics(s: &FilterSpectrum, window: (f64, f64)) -> Result<FilterMetrics> {
    let t = &s.transmission;
    let n = t.len();
    if n < 3 {
        return Err(Error::Coverage("spectrum has fewer than three points".into()));
    }
    let peak = s.peak_index();
    let t_max = t[peak];
    if !(t_max > 0.0) {
        return Err(Error::Numeric("spectrum has no transmission".into()));
    }
    let half = t_max / 2.0;
    let crossing = |inside: usize, outside: usize| -> f64 {
        let (a, b) = (t[inside], t[outside]);
        let frac = (a - half) / (a - b);
        let (xa, xb) = (s.grid.detuning(inside), s.grid.detuning(outside));
        xa + frac * (xb - xa)
    };
    let mut left = peak;
    while t[left] >= half {
        if left == 0 {
            return Err(Error::Coverage("tallest peak truncated by lower grid edge".into()));
        }
        left -= 1;
    }
    let mut right = peak;
    while t[right] >= half {
        if right == n - 1 {
            return Err(Error::Coverage("tallest peak truncated by upper grid edge".into()));
        }
        right += 1;
    }
    let fwhm = crossing(right - 1, right) - crossing(left + 1, left);

    let h = s.grid.step_hz;
    let integral: f64 = t.windows(2).map(|w| 0.5 * (w[0] + w[1]) * h).sum();
    let peak_at = s.grid.detuning(peak);
    let tail = tail_estimate(s, peak_at, 0) + tail_estimate(s, peak_at, n - 1);
    let outside = s
        .grid
        .detunings()
        .zip(t)
        .filter(|(x, _)| *x < window.0 || *x > window.1)
        .map(|(_, &v)| v)
        .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.max(v))));
    let rejection_db = outside.map(|worst| -10.0 * worst.max(f64::MIN_POSITIVE).log10());

    Ok(FilterMetrics {
        peak_transmission: t_max,
        peak_detuning_hz: peak_at,
        fwhm_hz: fwhm,
        enbw_hz: integral / t_max,
        tail_fraction: tail / integral,
        rejection_db,
    })
}

/// Default peak-transmission ceiling of the induced-dichroism filter.
pub const DICHROIC_PEAK_CAP: f64 = 0.25;

/// Phenomenological induced-dichroism passband: Lorentzian of the given FWHM
/// on a floor `rejection_db` below the peak. `None` means no floor.
pub fn dichroic_filter(
    grid: &FrequencyGrid,
    center_hz: f64,
    fwhm_hz: f64,
    peak: f64,
    rejection_db: Option<f64>,
) -> Result<FilterSpectrum> {
    if !(fwhm_hz > 0.0) {
        return Err(Error::config("dichroic.fwhm_hz", "must be positive"));
    }
    if !(peak > 0.0 && peak <= DICHROIC_PEAK_CAP) {
        return Err(Error::config(
            "dichroic.peak_transmission",
            format!("must lie in (0, {DICHROIC_PEAK_CAP}]"),
        ));
    }
    let floor = rejection_db.map_or(0.0, |db| peak * 10f64.powf(-db / 10.0));
    let half = fwhm_hz / 2.0;
    let transmission = grid
        .detunings()
        .map(|x| {
            let d = (x - center_hz) / half;
            (peak / (1.0 + d * d)).max(floor)
        })
        .collect();
    Ok(FilterSpectrum {
        grid: grid.clone(),
        transmission,
        transfer: None,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FilterMode {
    On,
    Off,
}

/// Two-path filter whose paths share one cell; with the field off and the
/// half-wave plate swapped the polarizers pass everything.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualChannelFilter {
    pub mode: FilterMode,
    pub field_t: f64,
    pub cell: VaporCellConfig,
    pub extinction: f64,
}

pub fn dual_channel_mode(atoms: &AtomData, on: bool) -> DualChannelFilter {
    DualChannelFilter {
        mode: if on { FilterMode::On } else { FilterMode::Off },
        field_t: if on { 4.5e-3 } else { 0.0 },
        cell: VaporCellConfig::natural(atoms, 0.10, 365.0),
        extinction: DEFAULT_EXTINCTION,
    }
}

impl DualChannelFilter {
    /// Transmission of the H and V input channels.
    pub fn channel_spectra(&self, atoms: &AtomData, grid: &FrequencyGrid) -> Result<[FilterSpectrum; 2]> {
        match self.mode {
            FilterMode::Off => {
                let flat = FilterSpectrum::flat(grid, 1.0 - self.extinction);
                Ok([flat.clone(), flat])
            }
            FilterMode::On => {
                let s = fadof_spectrum(
                    atoms,
                    &self.cell,
                    self.field_t,
                    &PolarizerPair::crossed(self.extinction),
                    grid,
                )?;
                // the second path sees the same cell with H and V relabeled
                Ok([s.clone(), s])
            }
        }
    }
}
