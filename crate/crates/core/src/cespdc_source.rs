//! Cavity-enhanced down-conversion output as a comb of Lorentzian pair
//! modes, and what survives a spectral filter.

use std::f64::consts::{LN_2, PI};
use std::sync::OnceLock;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter_models::FilterSpectrum;
use crate::quadrature::gauss_legendre;

/// Relative envelope level below which the comb is considered covered.
pub const ENVELOPE_CUTOFF: f64 = 1e-4;

const MODE_AVERAGE_NODES: usize = 11;
const MODE_AVERAGE_HALF_SPAN: f64 = 3.0;
// sinc²(x) = 1/2
const SINC2_HALF_POINT: f64 = 1.391_557_377_3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvelopeShape {
    #[default]
    Gaussian,
    Sinc2,
}

impl EnvelopeShape {
    /// Relative weight at `offset_hz` from the center of an envelope of
    /// the given FWHM.
    pub fn weight(self, offset_hz: f64, fwhm_hz: f64) -> f64 {
        let r = offset_hz / fwhm_hz;
        match self {
            EnvelopeShape::Gaussian => (-4.0 * LN_2 * r * r).exp(),
            EnvelopeShape::Sinc2 => {
                let x = 2.0 * SINC2_HALF_POINT * r;
                if x.abs() < 1e-8 {
                    1.0
                } else {
                    (x.sin() / x).powi(2)
                }
            }
        }
    }

    /// Upper bound of the envelope beyond `offset_hz`.
    fn tail_bound(self, offset_hz: f64, fwhm_hz: f64) -> f64 {
        match self {
            EnvelopeShape::Gaussian => self.weight(offset_hz, fwhm_hz),
            EnvelopeShape::Sinc2 => {
                let x = 2.0 * SINC2_HALF_POINT * offset_hz / fwhm_hz;
                (1.0 / (x * x)).min(1.0)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CavityConfig {
    pub fsr_hz: f64,
    /// Frequency of the degenerate mode, half the pump frequency.
    pub degenerate_frequency_hz: f64,
    pub envelope_fwhm_hz: f64,
    #[serde(default)]
    pub envelope: EnvelopeShape,
    /// Modes kept on each side of the degenerate one.
    pub modes_each_side: usize,
    /// Output-coupler field decay rate (s^-1).
    pub output_coupling_rate: f64,
    /// Intracavity-loss field decay rate (s^-1).
    pub loss_rate: f64,
}

impl CavityConfig {
    fn preset(fsr_hz: f64, linewidth_hz: f64, degenerate_frequency_hz: f64) -> Self {
        let total = 2.0 * PI * linewidth_hz;
        let mut cfg = Self {
            fsr_hz,
            degenerate_frequency_hz,
            envelope_fwhm_hz: 150e9,
            envelope: EnvelopeShape::Gaussian,
            modes_each_side: 0,
            output_coupling_rate: 0.8 * total,
            loss_rate: 0.2 * total,
        };
        cfg.modes_each_side = cfg.modes_for_coverage();
        cfg
    }

    /// Single-polarization source: 501 MHz FSR, 8.4 MHz modes.
    pub fn type_i(degenerate_frequency_hz: f64) -> Self {
        Self::preset(501e6, 8.4e6, degenerate_frequency_hz)
    }

    /// Orthogonally polarized source: 490 MHz FSR, 7 MHz modes.
    pub fn type_ii(degenerate_frequency_hz: f64) -> Self {
        Self::preset(490e6, 7e6, degenerate_frequency_hz)
    }

    pub fn total_decay_rate(&self) -> f64 {
        self.output_coupling_rate + self.loss_rate
    }

    /// Mode FWHM κ (Hz).
    pub fn linewidth_hz(&self) -> f64 {
        self.total_decay_rate() / (2.0 * PI)
    }

    pub fn round_trip_s(&self) -> f64 {
        1.0 / self.fsr_hz
    }

    /// Smallest mode count per side whose edge lies below [`ENVELOPE_CUTOFF`].
    pub fn modes_for_coverage(&self) -> usize {
        let mut n = 0usize;
        while self.envelope.tail_bound(n as f64 * self.fsr_hz, self.envelope_fwhm_hz) >= ENVELOPE_CUTOFF {
            n += 1;
        }
        n
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fsr_hz > 0.0 && self.fsr_hz.is_finite()) {
            return Err(Error::config("cavity.fsr_hz", "must be positive"));
        }
        if !(self.envelope_fwhm_hz > 0.0 && self.envelope_fwhm_hz.is_finite()) {
            return Err(Error::config("cavity.envelope_fwhm_hz", "must be positive"));
        }
        if !(self.output_coupling_rate > 0.0) {
            return Err(Error::config("cavity.output_coupling_rate", "must be positive"));
        }
        if !(self.loss_rate > 0.0) {
            return Err(Error::config("cavity.loss_rate", "must be positive"));
        }
        if self.linewidth_hz() * 10.0 > self.fsr_hz {
            return Err(Error::config(
                "cavity.linewidth",
                format!("{:.3e} Hz is not small against the FSR", self.linewidth_hz()),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CombMode {
    pub index: i64,
    pub frequency_hz: f64,
    pub weight: f64,
}

/// Comb ordered by mode index from `-N` to `N`; mode `k` pairs with `-k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairSpectralDensity {
    pub modes: Vec<CombMode>,
    pub fsr_hz: f64,
    pub linewidth_hz: f64,
    pub degenerate_frequency_hz: f64,
    pub envelope_fwhm_hz: f64,
    pub warnings: Vec<String>,
}

impl PairSpectralDensity {
    pub fn modes_each_side(&self) -> usize {
        self.modes.len() / 2
    }

    pub fn mode(&self, index: i64) -> Option<&CombMode> {
        let n = self.modes_each_side() as i64;
        (index.abs() <= n).then(|| &self.modes[(index + n) as usize])
    }

    pub fn total_weight(&self) -> f64 {
        self.modes.iter().map(|m| m.weight).sum()
    }

    /// Number of modes inside the envelope FWHM.
    pub fn modes_within_fwhm(&self) -> usize {
        let half = self.envelope_fwhm_hz / 2.0;
        self.modes
            .iter()
            .filter(|m| (m.frequency_hz - self.degenerate_frequency_hz).abs() <= half)
            .count()
    }
}

pub fn mode_comb(cfg: &CavityConfig) -> Result<PairSpectralDensity> {
    cfg.validate()?;
    let n = cfg.modes_each_side as i64;
    let modes = (-n..=n)
        .map(|k| {
            // weight from |k| so the pairing symmetry is exact
            let offset = k.unsigned_abs() as f64 * cfg.fsr_hz;
            CombMode {
                index: k,
                frequency_hz: cfg.degenerate_frequency_hz + k as f64 * cfg.fsr_hz,
                weight: cfg.envelope.weight(offset, cfg.envelope_fwhm_hz),
            }
        })
        .collect();
    let mut warnings = Vec::new();
    let edge = cfg.envelope.tail_bound(n as f64 * cfg.fsr_hz, cfg.envelope_fwhm_hz);
    if edge >= ENVELOPE_CUTOFF {
        warnings.push(format!(
            "envelope at the outermost mode is {edge:.2e} of peak; {} modes per side needed",
            cfg.modes_for_coverage()
        ));
    }
    Ok(PairSpectralDensity {
        modes,
        fsr_hz: cfg.fsr_hz,
        linewidth_hz: cfg.linewidth_hz(),
        degenerate_frequency_hz: cfg.degenerate_frequency_hz,
        envelope_fwhm_hz: cfg.envelope_fwhm_hz,
        warnings,
    })
}

fn mode_average_rule() -> &'static [(f64, f64)] {
    static RULE: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(MODE_AVERAGE_NODES))
}

/// Filter transmission averaged over a Lorentzian mode of FWHM
/// `linewidth_hz` centered at absolute frequency `center_hz`, truncated to
/// ±3 linewidths.
pub fn mode_averaged_transmission(filter: &FilterSpectrum, center_hz: f64, linewidth_hz: f64) -> Result<f64> {
    let center = center_hz - filter.grid.reference_hz;
    let span = MODE_AVERAGE_HALF_SPAN * linewidth_hz;
    let (mut acc, mut norm) = (0.0, 0.0);
    for &(x, w) in mode_average_rule() {
        let lorentz = w / (1.0 + (2.0 * x * span / linewidth_hz).powi(2));
        acc += lorentz * filter.at(center + x * span)?;
        norm += lorentz;
    }
    Ok(acc / norm)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModePassage {
    pub index: i64,
    pub frequency_hz: f64,
    pub weight: f64,
    /// Mode-averaged filter transmission of this mode.
    pub transmission: f64,
    /// Weight of the pair (k, -k) with both photons transmitted.
    pub pair_weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilteredPairs {
    pub modes: Vec<ModePassage>,
    pub linewidth_hz: f64,
    /// Σ over pairs of both photons passing.
    pub coincidence_total: f64,
    /// Σ over modes of one photon passing.
    pub singles_total: f64,
}

impl FilteredPairs {
    pub fn mode(&self, index: i64) -> Option<&ModePassage> {
        let n = (self.modes.len() / 2) as i64;
        (index.abs() <= n).then(|| &self.modes[(index + n) as usize])
    }

    /// Fraction of transmitted pairs that come from the degenerate mode.
    pub fn degenerate_share(&self) -> f64 {
        match self.mode(0) {
            Some(m) if self.coincidence_total > 0.0 => m.pair_weight / self.coincidence_total,
            _ => 0.0,
        }
    }
}

/// Mode-averaged transmissions of every comb mode through `filter`.
fn comb_transmissions(src: &PairSpectralDensity, filter: &FilterSpectrum) -> Result<Vec<f64>> {
    src.modes
        .par_iter()
        .map(|m| {
            mode_averaged_transmission(filter, m.frequency_hz, src.linewidth_hz).map_err(|e| match e {
                Error::Coverage(msg) => Error::Coverage(format!("comb mode {}: {msg}", m.index)),
                other => other,
            })
        })
        .collect()
}

/// Both photons of each pair pass through `filter`.
pub fn filtered_pair_rate(src: &PairSpectralDensity, filter: &FilterSpectrum) -> Result<FilteredPairs> {
    let t = comb_transmissions(src, filter)?;
    let last = t.len() - 1;
    let modes: Vec<ModePassage> = src
        .modes
        .iter()
        .enumerate()
        .map(|(i, m)| ModePassage {
            index: m.index,
            frequency_hz: m.frequency_hz,
            weight: m.weight,
            transmission: t[i],
            pair_weight: m.weight * (t[i] * t[last - i]),
        })
        .collect();
    Ok(FilteredPairs {
        coincidence_total: modes.iter().map(|m| m.pair_weight).sum(),
        singles_total: modes.iter().map(|m| m.weight * m.transmission).sum(),
        linewidth_hz: src.linewidth_hz,
        modes,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PurityRow {
    pub index: i64,
    pub frequency_hz: f64,
    pub pair_weight: f64,
    /// Pair weight after a hot blocking cell on both photons.
    pub blocked_pair_weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PurityReport {
    pub spectral_purity: f64,
    /// Degenerate share of the pairs removed by the blocking cell.
    pub in_band_degenerate_share: f64,
    pub degenerate_fraction: f64,
    pub filtered_pairs: f64,
    pub blocked_cell_pairs: f64,
    pub per_mode: Vec<PurityRow>,
}

/// Purity of filtered pairs against a blocking cell `hot_cell`.
/// `leakage` is a broadband per-pair leak of the whole comb past the filter.
pub fn spectral_purity(
    pass: &FilteredPairs,
    src: &PairSpectralDensity,
    hot_cell: &FilterSpectrum,
    leakage: f64,
) -> Result<PurityReport> {
    if !(0.0..1.0).contains(&leakage) {
        return Err(Error::Domain {
            quantity: "leakage",
            value: leakage,
            reason: "must lie in [0, 1)".into(),
        });
    }
    if pass.modes.len() != src.modes.len() {
        return Err(Error::Contract("filtered result does not match the comb".into()));
    }
    let h = comb_transmissions(src, hot_cell)?;
    let last = h.len() - 1;
    let per_mode: Vec<PurityRow> = pass
        .modes
        .iter()
        .enumerate()
        .map(|(i, m)| PurityRow {
            index: m.index,
            frequency_hz: m.frequency_hz,
            pair_weight: m.pair_weight,
            blocked_pair_weight: m.pair_weight * (h[i] * h[last - i]),
        })
        .collect();
    let leak_filtered = leakage * src.total_weight();
    let leak_blocked: f64 = leakage
        * src
            .modes
            .iter()
            .enumerate()
            .map(|(i, m)| m.weight * h[i] * h[last - i])
            .sum::<f64>();

    let filtered = pass.coincidence_total + leak_filtered;
    if !(filtered > 0.0) {
        return Err(Error::Numeric("no filtered pairs; purity undefined".into()));
    }
    let blocked = per_mode.iter().map(|r| r.blocked_pair_weight).sum::<f64>() + leak_blocked;
    let purity = (1.0 - blocked / filtered).clamp(0.0, 1.0);
    let removed = filtered - blocked;
    let center = &per_mode[last / 2];
    let share = if removed > 0.0 {
        (center.pair_weight - center.blocked_pair_weight) / removed
    } else {
        0.0
    };
    Ok(PurityReport {
        spectral_purity: purity,
        in_band_degenerate_share: share,
        degenerate_fraction: purity * share,
        filtered_pairs: filtered,
        blocked_cell_pairs: blocked,
        per_mode,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::FrequencyGrid;
    use proptest::prelude::*;

    const NU0: f64 = 377.1e12;

    fn small_comb(n: usize) -> PairSpectralDensity {
        let mut cfg = CavityConfig::type_i(NU0);
        cfg.modes_each_side = n;
        mode_comb(&cfg).unwrap()
    }

    fn box_filter(grid: &FrequencyGrid, half_width: f64) -> FilterSpectrum {
        let mut f = FilterSpectrum::flat(grid, 0.0);
        for (i, x) in grid.detunings().enumerate() {
            if x.abs() <= half_width {
                f.transmission[i] = 1.0;
            }
        }
        f
    }

    fn hot_cell(grid: &FrequencyGrid) -> FilterSpectrum {
        let mut hot = FilterSpectrum::flat(grid, 1.0);
        for (i, x) in grid.detunings().enumerate() {
            if x.abs() < 1e9 {
                hot.transmission[i] = 0.0;
            }
        }
        hot
    }

    #[test]
    fn type_i_comb_counts() {
        let cfg = CavityConfig::type_i(NU0);
        let comb = mode_comb(&cfg).unwrap();
        assert!(comb.warnings.is_empty());
        assert_eq!(cfg.modes_each_side, 546);
        // 150 GHz / 501 MHz = 299.4
        assert_eq!(comb.modes_within_fwhm(), 299);
        assert!((cfg.linewidth_hz() - 8.4e6).abs() < 1e-6);
        assert!((cfg.round_trip_s() - 1.996e-9).abs() < 1e-12);
    }

    #[test]
    fn truncated_comb_warns() {
        let comb = small_comb(10);
        assert_eq!(comb.warnings.len(), 1);
    }

    #[test]
    fn weights_are_symmetric_and_peak_at_center() {
        let comb = mode_comb(&CavityConfig::type_ii(NU0)).unwrap();
        let n = comb.modes_each_side() as i64;
        for k in 1..=n {
            assert_eq!(comb.mode(k).unwrap().weight, comb.mode(-k).unwrap().weight);
            assert!(comb.mode(k).unwrap().weight < comb.mode(0).unwrap().weight);
        }
    }

    #[test]
    fn sinc_envelope_halves_at_fwhm() {
        let w = EnvelopeShape::Sinc2.weight(75e9, 150e9);
        assert!((w - 0.5).abs() < 1e-9);
    }

    #[test]
    fn invalid_cavity_is_rejected() {
        let mut cfg = CavityConfig::type_i(NU0);
        cfg.loss_rate = 0.0;
        assert!(matches!(mode_comb(&cfg), Err(Error::Config { .. })));
        let mut cfg = CavityConfig::type_i(NU0);
        cfg.fsr_hz = 20e6;
        assert!(matches!(mode_comb(&cfg), Err(Error::Config { .. })));
    }

    #[test]
    fn flat_filter_passes_source_weights() {
        let comb = small_comb(20);
        let grid = FrequencyGrid::centered(NU0, 11e9, 1e6).unwrap();
        let pass = filtered_pair_rate(&comb, &FilterSpectrum::flat(&grid, 1.0)).unwrap();
        for (m, c) in pass.modes.iter().zip(&comb.modes) {
            assert!((m.pair_weight - c.weight).abs() < 1e-14);
        }
    }

    #[test]
    fn narrow_filter_keeps_only_degenerate_pair() {
        let comb = small_comb(20);
        let grid = FrequencyGrid::centered(NU0, 11e9, 1e6).unwrap();
        let pass = filtered_pair_rate(&comb, &box_filter(&grid, 100e6)).unwrap();
        assert!((pass.degenerate_share() - 1.0).abs() < 1e-15);
        let report = spectral_purity(&pass, &comb, &hot_cell(&grid), 0.0).unwrap();
        assert_eq!(report.spectral_purity, 1.0);
        assert_eq!(report.degenerate_fraction, 1.0);
    }

    #[test]
    fn lorentzian_average_of_linear_ramp_is_center_value() {
        let grid = FrequencyGrid::centered(NU0, 1e9, 1e6).unwrap();
        let mut f = FilterSpectrum::flat(&grid, 0.0);
        f.transmission = grid.detunings().map(|x| 0.5 + x / 4e9).collect();
        let t = mode_averaged_transmission(&f, NU0 + 100e6, 8.4e6).unwrap();
        assert!((t - (0.5 + 100e6 / 4e9)).abs() < 1e-12);
    }

    #[test]
    fn uncovered_mode_is_a_coverage_error() {
        let comb = small_comb(20);
        let grid = FrequencyGrid::centered(NU0, 5e9, 1e6).unwrap();
        assert!(matches!(
            filtered_pair_rate(&comb, &FilterSpectrum::flat(&grid, 1.0)),
            Err(Error::Coverage(_))
        ));
    }

    #[test]
    fn zero_filter_makes_purity_undefined() {
        let comb = small_comb(5);
        let grid = FrequencyGrid::centered(NU0, 3e9, 1e6).unwrap();
        let dark = FilterSpectrum::flat(&grid, 0.0);
        let pass = filtered_pair_rate(&comb, &dark).unwrap();
        assert!(matches!(
            spectral_purity(&pass, &comb, &dark, 0.0),
            Err(Error::Numeric(_))
        ));
    }

    #[test]
    fn leakage_lowers_purity() {
        let comb = small_comb(20);
        let grid = FrequencyGrid::centered(NU0, 11e9, 1e6).unwrap();
        let pass = filtered_pair_rate(&comb, &box_filter(&grid, 100e6)).unwrap();
        let hot = FilterSpectrum::flat(&grid, 0.0);
        let report = spectral_purity(&pass, &comb, &hot, 1e-3).unwrap();
        assert_eq!(report.spectral_purity, 1.0);
        let clean = spectral_purity(&pass, &comb, &hot_cell(&grid), 0.0).unwrap();
        let leaky = spectral_purity(&pass, &comb, &hot_cell(&grid), 1e-3).unwrap();
        assert!(leaky.spectral_purity < clean.spectral_purity);
        assert!((0.0..=1.0).contains(&leaky.spectral_purity));
    }

    fn filter_from(values: &[f64]) -> FilterSpectrum {
        // 8 GHz span sampled every 250 MHz
        let grid = FrequencyGrid::centered(NU0, 4e9, 250e6).unwrap();
        let mut f = FilterSpectrum::flat(&grid, 0.0);
        f.transmission = values.to_vec();
        f
    }

    proptest! {
        #[test]
        fn pair_weights_symmetric_under_pairing(values in prop::collection::vec(0.0..1.0f64, 33)) {
            let comb = small_comb(6);
            let pass = filtered_pair_rate(&comb, &filter_from(&values)).unwrap();
            let mirrored: Vec<f64> = values.iter().rev().copied().collect();
            let mirror = filtered_pair_rate(&comb, &filter_from(&mirrored)).unwrap();
            for k in 1..=6i64 {
                let a = pass.mode(k).unwrap().pair_weight;
                prop_assert_eq!(a, pass.mode(-k).unwrap().pair_weight);
                prop_assert!((a - mirror.mode(k).unwrap().pair_weight).abs() <= 1e-12);
            }
        }

        #[test]
        fn raising_transmission_never_lowers_rates(
            values in prop::collection::vec(0.0..0.9f64, 33),
            bumps in prop::collection::vec(0.0..0.1f64, 33),
        ) {
            let comb = small_comb(6);
            let low = filtered_pair_rate(&comb, &filter_from(&values)).unwrap();
            let raised: Vec<f64> = values.iter().zip(&bumps).map(|(v, b)| v + b).collect();
            let high = filtered_pair_rate(&comb, &filter_from(&raised)).unwrap();
            for (a, b) in low.modes.iter().zip(&high.modes) {
                prop_assert!(b.pair_weight >= a.pair_weight);
            }
            prop_assert!(high.coincidence_total >= low.coincidence_total);
            prop_assert!(high.singles_total >= low.singles_total);
        }

        #[test]
        fn purity_is_bounded(
            values in prop::collection::vec(0.01..1.0f64, 33),
            hot in prop::collection::vec(0.0..1.0f64, 33),
            leak in 0.0..0.5f64,
        ) {
            let comb = small_comb(6);
            let pass = filtered_pair_rate(&comb, &filter_from(&values)).unwrap();
            let r = spectral_purity(&pass, &comb, &filter_from(&hot), leak).unwrap();
            prop_assert!((0.0..=1.0).contains(&r.spectral_purity));
            prop_assert!(r.degenerate_fraction <= r.spectral_purity);
        }
    }
}
