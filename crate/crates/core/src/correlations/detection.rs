use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::envelope::{g2_multi_exact, g2_multi_weights, integrate, CombTooth, G2Envelope};
use crate::error::{Error, Result};

/// Relative delay `T₀ = k·t_bin + δ`, kept split so whole-bin shifts are exact.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinDelay {
    pub bins: i64,
    /// Sub-bin remainder δ (s), in `[-t_bin/2, t_bin/2)`.
    pub remainder_s: f64,
}

impl BinDelay {
    pub fn from_seconds(delay_s: f64, bin_width_s: f64) -> Self {
        let bins = (delay_s / bin_width_s).round() as i64;
        Self {
            bins,
            remainder_s: delay_s - bins as f64 * bin_width_s,
        }
    }

    pub fn seconds(&self, bin_width_s: f64) -> f64 {
        self.bins as f64 * bin_width_s + self.remainder_s
    }

    pub fn shifted(self, bins: i64) -> Self {
        Self {
            bins: self.bins + bins,
            ..self
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HistogramMode {
    Single,
    Multi,
}

/// Below this many modes per side the finite-comb kernel is used instead
/// of delta teeth.
pub const DELTA_COMB_MIN_MODES: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionModel {
    pub bin_width_s: f64,
    pub delay: BinDelay,
    /// Singles rates of the two detectors (s^-1).
    pub singles_rates: [f64; 2],
    /// Detected pair rate (s^-1).
    pub pair_rate: f64,
    pub comb_period_s: f64,
    pub modes_each_side: usize,
    /// Gaussian timing jitter; `None` leaves bins unblurred.
    #[serde(default)]
    pub jitter_fwhm_s: Option<f64>,
}

impl DetectionModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.bin_width_s > 0.0 && self.bin_width_s.is_finite()) {
            return Err(Error::config("detection.bin_width_s", "must be positive"));
        }
        if !(self.delay.remainder_s.abs() <= self.bin_width_s / 2.0) {
            return Err(Error::config(
                "detection.delay.remainder_s",
                "must lie within half a bin",
            ));
        }
        if self.singles_rates.iter().any(|r| !(*r >= 0.0)) {
            return Err(Error::config("detection.singles_rates", "must be non-negative"));
        }
        if !(self.pair_rate >= 0.0) {
            return Err(Error::config("detection.pair_rate", "must be non-negative"));
        }
        if !(self.comb_period_s > 0.0) {
            return Err(Error::config("detection.comb_period_s", "must be positive"));
        }
        if let Some(j) = self.jitter_fwhm_s {
            if !(j > 0.0) {
                return Err(Error::config("detection.jitter_fwhm_s", "must be positive when set"));
            }
        }
        Ok(())
    }

    /// Accidental coincidence rate per bin, `t_bin R₁ R₂`.
    pub fn accidental_rate(&self) -> f64 {
        self.bin_width_s * self.singles_rates[0] * self.singles_rates[1]
    }
}

/// Probability that a pair with true delay `x` bins lands `j` bins apart:
/// triangular overlap of a bin-wide uniform start phase with bin `j`.
pub fn bin_overlap(x_bins: f64, j: i64) -> f64 {
    (1.0 - (x_bins - j as f64).abs()).max(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HistogramKind {
    Rate,
    Counts,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoincidenceHistogram {
    pub first_bin: i64,
    pub bin_width_s: f64,
    pub kind: HistogramKind,
    pub entries: Vec<f64>,
    /// Acquisition time for counts (s).
    #[serde(default)]
    pub duration_s: Option<f64>,
}

impl CoincidenceHistogram {
    pub fn bins(&self) -> impl Iterator<Item = i64> + '_ {
        (0..self.entries.len() as i64).map(move |k| self.first_bin + k)
    }

    pub fn last_bin(&self) -> i64 {
        self.first_bin + self.entries.len() as i64 - 1
    }

    pub fn get(&self, bin: i64) -> Option<f64> {
        let k = bin - self.first_bin;
        (k >= 0).then(|| self.entries.get(k as usize).copied()).flatten()
    }

    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let value = match self.kind {
            HistogramKind::Rate => "rate_per_s",
            HistogramKind::Counts => "counts",
        };
        w.write_record(["bin", "delay_s", value])
            .map_err(|e| Error::Numeric(format!("csv write: {e}")))?;
        for (bin, v) in self.bins().zip(&self.entries) {
            w.write_record([
                bin.to_string(),
                format!("{:e}", bin as f64 * self.bin_width_s),
                format!("{v:e}"),
            ])
            .map_err(|e| Error::Numeric(format!("csv write: {e}")))?;
        }
        w.flush().map_err(|e| Error::Numeric(format!("csv write: {e}")))
    }
}

/// ∫ (g/2) e^{-g|x|} (α + βx) dx over `[a, b]`, in bin units.
fn laplace_linear(g: f64, alpha: f64, beta: f64, a: f64, b: f64) -> f64 {
    let pos = |x: f64| -0.5 * (-g * x).exp() * (alpha + beta * x) - beta / (2.0 * g) * (-g * x).exp();
    let neg = |x: f64| 0.5 * (g * x).exp() * (alpha + beta * x) - beta / (2.0 * g) * (g * x).exp();
    if b <= 0.0 {
        neg(b) - neg(a)
    } else if a >= 0.0 {
        pos(b) - pos(a)
    } else {
        neg(0.0) - neg(a) + pos(b) - pos(0.0)
    }
}

/// Probability that a single-mode pair lands in bin `j` relative to the
/// delay's whole-bin part; `g = γ t_bin`, `d = δ / t_bin`.
pub(crate) fn single_bin_probability(g: f64, d: f64, j: i64) -> f64 {
    // triangle centred on the true delay j - d, half-width one bin
    let c = j as f64 - d;
    let rise = laplace_linear(g, 1.0 - c, 1.0, c - 1.0, c);
    let fall = laplace_linear(g, 1.0 + c, -1.0, c, c + 1.0);
    (rise + fall).max(0.0)
}

fn gaussian_blur(values: &[f64], sigma_bins: f64) -> Vec<f64> {
    let reach = (4.0 * sigma_bins).ceil() as i64;
    let kernel: Vec<f64> = (-reach..=reach)
        .map(|k| (-0.5 * (k as f64 / sigma_bins).powi(2)).exp())
        .collect();
    let norm: f64 = kernel.iter().sum();
    (0..values.len() as i64)
        .map(|i| {
            (-reach..=reach)
                .filter_map(|k| {
                    let src = i - k;
                    (src >= 0 && src < values.len() as i64).then(|| values[src as usize] * kernel[(k + reach) as usize])
                })
                .sum::<f64>()
                / norm
        })
        .collect()
}

/// Expected coincidence rate (s^-1) in each bin of `bins`.
pub fn binned_histogram(
    env: &G2Envelope,
    det: &DetectionModel,
    mode: HistogramMode,
    bins: std::ops::RangeInclusive<i64>,
) -> Result<CoincidenceHistogram> {
    env.validate()?;
    det.validate()?;
    if bins.is_empty() {
        return Err(Error::Contract("empty bin range".into()));
    }
    let t_bin = det.bin_width_s;
    let g = env.decay_rate() * t_bin;
    let d = det.delay.remainder_s / t_bin;
    let k = det.delay.bins;
    let floor = det.accidental_rate();

    let probability: Box<dyn Fn(i64) -> f64 + Sync> = match mode {
        HistogramMode::Single => Box::new(move |j| single_bin_probability(g, d, j)),
        HistogramMode::Multi if det.modes_each_side >= DELTA_COMB_MIN_MODES => {
            let teeth: Vec<CombTooth> = g2_multi_weights(env, det.comb_period_s)?;
            let total: f64 = teeth.iter().map(|t| t.weight).sum();
            let period_bins = det.comb_period_s / t_bin;
            Box::new(move |j| {
                teeth
                    .iter()
                    .map(|t| t.weight * bin_overlap(t.index as f64 * period_bins + d, j))
                    .sum::<f64>()
                    / total
            })
        }
        HistogramMode::Multi => {
            let (tau, n) = (det.comb_period_s, det.modes_each_side);
            let density = move |x: f64| g2_multi_exact(x * t_bin, env, tau, n);
            // kernel lobes are τ/(2N+1) wide; resolve each with several pieces
            let per_bin = ((8 * (2 * n + 1)) as f64 / (tau / t_bin)).ceil().max(8.0) as usize;
            let reach = (30.0 / g).ceil();
            let total = integrate(density, -reach, reach, (2.0 * reach) as usize * per_bin);
            let env = *env;
            Box::new(move |j| {
                let c = j as f64 - d;
                let tri = |x: f64| g2_multi_exact(x * t_bin, &env, tau, n) * bin_overlap(x + d, j);
                integrate(tri, c - 1.0, c + 1.0, 2 * per_bin) / total
            })
        }
    };

    let entries: Vec<f64> = bins
        .clone()
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|i| det.pair_rate * probability(i - k) + floor)
        .collect();
    let entries = match det.jitter_fwhm_s {
        Some(fwhm) => gaussian_blur(&entries, fwhm / t_bin / (8.0 * std::f64::consts::LN_2).sqrt()),
        None => entries,
    };
    Ok(CoincidenceHistogram {
        first_bin: *bins.start(),
        bin_width_s: t_bin,
        kind: HistogramKind::Rate,
        entries,
        duration_s: None,
    })
}

/// `|h_i - h_{i+1}| / (h_i + h_{i+1})` after removing `floor`, one per adjacent pair.
pub fn adjacent_bin_visibility(h: &CoincidenceHistogram, floor: f64) -> Vec<f64> {
    h.entries
        .windows(2)
        .map(|w| {
            let (a, b) = (w[0] - floor, w[1] - floor);
            if a + b > 0.0 {
                (a - b).abs() / (a + b)
            } else {
                0.0
            }
        })
        .collect()
}

/// Period (s) of the visibility beating between a comb of period `period_s`
/// and bins of width `bin_width_s`.
pub fn beat_period_s(period_s: f64, bin_width_s: f64) -> f64 {
    let n = (period_s / bin_width_s).round();
    period_s * bin_width_s / (period_s - n * bin_width_s).abs()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn env() -> G2Envelope {
        G2Envelope::from_linewidth(8.4e6, 0.8)
    }

    fn detection(delay_s: f64, modes: usize) -> DetectionModel {
        DetectionModel {
            bin_width_s: 1e-9,
            delay: BinDelay::from_seconds(delay_s, 1e-9),
            singles_rates: [0.0, 0.0],
            pair_rate: 1.0,
            comb_period_s: 1.0 / 501e6,
            modes_each_side: modes,
            jitter_fwhm_s: None,
        }
    }

    #[test]
    fn delay_split_round_trips() {
        let d = BinDelay::from_seconds(37.4e-9, 1e-9);
        assert_eq!(d.bins, 37);
        assert!((d.seconds(1e-9) - 37.4e-9).abs() < 1e-21);
        let d = BinDelay::from_seconds(-2.6e-9, 1e-9);
        assert_eq!(d.bins, -3);
        assert!((d.remainder_s - 0.4e-9).abs() < 1e-20);
    }

    #[test]
    fn single_probabilities_match_quadrature() {
        let g = 0.05;
        for (d, j) in [(0.0, 0i64), (0.3, 0), (-0.2, 1), (0.45, -7), (0.1, 40)] {
            let direct = integrate(
                |x| 0.5 * g * (-g * x.abs()).exp() * bin_overlap(x + d, j),
                j as f64 - d - 1.0,
                j as f64 - d + 1.0,
                400,
            );
            assert!((single_bin_probability(g, d, j) - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn no_singles_means_zero_floor() {
        let h = binned_histogram(&env(), &detection(0.0, 546), HistogramMode::Multi, -2000..=2000).unwrap();
        assert_eq!(h.entries[0], 0.0);
        assert_eq!(*h.entries.last().unwrap(), 0.0);
    }

    #[test]
    fn probabilities_sum_to_one() {
        for mode in [HistogramMode::Single, HistogramMode::Multi] {
            let h = binned_histogram(&env(), &detection(3.3e-9, 546), mode, -3000..=3000).unwrap();
            let total: f64 = h.entries.iter().sum();
            assert!((total - 1.0).abs() < 1e-9, "{mode:?}: {total}");
        }
    }

    #[test]
    fn exact_comb_kernel_is_normalized() {
        let h = binned_histogram(&env(), &detection(0.2e-9, 10), HistogramMode::Multi, -1500..=1500).unwrap();
        let total: f64 = h.entries.iter().sum();
        assert!((total - 1.0).abs() < 1e-3, "{total}");
    }

    #[test]
    fn accidental_floor_far_from_peak() {
        let mut det = detection(0.0, 546);
        det.singles_rates = [2e4, 3e4];
        let h = binned_histogram(&env(), &det, HistogramMode::Single, 500..=600).unwrap();
        for v in &h.entries {
            assert!((v - det.accidental_rate()).abs() < 1e-6 * det.accidental_rate());
        }
    }

    #[test]
    fn multimode_beats_single_does_not() {
        let multi = binned_histogram(&env(), &detection(0.0, 546), HistogramMode::Multi, -600..=600).unwrap();
        let single = binned_histogram(&env(), &detection(0.0, 546), HistogramMode::Single, -600..=600).unwrap();
        let vm = adjacent_bin_visibility(&multi, 0.0);
        let vs = adjacent_bin_visibility(&single, 0.0);
        let centre = 600;
        assert!(vm[centre] > 0.9);
        assert!(vs[centre..centre + 20].iter().all(|&v| v < 0.05));
        // half a beat period away the teeth straddle bins
        let half_beat = (beat_period_s(1.0 / 501e6, 1e-9) / 2e-9).round() as usize;
        assert!((half_beat as f64 - 249.5).abs() < 1.0);
        assert!(vm[centre + half_beat] < 0.1);
    }

    #[test]
    fn jitter_blurs_the_comb() {
        let mut det = detection(0.0, 546);
        det.jitter_fwhm_s = Some(2e-9);
        let h = binned_histogram(&env(), &det, HistogramMode::Multi, -300..=300).unwrap();
        assert!(adjacent_bin_visibility(&h, 0.0)[300] < 0.5);
    }

    #[test]
    fn csv_has_header_and_rows() {
        let h = binned_histogram(&env(), &detection(0.0, 546), HistogramMode::Single, -2..=2).unwrap();
        let mut buf = Vec::new();
        h.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("bin,delay_s,rate_per_s\n-2,"));
        assert_eq!(text.lines().count(), 6);
    }

    proptest! {
        #[test]
        fn overlap_conserves_probability(x in -50.0..50.0f64) {
            let lo = x.floor() as i64 - 2;
            let total: f64 = (lo..lo + 5).map(|j| bin_overlap(x, j)).sum();
            prop_assert!((total - 1.0).abs() < 1e-12);
        }

        #[test]
        fn whole_bin_shift_is_exact(delay in -40e-9..40e-9f64, shift in -20i64..20) {
            let det = detection(delay, 546);
            let mut moved = det.clone();
            moved.delay = det.delay.shifted(shift);
            for mode in [HistogramMode::Single, HistogramMode::Multi] {
                let a = binned_histogram(&env(), &det, mode, -100..=100).unwrap();
                let b = binned_histogram(&env(), &moved, mode, -100 + shift..=100 + shift).unwrap();
                prop_assert_eq!(&a.entries, &b.entries);
            }
        }
    }
}
