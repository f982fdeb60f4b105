use std::f64::consts::PI;
use std::path::PathBuf;

use clap::Args;
use num_complex::Complex64;
use rbphoton_core::cespdc_source::CavityConfig;
use rbphoton_core::correlations::{
    adjacent_bin_visibility, beat_period_s, binned_histogram, fit_envelope, histogram_from_events, simulate_events,
    write_events, BinDelay, DetectionModel, EnvelopeFit, G2Envelope, HistogramMode, MonteCarloConfig,
};
use rbphoton_core::two_photon_interference::{
    coincidence_rate, exposure_for_floor_counts, ideal_opo_psi, reconstruct_wavefunction, simulate_records,
    BiphotonWaveFunction, CoherentRef, InterferenceRecord, RecordSimulation,
};
use rbphoton_core::Error as ModelError;
use serde::{Deserialize, Serialize};

use super::{clap_default, positive, require, Block, Context};
use crate::artifacts::Artifacts;
use crate::error::{CliError, CliResult};

/// Coincidence histogram of the pair source, its envelope fit, and an
/// optional simulated event stream.
#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct G2Args {
    #[arg(long)]
    pub label: Option<String>,
    #[arg(long, value_enum, default_value = "multi")]
    pub mode: Mode,
    #[arg(long = "fsr-MHz", default_value_t = 501.0)]
    #[serde(rename = "fsr_MHz")]
    pub fsr_mhz: f64,
    /// Cavity mode FWHM.
    #[arg(long = "linewidth-MHz", default_value_t = 8.4)]
    #[serde(rename = "linewidth_MHz")]
    pub linewidth_mhz: f64,
    /// Output-coupling share of the cavity decay.
    #[arg(long, default_value_t = 0.8)]
    pub escape: f64,
    #[arg(long = "tbin-ns", default_value_t = 1.0)]
    #[serde(rename = "tbin_ns")]
    pub tbin_ns: f64,
    /// Relative detector delay.
    #[arg(long = "t0-ns", default_value_t = 0.0)]
    #[serde(rename = "t0_ns")]
    pub t0_ns: f64,
    /// Singles rate of detector 1 (s^-1).
    #[arg(long, default_value_t = 2e4)]
    pub r1: f64,
    #[arg(long, default_value_t = 2e4)]
    pub r2: f64,
    /// Detected pair rate (s^-1).
    #[arg(long, default_value_t = 1e3)]
    pub pair_rate: f64,
    /// Bins kept on each side of the delay.
    #[arg(long, default_value_t = 150)]
    pub bins: i64,
    #[arg(long = "jitter-ns")]
    #[serde(rename = "jitter_ns")]
    pub jitter_ns: Option<f64>,
    /// Comb modes per side; envelope coverage of the type-I crystal when absent.
    #[arg(long)]
    pub modes: Option<usize>,
    /// Simulated acquisition time; writes a binary event file when set.
    #[arg(long = "events-s")]
    #[serde(rename = "events_s")]
    pub events_s: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Single,
    Multi,
}

impl From<Mode> for HistogramMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Single => HistogramMode::Single,
            Mode::Multi => HistogramMode::Multi,
        }
    }
}

#[derive(Serialize)]
struct G2Report {
    mode: Mode,
    closed_form_fwhm_s: f64,
    comb_period_s: f64,
    modes_each_side: usize,
    beat_period_s: f64,
    /// Largest adjacent-bin visibility within ten bins of the delay.
    central_adjacent_bin_visibility: f64,
    fit: EnvelopeFit,
    /// Fit of the simulated single-mode event histogram.
    #[serde(skip_serializing_if = "Option::is_none")]
    event_fit: Option<EnvelopeFit>,
}

impl G2Args {
    fn model(&self) -> CliResult<(G2Envelope, DetectionModel)> {
        positive(self.fsr_mhz, "fsr_MHz")?;
        positive(self.linewidth_mhz, "linewidth_MHz")?;
        require(self.escape > 0.0 && self.escape < 1.0, "escape", "must lie in (0, 1)")?;
        positive(self.tbin_ns, "tbin_ns")?;
        require(self.t0_ns.is_finite(), "t0_ns", "must be finite")?;
        require(self.bins > 2, "bins", "must exceed 2")?;
        if let Some(d) = self.events_s {
            positive(d, "events_s")?;
        }
        let env = G2Envelope::from_linewidth(self.linewidth_mhz * 1e6, self.escape);
        env.validate()?;
        let modes = match self.modes {
            Some(n) => n,
            None => CavityConfig {
                fsr_hz: self.fsr_mhz * 1e6,
                ..CavityConfig::type_i(1.0)
            }
            .modes_for_coverage(),
        };
        let bin_width_s = self.tbin_ns * 1e-9;
        let det = DetectionModel {
            bin_width_s,
            delay: BinDelay::from_seconds(self.t0_ns * 1e-9, bin_width_s),
            singles_rates: [self.r1, self.r2],
            pair_rate: self.pair_rate,
            comb_period_s: 1.0 / (self.fsr_mhz * 1e6),
            modes_each_side: modes,
            jitter_fwhm_s: self.jitter_ns.map(|j| j * 1e-9),
        };
        det.validate()?;
        Ok((env, det))
    }
}

impl Block for G2Args {
    const KIND: &'static str = "g2";

    fn label(&self) -> Option<&str> {
        self.label.as_deref()
    }

    fn validate(&self, _ctx: &Context) -> CliResult<()> {
        self.model().map(|_| ())
    }

    fn run(&self, ctx: &Context, out: &mut Artifacts) -> CliResult<()> {
        let (env, det) = self.model()?;
        let centre = det.delay.bins;
        let range = centre - self.bins..=centre + self.bins;
        let hist = binned_histogram(&env, &det, self.mode.into(), range.clone())?;
        let fit = fit_envelope(&hist)?;
        let visibility = adjacent_bin_visibility(&hist, det.accidental_rate());
        let mid = self.bins as usize;
        let central = visibility[mid - 10.min(mid)..(mid + 10).min(visibility.len())]
            .iter()
            .copied()
            .fold(0.0, f64::max);
        let stem = self.stem();
        out.write_table(&format!("{stem}_histogram"), &hist, |buf| hist.write_csv(buf))?;

        let event_fit = match self.events_s {
            Some(duration_s) => {
                let cfg = MonteCarloConfig {
                    duration_s,
                    seed: ctx.seed,
                };
                let events = simulate_events(&env, &det, self.mode.into(), &cfg)?;
                let mut buf = Vec::with_capacity(events.len() * 9);
                write_events(&mut buf, &events).map_err(|e| ModelError::Numeric(format!("event encoding: {e}")))?;
                out.write(&format!("{stem}_events.bin"), &buf)?;
                let counted = histogram_from_events(&events, det.bin_width_s, range, Some(duration_s));
                out.write_table(&format!("{stem}_event_histogram"), &counted, |buf| {
                    counted.write_csv(buf)
                })?;
                // the single-envelope model does not describe comb-modulated counts
                match self.mode {
                    Mode::Single => Some(fit_envelope(&counted)?),
                    Mode::Multi => None,
                }
            }
            None => None,
        };
        out.write_json(
            &format!("{stem}_fit.json"),
            &G2Report {
                mode: self.mode,
                closed_form_fwhm_s: env.fwhm_s(),
                comb_period_s: det.comb_period_s,
                modes_each_side: det.modes_each_side,
                beat_period_s: beat_period_s(det.comb_period_s, det.bin_width_s),
                central_adjacent_bin_visibility: central,
                fit,
                event_fit,
            },
        )
    }
}

fn matched_amplitude(psi: &BiphotonWaveFunction) -> f64 {
    (2.0 * psi.centre().norm()).sqrt()
}

fn ideal_psi(bandwidth_mhz: f64, phase_rad: f64, step_ns: f64, half_len: usize) -> CliResult<BiphotonWaveFunction> {
    positive(bandwidth_mhz, "bandwidth_MHz")?;
    positive(step_ns, "step_ns")?;
    require(half_len > 0, "half_len", "must be positive")?;
    Ok(ideal_opo_psi(bandwidth_mhz * 1e6, phase_rad, step_ns * 1e-9, half_len)?)
}

/// Coincidence rate of the pair amplitude interfering with a coherent
/// reference, one column per reference phase.
#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InterferenceArgs {
    #[arg(long)]
    pub label: Option<String>,
    #[arg(long = "bandwidth-MHz", default_value_t = 8.1)]
    #[serde(rename = "bandwidth_MHz")]
    pub bandwidth_mhz: f64,
    /// Phase of the pair amplitude.
    #[arg(long, default_value_t = 0.0)]
    pub psi_phase_rad: f64,
    /// Reference pair amplitude relative to |ψ(0)|.
    #[arg(long, default_value_t = 1.0)]
    pub contrast: f64,
    /// Reference phases φ, measured from half the pair phase.
    #[arg(long = "phases-deg", value_delimiter = ',', default_values_t = [0.0, 45.0, 90.0, 135.0])]
    #[serde(rename = "phases_deg")]
    pub phases_deg: Vec<f64>,
    #[arg(long = "step-ns", default_value_t = 1.0)]
    #[serde(rename = "step_ns")]
    pub step_ns: f64,
    #[arg(long, default_value_t = 150)]
    pub half_len: usize,
}

#[derive(Serialize)]
struct InterferenceTable {
    tau_s: Vec<f64>,
    phases_rad: Vec<f64>,
    /// `rates[k][i]`: phase `k`, delay `i`.
    rates: Vec<Vec<f64>>,
    coherent_floor: f64,
}

impl Block for InterferenceArgs {
    const KIND: &'static str = "interference";

    fn label(&self) -> Option<&str> {
        self.label.as_deref()
    }

    fn validate(&self, _ctx: &Context) -> CliResult<()> {
        positive(self.contrast, "contrast")?;
        require(!self.phases_deg.is_empty(), "phases_deg", "needs at least one phase")?;
        ideal_psi(self.bandwidth_mhz, self.psi_phase_rad, self.step_ns, self.half_len).map(|_| ())
    }

    fn run(&self, _ctx: &Context, out: &mut Artifacts) -> CliResult<()> {
        let psi = ideal_psi(self.bandwidth_mhz, self.psi_phase_rad, self.step_ns, self.half_len)?;
        let amplitude = matched_amplitude(&psi) * self.contrast.sqrt();
        let phases_rad: Vec<f64> = self
            .phases_deg
            .iter()
            .map(|d| self.psi_phase_rad / 2.0 + d.to_radians())
            .collect();
        let rates: Vec<Vec<f64>> = phases_rad
            .iter()
            .map(|&phase_rad| {
                let reference = CoherentRef {
                    amplitude: Complex64::new(amplitude, 0.0),
                    phase_rad,
                };
                (0..psi.psi.len())
                    .map(|i| coincidence_rate(&psi, &reference, i, 0.0))
                    .collect()
            })
            .collect();
        let table = InterferenceTable {
            tau_s: psi.delays().collect(),
            phases_rad,
            rates,
            coherent_floor: amplitude.powi(4) / 4.0,
        };
        out.write_table(&self.stem(), &table, |buf| {
            let err = |e: csv::Error| ModelError::Numeric(format!("csv write: {e}"));
            let mut w = csv::Writer::from_writer(buf);
            let mut header = vec!["tau_s".to_string()];
            header.extend(self.phases_deg.iter().map(|d| format!("rate_phi_{d}deg")));
            header.push("coherent_floor".into());
            w.write_record(&header).map_err(err)?;
            for (i, tau) in table.tau_s.iter().enumerate() {
                let mut row = vec![format!("{tau:e}")];
                row.extend(table.rates.iter().map(|r| format!("{:e}", r[i])));
                row.push(format!("{:e}", table.coherent_floor));
                w.write_record(&row).map_err(err)?;
            }
            w.flush().map_err(|e| ModelError::Numeric(format!("csv write: {e}")))
        })
    }
}

/// Interference records plus the reference amplitude that produced them.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RecordBundle {
    pub amplitude: f64,
    #[serde(default)]
    pub phase_offset_rad: f64,
    pub records: Vec<InterferenceRecord>,
}

/// Biphoton amplitude and phase from phase-stepped interference records,
/// read from a bundle or simulated from the ideal cavity output.
#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReconstructArgs {
    #[arg(long)]
    pub label: Option<String>,
    /// JSON record bundle; synthetic records when absent.
    #[arg(long)]
    pub records: Option<PathBuf>,
    #[arg(long = "bandwidth-MHz", default_value_t = 8.1)]
    #[serde(rename = "bandwidth_MHz")]
    pub bandwidth_mhz: f64,
    #[arg(long, default_value_t = 0.0)]
    pub psi_phase_rad: f64,
    /// Reference phase settings spread evenly over [0, π).
    #[arg(long, default_value_t = 4)]
    pub phase_settings: usize,
    /// Counts per bin from the coherent reference alone.
    #[arg(long, default_value_t = 25.0)]
    pub floor_counts: f64,
    #[arg(long, default_value_t = false)]
    pub noise_free: bool,
    #[arg(long = "step-ns", default_value_t = 1.0)]
    #[serde(rename = "step_ns")]
    pub step_ns: f64,
    #[arg(long, default_value_t = 100)]
    pub half_len: usize,
}

#[derive(Serialize)]
struct ReconstructSummary {
    amplitude: f64,
    records: usize,
    phase_sigma_deg_at_zero: f64,
    clipped: usize,
}

impl ReconstructArgs {
    fn bundle(&self, ctx: &Context) -> CliResult<(RecordBundle, bool)> {
        if let Some(path) = &self.records {
            let path = ctx.resolve(path);
            let text = std::fs::read(&path).map_err(|source| CliError::Read {
                path: path.clone(),
                source,
            })?;
            let bundle: RecordBundle =
                serde_json::from_slice(&text).map_err(|e| CliError::config("records", e.to_string()))?;
            positive(bundle.amplitude, "records.amplitude")?;
            require(!bundle.records.is_empty(), "records.records", "bundle holds no records")?;
            return Ok((bundle, false));
        }
        require(self.phase_settings >= 3, "phase_settings", "need at least three")?;
        require(self.floor_counts >= 0.0, "floor_counts", "must be non-negative")?;
        let psi = ideal_psi(self.bandwidth_mhz, self.psi_phase_rad, self.step_ns, self.half_len)?;
        let amplitude = matched_amplitude(&psi);
        let n = self.phase_settings;
        let sim = RecordSimulation {
            amplitude,
            phases_rad: (0..n).map(|k| k as f64 * PI / n as f64).collect(),
            exposure: exposure_for_floor_counts(amplitude, self.floor_counts),
            floor_rate: 0.0,
            noise: !self.noise_free,
            seed: ctx.seed,
        };
        let records = simulate_records(&psi, &sim)?;
        Ok((
            RecordBundle {
                amplitude,
                phase_offset_rad: 0.0,
                records,
            },
            true,
        ))
    }
}

impl Block for ReconstructArgs {
    const KIND: &'static str = "reconstruct";

    fn label(&self) -> Option<&str> {
        self.label.as_deref()
    }

    fn validate(&self, ctx: &Context) -> CliResult<()> {
        match &self.records {
            Some(path) => {
                let path = ctx.resolve(path);
                require(
                    path.is_file(),
                    "records",
                    &format!("`{}` does not exist", path.display()),
                )
            }
            None => {
                require(self.phase_settings >= 3, "phase_settings", "need at least three")?;
                ideal_psi(self.bandwidth_mhz, self.psi_phase_rad, self.step_ns, self.half_len).map(|_| ())
            }
        }
    }

    fn run(&self, ctx: &Context, out: &mut Artifacts) -> CliResult<()> {
        let (bundle, synthetic) = self.bundle(ctx)?;
        let rec = reconstruct_wavefunction(&bundle.records, bundle.amplitude, bundle.phase_offset_rad)?;
        let stem = self.stem();
        if synthetic {
            out.write_json(&format!("{stem}_records.json"), &bundle)?;
        }
        out.write_table(&format!("{stem}_wavefunction"), &rec, |buf| rec.write_csv(buf))?;
        out.write_json(
            &format!("{stem}_summary.json"),
            &ReconstructSummary {
                amplitude: bundle.amplitude,
                records: bundle.records.len(),
                phase_sigma_deg_at_zero: rec.phase_sigma_rad[rec.psi.half_len()].to_degrees(),
                clipped: rec.clipped,
            },
        )
    }
}

clap_default!(G2Args, InterferenceArgs, ReconstructArgs);
