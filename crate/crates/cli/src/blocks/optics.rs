use std::collections::BTreeMap;

use clap::Args;
use rbphoton_core::atomic_structure::AtomData;
use rbphoton_core::cespdc_source::{filtered_pair_rate, mode_comb, spectral_purity, CavityConfig};
use rbphoton_core::filter_models::{
    fadof_spectrum, filter_metrics, FilterMetrics, FilterSpectrum, PolarizerPair, DEFAULT_EXTINCTION, DEFAULT_SLICES,
};
use rbphoton_core::grid::FrequencyGrid;
use rbphoton_core::noon_sensing::noon_probe_detuning_hz;
use rbphoton_core::vapor_optics::{
    blocking_cell_transmission, cell_transfer, complex_index, d1_line_sets, write_index_csv, FieldProfile,
    VaporCellConfig, VaporModel,
};
use serde::{Deserialize, Serialize};

use super::{clap_default, positive, require, write_rows, Block, Context};
use crate::artifacts::Artifacts;
use crate::error::CliResult;

fn isotope_mix(atoms: &AtomData, rb85: Option<f64>) -> BTreeMap<String, f64> {
    match rb85 {
        Some(f) => BTreeMap::from([("85Rb".to_string(), f), ("87Rb".to_string(), 1.0 - f)]),
        None => atoms.natural_fractions(),
    }
}

fn d1_grid(atoms: &AtomData, span_ghz: f64, step_mhz: f64) -> CliResult<FrequencyGrid> {
    positive(span_ghz, "span_GHz")?;
    positive(step_mhz, "step_MHz")?;
    Ok(FrequencyGrid::centered(
        atoms.d1_centroid_hz(),
        span_ghz * 1e9,
        step_mhz * 1e6,
    )?)
}

/// Complex refractive index of both circular polarizations.
#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectrumArgs {
    #[arg(long)]
    pub label: Option<String>,
    #[arg(long = "temp-K", default_value_t = 340.0)]
    #[serde(rename = "temp_K")]
    pub temp_k: f64,
    #[arg(long = "length-cm", default_value_t = 10.0)]
    pub length_cm: f64,
    #[arg(long = "field-mT", default_value_t = 0.0)]
    #[serde(rename = "field_mT")]
    pub field_mt: f64,
    /// 85Rb fraction; natural abundance when absent.
    #[arg(long)]
    pub rb85_fraction: Option<f64>,
    #[arg(long = "span-GHz", default_value_t = 8.0)]
    #[serde(rename = "span_GHz")]
    pub span_ghz: f64,
    #[arg(long = "step-MHz", default_value_t = 1.0)]
    #[serde(rename = "step_MHz")]
    pub step_mhz: f64,
}

impl SpectrumArgs {
    fn cell(&self, atoms: &AtomData) -> VaporCellConfig {
        VaporCellConfig {
            isotope_fractions: isotope_mix(atoms, self.rb85_fraction),
            field: FieldProfile::uniform(self.field_mt * 1e-3),
            ..VaporCellConfig::natural(atoms, self.length_cm * 1e-2, self.temp_k)
        }
    }
}

impl Block for SpectrumArgs {
    const KIND: &'static str = "spectrum";

    fn label(&self) -> Option<&str> {
        self.label.as_deref()
    }

    fn validate(&self, ctx: &Context) -> CliResult<()> {
        d1_grid(&ctx.atoms, self.span_ghz, self.step_mhz)?;
        Ok(self.cell(&ctx.atoms).validate(&ctx.atoms)?)
    }

    fn run(&self, ctx: &Context, out: &mut Artifacts) -> CliResult<()> {
        let grid = d1_grid(&ctx.atoms, self.span_ghz, self.step_mhz)?;
        let cell = self.cell(&ctx.atoms);
        let sets = d1_line_sets(&ctx.atoms, &cell, self.field_mt * 1e-3)?;
        let index = complex_index(&sets, &cell, &grid)?;
        out.write_table(&format!("{}_index", self.stem()), &index, |buf| {
            write_index_csv(&index, buf)
        })
    }
}

/// Faraday filter between crossed polarizers.
#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FadofArgs {
    #[arg(long)]
    pub label: Option<String>,
    #[arg(long = "field-mT", default_value_t = 4.5)]
    #[serde(rename = "field_mT")]
    pub field_mt: f64,
    #[arg(long = "temp-K", default_value_t = 365.0)]
    #[serde(rename = "temp_K")]
    pub temp_k: f64,
    #[arg(long = "length-cm", default_value_t = 10.0)]
    pub length_cm: f64,
    /// Intensity leakage of the crossed polarizers.
    #[arg(long, default_value_t = DEFAULT_EXTINCTION)]
    pub extinction: f64,
    /// Half-width of the metrics window around the tallest peak.
    #[arg(long = "window-GHz", default_value_t = 1.0)]
    #[serde(rename = "window_GHz")]
    pub window_ghz: f64,
    #[arg(long = "span-GHz", default_value_t = 8.0)]
    #[serde(rename = "span_GHz")]
    pub span_ghz: f64,
    #[arg(long = "step-MHz", default_value_t = 1.0)]
    #[serde(rename = "step_MHz")]
    pub step_mhz: f64,
}

#[derive(Serialize)]
struct FadofReport<'a> {
    #[serde(rename = "field_mT")]
    field_mt: f64,
    #[serde(rename = "temp_K")]
    temp_k: f64,
    length_cm: f64,
    extinction: f64,
    metrics: &'a FilterMetrics,
}

impl FadofArgs {
    fn inputs(&self, atoms: &AtomData) -> CliResult<(VaporCellConfig, PolarizerPair, FrequencyGrid)> {
        positive(self.window_ghz, "window_GHz")?;
        require(self.field_mt >= 0.0, "field_mT", "must be non-negative")?;
        let cell = VaporCellConfig::natural(atoms, self.length_cm * 1e-2, self.temp_k);
        cell.validate(atoms)?;
        let pol = PolarizerPair::crossed(self.extinction);
        pol.validate()?;
        Ok((cell, pol, d1_grid(atoms, self.span_ghz, self.step_mhz)?))
    }
}

impl Block for FadofArgs {
    const KIND: &'static str = "fadof";

    fn label(&self) -> Option<&str> {
        self.label.as_deref()
    }

    fn validate(&self, ctx: &Context) -> CliResult<()> {
        self.inputs(&ctx.atoms).map(|_| ())
    }

    fn run(&self, ctx: &Context, out: &mut Artifacts) -> CliResult<()> {
        let (cell, pol, grid) = self.inputs(&ctx.atoms)?;
        let spectrum = fadof_spectrum(&ctx.atoms, &cell, self.field_mt * 1e-3, &pol, &grid)?;
        let peak = spectrum.peak_detuning();
        let half = self.window_ghz * 1e9;
        let metrics = filter_metrics(&spectrum, (peak - half, peak + half))?;
        let stem = self.stem();
        out.write_table(&format!("{stem}_spectrum"), &spectrum, |buf| spectrum.write_csv(buf))?;
        out.write_json(
            &format!("{stem}_metrics.json"),
            &FadofReport {
                field_mt: self.field_mt,
                temp_k: self.temp_k,
                length_cm: self.length_cm,
                extinction: self.extinction,
                metrics: &metrics,
            },
        )
    }
}

/// Degenerate-mode purity of the type-I comb behind the Faraday filter,
/// checked against the buffer-gas blocking cell.
#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PurityArgs {
    #[arg(long)]
    pub label: Option<String>,
    #[arg(long = "field-mT", default_value_t = 4.5)]
    #[serde(rename = "field_mT")]
    pub field_mt: f64,
    #[arg(long = "temp-K", default_value_t = 365.0)]
    #[serde(rename = "temp_K")]
    pub temp_k: f64,
    #[arg(long = "length-cm", default_value_t = 10.0)]
    pub length_cm: f64,
    #[arg(long, default_value_t = DEFAULT_EXTINCTION)]
    pub extinction: f64,
    /// Extra broadband pair leakage past the blocking cell.
    #[arg(long, default_value_t = 0.0)]
    pub leakage: f64,
    /// Degenerate mode detuning; the filter peak when absent.
    #[arg(long = "degenerate-GHz")]
    #[serde(rename = "degenerate_GHz")]
    pub degenerate_ghz: Option<f64>,
    #[arg(long = "span-GHz", default_value_t = 280.0)]
    #[serde(rename = "span_GHz")]
    pub span_ghz: f64,
    #[arg(long = "step-MHz", default_value_t = 2.0)]
    #[serde(rename = "step_MHz")]
    pub step_mhz: f64,
}

#[derive(Serialize)]
struct CombRow {
    index: i64,
    frequency_hz: f64,
    source_weight: f64,
    transmission: f64,
    pair_weight: f64,
    blocked_pair_weight: f64,
}

#[derive(Serialize)]
struct PurityJson<'a> {
    #[serde(rename = "P_S")]
    spectral_purity: f64,
    degenerate_fraction: f64,
    in_band_degenerate_share: f64,
    filtered_pairs: f64,
    blocked_cell_pairs: f64,
    degenerate_detuning_hz: f64,
    modes_each_side: usize,
    per_mode_table: &'a [CombRow],
}

impl PurityArgs {
    fn inputs(&self, atoms: &AtomData) -> CliResult<(VaporCellConfig, PolarizerPair, FrequencyGrid)> {
        require((0.0..1.0).contains(&self.leakage), "leakage", "must lie in [0, 1)")?;
        let cell = VaporCellConfig::natural(atoms, self.length_cm * 1e-2, self.temp_k);
        cell.validate(atoms)?;
        let pol = PolarizerPair::crossed(self.extinction);
        pol.validate()?;
        let grid = d1_grid(atoms, self.span_ghz, self.step_mhz)?;
        if let Some(d) = self.degenerate_ghz {
            require(grid.contains(d * 1e9), "degenerate_GHz", "must lie inside the grid")?;
        }
        CavityConfig::type_i(atoms.d1_centroid_hz()).validate()?;
        Ok((cell, pol, grid))
    }
}

impl Block for PurityArgs {
    const KIND: &'static str = "purity";

    fn label(&self) -> Option<&str> {
        self.label.as_deref()
    }

    fn validate(&self, ctx: &Context) -> CliResult<()> {
        self.inputs(&ctx.atoms).map(|_| ())
    }

    fn run(&self, ctx: &Context, out: &mut Artifacts) -> CliResult<()> {
        let atoms = &ctx.atoms;
        let (cell, pol, grid) = self.inputs(atoms)?;
        let filter = fadof_spectrum(atoms, &cell, self.field_mt * 1e-3, &pol, &grid)?;
        let degenerate = self.degenerate_ghz.map_or_else(|| filter.peak_detuning(), |d| d * 1e9);
        let comb = mode_comb(&CavityConfig::type_i(atoms.d1_centroid_hz() + degenerate))?;
        let pass = filtered_pair_rate(&comb, &filter)?;
        let hot = FilterSpectrum {
            transmission: blocking_cell_transmission(atoms, &VaporCellConfig::hot_blocking(atoms), &grid)?,
            grid,
            transfer: None,
        };
        let report = spectral_purity(&pass, &comb, &hot, self.leakage)?;
        let rows: Vec<CombRow> = report
            .per_mode
            .iter()
            .filter_map(|r| {
                pass.mode(r.index).map(|m| CombRow {
                    index: r.index,
                    frequency_hz: r.frequency_hz,
                    source_weight: m.weight,
                    transmission: m.transmission,
                    pair_weight: r.pair_weight,
                    blocked_pair_weight: r.blocked_pair_weight,
                })
            })
            .collect();
        let stem = self.stem();
        out.write_table(&format!("{stem}_comb"), &rows, |buf| write_rows(&rows, buf))?;
        out.write_json(
            &format!("{stem}.json"),
            &PurityJson {
                spectral_purity: report.spectral_purity,
                degenerate_fraction: report.degenerate_fraction,
                in_band_degenerate_share: report.in_band_degenerate_share,
                filtered_pairs: report.filtered_pairs,
                blocked_cell_pairs: report.blocked_cell_pairs,
                degenerate_detuning_hz: degenerate,
                modes_each_side: comb.modes_each_side(),
                per_mode_table: &rows,
            },
        )
    }
}

/// Transmission of a magnetized cell for unpolarized probe light over a
/// grid of temperatures and fields.
#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectroscopyArgs {
    #[arg(long)]
    pub label: Option<String>,
    #[arg(long = "temps-C", value_delimiter = ',', default_values_t = [22.0, 53.0, 83.0])]
    #[serde(rename = "temps_C")]
    pub temps_c: Vec<f64>,
    #[arg(long = "fields-mT", value_delimiter = ',', default_values_t = [0.0, 12.0, 24.0, 37.0, 49.0, 58.0])]
    #[serde(rename = "fields_mT")]
    pub fields_mt: Vec<f64>,
    #[arg(long = "length-mm", default_value_t = 75.0)]
    pub length_mm: f64,
    #[arg(long, default_value_t = 0.995)]
    pub rb85_fraction: f64,
    /// Relative field drop at the cell ends.
    #[arg(long, default_value_t = 0.15)]
    pub droop: f64,
    #[arg(long = "span-GHz", default_value_t = 8.0)]
    #[serde(rename = "span_GHz")]
    pub span_ghz: f64,
    #[arg(long = "step-MHz", default_value_t = 10.0)]
    #[serde(rename = "step_MHz")]
    pub step_mhz: f64,
}

#[derive(Serialize)]
struct SpectroscopyRow {
    #[serde(rename = "temp_C")]
    temp_c: f64,
    #[serde(rename = "field_mT")]
    field_mt: f64,
    detuning_hz: f64,
    transmission: f64,
}

#[derive(Serialize)]
struct SpectroscopyJson {
    probe_detuning_hz: f64,
    rows: usize,
}

impl SpectroscopyArgs {
    fn cell(&self, atoms: &AtomData, temp_c: f64, field_mt: f64) -> VaporCellConfig {
        VaporCellConfig {
            isotope_fractions: isotope_mix(atoms, Some(self.rb85_fraction)),
            field: FieldProfile {
                droop: self.droop,
                ..FieldProfile::uniform(field_mt * 1e-3)
            },
            ..VaporCellConfig::natural(atoms, self.length_mm * 1e-3, temp_c + 273.15)
        }
    }
}

impl Block for SpectroscopyArgs {
    const KIND: &'static str = "spectroscopy";

    fn label(&self) -> Option<&str> {
        self.label.as_deref()
    }

    fn validate(&self, ctx: &Context) -> CliResult<()> {
        require(!self.temps_c.is_empty(), "temps_C", "needs at least one temperature")?;
        require(!self.fields_mt.is_empty(), "fields_mT", "needs at least one field")?;
        d1_grid(&ctx.atoms, self.span_ghz, self.step_mhz)?;
        for &t in &self.temps_c {
            for &b in &self.fields_mt {
                self.cell(&ctx.atoms, t, b).validate(&ctx.atoms)?;
            }
        }
        Ok(())
    }

    fn run(&self, ctx: &Context, out: &mut Artifacts) -> CliResult<()> {
        let grid = d1_grid(&ctx.atoms, self.span_ghz, self.step_mhz)?;
        let mut rows = Vec::new();
        for &temp_c in &self.temps_c {
            for &field_mt in &self.fields_mt {
                let cell = self.cell(&ctx.atoms, temp_c, field_mt);
                let model = VaporModel::new(ctx.atoms.clone(), cell.clone(), grid.clone())?;
                let transfer = cell_transfer(&model, &cell, DEFAULT_SLICES)?;
                rows.extend(grid.detunings().enumerate().map(|(i, detuning_hz)| SpectroscopyRow {
                    temp_c,
                    field_mt,
                    detuning_hz,
                    transmission: transfer.transmission(i),
                }));
            }
        }
        let stem = self.stem();
        out.write_table(&stem, &rows, |buf| write_rows(&rows, buf))?;
        out.write_json(
            &format!("{stem}_probe.json"),
            &SpectroscopyJson {
                probe_detuning_hz: noon_probe_detuning_hz(&ctx.atoms)?,
                rows: rows.len(),
            },
        )
    }
}

clap_default!(SpectrumArgs, FadofArgs, PurityArgs, SpectroscopyArgs);
