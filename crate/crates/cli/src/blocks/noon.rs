use std::path::PathBuf;

use clap::Args;
use rbphoton_core::noon_sensing::{
    cavity_frame_input, dominant_period, fisher_information, ideal_noon, measurement_rates, noon_fidelity,
    noon_probe_detuning_hz, sensing_scan, summarize_scan, surrogate_noon_state, visibility, write_scan_csv, Analyzer,
    Basis2, FisherOptions, FisherReport, FringeSummary, NoonFidelity, SensingSetup, TwoPhotonPolState,
    MAX_FIELD_STEP_T, MAX_SENSING_FIELD_T,
};
use serde::{Deserialize, Serialize};

use super::{clap_default, positive, require, write_rows, Block, Context};
use crate::artifacts::Artifacts;
use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StateChoice {
    /// 99%-fidelity stand-in for the measured state.
    Surrogate,
    /// `(|HH⟩ + |VV⟩)/√2`.
    Ideal,
}

fn load_state(ctx: &Context, choice: StateChoice, file: Option<&PathBuf>) -> CliResult<TwoPhotonPolState> {
    match file {
        Some(path) => {
            let path = ctx.resolve(path);
            let f = std::fs::File::open(&path).map_err(|source| CliError::Read { path, source })?;
            Ok(TwoPhotonPolState::read_json(std::io::BufReader::new(f))?)
        }
        None => Ok(match choice {
            StateChoice::Surrogate => surrogate_noon_state(),
            StateChoice::Ideal => ideal_noon(0.0),
        }),
    }
}

fn check_state_file(ctx: &Context, file: Option<&PathBuf>) -> CliResult<()> {
    match file {
        Some(path) => {
            let path = ctx.resolve(path);
            require(
                path.is_file(),
                "state_file",
                &format!("`{}` does not exist", path.display()),
            )
        }
        None => Ok(()),
    }
}

/// Density matrix, NooN fidelity and a half-wave-plate analyzer scan.
#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoonArgs {
    #[arg(long)]
    pub label: Option<String>,
    #[arg(long, value_enum, default_value = "surrogate")]
    pub state: StateChoice,
    /// Density matrix JSON in the H/V basis; overrides `state`.
    #[arg(long)]
    pub state_file: Option<PathBuf>,
    /// Quarter-wave plate before the analyzer half-wave plate.
    #[arg(long = "qwp-deg", default_value_t = 45.0)]
    #[serde(rename = "qwp_deg")]
    pub qwp_deg: f64,
    #[arg(long = "step-deg", default_value_t = 1.0)]
    #[serde(rename = "step_deg")]
    pub step_deg: f64,
}

#[derive(Serialize)]
struct AnalyzerRow {
    hwp_deg: f64,
    singles_h: f64,
    singles_v: f64,
    coincidence_hh: f64,
    coincidence_hv: f64,
    coincidence_vv: f64,
}

#[derive(Serialize)]
struct NoonReport {
    #[serde(flatten)]
    fidelity: NoonFidelity,
    coincidence_period_deg: f64,
    coincidence_visibility: f64,
    /// Singles period of a |HH⟩ reference through the bare half-wave plate.
    reference_singles_period_deg: f64,
}

fn analyzer_scan(rho: &TwoPhotonPolState, qwp_rad: Option<f64>, angles_deg: &[f64]) -> Vec<AnalyzerRow> {
    angles_deg
        .iter()
        .map(|&hwp_deg| {
            let r = measurement_rates(
                rho,
                &Analyzer {
                    qwp_axis_rad: qwp_rad,
                    hwp_axis_rad: hwp_deg.to_radians(),
                },
            );
            AnalyzerRow {
                hwp_deg,
                singles_h: r.singles_h,
                singles_v: r.singles_v,
                coincidence_hh: r.coincidence_hh,
                coincidence_hv: r.coincidence_hv,
                coincidence_vv: r.coincidence_vv,
            }
        })
        .collect()
}

impl Block for NoonArgs {
    const KIND: &'static str = "noon";

    fn label(&self) -> Option<&str> {
        self.label.as_deref()
    }

    fn validate(&self, ctx: &Context) -> CliResult<()> {
        require(self.qwp_deg.is_finite(), "qwp_deg", "must be finite")?;
        positive(self.step_deg, "step_deg")?;
        require(
            180.0 / self.step_deg >= 8.0,
            "step_deg",
            "need at least 8 samples over 180 deg",
        )?;
        check_state_file(ctx, self.state_file.as_ref())
    }

    fn run(&self, ctx: &Context, out: &mut Artifacts) -> CliResult<()> {
        let rho = load_state(ctx, self.state, self.state_file.as_ref())?;
        let n = (180.0 / self.step_deg).round() as usize;
        let angles: Vec<f64> = (0..n).map(|k| k as f64 * 180.0 / n as f64).collect();
        let span = std::f64::consts::PI;
        let rows = analyzer_scan(&rho, Some(self.qwp_deg.to_radians()), &angles);
        let hh: Vec<f64> = rows.iter().map(|r| r.coincidence_hh).collect();
        let reference = analyzer_scan(&TwoPhotonPolState::product(Basis2::H, Basis2::H), None, &angles);
        let ref_singles: Vec<f64> = reference.iter().map(|r| r.singles_h).collect();
        let report = NoonReport {
            fidelity: noon_fidelity(&rho)?,
            coincidence_period_deg: dominant_period(&hh, span)?.to_degrees(),
            coincidence_visibility: visibility(&hh),
            reference_singles_period_deg: dominant_period(&ref_singles, span)?.to_degrees(),
        };
        let stem = self.stem();
        let mut matrix = Vec::new();
        rho.write_json(&mut matrix)?;
        matrix.push(b'\n');
        out.write(&format!("{stem}_density_matrix.json"), &matrix)?;
        out.write_table(&format!("{stem}_analyzer_scan"), &rows, |buf| write_rows(&rows, buf))?;
        out.write_table(&format!("{stem}_reference_scan"), &reference, |buf| {
            write_rows(&reference, buf)
        })?;
        out.write_json(&format!("{stem}_report.json"), &report)
    }
}

/// Faraday-rotation scan of the NooN probe through the enriched cell.
#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoonScanArgs {
    #[arg(long)]
    pub label: Option<String>,
    #[arg(long = "b-max-mT", default_value_t = 50.0)]
    #[serde(rename = "b_max_mT")]
    pub b_max_mt: f64,
    #[arg(long = "b-step-mT", default_value_t = 0.5)]
    #[serde(rename = "b_step_mT")]
    pub b_step_mt: f64,
    #[arg(long = "cell-temp-C", default_value_t = 70.0)]
    #[serde(rename = "cell_temp_C")]
    pub cell_temp_c: f64,
    #[arg(long = "length-mm", default_value_t = 75.0)]
    pub length_mm: f64,
    /// Probe detuning from the D1 centroid; the 87Rb F=2 to F'=1 line when absent.
    #[arg(long = "detuning-GHz", allow_negative_numbers = true)]
    #[serde(rename = "detuning_GHz")]
    pub detuning_ghz: Option<f64>,
    /// Input NooN state in the H/V basis before the cavity-frame wave plate.
    #[arg(long, value_enum, default_value = "surrogate")]
    pub state: StateChoice,
    #[arg(long)]
    pub state_file: Option<PathBuf>,
    /// Weight moved to |HH⟩ in the cavity frame.
    #[arg(long, default_value_t = 0.02)]
    pub imbalance: f64,
    #[arg(long, default_value_t = 1.0)]
    pub detection_efficiency: f64,
    /// Field for the Fisher information; the best FI/SQL in [30, 50] mT when absent.
    #[arg(long = "fisher-at-mT")]
    #[serde(rename = "fisher_at_mT")]
    pub fisher_at_mt: Option<f64>,
}

#[derive(Serialize)]
struct ScanReport {
    probe_detuning_hz: f64,
    fringes: FringeSummary,
    #[serde(rename = "fisher_at_mT")]
    fisher_at_mt: f64,
    fisher: FisherReport,
}

impl NoonScanArgs {
    fn setup(&self, ctx: &Context) -> CliResult<(SensingSetup, Vec<f64>)> {
        positive(self.b_step_mt, "b_step_mT")?;
        require(
            self.b_max_mt >= 0.0 && self.b_max_mt * 1e-3 <= MAX_SENSING_FIELD_T + 1e-12,
            "b_max_mT",
            &format!("must lie in [0, {}]", MAX_SENSING_FIELD_T * 1e3),
        )?;
        require(
            self.b_step_mt * 1e-3 <= MAX_FIELD_STEP_T + 1e-15,
            "b_step_mT",
            &format!("Fisher derivatives need at most {} mT", MAX_FIELD_STEP_T * 1e3),
        )?;
        require((0.0..=1.0).contains(&self.imbalance), "imbalance", "must lie in [0, 1]")?;
        let mut setup = SensingSetup::enriched_cell(&ctx.atoms)?;
        setup.cell.length_m = self.length_mm * 1e-3;
        setup.cell.temperature_k = self.cell_temp_c + 273.15;
        setup.detection_efficiency = self.detection_efficiency;
        setup.probe_detuning_hz = match self.detuning_ghz {
            Some(d) => d * 1e9,
            None => noon_probe_detuning_hz(&ctx.atoms)?,
        };
        setup.validate(&ctx.atoms)?;
        check_state_file(ctx, self.state_file.as_ref())?;
        let n = (self.b_max_mt / self.b_step_mt + 1e-9).floor() as usize;
        let fields: Vec<f64> = (0..=n)
            .map(|k| (k as f64 * self.b_step_mt).min(self.b_max_mt) * 1e-3)
            .collect();
        require(fields.len() >= 5, "b_max_mT", "scan needs at least five fields")?;
        if let Some(at) = self.fisher_at_mt {
            require(
                fields.iter().any(|&b| (b - at * 1e-3).abs() < 1e-12),
                "fisher_at_mT",
                "must be one of the scanned fields",
            )?;
        }
        Ok((setup, fields))
    }
}

impl Block for NoonScanArgs {
    const KIND: &'static str = "noon_scan";

    fn label(&self) -> Option<&str> {
        self.label.as_deref()
    }

    fn validate(&self, ctx: &Context) -> CliResult<()> {
        self.setup(ctx).map(|_| ())
    }

    fn run(&self, ctx: &Context, out: &mut Artifacts) -> CliResult<()> {
        let (setup, fields) = self.setup(ctx)?;
        let hv_noon = load_state(ctx, self.state, self.state_file.as_ref())?;
        let rho = cavity_frame_input(&hv_noon, self.imbalance)?;
        let scan = sensing_scan(&ctx.atoms, &setup, &rho, &fields)?;
        let options = FisherOptions {
            analyzer: setup.analyzer,
            detection_efficiency: setup.detection_efficiency,
            max_step: Some(MAX_FIELD_STEP_T),
        };
        let fisher = match self.fisher_at_mt {
            Some(at) => fisher_information(&scan, at * 1e-3, &rho, &options)?,
            None => best_ratio(&scan, &rho, &options)?,
        };
        let stem = self.stem();
        out.write_table(&format!("{stem}_scan"), &scan, |buf| write_scan_csv(&scan, buf))?;
        out.write_json(
            &format!("{stem}_fisher.json"),
            &ScanReport {
                probe_detuning_hz: setup.probe_detuning_hz,
                fringes: summarize_scan(&scan)?,
                fisher_at_mt: fisher.parameter * 1e3,
                fisher,
            },
        )
    }
}

/// Fisher report at the scanned field in [30, 50] mT with the largest FI/SQL.
pub fn best_ratio(
    scan: &[rbphoton_core::noon_sensing::SensingScanPoint],
    rho: &TwoPhotonPolState,
    options: &FisherOptions,
) -> CliResult<FisherReport> {
    let candidates: Vec<f64> = scan
        .iter()
        .map(|p| p.field_t)
        .filter(|b| (30e-3 - 1e-12..=50e-3 + 1e-12).contains(b))
        .collect();
    let mut best: Option<FisherReport> = None;
    for b in candidates {
        match fisher_information(scan, b, rho, options) {
            Ok(r) if best.is_none_or(|x| r.ratio > x.ratio) => best = Some(r),
            Ok(_) | Err(rbphoton_core::Error::Coverage(_)) => {}
            Err(e) => return Err(e.into()),
        }
    }
    best.ok_or_else(|| {
        rbphoton_core::Error::Coverage("no scanned field in [30, 50] mT has a full stencil".into()).into()
    })
}

clap_default!(NoonArgs, NoonScanArgs);
