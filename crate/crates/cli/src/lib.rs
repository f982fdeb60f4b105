//! Command-line front end: subcommands, scenario files and presets, and
//! manifest-tracked output directories.

pub mod artifacts;
pub mod blocks;
pub mod error;
pub mod scenario;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use artifacts::TableFormat;
use blocks::noon::NoonScanArgs;
use blocks::optics::{FadofArgs, PurityArgs, SpectrumArgs};
use blocks::timing::{G2Args, ReconstructArgs};
use error::CliResult;
use scenario::{RunOptions, ScenarioConfig};

#[derive(Debug, Parser)]
#[command(
    name = "rbphoton",
    version,
    about = "Atom-resonant photon pairs, vapor filters and NooN sensing"
)]
pub struct Cli {
    /// Output directory (default `rbphoton-out/<scenario>`).
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    /// Seed for every random draw.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Encoding of tabular outputs.
    #[arg(long, global = true, value_enum)]
    pub format: Option<TableFormat>,
    /// Atomic constants TOML replacing the shipped data.
    #[arg(long, global = true)]
    pub atom_data: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Complex refractive index of a vapor cell.
    Spectrum(SpectrumArgs),
    /// Faraday filter spectrum and metrics.
    Fadof(FadofArgs),
    /// Spectral purity of the filtered type-I comb.
    Purity(PurityArgs),
    /// Coincidence histogram, envelope fit and optional event stream.
    G2(G2Args),
    /// Biphoton wave-function reconstruction.
    Reconstruct(ReconstructArgs),
    /// Faraday-rotation scan with NooN probes and Fisher information.
    NoonScan(NoonScanArgs),
    /// Scenario files and presets.
    Scenario {
        #[command(subcommand)]
        action: ScenarioAction,
    },
}

#[derive(Debug, Subcommand)]
pub enum ScenarioAction {
    /// Run a preset by name or a scenario file by path.
    Run { target: String },
    /// List the presets.
    List,
    /// Print a preset's scenario file.
    Show { preset: String },
}

impl Cli {
    fn options(&self) -> RunOptions {
        RunOptions {
            out_dir: self.out_dir.clone(),
            seed: self.seed,
            format: self.format,
            atom_data: self.atom_data.clone(),
        }
    }
}

fn single(name: &str) -> ScenarioConfig {
    ScenarioConfig {
        name: name.to_string(),
        base_dir: std::env::current_dir().unwrap_or_default(),
        ..ScenarioConfig::default()
    }
}

/// Runs the parsed command; returns the manifest path when files were written.
pub fn execute(cli: &Cli) -> CliResult<Option<PathBuf>> {
    let opts = cli.options();
    let cfg = match &cli.command {
        Command::Spectrum(a) => ScenarioConfig {
            spectrum: vec![a.clone()],
            ..single("spectrum")
        },
        Command::Fadof(a) => ScenarioConfig {
            fadof: vec![a.clone()],
            ..single("fadof")
        },
        Command::Purity(a) => ScenarioConfig {
            purity: vec![a.clone()],
            ..single("purity")
        },
        Command::G2(a) => ScenarioConfig {
            g2: vec![a.clone()],
            ..single("g2")
        },
        Command::Reconstruct(a) => ScenarioConfig {
            reconstruct: vec![a.clone()],
            ..single("reconstruct")
        },
        Command::NoonScan(a) => ScenarioConfig {
            noon_scan: vec![a.clone()],
            ..single("noon-scan")
        },
        Command::Scenario { action } => match action {
            ScenarioAction::Run { target } => scenario::load(target)?,
            ScenarioAction::List => {
                for (name, _) in scenario::PRESETS {
                    println!("{name}");
                }
                return Ok(None);
            }
            ScenarioAction::Show { preset } => {
                let text = scenario::preset(preset)
                    .ok_or_else(|| error::CliError::config("preset", format!("unknown preset `{preset}`")))?;
                print!("{text}");
                return Ok(None);
            }
        },
    };
    cfg.run(&opts).map(Some)
}
