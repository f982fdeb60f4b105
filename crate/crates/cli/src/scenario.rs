//! Scenario files: several parameter blocks run into one output directory.
//!
//! TOML is the primary encoding, JSON is accepted for files ending in
//! `.json`. Top-level keys are `name`, `seed`, `out_dir`, `atom_data` and
//! `format`; each block kind is an array of tables (`[[fadof]]`, ...) whose
//! keys match the subcommand flags with underscores.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::artifacts::{Artifacts, TableFormat};
use crate::blocks::noon::{NoonArgs, NoonScanArgs};
use crate::blocks::optics::{FadofArgs, PurityArgs, SpectroscopyArgs, SpectrumArgs};
use crate::blocks::timing::{G2Args, InterferenceArgs, ReconstructArgs};
use crate::blocks::{within, Block, Context};
use crate::error::{CliError, CliResult};

pub const PRESETS: [(&str, &str); 8] = [
    ("fig2-fadof", include_str!("../presets/fig2-fadof.toml")),
    ("fig3", include_str!("../presets/fig3.toml")),
    ("fig4-g2-comb", include_str!("../presets/fig4-g2-comb.toml")),
    ("fig5", include_str!("../presets/fig5.toml")),
    ("fig6", include_str!("../presets/fig6.toml")),
    ("fig7", include_str!("../presets/fig7.toml")),
    ("fig10", include_str!("../presets/fig10.toml")),
    ("fig11", include_str!("../presets/fig11.toml")),
];

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    #[serde(default)]
    pub atom_data: Option<PathBuf>,
    #[serde(default)]
    pub format: Option<TableFormat>,
    #[serde(default)]
    pub spectrum: Vec<SpectrumArgs>,
    #[serde(default)]
    pub fadof: Vec<FadofArgs>,
    #[serde(default)]
    pub purity: Vec<PurityArgs>,
    #[serde(default)]
    pub spectroscopy: Vec<SpectroscopyArgs>,
    #[serde(default)]
    pub g2: Vec<G2Args>,
    #[serde(default)]
    pub interference: Vec<InterferenceArgs>,
    #[serde(default)]
    pub reconstruct: Vec<ReconstructArgs>,
    #[serde(default)]
    pub noon: Vec<NoonArgs>,
    #[serde(default)]
    pub noon_scan: Vec<NoonScanArgs>,
    /// Directory that relative paths in the file resolve against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

/// Overrides given on the command line.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub out_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    pub format: Option<TableFormat>,
    pub atom_data: Option<PathBuf>,
}

pub fn preset(name: &str) -> Option<&'static str> {
    PRESETS.iter().find(|(n, _)| *n == name).map(|(_, text)| *text)
}

pub fn parse_toml(text: &str) -> CliResult<ScenarioConfig> {
    toml::from_str(text).map_err(|e| CliError::config("scenario", e.to_string().trim_end()))
}

pub fn parse_json(text: &str) -> CliResult<ScenarioConfig> {
    serde_json::from_str(text).map_err(|e| CliError::config("scenario", e.to_string()))
}

/// A preset name or a path to a scenario file.
pub fn load(target: &str) -> CliResult<ScenarioConfig> {
    if let Some(text) = preset(target) {
        let mut cfg = parse_toml(text)?;
        cfg.base_dir = std::env::current_dir().unwrap_or_default();
        return Ok(cfg);
    }
    let path = Path::new(target);
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    let mut cfg = match path.extension().and_then(|e| e.to_str()) {
        Some("json") => parse_json(&text)?,
        _ => parse_toml(&text)?,
    };
    cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok(cfg)
}

fn check_blocks<B: Block>(blocks: &[B], ctx: &Context, stems: &mut BTreeSet<String>) -> CliResult<()> {
    for (i, block) in blocks.iter().enumerate() {
        let path = format!("{}[{i}]", B::KIND);
        if !stems.insert(block.stem()) {
            return Err(CliError::config(
                format!("{path}.label"),
                format!("`{}` is already used; give each block a distinct label", block.stem()),
            ));
        }
        block.validate(ctx).map_err(within(&path))?;
    }
    Ok(())
}

fn run_blocks<B: Block>(blocks: &[B], ctx: &Context, out: &mut Artifacts) -> CliResult<()> {
    blocks.iter().try_for_each(|b| b.run(ctx, out))
}

impl ScenarioConfig {
    pub fn block_count(&self) -> usize {
        self.spectrum.len()
            + self.fadof.len()
            + self.purity.len()
            + self.spectroscopy.len()
            + self.g2.len()
            + self.interference.len()
            + self.reconstruct.len()
            + self.noon.len()
            + self.noon_scan.len()
    }

    /// Loads atom data and checks every block; nothing is computed.
    pub fn prepare(&self, opts: &RunOptions) -> CliResult<Context> {
        if self.name.trim().is_empty() {
            return Err(CliError::config("name", "must not be empty"));
        }
        if self.block_count() == 0 {
            return Err(CliError::config("scenario", "no parameter blocks to run"));
        }
        let atoms = match opts
            .atom_data
            .clone()
            .or_else(|| self.atom_data.as_ref().map(|p| self.base_dir.join(p)))
        {
            Some(path) => {
                if !path.is_file() {
                    return Err(CliError::config(
                        "atom_data",
                        format!("`{}` does not exist", path.display()),
                    ));
                }
                rbphoton_core::atomic_structure::AtomData::from_path(&path)
                    .map_err(|e| within("atom_data")(e.into()))?
            }
            None => rbphoton_core::atomic_structure::AtomData::shipped(),
        };
        let ctx = Context {
            atoms,
            seed: opts.seed.or(self.seed).unwrap_or(0),
            base_dir: self.base_dir.clone(),
        };
        let mut stems = BTreeSet::new();
        check_blocks(&self.spectrum, &ctx, &mut stems)?;
        check_blocks(&self.fadof, &ctx, &mut stems)?;
        check_blocks(&self.purity, &ctx, &mut stems)?;
        check_blocks(&self.spectroscopy, &ctx, &mut stems)?;
        check_blocks(&self.g2, &ctx, &mut stems)?;
        check_blocks(&self.interference, &ctx, &mut stems)?;
        check_blocks(&self.reconstruct, &ctx, &mut stems)?;
        check_blocks(&self.noon, &ctx, &mut stems)?;
        check_blocks(&self.noon_scan, &ctx, &mut stems)?;
        Ok(ctx)
    }

    /// Validates, runs every block and writes the manifest; returns its path.
    pub fn run(&self, opts: &RunOptions) -> CliResult<PathBuf> {
        let ctx = self.prepare(opts)?;
        let dir = opts
            .out_dir
            .clone()
            .or_else(|| self.out_dir.as_ref().map(|p| self.base_dir.join(p)))
            .unwrap_or_else(|| PathBuf::from("rbphoton-out").join(&self.name));
        let format = opts.format.or(self.format).unwrap_or_default();
        let mut out = Artifacts::create(&dir, format)?;
        run_blocks(&self.spectrum, &ctx, &mut out)?;
        run_blocks(&self.fadof, &ctx, &mut out)?;
        run_blocks(&self.purity, &ctx, &mut out)?;
        run_blocks(&self.spectroscopy, &ctx, &mut out)?;
        run_blocks(&self.g2, &ctx, &mut out)?;
        run_blocks(&self.interference, &ctx, &mut out)?;
        run_blocks(&self.reconstruct, &ctx, &mut out)?;
        run_blocks(&self.noon, &ctx, &mut out)?;
        run_blocks(&self.noon_scan, &ctx, &mut out)?;
        out.finish(&self.name, ctx.seed)
    }
}
