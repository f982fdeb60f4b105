//! Output directory that remembers what it wrote, for the manifest.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum, serde::Deserialize, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TableFormat {
    #[default]
    Csv,
    Json,
}

impl TableFormat {
    pub fn extension(self) -> &'static str {
        match self {
            Self::Csv => "csv",
            Self::Json => "json",
        }
    }
}

#[derive(Debug, Serialize)]
struct ManifestEntry {
    bytes: usize,
    sha256: String,
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    scenario: &'a str,
    seed: u64,
    files: &'a BTreeMap<String, ManifestEntry>,
}

pub struct Artifacts {
    dir: PathBuf,
    pub format: TableFormat,
    files: BTreeMap<String, ManifestEntry>,
}

impl Artifacts {
    pub fn create(dir: &Path, format: TableFormat) -> CliResult<Self> {
        fs::create_dir_all(dir).map_err(|source| CliError::Write {
            path: dir.to_path_buf(),
            source,
        })?;
        Ok(Self {
            dir: dir.to_path_buf(),
            format,
            files: BTreeMap::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> CliResult<()> {
        if name == MANIFEST_NAME || self.files.contains_key(name) {
            return Err(CliError::config("output", format!("file name `{name}` used twice")));
        }
        let path = self.dir.join(name);
        fs::write(&path, bytes).map_err(|source| CliError::Write { path, source })?;
        self.files.insert(
            name.to_string(),
            ManifestEntry {
                bytes: bytes.len(),
                sha256: hex::encode(Sha256::digest(bytes)),
            },
        );
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> CliResult<()> {
        let mut bytes = serde_json::to_vec_pretty(value).map_err(|source| CliError::Serialize {
            what: name.to_string(),
            source,
        })?;
        bytes.push(b'\n');
        self.write(name, &bytes)
    }

    /// Writes `stem.csv` through `csv` or `stem.json` from `value`.
    pub fn write_table<T: Serialize>(
        &mut self,
        stem: &str,
        value: &T,
        csv: impl FnOnce(&mut Vec<u8>) -> rbphoton_core::Result<()>,
    ) -> CliResult<()> {
        match self.format {
            TableFormat::Csv => {
                let mut buf = Vec::new();
                csv(&mut buf)?;
                self.write(&format!("{stem}.csv"), &buf)
            }
            TableFormat::Json => self.write_json(&format!("{stem}.json"), value),
        }
    }

    pub fn file_names(&self) -> impl Iterator<Item = &str> {
        self.files.keys().map(String::as_str)
    }

    /// Writes `manifest.json` listing every file written so far.
    pub fn finish(self, scenario: &str, seed: u64) -> CliResult<PathBuf> {
        let manifest = Manifest {
            scenario,
            seed,
            files: &self.files,
        };
        let mut bytes = serde_json::to_vec_pretty(&manifest).map_err(|source| CliError::Serialize {
            what: MANIFEST_NAME.into(),
            source,
        })?;
        bytes.push(b'\n');
        let path = self.dir.join(MANIFEST_NAME);
        fs::write(&path, bytes).map_err(|source| CliError::Write {
            path: path.clone(),
            source,
        })?;
        Ok(path)
    }
}
