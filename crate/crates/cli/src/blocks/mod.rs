//! Parameter blocks shared by the subcommands and scenario files. Each block
//! parses from flags or from a config section, validates without computing,
//! and then writes its artifacts.

use std::path::{Path, PathBuf};

use clap::Parser;
use rbphoton_core::atomic_structure::AtomData;
use rbphoton_core::Error as ModelError;

use crate::artifacts::Artifacts;
use crate::error::{CliError, CliResult};

pub mod noon;
pub mod optics;
pub mod timing;

#[derive(Debug)]
pub struct Context {
    pub atoms: AtomData,
    pub seed: u64,
    /// Relative input paths resolve against this directory.
    pub base_dir: PathBuf,
}

impl Context {
    pub fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.base_dir.join(path)
        }
    }
}

pub trait Block {
    const KIND: &'static str;

    fn label(&self) -> Option<&str>;

    /// Builds and checks the model inputs without running anything expensive.
    fn validate(&self, ctx: &Context) -> CliResult<()>;

    fn run(&self, ctx: &Context, out: &mut Artifacts) -> CliResult<()>;

    fn stem(&self) -> String {
        self.label().unwrap_or(Self::KIND).to_string()
    }
}

#[derive(Parser)]
struct Defaults<T: clap::Args> {
    #[command(flatten)]
    inner: T,
}

/// The block with every flag at its default value.
pub fn clap_defaults<T: clap::Args>() -> T {
    Defaults::<T>::parse_from(["rbphoton"]).inner
}

/// Prefixes configuration error paths with the block location.
pub fn within(path: &str) -> impl Fn(CliError) -> CliError + '_ {
    move |e| match e {
        CliError::Model(ModelError::Config { field, reason }) => CliError::Model(ModelError::Config {
            field: format!("{path}.{field}"),
            reason,
        }),
        other => other,
    }
}

pub fn require(ok: bool, field: &str, reason: &str) -> CliResult<()> {
    if ok {
        Ok(())
    } else {
        Err(CliError::config(field, reason))
    }
}

pub fn positive(value: f64, field: &str) -> CliResult<()> {
    require(value > 0.0 && value.is_finite(), field, "must be positive")
}

pub fn write_rows<T: serde::Serialize>(rows: &[T], buf: &mut Vec<u8>) -> rbphoton_core::Result<()> {
    let err = |e: csv::Error| ModelError::Numeric(format!("csv write: {e}"));
    let mut w = csv::Writer::from_writer(buf);
    for row in rows {
        w.serialize(row).map_err(err)?;
    }
    w.flush().map_err(|e| ModelError::Numeric(format!("csv write: {e}")))
}

macro_rules! clap_default {
    ($($ty:ty),*) => {
        $(impl Default for $ty {
            fn default() -> Self {
                $crate::blocks::clap_defaults()
            }
        })*
    };
}
pub(crate) use clap_default;
