//! Output directory, atomic file writes and the run manifest.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::Serialize;

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "CHIRAL_OUT_DIR";

/// Directory used by `simulate` and `mirror-check` when neither `--out` nor
/// the environment variable is set.
pub const FALLBACK_OUT_DIR: &str = "chiral-out";

/// `--out` if given, otherwise the environment variable.
pub fn out_dir(flag: Option<&Path>) -> Option<PathBuf> {
    flag.map(Path::to_path_buf)
        .or_else(|| std::env::var_os(OUT_DIR_ENV).filter(|s| !s.is_empty()).map(PathBuf::from))
}

/// Record written next to the outputs of every run.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub parameters: BTreeMap<String, serde_json::Value>,
    pub seed: u64,
    pub artifact_version: String,
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn new(command: &str, parameters: &impl Serialize, seed: u64) -> anyhow::Result<Self> {
        let parameters = match serde_json::to_value(parameters)? {
            serde_json::Value::Object(map) => map.into_iter().filter(|(_, v)| !v.is_null()).collect(),
            other => BTreeMap::from([("value".to_string(), other)]),
        };
        Ok(Self {
            command: command.to_string(),
            parameters,
            seed,
            artifact_version: env!("CARGO_PKG_VERSION").to_string(),
            outputs: Vec::new(),
        })
    }
}

/// Writes files into one directory, each through a temporary file in the
/// same directory followed by a rename.
pub struct OutputWriter {
    dir: PathBuf,
    manifest: RunManifest,
}

impl OutputWriter {
    pub fn create(dir: PathBuf, manifest: RunManifest) -> anyhow::Result<Self> {
        fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Self { dir, manifest })
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> anyhow::Result<PathBuf> {
        let path = write_atomic(&self.dir, name, bytes)?;
        self.manifest.outputs.push(name.to_string());
        Ok(path)
    }

    pub fn write_json(&mut self, name: &str, value: &impl Serialize) -> anyhow::Result<PathBuf> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    /// Writes `manifest.json` listing everything written so far.
    pub fn finish(self) -> anyhow::Result<PathBuf> {
        let mut text = serde_json::to_string_pretty(&self.manifest)?;
        text.push('\n');
        write_atomic(&self.dir, "manifest.json", text.as_bytes())
    }
}

fn write_atomic(dir: &Path, name: &str, bytes: &[u8]) -> anyhow::Result<PathBuf> {
    let target = dir.join(name);
    let mut tmp = tempfile::NamedTempFile::new_in(dir).with_context(|| format!("writing {}", target.display()))?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(&target)
        .with_context(|| format!("renaming into {}", target.display()))?;
    Ok(target)
}

/// Full double precision, 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// One CSV line of numbers.
pub fn csv_row(values: &[f64]) -> String {
    let mut line = values.iter().map(|&x| fmt_f64(x)).collect::<Vec<_>>().join(",");
    line.push('\n');
    line
}
