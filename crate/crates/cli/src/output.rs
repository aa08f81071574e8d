//! Output directory handling, provenance and the run manifest.

use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::CliError;

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

/// Enough to rerun a result exactly.
#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub config_sha256: String,
    pub seed: u64,
    /// command-line overrides applied on top of the config, flag → value
    pub overrides: Vec<(String, String)>,
}

#[derive(Serialize)]
struct ManifestEntry {
    file: String,
    bytes: usize,
    sha256: String,
}

#[derive(Serialize)]
struct Manifest<'a> {
    provenance: &'a Provenance,
    outputs: Vec<ManifestEntry>,
}

/// Collects files for one run; nothing lands outside `dir`.
pub struct OutDir {
    dir: PathBuf,
    written: Vec<ManifestEntry>,
}

impl OutDir {
    pub fn create(dir: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Config(format!("--out-dir {}: {e}", dir.display())))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        debug_assert!(!name.contains(['/', '\\']) && name != "..");
        let path = self.dir.join(name);
        std::fs::write(&path, bytes).map_err(|e| CliError::Compute(format!("{}: {e}", path.display())))?;
        self.written.push(ManifestEntry {
            file: name.to_string(),
            bytes: bytes.len(),
            sha256: sha256_hex(bytes),
        });
        Ok(())
    }

    /// Pretty JSON with a trailing newline.
    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| CliError::Compute(e.to_string()))?;
        bytes.push(b'\n');
        self.write(name, &bytes)
    }

    pub fn finish(mut self, provenance: &Provenance) -> Result<PathBuf, CliError> {
        let outputs = std::mem::take(&mut self.written);
        let manifest = Manifest { provenance, outputs };
        self.write_json("manifest.json", &manifest)?;
        Ok(self.dir)
    }
}

/// JSON document with the provenance block first.
#[derive(Serialize)]
pub struct WithProvenance<'a, T: Serialize> {
    pub provenance: &'a Provenance,
    #[serde(flatten)]
    pub body: T,
}
