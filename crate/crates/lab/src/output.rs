//! Output directory, artifact hashes and the run manifest.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{LabError, LabResult};
use crate::formats::Table;

pub const MANIFEST_FILE: &str = "manifest.json";

/// Encoding of tabular artifacts. Reports are always JSON.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Artifact {
    pub file: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub subcommand: String,
    pub seed: u64,
    pub format: Format,
    /// The configuration with every default filled in.
    pub config: serde_json::Value,
    pub artifacts: Vec<Artifact>,
}

impl Manifest {
    pub fn load(path: &Path) -> LabResult<Self> {
        let text = fs::read_to_string(path).map_err(|e| LabError::io(path, e))?;
        let de = &mut serde_json::Deserializer::from_str(&text);
        serde_path_to_error::deserialize(de).map_err(|e| LabError::Config {
            path: e.path().to_string(),
            message: e.into_inner().to_string(),
        })
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Collects the artifacts of one run.
#[derive(Debug)]
pub struct Output {
    dir: PathBuf,
    format: Format,
    artifacts: Vec<Artifact>,
}

impl Output {
    pub fn create(dir: &Path, format: Format) -> LabResult<Self> {
        fs::create_dir_all(dir).map_err(|e| LabError::io(dir, e))?;
        Ok(Output {
            dir: dir.to_path_buf(),
            format,
            artifacts: Vec::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn artifacts(&self) -> &[Artifact] {
        &self.artifacts
    }

    /// Writes `stem.csv` or `stem.json` depending on the format.
    pub fn table(&mut self, stem: &str, table: &Table) -> LabResult<()> {
        match self.format {
            Format::Csv => self.write(&format!("{stem}.csv"), &table.to_csv()),
            Format::Json => self.write(&format!("{stem}.json"), &table.to_json()),
        }
    }

    /// Writes `stem.json`.
    pub fn report<T: Serialize>(&mut self, stem: &str, value: &T) -> LabResult<()> {
        let mut bytes = serde_json::to_vec_pretty(value)
            .map_err(|e| LabError::format(self.dir.join(stem), e))?;
        bytes.push(b'\n');
        self.write(&format!("{stem}.json"), &bytes)
    }

    fn write(&mut self, file: &str, bytes: &[u8]) -> LabResult<()> {
        let path = self.dir.join(file);
        fs::write(&path, bytes).map_err(|e| LabError::io(&path, e))?;
        self.artifacts.retain(|a| a.file != file);
        self.artifacts.push(Artifact {
            file: file.to_string(),
            sha256: sha256_hex(bytes),
            bytes: bytes.len() as u64,
        });
        Ok(())
    }

    /// Writes the manifest and returns it.
    pub fn finish(
        self,
        subcommand: &str,
        seed: u64,
        config: serde_json::Value,
    ) -> LabResult<Manifest> {
        let manifest = Manifest {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            subcommand: subcommand.to_string(),
            seed,
            format: self.format,
            config,
            artifacts: self.artifacts,
        };
        let path = self.dir.join(MANIFEST_FILE);
        let mut bytes =
            serde_json::to_vec_pretty(&manifest).map_err(|e| LabError::format(&path, e))?;
        bytes.push(b'\n');
        fs::write(&path, bytes).map_err(|e| LabError::io(&path, e))?;
        Ok(manifest)
    }
}
