use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::CliError;

/// 17 significant digits, locale-free.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Artifact {
    pub path: String,
    pub bytes: usize,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub config: String,
    pub out: String,
    pub artifacts: Vec<Artifact>,
}

/// Writes files under one output directory and records their checksums.
pub struct OutputDir {
    root: PathBuf,
    artifacts: Vec<Artifact>,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(root).map_err(|e| CliError::io(root, e))?;
        Ok(Self {
            root: root.to_path_buf(),
            artifacts: Vec::new(),
        })
    }

    pub fn write(&mut self, name: &str, contents: &[u8]) -> Result<(), CliError> {
        let path = self.root.join(name);
        fs::write(&path, contents).map_err(|e| CliError::io(&path, e))?;
        self.artifacts.push(Artifact {
            path: name.to_string(),
            bytes: contents.len(),
            sha256: hex::encode(Sha256::digest(contents)),
        });
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value).expect("report types serialize");
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    pub fn write_csv(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<(), CliError> {
        let mut text = header.join(",");
        text.push_str("\r\n");
        for row in rows {
            text.push_str(&row.join(","));
            text.push_str("\r\n");
        }
        self.write(name, text.as_bytes())
    }

    /// Writes `manifest.json` listing everything written so far.
    pub fn finish(mut self, subcommand: &str, config: &Path) -> Result<RunManifest, CliError> {
        let manifest = RunManifest {
            subcommand: subcommand.to_string(),
            config: config.display().to_string(),
            out: self.root.display().to_string(),
            artifacts: std::mem::take(&mut self.artifacts),
        };
        let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        text.push('\n');
        let path = self.root.join("manifest.json");
        fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
        Ok(manifest)
    }
}
