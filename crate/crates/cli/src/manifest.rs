//! Run directories and their manifests.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::CliError;

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

/// Everything needed to reproduce a run. Contains no timestamps, so two runs
/// with the same manifest produce byte-identical directories.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub tool_version: String,
    pub seed: u64,
    pub config: BTreeMap<String, String>,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
}

pub fn sha256_file(path: &Path) -> std::io::Result<String> {
    Ok(hex::encode(Sha256::digest(fs::read(path)?)))
}

/// Output directory assembled next to its destination and renamed into
/// place on [`RunDir::commit`].
pub struct RunDir {
    target: PathBuf,
    staging: PathBuf,
    force: bool,
    outputs: BTreeMap<String, String>,
}

impl RunDir {
    pub fn create(target: &Path, force: bool) -> Result<Self, CliError> {
        if target.exists() && !force {
            return Err(CliError::OutputExists(target.to_path_buf()));
        }
        let parent = match target.parent() {
            Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
            _ => PathBuf::from("."),
        };
        fs::create_dir_all(&parent)?;
        let name = target
            .file_name()
            .ok_or_else(|| CliError::Usage(format!("--out {} has no directory name", target.display())))?
            .to_string_lossy()
            .to_string();
        let staging = parent.join(format!(".{name}.partial-{}", std::process::id()));
        if staging.exists() {
            fs::remove_dir_all(&staging)?;
        }
        fs::create_dir_all(&staging)?;
        Ok(Self {
            target: target.to_path_buf(),
            staging,
            force,
            outputs: BTreeMap::new(),
        })
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.staging.join(rel)
    }

    pub fn write(&mut self, rel: &str, bytes: &[u8]) -> Result<(), CliError> {
        let p = self.path(rel);
        if let Some(dir) = p.parent() {
            fs::create_dir_all(dir)?;
        }
        fs::write(&p, bytes)?;
        self.outputs.insert(rel.to_string(), hex::encode(Sha256::digest(bytes)));
        Ok(())
    }

    /// Writes `manifest.json` and moves the directory into place.
    pub fn commit(
        self,
        subcommand: &str,
        seed: u64,
        config: BTreeMap<String, String>,
        inputs: &[PathBuf],
    ) -> Result<RunManifest, CliError> {
        let inputs = inputs
            .iter()
            .map(|p| {
                Ok(FileDigest {
                    path: p.display().to_string(),
                    sha256: sha256_file(p)?,
                })
            })
            .collect::<std::io::Result<Vec<_>>>()?;
        let manifest = RunManifest {
            subcommand: subcommand.to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            config,
            inputs,
            outputs: self
                .outputs
                .iter()
                .map(|(path, sha256)| FileDigest {
                    path: path.clone(),
                    sha256: sha256.clone(),
                })
                .collect(),
        };
        let mut text = serde_json::to_string_pretty(&manifest).map_err(std::io::Error::other)?;
        text.push('\n');
        fs::write(self.staging.join("manifest.json"), text)?;
        if self.target.exists() {
            if !self.force {
                return Err(CliError::OutputExists(self.target.clone()));
            }
            fs::remove_dir_all(&self.target)?;
        }
        fs::rename(&self.staging, &self.target)?;
        Ok(manifest)
    }
}

impl Drop for RunDir {
    fn drop(&mut self) {
        if self.staging.exists() {
            let _ = fs::remove_dir_all(&self.staging);
        }
    }
}
