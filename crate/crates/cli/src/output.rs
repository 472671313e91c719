use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Artifact {
    pub path: String,
    pub stage: String,
    pub sha256: String,
    pub bytes: usize,
}

/// Every file goes through here so it is hashed into the manifest.
pub struct OutputDir {
    root: PathBuf,
    artifacts: Vec<Artifact>,
}

impl OutputDir {
    /// Create the directory and prove it is writable.
    pub fn create(root: &Path) -> Result<Self, CliError> {
        let fail = |e: std::io::Error| CliError::usage(format!("output directory {} is not writable: {e}", root.display()));
        fs::create_dir_all(root).map_err(fail)?;
        let probe = root.join(".coast_write_probe");
        fs::write(&probe, b"").map_err(fail)?;
        fs::remove_file(&probe).map_err(fail)?;
        Ok(OutputDir { root: root.to_path_buf(), artifacts: Vec::new() })
    }

    pub fn artifacts(&self) -> &[Artifact] {
        &self.artifacts
    }

    pub fn write_bytes(&mut self, rel: &str, stage: &str, data: &[u8]) -> Result<(), CliError> {
        let path = self.root.join(rel);
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(|e| CliError::internal(format!("{}: {e}", dir.display())))?;
        }
        fs::write(&path, data).map_err(|e| CliError::internal(format!("{}: {e}", path.display())))?;
        let sha256 = format!("{:x}", Sha256::digest(data));
        let art = Artifact { path: rel.to_string(), stage: stage.to_string(), sha256, bytes: data.len() };
        match self.artifacts.iter_mut().find(|a| a.path == rel) {
            Some(a) => *a = art,
            None => self.artifacts.push(art),
        }
        Ok(())
    }

    pub fn write_text(&mut self, rel: &str, stage: &str, text: &str) -> Result<(), CliError> {
        self.write_bytes(rel, stage, text.as_bytes())
    }

    pub fn write_json<T: Serialize>(&mut self, rel: &str, stage: &str, value: &T) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::internal(format!("serializing {rel}: {e}")))?;
        text.push('\n');
        self.write_text(rel, stage, &text)
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct SeedStream {
    pub stage: &'static str,
    pub stream: &'static str,
}

#[derive(Debug, Serialize)]
pub struct Manifest<'a> {
    pub schema_version: u32,
    pub tool_version: &'static str,
    pub command: &'a str,
    pub status: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failed_stage: Option<&'a str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub master_seed: u64,
    /// Stream labels each stage derives its generator from.
    pub seed_streams: Vec<SeedStream>,
    pub config: &'a crate::config::RunConfig,
    pub artifacts: &'a [Artifact],
}
