use std::path::{Path, PathBuf};

use anyhow::Result;
use serde::Serialize;

use iest::checkpoint::file_digest;

#[derive(Debug, Clone, Serialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

impl FileDigest {
    pub fn of(path: &Path) -> Result<Self> {
        Ok(FileDigest {
            path: path.display().to_string(),
            sha256: file_digest(path)?,
        })
    }
}

/// Provenance of one command run: what went in, what came out.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub seeds: Vec<u64>,
    /// Rendered `key = value` configuration, when the command has one.
    pub config: Option<String>,
    pub inputs: Vec<FileDigest>,
    pub artifacts: Vec<FileDigest>,
}

impl RunManifest {
    pub fn new(command: &str) -> Self {
        RunManifest {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command: command.to_string(),
            seeds: Vec::new(),
            config: None,
            inputs: Vec::new(),
            artifacts: Vec::new(),
        }
    }

    pub fn input(&mut self, path: &Path) -> Result<&mut Self> {
        self.inputs.push(FileDigest::of(path)?);
        Ok(self)
    }

    pub fn artifact(&mut self, path: &Path) -> Result<&mut Self> {
        self.artifacts.push(FileDigest::of(path)?);
        Ok(self)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        std::fs::write(path, s)?;
        Ok(())
    }
}

/// `<path>.manifest.json`, or `manifest.json` inside a directory.
pub fn manifest_path(out: &Path) -> PathBuf {
    if out.is_dir() {
        out.join("manifest.json")
    } else {
        let mut s = out.as_os_str().to_owned();
        s.push(".manifest.json");
        s.into()
    }
}
