//! Artifact writing: CSV tables, JSON documents and the run manifest, all
//! written atomically.

use std::path::{Path, PathBuf};

use serde::Serialize;
use visco_core::spectral::snapshot::write_atomic;

use crate::config::RunConfig;
use crate::{CliError, CliResult};

/// Output directory that remembers what it wrote, for the manifest.
pub struct Artifacts {
    dir: PathBuf,
    written: Vec<String>,
}

impl Artifacts {
    pub fn create(dir: &Path) -> CliResult<Self> {
        std::fs::create_dir_all(dir)
            .map_err(|e| CliError::Other(format!("cannot create {}: {e}", dir.display())))?;
        Ok(Self { dir: dir.to_path_buf(), written: Vec::new() })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn put(&mut self, name: &str, bytes: &[u8]) -> CliResult<()> {
        write_atomic(&self.path(name), bytes)?;
        if !self.written.iter().any(|w| w == name) {
            self.written.push(name.to_string());
        }
        Ok(())
    }

    pub fn csv<R: Serialize>(&mut self, name: &str, rows: &[R]) -> CliResult<()> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in rows {
            w.serialize(r).map_err(|e| CliError::Other(e.to_string()))?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::Other(e.to_string()))?;
        self.put(name, &bytes)
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> CliResult<()> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Other(e.to_string()))?;
        text.push('\n');
        self.put(name, text.as_bytes())
    }

    /// Records files written by other means (snapshots).
    pub fn note(&mut self, name: String) {
        self.written.push(name);
    }

    /// Writes `manifest.json`: enough to regenerate every artifact.
    pub fn manifest(&mut self, command: &str, cfg: &RunConfig, outcome: &str) -> CliResult<()> {
        #[derive(Serialize)]
        struct Manifest<'a> {
            tool: &'static str,
            version: &'static str,
            command: &'a str,
            config_sha256: String,
            seed: u64,
            outcome: &'a str,
            artifacts: &'a [String],
            config: &'a RunConfig,
        }
        self.put("config.toml", cfg.to_toml().as_bytes())?;
        let files = self.written.clone();
        let m = Manifest {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command,
            config_sha256: cfg.hash(),
            seed: cfg.recipe.seed,
            outcome,
            artifacts: &files,
            config: cfg,
        };
        self.json("manifest.json", &m)
    }
}
