use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use podrom::Result;
use serde::Serialize;
use sha2::{Digest, Sha256};

pub const MANIFEST_NAME: &str = "manifest.toml";

#[derive(Debug, Serialize)]
pub struct FileEntry {
    pub path: PathBuf,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct Timing {
    pub stage: String,
    pub seconds: f64,
}

/// Provenance written next to every command's outputs.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub tool_version: String,
    pub seed: Option<u64>,
    pub config_path: Option<PathBuf>,
    pub config_sha256: Option<String>,
    pub inputs: Vec<FileEntry>,
    pub outputs: Vec<FileEntry>,
    pub timings: Vec<Timing>,
    #[serde(skip)]
    clock: Option<(String, Instant)>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn entry(path: &Path) -> Result<FileEntry> {
    Ok(FileEntry {
        path: path.to_path_buf(),
        sha256: sha256_hex(&fs::read(path)?),
    })
}

impl RunManifest {
    pub fn new(command: &str, config_path: Option<&Path>, config_bytes: &[u8], seed: Option<u64>) -> Self {
        RunManifest {
            command: command.to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            config_path: config_path.map(Path::to_path_buf),
            config_sha256: config_path.map(|_| sha256_hex(config_bytes)),
            inputs: Vec::new(),
            outputs: Vec::new(),
            timings: Vec::new(),
            clock: None,
        }
    }

    pub fn input(&mut self, path: &Path) -> Result<()> {
        self.inputs.push(entry(path)?);
        Ok(())
    }

    pub fn output(&mut self, path: &Path) -> Result<()> {
        self.outputs.push(entry(path)?);
        Ok(())
    }

    /// Closes the running stage, if any, and starts timing `stage`.
    pub fn stage(&mut self, stage: &str) {
        self.finish_stage();
        self.clock = Some((stage.to_string(), Instant::now()));
    }

    fn finish_stage(&mut self) {
        if let Some((stage, start)) = self.clock.take() {
            self.timings.push(Timing {
                stage,
                seconds: start.elapsed().as_secs_f64(),
            });
        }
    }

    pub fn write(mut self, dir: &Path) -> Result<()> {
        self.finish_stage();
        let text = toml::to_string(&self).map_err(|e| podrom::RomError::Format(e.to_string()))?;
        fs::write(dir.join(MANIFEST_NAME), text)?;
        Ok(())
    }
}
