//! Run manifests and output-directory locking. A manifest is written
//! atomically next to every artifact and carries the fully resolved
//! configuration, seeds included, so the run can be reproduced bit for bit.

use crate::errors::CliError;
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

pub const MANIFEST_FORMAT_VERSION: u32 = 1;

#[derive(Serialize)]
pub struct OutputRecord {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Serialize)]
pub struct RunManifest<C: Serialize> {
    pub format_version: u32,
    pub command: String,
    pub config: C,
    pub inputs: Vec<String>,
    pub outputs: Vec<OutputRecord>,
    pub duration_seconds: f64,
}

pub fn sha256_file(path: &Path) -> Result<(String, u64), CliError> {
    let bytes = fs::read(path)?;
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    let digest = hasher.finalize();
    let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
    Ok((hex, bytes.len() as u64))
}

fn hash_outputs(paths: &[PathBuf]) -> Result<Vec<OutputRecord>, CliError> {
    let mut records = Vec::with_capacity(paths.len());
    for p in paths {
        if p.is_dir() {
            let mut entries: Vec<PathBuf> = fs::read_dir(p)?
                .collect::<Result<Vec<_>, _>>()?
                .into_iter()
                .map(|e| e.path())
                .filter(|e| e.is_file() && e.file_name().is_some_and(|n| n != ".sftm.lock"))
                .collect();
            entries.sort();
            for e in entries {
                let (sha256, bytes) = sha256_file(&e)?;
                records.push(OutputRecord {
                    path: e.display().to_string(),
                    sha256,
                    bytes,
                });
            }
        } else {
            let (sha256, bytes) = sha256_file(p)?;
            records.push(OutputRecord {
                path: p.display().to_string(),
                sha256,
                bytes,
            });
        }
    }
    Ok(records)
}

/// Write `<target>.manifest.json` atomically (temp file + rename).
pub fn write_manifest<C: Serialize>(
    target: &Path,
    command: &str,
    config: &C,
    inputs: &[PathBuf],
    outputs: &[PathBuf],
    started: Instant,
) -> Result<PathBuf, CliError> {
    let manifest = RunManifest {
        format_version: MANIFEST_FORMAT_VERSION,
        command: command.to_string(),
        config,
        inputs: inputs.iter().map(|p| p.display().to_string()).collect(),
        outputs: hash_outputs(outputs)?,
        duration_seconds: started.elapsed().as_secs_f64(),
    };
    let text = serde_json::to_string_pretty(&manifest)
        .map_err(|e| CliError::Io(format!("manifest serialization: {e}")))?;
    let mut name = target
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "run".into());
    name.push_str(".manifest.json");
    let path = target.with_file_name(name);
    let tmp = path.with_extension("json.tmp");
    fs::write(&tmp, text)?;
    fs::rename(&tmp, &path)?;
    Ok(path)
}

/// Exclusive lock on an output directory for the duration of a command.
pub struct OutputLock {
    path: PathBuf,
}

impl OutputLock {
    /// The lock file lives inside `dir`; a second concurrent invocation
    /// writing to the same directory fails instead of interleaving output.
    pub fn acquire(dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir)?;
        let path = dir.join(".sftm.lock");
        match fs::OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(_) => Ok(OutputLock { path }),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(CliError::Io(format!(
                "output directory {} is locked by another invocation (remove {} if stale)",
                dir.display(),
                path.display()
            ))),
            Err(e) => Err(e.into()),
        }
    }
}

impl Drop for OutputLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}
