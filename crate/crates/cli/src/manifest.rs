//! Run manifests: config echo, wall time, and output digests, so a run can
//! be replayed and byte-compared.

use crate::config::RunConfig;
use crate::CliError;
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::path::Path;

#[derive(Serialize)]
pub struct OutputDigest {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Serialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub config: RunConfig,
    pub wall_time_s: f64,
    pub outputs: Vec<OutputDigest>,
}

/// Write bytes atomically: temp file in the target directory, then rename.
pub fn write_atomic(path: &str, bytes: &[u8]) -> Result<(), CliError> {
    let target = Path::new(path);
    if let Some(dir) = target.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)
                .map_err(|e| CliError::Io(format!("creating {}: {e}", dir.display())))?;
        }
    }
    let tmp = target.with_extension("tmp");
    std::fs::write(&tmp, bytes).map_err(|e| CliError::Io(format!("writing {path}: {e}")))?;
    std::fs::rename(&tmp, target).map_err(|e| CliError::Io(format!("renaming to {path}: {e}")))?;
    Ok(())
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(bytes);
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Digest the written outputs and drop a manifest next to the first one.
pub fn write_manifest(
    config: &RunConfig,
    outputs: &[String],
    wall_time_s: f64,
) -> Result<Option<String>, CliError> {
    let Some(first) = outputs.first() else {
        return Ok(None);
    };
    let digests = outputs
        .iter()
        .map(|p| {
            let bytes =
                std::fs::read(p).map_err(|e| CliError::Io(format!("digesting {p}: {e}")))?;
            Ok(OutputDigest {
                path: p.clone(),
                sha256: sha256_hex(&bytes),
                bytes: bytes.len() as u64,
            })
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let manifest = RunManifest {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        config: config.clone(),
        wall_time_s,
        outputs: digests,
    };
    let path = format!("{first}.manifest.json");
    let body = serde_json::to_string_pretty(&manifest)
        .map_err(|e| CliError::Io(e.to_string()))?;
    write_atomic(&path, body.as_bytes())?;
    Ok(Some(path))
}
