//! Output layout `<root>/<scenario>/<params-hash>/` and CSV rendering.

use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::config::Config;
use crate::error::{Error, Result};
use crate::scenario::{Artifacts, RunManifest};

/// First 16 hex digits of the SHA-256 of the canonical config.
pub fn params_hash(config: &Config) -> String {
    hex::encode(&Sha256::digest(config.canonical().as_bytes())[..8])
}

/// `--out`, else `TNL_OUT`, else `out`.
pub fn output_root(config: &Config) -> PathBuf {
    match &config.out {
        Some(o) => PathBuf::from(o),
        None => std::env::var_os("TNL_OUT").map_or_else(|| PathBuf::from("out"), PathBuf::from),
    }
}

/// CSV with a header row, `\n` line endings and no quoting; fields must not
/// contain commas.
pub fn csv(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut s = header.join(",");
    s.push('\n');
    for r in rows {
        s.push_str(&r.join(","));
        s.push('\n');
    }
    s
}

/// Round-trip float formatting used in every CSV.
pub fn num(v: f64) -> String {
    format!("{v:.17e}")
}

/// Write every artifact and `manifest.json` under
/// `root/<scenario>/<hash>/`; returns the written paths in order.
pub fn write_outputs(manifest: &RunManifest, artifacts: &Artifacts, root: &Path, hash: &str) -> Result<Vec<PathBuf>> {
    let dir = root.join(&manifest.scenario).join(hash);
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let mut written = Vec::new();
    for (name, bytes) in &artifacts.files {
        if name.contains("..") || name.starts_with('/') {
            return Err(Error::InvalidParameter(format!("artifact name `{name}`")));
        }
        let path = dir.join(name);
        fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }
    let path = dir.join("manifest.json");
    let json = serde_json::to_string_pretty(manifest).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    fs::write(&path, json + "\n").map_err(|e| Error::io(&path, e))?;
    written.push(path);
    Ok(written)
}
