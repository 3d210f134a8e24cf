//! Run-directory manifest: everything needed to reproduce or audit a run.
//!
//! The manifest is written once before the first optimizer step (status
//! `running`) and rewritten when the run ends (status `complete` or
//! `aborted`), so a reader can always tell how far a directory got.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use kgelab::trainer::TrainConfig;

use crate::Failure;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    /// Version of the tool that produced the run.
    pub tool_version: String,
    /// `running`, `complete` or `aborted`.
    pub status: String,
    /// Root seed (duplicated from the config for quick scanning).
    pub seed: u64,
    /// Fully resolved configuration, overrides already applied.
    pub config: TrainConfig,
    /// SHA-256 of each split file, keyed `train` / `valid` / `test`.
    pub dataset_sha256: DatasetChecksums,
    /// Seconds since the Unix epoch.
    pub started_unix: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub finished_unix: Option<u64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetChecksums {
    pub train: String,
    pub valid: String,
    pub test: String,
}

pub fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

fn sha256_file(path: &Path) -> Result<String, Failure> {
    let bytes = fs::read(path)
        .map_err(|e| Failure::Data(format!("cannot read {}: {e}", path.display())))?;
    let digest = Sha256::digest(&bytes);
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

pub fn dataset_checksums(dir: &Path) -> Result<DatasetChecksums, Failure> {
    let [train, valid, test] = kgelab::data::split_paths(dir);
    Ok(DatasetChecksums {
        train: sha256_file(&train)?,
        valid: sha256_file(&valid)?,
        test: sha256_file(&test)?,
    })
}

impl RunManifest {
    pub fn path_in(run_dir: &Path) -> PathBuf {
        run_dir.join("manifest.json")
    }

    /// Serialize to `<run_dir>/manifest.json` (pretty-printed, atomic enough
    /// for a single writer).
    pub fn write(&self, run_dir: &Path) -> Result<(), Failure> {
        let path = Self::path_in(run_dir);
        let body = serde_json::to_string_pretty(self)
            .map_err(|e| Failure::Data(format!("cannot serialize manifest: {e}")))?;
        fs::write(&path, body + "\n")
            .map_err(|e| Failure::Data(format!("cannot write {}: {e}", path.display())))
    }
}
