// SPDX-License-Identifier: Apache-2.0

//! Persistent table of calibration results.
//!
//! The table is one JSON document:
//!
//! ```json
//! { "spec_version": "1.0.0", "format_version": 1, "entries": [ { "key": {...}, "result": {...} } ] }
//! ```
//!
//! Entries are keyed by target, `n`, scheme, `alpha`, replication count,
//! seed and walk length, and kept sorted so identical content yields
//! identical bytes. Writes go to a temporary file in the same directory that
//! is then renamed over the table.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::calibration::{calibrate_with, CalibrationRequest, CalibrationResult};
use crate::error::{Error, Result};
use crate::par::Execution;

/// Version of every JSON document this crate writes.
pub const SPEC_VERSION: &str = "1.0.0";
pub const CACHE_FORMAT_VERSION: u32 = 1;
pub const CACHE_DIR_ENV: &str = "JOINTAPPROX_CACHE_DIR";
pub const CACHE_FILE_NAME: &str = "calibration.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheKey {
    pub target: String,
    pub n: usize,
    pub scheme: String,
    pub alpha: f64,
    pub replications: usize,
    pub seed: u64,
    pub walk_steps: usize,
}

impl CacheKey {
    pub fn of(req: &CalibrationRequest) -> Self {
        CacheKey {
            target: req.target.to_string(),
            n: req.n,
            scheme: req.scheme.to_string(),
            alpha: req.alpha,
            replications: req.replications,
            seed: req.master_seed,
            walk_steps: req.walk_steps,
        }
    }

    fn sort_key(&self) -> (String, usize, String, u64, usize, u64, usize) {
        (
            self.target.clone(),
            self.n,
            self.scheme.clone(),
            self.alpha.to_bits(),
            self.replications,
            self.seed,
            self.walk_steps,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub key: CacheKey,
    pub result: CalibrationResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheTable {
    pub spec_version: String,
    pub format_version: u32,
    pub entries: Vec<CacheEntry>,
}

impl Default for CacheTable {
    fn default() -> Self {
        CacheTable {
            spec_version: SPEC_VERSION.to_string(),
            format_version: CACHE_FORMAT_VERSION,
            entries: Vec::new(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct CalibrationCache {
    path: PathBuf,
}

/// `$JOINTAPPROX_CACHE_DIR`, else `$XDG_CACHE_HOME/jointapprox`, else
/// `$HOME/.cache/jointapprox`.
pub fn default_cache_dir() -> Result<PathBuf> {
    let nonempty = |k: &str| std::env::var_os(k).filter(|v| !v.is_empty());
    if let Some(dir) = nonempty(CACHE_DIR_ENV) {
        return Ok(PathBuf::from(dir));
    }
    if let Some(dir) = nonempty("XDG_CACHE_HOME") {
        return Ok(PathBuf::from(dir).join("jointapprox"));
    }
    if let Some(home) = nonempty("HOME") {
        return Ok(PathBuf::from(home).join(".cache").join("jointapprox"));
    }
    Err(Error::Io(format!(
        "no cache directory: set {CACHE_DIR_ENV}"
    )))
}

impl CalibrationCache {
    pub fn at(path: impl Into<PathBuf>) -> Self {
        CalibrationCache { path: path.into() }
    }

    pub fn in_dir(dir: impl AsRef<Path>) -> Self {
        Self::at(dir.as_ref().join(CACHE_FILE_NAME))
    }

    pub fn default_location() -> Result<Self> {
        Ok(Self::in_dir(default_cache_dir()?))
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Reads the table. A missing file or a table written under another
    /// format version reads as empty.
    pub fn load(&self) -> Result<CacheTable> {
        let text = match fs::read_to_string(&self.path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(CacheTable::default()),
            Err(e) => return Err(e.into()),
        };
        let table: CacheTable = serde_json::from_str(&text)?;
        if table.format_version != CACHE_FORMAT_VERSION {
            return Ok(CacheTable::default());
        }
        Ok(table)
    }

    pub fn get(&self, req: &CalibrationRequest) -> Result<Option<CalibrationResult>> {
        let key = CacheKey::of(req);
        Ok(self
            .load()?
            .entries
            .into_iter()
            .find(|e| e.key == key)
            .map(|e| e.result))
    }

    pub fn insert(&self, req: &CalibrationRequest, result: &CalibrationResult) -> Result<()> {
        let mut table = self.load()?;
        let key = CacheKey::of(req);
        table.entries.retain(|e| e.key != key);
        table.entries.push(CacheEntry {
            key,
            result: result.clone(),
        });
        table.entries.sort_by_key(|a| a.key.sort_key());
        self.store(&table)
    }

    fn store(&self, table: &CacheTable) -> Result<()> {
        let dir = match self.path.parent() {
            Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
            _ => PathBuf::from("."),
        };
        fs::create_dir_all(&dir)?;
        let mut tmp = tempfile::NamedTempFile::new_in(&dir)?;
        serde_json::to_writer_pretty(&mut tmp, table)?;
        tmp.write_all(b"\n")?;
        tmp.as_file().sync_all()?;
        tmp.persist(&self.path).map_err(|e| Error::Io(e.to_string()))?;
        Ok(())
    }

    /// Cached result for `req`, computing and storing it on a miss.
    pub fn get_or_calibrate(
        &self,
        req: &CalibrationRequest,
        exec: Execution,
    ) -> Result<CalibrationResult> {
        if let Some(hit) = self.get(req)? {
            return Ok(hit);
        }
        let result = calibrate_with(req, exec)?;
        self.insert(req, &result)?;
        Ok(result)
    }
}
