// SPDX-License-Identifier: Apache-2.0

//! Run manifests. A manifest holds everything needed to repeat a run: the
//! command line, input digests, seeds and the thresholds actually used. It
//! carries no timestamps, so identical runs produce identical bytes.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

#[derive(Debug, Serialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

impl FileDigest {
    pub fn of(path: &Path) -> Result<Self> {
        let data = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
        Ok(FileDigest {
            path: path.display().to_string(),
            sha256: hex(&Sha256::digest(&data)),
            bytes: data.len() as u64,
        })
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub spec_version: &'static str,
    pub tool: &'static str,
    pub tool_version: &'static str,
    pub subcommand: &'static str,
    /// Arguments after the program name, as given.
    pub args: Vec<String>,
    pub scheme: String,
    pub seed: Option<u64>,
    pub inputs: Vec<FileDigest>,
    pub thresholds: Value,
    pub outputs: Vec<FileDigest>,
}

impl Manifest {
    pub fn new(subcommand: &'static str, scheme: String) -> Self {
        Manifest {
            spec_version: jointapprox::cache::SPEC_VERSION,
            tool: env!("CARGO_PKG_NAME"),
            tool_version: env!("CARGO_PKG_VERSION"),
            subcommand,
            args: std::env::args().skip(1).collect(),
            scheme,
            seed: None,
            inputs: Vec::new(),
            thresholds: Value::Null,
            outputs: Vec::new(),
        }
    }

    pub fn add_inputs(&mut self, paths: &[PathBuf]) -> Result<()> {
        for p in paths {
            self.inputs.push(FileDigest::of(p)?);
        }
        Ok(())
    }

    /// Digests every output, then writes `<subcommand>.manifest.json` into
    /// `dir`.
    pub fn write(mut self, dir: &Path, outputs: &[PathBuf]) -> Result<PathBuf> {
        for p in outputs {
            self.outputs.push(FileDigest::of(p)?);
        }
        let path = dir.join(format!("{}.manifest.json", self.subcommand));
        write_json(&path, &self)?;
        Ok(path)
    }
}

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}
