//! File layout shared by the pipeline stages.
//!
//! ```text
//! DIR/manifest.json        pool manifest (seed, channel, ids)
//! DIR/stimuli/<id>.json    one stimulus per file
//! ```

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::stimgen::{Channel, PoolConfig, StimulusPool, StimulusSpec, SCHEMA_VERSION};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const STIMULI_DIR: &str = "stimuli";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PoolManifest {
    pub schema_version: u32,
    pub seed: u64,
    pub channel: Channel,
    pub config: PoolConfig,
    pub stimuli: Vec<String>,
    pub training: Vec<String>,
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let r = BufReader::new(File::open(path)?);
    Ok(serde_json::from_reader(r)?)
}

pub fn write_jsonl<'a, T: Serialize + 'a>(path: &Path, items: impl IntoIterator<Item = &'a T>) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    let mut w = BufWriter::new(File::create(path)?);
    for item in items {
        serde_json::to_writer(&mut w, item)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

/// Read newline-delimited JSON, skipping blank lines.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let r = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for line in r.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line)?);
    }
    Ok(out)
}

pub fn stimulus_path(dir: &Path, id: &str) -> PathBuf {
    dir.join(STIMULI_DIR).join(format!("{id}.json"))
}

pub fn write_pool(dir: &Path, pool: &StimulusPool) -> Result<()> {
    fs::create_dir_all(dir.join(STIMULI_DIR))?;
    for s in pool.stimuli() {
        write_json(&stimulus_path(dir, &s.id), s)?;
    }
    let manifest = PoolManifest {
        schema_version: SCHEMA_VERSION,
        seed: pool.seed,
        channel: pool.channel,
        config: pool.config,
        stimuli: pool.stimuli().iter().map(|s| s.id.clone()).collect(),
        training: pool.training_ids().to_vec(),
    };
    write_json(&dir.join(MANIFEST_FILE), &manifest)
}

/// Resolve `dir` to the pool root: either the root itself or its `stimuli/`.
fn pool_root(dir: &Path) -> PathBuf {
    if dir.join(MANIFEST_FILE).exists() {
        return dir.to_path_buf();
    }
    match dir.parent() {
        Some(parent) if dir.file_name().is_some_and(|n| n == STIMULI_DIR) => parent.to_path_buf(),
        _ => dir.to_path_buf(),
    }
}

pub fn read_pool(dir: &Path) -> Result<StimulusPool> {
    let root = pool_root(dir);
    let manifest: PoolManifest = read_json(&root.join(MANIFEST_FILE))?;
    let stimuli = manifest
        .stimuli
        .iter()
        .map(|id| read_json(&stimulus_path(&root, id)))
        .collect::<Result<Vec<StimulusSpec>>>()?;
    StimulusPool::from_parts(manifest.seed, manifest.channel, manifest.config, stimuli, manifest.training)
}

/// Every stimulus under `dir` (pool root, its `stimuli/`, or any directory
/// of stimulus files), sorted by id.
pub fn read_stimuli(dir: &Path) -> Result<Vec<StimulusSpec>> {
    let root = pool_root(dir);
    let files_dir = if root.join(STIMULI_DIR).is_dir() { root.join(STIMULI_DIR) } else { dir.to_path_buf() };
    let mut out = Vec::new();
    for entry in fs::read_dir(&files_dir)? {
        let path = entry?.path();
        if path.extension().is_some_and(|e| e == "json") && path.file_name().is_some_and(|n| n != MANIFEST_FILE) {
            out.push(read_json::<StimulusSpec>(&path)?);
        }
    }
    if out.is_empty() {
        return Err(Error::InvalidStimulus(format!("no stimulus files in {}", files_dir.display())));
    }
    out.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pool_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = PoolConfig { per_cell: 1, controls: 1, training_per_cell: 1 };
        let pool = StimulusPool::generate(2, Channel::Size, cfg).unwrap();
        write_pool(dir.path(), &pool).unwrap();
        let back = read_pool(dir.path()).unwrap();
        assert_eq!(back.stimuli().len(), pool.stimuli().len());
        assert_eq!(back.training_ids(), pool.training_ids());
        let via_sub = read_pool(&dir.path().join(STIMULI_DIR)).unwrap();
        assert_eq!(via_sub.stimuli().len(), pool.stimuli().len());
        assert_eq!(read_stimuli(dir.path()).unwrap().len(), pool.stimuli().len());
    }
}
