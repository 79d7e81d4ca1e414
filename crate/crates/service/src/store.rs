use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use wai_core::response::TrialResponse;
use wai_core::stimgen::SessionPlan;

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("log i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("log line {line}: {source}")]
    Corrupt { line: usize, source: serde_json::Error },
    #[error("storage unavailable: {0}")]
    Unavailable(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionRecord {
    pub id: String,
    pub created_at: u64,
    pub plan: SessionPlan,
}

/// One line of the log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum LogEntry {
    Session(SessionRecord),
    Response(TrialResponse),
}

/// Append-only, durable entry log.
pub trait Storage: Send + Sync {
    /// Returns only once the entry is durable.
    fn append(&self, entry: &LogEntry) -> Result<(), StoreError>;
    fn load(&self) -> Result<Vec<LogEntry>, StoreError>;
}

impl<S: Storage + ?Sized> Storage for std::sync::Arc<S> {
    fn append(&self, entry: &LogEntry) -> Result<(), StoreError> {
        (**self).append(entry)
    }
    fn load(&self) -> Result<Vec<LogEntry>, StoreError> {
        (**self).load()
    }
}

/// NDJSON file, fsynced after every append.
pub struct FileStore {
    path: PathBuf,
    file: Mutex<File>,
}

impl FileStore {
    pub fn open(path: impl AsRef<Path>) -> Result<Self, StoreError> {
        let path = path.as_ref().to_path_buf();
        if let Some(parent) = path.parent() {
            if !parent.as_os_str().is_empty() {
                std::fs::create_dir_all(parent)?;
            }
        }
        let file = OpenOptions::new().create(true).append(true).read(true).open(&path)?;
        drop_torn_tail(&path)?;
        Ok(Self { path, file: Mutex::new(file) })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}

/// Cut a partial last line left by a crash mid-append.
fn drop_torn_tail(path: &Path) -> std::io::Result<()> {
    let bytes = std::fs::read(path)?;
    if bytes.last().is_some_and(|&b| b != b'\n') {
        let keep = bytes.iter().rposition(|&b| b == b'\n').map_or(0, |i| i + 1);
        OpenOptions::new().write(true).open(path)?.set_len(keep as u64)?;
    }
    Ok(())
}

impl Storage for FileStore {
    fn append(&self, entry: &LogEntry) -> Result<(), StoreError> {
        let mut line = serde_json::to_vec(entry).expect("log entries serialize");
        line.push(b'\n');
        let mut file = self.file.lock().unwrap_or_else(|e| e.into_inner());
        file.write_all(&line)?;
        file.sync_data()?;
        Ok(())
    }

    /// A final line without its newline is a torn write and is dropped.
    fn load(&self) -> Result<Vec<LogEntry>, StoreError> {
        let _guard = self.file.lock().unwrap_or_else(|e| e.into_inner());
        let mut reader = BufReader::new(File::open(&self.path)?);
        let mut out = Vec::new();
        let mut buf = String::new();
        let mut line_no = 0;
        loop {
            buf.clear();
            if reader.read_line(&mut buf)? == 0 {
                break;
            }
            line_no += 1;
            if !buf.ends_with('\n') {
                break;
            }
            if buf.trim().is_empty() {
                continue;
            }
            let entry = serde_json::from_str(&buf).map_err(|source| StoreError::Corrupt { line: line_no, source })?;
            out.push(entry);
        }
        Ok(out)
    }
}

/// In-memory log for tests and throwaway runs.
#[derive(Default)]
pub struct MemoryStore {
    entries: Mutex<Vec<LogEntry>>,
}

impl Storage for MemoryStore {
    fn append(&self, entry: &LogEntry) -> Result<(), StoreError> {
        self.entries.lock().unwrap_or_else(|e| e.into_inner()).push(entry.clone());
        Ok(())
    }

    fn load(&self) -> Result<Vec<LogEntry>, StoreError> {
        Ok(self.entries.lock().unwrap_or_else(|e| e.into_inner()).clone())
    }
}
