//! Line-delimited record of prompt/response pairs keyed by prompt hash.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const CASSETTE_FORMAT: &str = "leafsql-cassette";
pub const CASSETTE_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum CassetteError {
    #[error("cassette io error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("cassette {path} line {line}: {message}")]
    Format { path: PathBuf, line: usize, message: String },
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    format: String,
    version: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CassetteEntry {
    pub key: String,
    pub prompt: String,
    pub response: String,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    pub latency_ms: u64,
}

/// SHA-256 over the raw prompt bytes, hex encoded.
pub fn prompt_key(prompt: &str) -> String {
    hex::encode(Sha256::digest(prompt.as_bytes()))
}

#[derive(Debug)]
pub struct Cassette {
    path: PathBuf,
    entries: Mutex<HashMap<String, CassetteEntry>>,
    writer: Mutex<Option<File>>,
}

impl Cassette {
    /// Loads an existing cassette; a missing file yields an empty cassette.
    pub fn open(path: &Path) -> Result<Self, CassetteError> {
        let io = |source| CassetteError::Io { path: path.to_path_buf(), source };
        let mut entries = HashMap::new();
        if path.exists() {
            let reader = BufReader::new(File::open(path).map_err(io)?);
            for (i, line) in reader.lines().enumerate() {
                let line = line.map_err(io)?;
                let fmt_err = |message: String| CassetteError::Format { path: path.to_path_buf(), line: i + 1, message };
                if i == 0 {
                    let h: Header = serde_json::from_str(&line).map_err(|e| fmt_err(e.to_string()))?;
                    if h.format != CASSETTE_FORMAT || h.version != CASSETTE_VERSION {
                        return Err(fmt_err(format!("unsupported header {}/{}", h.format, h.version)));
                    }
                    continue;
                }
                if line.trim().is_empty() {
                    continue;
                }
                let e: CassetteEntry = serde_json::from_str(&line).map_err(|e| fmt_err(e.to_string()))?;
                entries.entry(e.key.clone()).or_insert(e);
            }
        }
        Ok(Cassette { path: path.to_path_buf(), entries: Mutex::new(entries), writer: Mutex::new(None) })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn get(&self, prompt: &str) -> Option<CassetteEntry> {
        self.entries.lock().expect("cassette poisoned").get(&prompt_key(prompt)).cloned()
    }

    pub fn len(&self) -> usize {
        self.entries.lock().expect("cassette poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Appends an entry unless its key is already present. Returns the stored entry.
    pub fn insert(&self, entry: CassetteEntry) -> Result<CassetteEntry, CassetteError> {
        let mut entries = self.entries.lock().expect("cassette poisoned");
        if let Some(existing) = entries.get(&entry.key) {
            return Ok(existing.clone());
        }
        let io = |source| CassetteError::Io { path: self.path.clone(), source };
        let mut writer = self.writer.lock().expect("cassette poisoned");
        if writer.is_none() {
            let fresh = !self.path.exists() || std::fs::metadata(&self.path).map_err(io)?.len() == 0;
            if let Some(dir) = self.path.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir).map_err(io)?;
            }
            let mut f = OpenOptions::new().create(true).append(true).open(&self.path).map_err(io)?;
            if fresh {
                let header = Header { format: CASSETTE_FORMAT.into(), version: CASSETTE_VERSION };
                writeln!(f, "{}", serde_json::to_string(&header).expect("header serializes")).map_err(io)?;
            }
            *writer = Some(f);
        }
        let f = writer.as_mut().expect("writer opened above");
        writeln!(f, "{}", serde_json::to_string(&entry).expect("entry serializes")).map_err(io)?;
        f.flush().map_err(io)?;
        entries.insert(entry.key.clone(), entry.clone());
        Ok(entry)
    }
}
