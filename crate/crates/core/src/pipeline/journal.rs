//! Append-only checkpoint journal of status transitions.
//!
//! Layout: the magic `CFJOURN1`, a `u32` length and the config fingerprint,
//! then records of `u32` payload length followed by the payload
//! `id[16] stage:u8 status:u8 timestamp_ms:u64 reason_len:u16 reason`.
//! All integers are little endian. A torn final record is dropped on open.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Read, Write};
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use super::config::Stage;
use super::record::RecordStatus;
use super::PipelineError;

const MAGIC: &[u8; 8] = b"CFJOURN1";
const FIXED_PAYLOAD: usize = 16 + 1 + 1 + 8 + 2;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JournalEntry {
    pub id: String,
    pub stage: Stage,
    pub status: RecordStatus,
    pub timestamp_ms: u64,
}

impl JournalEntry {
    pub fn now(id: impl Into<String>, stage: Stage, status: RecordStatus) -> Self {
        let timestamp_ms = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_millis() as u64)
            .unwrap_or(0);
        Self {
            id: id.into(),
            stage,
            status,
            timestamp_ms,
        }
    }

    fn encode(&self) -> Result<Vec<u8>, PipelineError> {
        let id = decode_hex_id(&self.id)
            .ok_or_else(|| PipelineError::Journal(format!("id {:?} is not 32 hex digits", self.id)))?;
        let reason = match &self.status {
            RecordStatus::Failed(r) => r.as_bytes(),
            _ => &[],
        };
        let reason = &reason[..reason.len().min(u16::MAX as usize)];
        let mut out = Vec::with_capacity(4 + FIXED_PAYLOAD + reason.len());
        out.extend_from_slice(&((FIXED_PAYLOAD + reason.len()) as u32).to_le_bytes());
        out.extend_from_slice(&id);
        out.push(self.stage as u8);
        out.push(self.status.code());
        out.extend_from_slice(&self.timestamp_ms.to_le_bytes());
        out.extend_from_slice(&(reason.len() as u16).to_le_bytes());
        out.extend_from_slice(reason);
        Ok(out)
    }

    fn decode(payload: &[u8]) -> Option<Self> {
        if payload.len() < FIXED_PAYLOAD {
            return None;
        }
        let id: String = payload[..16].iter().map(|b| format!("{b:02x}")).collect();
        let stage = Stage::from_code(payload[16])?;
        let ts = u64::from_le_bytes(payload[18..26].try_into().ok()?);
        let reason_len = u16::from_le_bytes(payload[26..28].try_into().ok()?) as usize;
        if payload.len() != FIXED_PAYLOAD + reason_len {
            return None;
        }
        let reason = String::from_utf8_lossy(&payload[28..]).into_owned();
        let status = RecordStatus::from_code(payload[17], reason)?;
        Some(Self {
            id,
            stage,
            status,
            timestamp_ms: ts,
        })
    }
}

fn decode_hex_id(id: &str) -> Option<[u8; 16]> {
    if id.len() != 32 {
        return None;
    }
    let mut out = [0u8; 16];
    for (i, byte) in out.iter_mut().enumerate() {
        *byte = u8::from_str_radix(id.get(2 * i..2 * i + 2)?, 16).ok()?;
    }
    Some(out)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JournalContents {
    pub fingerprint: String,
    pub entries: Vec<JournalEntry>,
    /// Byte offset just past the last complete record.
    pub valid_len: u64,
}

impl JournalContents {
    /// Latest entry per id.
    pub fn latest(&self) -> BTreeMap<&str, &JournalEntry> {
        let mut m = BTreeMap::new();
        for e in &self.entries {
            m.insert(e.id.as_str(), e);
        }
        m
    }
}

fn io_err(path: &Path, e: std::io::Error) -> PipelineError {
    PipelineError::Io {
        path: path.display().to_string(),
        source: e,
    }
}

pub fn read_journal(path: &Path) -> Result<JournalContents, PipelineError> {
    let mut bytes = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| io_err(path, e))?;
    if bytes.len() < 12 || &bytes[..8] != MAGIC {
        return Err(PipelineError::Journal(format!("{} is not a checkpoint journal", path.display())));
    }
    let header_len = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes")) as usize;
    let mut pos = 12 + header_len;
    if bytes.len() < pos {
        return Err(PipelineError::Journal("truncated journal header".into()));
    }
    let fingerprint = String::from_utf8(bytes[12..pos].to_vec())
        .map_err(|_| PipelineError::Journal("journal header is not UTF-8".into()))?;
    let mut entries = Vec::new();
    while pos + 4 <= bytes.len() {
        let len = u32::from_le_bytes(bytes[pos..pos + 4].try_into().expect("4 bytes")) as usize;
        let end = pos + 4 + len;
        if end > bytes.len() {
            break;
        }
        match JournalEntry::decode(&bytes[pos + 4..end]) {
            Some(e) => entries.push(e),
            None => {
                return Err(PipelineError::Journal(format!("corrupt journal record at byte {pos}")));
            }
        }
        pos = end;
    }
    if pos < bytes.len() {
        log::warn!(
            "journal {}: dropping {} byte(s) of a torn final record",
            path.display(),
            bytes.len() - pos
        );
    }
    Ok(JournalContents {
        fingerprint,
        entries,
        valid_len: pos as u64,
    })
}

pub struct JournalWriter {
    path: std::path::PathBuf,
    out: BufWriter<File>,
}

impl JournalWriter {
    pub fn create(path: &Path, fingerprint: &str) -> Result<Self, PipelineError> {
        let file = File::create(path).map_err(|e| io_err(path, e))?;
        let mut w = Self {
            path: path.to_path_buf(),
            out: BufWriter::new(file),
        };
        let mut header = MAGIC.to_vec();
        header.extend_from_slice(&(fingerprint.len() as u32).to_le_bytes());
        header.extend_from_slice(fingerprint.as_bytes());
        w.write_raw(&header)?;
        Ok(w)
    }

    /// Opens for appending after truncating any torn tail.
    pub fn append_to(path: &Path, valid_len: u64) -> Result<Self, PipelineError> {
        let file = OpenOptions::new()
            .write(true)
            .open(path)
            .map_err(|e| io_err(path, e))?;
        file.set_len(valid_len).map_err(|e| io_err(path, e))?;
        drop(file);
        let file = OpenOptions::new()
            .append(true)
            .open(path)
            .map_err(|e| io_err(path, e))?;
        Ok(Self {
            path: path.to_path_buf(),
            out: BufWriter::new(file),
        })
    }

    fn write_raw(&mut self, bytes: &[u8]) -> Result<(), PipelineError> {
        self.out
            .write_all(bytes)
            .and_then(|_| self.out.flush())
            .map_err(|e| io_err(&self.path, e))
    }

    pub fn append(&mut self, entry: &JournalEntry) -> Result<(), PipelineError> {
        let bytes = entry.encode()?;
        self.write_raw(&bytes)
    }
}

/// Rewrites the journal with only the latest entry per id, sorted by id.
pub fn compact(path: &Path) -> Result<usize, PipelineError> {
    let contents = read_journal(path)?;
    let tmp = path.with_extension("journal.tmp");
    {
        let mut w = JournalWriter::create(&tmp, &contents.fingerprint)?;
        for e in contents.latest().values() {
            w.append(e)?;
        }
    }
    std::fs::rename(&tmp, path).map_err(|e| io_err(path, e))?;
    Ok(contents.latest().len())
}

/// Checks that every id's statuses only move forward through the stage order.
pub fn audit(entries: &[JournalEntry]) -> Result<(), PipelineError> {
    let mut last: BTreeMap<&str, &RecordStatus> = BTreeMap::new();
    for e in entries {
        if let Some(prev) = last.get(e.id.as_str()) {
            if !prev.can_become(&e.status) {
                return Err(PipelineError::Journal(format!(
                    "record {} moved from {} to {}",
                    e.id,
                    prev.name(),
                    e.status.name()
                )));
            }
        }
        last.insert(&e.id, &e.status);
    }
    Ok(())
}
