//! JSONL triplet manifest. Paths are relative to the output directory.

use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::geometry::PerspectiveClass;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub id: String,
    pub image_path: String,
    pub conditioning_path: String,
    pub prompt: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub perspective: Option<PerspectiveClass>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub boxes: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MalformedLine {
    /// 1-based line number.
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ManifestContents {
    pub entries: Vec<ManifestEntry>,
    pub malformed: Vec<MalformedLine>,
    /// Length of the prefix made of complete (newline-terminated) lines.
    pub complete_len: u64,
}

fn io_err(path: &Path, e: std::io::Error) -> PipelineError {
    PipelineError::Io {
        path: path.display().to_string(),
        source: e,
    }
}

/// Parses every complete line; a trailing line without newline is a torn
/// write and is ignored. Malformed lines are reported, not fatal.
pub fn read_manifest(path: &Path) -> Result<ManifestContents, PipelineError> {
    let text = std::fs::read(path).map_err(|e| io_err(path, e))?;
    let complete_len = text.iter().rposition(|&b| b == b'\n').map_or(0, |i| i + 1);
    let mut out = ManifestContents {
        complete_len: complete_len as u64,
        ..ManifestContents::default()
    };
    for (i, line) in text[..complete_len].split(|&b| b == b'\n').enumerate() {
        if line.iter().all(u8::is_ascii_whitespace) {
            continue;
        }
        match serde_json::from_slice::<ManifestEntry>(line) {
            Ok(e) => out.entries.push(e),
            Err(e) => out.malformed.push(MalformedLine {
                line: i + 1,
                message: e.to_string(),
            }),
        }
    }
    Ok(out)
}

pub struct ManifestWriter {
    path: std::path::PathBuf,
    out: BufWriter<File>,
}

impl ManifestWriter {
    /// Opens for appending, first cutting the file back to `complete_len`.
    pub fn open(path: &Path, complete_len: u64) -> Result<Self, PipelineError> {
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| io_err(path, e))?;
        if file.metadata().map_err(|e| io_err(path, e))?.len() > complete_len {
            log::warn!("manifest {}: dropping a torn final line", path.display());
            file.set_len(complete_len).map_err(|e| io_err(path, e))?;
        }
        Ok(Self {
            path: path.to_path_buf(),
            out: BufWriter::new(file),
        })
    }

    pub fn append(&mut self, entry: &ManifestEntry) -> Result<(), PipelineError> {
        let mut line = serde_json::to_vec(entry).expect("manifest entries serialize");
        line.push(b'\n');
        self.out
            .write_all(&line)
            .and_then(|_| self.out.flush())
            .map_err(|e| io_err(&self.path, e))
    }
}

/// Rewrites the manifest sorted by id, one line per unique id.
pub fn canonicalize(path: &Path) -> Result<usize, PipelineError> {
    let contents = read_manifest(path)?;
    let mut entries = contents.entries;
    entries.sort_by(|a, b| a.id.cmp(&b.id));
    entries.dedup_by(|a, b| a.id == b.id);
    let mut text = Vec::new();
    for e in &entries {
        text.extend(serde_json::to_vec(e).expect("manifest entries serialize"));
        text.push(b'\n');
    }
    let tmp = path.with_extension("jsonl.tmp");
    std::fs::write(&tmp, text).map_err(|e| io_err(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| io_err(path, e))?;
    Ok(entries.len())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(id: &str) -> ManifestEntry {
        ManifestEntry {
            id: id.into(),
            image_path: format!("images/{id}.png"),
            conditioning_path: format!("conditioning/{id}.png"),
            prompt: "a hall".into(),
            perspective: Some(PerspectiveClass::OnePoint),
            boxes: None,
        }
    }

    #[test]
    fn line_format_is_stable() {
        let line = serde_json::to_string(&entry("ab")).unwrap();
        assert_eq!(
            line,
            r#"{"id":"ab","image_path":"images/ab.png","conditioning_path":"conditioning/ab.png","prompt":"a hall","perspective":"OnePoint"}"#
        );
    }

    #[test]
    fn torn_line_dropped_and_malformed_reported() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("manifest.jsonl");
        {
            let mut w = ManifestWriter::open(&path, 0).unwrap();
            w.append(&entry("bb")).unwrap();
            w.append(&entry("aa")).unwrap();
        }
        let mut text = std::fs::read_to_string(&path).unwrap();
        text.push_str("not json\n{\"id\":\"cc\",\"image_pa");
        std::fs::write(&path, &text).unwrap();
        let c = read_manifest(&path).unwrap();
        assert_eq!(c.entries.len(), 2);
        assert_eq!(c.malformed.len(), 1);
        assert_eq!(c.malformed[0].line, 3);

        let mut w = ManifestWriter::open(&path, c.complete_len).unwrap();
        w.append(&entry("aa")).unwrap();
        drop(w);
        assert_eq!(canonicalize(&path).unwrap(), 2);
        let ids: Vec<_> = read_manifest(&path).unwrap().entries.into_iter().map(|e| e.id).collect();
        assert_eq!(ids, ["aa", "bb"]);
    }
}
