use std::collections::HashMap;
use std::path::{Path, PathBuf};

use walkdir::WalkDir;

use super::{content_id, PipelineError};

pub const IMAGE_EXTENSIONS: [&str; 3] = ["png", "jpg", "jpeg"];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IngestItem {
    pub id: String,
    pub path: PathBuf,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Ingested {
    pub items: Vec<IngestItem>,
    /// Later paths whose bytes matched an earlier file.
    pub duplicates: Vec<PathBuf>,
    pub unreadable: Vec<PathBuf>,
}

pub fn is_image_path(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
}

/// Lexicographic walk of `root`; one item per distinct file content.
pub fn ingest(root: &Path) -> Result<Ingested, PipelineError> {
    if !root.is_dir() {
        return Err(PipelineError::Io {
            path: root.display().to_string(),
            source: std::io::Error::new(std::io::ErrorKind::NotFound, "corpus directory not found"),
        });
    }
    let mut out = Ingested::default();
    let mut seen: HashMap<String, usize> = HashMap::new();
    for entry in WalkDir::new(root).sort_by_file_name() {
        let entry = match entry {
            Ok(e) => e,
            Err(e) => {
                log::warn!("ingest: {e}");
                if let Some(p) = e.path() {
                    out.unreadable.push(p.to_path_buf());
                }
                continue;
            }
        };
        if !entry.file_type().is_file() || !is_image_path(entry.path()) {
            continue;
        }
        let bytes = match std::fs::read(entry.path()) {
            Ok(b) => b,
            Err(e) => {
                log::warn!("ingest: skipping {}: {e}", entry.path().display());
                out.unreadable.push(entry.path().to_path_buf());
                continue;
            }
        };
        let id = content_id(&bytes);
        if let Some(&first) = seen.get(&id) {
            log::info!(
                "ingest: {} duplicates {}",
                entry.path().display(),
                out.items[first].path.display()
            );
            out.duplicates.push(entry.path().to_path_buf());
            continue;
        }
        seen.insert(id.clone(), out.items.len());
        out.items.push(IngestItem {
            id,
            path: entry.path().to_path_buf(),
        });
    }
    Ok(out)
}
