//! Corpus processing: ingest, staged annotation, checkpointing and statistics.
//!
//! Output layout: `images/`, `conditioning/`, `manifest.jsonl`,
//! `checkpoint.journal` and `report.json` under the output directory.

mod config;
mod ingest;
pub mod journal;
pub mod manifest;
mod record;
mod run;
mod stats;

use std::path::PathBuf;

use thiserror::Error;

pub use config::{PipelineConfig, PipelineKind, Stage};
pub use ingest::{ingest, is_image_path, IngestItem, Ingested, IMAGE_EXTENSIONS};
pub use manifest::ManifestEntry;
pub use record::{content_id, ImageRecord, RecordStatus, TransitionError};
pub use run::{resume, run, run_with, Funnel, OutputLayout, RunOptions, RunReport};
pub use stats::{stats, Bin, StatsReport};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("checkpoint journal: {0}")]
    Journal(String),
    #[error("output directory {0} already holds a run; pass --resume to continue it")]
    OutputExists(PathBuf),
    #[error("no checkpoint to resume in {0}")]
    NoCheckpoint(PathBuf),
    #[error("checkpoint was written under a different configuration\n  checkpoint: {checkpoint}\n  requested:  {requested}")]
    ConfigMismatch { checkpoint: String, requested: String },
    #[error("aborting after {failures} unavailable-service failure(s); last: {last_error}")]
    EndpointDown { failures: usize, last_error: String },
    #[error("interrupted after {committed} record(s)")]
    Interrupted { committed: usize },
}
