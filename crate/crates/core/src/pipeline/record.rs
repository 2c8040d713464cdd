use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::geometry::{ManhattanFrame, PerspectiveClass};
use crate::model_clients::{CaptionPair, GroundedBox};

/// 128-bit content hash of the file bytes, lowercase hex.
pub fn content_id(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest[..16].iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", content = "reason")]
pub enum RecordStatus {
    Pending,
    FilteredAesthetic,
    FilteredGeometry,
    Annotated,
    Emitted,
    Failed(String),
}

impl RecordStatus {
    /// Position in the stage order. Transitions must strictly increase it.
    pub fn rank(&self) -> u8 {
        match self {
            Self::Pending => 0,
            Self::FilteredAesthetic => 1,
            Self::FilteredGeometry => 2,
            Self::Annotated => 3,
            Self::Emitted => 4,
            Self::Failed(_) => 5,
        }
    }

    pub fn is_terminal(&self) -> bool {
        !matches!(self, Self::Pending | Self::Annotated)
    }

    pub fn can_become(&self, next: &RecordStatus) -> bool {
        !self.is_terminal() && next.rank() > self.rank()
    }

    pub fn code(&self) -> u8 {
        self.rank()
    }

    pub fn from_code(code: u8, reason: String) -> Option<Self> {
        Some(match code {
            0 => Self::Pending,
            1 => Self::FilteredAesthetic,
            2 => Self::FilteredGeometry,
            3 => Self::Annotated,
            4 => Self::Emitted,
            5 => Self::Failed(reason),
            _ => return None,
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Pending => "Pending",
            Self::FilteredAesthetic => "FilteredAesthetic",
            Self::FilteredGeometry => "FilteredGeometry",
            Self::Annotated => "Annotated",
            Self::Emitted => "Emitted",
            Self::Failed(_) => "Failed",
        }
    }
}

/// Per-image accumulator filled in stage by stage.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImageRecord {
    pub id: String,
    pub source_path: String,
    pub width: u32,
    pub height: u32,
    pub aesthetic: Option<f64>,
    pub captions: Option<CaptionPair>,
    pub boxes: Option<Vec<GroundedBox>>,
    pub segments_count: Option<usize>,
    pub frame: Option<ManhattanFrame>,
    pub perspective: Option<PerspectiveClass>,
    pub status: RecordStatus,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("record {id}: illegal transition {from} -> {to}")]
pub struct TransitionError {
    pub id: String,
    pub from: &'static str,
    pub to: &'static str,
}

impl ImageRecord {
    pub fn new(id: impl Into<String>, source_path: impl Into<String>, width: u32, height: u32) -> Self {
        Self {
            id: id.into(),
            source_path: source_path.into(),
            width,
            height,
            aesthetic: None,
            captions: None,
            boxes: None,
            segments_count: None,
            frame: None,
            perspective: None,
            status: RecordStatus::Pending,
        }
    }

    pub fn advance(&mut self, next: RecordStatus) -> Result<(), TransitionError> {
        if !self.status.can_become(&next) {
            return Err(TransitionError {
                id: self.id.clone(),
                from: self.status.name(),
                to: next.name(),
            });
        }
        self.status = next;
        Ok(())
    }
}
