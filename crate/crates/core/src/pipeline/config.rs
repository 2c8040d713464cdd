use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::conditioning::ScenePolicy;
use crate::geometry::GeometryParams;
use crate::model_clients::{Endpoints, DEFAULT_BOX_THRESHOLD};
use crate::segment_detection::DetectionParams;

use super::PipelineError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PipelineKind {
    Proportion,
    Perspective,
}

impl PipelineKind {
    pub fn default_aesthetic_threshold(self) -> f64 {
        match self {
            Self::Proportion => 5.0,
            Self::Perspective => 3.5,
        }
    }

    /// Stages in execution order.
    pub fn stages(self) -> &'static [Stage] {
        match self {
            Self::Proportion => &[
                Stage::Decode,
                Stage::Aesthetic,
                Stage::Caption,
                Stage::Grounding,
                Stage::Render,
                Stage::Emit,
            ],
            Self::Perspective => &[
                Stage::Decode,
                Stage::Aesthetic,
                Stage::VanishingPoints,
                Stage::Caption,
                Stage::Render,
                Stage::Emit,
            ],
        }
    }

    /// The stage whose rejection counts as a geometric filter.
    pub fn geometry_stage(self) -> Stage {
        match self {
            Self::Proportion => Stage::Grounding,
            Self::Perspective => Stage::VanishingPoints,
        }
    }

    pub fn position(self, stage: Stage) -> usize {
        self.stages()
            .iter()
            .position(|s| *s == stage)
            .unwrap_or(usize::MAX)
    }
}

impl std::str::FromStr for PipelineKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "proportion" => Ok(Self::Proportion),
            "perspective" => Ok(Self::Perspective),
            other => Err(format!("unknown pipeline kind {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Stage {
    Decode = 0,
    Aesthetic = 1,
    Caption = 2,
    Grounding = 3,
    VanishingPoints = 4,
    Render = 5,
    Emit = 6,
}

impl Stage {
    pub fn from_code(code: u8) -> Option<Self> {
        Some(match code {
            0 => Self::Decode,
            1 => Self::Aesthetic,
            2 => Self::Caption,
            3 => Self::Grounding,
            4 => Self::VanishingPoints,
            5 => Self::Render,
            6 => Self::Emit,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub kind: PipelineKind,
    pub corpus_dir: PathBuf,
    pub output_dir: PathBuf,
    /// Defaults per kind when absent.
    #[serde(default)]
    pub aesthetic_threshold: Option<f64>,
    #[serde(default = "default_box_threshold")]
    pub box_threshold: f64,
    #[serde(default)]
    pub geometry: GeometryParams,
    #[serde(default)]
    pub detection: DetectionParams,
    #[serde(default)]
    pub render: ScenePolicy,
    #[serde(default)]
    pub endpoints: Endpoints,
    #[serde(default = "default_workers")]
    pub worker_count: usize,
    /// Remote-unavailable records tolerated before the run aborts.
    #[serde(default = "default_failure_budget")]
    pub failure_budget: usize,
}

fn default_box_threshold() -> f64 {
    DEFAULT_BOX_THRESHOLD
}

fn default_workers() -> usize {
    4
}

fn default_failure_budget() -> usize {
    10
}

impl PipelineConfig {
    pub fn new(kind: PipelineKind, corpus_dir: impl Into<PathBuf>, output_dir: impl Into<PathBuf>) -> Self {
        Self {
            kind,
            corpus_dir: corpus_dir.into(),
            output_dir: output_dir.into(),
            aesthetic_threshold: None,
            box_threshold: DEFAULT_BOX_THRESHOLD,
            geometry: GeometryParams::default(),
            detection: DetectionParams::default(),
            render: ScenePolicy::default(),
            endpoints: Endpoints::default(),
            worker_count: default_workers(),
            failure_budget: default_failure_budget(),
        }
    }

    pub fn aesthetic_threshold(&self) -> f64 {
        self.aesthetic_threshold
            .unwrap_or_else(|| self.kind.default_aesthetic_threshold())
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: String| Err(PipelineError::Config(m));
        if self.worker_count == 0 {
            return bad("worker_count must be at least 1".into());
        }
        if !self.aesthetic_threshold().is_finite() {
            return bad("aesthetic_threshold must be finite".into());
        }
        if !(0.0..=1.0).contains(&self.box_threshold) {
            return bad(format!("box_threshold {} outside [0, 1]", self.box_threshold));
        }
        self.geometry
            .validate()
            .map_err(|e| PipelineError::Config(e.to_string()))?;
        self.detection
            .validate()
            .map_err(|e| PipelineError::Config(e.to_string()))?;
        Ok(())
    }

    /// The settings that decide every record's outcome. A checkpoint may only
    /// be resumed under an identical fingerprint.
    pub fn fingerprint(&self) -> String {
        serde_json::json!({
            "kind": self.kind,
            "corpus_dir": self.corpus_dir,
            "aesthetic_threshold": self.aesthetic_threshold(),
            "box_threshold": if self.kind == PipelineKind::Proportion { Some(self.box_threshold) } else { None },
            "geometry": self.geometry,
            "detection": self.detection,
            "render": self.render,
        })
        .to_string()
    }
}
