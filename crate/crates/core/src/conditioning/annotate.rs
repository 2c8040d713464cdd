use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Canvas, RenderStyle, SceneSpec, VanishingLineBundle, MIN_CANVAS_SIDE};
use crate::geometry::{consistency, LineSegment};
use crate::pipeline::ImageRecord;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnnotationError {
    #[error("record {0} has neither boxes nor a Manhattan frame")]
    NothingToRender(String),
    #[error("record {id}: canvas {width}x{height} is below the {MIN_CANVAS_SIDE} px minimum")]
    CanvasTooSmall { id: String, width: u32, height: u32 },
    #[error("record {id}: frame references segment {index} but only {available} were given")]
    MissingSegment {
        id: String,
        index: usize,
        available: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenePolicy {
    /// Longest supporting segments turned into lines, per axis.
    pub lines_per_axis: usize,
    /// Overrides the canvas-scaled default style.
    pub style: Option<RenderStyle>,
    /// Consistency threshold, in degrees, a segment needs to become a line.
    pub tau_support_deg: f64,
}

impl Default for ScenePolicy {
    fn default() -> Self {
        Self {
            lines_per_axis: 6,
            style: None,
            tau_support_deg: 2.0,
        }
    }
}

/// Scene for a record: boxes are copied verbatim; each frame axis with
/// support becomes a bundle anchored at the midpoints of its longest members.
pub fn annotation_to_scene(
    record: &ImageRecord,
    segments: &[LineSegment],
    policy: &ScenePolicy,
) -> Result<SceneSpec, AnnotationError> {
    if record.width < MIN_CANVAS_SIDE || record.height < MIN_CANVAS_SIDE {
        return Err(AnnotationError::CanvasTooSmall {
            id: record.id.clone(),
            width: record.width,
            height: record.height,
        });
    }
    let boxes: Vec<_> = record
        .boxes
        .iter()
        .flatten()
        .map(|g| g.bbox.clone())
        .collect();
    if boxes.is_empty() && record.frame.is_none() {
        return Err(AnnotationError::NothingToRender(record.id.clone()));
    }
    let canvas = Canvas::new(record.width, record.height);
    let mut style = policy.style.unwrap_or_else(|| RenderStyle::default_for(canvas));
    style.max_lines_per_bundle = style.max_lines_per_bundle.max(policy.lines_per_axis);
    let tau = policy.tau_support_deg.to_radians();

    let mut bundles = Vec::new();
    for axis in record.frame.iter().flat_map(|f| f.axes.iter()) {
        let mut members = Vec::with_capacity(axis.member_ids.len());
        for &i in &axis.member_ids {
            let s = segments.get(i).ok_or_else(|| AnnotationError::MissingSegment {
                id: record.id.clone(),
                index: i,
                available: segments.len(),
            })?;
            if consistency(s, &axis.vp, tau).consistent {
                members.push((i, s));
            }
        }
        members.sort_by(|a, b| b.1.length().total_cmp(&a.1.length()).then(a.0.cmp(&b.0)));
        members.truncate(policy.lines_per_axis);
        if members.is_empty() {
            continue;
        }
        bundles.push(VanishingLineBundle {
            vp: axis.vp,
            anchors: members.iter().map(|(_, s)| s.midpoint()).collect(),
            extend_to_vp: true,
        });
    }
    Ok(SceneSpec {
        canvas,
        boxes,
        bundles,
        style,
    })
}
