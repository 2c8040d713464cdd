//! Conditioning rasters: bounding-box proportion maps and vanishing-line
//! perspective maps, the scene-spec authoring format, and the conversion from
//! automatic annotations to scenes.

mod annotate;
mod scene_format;
pub mod stroke;

pub use annotate::{annotation_to_scene, AnnotationError, ScenePolicy};
pub use scene_format::{parse_scene_spec, SceneSpecError};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{CanvasExtent, HomogeneousPoint, NormalizedPoint};
use crate::raster::GrayImage;

/// Smallest canvas side accepted in a scene.
pub const MIN_CANVAS_SIDE: u32 = 64;
/// Largest canvas side accepted in a scene.
pub const MAX_CANVAS_SIDE: u32 = 16384;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BoxError {
    #[error("coordinate {field} = {value} outside [0, 1]")]
    OutOfRange { field: &'static str, value: f64 },
    #[error("{lo_name} = {lo} must be < {hi_name} = {hi}")]
    Inverted {
        lo_name: &'static str,
        lo: f64,
        hi_name: &'static str,
        hi: f64,
    },
}

/// Axis-aligned box in fractions of canvas width and height. The label is
/// metadata only and never affects rendering.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

impl BoundingBox {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Result<Self, BoxError> {
        let b = Self {
            x0,
            y0,
            x1,
            y1,
            label: None,
        };
        b.validate()?;
        Ok(b)
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }

    pub fn validate(&self) -> Result<(), BoxError> {
        for (field, value) in [("x0", self.x0), ("y0", self.y0), ("x1", self.x1), ("y1", self.y1)] {
            if !(0.0..=1.0).contains(&value) {
                return Err(BoxError::OutOfRange { field, value });
            }
        }
        if !(self.x0 < self.x1) {
            return Err(BoxError::Inverted {
                lo_name: "x0",
                lo: self.x0,
                hi_name: "x1",
                hi: self.x1,
            });
        }
        if !(self.y0 < self.y1) {
            return Err(BoxError::Inverted {
                lo_name: "y0",
                lo: self.y0,
                hi_name: "y1",
                hi: self.y1,
            });
        }
        Ok(())
    }

    pub fn mirrored(&self) -> Self {
        Self {
            x0: 1.0 - self.x1,
            x1: 1.0 - self.x0,
            ..self.clone()
        }
    }
}

/// Lines through each anchor heading toward a shared vanishing point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VanishingLineBundle {
    pub vp: HomogeneousPoint,
    pub anchors: Vec<NormalizedPoint>,
    pub extend_to_vp: bool,
}

impl VanishingLineBundle {
    pub fn mirrored(&self) -> Self {
        Self {
            vp: HomogeneousPoint::new(-self.vp.x(), self.vp.y(), self.vp.w())
                .expect("mirroring keeps the vector non-zero"),
            anchors: self
                .anchors
                .iter()
                .map(|a| NormalizedPoint::new(-a.x, a.y))
                .collect(),
            extend_to_vp: self.extend_to_vp,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Canvas {
    pub width: u32,
    pub height: u32,
}

impl Canvas {
    pub fn new(width: u32, height: u32) -> Self {
        Self { width, height }
    }

    pub fn extent(&self) -> CanvasExtent {
        CanvasExtent::from_dims(self.width, self.height)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RenderStyle {
    pub line_width: u32,
    pub foreground: u8,
    pub background: u8,
    pub max_lines_per_bundle: usize,
}

impl RenderStyle {
    /// White strokes on black, 3 px at 1024 px scaled with the long side.
    pub fn default_for(canvas: Canvas) -> Self {
        let long = canvas.width.max(canvas.height) as f64;
        Self {
            line_width: ((3.0 * long / 1024.0).round() as u32).max(1),
            foreground: 255,
            background: 0,
            max_lines_per_bundle: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SceneSpec {
    pub canvas: Canvas,
    pub boxes: Vec<BoundingBox>,
    pub bundles: Vec<VanishingLineBundle>,
    pub style: RenderStyle,
}

impl SceneSpec {
    pub fn mirrored(&self) -> Self {
        Self {
            canvas: self.canvas,
            boxes: self.boxes.iter().map(BoundingBox::mirrored).collect(),
            bundles: self.bundles.iter().map(VanishingLineBundle::mirrored).collect(),
            style: self.style,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum RenderWarning {
    /// The anchor sits on a finite VP, so the line has no direction.
    AnchorAtVp { bundle: usize, anchor: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rendered {
    pub image: GrayImage,
    pub warnings: Vec<RenderWarning>,
}

/// Box outlines (never filled). Overlapping strokes write the same value, so
/// drawing a box twice changes nothing.
pub fn render_boxes(boxes: &[BoundingBox], canvas: Canvas, style: &RenderStyle) -> GrayImage {
    let mut img = GrayImage::filled(canvas.width, canvas.height, style.background);
    draw_boxes(&mut img, boxes, style);
    img
}

fn draw_boxes(img: &mut GrayImage, boxes: &[BoundingBox], style: &RenderStyle) {
    let (w, h) = (img.width() as f64, img.height() as f64);
    for b in boxes {
        stroke::draw_box_outline(
            img,
            stroke::to_fixed(b.x0 * w),
            stroke::to_fixed(b.y0 * h),
            stroke::to_fixed(b.x1 * w),
            stroke::to_fixed(b.y1 * h),
            style.line_width,
            style.foreground,
        );
    }
}

/// Clips the infinite line `a + t d` to `[0, w] x [0, h]`, returning the `t` range.
fn clip_line(a: (f64, f64), d: (f64, f64), w: f64, h: f64) -> Option<(f64, f64)> {
    let mut lo = f64::NEG_INFINITY;
    let mut hi = f64::INFINITY;
    for (p, dp, max) in [(a.0, d.0, w), (a.1, d.1, h)] {
        if dp == 0.0 {
            if p < 0.0 || p > max {
                return None;
            }
        } else {
            let t0 = (0.0 - p) / dp;
            let t1 = (max - p) / dp;
            lo = lo.max(t0.min(t1));
            hi = hi.min(t0.max(t1));
        }
    }
    (lo <= hi).then_some((lo, hi))
}

/// Stroke endpoints, in continuous pixel coordinates, for one bundle.
pub fn bundle_strokes(
    bundle: &VanishingLineBundle,
    bundle_index: usize,
    canvas: Canvas,
    max_lines: usize,
    warnings: &mut Vec<RenderWarning>,
) -> Vec<((f64, f64), (f64, f64))> {
    let (w, h) = (canvas.width, canvas.height);
    let half = w.max(h) as f64 / 2.0;
    let vp_euclid = bundle.vp.euclidean();
    let vp_on_canvas = vp_euclid.filter(|p| canvas.extent().contains(*p));
    let mut out = Vec::new();
    for (k, anchor) in bundle.anchors.iter().take(max_lines).enumerate() {
        let a = anchor.to_pixel(w, h);
        let d = match vp_euclid {
            Some(v) => {
                let vp = v.to_pixel(w, h);
                (vp.0 - a.0, vp.1 - a.1)
            }
            None => (bundle.vp.x() * half, bundle.vp.y() * half),
        };
        if d.0.hypot(d.1) <= 1e-9 * half {
            warnings.push(RenderWarning::AnchorAtVp {
                bundle: bundle_index,
                anchor: k,
            });
            continue;
        }
        let Some((t0, mut t1)) = clip_line(a, d, w as f64, h as f64) else {
            continue;
        };
        if bundle.extend_to_vp && vp_on_canvas.is_some() {
            // the VP sits at t = 1
            t1 = t1.min(1.0);
            if t0 > t1 {
                continue;
            }
        }
        out.push((
            (a.0 + t0 * d.0, a.1 + t0 * d.1),
            (a.0 + t1 * d.0, a.1 + t1 * d.1),
        ));
    }
    out
}

/// Vanishing-line map: per bundle, up to `max_lines_per_bundle` lines through
/// the anchors toward the VP, clipped to the canvas. With `extend_to_vp` and
/// the VP on the canvas, strokes stop at the VP.
pub fn render_vanishing_lines(
    bundles: &[VanishingLineBundle],
    canvas: Canvas,
    style: &RenderStyle,
) -> Rendered {
    let mut img = GrayImage::filled(canvas.width, canvas.height, style.background);
    let mut warnings = Vec::new();
    draw_bundles(&mut img, bundles, canvas, style, &mut warnings);
    Rendered {
        image: img,
        warnings,
    }
}

fn draw_bundles(
    img: &mut GrayImage,
    bundles: &[VanishingLineBundle],
    canvas: Canvas,
    style: &RenderStyle,
    warnings: &mut Vec<RenderWarning>,
) {
    for (i, bundle) in bundles.iter().enumerate() {
        for (p, q) in bundle_strokes(bundle, i, canvas, style.max_lines_per_bundle, warnings) {
            stroke::draw_stroke(
                img,
                (stroke::to_fixed(p.0), stroke::to_fixed(p.1)),
                (stroke::to_fixed(q.0), stroke::to_fixed(q.1)),
                style.line_width,
                style.foreground,
            );
        }
    }
}

/// Boxes and bundles of a scene on one canvas.
pub fn render_scene(spec: &SceneSpec) -> Rendered {
    let mut img = GrayImage::filled(spec.canvas.width, spec.canvas.height, spec.style.background);
    let mut warnings = Vec::new();
    draw_boxes(&mut img, &spec.boxes, &spec.style);
    draw_bundles(&mut img, &spec.bundles, spec.canvas, &spec.style, &mut warnings);
    if !warnings.is_empty() {
        log::warn!("{} vanishing line(s) skipped: anchor on VP", warnings.len());
    }
    Rendered {
        image: img,
        warnings,
    }
}
