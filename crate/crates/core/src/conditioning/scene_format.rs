//! Scene-spec authoring format (TOML).
//!
//! ```toml
//! [canvas]
//! width = 512
//! height = 512
//!
//! [style]                 # optional; every key optional
//! line_width = 2
//! foreground = 255
//! background = 0
//! max_lines_per_bundle = 8
//!
//! [[boxes]]
//! x0 = 0.25
//! y0 = 0.25
//! x1 = 0.75
//! y1 = 0.75
//! label = "tree"          # optional, metadata only
//!
//! [[bundles]]
//! vp = { x = 0.0, y = 0.0, w = 1.0 }
//! anchors = [{ x = -1.0, y = -1.0 }, { x = 1.0, y = 1.0 }]
//! extend_to_vp = true     # optional, default true
//! ```
//!
//! Box coordinates are fractions of the canvas. VPs and anchors use
//! normalized image coordinates (origin at the center, long half-side 1).

use std::fmt;
use std::ops::Range;

use serde::{Deserialize, Serialize};
use toml::Spanned;

use super::{BoundingBox, Canvas, RenderStyle, SceneSpec, VanishingLineBundle, MAX_CANVAS_SIDE, MIN_CANVAS_SIDE};
use crate::geometry::{HomogeneousPoint, NormalizedPoint};

#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpecError {
    pub line: usize,
    pub column: usize,
    /// Dotted field path, e.g. `boxes[1].x0`.
    pub path: String,
    pub message: String,
}

impl fmt::Display for SceneSpecError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}, column {}: ", self.line, self.column)?;
        if !self.path.is_empty() && self.path != "." {
            write!(f, "{}: ", self.path)?;
        }
        f.write_str(&self.message)
    }
}

impl std::error::Error for SceneSpecError {}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScene {
    canvas: Spanned<RawCanvas>,
    #[serde(default)]
    style: Option<Spanned<RawStyle>>,
    #[serde(default)]
    boxes: Vec<Spanned<RawBox>>,
    #[serde(default)]
    bundles: Vec<Spanned<RawBundle>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCanvas {
    width: Spanned<u32>,
    height: Spanned<u32>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawStyle {
    line_width: Option<Spanned<u32>>,
    foreground: Option<u8>,
    background: Option<u8>,
    max_lines_per_bundle: Option<usize>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBox {
    x0: Spanned<f64>,
    y0: Spanned<f64>,
    x1: Spanned<f64>,
    y1: Spanned<f64>,
    label: Option<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBundle {
    vp: Spanned<RawVp>,
    anchors: Spanned<Vec<RawPoint>>,
    #[serde(default = "yes")]
    extend_to_vp: bool,
}

fn yes() -> bool {
    true
}

#[derive(Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct RawVp {
    x: f64,
    y: f64,
    w: f64,
}

#[derive(Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct RawPoint {
    x: f64,
    y: f64,
}

struct Locator<'a> {
    text: &'a str,
}

impl Locator<'_> {
    fn at(&self, span: Option<Range<usize>>, path: impl Into<String>, message: impl Into<String>) -> SceneSpecError {
        let offset = span.map_or(0, |s| s.start).min(self.text.len());
        let before = &self.text[..offset];
        let line = before.matches('\n').count() + 1;
        let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
        SceneSpecError {
            line,
            column,
            path: path.into(),
            message: message.into(),
        }
    }
}

/// Parses and validates a scene spec. Unknown keys are rejected.
pub fn parse_scene_spec(text: &str) -> Result<SceneSpec, SceneSpecError> {
    let loc = Locator { text };
    let de = toml::Deserializer::parse(text).map_err(|e| loc.at(e.span(), "", e.message()))?;
    let raw: RawScene = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        loc.at(inner.span(), path, inner.message())
    })?;

    let canvas_raw = raw.canvas.get_ref();
    let mut dims = [0u32; 2];
    for (k, (name, v)) in [("width", &canvas_raw.width), ("height", &canvas_raw.height)]
        .into_iter()
        .enumerate()
    {
        let value = *v.get_ref();
        if !(MIN_CANVAS_SIDE..=MAX_CANVAS_SIDE).contains(&value) {
            return Err(loc.at(
                Some(v.span()),
                format!("canvas.{name}"),
                format!("must be in [{MIN_CANVAS_SIDE}, {MAX_CANVAS_SIDE}], got {value}"),
            ));
        }
        dims[k] = value;
    }
    let canvas = Canvas::new(dims[0], dims[1]);

    let mut style = RenderStyle::default_for(canvas);
    if let Some(s) = &raw.style {
        let r = s.get_ref();
        if let Some(lw) = &r.line_width {
            if *lw.get_ref() == 0 {
                return Err(loc.at(Some(lw.span()), "style.line_width", "must be at least 1"));
            }
            style.line_width = *lw.get_ref();
        }
        style.foreground = r.foreground.unwrap_or(style.foreground);
        style.background = r.background.unwrap_or(style.background);
        style.max_lines_per_bundle = r.max_lines_per_bundle.unwrap_or(style.max_lines_per_bundle);
        if style.foreground == style.background {
            return Err(loc.at(Some(s.span()), "style", "foreground must differ from background"));
        }
    }

    let mut boxes = Vec::with_capacity(raw.boxes.len());
    for (i, b) in raw.boxes.iter().enumerate() {
        let r = b.get_ref();
        let fields = [("x0", &r.x0), ("y0", &r.y0), ("x1", &r.x1), ("y1", &r.y1)];
        for (name, v) in fields {
            let value = *v.get_ref();
            if !(0.0..=1.0).contains(&value) {
                return Err(loc.at(
                    Some(v.span()),
                    format!("boxes[{i}].{name}"),
                    format!("{value} outside [0, 1]"),
                ));
            }
        }
        for (lo, hi, lo_name, hi_name) in [(&r.x0, &r.x1, "x0", "x1"), (&r.y0, &r.y1, "y0", "y1")] {
            if !(lo.get_ref() < hi.get_ref()) {
                return Err(loc.at(
                    Some(lo.span()),
                    format!("boxes[{i}].{lo_name}"),
                    format!(
                        "box {i}: {lo_name} = {} must be < {hi_name} = {}",
                        lo.get_ref(),
                        hi.get_ref()
                    ),
                ));
            }
        }
        boxes.push(BoundingBox {
            x0: *r.x0.get_ref(),
            y0: *r.y0.get_ref(),
            x1: *r.x1.get_ref(),
            y1: *r.y1.get_ref(),
            label: r.label.clone(),
        });
    }

    let mut bundles = Vec::with_capacity(raw.bundles.len());
    for (i, b) in raw.bundles.iter().enumerate() {
        let r = b.get_ref();
        let v = r.vp.get_ref();
        let vp = HomogeneousPoint::new(v.x, v.y, v.w).map_err(|e| {
            loc.at(Some(r.vp.span()), format!("bundles[{i}].vp"), e.to_string())
        })?;
        if r.anchors.get_ref().is_empty() {
            return Err(loc.at(
                Some(r.anchors.span()),
                format!("bundles[{i}].anchors"),
                "at least one anchor is required",
            ));
        }
        let mut anchors = Vec::with_capacity(r.anchors.get_ref().len());
        for (k, a) in r.anchors.get_ref().iter().enumerate() {
            if !a.x.is_finite() || !a.y.is_finite() {
                return Err(loc.at(
                    Some(r.anchors.span()),
                    format!("bundles[{i}].anchors[{k}]"),
                    "anchor coordinates must be finite",
                ));
            }
            anchors.push(NormalizedPoint::new(a.x, a.y));
        }
        bundles.push(VanishingLineBundle {
            vp,
            anchors,
            extend_to_vp: r.extend_to_vp,
        });
    }

    Ok(SceneSpec {
        canvas,
        boxes,
        bundles,
        style,
    })
}

#[derive(Serialize)]
struct OutScene<'a> {
    canvas: &'a Canvas,
    style: &'a RenderStyle,
    boxes: &'a [BoundingBox],
    bundles: Vec<OutBundle>,
}

#[derive(Serialize)]
struct OutBundle {
    vp: RawVp,
    anchors: Vec<RawPoint>,
    extend_to_vp: bool,
}

impl SceneSpec {
    /// Serializes to the authoring format; `parse_scene_spec` reads it back.
    pub fn to_toml(&self) -> String {
        let out = OutScene {
            canvas: &self.canvas,
            style: &self.style,
            boxes: &self.boxes,
            bundles: self
                .bundles
                .iter()
                .map(|b| OutBundle {
                    vp: RawVp {
                        x: b.vp.x(),
                        y: b.vp.y(),
                        w: b.vp.w(),
                    },
                    anchors: b.anchors.iter().map(|a| RawPoint { x: a.x, y: a.y }).collect(),
                    extend_to_vp: b.extend_to_vp,
                })
                .collect(),
        };
        toml::to_string(&out).expect("scene specs always serialize")
    }
}
