use serde::{Deserialize, Serialize};

use super::{
    complete_manhattan, hypothesize_vps, CanvasExtent, GeometryParams, HomogeneousPoint,
    LineSegment, ManhattanFrame,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PerspectiveClass {
    None,
    OnePoint,
    TwoPoint,
    ThreePoint,
}

impl PerspectiveClass {
    pub fn from_finite_count(n: usize) -> Self {
        match n {
            0 => Self::None,
            1 => Self::OnePoint,
            2 => Self::TwoPoint,
            _ => Self::ThreePoint,
        }
    }

    pub fn finite_count(self) -> usize {
        self as usize
    }

    pub fn short_name(self) -> &'static str {
        match self {
            Self::None => "none",
            Self::OnePoint => "1pt",
            Self::TwoPoint => "2pt",
            Self::ThreePoint => "3pt",
        }
    }
}

/// True iff `v` is a Euclidean point inside the canvas grown by `k_extent`.
pub fn is_finite_vp(v: &HomogeneousPoint, k_extent: f64, extent: CanvasExtent) -> bool {
    match v.euclidean() {
        None => false,
        Some(p) => {
            p.x.abs() <= k_extent * extent.half_width && p.y.abs() <= k_extent * extent.half_height
        }
    }
}

pub fn classify(frame: &ManhattanFrame, k_extent: f64, extent: CanvasExtent) -> PerspectiveClass {
    let finite = frame
        .vps()
        .iter()
        .filter(|v| is_finite_vp(v, k_extent, extent))
        .count();
    PerspectiveClass::from_finite_count(finite)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct FilterVerdict {
    pub pass: bool,
    /// `None` whenever the image fails the filter.
    pub class: PerspectiveClass,
}

impl FilterVerdict {
    const REJECT: FilterVerdict = FilterVerdict {
        pass: false,
        class: PerspectiveClass::None,
    };
}

/// Strong-perspective test: the frame must have a finite axis, and the
/// best-supported finite axis must clear both the count and the
/// length-fraction thresholds.
pub fn strong_perspective_filter(
    frame: Option<&ManhattanFrame>,
    segments: &[LineSegment],
    params: &GeometryParams,
    extent: CanvasExtent,
) -> FilterVerdict {
    let Some(frame) = frame else {
        return FilterVerdict::REJECT;
    };
    let class = classify(frame, params.k_extent, extent);
    if class == PerspectiveClass::None {
        return FilterVerdict::REJECT;
    }
    let dominant = frame
        .axes
        .iter()
        .filter(|a| is_finite_vp(&a.vp, params.k_extent, extent))
        .fold(None, |best: Option<&super::FrameAxis>, a| match best {
            Some(b) if b.support_length >= a.support_length => Some(b),
            _ => Some(a),
        })
        .expect("class != None implies a finite axis");
    let total: f64 = segments.iter().map(|s| s.length()).sum();
    let pass = dominant.support_count >= params.min_support_count
        && dominant.support_length >= params.min_support_fraction * total;
    if pass {
        FilterVerdict { pass, class }
    } else {
        FilterVerdict::REJECT
    }
}

/// Full per-image geometric analysis.
#[derive(Debug, Clone, Serialize)]
pub struct PerspectiveAnalysis {
    pub segments_count: usize,
    pub frame: Option<ManhattanFrame>,
    /// Class of the frame, regardless of whether it passed the filter.
    pub frame_class: PerspectiveClass,
    pub verdict: FilterVerdict,
}

/// Hypothesize, complete and filter. Fewer than two segments is not an error:
/// the image is simply classified `None`.
pub fn analyze_segments(
    segments: &[LineSegment],
    params: &GeometryParams,
    extent: CanvasExtent,
) -> PerspectiveAnalysis {
    let frame = hypothesize_vps(segments, params)
        .ok()
        .and_then(|hyps| complete_manhattan(&hyps, segments, params));
    let frame_class = frame
        .as_ref()
        .map_or(PerspectiveClass::None, |f| classify(f, params.k_extent, extent));
    let verdict = strong_perspective_filter(frame.as_ref(), segments, params, extent);
    PerspectiveAnalysis {
        segments_count: segments.len(),
        frame,
        frame_class,
        verdict,
    }
}
