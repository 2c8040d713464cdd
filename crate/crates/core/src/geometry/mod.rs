//! Projective-geometry core for vanishing-point estimation.
//!
//! Points and lines live in normalized image coordinates: the image center is
//! the origin and the long half-side has length 1. Vanishing points are
//! homogeneous so that points at infinity (parallel image lines) are ordinary
//! values rather than special cases.
//!
//! The estimator is the two-line exhaustive family: every pair among the
//! longest segments proposes a vanishing point, each proposal is scored by the
//! summed length of the segments that point at it, and orthogonal pairs of
//! back-projected proposals are completed into a Manhattan frame.

mod filter;
mod hypotheses;
mod manhattan;

pub use filter::{
    analyze_segments, classify, is_finite_vp, strong_perspective_filter, FilterVerdict,
    PerspectiveAnalysis, PerspectiveClass,
};
pub use hypotheses::{hypothesize_vps, VpHypothesis};
pub use manhattan::{complete_manhattan, AxisOrigin, FrameAxis, ManhattanFrame};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("degenerate segment: endpoints coincide")]
    DegenerateSegment,
    #[error("homogeneous vector is zero")]
    ZeroVector,
    #[error("lines are identical; no unique intersection")]
    IdenticalLines,
    #[error("need at least 2 segments, got {0}")]
    TooFewSegments(usize),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// Below this norm a homogeneous 3-vector is treated as zero.
const ZERO_EPS: f64 = 1e-12;

pub(crate) type Vec3 = [f64; 3];

#[inline]
pub(crate) fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub(crate) fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

#[inline]
pub(crate) fn norm(a: Vec3) -> f64 {
    dot(a, a).sqrt()
}

#[inline]
pub(crate) fn scale(a: Vec3, s: f64) -> Vec3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

pub(crate) fn normalize(a: Vec3) -> Option<Vec3> {
    let n = norm(a);
    (n > ZERO_EPS).then(|| scale(a, 1.0 / n))
}

/// Flips the sign so the first non-zero component is positive.
pub(crate) fn canonical_sign(a: Vec3) -> Vec3 {
    match a.iter().find(|c| **c != 0.0) {
        Some(c) if *c < 0.0 => scale(a, -1.0),
        _ => a,
    }
}

/// Angle between two directions, treating antipodal directions as equal.
pub fn axis_angle(a: Vec3, b: Vec3) -> f64 {
    let c = cross(a, b);
    norm(c).atan2(dot(a, b).abs())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizedPoint {
    pub x: f64,
    pub y: f64,
}

impl NormalizedPoint {
    pub const ORIGIN: NormalizedPoint = NormalizedPoint { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    /// Maps continuous pixel coordinates (pixel `i` spans `[i, i+1)`) into
    /// normalized coordinates.
    pub fn from_pixel(px: f64, py: f64, width: u32, height: u32) -> Self {
        let half = width.max(height) as f64 / 2.0;
        Self {
            x: (px - width as f64 / 2.0) / half,
            y: (py - height as f64 / 2.0) / half,
        }
    }

    /// Inverse of [`NormalizedPoint::from_pixel`].
    pub fn to_pixel(self, width: u32, height: u32) -> (f64, f64) {
        let half = width.max(height) as f64 / 2.0;
        (
            self.x * half + width as f64 / 2.0,
            self.y * half + height as f64 / 2.0,
        )
    }

    pub fn distance(self, other: Self) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Half-extents of the canvas in normalized units; the long side is always 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CanvasExtent {
    pub half_width: f64,
    pub half_height: f64,
}

impl CanvasExtent {
    pub const SQUARE: CanvasExtent = CanvasExtent {
        half_width: 1.0,
        half_height: 1.0,
    };

    pub fn from_dims(width: u32, height: u32) -> Self {
        let long = width.max(height).max(1) as f64;
        Self {
            half_width: width as f64 / long,
            half_height: height as f64 / long,
        }
    }

    pub fn contains(&self, p: NormalizedPoint) -> bool {
        p.x.abs() <= self.half_width && p.y.abs() <= self.half_height
    }
}

impl Default for CanvasExtent {
    fn default() -> Self {
        Self::SQUARE
    }
}

/// Unit-length homogeneous image point; `w == 0` is a point at infinity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawHomogeneous", into = "RawHomogeneous")]
pub struct HomogeneousPoint {
    v: Vec3,
}

#[derive(Serialize, Deserialize)]
struct RawHomogeneous {
    x: f64,
    y: f64,
    w: f64,
}

impl TryFrom<RawHomogeneous> for HomogeneousPoint {
    type Error = GeometryError;

    fn try_from(r: RawHomogeneous) -> Result<Self, Self::Error> {
        HomogeneousPoint::new(r.x, r.y, r.w)
    }
}

impl From<HomogeneousPoint> for RawHomogeneous {
    fn from(p: HomogeneousPoint) -> Self {
        RawHomogeneous {
            x: p.v[0],
            y: p.v[1],
            w: p.v[2],
        }
    }
}

impl HomogeneousPoint {
    pub fn new(x: f64, y: f64, w: f64) -> Result<Self, GeometryError> {
        Self::from_vec([x, y, w])
    }

    pub(crate) fn from_vec(v: Vec3) -> Result<Self, GeometryError> {
        if !v.iter().all(|c| c.is_finite()) {
            return Err(GeometryError::ZeroVector);
        }
        // Already-unit input is kept bit-for-bit so serialization round-trips.
        let n = norm(v);
        let v = if (n - 1.0).abs() <= 4.0 * f64::EPSILON {
            v
        } else {
            normalize(v).ok_or(GeometryError::ZeroVector)?
        };
        Ok(Self {
            v: canonical_sign(v),
        })
    }

    pub fn finite(p: NormalizedPoint) -> Self {
        Self::from_vec([p.x, p.y, 1.0]).expect("w = 1 is never zero")
    }

    pub fn at_infinity(dx: f64, dy: f64) -> Result<Self, GeometryError> {
        Self::new(dx, dy, 0.0)
    }

    pub fn x(&self) -> f64 {
        self.v[0]
    }

    pub fn y(&self) -> f64 {
        self.v[1]
    }

    pub fn w(&self) -> f64 {
        self.v[2]
    }

    pub fn as_array(&self) -> Vec3 {
        self.v
    }

    pub fn is_at_infinity(&self) -> bool {
        self.v[2] == 0.0
    }

    /// Euclidean image point, or `None` at infinity.
    pub fn euclidean(&self) -> Option<NormalizedPoint> {
        (self.v[2] != 0.0).then(|| NormalizedPoint::new(self.v[0] / self.v[2], self.v[1] / self.v[2]))
    }
}

/// Homogeneous line `a x + b y + c = 0`, unit-normalized.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HomogeneousLine(pub [f64; 3]);

impl HomogeneousLine {
    pub fn through(p1: NormalizedPoint, p2: NormalizedPoint) -> Result<Self, GeometryError> {
        if p1 == p2 {
            return Err(GeometryError::DegenerateSegment);
        }
        let l = cross([p1.x, p1.y, 1.0], [p2.x, p2.y, 1.0]);
        normalize(l)
            .map(HomogeneousLine)
            .ok_or(GeometryError::DegenerateSegment)
    }

    /// Signed value of the line equation at `p`; zero when `p` is on the line.
    pub fn eval(&self, p: NormalizedPoint) -> f64 {
        self.0[0] * p.x + self.0[1] * p.y + self.0[2]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LineSegment {
    p1: NormalizedPoint,
    p2: NormalizedPoint,
    length: f64,
    direction_angle: f64,
}

impl LineSegment {
    pub fn new(p1: NormalizedPoint, p2: NormalizedPoint) -> Result<Self, GeometryError> {
        let (dx, dy) = (p2.x - p1.x, p2.y - p1.y);
        let length = dx.hypot(dy);
        if !(length > 0.0) || !length.is_finite() {
            return Err(GeometryError::DegenerateSegment);
        }
        let mut angle = dy.atan2(dx);
        if angle < 0.0 {
            angle += std::f64::consts::PI;
        }
        if angle >= std::f64::consts::PI {
            angle -= std::f64::consts::PI;
        }
        Ok(Self {
            p1,
            p2,
            length,
            direction_angle: angle,
        })
    }

    pub fn from_coords(x1: f64, y1: f64, x2: f64, y2: f64) -> Result<Self, GeometryError> {
        Self::new(NormalizedPoint::new(x1, y1), NormalizedPoint::new(x2, y2))
    }

    pub fn p1(&self) -> NormalizedPoint {
        self.p1
    }

    pub fn p2(&self) -> NormalizedPoint {
        self.p2
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    /// Orientation in `[0, π)`.
    pub fn direction_angle(&self) -> f64 {
        self.direction_angle
    }

    pub fn midpoint(&self) -> NormalizedPoint {
        NormalizedPoint::new((self.p1.x + self.p2.x) / 2.0, (self.p1.y + self.p2.y) / 2.0)
    }

    pub fn mirrored_x(&self) -> Self {
        Self::new(
            NormalizedPoint::new(-self.p1.x, self.p1.y),
            NormalizedPoint::new(-self.p2.x, self.p2.y),
        )
        .expect("mirroring preserves length")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraModel {
    pub focal: f64,
    #[serde(default = "origin")]
    pub principal_point: NormalizedPoint,
}

fn origin() -> NormalizedPoint {
    NormalizedPoint::ORIGIN
}

impl CameraModel {
    pub fn with_focal(focal: f64) -> Result<Self, GeometryError> {
        if !(focal > 0.0) || !focal.is_finite() {
            return Err(GeometryError::InvalidParameter(format!(
                "focal must be positive, got {focal}"
            )));
        }
        Ok(Self {
            focal,
            principal_point: NormalizedPoint::ORIGIN,
        })
    }
}

impl Default for CameraModel {
    fn default() -> Self {
        Self {
            focal: 1.0,
            principal_point: NormalizedPoint::ORIGIN,
        }
    }
}

/// Tunables of the vanishing-point estimator and the perspective filter.
/// Angles are in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeometryParams {
    pub tau_support_deg: f64,
    pub dedup_angle_deg: f64,
    pub tol_ortho_deg: f64,
    pub max_segments: usize,
    pub top_k: usize,
    pub k_extent: f64,
    pub min_support_count: usize,
    pub min_support_fraction: f64,
    pub camera: CameraModel,
}

impl Default for GeometryParams {
    fn default() -> Self {
        Self {
            tau_support_deg: 2.0,
            dedup_angle_deg: 2.0,
            tol_ortho_deg: 5.0,
            max_segments: 200,
            top_k: 30,
            k_extent: 4.0,
            min_support_count: 8,
            min_support_fraction: 0.25,
            camera: CameraModel::default(),
        }
    }
}

impl GeometryParams {
    pub fn tau_support(&self) -> f64 {
        self.tau_support_deg.to_radians()
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        let bad = |m: &str| Err(GeometryError::InvalidParameter(m.to_string()));
        if !(self.tau_support_deg > 0.0 && self.tau_support_deg < 90.0) {
            return bad("tau_support_deg must be in (0, 90)");
        }
        if !(self.dedup_angle_deg >= 0.0) || !(self.tol_ortho_deg >= 0.0) {
            return bad("angles must be non-negative");
        }
        if self.max_segments < 2 || self.top_k < 2 {
            return bad("max_segments and top_k must be at least 2");
        }
        if !(self.k_extent >= 1.0) {
            return bad("k_extent must be >= 1");
        }
        if !(0.0..=1.0).contains(&self.min_support_fraction) {
            return bad("min_support_fraction must be in [0, 1]");
        }
        if !(self.camera.focal > 0.0) {
            return bad("camera focal must be positive");
        }
        Ok(())
    }
}

pub fn segment_to_line(s: &LineSegment) -> HomogeneousLine {
    HomogeneousLine::through(s.p1, s.p2).expect("LineSegment guarantees distinct endpoints")
}

/// Meet of two lines. Parallel lines meet at a point with `w == 0` exactly.
pub fn intersect_lines(
    l1: &HomogeneousLine,
    l2: &HomogeneousLine,
) -> Result<HomogeneousPoint, GeometryError> {
    let n1 = norm(l1.0);
    let n2 = norm(l2.0);
    if n1 <= ZERO_EPS || n2 <= ZERO_EPS {
        return Err(GeometryError::ZeroVector);
    }
    let mut p = cross(scale(l1.0, 1.0 / n1), scale(l2.0, 1.0 / n2));
    let pn = norm(p);
    if pn <= 1e-10 {
        return Err(GeometryError::IdenticalLines);
    }
    // Parallel lines: the w component is the 2D cross product of the normals,
    // which rounding leaves at ~1e-17 rather than zero.
    if p[2].abs() <= ZERO_EPS * pn {
        p[2] = 0.0;
    }
    HomogeneousPoint::from_vec(p)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Consistency {
    pub consistent: bool,
    /// Angle in `[0, π/2]` between the segment and the ray toward the VP.
    pub residual: f64,
}

/// Direction (in the image plane) from `m` toward `v`; for `w = 0` the VP's
/// own direction. The sign of `w` is irrelevant because residuals fold mod π.
fn direction_toward(m: NormalizedPoint, v: &HomogeneousPoint) -> (f64, f64) {
    let [x, y, w] = v.v;
    (x - m.x * w, y - m.y * w)
}

pub fn residual(s: &LineSegment, v: &HomogeneousPoint) -> f64 {
    let (dx, dy) = direction_toward(s.midpoint(), v);
    let dn = dx.hypot(dy);
    if dn <= ZERO_EPS {
        return 0.0;
    }
    let sx = s.p2.x - s.p1.x;
    let sy = s.p2.y - s.p1.y;
    let c = (sx * dy - sy * dx).abs();
    let d = (sx * dx + sy * dy).abs();
    c.atan2(d)
}

pub fn consistency(s: &LineSegment, v: &HomogeneousPoint, tau: f64) -> Consistency {
    let r = residual(s, v);
    Consistency {
        consistent: r <= tau,
        residual: r,
    }
}

/// Unit ray through `v` for a pinhole camera, sign-canonicalized.
pub fn backproject(v: &HomogeneousPoint, cam: &CameraModel) -> Vec3 {
    let [x, y, w] = v.v;
    let d = [
        x - cam.principal_point.x * w,
        y - cam.principal_point.y * w,
        cam.focal * w,
    ];
    canonical_sign(normalize(d).expect("unit homogeneous point back-projects to non-zero ray"))
}

/// Image vanishing point of a 3D direction; inverse of [`backproject`].
pub fn project_direction(d: Vec3, cam: &CameraModel) -> Result<HomogeneousPoint, GeometryError> {
    let mut z = d[2];
    // Directions in the image plane come out of cross products with ~1e-17 depth.
    if z.abs() <= ZERO_EPS * norm(d) {
        z = 0.0;
    }
    HomogeneousPoint::from_vec([
        cam.focal * d[0] + cam.principal_point.x * z,
        cam.focal * d[1] + cam.principal_point.y * z,
        z,
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn seg(x1: f64, y1: f64, x2: f64, y2: f64) -> LineSegment {
        LineSegment::from_coords(x1, y1, x2, y2).unwrap()
    }

    fn assert_parallel(a: Vec3, b: Vec3) {
        assert!(norm(cross(a, b)) < 1e-12, "{a:?} not parallel to {b:?}");
    }

    #[test]
    fn segment_lines_for_axis_and_diagonal() {
        assert_parallel(segment_to_line(&seg(0.0, 0.0, 1.0, 0.0)).0, [0.0, 1.0, 0.0]);
        assert_parallel(segment_to_line(&seg(0.0, 0.0, 0.0, 1.0)).0, [1.0, 0.0, 0.0]);
        assert_parallel(segment_to_line(&seg(0.0, 0.0, 1.0, 1.0)).0, [1.0, -1.0, 0.0]);
    }

    #[test]
    fn degenerate_segment_rejected() {
        let p = NormalizedPoint::new(0.2, 0.2);
        assert_eq!(LineSegment::new(p, p), Err(GeometryError::DegenerateSegment));
        assert_eq!(
            HomogeneousLine::through(p, p),
            Err(GeometryError::DegenerateSegment)
        );
    }

    #[test]
    fn line_intersections() {
        let xa = segment_to_line(&seg(0.0, 0.0, 1.0, 0.0));
        let ya = segment_to_line(&seg(0.0, 0.0, 0.0, 1.0));
        assert_eq!(intersect_lines(&xa, &ya).unwrap().as_array(), [0.0, 0.0, 1.0]);

        let y_half = segment_to_line(&seg(0.0, 0.5, 1.0, 0.5));
        let p = intersect_lines(&xa, &y_half).unwrap();
        assert_eq!(p.as_array(), [1.0, 0.0, 0.0]);
        assert!(p.is_at_infinity());

        let diag = segment_to_line(&seg(0.0, 0.0, 1.0, 1.0));
        let anti = segment_to_line(&seg(0.0, 2.0, 2.0, 0.0));
        let p = intersect_lines(&diag, &anti).unwrap();
        let s = 1.0 / 3f64.sqrt();
        for (got, want) in p.as_array().iter().zip([s, s, s]) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-12);
        }
    }

    #[test]
    fn identical_lines_have_no_intersection() {
        let a = segment_to_line(&seg(0.0, 0.0, 1.0, 0.3));
        let b = segment_to_line(&seg(2.0, 0.6, -1.0, -0.3));
        assert_eq!(intersect_lines(&a, &b), Err(GeometryError::IdenticalLines));
    }

    #[test]
    fn consistency_examples() {
        let s = seg(0.0, 0.0, 1.0, 0.0);
        let c = consistency(&s, &HomogeneousPoint::new(10.0, 0.0, 1.0).unwrap(), 0.01);
        assert!(c.consistent);
        assert_abs_diff_eq!(c.residual, 0.0, epsilon = 1e-15);

        let c = consistency(&s, &HomogeneousPoint::new(0.5, 5.0, 1.0).unwrap(), 0.01);
        assert!(!c.consistent);
        assert_abs_diff_eq!(c.residual, FRAC_PI_2, epsilon = 1e-12);

        let a = 10f64.to_radians();
        let tilted = seg(0.0, 0.0, a.cos(), a.sin());
        let inf_x = HomogeneousPoint::at_infinity(1.0, 0.0).unwrap();
        let c = consistency(&tilted, &inf_x, 2f64.to_radians());
        assert!(!c.consistent);
        assert_abs_diff_eq!(c.residual, 0.174_532_925_199_432_95, epsilon = 1e-12);
    }

    #[test]
    fn vp_on_midpoint_has_zero_residual() {
        let s = seg(0.0, 0.0, 1.0, 0.5);
        let v = HomogeneousPoint::finite(s.midpoint());
        assert_eq!(residual(&s, &v), 0.0);
    }

    #[test]
    fn backprojection_examples() {
        let cam = CameraModel::with_focal(2.5).unwrap();
        assert_eq!(
            backproject(&HomogeneousPoint::new(0.0, 0.0, 1.0).unwrap(), &cam),
            [0.0, 0.0, 1.0]
        );
        assert_eq!(
            backproject(&HomogeneousPoint::at_infinity(1.0, 0.0).unwrap(), &cam),
            [1.0, 0.0, 0.0]
        );
        let d = backproject(&HomogeneousPoint::new(1.0, 0.0, 1.0).unwrap(), &CameraModel::default());
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert_abs_diff_eq!(d[0], h, epsilon = 1e-15);
        assert_abs_diff_eq!(d[1], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(d[2], h, epsilon = 1e-15);
    }

    #[test]
    fn projection_inverts_backprojection() {
        let cam = CameraModel {
            focal: 1.3,
            principal_point: NormalizedPoint::new(0.1, -0.05),
        };
        let v = HomogeneousPoint::new(0.7, -0.4, 1.0).unwrap();
        let back = project_direction(backproject(&v, &cam), &cam).unwrap();
        assert!(norm(cross(back.as_array(), v.as_array())) < 1e-12);
    }

    #[test]
    fn pixel_normalization_round_trip() {
        let p = NormalizedPoint::from_pixel(640.0, 240.0, 640, 480);
        assert_eq!(p, NormalizedPoint::new(1.0, 0.0));
        let q = NormalizedPoint::from_pixel(0.0, 0.0, 640, 480);
        assert_eq!(q, NormalizedPoint::new(-1.0, -0.75));
        assert_eq!(q.to_pixel(640, 480), (0.0, 0.0));
        assert_eq!(CanvasExtent::from_dims(640, 480).half_height, 0.75);
    }

    #[test]
    fn homogeneous_zero_rejected_and_sign_canonical() {
        assert!(HomogeneousPoint::new(0.0, 0.0, 0.0).is_err());
        let p = HomogeneousPoint::new(-2.0, 1.0, -1.0).unwrap();
        assert!(p.x() > 0.0);
        let q = HomogeneousPoint::new(0.0, -3.0, 1.0).unwrap();
        assert!(q.y() > 0.0 && q.w() < 0.0);
    }

    fn arb_segment() -> impl Strategy<Value = LineSegment> {
        (-1.0..1.0f64, -1.0..1.0f64, 0.05..1.0f64, 0.0..PI)
            .prop_map(|(x, y, len, a)| seg(x, y, x + len * a.cos(), y + len * a.sin()))
    }

    proptest! {
        #[test]
        fn intersection_symmetric_up_to_sign(a in arb_segment(), b in arb_segment()) {
            let (la, lb) = (segment_to_line(&a), segment_to_line(&b));
            if let (Ok(p), Ok(q)) = (intersect_lines(&la, &lb), intersect_lines(&lb, &la)) {
                prop_assert!(norm(cross(p.as_array(), q.as_array())) < 1e-9);
            }
        }

        #[test]
        fn sources_consistent_with_own_intersection(a in arb_segment(), b in arb_segment()) {
            let (la, lb) = (segment_to_line(&a), segment_to_line(&b));
            if let Ok(p) = intersect_lines(&la, &lb) {
                prop_assert!(residual(&a, &p) <= 1e-9);
                prop_assert!(residual(&b, &p) <= 1e-9);
                prop_assert!(consistency(&a, &p, 1e-6).consistent);
            }
        }

        #[test]
        fn backprojection_scale_invariant(x in -5.0..5.0f64, y in -5.0..5.0f64, w in -2.0..2.0f64,
                                          c in 0.01..100.0f64, f in 0.2..4.0f64) {
            prop_assume!(x.abs() + y.abs() + w.abs() > 1e-3);
            let cam = CameraModel::with_focal(f).unwrap();
            let a = backproject(&HomogeneousPoint::new(x, y, w).unwrap(), &cam);
            let b = backproject(&HomogeneousPoint::new(c * x, c * y, c * w).unwrap(), &cam);
            prop_assert!(axis_angle(a, b) < 1e-9);
            prop_assert!((norm(a) - 1.0).abs() < 1e-12);
        }

        #[test]
        fn residual_is_folded(s in arb_segment(), x in -5.0..5.0f64, y in -5.0..5.0f64, w in -1.0..1.0f64) {
            prop_assume!(x.abs() + y.abs() + w.abs() > 1e-3);
            let r = residual(&s, &HomogeneousPoint::new(x, y, w).unwrap());
            prop_assert!((0.0..=FRAC_PI_2 + 1e-12).contains(&r));
        }
    }
}
