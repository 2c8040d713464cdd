//! Seeded synthetic inputs with known answers: Manhattan scenes planted from a
//! camera rotation, random segment fields, random textures and line rasters.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::conditioning::stroke::{draw_stroke, to_fixed};
use crate::geometry::{
    project_direction, CameraModel, HomogeneousPoint, LineSegment, NormalizedPoint,
    PerspectiveClass, Vec3,
};
use crate::raster::GrayImage;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SceneConfig {
    /// Uniform angular jitter applied to every inlier, in degrees.
    pub jitter_deg: f64,
    /// Share of all segments that are outliers.
    pub outlier_fraction: f64,
    /// Segments on the best-supported finite axis.
    pub dominant_count: usize,
    /// Segments on each other finite axis.
    pub finite_count: usize,
    /// Segments on each axis whose VP is (effectively) at infinity.
    pub infinite_count: usize,
    pub min_length: f64,
    pub max_length: f64,
    pub focal: f64,
    pub k_extent: f64,
    /// Finite VPs lie within `finite_margin * k_extent` of the center.
    pub finite_margin: f64,
    /// Infinite VPs lie beyond `infinite_margin * k_extent`, or at infinity.
    pub infinite_margin: f64,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            jitter_deg: 2.0,
            outlier_fraction: 0.25,
            dominant_count: 28,
            finite_count: 12,
            infinite_count: 8,
            min_length: 0.15,
            max_length: 0.45,
            focal: 1.0,
            k_extent: 4.0,
            finite_margin: 0.75,
            infinite_margin: 2.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PlantedScene {
    /// Columns of the camera-from-world rotation: the three scene axes.
    pub directions: [Vec3; 3],
    pub vps: [HomogeneousPoint; 3],
    pub class: PerspectiveClass,
    pub segments: Vec<LineSegment>,
    /// Planted axis of each segment; `None` for outliers.
    pub labels: Vec<Option<usize>>,
}

fn mat_mul(a: [[f64; 3]; 3], b: [[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let mut m = [[0.0; 3]; 3];
    for (i, row) in m.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    m
}

/// Rotation `Rz(roll) Ry(yaw) Rx(pitch)`, angles in degrees.
pub fn rotation(yaw: f64, pitch: f64, roll: f64) -> [[f64; 3]; 3] {
    let (sy, cy) = yaw.to_radians().sin_cos();
    let (sp, cp) = pitch.to_radians().sin_cos();
    let (sr, cr) = roll.to_radians().sin_cos();
    let rx = [[1.0, 0.0, 0.0], [0.0, cp, -sp], [0.0, sp, cp]];
    let ry = [[cy, 0.0, sy], [0.0, 1.0, 0.0], [-sy, 0.0, cy]];
    let rz = [[cr, -sr, 0.0], [sr, cr, 0.0], [0.0, 0.0, 1.0]];
    mat_mul(rz, mat_mul(ry, rx))
}

fn columns(r: [[f64; 3]; 3]) -> [Vec3; 3] {
    [
        [r[0][0], r[1][0], r[2][0]],
        [r[0][1], r[1][1], r[2][1]],
        [r[0][2], r[1][2], r[2][2]],
    ]
}

/// `Some(true)` finite with margin, `Some(false)` infinite with margin,
/// `None` inside the ambiguous band.
fn vp_kind(v: &HomogeneousPoint, cfg: &SceneConfig) -> Option<bool> {
    let Some(p) = v.euclidean() else {
        return Some(false);
    };
    let r = p.x.abs().max(p.y.abs());
    if r <= cfg.finite_margin * cfg.k_extent {
        Some(true)
    } else if r >= cfg.infinite_margin * cfg.k_extent {
        Some(false)
    } else {
        None
    }
}

fn signed_range<R: Rng + ?Sized>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    let v = rng.random_range(lo..=hi);
    if rng.random_bool(0.5) {
        v
    } else {
        -v
    }
}

fn sample_rotation<R: Rng + ?Sized>(rng: &mut R, class: PerspectiveClass) -> [[f64; 3]; 3] {
    match class {
        PerspectiveClass::OnePoint => rotation(
            rng.random_range(-6.0..=6.0),
            rng.random_range(-6.0..=6.0),
            rng.random_range(-180.0..180.0),
        ),
        PerspectiveClass::TwoPoint => rotation(
            signed_range(rng, 20.0, 70.0),
            rng.random_range(-5.0..=5.0),
            rng.random_range(-10.0..=10.0),
        ),
        PerspectiveClass::ThreePoint => rotation(
            signed_range(rng, 30.0, 60.0),
            signed_range(rng, 30.0, 50.0),
            rng.random_range(-10.0..=10.0),
        ),
        PerspectiveClass::None => rotation(
            rng.random_range(-180.0..180.0),
            rng.random_range(-180.0..180.0),
            rng.random_range(-180.0..180.0),
        ),
    }
}

fn rotate(d: (f64, f64), angle: f64) -> (f64, f64) {
    let (s, c) = angle.sin_cos();
    (c * d.0 - s * d.1, s * d.0 + c * d.1)
}

const BOUND: f64 = 0.98;

fn inside(p: (f64, f64)) -> bool {
    p.0.abs() <= BOUND && p.1.abs() <= BOUND
}

/// A jittered segment heading toward `vp`, fully inside the canvas.
fn segment_toward<R: Rng + ?Sized>(rng: &mut R, vp: &HomogeneousPoint, cfg: &SceneConfig) -> LineSegment {
    let jitter = cfg.jitter_deg.to_radians();
    loop {
        let m = (rng.random_range(-0.9..0.9), rng.random_range(-0.9..0.9));
        let len = rng.random_range(cfg.min_length..cfg.max_length);
        let d = match vp.euclidean() {
            Some(v) => {
                let d = (v.x - m.0, v.y - m.1);
                let n = d.0.hypot(d.1);
                // keep strokes off the VP so they do not pile up on it
                if n < len / 2.0 + 0.08 {
                    continue;
                }
                (d.0 / n, d.1 / n)
            }
            None => {
                let n = vp.x().hypot(vp.y());
                (vp.x() / n, vp.y() / n)
            }
        };
        let d = rotate(d, rng.random_range(-jitter..=jitter));
        let a = (m.0 - 0.5 * len * d.0, m.1 - 0.5 * len * d.1);
        let b = (m.0 + 0.5 * len * d.0, m.1 + 0.5 * len * d.1);
        if inside(a) && inside(b) {
            return LineSegment::from_coords(a.0, a.1, b.0, b.1).expect("non-zero length");
        }
    }
}

fn random_segment<R: Rng + ?Sized>(rng: &mut R, min_len: f64, max_len: f64) -> LineSegment {
    loop {
        let m = (rng.random_range(-0.9..0.9), rng.random_range(-0.9..0.9));
        let len = rng.random_range(min_len..max_len);
        let t = rng.random_range(0.0..std::f64::consts::PI);
        let d = (t.cos(), t.sin());
        let a = (m.0 - 0.5 * len * d.0, m.1 - 0.5 * len * d.1);
        let b = (m.0 + 0.5 * len * d.0, m.1 + 0.5 * len * d.1);
        if inside(a) && inside(b) {
            return LineSegment::from_coords(a.0, a.1, b.0, b.1).expect("non-zero length");
        }
    }
}

/// Segments with uniform random position, orientation and length.
pub fn random_segment_field<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<LineSegment> {
    (0..n).map(|_| random_segment(rng, 0.1, 0.45)).collect()
}

/// A Manhattan scene of the given class on a square canvas. Rotations are
/// rejection-sampled until every VP is clearly finite or clearly infinite.
pub fn planted_scene<R: Rng + ?Sized>(
    rng: &mut R,
    class: PerspectiveClass,
    cfg: &SceneConfig,
) -> PlantedScene {
    let cam = CameraModel::with_focal(cfg.focal).expect("positive focal");
    let (directions, vps, finite) = loop {
        let dirs = columns(sample_rotation(rng, class));
        let vps = dirs.map(|d| project_direction(d, &cam).expect("unit direction"));
        let kinds: Option<Vec<bool>> = vps.iter().map(|v| vp_kind(v, cfg)).collect();
        let Some(kinds) = kinds else { continue };
        let n = kinds.iter().filter(|&&k| k).count();
        if PerspectiveClass::from_finite_count(n) == class {
            break (dirs, vps, kinds);
        }
    };
    // the finite axis nearest the center carries the most segments
    let dominant = (0..3).filter(|&i| finite[i]).min_by(|&a, &b| {
        let r = |i: usize| {
            let p = vps[i].euclidean().expect("finite");
            p.x.hypot(p.y)
        };
        r(a).total_cmp(&r(b))
    });
    let mut segments = Vec::new();
    let mut labels = Vec::new();
    for axis in 0..3 {
        let count = if Some(axis) == dominant {
            cfg.dominant_count
        } else if finite[axis] {
            cfg.finite_count
        } else {
            cfg.infinite_count
        };
        for _ in 0..count {
            segments.push(segment_toward(rng, &vps[axis], cfg));
            labels.push(Some(axis));
        }
    }
    let inliers = segments.len() as f64;
    let outliers = (cfg.outlier_fraction / (1.0 - cfg.outlier_fraction) * inliers).round() as usize;
    for _ in 0..outliers {
        segments.push(random_segment(rng, cfg.min_length, cfg.max_length));
        labels.push(None);
    }
    PlantedScene {
        directions,
        vps,
        class,
        segments,
        labels,
    }
}

/// Draws normalized segments onto a `width x height` canvas.
pub fn render_segments(
    segments: &[LineSegment],
    width: u32,
    height: u32,
    line_width: u32,
    foreground: u8,
    background: u8,
) -> GrayImage {
    let mut img = GrayImage::filled(width, height, background);
    for s in segments {
        let a = s.p1().to_pixel(width, height);
        let b = s.p2().to_pixel(width, height);
        draw_stroke(
            &mut img,
            (to_fixed(a.0), to_fixed(a.1)),
            (to_fixed(b.0), to_fixed(b.1)),
            line_width,
            foreground,
        );
    }
    img
}

/// Smooth value noise, random-orientation strokes and pixel noise.
pub fn random_texture<R: Rng + ?Sized>(rng: &mut R, width: u32, height: u32) -> GrayImage {
    let cell = 32usize;
    let gw = width as usize / cell + 2;
    let gh = height as usize / cell + 2;
    let grid: Vec<f64> = (0..gw * gh).map(|_| rng.random_range(0.0..255.0)).collect();
    let noise = Normal::new(0.0, 6.0).expect("valid sigma");
    let mut px = Vec::with_capacity(width as usize * height as usize);
    for y in 0..height as usize {
        for x in 0..width as usize {
            let (gx, gy) = (x / cell, y / cell);
            let (fx, fy) = ((x % cell) as f64 / cell as f64, (y % cell) as f64 / cell as f64);
            let g = |i: usize, j: usize| grid[j * gw + i];
            let top = g(gx, gy) * (1.0 - fx) + g(gx + 1, gy) * fx;
            let bottom = g(gx, gy + 1) * (1.0 - fx) + g(gx + 1, gy + 1) * fx;
            let v = top * (1.0 - fy) + bottom * fy + noise.sample(rng);
            px.push(v.round().clamp(0.0, 255.0) as u8);
        }
    }
    let mut img = GrayImage::from_raw(width, height, px).expect("sized buffer");
    let long = width.max(height) as f64;
    for _ in 0..rng.random_range(20..60) {
        let s = random_segment(rng, 15.0 / long * 2.0, 80.0 / long * 2.0);
        let a = s.p1().to_pixel(width, height);
        let b = s.p2().to_pixel(width, height);
        let value = rng.random_range(0..=255u8);
        let w = rng.random_range(1..=3);
        draw_stroke(&mut img, (to_fixed(a.0), to_fixed(a.1)), (to_fixed(b.0), to_fixed(b.1)), w, value);
    }
    img
}

pub type PixelLine = ((f64, f64), (f64, f64));

fn point_segment_distance(p: (f64, f64), s: PixelLine) -> f64 {
    let (a, b) = s;
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let t = (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / (dx * dx + dy * dy)).clamp(0.0, 1.0);
    (p.0 - a.0 - t * dx).hypot(p.1 - a.1 - t * dy)
}

fn segments_cross(s: PixelLine, t: PixelLine) -> bool {
    let orient = |a: (f64, f64), b: (f64, f64), c: (f64, f64)| {
        (b.0 - a.0) * (c.1 - a.1) - (b.1 - a.1) * (c.0 - a.0)
    };
    let d1 = orient(t.0, t.1, s.0);
    let d2 = orient(t.0, t.1, s.1);
    let d3 = orient(s.0, s.1, t.0);
    let d4 = orient(s.0, s.1, t.1);
    d1 * d2 < 0.0 && d3 * d4 < 0.0
}

pub fn segment_distance(s: PixelLine, t: PixelLine) -> f64 {
    if segments_cross(s, t) {
        return 0.0;
    }
    [
        point_segment_distance(s.0, t),
        point_segment_distance(s.1, t),
        point_segment_distance(t.0, s),
        point_segment_distance(t.1, s),
    ]
    .into_iter()
    .fold(f64::INFINITY, f64::min)
}

/// `n` well-separated lines, each with contrast of at least 50 gray levels
/// against the background and length at least 10% of the diagonal. Returns
/// the raster and the ground-truth endpoints in continuous pixel coordinates.
pub fn line_raster<R: Rng + ?Sized>(
    rng: &mut R,
    width: u32,
    height: u32,
    n: usize,
) -> (GrayImage, Vec<PixelLine>) {
    let diag = (width as f64).hypot(height as f64);
    let min_gap = 12.0;
    let margin = 8.0;
    let background = rng.random_range(0..=255u8);
    let mut img = GrayImage::filled(width, height, background);
    let mut lines: Vec<PixelLine> = Vec::with_capacity(n);
    while lines.len() < n {
        let len = rng.random_range(0.1 * diag..0.25 * diag);
        let t = rng.random_range(0.0..std::f64::consts::PI);
        let a = (
            rng.random_range(margin..width as f64 - margin),
            rng.random_range(margin..height as f64 - margin),
        );
        let b = (a.0 + len * t.cos(), a.1 + len * t.sin());
        if !(margin..=width as f64 - margin).contains(&b.0) || !(margin..=height as f64 - margin).contains(&b.1) {
            continue;
        }
        if lines.iter().any(|&l| segment_distance(l, (a, b)) < min_gap) {
            continue;
        }
        lines.push((a, b));
    }
    for &(a, b) in &lines {
        let fg = loop {
            let v = rng.random_range(0..=255u8);
            if (v as i32 - background as i32).abs() >= 50 {
                break v;
            }
        };
        draw_stroke(&mut img, (to_fixed(a.0), to_fixed(a.1)), (to_fixed(b.0), to_fixed(b.1)), 2, fg);
    }
    (img, lines)
}

/// Normalized point helper for tests and fixtures.
pub fn point(x: f64, y: f64) -> NormalizedPoint {
    NormalizedPoint::new(x, y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{axis_angle, consistency, is_finite_vp, CanvasExtent};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn rotation_is_orthonormal() {
        let d = columns(rotation(33.0, -12.0, 71.0));
        for i in 0..3 {
            for j in 0..3 {
                let dot: f64 = (0..3).map(|k| d[i][k] * d[j][k]).sum();
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((dot - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn planted_classes_hold() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let cfg = SceneConfig::default();
        for class in [
            PerspectiveClass::OnePoint,
            PerspectiveClass::TwoPoint,
            PerspectiveClass::ThreePoint,
        ] {
            for _ in 0..10 {
                let s = planted_scene(&mut rng, class, &cfg);
                let finite = s
                    .vps
                    .iter()
                    .filter(|v| is_finite_vp(v, cfg.k_extent, CanvasExtent::SQUARE))
                    .count();
                assert_eq!(PerspectiveClass::from_finite_count(finite), class);
                let outliers = s.labels.iter().filter(|l| l.is_none()).count() as f64;
                let share = outliers / s.segments.len() as f64;
                assert!((share - 0.25).abs() < 0.02, "{share}");
                for (seg, label) in s.segments.iter().zip(&s.labels) {
                    if let Some(a) = label {
                        let c = consistency(seg, &s.vps[*a], (cfg.jitter_deg + 1e-9).to_radians());
                        assert!(c.consistent, "residual {}", c.residual.to_degrees());
                    }
                    assert!(seg.p1().x.abs() <= 1.0 && seg.p2().y.abs() <= 1.0);
                }
                assert!(axis_angle(s.directions[0], s.directions[1]) > 89.9f64.to_radians());
            }
        }
    }

    #[test]
    fn same_seed_same_scene() {
        let cfg = SceneConfig::default();
        let a = planted_scene(&mut ChaCha8Rng::seed_from_u64(3), PerspectiveClass::TwoPoint, &cfg);
        let b = planted_scene(&mut ChaCha8Rng::seed_from_u64(3), PerspectiveClass::TwoPoint, &cfg);
        assert_eq!(a.segments, b.segments);
        let t1 = random_texture(&mut ChaCha8Rng::seed_from_u64(4), 64, 64);
        let t2 = random_texture(&mut ChaCha8Rng::seed_from_u64(4), 64, 64);
        assert_eq!(t1, t2);
    }

    #[test]
    fn line_raster_keeps_lines_apart() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let (img, lines) = line_raster(&mut rng, 256, 256, 8);
        assert_eq!(lines.len(), 8);
        for (i, &a) in lines.iter().enumerate() {
            for &b in &lines[i + 1..] {
                assert!(segment_distance(a, b) >= 12.0);
            }
        }
        assert_eq!(img.width(), 256);
    }

    #[test]
    fn crossing_segments_have_zero_distance() {
        assert_eq!(segment_distance(((0.0, 0.0), (2.0, 2.0)), ((0.0, 2.0), (2.0, 0.0))), 0.0);
        assert!((segment_distance(((0.0, 0.0), (1.0, 0.0)), ((0.0, 1.0), (1.0, 1.0))) - 1.0).abs() < 1e-12);
    }
}
