//! Region-growing line segment detector.
//!
//! Pixels whose Sobel gradient magnitude exceeds a threshold are grouped into
//! 8-connected regions of agreeing level-line angle (modulo π). Each region is
//! fitted by magnitude-weighted principal axes; the two edges of a thin
//! stroke, and collinear fragments of one line, are then merged and refitted.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{LineSegment, NormalizedPoint};
use crate::raster::{GrayImage, MIN_DETECTION_SIDE};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DetectionError {
    #[error("image {width}x{height} is below the {MIN_DETECTION_SIDE} px minimum side")]
    TooSmall { width: u32, height: u32 },
    #[error("invalid detection parameter: {0}")]
    InvalidParameter(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectionParams {
    /// Minimum Sobel magnitude (8-bit units, kernel normalized by 8).
    pub gradient_threshold: f64,
    pub angle_tolerance_deg: f64,
    /// Minimum segment length as a fraction of the image diagonal.
    pub min_length_fraction: f64,
    /// Minimum share of the fitted rectangle covered by region pixels.
    pub min_density: f64,
    pub merge_angle_deg: f64,
    pub merge_distance_px: f64,
    pub merge_gap_px: f64,
}

impl Default for DetectionParams {
    fn default() -> Self {
        Self {
            gradient_threshold: 16.0,
            angle_tolerance_deg: 22.5,
            min_length_fraction: 0.02,
            min_density: 0.4,
            merge_angle_deg: 3.0,
            merge_distance_px: 5.0,
            merge_gap_px: 3.0,
        }
    }
}

impl DetectionParams {
    pub fn validate(&self) -> Result<(), DetectionError> {
        let checks = [
            ("gradient_threshold", self.gradient_threshold >= 0.0),
            (
                "angle_tolerance_deg",
                self.angle_tolerance_deg > 0.0 && self.angle_tolerance_deg < 90.0,
            ),
            (
                "min_length_fraction",
                (0.0..1.0).contains(&self.min_length_fraction),
            ),
            ("min_density", (0.0..=1.0).contains(&self.min_density)),
            (
                "merge_angle_deg",
                (0.0..90.0).contains(&self.merge_angle_deg),
            ),
            ("merge_distance_px", self.merge_distance_px >= 0.0),
            ("merge_gap_px", self.merge_gap_px >= 0.0),
        ];
        match checks.iter().find(|(_, ok)| !ok) {
            Some((name, _)) => Err(DetectionError::InvalidParameter(format!(
                "{name} out of range"
            ))),
            None => Ok(()),
        }
    }
}

/// A fitted segment in continuous pixel coordinates, before normalization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PixelSegment {
    pub x1: f64,
    pub y1: f64,
    pub x2: f64,
    pub y2: f64,
}

impl PixelSegment {
    pub fn length(&self) -> f64 {
        (self.x2 - self.x1).hypot(self.y2 - self.y1)
    }
}

struct Gradient {
    width: usize,
    height: usize,
    magnitude: Vec<f64>,
    /// Level-line angle in `[0, π)`.
    angle: Vec<f64>,
}

const SMOOTHING_SIGMA: f64 = 0.6;

/// Separable Gaussian blur with clamped borders. Softens the staircase of
/// aliased lines so that gradient angles along them stay coherent.
fn smooth(img: &GrayImage, sigma: f64) -> Vec<f64> {
    let (w, h) = (img.width() as usize, img.height() as usize);
    let radius = (3.0 * sigma).ceil() as i64;
    let kernel: Vec<f64> = (-radius..=radius)
        .map(|k| (-(k * k) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let norm: f64 = kernel.iter().sum();
    let pass = |src: &[f64], horizontal: bool| -> Vec<f64> {
        let mut out = vec![0.0; w * h];
        for y in 0..h {
            for x in 0..w {
                let mut acc = 0.0;
                for (k, wk) in (-radius..=radius).zip(&kernel) {
                    let (sx, sy) = if horizontal {
                        ((x as i64 + k).clamp(0, w as i64 - 1) as usize, y)
                    } else {
                        (x, (y as i64 + k).clamp(0, h as i64 - 1) as usize)
                    };
                    acc += wk * src[sy * w + sx];
                }
                out[y * w + x] = acc / norm;
            }
        }
        out
    };
    let raw: Vec<f64> = img.pixels().iter().map(|&v| v as f64).collect();
    pass(&pass(&raw, true), false)
}

fn sobel(img: &GrayImage) -> Gradient {
    let (w, h) = (img.width() as usize, img.height() as usize);
    let p = smooth(img, SMOOTHING_SIGMA);
    let at = |x: usize, y: usize| p[y * w + x];
    let mut magnitude = vec![0.0; w * h];
    let mut angle = vec![0.0; w * h];
    for y in 1..h - 1 {
        for x in 1..w - 1 {
            let gx = (at(x + 1, y - 1) + 2.0 * at(x + 1, y) + at(x + 1, y + 1)
                - at(x - 1, y - 1)
                - 2.0 * at(x - 1, y)
                - at(x - 1, y + 1))
                / 8.0;
            let gy = (at(x - 1, y + 1) + 2.0 * at(x, y + 1) + at(x + 1, y + 1)
                - at(x - 1, y - 1)
                - 2.0 * at(x, y - 1)
                - at(x + 1, y - 1))
                / 8.0;
            let i = y * w + x;
            magnitude[i] = gx.hypot(gy);
            // level line is perpendicular to the gradient
            angle[i] = gx.atan2(-gy).rem_euclid(std::f64::consts::PI);
        }
    }
    Gradient {
        width: w,
        height: h,
        magnitude,
        angle,
    }
}

/// Difference of two angles modulo π, in `[0, π/2]`.
fn angle_diff_mod_pi(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(std::f64::consts::PI);
    d.min(std::f64::consts::PI - d)
}

struct Region {
    pixels: Vec<usize>,
}

fn grow_regions(g: &Gradient, params: &DetectionParams) -> Vec<Region> {
    let tol = params.angle_tolerance_deg.to_radians();
    let mut seeds: Vec<usize> = (0..g.magnitude.len())
        .filter(|&i| g.magnitude[i] > params.gradient_threshold)
        .collect();
    seeds.sort_by(|&a, &b| g.magnitude[b].total_cmp(&g.magnitude[a]));
    let mut used = vec![false; g.magnitude.len()];
    let mut regions = Vec::new();
    for seed in seeds {
        if used[seed] {
            continue;
        }
        used[seed] = true;
        let mut pixels = vec![seed];
        // doubled-angle sums make the running mean well defined modulo π
        let (mut sc, mut ss) = ((2.0 * g.angle[seed]).cos(), (2.0 * g.angle[seed]).sin());
        let mut region_angle = g.angle[seed];
        let mut k = 0;
        while k < pixels.len() {
            let i = pixels[k];
            k += 1;
            let (x, y) = ((i % g.width) as i64, (i / g.width) as i64);
            for dy in -1..=1 {
                for dx in -1..=1 {
                    let (nx, ny) = (x + dx, y + dy);
                    if (dx == 0 && dy == 0)
                        || nx < 0
                        || ny < 0
                        || nx >= g.width as i64
                        || ny >= g.height as i64
                    {
                        continue;
                    }
                    let j = ny as usize * g.width + nx as usize;
                    if used[j]
                        || g.magnitude[j] <= params.gradient_threshold
                        || angle_diff_mod_pi(g.angle[j], region_angle) > tol
                    {
                        continue;
                    }
                    used[j] = true;
                    pixels.push(j);
                    sc += (2.0 * g.angle[j]).cos();
                    ss += (2.0 * g.angle[j]).sin();
                    region_angle = (0.5 * ss.atan2(sc)).rem_euclid(std::f64::consts::PI);
                }
            }
        }
        regions.push(Region { pixels });
    }
    regions
}

/// Principal-axis fit of weighted pixel centers.
struct Fit {
    segment: PixelSegment,
    /// Unit direction of the segment.
    dir: (f64, f64),
    width: f64,
    density: f64,
}

fn fit_pixels(pixels: &[usize], g: &Gradient) -> Option<Fit> {
    if pixels.len() < 2 {
        return None;
    }
    let center = |i: usize| ((i % g.width) as f64 + 0.5, (i / g.width) as f64 + 0.5);
    let (mut sw, mut sx, mut sy) = (0.0, 0.0, 0.0);
    for &i in pixels {
        let (x, y) = center(i);
        let w = g.magnitude[i];
        sw += w;
        sx += w * x;
        sy += w * y;
    }
    let (cx, cy) = (sx / sw, sy / sw);
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for &i in pixels {
        let (x, y) = center(i);
        let w = g.magnitude[i];
        sxx += w * (x - cx) * (x - cx);
        sxy += w * (x - cx) * (y - cy);
        syy += w * (y - cy) * (y - cy);
    }
    let theta = 0.5 * (2.0 * sxy).atan2(sxx - syy);
    let dir = (theta.cos(), theta.sin());
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut plo, mut phi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &i in pixels {
        let (x, y) = center(i);
        let along = (x - cx) * dir.0 + (y - cy) * dir.1;
        let across = -(x - cx) * dir.1 + (y - cy) * dir.0;
        lo = lo.min(along);
        hi = hi.max(along);
        plo = plo.min(across);
        phi = phi.max(across);
    }
    if hi - lo <= 0.0 {
        return None;
    }
    let width = phi - plo + 1.0;
    let density = pixels.len() as f64 / ((hi - lo + 1.0) * width);
    Some(Fit {
        segment: PixelSegment {
            x1: cx + lo * dir.0,
            y1: cy + lo * dir.1,
            x2: cx + hi * dir.0,
            y2: cy + hi * dir.1,
        },
        dir,
        width,
        density,
    })
}

struct Candidate {
    pixels: Vec<usize>,
    fit: Fit,
}

fn mergeable(a: &Fit, b: &Fit, params: &DetectionParams) -> bool {
    let cos = (a.dir.0 * b.dir.0 + a.dir.1 * b.dir.1).abs().min(1.0);
    if cos.acos() > params.merge_angle_deg.to_radians() {
        return false;
    }
    let s = &a.segment;
    let project = |x: f64, y: f64| {
        let (rx, ry) = (x - s.x1, y - s.y1);
        (rx * a.dir.0 + ry * a.dir.1, (-rx * a.dir.1 + ry * a.dir.0).abs())
    };
    let (t1, d1) = project(b.segment.x1, b.segment.y1);
    let (t2, d2) = project(b.segment.x2, b.segment.y2);
    if d1.max(d2) > params.merge_distance_px {
        return false;
    }
    let len = s.length();
    let (blo, bhi) = (t1.min(t2), t1.max(t2));
    let gap = (blo - len).max(0.0 - bhi).max(0.0);
    gap <= params.merge_gap_px
}

fn merge_candidates(mut cands: Vec<Candidate>, g: &Gradient, params: &DetectionParams) -> Vec<Candidate> {
    loop {
        cands.sort_by(|a, b| b.fit.segment.length().total_cmp(&a.fit.segment.length()));
        let mut merged_any = false;
        let mut i = 0;
        while i < cands.len() {
            let mut j = i + 1;
            while j < cands.len() {
                if mergeable(&cands[i].fit, &cands[j].fit, params) {
                    let mut pixels = cands[i].pixels.clone();
                    pixels.extend_from_slice(&cands[j].pixels);
                    // the union must still look like a line
                    if let Some(fit) = fit_pixels(&pixels, g).filter(|f| f.density >= params.min_density) {
                        cands[i] = Candidate { pixels, fit };
                        cands.remove(j);
                        merged_any = true;
                        continue;
                    }
                }
                j += 1;
            }
            i += 1;
        }
        if !merged_any {
            return cands;
        }
    }
}

/// Clips to `[0, w] x [0, h]`; projected endpoints of oblique regions can
/// overshoot the border by a fraction of a pixel.
fn clip_to_image(s: PixelSegment, w: f64, h: f64) -> Option<PixelSegment> {
    let (dx, dy) = (s.x2 - s.x1, s.y2 - s.y1);
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for (p, d, max) in [(s.x1, dx, w), (s.y1, dy, h)] {
        if d == 0.0 {
            if p < 0.0 || p > max {
                return None;
            }
            continue;
        }
        let (t0, t1) = ((0.0 - p) / d, (max - p) / d);
        lo = lo.max(t0.min(t1));
        hi = hi.min(t0.max(t1));
    }
    (lo < hi).then(|| PixelSegment {
        x1: (s.x1 + lo * dx).clamp(0.0, w),
        y1: (s.y1 + lo * dy).clamp(0.0, h),
        x2: (s.x1 + hi * dx).clamp(0.0, w),
        y2: (s.y1 + hi * dy).clamp(0.0, h),
    })
}

/// Segments in continuous pixel coordinates, longest first.
pub fn detect_pixel_segments(
    img: &GrayImage,
    params: &DetectionParams,
) -> Result<Vec<PixelSegment>, DetectionError> {
    params.validate()?;
    if img.width() < MIN_DETECTION_SIDE || img.height() < MIN_DETECTION_SIDE {
        return Err(DetectionError::TooSmall {
            width: img.width(),
            height: img.height(),
        });
    }
    let g = sobel(img);
    let min_len = params.min_length_fraction * (img.width() as f64).hypot(img.height() as f64);
    let mut cands = Vec::new();
    for region in grow_regions(&g, params) {
        let Some(fit) = fit_pixels(&region.pixels, &g) else {
            continue;
        };
        // fragments shorter than half the minimum can't reach it by merging with a peer
        if fit.segment.length() < 0.5 * min_len {
            continue;
        }
        cands.push(Candidate {
            pixels: region.pixels,
            fit,
        });
    }
    let mut out: Vec<PixelSegment> = merge_candidates(cands, &g, params)
        .into_iter()
        .filter(|c| {
            // both edges of a thin stroke are sparse alone and dense once merged
            c.fit.segment.length() >= min_len
                && c.fit.density >= params.min_density
                && c.fit.width <= c.fit.segment.length()
        })
        .filter_map(|c| clip_to_image(c.fit.segment, img.width() as f64, img.height() as f64))
        .collect();
    out.sort_by(|a, b| b.length().total_cmp(&a.length()));
    Ok(out)
}

/// Segments in normalized image coordinates, longest first.
pub fn detect_segments(
    img: &GrayImage,
    params: &DetectionParams,
) -> Result<Vec<LineSegment>, DetectionError> {
    let (w, h) = (img.width(), img.height());
    Ok(detect_pixel_segments(img, params)?
        .into_iter()
        .filter_map(|s| {
            LineSegment::new(
                NormalizedPoint::from_pixel(s.x1, s.y1, w, h),
                NormalizedPoint::from_pixel(s.x2, s.y2, w, h),
            )
            .ok()
        })
        .collect())
}
