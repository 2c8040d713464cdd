//! Scanline reference rasterizer for the golden fixtures.
//!
//! Visits every pixel and tests its center directly, in plain floating point.
//! All fixture coordinates are multiples of 1/16 px, so every product below is
//! exact.

use std::path::PathBuf;

use condforge::conditioning::{parse_scene_spec, SceneSpec};
use condforge::raster::GrayImage;

pub const FIXTURES: [&str; 3] = ["one_box", "convergence", "parallel"];

pub fn golden_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

pub fn fixture_spec(name: &str) -> SceneSpec {
    let text = std::fs::read_to_string(golden_dir().join(format!("{name}.toml"))).unwrap();
    parse_scene_spec(&text).unwrap()
}

/// Pixels whose centers lie within `width / 2` of the segment's line and
/// between its endpoints along the major axis.
pub fn reference_stroke(img: &mut GrayImage, a: (f64, f64), b: (f64, f64), width: f64, value: u8) {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let major_x = dx.abs() >= dy.abs();
    for j in 0..img.height() {
        for i in 0..img.width() {
            let (cx, cy) = (i as f64 + 0.5, j as f64 + 0.5);
            let cross = (cx - a.0) * dy - (cy - a.1) * dx;
            let within = cross * cross <= (width / 2.0).powi(2) * (dx * dx + dy * dy);
            let between = if major_x {
                cx >= a.0.min(b.0) && cx <= a.0.max(b.0)
            } else {
                cy >= a.1.min(b.1) && cy <= a.1.max(b.1)
            };
            if within && between {
                img.set(i, j, value);
            }
        }
    }
}

/// Box outline with bands of `width` px inside the box.
pub fn reference_box(img: &mut GrayImage, x0: f64, y0: f64, x1: f64, y1: f64, width: f64, value: u8) {
    for j in 0..img.height() {
        for i in 0..img.width() {
            let (cx, cy) = (i as f64 + 0.5, j as f64 + 0.5);
            let inside = cx >= x0 && cx <= x1 && cy >= y0 && cy <= y1;
            let band = cx <= x0 + width || cx >= x1 - width || cy <= y0 + width || cy >= y1 - width;
            if inside && band {
                img.set(i, j, value);
            }
        }
    }
}

/// The three fixtures drawn from their known geometry.
pub fn reference_render(name: &str) -> GrayImage {
    let mut img = GrayImage::filled(512, 512, 0);
    match name {
        "one_box" => reference_box(&mut img, 128.0, 128.0, 384.0, 384.0, 2.0, 255),
        "convergence" => {
            for corner in [(0.0, 0.0), (512.0, 0.0), (512.0, 512.0), (0.0, 512.0)] {
                reference_stroke(&mut img, corner, (256.0, 256.0), 2.0, 255);
            }
        }
        "parallel" => {
            for y in [128.0, 384.0] {
                reference_stroke(&mut img, (0.0, y), (512.0, y), 2.0, 255);
            }
        }
        other => panic!("unknown fixture {other}"),
    }
    img
}

/// A random scene of boxes and bundles with finite and infinite VPs.
pub fn random_scene<R: rand::Rng>(rng: &mut R) -> SceneSpec {
    use condforge::conditioning::{BoundingBox, Canvas, RenderStyle, VanishingLineBundle};
    use condforge::geometry::{HomogeneousPoint, NormalizedPoint};
    let canvas = Canvas::new(rng.random_range(64..300), rng.random_range(64..300));
    let boxes = (0..rng.random_range(0..4))
        .map(|_| {
            let (x, y) = (rng.random_range(0.0..0.9), rng.random_range(0.0..0.9));
            let (w, h): (f64, f64) = (rng.random_range(0.02..0.5), rng.random_range(0.02..0.5));
            BoundingBox::new(x, y, (x + w).min(1.0), (y + h).min(1.0)).unwrap()
        })
        .collect();
    let bundles = (0..rng.random_range(0..3))
        .map(|_| {
            let w = if rng.random_bool(0.3) { 0.0 } else { rng.random_range(0.2..1.0) };
            VanishingLineBundle {
                vp: HomogeneousPoint::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0), w).unwrap(),
                anchors: (0..rng.random_range(1..6))
                    .map(|_| NormalizedPoint::new(rng.random_range(-1.2..1.2), rng.random_range(-1.2..1.2)))
                    .collect(),
                extend_to_vp: rng.random_bool(0.5),
            }
        })
        .collect();
    SceneSpec {
        canvas,
        boxes,
        bundles,
        style: RenderStyle {
            line_width: rng.random_range(1..5),
            ..RenderStyle::default_for(canvas)
        },
    }
}
