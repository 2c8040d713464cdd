//! Exact integer rasterization of thick strokes and box bands.
//!
//! Coordinates are fixed point in 1/16 pixel. Pixel `(i, j)` has its center at
//! `(16 i + 8, 16 j + 8)`. A pixel is covered by a stroke when its center lies
//! within half the line width of the infinite line (perpendicular distance)
//! and between the endpoints along the major axis. Every test is an exact
//! integer comparison, so output is identical across platforms and commutes
//! with mirroring the canvas.

use crate::raster::GrayImage;

pub const SUBPIXEL: i64 = 16;
const HALF: i64 = SUBPIXEL / 2;

/// Continuous pixel coordinate to fixed point.
pub fn to_fixed(c: f64) -> i64 {
    (c * SUBPIXEL as f64).round() as i64
}

#[inline]
fn center(i: i64) -> i64 {
    SUBPIXEL * i + HALF
}

/// First and last pixel index whose center lies in `[lo, hi]`.
fn centers_within(lo: i64, hi: i64, limit: u32) -> Option<(i64, i64)> {
    // smallest i with 16 i + 8 >= lo
    let first = (lo - HALF).div_euclid(SUBPIXEL) + i64::from((lo - HALF).rem_euclid(SUBPIXEL) != 0);
    let last = (hi - HALF).div_euclid(SUBPIXEL);
    let first = first.max(0);
    let last = last.min(limit as i64 - 1);
    (first <= last).then_some((first, last))
}

/// Draws a segment between fixed-point endpoints with the given width in pixels.
pub fn draw_stroke(img: &mut GrayImage, a: (i64, i64), b: (i64, i64), width: u32, value: u8) {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    if dx == 0 && dy == 0 {
        return;
    }
    let len2 = (dx as i128) * (dx as i128) + (dy as i128) * (dy as i128);
    let half_w = HALF as i128 * width as i128;
    let bound = half_w * half_w * len2;
    let len = (len2 as f64).sqrt();
    if dx.abs() >= dy.abs() {
        let Some((c0, c1)) = centers_within(a.0.min(b.0), a.0.max(b.0), img.width()) else {
            return;
        };
        let spread = (half_w as f64 * len / dx.abs() as f64 / SUBPIXEL as f64).ceil() as i64 + 2;
        for i in c0..=c1 {
            let cx = center(i);
            // (cy - y(cx)) * dx = cy*dx - (a.y*dx + (cx - a.x)*dy)
            let base = a.1 as i128 * dx as i128 + (cx - a.0) as i128 * dy as i128;
            let row = ((base as f64 / dx as f64) - HALF as f64) / SUBPIXEL as f64;
            let r0 = (row.floor() as i64 - spread).max(0);
            let r1 = (row.ceil() as i64 + spread).min(img.height() as i64 - 1);
            for r in r0..=r1 {
                let e = center(r) as i128 * dx as i128 - base;
                if e * e <= bound {
                    img.set(i as u32, r as u32, value);
                }
            }
        }
    } else {
        let Some((r0, r1)) = centers_within(a.1.min(b.1), a.1.max(b.1), img.height()) else {
            return;
        };
        let spread = (half_w as f64 * len / dy.abs() as f64 / SUBPIXEL as f64).ceil() as i64 + 2;
        for r in r0..=r1 {
            let cy = center(r);
            let base = a.0 as i128 * dy as i128 + (cy - a.1) as i128 * dx as i128;
            let col = ((base as f64 / dy as f64) - HALF as f64) / SUBPIXEL as f64;
            let c0 = (col.floor() as i64 - spread).max(0);
            let c1 = (col.ceil() as i64 + spread).min(img.width() as i64 - 1);
            for c in c0..=c1 {
                let e = center(c) as i128 * dy as i128 - base;
                if e * e <= bound {
                    img.set(c as u32, r as u32, value);
                }
            }
        }
    }
}

/// Fills pixels whose centers lie in the closed fixed-point rectangle.
pub fn fill_rect(img: &mut GrayImage, x0: i64, y0: i64, x1: i64, y1: i64, value: u8) {
    let (Some((c0, c1)), Some((r0, r1))) = (
        centers_within(x0, x1, img.width()),
        centers_within(y0, y1, img.height()),
    ) else {
        return;
    };
    for r in r0..=r1 {
        for c in c0..=c1 {
            img.set(c as u32, r as u32, value);
        }
    }
}

/// Rectangle outline whose bands of `width` pixels lie inside the box.
pub fn draw_box_outline(
    img: &mut GrayImage,
    x0: i64,
    y0: i64,
    x1: i64,
    y1: i64,
    width: u32,
    value: u8,
) {
    let w = SUBPIXEL * width as i64;
    fill_rect(img, x0, y0, (x0 + w).min(x1), y1, value);
    fill_rect(img, (x1 - w).max(x0), y0, x1, y1, value);
    fill_rect(img, x0, y0, x1, (y0 + w).min(y1), value);
    fill_rect(img, x0, (y1 - w).max(y0), x1, y1, value);
}
