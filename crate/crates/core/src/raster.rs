//! Single-channel 8-bit rasters and the PNG/JPEG decoder boundary.

use std::io::Cursor;
use std::path::Path;

use image::{DynamicImage, ImageEncoder, ImageFormat};
use thiserror::Error;

/// Smallest width or height accepted by segment detection.
pub const MIN_DETECTION_SIDE: u32 = 16;

#[derive(Debug, Error)]
pub enum RasterError {
    #[error("image {width}x{height} is below the minimum of {min}x{min}")]
    TooSmall { width: u32, height: u32, min: u32 },
    #[error("pixel buffer has {got} bytes, expected {expected}")]
    BufferSize { got: usize, expected: usize },
    #[error("decode failed: {0}")]
    Decode(String),
    #[error("encode failed: {0}")]
    Encode(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Row-major 8-bit luminance image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    width: u32,
    height: u32,
    pixels: Vec<u8>,
}

impl GrayImage {
    pub fn filled(width: u32, height: u32, value: u8) -> Self {
        Self {
            width,
            height,
            pixels: vec![value; width as usize * height as usize],
        }
    }

    pub fn from_raw(width: u32, height: u32, pixels: Vec<u8>) -> Result<Self, RasterError> {
        let expected = width as usize * height as usize;
        if pixels.len() != expected {
            return Err(RasterError::BufferSize {
                got: pixels.len(),
                expected,
            });
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn into_pixels(self) -> Vec<u8> {
        self.pixels
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> u8 {
        self.pixels[y as usize * self.width as usize + x as usize]
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, value: u8) {
        let w = self.width as usize;
        self.pixels[y as usize * w + x as usize] = value;
    }

    /// Number of pixels equal to `value`.
    pub fn count(&self, value: u8) -> usize {
        self.pixels.iter().filter(|&&p| p == value).count()
    }

    /// Left-right mirror.
    pub fn mirrored(&self) -> Self {
        let w = self.width as usize;
        let mut out = self.pixels.clone();
        for row in out.chunks_mut(w) {
            row.reverse();
        }
        Self {
            width: self.width,
            height: self.height,
            pixels: out,
        }
    }

    /// Quarter turn clockwise: pixel (x, y) moves to (height - 1 - y, x).
    pub fn rotated_cw(&self) -> Self {
        let (w, h) = (self.width, self.height);
        let mut out = GrayImage::filled(h, w, 0);
        for y in 0..h {
            for x in 0..w {
                out.set(h - 1 - y, x, self.get(x, y));
            }
        }
        out
    }

    /// 8-bit grayscale PNG, no interlacing.
    pub fn encode_png(&self) -> Result<Vec<u8>, RasterError> {
        let mut buf = Vec::new();
        image::codecs::png::PngEncoder::new(&mut buf)
            .write_image(
                &self.pixels,
                self.width,
                self.height,
                image::ExtendedColorType::L8,
            )
            .map_err(|e| RasterError::Encode(e.to_string()))?;
        Ok(buf)
    }

    /// PNG with the gray channel replicated into RGB.
    pub fn encode_png_rgb(&self) -> Result<Vec<u8>, RasterError> {
        let rgb: Vec<u8> = self.pixels.iter().flat_map(|&p| [p, p, p]).collect();
        let mut buf = Vec::new();
        image::codecs::png::PngEncoder::new(&mut buf)
            .write_image(&rgb, self.width, self.height, image::ExtendedColorType::Rgb8)
            .map_err(|e| RasterError::Encode(e.to_string()))?;
        Ok(buf)
    }

    pub fn save_png(&self, path: &Path) -> Result<(), RasterError> {
        std::fs::write(path, self.encode_png()?)?;
        Ok(())
    }

    /// Decodes PNG or JPEG bytes, converting color to luminance with Rec. 601 weights.
    pub fn decode(bytes: &[u8]) -> Result<Self, RasterError> {
        let format = image::guess_format(bytes).map_err(|e| RasterError::Decode(e.to_string()))?;
        if !matches!(format, ImageFormat::Png | ImageFormat::Jpeg) {
            return Err(RasterError::Decode(format!("unsupported format {format:?}")));
        }
        let img = image::load(Cursor::new(bytes), format)
            .map_err(|e| RasterError::Decode(e.to_string()))?;
        Ok(Self::from_dynamic(&img))
    }

    pub fn open(path: &Path) -> Result<Self, RasterError> {
        Self::decode(&std::fs::read(path)?)
    }

    fn from_dynamic(img: &DynamicImage) -> Self {
        match img {
            DynamicImage::ImageLuma8(g) => Self {
                width: g.width(),
                height: g.height(),
                pixels: g.as_raw().clone(),
            },
            other => {
                let rgb = other.to_rgb8();
                let pixels = rgb
                    .pixels()
                    .map(|p| rec601_luma(p.0[0], p.0[1], p.0[2]))
                    .collect();
                Self {
                    width: rgb.width(),
                    height: rgb.height(),
                    pixels,
                }
            }
        }
    }
}

/// Rec. 601 luma, rounded to nearest.
pub fn rec601_luma(r: u8, g: u8, b: u8) -> u8 {
    let y = 0.299 * r as f64 + 0.587 * g as f64 + 0.114 * b as f64;
    y.round().clamp(0.0, 255.0) as u8
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn png_round_trip_preserves_pixels() {
        let mut img = GrayImage::filled(20, 17, 3);
        img.set(5, 9, 200);
        let back = GrayImage::decode(&img.encode_png().unwrap()).unwrap();
        assert_eq!(back, img);
    }

    #[test]
    fn rgb_png_decodes_to_same_gray() {
        let mut img = GrayImage::filled(20, 17, 90);
        img.set(1, 2, 255);
        let back = GrayImage::decode(&img.encode_png_rgb().unwrap()).unwrap();
        assert_eq!(back, img);
    }

    #[test]
    fn luma_weights() {
        assert_eq!(rec601_luma(255, 255, 255), 255);
        assert_eq!(rec601_luma(255, 0, 0), 76);
        assert_eq!(rec601_luma(0, 255, 0), 150);
        assert_eq!(rec601_luma(0, 0, 255), 29);
    }

    #[test]
    fn garbage_bytes_fail_to_decode() {
        assert!(matches!(
            GrayImage::decode(b"not an image"),
            Err(RasterError::Decode(_))
        ));
    }

    #[test]
    fn rotation_four_times_is_identity() {
        let mut img = GrayImage::filled(19, 23, 0);
        img.set(3, 4, 9);
        img.set(18, 0, 7);
        let r = img.rotated_cw().rotated_cw().rotated_cw().rotated_cw();
        assert_eq!(r, img);
        assert_eq!(img.rotated_cw().get(23 - 1 - 4, 3), 9);
    }
}
