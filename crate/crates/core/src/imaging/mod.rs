//! 8-bit rasters and the conversions between files and numeric code.

mod jpeg;
pub mod pnm;

pub use jpeg::{decode_jpeg, encode_jpeg};

use crate::error::{Error, Result};

/// Row-major 8-bit raster with one (gray) or three (RGB) interleaved channels.
#[derive(Clone, PartialEq, Eq)]
pub struct Image {
    width: usize,
    height: usize,
    channels: usize,
    pixels: Vec<u8>,
}

impl std::fmt::Debug for Image {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Image")
            .field("width", &self.width)
            .field("height", &self.height)
            .field("channels", &self.channels)
            .finish_non_exhaustive()
    }
}

impl Image {
    pub fn new(width: usize, height: usize, channels: usize, pixels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidImage(format!("zero extent {width}x{height}")));
        }
        if channels != 1 && channels != 3 {
            return Err(Error::InvalidImage(format!("unsupported channel count {channels}")));
        }
        if pixels.len() != width * height * channels {
            return Err(Error::InvalidImage(format!(
                "pixel buffer has {} samples, expected {}x{}x{}",
                pixels.len(),
                width,
                height,
                channels
            )));
        }
        Ok(Self { width, height, channels, pixels })
    }

    /// Image with every sample set to `value`.
    pub fn filled(width: usize, height: usize, channels: usize, value: u8) -> Result<Self> {
        Self::new(width, height, channels, vec![value; width * height * channels])
    }

    /// Builds an image by evaluating `f(x, y, channel)` for every sample.
    pub fn from_fn(
        width: usize,
        height: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> u8,
    ) -> Result<Self> {
        let mut pixels = Vec::with_capacity(width * height * channels);
        for y in 0..height {
            for x in 0..width {
                for c in 0..channels {
                    pixels.push(f(x, y, c));
                }
            }
        }
        Self::new(width, height, channels, pixels)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn into_pixels(self) -> Vec<u8> {
        self.pixels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> u8 {
        self.pixels[(y * self.width + x) * self.channels + c]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, c: usize, v: u8) {
        let idx = (y * self.width + x) * self.channels + c;
        self.pixels[idx] = v;
    }

    /// The samples of pixel `(x, y)`.
    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> &[u8] {
        let start = (y * self.width + x) * self.channels;
        &self.pixels[start..start + self.channels]
    }

    pub(crate) fn pixels_mut(&mut self) -> &mut [u8] {
        &mut self.pixels
    }

    /// Checks the minimum size error level analysis needs (one full 8x8 block).
    pub fn ensure_block_sized(&self) -> Result<()> {
        if self.width < 8 || self.height < 8 {
            return Err(Error::InvalidImage(format!(
                "{}x{} is smaller than one 8x8 block",
                self.width, self.height
            )));
        }
        Ok(())
    }

    /// Expands a gray image to three identical channels; RGB images are cloned.
    pub fn to_rgb(&self) -> Image {
        if self.channels == 3 {
            return self.clone();
        }
        let pixels = self.pixels.iter().flat_map(|&v| [v, v, v]).collect();
        Image { width: self.width, height: self.height, channels: 3, pixels }
    }
}

/// JPEG quality factor, validated to `1..=100`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct JpegQuality(u8);

impl JpegQuality {
    pub fn new(q: i64) -> Result<Self> {
        if (1..=100).contains(&q) {
            Ok(Self(q as u8))
        } else {
            Err(Error::InvalidQuality(q))
        }
    }

    pub fn get(self) -> u8 {
        self.0
    }
}

impl TryFrom<i64> for JpegQuality {
    type Error = Error;

    fn try_from(q: i64) -> Result<Self> {
        Self::new(q)
    }
}

/// Rec. 601 luma, `round(0.299 R + 0.587 G + 0.114 B)`. Gray input is returned unchanged.
pub fn to_grayscale(img: &Image) -> Image {
    if img.channels == 1 {
        return img.clone();
    }
    let pixels = img
        .pixels
        .chunks_exact(3)
        .map(|p| {
            let weighted = 299 * p[0] as u32 + 587 * p[1] as u32 + 114 * p[2] as u32;
            ((weighted + 500) / 1000) as u8
        })
        .collect();
    Image { width: img.width, height: img.height, channels: 1, pixels }
}

/// Bilinear resize using pixel-center alignment: destination pixel `d` samples
/// source coordinate `(d + 0.5) * src / dst - 0.5`, clamped to the border.
/// Equal sizes map every pixel onto itself, so same-size resize is exact.
pub fn resize(img: &Image, w: usize, h: usize) -> Result<Image> {
    if w == 0 || h == 0 {
        return Err(Error::InvalidImage(format!("resize target {w}x{h} has a zero extent")));
    }
    if w == img.width && h == img.height {
        return Ok(img.clone());
    }
    let xs = sample_axis(img.width, w);
    let ys = sample_axis(img.height, h);
    let ch = img.channels;
    let mut pixels = Vec::with_capacity(w * h * ch);
    for &(y0, y1, fy) in &ys {
        for &(x0, x1, fx) in &xs {
            for c in 0..ch {
                let p00 = img.get(x0, y0, c) as f32;
                let p10 = img.get(x1, y0, c) as f32;
                let p01 = img.get(x0, y1, c) as f32;
                let p11 = img.get(x1, y1, c) as f32;
                let top = p00 + (p10 - p00) * fx;
                let bottom = p01 + (p11 - p01) * fx;
                let v = top + (bottom - top) * fy;
                pixels.push(v.round().clamp(0.0, 255.0) as u8);
            }
        }
    }
    Image::new(w, h, ch, pixels)
}

/// Per destination index: (lower source index, upper source index, weight of upper).
fn sample_axis(src: usize, dst: usize) -> Vec<(usize, usize, f32)> {
    let scale = src as f64 / dst as f64;
    (0..dst)
        .map(|d| {
            let s = ((d as f64 + 0.5) * scale - 0.5).clamp(0.0, (src - 1) as f64);
            let lo = s.floor() as usize;
            let hi = (lo + 1).min(src - 1);
            (lo, hi, (s - lo as f64) as f32)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quality_range_is_enforced() {
        assert!(JpegQuality::new(0).is_err());
        assert!(JpegQuality::new(101).is_err());
        assert_eq!(JpegQuality::new(1).unwrap().get(), 1);
        assert_eq!(JpegQuality::new(100).unwrap().get(), 100);
    }

    #[test]
    fn image_rejects_bad_buffers() {
        assert!(Image::new(2, 2, 3, vec![0; 11]).is_err());
        assert!(Image::new(2, 2, 2, vec![0; 8]).is_err());
        assert!(Image::new(0, 2, 1, vec![]).is_err());
    }

    #[test]
    fn grayscale_luma_values() {
        let red = Image::new(1, 1, 3, vec![255, 0, 0]).unwrap();
        assert_eq!(to_grayscale(&red).pixels(), &[76]);
        let white = Image::filled(3, 2, 3, 255).unwrap();
        assert!(to_grayscale(&white).pixels().iter().all(|&v| v == 255));
        let gray = Image::from_fn(4, 4, 1, |x, y, _| (x * 40 + y) as u8).unwrap();
        assert_eq!(to_grayscale(&gray), gray);
    }

    #[test]
    fn resize_identity_and_constant_extension() {
        let img = Image::from_fn(7, 5, 3, |x, y, c| (x * 31 + y * 17 + c * 5) as u8).unwrap();
        assert_eq!(resize(&img, 7, 5).unwrap(), img);
        let one = Image::new(1, 1, 1, vec![93]).unwrap();
        let up = resize(&one, 4, 4).unwrap();
        assert!(up.pixels().iter().all(|&v| v == 93));
    }

    #[test]
    fn resize_checkerboard_averages() {
        let board = Image::new(2, 2, 1, vec![0, 255, 255, 0]).unwrap();
        let avg = resize(&board, 1, 1).unwrap().pixels()[0] as i32;
        assert!((avg - 128).abs() <= 1, "got {avg}");
    }
}
