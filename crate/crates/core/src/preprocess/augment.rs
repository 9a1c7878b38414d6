use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::imaging::Image;

/// Probabilities and ranges for the four randomized transforms. Defaults are
/// flip 0.5; rotate 0.9 within 20 degrees either way; zoom 0.3 in [1, 1.3];
/// grid distortion 0.6 on a 4x4 grid with 1 px node jitter.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentConfig {
    pub flip_lr_prob: f64,
    pub rotate_prob: f64,
    pub rotate_max_left_deg: f64,
    pub rotate_max_right_deg: f64,
    pub zoom_prob: f64,
    pub zoom_min_factor: f64,
    pub zoom_max_factor: f64,
    pub distort_prob: f64,
    pub distort_grid_w: usize,
    pub distort_grid_h: usize,
    pub distort_magnitude: f64,
    pub seed: u64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            flip_lr_prob: 0.5,
            rotate_prob: 0.9,
            rotate_max_left_deg: 20.0,
            rotate_max_right_deg: 20.0,
            zoom_prob: 0.3,
            zoom_min_factor: 1.0,
            zoom_max_factor: 1.3,
            distort_prob: 0.6,
            distort_grid_w: 4,
            distort_grid_h: 4,
            distort_magnitude: 1.0,
            seed: 42,
        }
    }
}

impl AugmentConfig {
    /// Every transform disabled.
    pub fn identity() -> Self {
        Self { flip_lr_prob: 0.0, rotate_prob: 0.0, zoom_prob: 0.0, distort_prob: 0.0, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, p) in [
            ("flip_lr_prob", self.flip_lr_prob),
            ("rotate_prob", self.rotate_prob),
            ("zoom_prob", self.zoom_prob),
            ("distort_prob", self.distort_prob),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("{name} = {p} is not a probability")));
            }
        }
        if self.rotate_max_left_deg < 0.0 || self.rotate_max_right_deg < 0.0 {
            return Err(Error::Config("rotation limits must be non-negative".into()));
        }
        if !(self.zoom_min_factor > 0.0 && self.zoom_min_factor <= self.zoom_max_factor) {
            return Err(Error::Config(format!(
                "zoom range [{}, {}] is invalid",
                self.zoom_min_factor, self.zoom_max_factor
            )));
        }
        if self.distort_grid_w < 2 || self.distort_grid_h < 2 {
            return Err(Error::Config("distortion grid needs at least 2x2 cells".into()));
        }
        if self.distort_magnitude < 0.0 {
            return Err(Error::Config("distortion magnitude must be non-negative".into()));
        }
        Ok(())
    }
}

/// Augments with the RNG stream 0 of `cfg.seed`.
pub fn augment(img: &Image, cfg: &AugmentConfig) -> Result<Image> {
    augment_stream(img, cfg, 0)
}

/// Applies flip, rotate, zoom, distort (in that order), each independently with
/// its probability. The random stream is derived from `(cfg.seed, stream)`, so
/// per-image streams can be assigned by index and run in any order.
pub fn augment_stream(img: &Image, cfg: &AugmentConfig, stream: u64) -> Result<Image> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(stream);
    let mut out = img.clone();

    if rng.random_bool(cfg.flip_lr_prob) {
        out = flip_lr(&out);
    }
    if rng.random_bool(cfg.rotate_prob) {
        let deg = rng.random_range(-cfg.rotate_max_left_deg..=cfg.rotate_max_right_deg);
        out = rotate(&out, deg.to_radians());
    }
    if rng.random_bool(cfg.zoom_prob) {
        let f = rng.random_range(cfg.zoom_min_factor..=cfg.zoom_max_factor);
        out = zoom(&out, f);
    }
    if rng.random_bool(cfg.distort_prob) {
        let (gw, gh) = (cfg.distort_grid_w, cfg.distort_grid_h);
        let mut disp = vec![(0.0f64, 0.0f64); (gw + 1) * (gh + 1)];
        let m = cfg.distort_magnitude;
        for gy in 1..gh {
            for gx in 1..gw {
                let dx = if m > 0.0 { rng.random_range(-m..=m) } else { 0.0 };
                let dy = if m > 0.0 { rng.random_range(-m..=m) } else { 0.0 };
                disp[gy * (gw + 1) + gx] = (dx, dy);
            }
        }
        out = grid_distort(&out, gw, gh, &disp);
    }
    Ok(out)
}

fn flip_lr(img: &Image) -> Image {
    let w = img.width();
    Image::from_fn(w, img.height(), img.channels(), |x, y, c| img.get(w - 1 - x, y, c))
        .expect("same geometry")
}

/// Bilinear sample at pixel-index coordinates; points off the raster read 0.
fn sample(img: &Image, x: f64, y: f64, c: usize) -> f64 {
    let (w, h) = (img.width() as f64, img.height() as f64);
    if x < -0.5 || y < -0.5 || x > w - 0.5 || y > h - 0.5 {
        return 0.0;
    }
    let x = x.clamp(0.0, w - 1.0);
    let y = y.clamp(0.0, h - 1.0);
    let (x0, y0) = (x.floor() as usize, y.floor() as usize);
    let x1 = (x0 + 1).min(img.width() - 1);
    let y1 = (y0 + 1).min(img.height() - 1);
    let (fx, fy) = (x - x0 as f64, y - y0 as f64);
    let p = |xx, yy| img.get(xx, yy, c) as f64;
    let top = p(x0, y0) * (1.0 - fx) + p(x1, y0) * fx;
    let bottom = p(x0, y1) * (1.0 - fx) + p(x1, y1) * fx;
    top * (1.0 - fy) + bottom * fy
}

/// Inverse-maps every output pixel through `src_of` and samples bilinearly.
fn warp(img: &Image, src_of: impl Fn(f64, f64) -> (f64, f64)) -> Image {
    Image::from_fn(img.width(), img.height(), img.channels(), |x, y, c| {
        let (sx, sy) = src_of(x as f64, y as f64);
        sample(img, sx, sy, c).round().clamp(0.0, 255.0) as u8
    })
    .expect("same geometry")
}

/// Rotation about the image center by `theta` radians (positive is clockwise
/// in image coordinates); exposed corners are black.
fn rotate(img: &Image, theta: f64) -> Image {
    let cx = (img.width() as f64 - 1.0) / 2.0;
    let cy = (img.height() as f64 - 1.0) / 2.0;
    let (s, c) = theta.sin_cos();
    warp(img, |x, y| {
        let (dx, dy) = (x - cx, y - cy);
        (cx + c * dx + s * dy, cy - s * dx + c * dy)
    })
}

/// Scales about the center by `factor` and crops back to the original size.
fn zoom(img: &Image, factor: f64) -> Image {
    let cx = (img.width() as f64 - 1.0) / 2.0;
    let cy = (img.height() as f64 - 1.0) / 2.0;
    warp(img, |x, y| (cx + (x - cx) / factor, cy + (y - cy) / factor))
}

/// Elastic warp over a regular `gw x gh` cell mesh; `disp` holds the
/// `(gw+1) x (gh+1)` node displacements, interpolated bilinearly per pixel.
fn grid_distort(img: &Image, gw: usize, gh: usize, disp: &[(f64, f64)]) -> Image {
    let (w, h) = (img.width() as f64, img.height() as f64);
    warp(img, |x, y| {
        let u = (x + 0.5) / w * gw as f64;
        let v = (y + 0.5) / h * gh as f64;
        let i = (u.floor() as usize).min(gw - 1);
        let j = (v.floor() as usize).min(gh - 1);
        let (fu, fv) = (u - i as f64, v - j as f64);
        let node = |a: usize, b: usize| disp[b * (gw + 1) + a];
        let (d00, d10, d01, d11) = (node(i, j), node(i + 1, j), node(i, j + 1), node(i + 1, j + 1));
        let lerp2 = |a: f64, b: f64, c: f64, d: f64| {
            (a * (1.0 - fu) + b * fu) * (1.0 - fv) + (c * (1.0 - fu) + d * fu) * fv
        };
        let dx = lerp2(d00.0, d10.0, d01.0, d11.0);
        let dy = lerp2(d00.1, d10.1, d01.1, d11.1);
        (x + dx, y + dy)
    })
}
