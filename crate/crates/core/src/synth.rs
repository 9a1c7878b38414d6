//! Procedural stand-in data: parametric faces with an eye-patch post-op
//! variant, and spliced JPEG fixtures for error level analysis.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::imaging::{decode_jpeg, encode_jpeg, Image, JpegQuality};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EyeSide {
    Left,
    Right,
}

/// Face geometry and tones for one identity, drawn from `seed`. Positions
/// and sizes are fractions of the canvas side, so one spec renders at any
/// resolution.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthIdentitySpec {
    pub seed: u64,
    pub head_center: (f64, f64),
    pub head_axes: (f64, f64),
    pub outline_width: f64,
    /// Eye centre offsets from the head centre: `(half spacing, height above centre)`.
    pub eye_offset: (f64, f64),
    pub eye_axes: (f64, f64),
    pub brow_tilt: f64,
    pub nose_length: f64,
    pub nose_width: f64,
    pub mouth_y: f64,
    pub mouth_half_width: f64,
    /// Vertical bend of the mouth at its ends; positive smiles.
    pub mouth_curve: f64,
    pub skin: [f64; 3],
    pub outline: [f64; 3],
    pub iris: [f64; 3],
    pub lips: [f64; 3],
    pub patched_eye: EyeSide,
    /// Brightness offset applied to the whole post image.
    pub post_jitter: i32,
    /// When set, pre and post share one background; otherwise each photo
    /// gets its own.
    pub shared_background: bool,
}

fn tone(rng: &mut ChaCha8Rng, lo: [f64; 3], hi: [f64; 3]) -> [f64; 3] {
    [rng.random_range(lo[0]..hi[0]), rng.random_range(lo[1]..hi[1]), rng.random_range(lo[2]..hi[2])]
}

impl SynthIdentitySpec {
    pub fn from_seed(seed: u64) -> Self {
        let mut r = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_face);
        let head_axes = (r.random_range(0.27..0.35), r.random_range(0.34..0.40));
        let head_center = (0.5 + r.random_range(-0.03..0.03), 0.5 + r.random_range(-0.025..0.025));
        let eye_axes = (r.random_range(0.035..0.06), r.random_range(0.018..0.035));
        Self {
            seed,
            head_center,
            head_axes,
            outline_width: 0.045,
            eye_offset: (head_axes.0 * r.random_range(0.32..0.50), head_axes.1 * r.random_range(0.12..0.32)),
            eye_axes,
            brow_tilt: r.random_range(-0.35..0.35),
            nose_length: head_axes.1 * r.random_range(0.15..0.35),
            nose_width: r.random_range(0.02..0.05),
            mouth_y: head_axes.1 * r.random_range(0.40..0.62),
            mouth_half_width: head_axes.0 * r.random_range(0.22..0.50),
            mouth_curve: r.random_range(-0.035..0.035),
            skin: tone(&mut r, [205.0, 170.0, 135.0], [250.0, 215.0, 190.0]),
            outline: tone(&mut r, [0.0, 0.0, 0.0], [25.0, 20.0, 20.0]),
            iris: tone(&mut r, [20.0, 20.0, 20.0], [120.0, 110.0, 100.0]),
            lips: tone(&mut r, [120.0, 30.0, 40.0], [190.0, 80.0, 90.0]),
            patched_eye: if r.random_bool(0.5) { EyeSide::Left } else { EyeSide::Right },
            post_jitter: r.random_range(-6..=6),
            shared_background: false,
        }
    }

    /// Eye centres (left, right) in canvas fractions.
    pub fn eye_centers(&self) -> [(f64, f64); 2] {
        let (cx, cy) = self.head_center;
        let (dx, dy) = self.eye_offset;
        [(cx - dx, cy - dy), (cx + dx, cy - dy)]
    }

    /// Whether a canvas-fraction point lies inside the head ellipse.
    pub fn inside_head(&self, x: f64, y: f64) -> bool {
        let (cx, cy) = self.head_center;
        let (rx, ry) = self.head_axes;
        ((x - cx) / rx).powi(2) + ((y - cy) / ry).powi(2) <= 1.0
    }

    /// Patch rectangle plus strap, `(x0, y0, x1, y1)` in canvas fractions.
    pub fn patch_rect(&self) -> (f64, f64, f64, f64) {
        let [l, r] = self.eye_centers();
        let (ex, ey) = match self.patched_eye {
            EyeSide::Left => l,
            EyeSide::Right => r,
        };
        let (hw, hh) = (self.eye_axes.0 * 1.6, self.eye_axes.1 * 2.4 + 0.01);
        (ex - hw, ey - hh, ex + hw, ey + hh)
    }

    fn strap(&self) -> ((f64, f64), (f64, f64)) {
        let (x0, _, x1, _) = self.patch_rect();
        let [l, r] = self.eye_centers();
        let (cx, _) = self.head_center;
        let edge = self.head_axes.0 + self.outline_width;
        match self.patched_eye {
            EyeSide::Left => ((x0, l.1), (cx - edge, l.1 - 0.03)),
            EyeSide::Right => ((x1, r.1), (cx + edge, r.1 - 0.03)),
        }
    }

    /// Pixel bounding box `(x0, y0, x1, y1)` inclusive of everything the
    /// occlusion paints, for a `canvas`-sized render.
    pub fn occlusion_bbox(&self, canvas: usize) -> (usize, usize, usize, usize) {
        let s = canvas as f64;
        let (px0, py0, px1, py1) = self.patch_rect();
        let ((sx0, sy0), (sx1, sy1)) = self.strap();
        let half = STRAP_WIDTH / 2.0 + 1.5 / s;
        let x0 = px0.min(sx0.min(sx1) - half);
        let x1 = px1.max(sx0.max(sx1) + half);
        let y0 = py0.min(sy0.min(sy1) - half);
        let y1 = py1.max(sy0.max(sy1) + half);
        let clampi = |v: f64| ((v * s).floor().max(0.0) as usize).min(canvas - 1);
        (clampi(x0), clampi(y0), clampi(x1 + 1.0 / s), clampi(y1 + 1.0 / s))
    }
}

const STRAP_WIDTH: f64 = 0.025;

/// Low-frequency textured backdrop: a base tone plus three slow waves and
/// faint noise, gentle enough to stay below the edge detector's thresholds.
fn background(seed: u64, s: usize) -> Vec<f64> {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let base = tone(&mut r, [50.0, 50.0, 50.0], [170.0, 170.0, 170.0]);
    let scale = 96.0 / s as f64;
    let waves: Vec<(f64, f64, f64, f64)> = (0..3)
        .map(|_| {
            let f = r.random_range(0.04..0.11) * scale;
            let a: f64 = r.random_range(0.0..std::f64::consts::TAU);
            (f * a.cos(), f * a.sin(), r.random_range(0.0..std::f64::consts::TAU), r.random_range(8.0..22.0))
        })
        .collect();
    let tint: [f64; 3] = [r.random_range(0.6..1.0), r.random_range(0.6..1.0), r.random_range(0.6..1.0)];
    let mut out = vec![0.0; s * s * 3];
    for y in 0..s {
        for x in 0..s {
            let w: f64 = waves.iter().map(|&(fx, fy, ph, a)| a * (fx * x as f64 + fy * y as f64 + ph).sin()).sum();
            for c in 0..3 {
                out[(y * s + x) * 3 + c] = base[c] + w * tint[c] + r.random_range(-3.0..3.0);
            }
        }
    }
    out
}

struct Canvas {
    s: usize,
    px: Vec<f64>,
}

impl Canvas {
    fn paint(&mut self, mut inside: impl FnMut(f64, f64) -> bool, color: [f64; 3]) {
        let s = self.s as f64;
        for y in 0..self.s {
            for x in 0..self.s {
                if inside((x as f64 + 0.5) / s, (y as f64 + 0.5) / s) {
                    self.px[(y * self.s + x) * 3..][..3].copy_from_slice(&color);
                }
            }
        }
    }

    fn ellipse(&mut self, c: (f64, f64), axes: (f64, f64), color: [f64; 3]) {
        self.paint(|x, y| ((x - c.0) / axes.0).powi(2) + ((y - c.1) / axes.1).powi(2) <= 1.0, color);
    }

    fn segment(&mut self, a: (f64, f64), b: (f64, f64), width: f64, color: [f64; 3]) {
        self.paint(|x, y| seg_dist((x, y), a, b) <= width / 2.0, color);
    }

    fn into_image(self) -> Image {
        let data = self.px.iter().map(|v| v.round().clamp(0.0, 255.0) as u8).collect();
        Image::new(self.s, self.s, 3, data).expect("canvas geometry")
    }
}

fn seg_dist(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 { 0.0 } else { (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / len2).clamp(0.0, 1.0) };
    ((p.0 - a.0 - t * dx).powi(2) + (p.1 - a.1 - t * dy).powi(2)).sqrt()
}

fn render_face(spec: &SynthIdentitySpec, canvas: &mut Canvas) {
    let (cx, cy) = spec.head_center;
    let (rx, ry) = spec.head_axes;
    let ow = spec.outline_width;
    canvas.ellipse((cx, cy), (rx + ow, ry + ow), spec.outline);
    canvas.ellipse((cx, cy), (rx, ry), spec.skin);

    let (ex, ey) = spec.eye_axes;
    for (i, &(x, y)) in spec.eye_centers().iter().enumerate() {
        canvas.ellipse((x, y), (ex, ey), [240.0, 240.0, 235.0]);
        canvas.ellipse((x, y), (ey * 0.9, ey * 0.9), spec.iris);
        let sign = if i == 0 { 1.0 } else { -1.0 };
        let by = y - ey - 0.03;
        let tilt = spec.brow_tilt * ex * sign;
        canvas.segment((x - ex, by + tilt), (x + ex, by - tilt), 0.018, spec.outline);
    }
    let nose_top = cy - spec.eye_offset.1 + ey;
    let nose_tip = cy + spec.nose_length;
    let nose = [spec.skin[0] * 0.75, spec.skin[1] * 0.7, spec.skin[2] * 0.7];
    canvas.segment((cx, nose_top), (cx - spec.nose_width, nose_tip), 0.015, nose);
    canvas.segment((cx - spec.nose_width, nose_tip), (cx + spec.nose_width, nose_tip), 0.015, nose);

    let my = cy + spec.mouth_y;
    let (mw, mc) = (spec.mouth_half_width, spec.mouth_curve);
    let n = 12;
    for k in 0..n {
        let t0 = -1.0 + 2.0 * k as f64 / n as f64;
        let t1 = -1.0 + 2.0 * (k + 1) as f64 / n as f64;
        let p = |t: f64| (cx + t * mw, my - mc * t * t);
        canvas.segment(p(t0), p(t1), 0.025, spec.lips);
    }
}

fn render_occlusion(spec: &SynthIdentitySpec, canvas: &mut Canvas) {
    let (x0, y0, x1, y1) = spec.patch_rect();
    let patch = [35.0, 33.0, 38.0];
    canvas.paint(|x, y| x >= x0 && x <= x1 && y >= y0 && y <= y1, patch);
    let (a, b) = spec.strap();
    canvas.segment(a, b, STRAP_WIDTH, patch);
}

/// Renders `(pre, post)` on a `canvas x canvas` RGB raster.
pub fn gen_identity_pair(spec: &SynthIdentitySpec, canvas: usize) -> Result<(Image, Image)> {
    if canvas < 64 {
        return Err(Error::Config(format!("canvas must be at least 64 px, got {canvas}")));
    }
    let pre_bg = background(spec.seed.wrapping_mul(0x9e37_79b9).wrapping_add(1), canvas);
    let post_bg = if spec.shared_background {
        pre_bg.clone()
    } else {
        background(spec.seed.wrapping_mul(0x9e37_79b9).wrapping_add(2), canvas)
    };

    let mut pre = Canvas { s: canvas, px: pre_bg };
    render_face(spec, &mut pre);
    let mut post = Canvas { s: canvas, px: post_bg };
    render_face(spec, &mut post);
    render_occlusion(spec, &mut post);
    let j = spec.post_jitter as f64;
    post.px.iter_mut().for_each(|v| *v = v.round().clamp(0.0, 255.0) + j);
    Ok((pre.into_image(), post.into_image()))
}

/// Pixel rectangle `(x, y, w, h)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rect {
    pub x: usize,
    pub y: usize,
    pub w: usize,
    pub h: usize,
}

impl Rect {
    pub fn contains(&self, x: usize, y: usize) -> bool {
        x >= self.x && x < self.x + self.w && y >= self.y && y < self.y + self.h
    }

    /// 8x8 block coordinates covered (even partially) by the rectangle.
    pub fn blocks(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for by in self.y / 8..(self.y + self.h).div_ceil(8) {
            for bx in self.x / 8..(self.x + self.w).div_ceil(8) {
                out.push((bx, by));
            }
        }
        out
    }
}

pub const FORGERY_CANVAS: usize = 128;

/// Splice fixture on a 128x128 canvas. The carrier is a synthetic face saved
/// at `q_carrier`; a block-aligned rectangle (chosen by `splice_seed`) from a
/// different face saved at `q_splice` is pasted into the decoded carrier and
/// the result saved again at `q_carrier`. Returns the untouched carrier
/// JPEG, the forged JPEG and the pasted rectangle.
pub fn gen_forgery_fixture(
    carrier_seed: u64,
    splice_seed: u64,
    q_carrier: JpegQuality,
    q_splice: JpegQuality,
) -> Result<(Vec<u8>, Vec<u8>, Rect)> {
    let s = FORGERY_CANVAS;
    let (carrier, _) = gen_identity_pair(&SynthIdentitySpec::from_seed(carrier_seed), s)?;
    let (donor, _) = gen_identity_pair(&SynthIdentitySpec::from_seed(splice_seed ^ 0xd0e0), s)?;
    let genuine = encode_jpeg(&carrier, q_carrier);
    let carrier_px = decode_jpeg(&genuine)?;
    let donor_px = decode_jpeg(&encode_jpeg(&donor, q_splice))?;

    let mut r = ChaCha8Rng::seed_from_u64(splice_seed);
    let bw = r.random_range(3..=6usize);
    let bh = r.random_range(3..=6usize);
    let bx = r.random_range(1..=(s / 8 - 1 - bw));
    let by = r.random_range(1..=(s / 8 - 1 - bh));
    let rect = Rect { x: bx * 8, y: by * 8, w: bw * 8, h: bh * 8 };
    let forged = Image::from_fn(s, s, 3, |x, y, c| {
        if rect.contains(x, y) {
            donor_px.get(x, y, c)
        } else {
            carrier_px.get(x, y, c)
        }
    })?;
    Ok((genuine, encode_jpeg(&forged, q_carrier), rect))
}

/// Mean absolute pixel difference; images must share geometry.
pub fn mean_abs_diff(a: &Image, b: &Image) -> f64 {
    assert_eq!((a.width(), a.height(), a.channels()), (b.width(), b.height(), b.channels()));
    let sum: u64 = a.pixels().iter().zip(b.pixels()).map(|(&x, &y)| x.abs_diff(y) as u64).sum();
    sum as f64 / a.pixels().len() as f64
}

/// Mean intra-identity distance (each original against its augmented
/// copies) and mean inter-identity distance (between originals). Inputs are
/// `(original, copies)` per identity.
pub fn separability(groups: &[(Image, Vec<Image>)]) -> (f64, f64) {
    let (mut intra, mut ni) = (0.0, 0usize);
    for (orig, copies) in groups {
        for c in copies {
            intra += mean_abs_diff(orig, c);
            ni += 1;
        }
    }
    let (mut inter, mut nx) = (0.0, 0usize);
    for i in 0..groups.len() {
        for j in i + 1..groups.len() {
            inter += mean_abs_diff(&groups[i].0, &groups[j].0);
            nx += 1;
        }
    }
    (intra / ni.max(1) as f64, inter / nx.max(1) as f64)
}
