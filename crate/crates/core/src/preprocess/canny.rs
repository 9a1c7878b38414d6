use crate::error::{Error, Result};
use crate::imaging::Image;
use crate::preprocess::BinaryMap;

/// Canny parameters. Gradient thresholds are in intensity units per pixel:
/// Sobel responses are divided by 4 so a sharp 0 to 255 step scores 255.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CannyParams {
    pub gaussian_sigma: f32,
    pub low_threshold: f32,
    pub high_threshold: f32,
}

impl Default for CannyParams {
    fn default() -> Self {
        Self { gaussian_sigma: 1.4, low_threshold: 30.0, high_threshold: 90.0 }
    }
}

impl CannyParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.gaussian_sigma > 0.0) {
            return Err(Error::Config(format!("canny sigma must be > 0, got {}", self.gaussian_sigma)));
        }
        if !(self.low_threshold < self.high_threshold) {
            return Err(Error::Config(format!(
                "canny low threshold {} must be below high threshold {}",
                self.low_threshold, self.high_threshold
            )));
        }
        Ok(())
    }
}

fn gaussian_kernel(sigma: f32) -> Vec<f32> {
    let radius = (3.0 * sigma).ceil().max(1.0) as i32;
    let mut k: Vec<f32> = (-radius..=radius)
        .map(|i| (-(i * i) as f32 / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f32 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= sum);
    k
}

/// Separable Gaussian blur with replicated borders.
fn smooth(values: &[f32], w: usize, h: usize, sigma: f32) -> Vec<f32> {
    let k = gaussian_kernel(sigma);
    let r = (k.len() / 2) as isize;
    let clamp = |v: isize, n: usize| v.clamp(0, n as isize - 1) as usize;
    let mut tmp = vec![0f32; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0f32;
            for (i, &kv) in k.iter().enumerate() {
                acc += kv * values[y * w + clamp(x as isize + i as isize - r, w)];
            }
            tmp[y * w + x] = acc;
        }
    }
    let mut out = vec![0f32; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0f32;
            for (i, &kv) in k.iter().enumerate() {
                acc += kv * tmp[clamp(y as isize + i as isize - r, h) * w + x];
            }
            out[y * w + x] = acc;
        }
    }
    out
}

/// Sobel gradients (gx, gy), normalized by 4, replicated borders.
fn sobel(values: &[f32], w: usize, h: usize) -> (Vec<f32>, Vec<f32>) {
    let at = |x: isize, y: isize| {
        let xx = x.clamp(0, w as isize - 1) as usize;
        let yy = y.clamp(0, h as isize - 1) as usize;
        values[yy * w + xx]
    };
    let mut gx = vec![0f32; w * h];
    let mut gy = vec![0f32; w * h];
    for y in 0..h as isize {
        for x in 0..w as isize {
            let dx = (at(x + 1, y - 1) + 2.0 * at(x + 1, y) + at(x + 1, y + 1))
                - (at(x - 1, y - 1) + 2.0 * at(x - 1, y) + at(x - 1, y + 1));
            let dy = (at(x - 1, y + 1) + 2.0 * at(x, y + 1) + at(x + 1, y + 1))
                - (at(x - 1, y - 1) + 2.0 * at(x, y - 1) + at(x + 1, y - 1));
            let i = y as usize * w + x as usize;
            gx[i] = dx / 4.0;
            gy[i] = dy / 4.0;
        }
    }
    (gx, gy)
}

fn gray_values(gray: &Image) -> Result<Vec<f32>> {
    if gray.channels() != 1 {
        return Err(Error::InvalidImage(format!("canny needs a 1-channel image, got {}", gray.channels())));
    }
    Ok(gray.pixels().iter().map(|&v| v as f32).collect())
}

/// Smoothed Sobel gradient magnitude, the quantity the thresholds compare against.
pub fn sobel_magnitude(gray: &Image, sigma: f32) -> Result<Vec<f32>> {
    let (w, h) = (gray.width(), gray.height());
    let smoothed = smooth(&gray_values(gray)?, w, h, sigma);
    let (gx, gy) = sobel(&smoothed, w, h);
    Ok(gx.iter().zip(&gy).map(|(a, b)| a.hypot(*b)).collect())
}

/// Gaussian smoothing, Sobel gradients, non-maximum suppression and
/// double-threshold hysteresis (8-connected), in that order.
pub fn canny_edges(gray: &Image, params: &CannyParams) -> Result<BinaryMap> {
    params.validate()?;
    let (w, h) = (gray.width(), gray.height());
    let smoothed = smooth(&gray_values(gray)?, w, h, params.gaussian_sigma);
    let (gx, gy) = sobel(&smoothed, w, h);
    let mag: Vec<f32> = gx.iter().zip(&gy).map(|(a, b)| a.hypot(*b)).collect();
    let m = |x: isize, y: isize| -> f32 {
        if x < 0 || y < 0 || x >= w as isize || y >= h as isize {
            0.0
        } else {
            mag[y as usize * w + x as usize]
        }
    };

    // Non-maximum suppression along the gradient direction quantized to 4 bins.
    // Ties keep the pixel on the "before" side only, so plateaus stay one pixel wide.
    let mut thin = vec![0f32; w * h];
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            let g = mag[i];
            if g <= params.low_threshold {
                continue;
            }
            let angle = gy[i].atan2(gx[i]).to_degrees();
            let a = if angle < 0.0 { angle + 180.0 } else { angle };
            let (dx, dy): (isize, isize) = if !(22.5..157.5).contains(&a) {
                (1, 0)
            } else if a < 67.5 {
                (1, 1)
            } else if a < 112.5 {
                (0, 1)
            } else {
                (-1, 1)
            };
            let (xi, yi) = (x as isize, y as isize);
            let before = m(xi - dx, yi - dy);
            let after = m(xi + dx, yi + dy);
            if g > before && g >= after {
                thin[i] = g;
            }
        }
    }

    let mut edges = BinaryMap::new(w, h);
    let mut stack: Vec<usize> = Vec::new();
    for (i, &g) in thin.iter().enumerate() {
        if g >= params.high_threshold {
            edges.bits[i] = true;
            stack.push(i);
        }
    }
    while let Some(i) = stack.pop() {
        let (x, y) = ((i % w) as isize, (i / w) as isize);
        for dy in -1..=1 {
            for dx in -1..=1 {
                let (nx, ny) = (x + dx, y + dy);
                if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                    continue;
                }
                let j = ny as usize * w + nx as usize;
                if !edges.bits[j] && thin[j] > params.low_threshold {
                    edges.bits[j] = true;
                    stack.push(j);
                }
            }
        }
    }
    Ok(edges)
}
