use std::collections::VecDeque;

use crate::error::Result;
use crate::imaging::{to_grayscale, Image};
use crate::preprocess::{canny_edges, CannyParams};

/// One boolean per pixel, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMap {
    pub width: usize,
    pub height: usize,
    pub bits: Vec<bool>,
}

impl BinaryMap {
    pub fn new(width: usize, height: usize) -> Self {
        Self { width, height, bits: vec![false; width * height] }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.bits[y * self.width + x] = v;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn union(&self, other: &BinaryMap) -> BinaryMap {
        assert_eq!((self.width, self.height), (other.width, other.height));
        let bits = self.bits.iter().zip(&other.bits).map(|(a, b)| *a || *b).collect();
        BinaryMap { width: self.width, height: self.height, bits }
    }

    pub fn is_subset_of(&self, other: &BinaryMap) -> bool {
        self.bits.iter().zip(&other.bits).all(|(a, b)| !*a || *b)
    }
}

/// Square `(2k+1) x (2k+1)` dilation, neighbourhood clamped at the borders.
/// Implemented as a separable max (rows, then columns).
pub fn dilate(map: &BinaryMap, kernel_half_width: usize) -> BinaryMap {
    let (w, h, k) = (map.width, map.height, kernel_half_width);
    let mut rows = BinaryMap::new(w, h);
    for y in 0..h {
        for x in 0..w {
            let lo = x.saturating_sub(k);
            let hi = (x + k).min(w - 1);
            rows.bits[y * w + x] = (lo..=hi).any(|xx| map.bits[y * w + xx]);
        }
    }
    let mut out = BinaryMap::new(w, h);
    for y in 0..h {
        let lo = y.saturating_sub(k);
        let hi = (y + k).min(h - 1);
        for x in 0..w {
            out.bits[y * w + x] = (lo..=hi).any(|yy| rows.bits[yy * w + x]);
        }
    }
    out
}

/// Background = every pixel 4-connected to a non-edge border pixel through
/// non-edge pixels. Edge pixels and enclosed regions stay foreground.
pub fn background_mask(edges: &BinaryMap) -> BinaryMap {
    let (w, h) = (edges.width, edges.height);
    let mut bg = BinaryMap::new(w, h);
    let mut queue = VecDeque::new();
    let seed = |x: usize, y: usize, bg: &mut BinaryMap, queue: &mut VecDeque<(usize, usize)>| {
        if !edges.get(x, y) && !bg.get(x, y) {
            bg.set(x, y, true);
            queue.push_back((x, y));
        }
    };
    for x in 0..w {
        seed(x, 0, &mut bg, &mut queue);
        seed(x, h - 1, &mut bg, &mut queue);
    }
    for y in 0..h {
        seed(0, y, &mut bg, &mut queue);
        seed(w - 1, y, &mut bg, &mut queue);
    }
    while let Some((x, y)) = queue.pop_front() {
        let mut visit = |nx: usize, ny: usize| {
            if !edges.get(nx, ny) && !bg.get(nx, ny) {
                bg.set(nx, ny, true);
                queue.push_back((nx, ny));
            }
        };
        if x > 0 {
            visit(x - 1, y);
        }
        if x + 1 < w {
            visit(x + 1, y);
        }
        if y > 0 {
            visit(x, y - 1);
        }
        if y + 1 < h {
            visit(x, y + 1);
        }
    }
    bg
}

/// Zeroes the background of a copy of `img`: grayscale, Canny, dilate by
/// `dilate_k`, border flood fill. Foreground samples are copied untouched.
pub fn remove_background(img: &Image, canny: &CannyParams, dilate_k: usize) -> Result<Image> {
    let gray = to_grayscale(img);
    let edges = dilate(&canny_edges(&gray, canny)?, dilate_k);
    let bg = background_mask(&edges);
    let mut out = img.clone();
    let ch = img.channels();
    let pixels = out.pixels_mut();
    for (i, &is_bg) in bg.bits.iter().enumerate() {
        if is_bg {
            pixels[i * ch..(i + 1) * ch].iter_mut().for_each(|v| *v = 0);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rect_outline(w: usize, h: usize, x0: usize, y0: usize, x1: usize, y1: usize) -> BinaryMap {
        let mut m = BinaryMap::new(w, h);
        for x in x0..=x1 {
            m.set(x, y0, true);
            m.set(x, y1, true);
        }
        for y in y0..=y1 {
            m.set(x0, y, true);
            m.set(x1, y, true);
        }
        m
    }

    #[test]
    fn dilate_single_pixel() {
        let mut m = BinaryMap::new(12, 12);
        m.set(5, 5, true);
        let d = dilate(&m, 1);
        for y in 0..12 {
            for x in 0..12 {
                assert_eq!(d.get(x, y), (4..=6).contains(&x) && (4..=6).contains(&y));
            }
        }
        assert_eq!(dilate(&BinaryMap::new(6, 6), 2).count(), 0);
    }

    #[test]
    fn empty_edges_are_all_background() {
        let bg = background_mask(&BinaryMap::new(9, 7));
        assert_eq!(bg.count(), 63);
    }

    #[test]
    fn closed_rectangle_splits_inside_from_outside() {
        let edges = rect_outline(20, 20, 4, 5, 14, 15);
        let bg = background_mask(&edges);
        for y in 0..20 {
            for x in 0..20 {
                let on_or_inside = (4..=14).contains(&x) && (5..=15).contains(&y);
                assert_eq!(bg.get(x, y), !on_or_inside, "({x},{y})");
            }
        }
    }

    #[test]
    fn c_shape_closes_after_dilation() {
        // Outline with a 2 px gap in the right wall.
        let mut edges = rect_outline(30, 30, 5, 5, 24, 24);
        edges.set(24, 14, false);
        edges.set(24, 15, false);
        let open = background_mask(&edges);
        assert!(open.get(15, 15), "gap lets the fill reach the interior");
        let closed = background_mask(&dilate(&edges, 2));
        for y in 8..=21 {
            for x in 8..=21 {
                assert!(!closed.get(x, y), "interior ({x},{y}) must be foreground");
            }
        }
        assert!(closed.get(0, 0) && closed.get(29, 15));
    }

    #[test]
    fn uniform_image_is_blacked_out() {
        let img = Image::filled(16, 16, 3, 200).unwrap();
        let out = remove_background(&img, &CannyParams::default(), 2).unwrap();
        assert!(out.pixels().iter().all(|&v| v == 0));
    }
}
