//! Error level analysis: recompress a JPEG, difference it against itself and
//! look for 8x8 blocks whose error level departs from the rest of the image.

use serde::Serialize;

use crate::error::Result;
use crate::imaging::{decode_jpeg, encode_jpeg, Image, JpegQuality};

/// Thresholds for the forged/genuine rule and the display gain.
#[derive(Debug, Clone, PartialEq)]
pub struct ElaConfig {
    pub requality: JpegQuality,
    /// A block is suspect when its mean exceeds `outlier_factor` times the median...
    pub outlier_factor: f64,
    /// ...and also exceeds this absolute level (8-bit units).
    pub absolute_floor: f64,
    /// Minimum size of the largest 4-connected suspect component for a forged verdict.
    pub min_region: usize,
    pub display_gain: f64,
}

impl Default for ElaConfig {
    fn default() -> Self {
        Self {
            requality: JpegQuality::new(DEFAULT_REQUALITY).expect("valid default"),
            outlier_factor: 2.5,
            absolute_floor: 4.0,
            min_region: 4,
            display_gain: 20.0,
        }
    }
}

pub const DEFAULT_REQUALITY: i64 = 95;

/// Per-block mean absolute difference between an image and its recompression.
#[derive(Debug, Clone, PartialEq)]
pub struct ElaMap {
    pub blocks_w: usize,
    pub blocks_h: usize,
    pub block_means: Vec<f64>,
    pub requality: JpegQuality,
}

impl ElaMap {
    pub fn get(&self, bx: usize, by: usize) -> f64 {
        self.block_means[by * self.blocks_w + bx]
    }

    pub fn median(&self) -> f64 {
        median(&self.block_means)
    }

    pub fn max(&self) -> f64 {
        self.block_means.iter().copied().fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ElaVerdict {
    Genuine,
    Forged,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ElaStats {
    pub median_block_mean: f64,
    pub max_block_mean: f64,
}

/// Outcome of [`classify_forgery`]. `suspect_blocks` holds `(bx, by)` block
/// coordinates and is empty exactly when the verdict is genuine.
#[derive(Debug, Clone, PartialEq)]
pub struct ElaReport {
    pub verdict: ElaVerdict,
    pub suspect_blocks: Vec<(usize, usize)>,
    pub stats: ElaStats,
    pub ela_image: Option<Image>,
}

impl ElaReport {
    pub fn is_forged(&self) -> bool {
        self.verdict == ElaVerdict::Forged
    }

    /// Report as JSON: verdict, stats and the suspect block list.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "verdict": self.verdict,
            "median_block_mean": self.stats.median_block_mean,
            "max_block_mean": self.stats.max_block_mean,
            "suspect_blocks": self.suspect_blocks.iter().map(|&(x, y)| [x, y]).collect::<Vec<_>>(),
        })
    }
}

fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// Decodes `jpeg`, recompresses at `requality`, and averages the absolute
/// difference over every full 8x8 block and all channels. Partial border
/// blocks are dropped. Also returns the difference image scaled by
/// `display_gain` (clamped to 255).
pub fn compute_ela(jpeg: &[u8], requality: JpegQuality, display_gain: f64) -> Result<(ElaMap, Image)> {
    let original = decode_jpeg(jpeg)?;
    ela_of_image(&original, requality, display_gain)
}

/// [`compute_ela`] on an already decoded raster.
pub fn ela_of_image(original: &Image, requality: JpegQuality, display_gain: f64) -> Result<(ElaMap, Image)> {
    original.ensure_block_sized()?;
    let recompressed = decode_jpeg(&encode_jpeg(original, requality))?;
    let (w, h, ch) = (original.width(), original.height(), original.channels());
    let diff: Vec<u8> = original
        .pixels()
        .iter()
        .zip(recompressed.pixels())
        .map(|(&a, &b)| a.abs_diff(b))
        .collect();

    let (bw, bh) = (w / 8, h / 8);
    let mut block_means = Vec::with_capacity(bw * bh);
    for by in 0..bh {
        for bx in 0..bw {
            let mut sum = 0u32;
            for y in by * 8..by * 8 + 8 {
                let row = (y * w + bx * 8) * ch;
                sum += diff[row..row + 8 * ch].iter().map(|&d| d as u32).sum::<u32>();
            }
            block_means.push(sum as f64 / (64 * ch) as f64);
        }
    }
    let amplified = diff.iter().map(|&d| (d as f64 * display_gain).round().min(255.0) as u8).collect();
    let ela_image = Image::new(w, h, ch, amplified)?;
    Ok((ElaMap { blocks_w: bw, blocks_h: bh, block_means, requality }, ela_image))
}

/// Flags blocks above both `outlier_factor x median` and `absolute_floor`;
/// the image is forged iff the largest 4-connected group of flagged blocks
/// has at least `min_region` members.
pub fn classify_forgery(map: &ElaMap, cfg: &ElaConfig) -> ElaReport {
    let med = map.median();
    let cut = (cfg.outlier_factor * med).max(cfg.absolute_floor);
    let (bw, bh) = (map.blocks_w, map.blocks_h);
    let suspect: Vec<bool> = map
        .block_means
        .iter()
        .map(|&m| m > cfg.outlier_factor * med && m > cfg.absolute_floor)
        .collect();
    debug_assert!(map.block_means.iter().zip(&suspect).all(|(&m, &s)| s == (m > cut)));

    let mut seen = vec![false; suspect.len()];
    let mut largest = 0usize;
    let mut stack = Vec::new();
    for start in 0..suspect.len() {
        if !suspect[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        stack.push(start);
        let mut size = 0;
        while let Some(i) = stack.pop() {
            size += 1;
            let (x, y) = (i % bw, i / bw);
            let mut push = |j: usize| {
                if suspect[j] && !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            };
            if x > 0 {
                push(i - 1);
            }
            if x + 1 < bw {
                push(i + 1);
            }
            if y > 0 {
                push(i - bw);
            }
            if y + 1 < bh {
                push(i + bw);
            }
        }
        largest = largest.max(size);
    }

    let forged = largest >= cfg.min_region.max(1);
    let suspect_blocks = if forged {
        suspect.iter().enumerate().filter(|(_, &s)| s).map(|(i, _)| (i % bw, i / bw)).collect()
    } else {
        Vec::new()
    };
    ElaReport {
        verdict: if forged { ElaVerdict::Forged } else { ElaVerdict::Genuine },
        suspect_blocks,
        stats: ElaStats { median_block_mean: med, max_block_mean: map.max() },
        ela_image: None,
    }
}

/// Full check: [`compute_ela`] then [`classify_forgery`], with the amplified
/// difference image attached to the report.
pub fn check_image_forgery(jpeg: &[u8], cfg: &ElaConfig) -> Result<ElaReport> {
    let (map, ela_image) = compute_ela(jpeg, cfg.requality, cfg.display_gain)?;
    let mut report = classify_forgery(&map, cfg);
    report.ela_image = Some(ela_image);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn map_from(bw: usize, bh: usize, values: Vec<f64>) -> ElaMap {
        ElaMap { blocks_w: bw, blocks_h: bh, block_means: values, requality: JpegQuality::new(75).unwrap() }
    }

    #[test]
    fn uniform_map_is_genuine() {
        let r = classify_forgery(&map_from(6, 5, vec![3.0; 30]), &ElaConfig::default());
        assert_eq!(r.verdict, ElaVerdict::Genuine);
        assert!(r.suspect_blocks.is_empty());
    }

    #[test]
    fn isolated_outlier_is_gated_by_region_size() {
        let mut v = vec![0.5; 36];
        v[14] = 20.0;
        let r = classify_forgery(&map_from(6, 6, v.clone()), &ElaConfig::default());
        assert_eq!(r.verdict, ElaVerdict::Genuine);
        for i in [15, 20, 21] {
            v[i] = 20.0;
        }
        let r = classify_forgery(&map_from(6, 6, v), &ElaConfig::default());
        assert_eq!(r.verdict, ElaVerdict::Forged);
        assert_eq!(r.suspect_blocks.len(), 4);
    }

    #[test]
    fn diagonal_blocks_are_not_connected() {
        let mut v = vec![0.5; 36];
        for i in [0, 7, 14, 21] {
            v[i] = 20.0;
        }
        let r = classify_forgery(&map_from(6, 6, v), &ElaConfig::default());
        assert_eq!(r.verdict, ElaVerdict::Genuine);
    }

    #[test]
    fn floor_suppresses_tiny_outliers() {
        let mut v = vec![0.01; 36];
        for i in [0, 1, 6, 7] {
            v[i] = 3.5;
        }
        let r = classify_forgery(&map_from(6, 6, v), &ElaConfig::default());
        assert_eq!(r.verdict, ElaVerdict::Genuine);
    }

    #[test]
    fn small_images_are_rejected() {
        let img = Image::filled(7, 20, 1, 9).unwrap();
        assert!(ela_of_image(&img, JpegQuality::new(75).unwrap(), 10.0).is_err());
    }

    #[test]
    fn partial_blocks_are_dropped() {
        let img = Image::filled(20, 17, 3, 100).unwrap();
        let (map, ela) = ela_of_image(&img, JpegQuality::new(90).unwrap(), 10.0).unwrap();
        assert_eq!((map.blocks_w, map.blocks_h), (2, 2));
        assert_eq!((ela.width(), ela.height()), (20, 17));
    }
}
