//! Separable orthonormal 8x8 DCT-II and its inverse.

use std::sync::OnceLock;

/// `basis[u * 8 + x] = c(u) / 2 * cos((2x + 1) u pi / 16)`.
fn basis() -> &'static [f32; 64] {
    static BASIS: OnceLock<[f32; 64]> = OnceLock::new();
    BASIS.get_or_init(|| {
        let mut m = [0f32; 64];
        for u in 0..8 {
            let cu = if u == 0 { std::f64::consts::FRAC_1_SQRT_2 } else { 1.0 };
            for x in 0..8 {
                let angle = (2 * x + 1) as f64 * u as f64 * std::f64::consts::PI / 16.0;
                m[u * 8 + x] = (cu / 2.0 * angle.cos()) as f32;
            }
        }
        m
    })
}

/// Forward transform of a level-shifted block, natural order in and out.
pub fn forward(block: &[f32; 64]) -> [f32; 64] {
    let m = basis();
    let mut tmp = [0f32; 64];
    // rows: tmp[y][u] = sum_x m[u][x] * block[y][x]
    for y in 0..8 {
        for u in 0..8 {
            let mut acc = 0f32;
            for x in 0..8 {
                acc += m[u * 8 + x] * block[y * 8 + x];
            }
            tmp[y * 8 + u] = acc;
        }
    }
    let mut out = [0f32; 64];
    for v in 0..8 {
        for u in 0..8 {
            let mut acc = 0f32;
            for y in 0..8 {
                acc += m[v * 8 + y] * tmp[y * 8 + u];
            }
            out[v * 8 + u] = acc;
        }
    }
    out
}

/// Inverse transform, natural order in and out.
pub fn inverse(coef: &[f32; 64]) -> [f32; 64] {
    let m = basis();
    let mut tmp = [0f32; 64];
    // columns: tmp[y][u] = sum_v m[v][y] * coef[v][u]
    for y in 0..8 {
        for u in 0..8 {
            let mut acc = 0f32;
            for v in 0..8 {
                acc += m[v * 8 + y] * coef[v * 8 + u];
            }
            tmp[y * 8 + u] = acc;
        }
    }
    let mut out = [0f32; 64];
    for y in 0..8 {
        for x in 0..8 {
            let mut acc = 0f32;
            for u in 0..8 {
                acc += m[u * 8 + x] * tmp[y * 8 + u];
            }
            out[y * 8 + x] = acc;
        }
    }
    out
}
