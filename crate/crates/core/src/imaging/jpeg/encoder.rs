//! Baseline sequential JPEG encoder.
//!
//! Gray images are written as a single component. RGB images are converted to
//! YCbCr and written 4:4:4 (no chroma subsampling), so every 8x8 pixel block of
//! the image maps to exactly one block per component and recompression error
//! stays aligned with the pixel grid that error level analysis inspects.

use super::dct;
use super::tables::*;
use crate::imaging::{Image, JpegQuality};

struct HuffCode {
    code: [u16; 256],
    len: [u8; 256],
}

impl HuffCode {
    fn new(bits: &[u8; 16], values: &[u8]) -> Self {
        let mut code = [0u16; 256];
        let mut len = [0u8; 256];
        let mut next = 0u16;
        let mut k = 0;
        for (l, &count) in bits.iter().enumerate() {
            for _ in 0..count {
                let sym = values[k] as usize;
                code[sym] = next;
                len[sym] = (l + 1) as u8;
                next += 1;
                k += 1;
            }
            next <<= 1;
        }
        Self { code, len }
    }
}

struct BitWriter {
    out: Vec<u8>,
    acc: u32,
    nbits: u32,
}

impl BitWriter {
    fn new(out: Vec<u8>) -> Self {
        Self { out, acc: 0, nbits: 0 }
    }

    fn put(&mut self, value: u16, len: u8) {
        debug_assert!(len <= 16);
        if len == 0 {
            return;
        }
        self.acc = (self.acc << len) | (value as u32 & ((1u32 << len) - 1));
        self.nbits += len as u32;
        while self.nbits >= 8 {
            let byte = (self.acc >> (self.nbits - 8)) as u8;
            self.out.push(byte);
            if byte == 0xFF {
                self.out.push(0x00);
            }
            self.nbits -= 8;
        }
        self.acc &= (1u32 << self.nbits) - 1;
    }

    fn flush(mut self) -> Vec<u8> {
        if self.nbits > 0 {
            let pad = 8 - self.nbits;
            self.put((1u16 << pad) - 1, pad as u8);
        }
        self.out
    }
}

struct Component {
    id: u8,
    quant: [u16; 64],
    quant_id: u8,
    dc: HuffCode,
    ac: HuffCode,
    table_id: u8,
    plane: Vec<f32>,
}

fn category(v: i32) -> u8 {
    (32 - v.unsigned_abs().leading_zeros()) as u8
}

fn magnitude_bits(v: i32, cat: u8) -> u16 {
    if v >= 0 {
        v as u16
    } else {
        ((v - 1) & ((1 << cat) - 1)) as u16
    }
}

fn write_segment(out: &mut Vec<u8>, marker: u8, payload: &[u8]) {
    out.extend_from_slice(&[0xFF, marker]);
    out.extend_from_slice(&((payload.len() + 2) as u16).to_be_bytes());
    out.extend_from_slice(payload);
}

/// Encodes `img` as a baseline JPEG at quality `q`. Output is a deterministic
/// function of `(img, q)`.
pub fn encode_jpeg(img: &Image, q: JpegQuality) -> Vec<u8> {
    let (w, h) = (img.width(), img.height());
    let luma_q = scaled_quant(&LUMA_QUANT, q.get());
    let chroma_q = scaled_quant(&CHROMA_QUANT, q.get());

    let mut comps: Vec<Component> = Vec::new();
    if img.channels() == 1 {
        let plane = img.pixels().iter().map(|&v| v as f32 - 128.0).collect();
        comps.push(Component {
            id: 1,
            quant: luma_q,
            quant_id: 0,
            dc: HuffCode::new(&LUMA_DC_BITS, &LUMA_DC_VALUES),
            ac: HuffCode::new(&LUMA_AC_BITS, &LUMA_AC_VALUES),
            table_id: 0,
            plane,
        });
    } else {
        let n = w * h;
        let (mut yp, mut cb, mut cr) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
        for p in img.pixels().chunks_exact(3) {
            let (r, g, b) = (p[0] as f32, p[1] as f32, p[2] as f32);
            yp.push(0.299 * r + 0.587 * g + 0.114 * b - 128.0);
            cb.push(-0.168_736 * r - 0.331_264 * g + 0.5 * b);
            cr.push(0.5 * r - 0.418_688 * g - 0.081_312 * b);
        }
        for (i, plane) in [yp, cb, cr].into_iter().enumerate() {
            let luma = i == 0;
            comps.push(Component {
                id: i as u8 + 1,
                quant: if luma { luma_q } else { chroma_q },
                quant_id: if luma { 0 } else { 1 },
                dc: if luma {
                    HuffCode::new(&LUMA_DC_BITS, &LUMA_DC_VALUES)
                } else {
                    HuffCode::new(&CHROMA_DC_BITS, &CHROMA_DC_VALUES)
                },
                ac: if luma {
                    HuffCode::new(&LUMA_AC_BITS, &LUMA_AC_VALUES)
                } else {
                    HuffCode::new(&CHROMA_AC_BITS, &CHROMA_AC_VALUES)
                },
                table_id: if luma { 0 } else { 1 },
                plane,
            });
        }
    }

    let mut out = Vec::with_capacity(w * h / 2 + 1024);
    out.extend_from_slice(&[0xFF, 0xD8]);
    write_segment(&mut out, 0xE0, &[b'J', b'F', b'I', b'F', 0, 1, 1, 0, 0, 1, 0, 1, 0, 0]);

    let mut tables_written = [false; 2];
    for c in &comps {
        if tables_written[c.quant_id as usize] {
            continue;
        }
        tables_written[c.quant_id as usize] = true;
        let mut payload = vec![c.quant_id];
        payload.extend(ZIGZAG.iter().map(|&z| c.quant[z] as u8));
        write_segment(&mut out, 0xDB, &payload);
    }

    let mut sof = vec![8];
    sof.extend_from_slice(&(h as u16).to_be_bytes());
    sof.extend_from_slice(&(w as u16).to_be_bytes());
    sof.push(comps.len() as u8);
    for c in &comps {
        sof.extend_from_slice(&[c.id, 0x11, c.quant_id]);
    }
    write_segment(&mut out, 0xC0, &sof);

    let tables: &[(u8, &[u8; 16], &[u8])] = if comps.len() == 1 {
        &[(0x00, &LUMA_DC_BITS, &LUMA_DC_VALUES), (0x10, &LUMA_AC_BITS, &LUMA_AC_VALUES)]
    } else {
        &[
            (0x00, &LUMA_DC_BITS, &LUMA_DC_VALUES),
            (0x10, &LUMA_AC_BITS, &LUMA_AC_VALUES),
            (0x01, &CHROMA_DC_BITS, &CHROMA_DC_VALUES),
            (0x11, &CHROMA_AC_BITS, &CHROMA_AC_VALUES),
        ]
    };
    for &(class_id, bits, values) in tables {
        let mut payload = vec![class_id];
        payload.extend_from_slice(bits);
        payload.extend_from_slice(values);
        write_segment(&mut out, 0xC4, &payload);
    }

    let mut sos = vec![comps.len() as u8];
    for c in &comps {
        sos.extend_from_slice(&[c.id, (c.table_id << 4) | c.table_id]);
    }
    sos.extend_from_slice(&[0, 63, 0]);
    write_segment(&mut out, 0xDA, &sos);

    let mut bits = BitWriter::new(out);
    let mut preds = vec![0i32; comps.len()];
    let (bw, bh) = (w.div_ceil(8), h.div_ceil(8));
    let mut block = [0f32; 64];
    for by in 0..bh {
        for bx in 0..bw {
            for (ci, c) in comps.iter().enumerate() {
                for y in 0..8 {
                    let sy = (by * 8 + y).min(h - 1);
                    for x in 0..8 {
                        let sx = (bx * 8 + x).min(w - 1);
                        block[y * 8 + x] = c.plane[sy * w + sx];
                    }
                }
                let coef = dct::forward(&block);
                let mut quantized = [0i32; 64];
                for (k, &z) in ZIGZAG.iter().enumerate() {
                    quantized[k] = (coef[z] / c.quant[z] as f32).round() as i32;
                }
                encode_block(&mut bits, &quantized, &mut preds[ci], &c.dc, &c.ac);
            }
        }
    }
    let mut out = bits.flush();
    out.extend_from_slice(&[0xFF, 0xD9]);
    out
}

fn encode_block(bits: &mut BitWriter, zz: &[i32; 64], pred: &mut i32, dc: &HuffCode, ac: &HuffCode) {
    let diff = zz[0] - *pred;
    *pred = zz[0];
    let cat = category(diff);
    bits.put(dc.code[cat as usize], dc.len[cat as usize]);
    bits.put(magnitude_bits(diff, cat), cat);

    let mut run = 0u8;
    for &v in &zz[1..] {
        if v == 0 {
            run += 1;
            continue;
        }
        while run >= 16 {
            bits.put(ac.code[0xF0], ac.len[0xF0]);
            run -= 16;
        }
        let cat = category(v);
        let sym = ((run << 4) | cat) as usize;
        bits.put(ac.code[sym], ac.len[sym]);
        bits.put(magnitude_bits(v, cat), cat);
        run = 0;
    }
    if run > 0 {
        bits.put(ac.code[0x00], ac.len[0x00]);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn categories() {
        assert_eq!(category(0), 0);
        assert_eq!(category(1), 1);
        assert_eq!(category(-1), 1);
        assert_eq!(category(-3), 2);
        assert_eq!(category(255), 8);
        assert_eq!(magnitude_bits(-1, 1), 0);
        assert_eq!(magnitude_bits(-3, 2), 0);
        assert_eq!(magnitude_bits(-2, 2), 1);
    }

    #[test]
    fn stream_is_framed() {
        let img = Image::filled(9, 9, 3, 77).unwrap();
        let bytes = encode_jpeg(&img, JpegQuality::new(80).unwrap());
        assert_eq!(&bytes[..2], &[0xFF, 0xD8]);
        assert_eq!(&bytes[bytes.len() - 2..], &[0xFF, 0xD9]);
    }
}
