//! Baseline (and extended Huffman, 8-bit) sequential JPEG decoder.
//!
//! Handles any sampling factors up to 4x4, interleaved and non-interleaved
//! scans, restart intervals and 8/16-bit quantization tables. Subsampled chroma
//! is upsampled by sample replication. Progressive and arithmetic-coded streams
//! are reported as unsupported.

use super::dct;
use super::tables::ZIGZAG;
use crate::error::{Error, Result};
use crate::imaging::Image;

fn err(offset: usize, reason: impl Into<String>) -> Error {
    Error::Decode { offset, reason: reason.into() }
}

#[derive(Clone)]
struct HuffTable {
    // canonical decoding tables indexed by code length 1..=16
    maxcode: [i32; 18],
    valptr: [i32; 17],
    mincode: [i32; 17],
    values: Vec<u8>,
}

impl HuffTable {
    fn new(bits: &[u8; 16], values: Vec<u8>) -> Self {
        let mut maxcode = [-1i32; 18];
        let mut valptr = [0i32; 17];
        let mut mincode = [0i32; 17];
        let mut code = 0i32;
        let mut k = 0i32;
        for l in 1..=16 {
            let n = bits[l - 1] as i32;
            if n > 0 {
                valptr[l] = k;
                mincode[l] = code;
                code += n;
                k += n;
                maxcode[l] = code - 1;
            }
            code <<= 1;
        }
        maxcode[17] = i32::MAX;
        Self { maxcode, valptr, mincode, values }
    }
}

#[derive(Clone)]
struct FrameComponent {
    id: u8,
    h: usize,
    v: usize,
    tq: usize,
    // block grid covering the padded MCU area
    blocks_w: usize,
    blocks_h: usize,
    coefs: Vec<[i32; 64]>,
}

struct Frame {
    width: usize,
    height: usize,
    hmax: usize,
    vmax: usize,
    mcus_x: usize,
    mcus_y: usize,
    comps: Vec<FrameComponent>,
}

struct BitReader<'a> {
    data: &'a [u8],
    pos: usize,
    acc: u32,
    nbits: u32,
    hit_marker: bool,
}

impl<'a> BitReader<'a> {
    fn new(data: &'a [u8], pos: usize) -> Self {
        Self { data, pos, acc: 0, nbits: 0, hit_marker: false }
    }

    fn fill(&mut self) -> Result<()> {
        if self.hit_marker {
            // Corrupt data ran into a marker; feed zeros as libjpeg does, the
            // structural checks after the scan catch genuinely broken streams.
            self.acc = (self.acc << 8) & 0xFFFF_FFFF;
            self.nbits += 8;
            return Ok(());
        }
        let Some(&byte) = self.data.get(self.pos) else {
            return Err(err(self.pos, "unexpected end of entropy-coded data"));
        };
        if byte == 0xFF {
            match self.data.get(self.pos + 1) {
                Some(0x00) => {
                    self.pos += 2;
                }
                Some(_) => {
                    self.hit_marker = true;
                    self.acc <<= 8;
                    self.nbits += 8;
                    return Ok(());
                }
                None => return Err(err(self.pos + 1, "unexpected end of entropy-coded data")),
            }
        } else {
            self.pos += 1;
        }
        self.acc = (self.acc << 8) | byte as u32;
        self.nbits += 8;
        Ok(())
    }

    fn bit(&mut self) -> Result<i32> {
        if self.nbits == 0 {
            self.fill()?;
        }
        self.nbits -= 1;
        Ok(((self.acc >> self.nbits) & 1) as i32)
    }

    fn bits(&mut self, n: u8) -> Result<i32> {
        let mut v = 0i32;
        for _ in 0..n {
            v = (v << 1) | self.bit()?;
        }
        Ok(v)
    }

    fn decode(&mut self, table: &HuffTable) -> Result<u8> {
        let start = self.pos;
        let mut code = self.bit()?;
        let mut l = 1;
        while l <= 16 && code > table.maxcode[l] {
            code = (code << 1) | self.bit()?;
            l += 1;
        }
        if l > 16 {
            return Err(err(start, "invalid Huffman code"));
        }
        let idx = table.valptr[l] + code - table.mincode[l];
        table
            .values
            .get(idx as usize)
            .copied()
            .ok_or_else(|| err(start, "Huffman code maps outside its table"))
    }

    fn receive_extend(&mut self, s: u8) -> Result<i32> {
        if s == 0 {
            return Ok(0);
        }
        if s > 16 {
            return Err(err(self.pos, format!("coefficient category {s} out of range")));
        }
        let v = self.bits(s)?;
        Ok(if v < (1 << (s - 1)) { v - (1 << s) + 1 } else { v })
    }

    fn reset(&mut self) {
        self.acc = 0;
        self.nbits = 0;
    }
}

struct Decoder<'a> {
    data: &'a [u8],
    pos: usize,
    quant: [Option<[u16; 64]>; 4],
    dc_tables: [Option<HuffTable>; 4],
    ac_tables: [Option<HuffTable>; 4],
    restart_interval: usize,
    frame: Option<Frame>,
    scans: usize,
}

impl<'a> Decoder<'a> {
    fn u8_at(&self, pos: usize) -> Result<u8> {
        self.data.get(pos).copied().ok_or_else(|| err(pos, "unexpected end of stream"))
    }

    fn u16_at(&self, pos: usize) -> Result<u16> {
        Ok(((self.u8_at(pos)? as u16) << 8) | self.u8_at(pos + 1)? as u16)
    }

    /// Returns (segment start, segment end) for the length-prefixed segment at `pos`.
    fn segment(&self, pos: usize) -> Result<(usize, usize)> {
        let len = self.u16_at(pos)? as usize;
        if len < 2 {
            return Err(err(pos, format!("segment length {len} is too small")));
        }
        let end = pos + len;
        if end > self.data.len() {
            return Err(err(self.data.len(), "segment runs past the end of the stream"));
        }
        Ok((pos + 2, end))
    }

    fn run(mut self) -> Result<Image> {
        if self.data.len() < 2 || self.data[0] != 0xFF || self.data[1] != 0xD8 {
            return Err(err(0, "missing SOI marker"));
        }
        self.pos = 2;
        loop {
            let marker_pos = self.pos;
            if self.u8_at(marker_pos)? != 0xFF {
                return Err(err(marker_pos, "expected a marker"));
            }
            let mut p = marker_pos + 1;
            while self.u8_at(p)? == 0xFF {
                p += 1;
            }
            let marker = self.u8_at(p)?;
            self.pos = p + 1;
            match marker {
                0xD9 => break,
                0xC0 | 0xC1 => self.read_frame(marker_pos)?,
                0xC2 | 0xC3 | 0xC5..=0xC7 | 0xC9..=0xCB | 0xCD..=0xCF => {
                    return Err(Error::Unsupported {
                        offset: marker_pos,
                        reason: format!("frame type 0xFF{marker:02X} (only baseline sequential is supported)"),
                    })
                }
                0xC4 => self.read_huffman()?,
                0xDB => self.read_quant()?,
                0xDD => {
                    let (s, e) = self.segment(self.pos)?;
                    if e - s != 2 {
                        return Err(err(s, "DRI segment must carry two bytes"));
                    }
                    self.restart_interval = self.u16_at(s)? as usize;
                    self.pos = e;
                }
                0xDA => self.read_scan(marker_pos)?,
                0xD0..=0xD7 => return Err(err(marker_pos, "restart marker outside a scan")),
                0x01 => {}
                0xD8 => return Err(err(marker_pos, "unexpected second SOI")),
                _ => {
                    let (_, e) = self.segment(self.pos)?;
                    self.pos = e;
                }
            }
        }
        let frame = self.frame.take().ok_or_else(|| err(self.pos, "no frame header before EOI"))?;
        if self.scans == 0 {
            return Err(err(self.pos, "no scan before EOI"));
        }
        self.reconstruct(frame)
    }

    fn read_quant(&mut self) -> Result<()> {
        let (mut p, end) = self.segment(self.pos)?;
        while p < end {
            let pq_tq = self.u8_at(p)?;
            let (pq, tq) = ((pq_tq >> 4) as usize, (pq_tq & 15) as usize);
            if tq > 3 || pq > 1 {
                return Err(err(p, "invalid quantization table selector"));
            }
            p += 1;
            let mut table = [0u16; 64];
            for &z in ZIGZAG.iter() {
                table[z] = if pq == 0 {
                    let v = self.u8_at(p)? as u16;
                    p += 1;
                    v
                } else {
                    let v = self.u16_at(p)?;
                    p += 2;
                    v
                };
            }
            if p > end {
                return Err(err(end, "quantization table overruns its segment"));
            }
            self.quant[tq] = Some(table);
        }
        self.pos = end;
        Ok(())
    }

    fn read_huffman(&mut self) -> Result<()> {
        let (mut p, end) = self.segment(self.pos)?;
        while p < end {
            let tc_th = self.u8_at(p)?;
            let (tc, th) = (tc_th >> 4, (tc_th & 15) as usize);
            if tc > 1 || th > 3 {
                return Err(err(p, "invalid Huffman table selector"));
            }
            let mut bits = [0u8; 16];
            for (i, b) in bits.iter_mut().enumerate() {
                *b = self.u8_at(p + 1 + i)?;
            }
            let count: usize = bits.iter().map(|&b| b as usize).sum();
            if count > 256 {
                return Err(err(p, "Huffman table declares more than 256 symbols"));
            }
            let vstart = p + 17;
            if vstart + count > end {
                return Err(err(end, "Huffman table overruns its segment"));
            }
            let values = self.data[vstart..vstart + count].to_vec();
            let table = HuffTable::new(&bits, values);
            if tc == 0 {
                self.dc_tables[th] = Some(table);
            } else {
                self.ac_tables[th] = Some(table);
            }
            p = vstart + count;
        }
        self.pos = end;
        Ok(())
    }

    fn read_frame(&mut self, marker_pos: usize) -> Result<()> {
        if self.frame.is_some() {
            return Err(err(marker_pos, "multiple frame headers"));
        }
        let (s, e) = self.segment(self.pos)?;
        let precision = self.u8_at(s)?;
        if precision != 8 {
            return Err(Error::Unsupported { offset: s, reason: format!("{precision}-bit samples") });
        }
        let height = self.u16_at(s + 1)? as usize;
        let width = self.u16_at(s + 3)? as usize;
        let nf = self.u8_at(s + 5)? as usize;
        if width == 0 || height == 0 {
            return Err(err(s + 1, "zero image dimension"));
        }
        if nf != 1 && nf != 3 {
            return Err(Error::Unsupported { offset: s + 5, reason: format!("{nf} components") });
        }
        if e - s != 6 + 3 * nf {
            return Err(err(s, "frame header length does not match component count"));
        }
        let mut comps = Vec::with_capacity(nf);
        for i in 0..nf {
            let at = s + 6 + 3 * i;
            let hv = self.u8_at(at + 1)?;
            let (h, v) = ((hv >> 4) as usize, (hv & 15) as usize);
            if !(1..=4).contains(&h) || !(1..=4).contains(&v) {
                return Err(err(at + 1, "invalid sampling factor"));
            }
            let tq = self.u8_at(at + 2)? as usize;
            if tq > 3 {
                return Err(err(at + 2, "invalid quantization table index"));
            }
            comps.push(FrameComponent {
                id: self.u8_at(at)?,
                h,
                v,
                tq,
                blocks_w: 0,
                blocks_h: 0,
                coefs: Vec::new(),
            });
        }
        let hmax = comps.iter().map(|c| c.h).max().unwrap_or(1);
        let vmax = comps.iter().map(|c| c.v).max().unwrap_or(1);
        let mcus_x = width.div_ceil(8 * hmax);
        let mcus_y = height.div_ceil(8 * vmax);
        for c in &mut comps {
            c.blocks_w = mcus_x * c.h;
            c.blocks_h = mcus_y * c.v;
            c.coefs = vec![[0i32; 64]; c.blocks_w * c.blocks_h];
        }
        self.frame = Some(Frame { width, height, hmax, vmax, mcus_x, mcus_y, comps });
        self.pos = e;
        Ok(())
    }

    fn read_scan(&mut self, marker_pos: usize) -> Result<()> {
        let (s, e) = self.segment(self.pos)?;
        let frame = self.frame.as_mut().ok_or_else(|| err(marker_pos, "scan before frame header"))?;
        let ns = self.data[s] as usize;
        if ns == 0 || ns > frame.comps.len() || e - s != 4 + 2 * ns {
            return Err(err(s, "malformed scan header"));
        }
        let mut members = Vec::with_capacity(ns);
        for i in 0..ns {
            let id = self.data[s + 1 + 2 * i];
            let tables = self.data[s + 2 + 2 * i];
            let ci = frame
                .comps
                .iter()
                .position(|c| c.id == id)
                .ok_or_else(|| err(s + 1 + 2 * i, format!("scan references unknown component {id}")))?;
            let (td, ta) = ((tables >> 4) as usize, (tables & 15) as usize);
            let dc = self.dc_tables.get(td).cloned().flatten();
            let ac = self.ac_tables.get(ta).cloned().flatten();
            let (Some(dc), Some(ac)) = (dc, ac) else {
                return Err(err(s + 2 + 2 * i, "scan references an undefined Huffman table"));
            };
            members.push((ci, dc, ac));
        }
        let ss = self.data[e - 3];
        let se = self.data[e - 2];
        let ahal = self.data[e - 1];
        if ss != 0 || se != 63 || ahal != 0 {
            return Err(Error::Unsupported { offset: e - 3, reason: "spectral selection in a sequential scan".into() });
        }

        let mut reader = BitReader::new(self.data, e);
        let mut preds = vec![0i32; ns];
        let restart = self.restart_interval;
        let mut expected_rst = 0u8;

        // Interleaved scans walk MCUs; a single-component scan walks that
        // component's own block grid, clipped to the image extent.
        let units: Vec<Vec<(usize, usize, usize)>> = if ns == 1 {
            let (ci, _, _) = &members[0];
            let c = &frame.comps[*ci];
            let bw = (frame.width * c.h).div_ceil(8 * frame.hmax);
            let bh = (frame.height * c.v).div_ceil(8 * frame.vmax);
            let mut v = Vec::with_capacity(bw * bh);
            for by in 0..bh {
                for bx in 0..bw {
                    v.push(vec![(0, bx, by)]);
                }
            }
            v
        } else {
            let mut v = Vec::with_capacity(frame.mcus_x * frame.mcus_y);
            for my in 0..frame.mcus_y {
                for mx in 0..frame.mcus_x {
                    let mut unit = Vec::new();
                    for (mi, (ci, _, _)) in members.iter().enumerate() {
                        let c = &frame.comps[*ci];
                        for yy in 0..c.v {
                            for xx in 0..c.h {
                                unit.push((mi, mx * c.h + xx, my * c.v + yy));
                            }
                        }
                    }
                    v.push(unit);
                }
            }
            v
        };

        for (n, unit) in units.iter().enumerate() {
            if restart > 0 && n > 0 && n % restart == 0 {
                // byte-align and consume RSTn
                reader.reset();
                let p = reader.pos;
                if self.data.get(p) != Some(&0xFF) || self.data.get(p + 1) != Some(&(0xD0 + expected_rst)) {
                    return Err(err(p, format!("expected restart marker RST{expected_rst}")));
                }
                reader.pos = p + 2;
                reader.hit_marker = false;
                expected_rst = (expected_rst + 1) & 7;
                preds.iter_mut().for_each(|p| *p = 0);
            }
            for &(mi, bx, by) in unit {
                let (ci, dc, ac) = &members[mi];
                let comp = &mut frame.comps[*ci];
                let block = &mut comp.coefs[by * comp.blocks_w + bx];
                decode_block(&mut reader, block, &mut preds[mi], dc, ac)?;
            }
        }

        // Skip to the next marker (tolerates fill bytes after the scan).
        let mut p = reader.pos;
        loop {
            match (self.data.get(p), self.data.get(p + 1)) {
                (Some(0xFF), Some(0x00)) => p += 2,
                (Some(0xFF), Some(m)) if (0xD0..=0xD7).contains(m) => p += 2,
                (Some(0xFF), Some(_)) => break,
                (Some(0xFF), None) | (None, _) => return Err(err(self.data.len(), "stream ends inside a scan")),
                (Some(_), _) => p += 1,
            }
        }
        self.pos = p;
        self.scans += 1;
        Ok(())
    }

    fn reconstruct(&self, frame: Frame) -> Result<Image> {
        let (w, h) = (frame.width, frame.height);
        let mut planes = Vec::with_capacity(frame.comps.len());
        for c in &frame.comps {
            let quant = self.quant[c.tq].ok_or_else(|| err(self.pos, format!("missing quantization table {}", c.tq)))?;
            let pw = c.blocks_w * 8;
            let mut plane = vec![0u8; pw * c.blocks_h * 8];
            let mut coef = [0f32; 64];
            for by in 0..c.blocks_h {
                for bx in 0..c.blocks_w {
                    let zz = &c.coefs[by * c.blocks_w + bx];
                    for (k, &z) in ZIGZAG.iter().enumerate() {
                        coef[z] = (zz[k] * quant[z] as i32) as f32;
                    }
                    let px = dct::inverse(&coef);
                    for y in 0..8 {
                        for x in 0..8 {
                            let v = (px[y * 8 + x] + 128.0).round().clamp(0.0, 255.0) as u8;
                            plane[(by * 8 + y) * pw + bx * 8 + x] = v;
                        }
                    }
                }
            }
            planes.push((plane, pw, c.h, c.v));
        }
        let sample = |ci: usize, x: usize, y: usize| -> f32 {
            let (plane, pw, ch, cv) = &planes[ci];
            let sx = x * ch / frame.hmax;
            let sy = y * cv / frame.vmax;
            plane[sy * pw + sx] as f32
        };
        if planes.len() == 1 {
            let mut pixels = Vec::with_capacity(w * h);
            for y in 0..h {
                for x in 0..w {
                    pixels.push(sample(0, x, y) as u8);
                }
            }
            return Image::new(w, h, 1, pixels);
        }
        let mut pixels = Vec::with_capacity(w * h * 3);
        for y in 0..h {
            for x in 0..w {
                let yy = sample(0, x, y);
                let cb = sample(1, x, y) - 128.0;
                let cr = sample(2, x, y) - 128.0;
                let r = yy + 1.402 * cr;
                let g = yy - 0.344_136 * cb - 0.714_136 * cr;
                let b = yy + 1.772 * cb;
                for v in [r, g, b] {
                    pixels.push(v.round().clamp(0.0, 255.0) as u8);
                }
            }
        }
        Image::new(w, h, 3, pixels)
    }
}

fn decode_block(
    reader: &mut BitReader<'_>,
    block: &mut [i32; 64],
    pred: &mut i32,
    dc: &HuffTable,
    ac: &HuffTable,
) -> Result<()> {
    let t = reader.decode(dc)?;
    let diff = reader.receive_extend(t)?;
    *pred += diff;
    block[0] = *pred;
    let mut k = 1;
    while k < 64 {
        let at = reader.pos;
        let rs = reader.decode(ac)?;
        let (r, s) = ((rs >> 4) as usize, rs & 15);
        if s == 0 {
            if r == 15 {
                k += 16;
                continue;
            }
            break;
        }
        k += r;
        if k > 63 {
            return Err(err(at, "AC run exceeds the block"));
        }
        block[k] = reader.receive_extend(s)?;
        k += 1;
    }
    Ok(())
}

/// Decodes a complete baseline JPEG stream. Gray streams stay one channel;
/// three-component streams are converted from YCbCr to RGB.
pub fn decode_jpeg(bytes: &[u8]) -> Result<Image> {
    if bytes.is_empty() {
        return Err(err(0, "empty input"));
    }
    let decoder = Decoder {
        data: bytes,
        pos: 0,
        quant: [None; 4],
        dc_tables: [None, None, None, None],
        ac_tables: [None, None, None, None],
        restart_interval: 0,
        frame: None,
        scans: 0,
    };
    decoder.run()
}
