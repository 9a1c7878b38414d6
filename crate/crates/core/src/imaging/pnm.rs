//! Lossless PGM/PPM (`P5`/`P6`, maxval 255) debug raster.

use crate::error::{Error, Result};
use crate::imaging::Image;

pub fn encode_pnm(img: &Image) -> Vec<u8> {
    let magic = if img.channels() == 1 { "P5" } else { "P6" };
    let mut out = format!("{magic}\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend_from_slice(img.pixels());
    out
}

pub fn decode_pnm(bytes: &[u8]) -> Result<Image> {
    let mut pos = 0;
    let mut fields = Vec::with_capacity(4);
    while fields.len() < 4 {
        while pos < bytes.len() && (bytes[pos].is_ascii_whitespace() || bytes[pos] == b'#') {
            if bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            } else {
                pos += 1;
            }
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::Decode { offset: pos, reason: "truncated PNM header".into() });
        }
        fields.push(std::str::from_utf8(&bytes[start..pos]).unwrap_or("").to_string());
    }
    // exactly one whitespace byte separates the header from the samples
    pos += 1;
    let channels = match fields[0].as_str() {
        "P5" => 1,
        "P6" => 3,
        other => return Err(Error::Decode { offset: 0, reason: format!("unsupported PNM magic {other:?}") }),
    };
    let parse = |s: &str| {
        s.parse::<usize>().map_err(|_| Error::Decode { offset: 0, reason: format!("bad PNM header field {s:?}") })
    };
    let (w, h, maxval) = (parse(&fields[1])?, parse(&fields[2])?, parse(&fields[3])?);
    if maxval != 255 {
        return Err(Error::Decode { offset: 0, reason: format!("PNM maxval {maxval} (only 255 supported)") });
    }
    let need = w * h * channels;
    let samples = bytes.get(pos..pos + need).ok_or(Error::Decode {
        offset: bytes.len(),
        reason: format!("PNM raster needs {need} bytes"),
    })?;
    Image::new(w, h, channels, samples.to_vec())
}
