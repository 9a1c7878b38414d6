use ocuverify::imaging::pnm::decode_pnm;
use ocuverify::imaging::{decode_jpeg, encode_jpeg, resize, to_grayscale};
use ocuverify::{Image, JpegQuality};
use proptest::prelude::*;

fn fixture(name: &str) -> Vec<u8> {
    std::fs::read(format!("{}/tests/fixtures/{name}", env!("CARGO_MANIFEST_DIR"))).unwrap()
}

fn max_abs_diff(a: &Image, b: &Image) -> u8 {
    assert_eq!((a.width(), a.height(), a.channels()), (b.width(), b.height(), b.channels()));
    a.pixels().iter().zip(b.pixels()).map(|(&x, &y)| x.abs_diff(y)).max().unwrap()
}

#[test]
fn decodes_reference_white_fixture() {
    // Written by libjpeg (4:2:0, quality 75).
    let img = decode_jpeg(&fixture("white_2x2.jpg")).unwrap();
    assert_eq!((img.width(), img.height(), img.channels()), (2, 2, 3));
    assert!(img.pixels().iter().all(|&v| v == 255));
}

#[test]
fn matches_reference_decoder_on_444_and_gray() {
    let ours = decode_jpeg(&fixture("ref_444.jpg")).unwrap();
    let theirs = decode_pnm(&fixture("ref_444.ppm")).unwrap();
    assert!(max_abs_diff(&ours, &theirs) <= 2, "444 diff {}", max_abs_diff(&ours, &theirs));

    let ours = decode_jpeg(&fixture("ref_gray.jpg")).unwrap();
    let theirs = decode_pnm(&fixture("ref_gray.pgm")).unwrap();
    assert_eq!(ours.channels(), 1);
    assert!(max_abs_diff(&ours, &theirs) <= 1);
}

#[test]
fn decodes_subsampled_reference_stream() {
    // libjpeg uses triangular chroma upsampling, we replicate samples, so only
    // luma is compared tightly.
    let ours = decode_jpeg(&fixture("ref_420.jpg")).unwrap();
    let theirs = decode_pnm(&fixture("ref_420.ppm")).unwrap();
    let diff = max_abs_diff(&to_grayscale(&ours), &to_grayscale(&theirs));
    assert!(diff <= 12, "luma diff {diff}");
}

#[test]
fn garbage_is_a_decode_error() {
    assert!(decode_jpeg(b"not a jpeg").is_err());
    let mut bytes = fixture("ref_444.jpg");
    bytes.truncate(bytes.len() - 100);
    assert!(decode_jpeg(&bytes).is_err());
}

fn smooth_image(seed: u64, w: usize, h: usize) -> Image {
    // Low-frequency content: a sum of three broad sinusoids.
    let f = |s: u64| ((s.wrapping_mul(2654435761) % 1000) as f64) / 1000.0;
    let (a, b, c) = (f(seed), f(seed + 1), f(seed + 2));
    Image::from_fn(w, h, 1, |x, y, _| {
        let (x, y) = (x as f64, y as f64);
        let v = 128.0
            + 60.0 * (x * 0.11 * (0.5 + a) + 6.0 * b).sin()
            + 50.0 * (y * 0.09 * (0.5 + b) + 6.0 * c).cos()
            + 15.0 * ((x + y) * 0.05 * (0.5 + c)).sin();
        v.round().clamp(0.0, 255.0) as u8
    })
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn decode_encode_preserves_dimensions(w in 1usize..40, h in 1usize..40, q in 1i64..=100, rgb in any::<bool>(), seed in any::<u64>()) {
        let ch = if rgb { 3 } else { 1 };
        let img = Image::from_fn(w, h, ch, |x, y, c| ((x as u64 * 31 + y as u64 * 7 + c as u64 * 13 + seed) % 256) as u8).unwrap();
        let out = decode_jpeg(&encode_jpeg(&img, JpegQuality::new(q).unwrap())).unwrap();
        prop_assert_eq!((out.width(), out.height(), out.channels()), (w, h, ch));
    }

    #[test]
    fn grayscale_is_idempotent(w in 1usize..20, h in 1usize..20, seed in any::<u64>()) {
        let img = Image::from_fn(w, h, 3, |x, y, c| ((x as u64 * 97 + y as u64 * 57 + c as u64 * 23 + seed) % 256) as u8).unwrap();
        let g = to_grayscale(&img);
        prop_assert_eq!(to_grayscale(&g), g);
    }

    #[test]
    fn resize_round_trip_is_stable(seed in any::<u64>(), w in 8usize..40, h in 8usize..40) {
        let img = smooth_image(seed, 57, 45);
        let direct = resize(&img, w, h).unwrap();
        let via = resize(&resize(&img, 2 * w, 2 * h).unwrap(), w, h).unwrap();
        prop_assert!(max_abs_diff(&direct, &via) <= 4);
    }
}
