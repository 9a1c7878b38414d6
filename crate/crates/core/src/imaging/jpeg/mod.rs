//! In-repo baseline JPEG codec.

mod dct;
mod decoder;
mod encoder;
mod tables;

pub use decoder::decode_jpeg;
pub use encoder::encode_jpeg;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imaging::{Image, JpegQuality};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn q(v: i64) -> JpegQuality {
        JpegQuality::new(v).unwrap()
    }

    fn random_image(rng: &mut ChaCha8Rng, w: usize, h: usize, ch: usize) -> Image {
        let pixels = (0..w * h * ch).map(|_| rng.random::<u8>()).collect();
        Image::new(w, h, ch, pixels).unwrap()
    }

    fn max_abs_diff(a: &Image, b: &Image) -> u8 {
        a.pixels().iter().zip(b.pixels()).map(|(&x, &y)| x.abs_diff(y)).max().unwrap_or(0)
    }

    #[test]
    fn empty_input_is_rejected() {
        assert!(matches!(decode_jpeg(&[]), Err(crate::Error::Decode { offset: 0, .. })));
    }

    #[test]
    fn truncation_reports_an_offset() {
        let img = Image::from_fn(24, 16, 3, |x, y, c| (x * 9 + y * 5 + c * 40) as u8).unwrap();
        let bytes = encode_jpeg(&img, q(90));
        for cut in [3, 20, bytes.len() / 2, bytes.len() - 3] {
            match decode_jpeg(&bytes[..cut]) {
                Err(crate::Error::Decode { offset, .. }) => assert!(offset <= cut, "offset {offset} > {cut}"),
                other => panic!("cut {cut}: expected decode error, got {other:?}"),
            }
        }
    }

    #[test]
    fn quality_100_round_trip_is_close() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for ch in [1, 3] {
            for _ in 0..4 {
                let img = random_image(&mut rng, 32, 32, ch);
                let back = decode_jpeg(&encode_jpeg(&img, q(100))).unwrap();
                assert_eq!((back.width(), back.height(), back.channels()), (32, 32, ch));
                assert!(max_abs_diff(&img, &back) <= 3, "max diff {}", max_abs_diff(&img, &back));
            }
        }
    }

    #[test]
    fn uniform_gray_survives_quality_95() {
        for ch in [1, 3] {
            let img = Image::filled(40, 24, ch, 131).unwrap();
            let back = decode_jpeg(&encode_jpeg(&img, q(95))).unwrap();
            assert!(max_abs_diff(&img, &back) <= 1);
        }
    }

    #[test]
    fn encoding_is_deterministic_and_dimension_preserving() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let img = random_image(&mut rng, 13, 21, 3);
        for quality in [1, 50, 75, 100] {
            let a = encode_jpeg(&img, q(quality));
            assert_eq!(a, encode_jpeg(&img, q(quality)));
            let back = decode_jpeg(&a).unwrap();
            assert_eq!((back.width(), back.height()), (13, 21));
        }
    }

    #[test]
    fn lower_quality_is_not_larger() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for ch in [1, 3] {
            let img = random_image(&mut rng, 48, 40, ch);
            assert!(encode_jpeg(&img, q(50)).len() <= encode_jpeg(&img, q(100)).len());
        }
    }

    #[test]
    fn gray_stays_single_channel() {
        let img = Image::from_fn(16, 16, 1, |x, y, _| (x * 16 + y) as u8).unwrap();
        let back = decode_jpeg(&encode_jpeg(&img, q(85))).unwrap();
        assert_eq!(back.channels(), 1);
    }
}
