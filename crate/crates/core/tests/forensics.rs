use ocuverify::forensics::{check_image_forgery, classify_forgery, compute_ela, ElaConfig, ElaMap, ElaVerdict};
use ocuverify::imaging::{decode_jpeg, encode_jpeg, Image, JpegQuality};
use ocuverify::synth::{gen_identity_pair, SynthIdentitySpec};
use ocuverify::Error;
use proptest::prelude::*;

mod common;
use common::{noise_splice, photo_like, splice_screen_config};

fn q(v: i64) -> JpegQuality {
    JpegQuality::new(v).unwrap()
}

fn percentile(v: &[f64], p: f64) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    s[((s.len() as f64 * p).ceil() as usize).clamp(1, s.len()) - 1]
}

#[test]
fn recompressing_at_the_saved_quality_is_nearly_idempotent() {
    for seed in 0..10 {
        let (pre, _) = gen_identity_pair(&SynthIdentitySpec::from_seed(seed), 96).unwrap();
        let jpeg = encode_jpeg(&pre, q(95));
        let (map, _) = compute_ela(&jpeg, q(95), 20.0).unwrap();
        assert!(map.max() <= 2.0, "seed {seed}: max block mean {}", map.max());
    }
}

#[test]
fn spliced_region_stands_out_in_the_error_map() {
    // 32x32 block-aligned splice from a q=95 donor into a q=75 carrier, saved at 75.
    let (carrier, _) = gen_identity_pair(&SynthIdentitySpec::from_seed(0), 128).unwrap();
    let (donor, _) = gen_identity_pair(&SynthIdentitySpec::from_seed(50), 128).unwrap();
    let c = decode_jpeg(&encode_jpeg(&carrier, q(75))).unwrap();
    let d = decode_jpeg(&encode_jpeg(&donor, q(95))).unwrap();
    let (x0, y0) = (16, 16);
    let forged = Image::from_fn(128, 128, 3, |x, y, ch| {
        if (x0..x0 + 32).contains(&x) && (y0..y0 + 32).contains(&y) {
            d.get(x, y, ch)
        } else {
            c.get(x, y, ch)
        }
    })
    .unwrap();
    let (map, _) = compute_ela(&encode_jpeg(&forged, q(75)), q(95), 20.0).unwrap();
    let mut inside = 0.0;
    for by in y0 / 8..y0 / 8 + 4 {
        for bx in x0 / 8..x0 / 8 + 4 {
            inside += map.get(bx, by);
        }
    }
    inside /= 16.0;
    assert!(inside > 2.0 * map.median(), "inside {inside} median {}", map.median());
}

#[test]
fn genuine_photos_have_a_flat_error_map() {
    for seed in 0..10 {
        for quality in [75, 85] {
            let (map, ela) = compute_ela(&encode_jpeg(&photo_like(seed, 128, 128), q(quality)), q(95), 20.0).unwrap();
            let p99 = percentile(&map.block_means, 0.99);
            assert!(p99 < 3.0 * map.median(), "seed {seed} q{quality}: p99 {p99} median {}", map.median());
            let r = classify_forgery(&map, &ElaConfig::default());
            assert_eq!(r.verdict, ElaVerdict::Genuine);
            assert_eq!((ela.width(), ela.height()), (128, 128));
        }
    }
}

#[test]
fn ela_is_deterministic_and_gain_only_affects_the_display() {
    let jpeg = encode_jpeg(&photo_like(3, 72, 40), q(80));
    let (m1, i1) = compute_ela(&jpeg, q(95), 1.0).unwrap();
    let (m2, i2) = compute_ela(&jpeg, q(95), 1.0).unwrap();
    assert_eq!((&m1, &i1), (&m2, &i2));
    let (m3, i3) = compute_ela(&jpeg, q(95), 20.0).unwrap();
    assert_eq!(m1, m3);
    assert!(i3.pixels().iter().zip(i1.pixels()).all(|(a, b)| a >= b));
    assert_eq!((m1.blocks_w, m1.blocks_h), (9, 5));
    let cfg = ElaConfig::default();
    let a = check_image_forgery(&jpeg, &cfg).unwrap();
    let b = check_image_forgery(&jpeg, &ElaConfig { display_gain: 3.0, ..cfg }).unwrap();
    assert_eq!((a.verdict, &a.suspect_blocks), (b.verdict, &b.suspect_blocks));
}

#[test]
fn undecodable_and_tiny_inputs_are_errors() {
    assert!(matches!(compute_ela(b"not a jpeg", q(95), 1.0), Err(Error::Decode { .. })));
    let tiny = encode_jpeg(&photo_like(1, 7, 30), q(90));
    assert!(compute_ela(&tiny, q(95), 1.0).is_err());
}

fn map_with(bw: usize, bh: usize, values: Vec<f64>) -> ElaMap {
    ElaMap { blocks_w: bw, blocks_h: bh, block_means: values, requality: q(95) }
}

/// Base noise plus a few high-valued rectangles, so both verdicts occur.
fn block_map() -> impl Strategy<Value = ElaMap> {
    (3usize..10, 3usize..10).prop_flat_map(|(bw, bh)| {
        (
            proptest::collection::vec(0.0f64..1.5, bw * bh),
            proptest::collection::vec((0..bw, 0..bh, 1usize..4, 1usize..4, 4.0f64..20.0), 0..3),
        )
            .prop_map(move |(mut v, rects)| {
                for (x, y, w, h, val) in rects {
                    for yy in y..(y + h).min(bh) {
                        for xx in x..(x + w).min(bw) {
                            v[yy * bw + xx] = val;
                        }
                    }
                }
                map_with(bw, bh, v)
            })
    })
}

/// Adjacency-preserving relabelings of the block grid.
fn relabel(m: &ElaMap, kind: u8) -> (ElaMap, Box<dyn Fn((usize, usize)) -> (usize, usize)>) {
    let (w, h) = (m.blocks_w, m.blocks_h);
    let f: Box<dyn Fn((usize, usize)) -> (usize, usize)> = match kind {
        0 => Box::new(move |(x, y)| (w - 1 - x, y)),
        1 => Box::new(move |(x, y)| (x, h - 1 - y)),
        _ => Box::new(|(x, y)| (y, x)),
    };
    let (nw, nh) = if kind == 2 { (h, w) } else { (w, h) };
    let mut v = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let (nx, ny) = f((x, y));
            v[ny * nw + nx] = m.get(x, y);
        }
    }
    (map_with(nw, nh, v), f)
}

proptest! {
    #[test]
    fn verdict_is_invariant_under_grid_symmetries(m in block_map(), kind in 0u8..3) {
        let cfg = ElaConfig::default();
        let r = classify_forgery(&m, &cfg);
        let (m2, f) = relabel(&m, kind);
        let r2 = classify_forgery(&m2, &cfg);
        prop_assert_eq!(r.verdict, r2.verdict);
        let mut moved: Vec<_> = r.suspect_blocks.iter().map(|&b| f(b)).collect();
        moved.sort_unstable();
        let mut got = r2.suspect_blocks.clone();
        got.sort_unstable();
        prop_assert_eq!(moved, got);
    }

    #[test]
    fn suspect_blocks_are_nonempty_exactly_when_forged(m in block_map(), min_region in 1usize..6) {
        let cfg = ElaConfig { min_region, ..ElaConfig::default() };
        let r = classify_forgery(&m, &cfg);
        prop_assert_eq!(r.is_forged(), !r.suspect_blocks.is_empty());
        let med = m.median();
        for &(x, y) in &r.suspect_blocks {
            let v = m.get(x, y);
            prop_assert!(v > cfg.outlier_factor * med && v > cfg.absolute_floor);
        }
    }
}

#[test]
fn noise_splice_is_flagged_under_the_screening_config() {
    let cfg = splice_screen_config();
    for seed in 0..5 {
        let (genuine, forged, rect) = noise_splice(seed);
        assert!(!check_image_forgery(&genuine, &cfg).unwrap().is_forged(), "seed {seed}");
        let r = check_image_forgery(&forged, &cfg).unwrap();
        assert!(r.is_forged(), "seed {seed}");
        let truth = rect.blocks();
        let hit = truth.iter().filter(|b| r.suspect_blocks.contains(b)).count();
        assert!(hit * 2 >= truth.len(), "seed {seed}: recall {hit}/{}", truth.len());
    }
}
