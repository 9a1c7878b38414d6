#![allow(dead_code)]

use ocuverify::forensics::ElaConfig;
use ocuverify::imaging::{decode_jpeg, encode_jpeg, Image, JpegQuality};
use ocuverify::losses::{contrastive_loss, triplet_loss, PairLabel};
use ocuverify::neuralnet::{init_network, ArchConfig, ConvBlock, ModelTag, Network, Tensor};
use ocuverify::pipeline::Models;
use ocuverify::synth::Rect;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub mod flow;

pub const FD_EPS: f64 = 1e-3;
pub const FD_REL_TOL: f64 = 1e-4;
pub const FD_FINE_EPS: f64 = 1e-5;

/// Central-difference relative error, guarded for gradients that both vanish.
pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(1e-8)
}

#[derive(Debug, Default, Clone, Copy)]
pub struct FdReport {
    pub checked: usize,
    pub skipped_kinks: usize,
    pub worst: f64,
    pub failures: usize,
    /// Worst error of the failing coordinates re-measured at [`FD_FINE_EPS`].
    pub fine_worst: f64,
}

impl FdReport {
    pub fn merge(&mut self, o: FdReport) {
        self.checked += o.checked;
        self.skipped_kinks += o.skipped_kinks;
        self.worst = self.worst.max(o.worst);
        self.failures += o.failures;
        self.fine_worst = self.fine_worst.max(o.fine_worst);
    }
}

fn objective(net: &Network<f64>, x: &Tensor<f64>, up: &Tensor<f64>) -> (f64, Vec<u32>) {
    let c = net.forward_cached(x).unwrap();
    let v = c.output().iter().zip(up.data()).map(|(a, b)| a * b).sum();
    (v, c.kink_signature())
}

/// Checks every parameter of `net` against central differences of
/// `sum(upstream * forward(x))`. Coordinates whose perturbation changes the
/// ReLU/argmax pattern are counted as skipped kinks.
pub fn check_network_gradients(net: &mut Network<f64>, x: &Tensor<f64>, up: &Tensor<f64>) -> FdReport {
    let cache = net.forward_cached(x).unwrap();
    let base_sig = cache.kink_signature();
    let grads = net.backward(&cache, up).unwrap();
    let mut rep = FdReport::default();
    for pi in 0..net.params().len() {
        for j in 0..net.params()[pi].value.len() {
            let orig = net.params()[pi].value.data()[j];
            net.param_mut(pi).data_mut()[j] = orig + FD_EPS;
            let (fp, sp) = objective(net, x, up);
            net.param_mut(pi).data_mut()[j] = orig - FD_EPS;
            let (fm, sm) = objective(net, x, up);
            net.param_mut(pi).data_mut()[j] = orig;
            if sp != base_sig || sm != base_sig {
                rep.skipped_kinks += 1;
                continue;
            }
            let num = (fp - fm) / (2.0 * FD_EPS);
            let e = rel_err(grads[pi].data()[j], num);
            rep.checked += 1;
            rep.worst = rep.worst.max(e);
            if e >= FD_REL_TOL {
                rep.failures += 1;
                net.param_mut(pi).data_mut()[j] = orig + FD_FINE_EPS;
                let (fp, _) = objective(net, x, up);
                net.param_mut(pi).data_mut()[j] = orig - FD_FINE_EPS;
                let (fm, _) = objective(net, x, up);
                net.param_mut(pi).data_mut()[j] = orig;
                rep.fine_worst = rep.fine_worst.max(rel_err(grads[pi].data()[j], (fp - fm) / (2.0 * FD_FINE_EPS)));
            }
        }
    }
    rep
}

pub fn random_tensor(rng: &mut impl Rng, shape: Vec<usize>, lo: f64, hi: f64) -> Tensor<f64> {
    let n = shape.iter().product();
    Tensor::new(shape, (0..n).map(|_| rng.random_range(lo..hi)).collect()).unwrap()
}

/// Architectures covering each layer type alone and composed, on 16x16 inputs
/// (FC-only nets use smaller inputs to keep the parameter count modest).
pub fn gradcheck_archs() -> Vec<(&'static str, ArchConfig)> {
    let a = |side, blocks: Vec<ConvBlock>, d, norm| ArchConfig {
        input_side: side,
        input_channels: 1,
        conv_blocks: blocks,
        embedding_dim: d,
        normalize_embeddings: norm,
    };
    vec![
        ("fc", a(4, vec![], 3, false)),
        ("fc+l2", a(4, vec![], 3, true)),
        ("conv+relu", a(6, vec![ConvBlock::new(2, 3, 1)], 2, false)),
        ("conv+relu+pool", a(8, vec![ConvBlock::new(2, 3, 2)], 2, false)),
        ("composed", a(16, vec![ConvBlock::new(3, 3, 2), ConvBlock::new(4, 3, 2)], 4, true)),
    ]
}

/// Runs the network check for every architecture on random 2-image batches.
pub fn network_gradcheck_suite(seed: u64) -> Vec<(&'static str, FdReport)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    gradcheck_archs()
        .into_iter()
        .map(|(name, arch)| {
            let mut net = init_network::<f64>(&arch, rng.random(), ModelTag::PrePost).unwrap();
            // Non-zero biases so the bias paths are exercised.
            for pi in 0..net.params().len() {
                if net.params()[pi].name.ends_with(".bias") {
                    for v in net.param_mut(pi).data_mut() {
                        *v = rng.random_range(-0.1..0.1);
                    }
                }
            }
            let s = arch.input_side;
            let x = random_tensor(&mut rng, vec![2, 1, s, s], 0.0, 1.0);
            let up = random_tensor(&mut rng, vec![2, arch.embedding_dim], -1.0, 1.0);
            (name, check_network_gradients(&mut net, &x, &up))
        })
        .collect()
}

fn fd_vec(f: &dyn Fn(&[f64]) -> f64, x: &[f64], grad: &[f64], rep: &mut FdReport, tol: f64) {
    for i in 0..x.len() {
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        xp[i] += FD_EPS;
        xm[i] -= FD_EPS;
        let num = (f(&xp) - f(&xm)) / (2.0 * FD_EPS);
        let e = rel_err(grad[i], num);
        rep.checked += 1;
        rep.worst = rep.worst.max(e);
        if e >= tol {
            rep.failures += 1;
        }
    }
}

/// Finite-difference check of both losses on `cases` random embedding sets,
/// skipping draws within 0.01 of a hinge kink.
pub fn loss_gradcheck(cases: usize, seed: u64, tol: f64) -> (FdReport, FdReport) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut con, mut tri) = (FdReport::default(), FdReport::default());
    let d = 6;
    let vec = |rng: &mut ChaCha8Rng| (0..d).map(|_| rng.random_range(-0.6..0.6)).collect::<Vec<f64>>();
    let (m, alpha) = (1.0, 0.2);
    let mut done = 0;
    while done < cases {
        let (u, v) = (vec(&mut rng), vec(&mut rng));
        let label = if done % 2 == 0 { PairLabel::Genuine } else { PairLabel::Impostor };
        let dist: f64 = u.iter().zip(&v).map(|(a, b)| (a - b) * (a - b)).sum();
        let (a, p, n) = (vec(&mut rng), vec(&mut rng), vec(&mut rng));
        let z = ocuverify::losses::squared_distance(&a, &p) - ocuverify::losses::squared_distance(&a, &n) + alpha;
        if (dist - m).abs() < 0.01 || z.abs() < 0.01 {
            con.skipped_kinks += 1;
            continue;
        }
        let (_, gu, gv) = contrastive_loss(&u, &v, label, m);
        fd_vec(&|x| contrastive_loss(x, &v, label, m).0, &u, &gu, &mut con, tol);
        fd_vec(&|x| contrastive_loss(&u, x, label, m).0, &v, &gv, &mut con, tol);

        let (_, ga, gp, gn) = triplet_loss(&a, &p, &n, alpha);
        fd_vec(&|x| triplet_loss(x, &p, &n, alpha).0, &a, &ga, &mut tri, tol);
        fd_vec(&|x| triplet_loss(&a, x, &n, alpha).0, &p, &gp, &mut tri, tol);
        fd_vec(&|x| triplet_loss(&a, &p, x, alpha).0, &n, &gn, &mut tri, tol);
        done += 1;
    }
    (con, tri)
}

/// Smooth waves plus per-pixel sensor-like noise: texture everywhere, as in
/// a camera photo.
pub fn photo_like(seed: u64, w: usize, h: usize) -> Image {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let waves: Vec<[f64; 4]> = (0..6)
        .map(|_| [r.random_range(0.01..0.3), r.random_range(0.01..0.3), r.random_range(0.0..6.28), r.random_range(10.0..40.0)])
        .collect();
    let noise: Vec<f64> = (0..w * h * 3).map(|_| r.random_range(-12.0..12.0)).collect();
    Image::from_fn(w, h, 3, |x, y, c| {
        let mut v = 120.0 + c as f64 * 10.0;
        for [fx, fy, ph, a] in &waves {
            v += a * (fx * x as f64 + fy * y as f64 + ph + c as f64).sin();
        }
        (v + noise[(y * w + x) * 3 + c]).clamp(0.0, 255.0) as u8
    })
    .unwrap()
}

/// Photo-like 128x128 carrier saved at q75, and the same carrier with a
/// block-aligned 40x40 patch of never-compressed binary noise pasted in and
/// re-saved at q75. Returns `(genuine, forged, rect)`.
pub fn noise_splice(seed: u64) -> (Vec<u8>, Vec<u8>, Rect) {
    let q = JpegQuality::new(75).unwrap();
    let genuine = encode_jpeg(&photo_like(seed, 128, 128), q);
    let carrier = decode_jpeg(&genuine).unwrap();
    let rect = Rect { x: 40, y: 32, w: 40, h: 40 };
    let mut r = ChaCha8Rng::seed_from_u64(seed ^ 0x5a11);
    let forged = Image::from_fn(128, 128, 3, |x, y, c| {
        if rect.contains(x, y) {
            if r.random_bool(0.5) { 255 } else { 0 }
        } else {
            carrier.get(x, y, c)
        }
    })
    .unwrap();
    (genuine, encode_jpeg(&forged, q), rect)
}

/// ELA settings under which [`noise_splice`] forgeries are detectable.
pub fn splice_screen_config() -> ElaConfig {
    ElaConfig { absolute_floor: 1.0, ..ElaConfig::default() }
}

pub fn tiny_arch() -> ArchConfig {
    ArchConfig {
        input_side: 16,
        input_channels: 1,
        conv_blocks: vec![ConvBlock::new(4, 3, 2)],
        embedding_dim: 8,
        normalize_embeddings: true,
    }
}

/// Untrained models of all three tags.
pub fn tiny_models(seed: u64) -> Models {
    let net = |tag, s| init_network::<f32>(&tiny_arch(), s, tag).unwrap();
    Models::new(net(ModelTag::PrePre, seed), net(ModelTag::PostPost, seed + 1), net(ModelTag::PrePost, seed + 2)).unwrap()
}
