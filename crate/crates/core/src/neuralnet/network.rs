use std::sync::atomic::{AtomicU64, Ordering};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::arch::{ArchConfig, BlockGeometry, ModelTag};
use super::tensor::{Scalar, Tensor};
use crate::error::{Error, Result};

static NEXT_NET_ID: AtomicU64 = AtomicU64::new(1);

fn fresh_id() -> u64 {
    NEXT_NET_ID.fetch_add(1, Ordering::Relaxed)
}

/// A named parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Param<T = f32> {
    pub name: String,
    pub value: Tensor<T>,
}

/// Parameters are laid out as `conv{i}.weight [out, in, k, k]`,
/// `conv{i}.bias [out]`, then `fc.weight [d, features]` and `fc.bias [d]`.
#[derive(Debug)]
pub struct Network<T: Scalar = f32> {
    arch: ArchConfig,
    geometry: Vec<BlockGeometry>,
    params: Vec<Param<T>>,
    tag: ModelTag,
    id: u64,
    version: u64,
}

impl<T: Scalar> Clone for Network<T> {
    fn clone(&self) -> Self {
        Self {
            arch: self.arch.clone(),
            geometry: self.geometry.clone(),
            params: self.params.clone(),
            tag: self.tag,
            id: fresh_id(),
            version: 0,
        }
    }
}

impl<T: Scalar> PartialEq for Network<T> {
    /// Architecture, tag and parameter values; cache bookkeeping is ignored.
    fn eq(&self, other: &Self) -> bool {
        self.arch == other.arch && self.tag == other.tag && self.params == other.params
    }
}

/// Gradients aligned index-for-index with [`Network::params`].
pub type Gradients<T = f32> = Vec<Tensor<T>>;

/// Activations kept by [`Network::forward_cached`] for the matching backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache<T = f32> {
    net_id: u64,
    version: u64,
    batch: usize,
    blocks: Vec<BlockCache<T>>,
    fc_input: Vec<T>,
    norms: Vec<T>,
    output: Vec<T>,
}

impl<T: Scalar> ForwardCache<T> {
    /// Embeddings computed by the pass, `[B, d]` flattened.
    pub fn output(&self) -> &[T] {
        &self.output
    }

    /// Discrete state of the pass: pooling argmax positions and the ReLU
    /// on/off pattern. Passes with equal signatures share one linear piece
    /// of the network up to the normalization.
    pub fn kink_signature(&self) -> Vec<u32> {
        let mut sig = Vec::new();
        for b in &self.blocks {
            sig.extend_from_slice(&b.argmax);
            sig.extend(b.activ.iter().map(|&v| (v > T::zero()) as u32));
        }
        sig
    }
}

#[derive(Debug, Clone)]
struct BlockCache<T> {
    /// im2col matrix per image, `[in_c * k * k, conv_side^2]`.
    cols: Vec<T>,
    /// Post-ReLU conv output, `[B, out_c, conv_side^2]`.
    activ: Vec<T>,
    /// Flat index into the conv plane of each pooled value's argmax.
    argmax: Vec<u32>,
}

/// A validated network input: `[B, C, side, side]` scaled to [0, 1].
fn check_input<T: Scalar>(arch: &ArchConfig, batch: &Tensor<T>) -> Result<usize> {
    let s = batch.shape();
    let want = [arch.input_channels, arch.input_side, arch.input_side];
    if s.len() != 4 || s[1..] != want || s[0] == 0 {
        return Err(Error::Shape {
            layer: "input".into(),
            detail: format!("expected [B>=1, {}, {}, {}], got {s:?}", want[0], want[1], want[2]),
        });
    }
    Ok(s[0])
}

impl<T: Scalar> Network<T> {
    pub fn arch(&self) -> &ArchConfig {
        &self.arch
    }

    pub fn tag(&self) -> ModelTag {
        self.tag
    }

    pub fn params(&self) -> &[Param<T>] {
        &self.params
    }

    /// Mutable access to one parameter. Invalidates outstanding caches.
    pub fn param_mut(&mut self, index: usize) -> &mut Tensor<T> {
        self.version += 1;
        &mut self.params[index].value
    }

    pub fn param_count(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    /// Bumped on every parameter mutation; caches remember the value they saw.
    pub fn version(&self) -> u64 {
        self.version
    }

    pub(crate) fn from_parts(arch: ArchConfig, tag: ModelTag, params: Vec<Param<T>>) -> Result<Self> {
        let geometry = arch.geometry()?;
        let expected = param_shapes(&arch, &geometry)?;
        if expected.len() != params.len() {
            return Err(Error::ModelFormat(format!(
                "architecture needs {} parameters, got {}",
                expected.len(),
                params.len()
            )));
        }
        for ((name, shape), p) in expected.iter().zip(&params) {
            if &p.name != name || p.value.shape() != shape.as_slice() {
                return Err(Error::ModelFormat(format!(
                    "parameter `{}` {:?} does not match expected `{name}` {shape:?}",
                    p.name,
                    p.value.shape()
                )));
            }
        }
        Ok(Self { arch, geometry, params, tag, id: fresh_id(), version: 0 })
    }

    /// Same network in another scalar type.
    pub fn cast<U: Scalar>(&self) -> Network<U> {
        Network {
            arch: self.arch.clone(),
            geometry: self.geometry.clone(),
            params: self.params.iter().map(|p| Param { name: p.name.clone(), value: p.value.cast() }).collect(),
            tag: self.tag,
            id: fresh_id(),
            version: 0,
        }
    }

    /// Forward pass without keeping activations. Output `[B, d]`.
    pub fn forward(&self, batch: &Tensor<T>) -> Result<Tensor<T>> {
        let cache = self.forward_cached(batch)?;
        Tensor::new(vec![cache.batch, self.arch.embedding_dim], cache.output)
    }

    /// Forward pass returning the embeddings and the cache for [`Self::backward`].
    pub fn forward_cached(&self, batch: &Tensor<T>) -> Result<ForwardCache<T>> {
        let b = check_input(&self.arch, batch)?;
        let mut x: Vec<T> = batch.data().to_vec();
        let mut blocks = Vec::with_capacity(self.geometry.len());

        for (i, (g, blk)) in self.geometry.iter().zip(&self.arch.conv_blocks).enumerate() {
            let (w, bias) = (&self.params[2 * i].value, &self.params[2 * i + 1].value);
            let (k, oc, p) = (blk.kernel_size, blk.out_channels, blk.pool_size);
            let kk = g.in_channels * k * k;
            let plane = g.conv_side * g.conv_side;
            let in_len = g.in_channels * g.in_side * g.in_side;

            let mut cols = vec![T::zero(); b * kk * plane];
            let mut activ = vec![T::zero(); b * oc * plane];
            for n in 0..b {
                let img = &x[n * in_len..(n + 1) * in_len];
                let c = &mut cols[n * kk * plane..(n + 1) * kk * plane];
                im2col(img, g.in_channels, g.in_side, k, g.conv_side, c);
                let out = &mut activ[n * oc * plane..(n + 1) * oc * plane];
                matmul(w.data(), c, out, oc, kk, plane);
                for o in 0..oc {
                    let bo = bias.data()[o];
                    for v in &mut out[o * plane..(o + 1) * plane] {
                        let z = *v + bo;
                        *v = if z > T::zero() { z } else { T::zero() };
                    }
                }
            }

            let ps = g.pool_side;
            let mut pooled = vec![T::zero(); b * oc * ps * ps];
            let mut argmax = vec![0u32; b * oc * ps * ps];
            for plane_idx in 0..b * oc {
                let src = &activ[plane_idx * plane..(plane_idx + 1) * plane];
                for py in 0..ps {
                    for px in 0..ps {
                        let mut best = py * p * g.conv_side + px * p;
                        for dy in 0..p {
                            for dx in 0..p {
                                let j = (py * p + dy) * g.conv_side + px * p + dx;
                                if src[j] > src[best] {
                                    best = j;
                                }
                            }
                        }
                        let o = plane_idx * ps * ps + py * ps + px;
                        pooled[o] = src[best];
                        argmax[o] = best as u32;
                    }
                }
            }
            blocks.push(BlockCache { cols, activ, argmax });
            x = pooled;
        }

        let nb = self.geometry.len();
        let (fw, fb) = (&self.params[2 * nb].value, &self.params[2 * nb + 1].value);
        let d = self.arch.embedding_dim;
        let f = fw.shape()[1];
        let mut output = vec![T::zero(); b * d];
        for n in 0..b {
            let xin = &x[n * f..(n + 1) * f];
            for j in 0..d {
                let row = &fw.data()[j * f..(j + 1) * f];
                output[n * d + j] = fb.data()[j] + dot(row, xin);
            }
        }
        let mut norms = Vec::new();
        if self.arch.normalize_embeddings {
            norms.reserve(b);
            for row in output.chunks_mut(d) {
                let norm = dot(row, row).sqrt();
                let tiny = T::from(1e-12).unwrap();
                if norm < tiny {
                    row.iter_mut().for_each(|v| *v = T::zero());
                } else {
                    row.iter_mut().for_each(|v| *v = *v / norm);
                }
                norms.push(norm);
            }
        }
        if !output.iter().all(|v| v.is_finite()) {
            return Err(Error::Shape { layer: "fc".into(), detail: "non-finite activation".into() });
        }
        Ok(ForwardCache { net_id: self.id, version: self.version, batch: b, blocks, fc_input: x, norms, output })
    }

    /// Gradients of `sum(upstream * embeddings)` with respect to every parameter.
    pub fn backward(&self, cache: &ForwardCache<T>, upstream: &Tensor<T>) -> Result<Gradients<T>> {
        if cache.net_id != self.id || cache.version != self.version {
            return Err(Error::StaleCache(format!(
                "cache was taken from network {} version {}, this is network {} version {}",
                cache.net_id, cache.version, self.id, self.version
            )));
        }
        let (b, d) = (cache.batch, self.arch.embedding_dim);
        if upstream.shape() != [b, d] {
            return Err(Error::Shape {
                layer: "output".into(),
                detail: format!("upstream gradient must be [{b}, {d}], got {:?}", upstream.shape()),
            });
        }
        let mut grads: Gradients<T> = self.params.iter().map(|p| Tensor::zeros(p.value.shape().to_vec())).collect();

        // L2 normalization: dz = (dy - y (y . dy)) / |z|.
        let mut dz = upstream.data().to_vec();
        if self.arch.normalize_embeddings {
            for n in 0..b {
                let y = &cache.output[n * d..(n + 1) * d];
                let dy = &mut dz[n * d..(n + 1) * d];
                let norm = cache.norms[n];
                if norm < T::from(1e-12).unwrap() {
                    dy.iter_mut().for_each(|v| *v = T::zero());
                    continue;
                }
                let proj = dot(y, dy);
                for (g, &yv) in dy.iter_mut().zip(y) {
                    *g = (*g - yv * proj) / norm;
                }
            }
        }

        let nb = self.geometry.len();
        let fw = &self.params[2 * nb].value;
        let f = fw.shape()[1];
        let mut dx = vec![T::zero(); b * f];
        {
            let (gw, rest) = grads[2 * nb..].split_at_mut(1);
            let (gw, gb) = (gw[0].data_mut(), rest[0].data_mut());
            for n in 0..b {
                let xin = &cache.fc_input[n * f..(n + 1) * f];
                let dxn = &mut dx[n * f..(n + 1) * f];
                for j in 0..d {
                    let g = dz[n * d + j];
                    if g == T::zero() {
                        continue;
                    }
                    gb[j] = gb[j] + g;
                    axpy(g, xin, &mut gw[j * f..(j + 1) * f]);
                    axpy(g, &fw.data()[j * f..(j + 1) * f], dxn);
                }
            }
        }

        for i in (0..nb).rev() {
            let g = self.geometry[i];
            let blk = self.arch.conv_blocks[i];
            let bc = &cache.blocks[i];
            let (k, oc) = (blk.kernel_size, blk.out_channels);
            let kk = g.in_channels * k * k;
            let plane = g.conv_side * g.conv_side;
            let ps2 = g.pool_side * g.pool_side;

            // Unpool through the recorded argmax, then gate by ReLU (derivative 0 at 0).
            let mut dact = vec![T::zero(); b * oc * plane];
            for plane_idx in 0..b * oc {
                for q in 0..ps2 {
                    let o = plane_idx * ps2 + q;
                    let j = plane_idx * plane + bc.argmax[o] as usize;
                    if bc.activ[j] > T::zero() {
                        dact[j] = dact[j] + dx[o];
                    }
                }
            }

            let w = &self.params[2 * i].value;
            let in_len = g.in_channels * g.in_side * g.in_side;
            let mut dinput = if i > 0 { vec![T::zero(); b * in_len] } else { Vec::new() };
            let mut dcols = vec![T::zero(); kk * plane];
            let (gw, rest) = grads[2 * i..].split_at_mut(1);
            let (gw, gb) = (gw[0].data_mut(), rest[0].data_mut());
            for n in 0..b {
                let dy = &dact[n * oc * plane..(n + 1) * oc * plane];
                let cols = &bc.cols[n * kk * plane..(n + 1) * kk * plane];
                for o in 0..oc {
                    let dyo = &dy[o * plane..(o + 1) * plane];
                    gb[o] = gb[o] + dyo.iter().copied().sum();
                    let gwo = &mut gw[o * kk..(o + 1) * kk];
                    for (r, gv) in gwo.iter_mut().enumerate() {
                        *gv = *gv + dot(dyo, &cols[r * plane..(r + 1) * plane]);
                    }
                }
                if i > 0 {
                    dcols.iter_mut().for_each(|v| *v = T::zero());
                    for o in 0..oc {
                        let dyo = &dy[o * plane..(o + 1) * plane];
                        for r in 0..kk {
                            let wv = w.data()[o * kk + r];
                            if wv != T::zero() {
                                axpy(wv, dyo, &mut dcols[r * plane..(r + 1) * plane]);
                            }
                        }
                    }
                    col2im(&dcols, g.in_channels, g.in_side, k, g.conv_side, &mut dinput[n * in_len..(n + 1) * in_len]);
                }
            }
            dx = dinput;
        }
        Ok(grads)
    }
}

fn param_shapes(arch: &ArchConfig, geometry: &[BlockGeometry]) -> Result<Vec<(String, Vec<usize>)>> {
    let mut out = Vec::new();
    for (i, (g, b)) in geometry.iter().zip(&arch.conv_blocks).enumerate() {
        out.push((format!("conv{i}.weight"), vec![b.out_channels, g.in_channels, b.kernel_size, b.kernel_size]));
        out.push((format!("conv{i}.bias"), vec![b.out_channels]));
    }
    let f = arch.flat_features()?;
    out.push(("fc.weight".into(), vec![arch.embedding_dim, f]));
    out.push(("fc.bias".into(), vec![arch.embedding_dim]));
    Ok(out)
}

/// He initialization: weights from N(0, 2 / fan_in), biases zero. Fan-in is
/// `in_channels * k * k` for convolutions and the flattened feature count
/// for the fully-connected layer.
pub fn init_network<T: Scalar>(arch: &ArchConfig, seed: u64, tag: ModelTag) -> Result<Network<T>> {
    let geometry = arch.geometry()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = Vec::new();
    for (name, shape) in param_shapes(arch, &geometry)? {
        let value = if name.ends_with(".bias") {
            Tensor::zeros(shape)
        } else {
            let fan_in: usize = shape[1..].iter().product();
            let normal = Normal::new(0.0, (2.0 / fan_in as f64).sqrt())
                .map_err(|e| Error::Config(format!("init distribution: {e}")))?;
            let n = shape.iter().product();
            let data = (0..n).map(|_| T::from(normal.sample(&mut rng)).unwrap()).collect();
            Tensor::new(shape, data)?
        };
        params.push(Param { name, value });
    }
    Network::from_parts(arch.clone(), tag, params)
}

/// Unfolds `[c, side, side]` into `[c * k * k, out * out]` for valid convolution.
fn im2col<T: Scalar>(img: &[T], c: usize, side: usize, k: usize, out: usize, cols: &mut [T]) {
    let plane = out * out;
    for ch in 0..c {
        for ky in 0..k {
            for kx in 0..k {
                let r = (ch * k + ky) * k + kx;
                let dst = &mut cols[r * plane..(r + 1) * plane];
                for oy in 0..out {
                    let src = &img[ch * side * side + (oy + ky) * side + kx..];
                    dst[oy * out..(oy + 1) * out].copy_from_slice(&src[..out]);
                }
            }
        }
    }
}

/// Adjoint of [`im2col`]: accumulates columns back onto the image.
fn col2im<T: Scalar>(cols: &[T], c: usize, side: usize, k: usize, out: usize, img: &mut [T]) {
    let plane = out * out;
    for ch in 0..c {
        for ky in 0..k {
            for kx in 0..k {
                let r = (ch * k + ky) * k + kx;
                let src = &cols[r * plane..(r + 1) * plane];
                for oy in 0..out {
                    let base = ch * side * side + (oy + ky) * side + kx;
                    let dst = &mut img[base..base + out];
                    for (d, &s) in dst.iter_mut().zip(&src[oy * out..(oy + 1) * out]) {
                        *d = *d + s;
                    }
                }
            }
        }
    }
}

/// `c[m, n] = a[m, k] * b[k, n]`.
fn matmul<T: Scalar>(a: &[T], b: &[T], c: &mut [T], m: usize, k: usize, n: usize) {
    c.iter_mut().for_each(|v| *v = T::zero());
    for i in 0..m {
        let ci = &mut c[i * n..(i + 1) * n];
        for r in 0..k {
            let av = a[i * k + r];
            if av != T::zero() {
                axpy(av, &b[r * n..(r + 1) * n], ci);
            }
        }
    }
}

/// Eight running partial sums so the compiler can vectorize; the
/// reduction order is fixed, so results are reproducible.
#[inline]
fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [T::zero(); 8];
    let mut ca = a.chunks_exact(8);
    let mut cb = b.chunks_exact(8);
    for (x, y) in (&mut ca).zip(&mut cb) {
        for k in 0..8 {
            acc[k] = acc[k] + x[k] * y[k];
        }
    }
    let mut tail = T::zero();
    for (&x, &y) in ca.remainder().iter().zip(cb.remainder()) {
        tail = tail + x * y;
    }
    ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail
}

#[inline]
fn axpy<T: Scalar>(alpha: T, x: &[T], y: &mut [T]) {
    for (yv, &xv) in y.iter_mut().zip(x) {
        *yv = *yv + alpha * xv;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neuralnet::ConvBlock;

    fn tiny_arch() -> ArchConfig {
        ArchConfig {
            input_side: 10,
            input_channels: 1,
            conv_blocks: vec![ConvBlock::new(2, 3, 2)],
            embedding_dim: 3,
            normalize_embeddings: true,
        }
    }

    #[test]
    fn im2col_col2im_are_adjoint() {
        let (c, side, k) = (2, 5, 3);
        let out = side - k + 1;
        let img: Vec<f64> = (0..c * side * side).map(|i| (i as f64 * 0.37).sin()).collect();
        let y: Vec<f64> = (0..c * k * k * out * out).map(|i| (i as f64 * 0.11).cos()).collect();
        let mut cols = vec![0.0; y.len()];
        im2col(&img, c, side, k, out, &mut cols);
        let mut back = vec![0.0; img.len()];
        col2im(&y, c, side, k, out, &mut back);
        let lhs: f64 = cols.iter().zip(&y).map(|(a, b)| a * b).sum();
        let rhs: f64 = img.iter().zip(&back).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-9);
    }

    #[test]
    fn stale_cache_is_rejected() {
        let mut net = init_network::<f32>(&tiny_arch(), 1, ModelTag::PrePost).unwrap();
        let x = Tensor::zeros(vec![1, 1, 10, 10]);
        let cache = net.forward_cached(&x).unwrap();
        let up = Tensor::zeros(vec![1, 3]);
        assert!(net.backward(&cache, &up).is_ok());
        net.param_mut(0).data_mut()[0] += 1.0;
        assert!(matches!(net.backward(&cache, &up), Err(Error::StaleCache(_))));
        let other = net.clone();
        let cache = net.forward_cached(&x).unwrap();
        assert!(matches!(other.backward(&cache, &up), Err(Error::StaleCache(_))));
    }

    #[test]
    fn wrong_input_shape_names_the_layer() {
        let net = init_network::<f32>(&tiny_arch(), 1, ModelTag::PrePost).unwrap();
        match net.forward(&Tensor::zeros(vec![1, 1, 9, 10])) {
            Err(Error::Shape { layer, .. }) => assert_eq!(layer, "input"),
            other => panic!("unexpected {other:?}"),
        }
    }
}
