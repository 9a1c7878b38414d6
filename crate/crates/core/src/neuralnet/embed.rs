use super::network::Network;
use super::tensor::Tensor;
use crate::error::Result;
use crate::imaging::{resize, to_grayscale, Image};

/// A point `f(x)` in the embedding space.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    pub values: Vec<f32>,
}

impl Embedding {
    pub fn new(values: Vec<f32>) -> Self {
        Self { values }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn norm(&self) -> f32 {
        self.values.iter().map(|v| v * v).sum::<f32>().sqrt()
    }

    /// Squared Euclidean distance, the quantity compared against thresholds.
    pub fn squared_distance(&self, other: &Embedding) -> f32 {
        self.values.iter().zip(&other.values).map(|(a, b)| (a - b) * (a - b)).sum()
    }
}

/// Converts an image to the network's input layout: grayscale (or RGB for
/// 3-channel models), resized to `input_side`, scaled to [0, 1], planar.
pub fn image_to_input(img: &Image, channels: usize, side: usize) -> Result<Vec<f32>> {
    let img = if channels == 1 { to_grayscale(img) } else { img.to_rgb() };
    let img = resize(&img, side, side)?;
    let ch = img.channels();
    let mut out = vec![0f32; ch * side * side];
    for (i, &v) in img.pixels().iter().enumerate() {
        let (c, p) = (i % ch, i / ch);
        out[c * side * side + p] = v as f32 / 255.0;
    }
    Ok(out)
}

/// Stacks images into one `[B, C, side, side]` batch for `net`.
pub fn batch_from_images<'a>(net: &Network<f32>, imgs: impl IntoIterator<Item = &'a Image>) -> Result<Tensor<f32>> {
    let a = net.arch();
    let mut data = Vec::new();
    let mut b = 0;
    for img in imgs {
        data.extend(image_to_input(img, a.input_channels, a.input_side)?);
        b += 1;
    }
    Tensor::new(vec![b, a.input_channels, a.input_side, a.input_side], data)
}

pub fn embed(net: &Network<f32>, img: &Image) -> Result<Embedding> {
    Ok(embed_batch(net, std::slice::from_ref(img))?.pop().expect("one row"))
}

/// [`embed`] for several images in one forward pass.
pub fn embed_batch(net: &Network<f32>, imgs: &[Image]) -> Result<Vec<Embedding>> {
    if imgs.is_empty() {
        return Ok(Vec::new());
    }
    let out = net.forward(&batch_from_images(net, imgs)?)?;
    let d = net.arch().embedding_dim;
    Ok(out.data().chunks(d).map(|r| Embedding::new(r.to_vec())).collect())
}
