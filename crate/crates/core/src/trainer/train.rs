use std::collections::BTreeSet;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::dataset::{augment_items, build_variant_dataset, check_items, DatasetItem, Phase};
use crate::error::{Error, Result};
use crate::losses::{contrastive_loss, sample_triplets, triplet_loss, LossConfig, PairLabel, SamplingStrategy};
use crate::neuralnet::{
    image_to_input, init_network, sgd_step, ArchConfig, ModelTag, Network, SgdState, Tensor,
};
use crate::preprocess::AugmentConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    Contrastive,
    Triplet,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub variant: ModelTag,
    pub loss: LossKind,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f32,
    pub momentum: f32,
    pub augment: AugmentConfig,
    /// Augmented copies generated per original before training.
    pub augment_copies: usize,
    pub seed: u64,
    pub arch: ArchConfig,
    pub margin: f32,
    pub alpha: f32,
    pub sampling: SamplingStrategy,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let l = LossConfig::default();
        Self {
            variant: ModelTag::PrePost,
            loss: LossKind::Triplet,
            epochs: 100,
            batch_size: l.batch_size,
            lr: 0.01,
            momentum: 0.9,
            augment: AugmentConfig::default(),
            augment_copies: 8,
            seed: 42,
            arch: ArchConfig::default(),
            margin: l.margin,
            alpha: l.alpha,
            sampling: SamplingStrategy::SemiHard,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        LossConfig { margin: self.margin, alpha: self.alpha, batch_size: self.batch_size }.validate()?;
        if !self.lr.is_finite() || self.lr < 0.0 || !self.momentum.is_finite() || self.momentum < 0.0 {
            return Err(Error::Config("lr and momentum must be finite and non-negative".into()));
        }
        self.augment.validate()?;
        self.arch.validate()
    }
}

/// What a run produced besides the network.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    /// Mean step loss per epoch.
    pub loss_curve: Vec<f64>,
    pub steps: usize,
    /// Phases of every item that entered a training batch.
    pub phases_seen: BTreeSet<Phase>,
}

impl TrainReport {
    pub fn loss_csv(&self) -> String {
        let mut s = String::from("epoch,mean_loss\n");
        for (e, l) in self.loss_curve.iter().enumerate() {
            let _ = writeln!(s, "{},{}", e + 1, l);
        }
        s
    }
}

/// Trains a fresh network of `cfg.variant` on `items` (originals, plus any
/// copies already present) after adding `cfg.augment_copies` augmented
/// copies per original. Each epoch runs `max(1, view / N)` steps; each step
/// samples N triplets, embeds them through the one shared network, and
/// applies one momentum SGD update on the mean loss. The contrastive loss
/// uses each triplet as one genuine and one impostor pair.
pub fn train(items: &[DatasetItem], cfg: &TrainConfig) -> Result<(Network<f32>, TrainReport)> {
    cfg.validate()?;
    check_items(items)?;
    let all = augment_items(items, &cfg.augment, cfg.augment_copies)?;
    let view = build_variant_dataset(&all, cfg.variant)?;
    let a = &cfg.arch;
    let plane = a.input_channels * a.input_side * a.input_side;
    let inputs: Vec<Vec<f32>> = view
        .members
        .iter()
        .map(|&i| image_to_input(&all[i].image, a.input_channels, a.input_side))
        .collect::<Result<_>>()?;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut net = init_network::<f32>(a, rng.random(), cfg.variant)?;
    let mut state = SgdState::new(&net);
    let n = cfg.batch_size;
    let steps_per_epoch = (view.len() / n).max(1);
    let mut report = TrainReport { loss_curve: Vec::with_capacity(cfg.epochs), steps: 0, phases_seen: BTreeSet::new() };
    let d = a.embedding_dim;

    for _epoch in 0..cfg.epochs {
        let embeddings = match cfg.sampling {
            SamplingStrategy::SemiHard => Some(
                embed_inputs(&net, &inputs, plane)
                    .map_err(|e| Error::Training { step: report.steps, detail: e.to_string() })?,
            ),
            SamplingStrategy::Random => None,
        };
        let mut epoch_loss = 0.0f64;
        for _ in 0..steps_per_epoch {
            let step = report.steps;
            let triplets = sample_triplets(
                &view.candidates,
                view.rule,
                embeddings.as_deref(),
                n,
                cfg.alpha,
                cfg.sampling,
                rng.random(),
            )?;
            let mut batch = Vec::with_capacity(3 * n * plane);
            for t in &triplets {
                for k in [t.anchor, t.positive, t.negative] {
                    batch.extend_from_slice(&inputs[k]);
                    report.phases_seen.insert(all[view.members[k]].phase);
                }
            }
            let x = Tensor::new(vec![3 * n, a.input_channels, a.input_side, a.input_side], batch)?;
            let cache = net.forward_cached(&x).map_err(|e| Error::Training { step, detail: e.to_string() })?;
            let out = cache.output();
            let mut up = vec![0f32; 3 * n * d];
            let mut loss = 0.0f64;
            let scale = 1.0 / n as f32;
            for i in 0..n {
                let (ra, rp, rn) = (3 * i * d, (3 * i + 1) * d, (3 * i + 2) * d);
                let (ea, ep, en) = (&out[ra..ra + d], &out[rp..rp + d], &out[rn..rn + d]);
                let mut acc = |off: usize, g: &[f32]| {
                    for (u, &gv) in up[off..off + d].iter_mut().zip(g) {
                        *u += gv * scale;
                    }
                };
                match cfg.loss {
                    LossKind::Triplet => {
                        let (l, ga, gp, gn) = triplet_loss(ea, ep, en, cfg.alpha);
                        loss += l as f64;
                        acc(ra, &ga);
                        acc(rp, &gp);
                        acc(rn, &gn);
                    }
                    LossKind::Contrastive => {
                        let (l1, gu1, gv1) = contrastive_loss(ea, ep, PairLabel::Genuine, cfg.margin);
                        acc(ra, &gu1);
                        acc(rp, &gv1);
                        let (l2, gu2, gv2) = contrastive_loss(ea, en, PairLabel::Impostor, cfg.margin);
                        acc(ra, &gu2);
                        acc(rn, &gv2);
                        loss += (l1 + l2) as f64 / 2.0;
                    }
                }
            }
            let loss = loss / n as f64;
            if !loss.is_finite() {
                return Err(Error::Training { step, detail: format!("non-finite loss {loss}") });
            }
            if let LossKind::Contrastive = cfg.loss {
                up.iter_mut().for_each(|g| *g *= 0.5);
            }
            let grads = net.backward(&cache, &Tensor::new(vec![3 * n, d], up)?)?;
            sgd_step(&mut net, &grads, cfg.lr, cfg.momentum, &mut state)?;
            if let Some(p) = net.params().iter().find(|p| !p.value.is_finite()) {
                return Err(Error::Training { step, detail: format!("parameter `{}` became non-finite", p.name) });
            }
            epoch_loss += loss;
            report.steps += 1;
        }
        report.loss_curve.push(epoch_loss / steps_per_epoch as f64);
    }
    Ok((net, report))
}

fn embed_inputs(net: &Network<f32>, inputs: &[Vec<f32>], plane: usize) -> Result<Vec<Vec<f32>>> {
    let a = net.arch();
    let mut out = Vec::with_capacity(inputs.len());
    for chunk in inputs.chunks(64) {
        let data: Vec<f32> = chunk.iter().flat_map(|v| v.iter().copied()).collect();
        debug_assert_eq!(data.len(), chunk.len() * plane);
        let x = Tensor::new(vec![chunk.len(), a.input_channels, a.input_side, a.input_side], data)?;
        let y = net.forward(&x)?;
        out.extend(y.data().chunks(a.embedding_dim).map(|r| r.to_vec()));
    }
    Ok(out)
}
