use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::imaging::Image;
use crate::losses::{Candidate, SamplingRule};
use crate::neuralnet::ModelTag;
use crate::preprocess::{augment_stream, AugmentConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Phase {
    Pre,
    Post,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Pre => "pre",
            Phase::Post => "post",
        }
    }
}

/// One preprocessed image. Originals have `augmented_from = None`; copies
/// point at the index of their original in the same item list.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetItem {
    pub identity_id: u64,
    pub phase: Phase,
    pub image: Image,
    pub augmented_from: Option<usize>,
}

impl DatasetItem {
    pub fn original(identity_id: u64, phase: Phase, image: Image) -> Self {
        Self { identity_id, phase, image, augmented_from: None }
    }
}

/// Checks the one-pair regime: exactly one original pre and one original
/// post image per identity, and copies referring to originals.
pub fn check_items(items: &[DatasetItem]) -> Result<()> {
    let mut seen: BTreeMap<(u64, Phase), usize> = BTreeMap::new();
    for (i, it) in items.iter().enumerate() {
        match it.augmented_from {
            None => *seen.entry((it.identity_id, it.phase)).or_default() += 1,
            Some(src) => {
                let ok = items.get(src).is_some_and(|o| {
                    o.augmented_from.is_none() && o.identity_id == it.identity_id && o.phase == it.phase
                });
                if !ok {
                    return Err(Error::Dataset(format!("item {i} claims a bad original {src}")));
                }
            }
        }
    }
    for (&(id, phase), &n) in &seen {
        if n != 1 {
            return Err(Error::Dataset(format!("identity {id} has {n} original {} images", phase.as_str())));
        }
    }
    Ok(())
}

/// Appends `copies` augmented versions of every original. Copy `c` of the
/// original at index `i` uses RNG stream `i * 65536 + c` of `cfg.seed`.
pub fn augment_items(items: &[DatasetItem], cfg: &AugmentConfig, copies: usize) -> Result<Vec<DatasetItem>> {
    let mut out = items.to_vec();
    for (i, it) in items.iter().enumerate() {
        if it.augmented_from.is_some() {
            continue;
        }
        for c in 0..copies {
            let image = augment_stream(&it.image, cfg, (i as u64) << 16 | c as u64)?;
            out.push(DatasetItem { identity_id: it.identity_id, phase: it.phase, image, augmented_from: Some(i) });
        }
    }
    Ok(out)
}

/// The items a model variant trains on, with the sampling rule that pairs them.
#[derive(Debug, Clone, PartialEq)]
pub struct VariantView {
    pub variant: ModelTag,
    /// Indices into the full item list.
    pub members: Vec<usize>,
    pub candidates: Vec<Candidate>,
    pub rule: SamplingRule,
}

impl VariantView {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// All same-identity pairs the rule allows, as view positions `(i, j)`
    /// with `i < j` for single-sided views and `i` on side 0 for PRE-POST.
    pub fn genuine_pairs(&self) -> Vec<(usize, usize)> {
        let c = &self.candidates;
        let mut out = Vec::new();
        for i in 0..c.len() {
            for j in 0..c.len() {
                if c[i].identity != c[j].identity {
                    continue;
                }
                let ok = if self.rule.cross_side { c[i].side == 0 && c[j].side == 1 } else { i < j };
                if ok {
                    out.push((i, j));
                }
            }
        }
        out
    }
}

fn side_of(p: Phase) -> u8 {
    match p {
        Phase::Pre => 0,
        Phase::Post => 1,
    }
}

/// PRE-PRE keeps only pre items, POST-POST only post items, PRE-POST keeps
/// both and pairs across phases.
pub fn build_variant_dataset(items: &[DatasetItem], variant: ModelTag) -> Result<VariantView> {
    let keep = |p: Phase| match variant {
        ModelTag::PrePre => p == Phase::Pre,
        ModelTag::PostPost => p == Phase::Post,
        ModelTag::PrePost => true,
    };
    let members: Vec<usize> = (0..items.len()).filter(|&i| keep(items[i].phase)).collect();
    if members.is_empty() {
        return Err(Error::Dataset(format!("no items are eligible for {variant}")));
    }
    let candidates = members
        .iter()
        .map(|&i| Candidate { identity: items[i].identity_id, side: side_of(items[i].phase) })
        .collect();
    Ok(VariantView { variant, members, candidates, rule: SamplingRule { cross_side: variant == ModelTag::PrePost } })
}

/// Splits identities into train/test by shuffling with `seed`; the train side
/// gets `round(train_fraction * n)` identities, at least one on each side
/// when `n >= 2`.
pub fn split_identities(ids: &[u64], train_fraction: f64, seed: u64) -> Result<(Vec<u64>, Vec<u64>)> {
    let mut ids = ids.to_vec();
    ids.sort_unstable();
    ids.dedup();
    if ids.len() < 2 {
        return Err(Error::Dataset("need at least two identities to split".into()));
    }
    if !(0.0..=1.0).contains(&train_fraction) {
        return Err(Error::Config(format!("train fraction {train_fraction} outside [0, 1]")));
    }
    ids.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_train = ((train_fraction * ids.len() as f64).round() as usize).clamp(1, ids.len() - 1);
    let test = ids.split_off(n_train);
    ids.sort_unstable();
    let mut test = test;
    test.sort_unstable();
    Ok((ids, test))
}
