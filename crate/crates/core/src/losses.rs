//! Contrastive and triplet losses over squared Euclidean distance, and
//! triplet sampling.

use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::neuralnet::Scalar;

/// `Genuine` (Y = 0) pulls a pair together, `Impostor` (Y = 1) pushes it
/// apart up to the margin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PairLabel {
    Genuine,
    Impostor,
}

impl PairLabel {
    pub fn y(self) -> u8 {
        match self {
            PairLabel::Genuine => 0,
            PairLabel::Impostor => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossConfig {
    /// Contrastive margin, squared-distance units.
    pub margin: f32,
    /// Triplet margin, squared-distance units.
    pub alpha: f32,
    pub batch_size: usize,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self { margin: 1.0, alpha: 0.2, batch_size: 32 }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.margin > 0.0) || !(self.alpha > 0.0) {
            return Err(Error::Config("loss margins must be positive".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be at least 1".into()));
        }
        Ok(())
    }
}

pub fn squared_distance<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| (x - y) * (x - y)).sum()
}

/// `0.5 * [(1 - Y) D + Y max(0, m - D)]` with `D = |u - v|^2`, and its
/// gradients with respect to `u` and `v`. At `D = m` the hinge contributes 0.
pub fn contrastive_loss<T: Scalar>(u: &[T], v: &[T], label: PairLabel, margin: T) -> (T, Vec<T>, Vec<T>) {
    assert_eq!(u.len(), v.len(), "embedding dims differ");
    let d = squared_distance(u, v);
    let half = T::from(0.5).unwrap();
    let diff: Vec<T> = u.iter().zip(v).map(|(&a, &b)| a - b).collect();
    match label {
        PairLabel::Genuine => {
            let gv = diff.iter().map(|&x| -x).collect();
            (half * d, diff, gv)
        }
        PairLabel::Impostor if d < margin => {
            let gu: Vec<T> = diff.iter().map(|&x| -x).collect();
            (half * (margin - d), gu, diff)
        }
        PairLabel::Impostor => (T::zero(), vec![T::zero(); u.len()], vec![T::zero(); u.len()]),
    }
}

/// `[|a - p|^2 - |a - n|^2 + alpha]_+` and its gradients for `a`, `p`, `n`.
pub fn triplet_loss<T: Scalar>(a: &[T], p: &[T], n: &[T], alpha: T) -> (T, Vec<T>, Vec<T>, Vec<T>) {
    assert!(a.len() == p.len() && a.len() == n.len(), "embedding dims differ");
    let z = squared_distance(a, p) - squared_distance(a, n) + alpha;
    let len = a.len();
    if z <= T::zero() {
        return (T::zero(), vec![T::zero(); len], vec![T::zero(); len], vec![T::zero(); len]);
    }
    let two = T::from(2.0).unwrap();
    let ga = (0..len).map(|i| two * (n[i] - p[i])).collect();
    let gp = (0..len).map(|i| -two * (a[i] - p[i])).collect();
    let gn = (0..len).map(|i| two * (a[i] - n[i])).collect();
    (z, ga, gp, gn)
}

/// Indices of anchor, positive and negative items.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Triplet {
    pub anchor: usize,
    pub positive: usize,
    pub negative: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SamplingStrategy {
    Random,
    SemiHard,
}

/// What the sampler needs to know about one item.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Candidate {
    pub identity: u64,
    /// Side of a two-sided view (e.g. pre vs post); single-sided views use 0 throughout.
    pub side: u8,
}

/// Sampling rules for a dataset view. With `cross_side`, positives come from
/// the side opposite the anchor and negatives from the positive's side, so
/// every comparison crosses sides like a verification query would.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SamplingRule {
    pub cross_side: bool,
}

impl SamplingRule {
    fn positive_ok(&self, items: &[Candidate], a: usize, p: usize) -> bool {
        a != p && items[a].identity == items[p].identity && (!self.cross_side || items[a].side != items[p].side)
    }

    fn negative_ok(&self, items: &[Candidate], a: usize, p: usize, n: usize) -> bool {
        items[n].identity != items[a].identity && (!self.cross_side || items[n].side == items[p].side)
    }
}

/// Draws `count` triplets. `SemiHard` needs `embeddings` (one per item) and
/// picks, per anchor/positive, a random negative with
/// `d(a,p) < d(a,n) < d(a,p) + alpha`, falling back to the closest negative
/// (lowest index on ties). Deterministic for a given seed.
pub fn sample_triplets(
    items: &[Candidate],
    rule: SamplingRule,
    embeddings: Option<&[Vec<f32>]>,
    count: usize,
    alpha: f32,
    strategy: SamplingStrategy,
    seed: u64,
) -> Result<Vec<Triplet>> {
    let mut ids: Vec<u64> = items.iter().map(|c| c.identity).collect();
    ids.sort_unstable();
    ids.dedup();
    if ids.len() < 2 {
        return Err(Error::Sampling(format!("triplets need at least 2 identities, got {}", ids.len())));
    }
    let emb = match (strategy, embeddings) {
        (SamplingStrategy::SemiHard, None) => {
            return Err(Error::Sampling("semi-hard sampling needs embeddings".into()));
        }
        (SamplingStrategy::SemiHard, Some(e)) if e.len() != items.len() => {
            return Err(Error::Sampling(format!("{} embeddings for {} items", e.len(), items.len())));
        }
        (_, e) => e,
    };

    // Anchors with at least one valid positive and one valid negative.
    let mut usable: Vec<(usize, Vec<usize>)> = Vec::new();
    for a in 0..items.len() {
        let pos: Vec<usize> = (0..items.len()).filter(|&p| rule.positive_ok(items, a, p)).collect();
        let any_pair = pos.iter().any(|&p| (0..items.len()).any(|n| rule.negative_ok(items, a, p, n)));
        if any_pair {
            usable.push((a, pos));
        }
    }
    if usable.is_empty() {
        return Err(Error::Sampling("no anchor has both a positive and a negative".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let (a, pos) = usable.choose(&mut rng).expect("non-empty");
        let a = *a;
        let p = *pos.choose(&mut rng).expect("non-empty");
        let negs: Vec<usize> = (0..items.len()).filter(|&n| rule.negative_ok(items, a, p, n)).collect();
        if negs.is_empty() {
            continue;
        }
        let n = match (strategy, emb) {
            (SamplingStrategy::SemiHard, Some(e)) => {
                let dp = squared_distance(&e[a], &e[p]);
                let semi: Vec<usize> = negs
                    .iter()
                    .copied()
                    .filter(|&n| {
                        let dn = squared_distance(&e[a], &e[n]);
                        dp < dn && dn < dp + alpha
                    })
                    .collect();
                match semi.choose(&mut rng) {
                    Some(&n) => n,
                    None => hardest_negative(e, a, &negs),
                }
            }
            _ => *negs.choose(&mut rng).expect("non-empty"),
        };
        out.push(Triplet { anchor: a, positive: p, negative: n });
    }
    Ok(out)
}

fn hardest_negative(e: &[Vec<f32>], a: usize, negs: &[usize]) -> usize {
    let mut best = negs[0];
    let mut best_d = squared_distance(&e[a], &e[best]);
    for &n in &negs[1..] {
        let d = squared_distance(&e[a], &e[n]);
        if d < best_d {
            best = n;
            best_d = d;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn contrastive_examples() {
        let u = [0.3f64, -0.2, 0.9];
        let (l, gu, gv) = contrastive_loss(&u, &u, PairLabel::Genuine, 1.0);
        assert_eq!(l, 0.0);
        assert!(gu.iter().chain(&gv).all(|&g| g == 0.0));
        let (l, _, _) = contrastive_loss(&u, &u, PairLabel::Impostor, 1.0);
        assert_eq!(l, 0.5);
        let far = [5.0f64, 0.0, 0.0];
        let (l, gu, _) = contrastive_loss(&u, &far, PairLabel::Impostor, 1.0);
        assert_eq!(l, 0.0);
        assert!(gu.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn triplet_examples() {
        let (l, ..) = triplet_loss(&[1.0f64, 0.0, 0.0], &[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0], 0.2);
        assert_eq!(l, 0.0);
        let x = [0.4f64, 0.1];
        let (l, ..) = triplet_loss(&x, &x, &x, 0.2);
        assert_eq!(l, 0.2);
        let (l, ..) = triplet_loss(&[1.0f64, 0.0], &[0.0, 1.0], &[1.0, 0.0], 0.2);
        assert!((l - 2.2).abs() < 1e-12);
    }

    #[test]
    fn single_identity_cannot_be_sampled() {
        let items = vec![Candidate { identity: 1, side: 0 }; 4];
        let r = sample_triplets(&items, SamplingRule { cross_side: false }, None, 4, 0.2, SamplingStrategy::Random, 1);
        assert!(matches!(r, Err(Error::Sampling(_))));
    }
}
