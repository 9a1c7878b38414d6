use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::dataset::{DatasetItem, Phase};
use crate::error::{Error, Result};
use crate::imaging::Image;
use crate::neuralnet::{embed_batch, ModelTag, Network};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalMetrics {
    pub accuracy: f64,
    pub false_acceptance: f64,
    pub false_rejection: f64,
    pub threshold_used: f64,
    pub genuine_count: usize,
    pub impostor_count: usize,
}

/// Squared embedding distance of every pair, embedding each distinct image once.
pub fn pair_distances(net: &Network<f32>, pairs: &[(&Image, &Image)]) -> Result<Vec<f64>> {
    let mut imgs: Vec<Image> = Vec::with_capacity(2 * pairs.len());
    for (a, b) in pairs {
        imgs.push((*a).clone());
        imgs.push((*b).clone());
    }
    let mut emb = Vec::with_capacity(imgs.len());
    for chunk in imgs.chunks(64) {
        emb.extend(embed_batch(net, chunk)?);
    }
    Ok(emb.chunks(2).map(|p| p[0].squared_distance(&p[1]) as f64).collect())
}

/// Metrics at one threshold: a pair is accepted iff its distance is `<= theta`.
pub fn metrics_from_distances(genuine: &[f64], impostor: &[f64], theta: f64) -> Result<EvalMetrics> {
    if genuine.is_empty() || impostor.is_empty() {
        return Err(Error::Evaluation("both genuine and impostor pairs are required".into()));
    }
    let rejected = genuine.iter().filter(|&&d| d > theta).count();
    let accepted = impostor.iter().filter(|&&d| d <= theta).count();
    let (g, i) = (genuine.len(), impostor.len());
    Ok(EvalMetrics {
        accuracy: ((g - rejected) + (i - accepted)) as f64 / (g + i) as f64,
        false_acceptance: accepted as f64 / i as f64,
        false_rejection: rejected as f64 / g as f64,
        threshold_used: theta,
        genuine_count: g,
        impostor_count: i,
    })
}

pub fn evaluate(
    net: &Network<f32>,
    genuine_pairs: &[(&Image, &Image)],
    impostor_pairs: &[(&Image, &Image)],
    theta: f64,
) -> Result<EvalMetrics> {
    if genuine_pairs.is_empty() || impostor_pairs.is_empty() {
        return Err(Error::Evaluation("both genuine and impostor pairs are required".into()));
    }
    metrics_from_distances(&pair_distances(net, genuine_pairs)?, &pair_distances(net, impostor_pairs)?, theta)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub rows: Vec<EvalMetrics>,
    pub theta_eer: f64,
}

impl SweepResult {
    pub fn eer_row(&self) -> &EvalMetrics {
        self.rows.iter().find(|r| r.threshold_used == self.theta_eer).expect("eer row present")
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("theta,false_acceptance,false_rejection,accuracy\n");
        for r in &self.rows {
            let _ = writeln!(s, "{},{},{},{}", r.threshold_used, r.false_acceptance, r.false_rejection, r.accuracy);
        }
        s
    }
}

/// Evaluates every grid point; the EER threshold minimizes `|FA - FR|`, the
/// first (smallest) grid point winning ties.
pub fn sweep_distances(genuine: &[f64], impostor: &[f64], grid: &[f64]) -> Result<SweepResult> {
    if grid.is_empty() {
        return Err(Error::Evaluation("threshold grid is empty".into()));
    }
    if grid.windows(2).any(|w| !(w[0] <= w[1])) {
        return Err(Error::Evaluation("threshold grid must be sorted ascending".into()));
    }
    let rows = grid.iter().map(|&t| metrics_from_distances(genuine, impostor, t)).collect::<Result<Vec<_>>>()?;
    let mut best = 0;
    for (i, r) in rows.iter().enumerate() {
        let gap = (r.false_acceptance - r.false_rejection).abs();
        if gap < (rows[best].false_acceptance - rows[best].false_rejection).abs() {
            best = i;
        }
    }
    Ok(SweepResult { theta_eer: rows[best].threshold_used, rows })
}

pub fn sweep_threshold(
    net: &Network<f32>,
    genuine_pairs: &[(&Image, &Image)],
    impostor_pairs: &[(&Image, &Image)],
    grid: &[f64],
) -> Result<SweepResult> {
    if genuine_pairs.is_empty() || impostor_pairs.is_empty() {
        return Err(Error::Evaluation("both genuine and impostor pairs are required".into()));
    }
    sweep_distances(&pair_distances(net, genuine_pairs)?, &pair_distances(net, impostor_pairs)?, grid)
}

/// `steps + 1` evenly spaced thresholds from `lo` to `hi` inclusive.
pub fn linear_grid(lo: f64, hi: f64, steps: usize) -> Vec<f64> {
    (0..=steps).map(|i| lo + (hi - lo) * i as f64 / steps.max(1) as f64).collect()
}

/// Index pairs into `items` for held-out evaluation of `variant`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvalPairs {
    pub genuine: Vec<(usize, usize)>,
    pub impostor: Vec<(usize, usize)>,
}

impl EvalPairs {
    pub fn resolve<'a>(&self, items: &'a [DatasetItem]) -> (Vec<(&'a Image, &'a Image)>, Vec<(&'a Image, &'a Image)>) {
        let r = |v: &[(usize, usize)]| v.iter().map(|&(a, b)| (&items[a].image, &items[b].image)).collect();
        (r(&self.genuine), r(&self.impostor))
    }
}

/// Genuine pairs are every same-identity comparison the variant makes
/// (pre against post for PRE-POST, distinct same-phase items otherwise).
/// Impostor pairs are drawn without replacement from all cross-identity
/// comparisons of the same kind, as many as there are genuine pairs.
pub fn build_eval_pairs(items: &[DatasetItem], variant: ModelTag, seed: u64) -> Result<EvalPairs> {
    let phase_ok = |a: Phase, b: Phase| match variant {
        ModelTag::PrePre => a == Phase::Pre && b == Phase::Pre,
        ModelTag::PostPost => a == Phase::Post && b == Phase::Post,
        ModelTag::PrePost => a == Phase::Pre && b == Phase::Post,
    };
    let single_sided = variant != ModelTag::PrePost;
    let (mut genuine, mut impostor) = (Vec::new(), Vec::new());
    for i in 0..items.len() {
        for j in 0..items.len() {
            if !phase_ok(items[i].phase, items[j].phase) || (single_sided && i >= j) {
                continue;
            }
            if items[i].identity_id == items[j].identity_id {
                genuine.push((i, j));
            } else {
                impostor.push((i, j));
            }
        }
    }
    if genuine.is_empty() || impostor.is_empty() {
        return Err(Error::Evaluation(format!("items give no genuine or no impostor pairs for {variant}")));
    }
    impostor.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    impostor.truncate(genuine.len());
    impostor.sort_unstable();
    Ok(EvalPairs { genuine, impostor })
}
