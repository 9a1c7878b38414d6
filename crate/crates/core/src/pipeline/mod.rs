//! Pair verification and duplicate lookup: forgery gate, background
//! removal, embedding, threshold decision, and the embedding database.

mod db;

pub use db::{EmbeddingDb, EmbeddingRecord};

use serde_json::json;

use crate::error::{Error, Result};
use crate::forensics::{check_image_forgery, ElaConfig, ElaReport};
use crate::imaging::{decode_jpeg, Image};
use crate::neuralnet::{embed, Embedding, ModelTag, Network};
use crate::preprocess::{remove_background, CannyParams, DEFAULT_DILATE_K};
use crate::trainer::Phase;

/// The three trained variants.
#[derive(Debug, Clone)]
pub struct Models {
    pub pre_pre: Network<f32>,
    pub post_post: Network<f32>,
    pub pre_post: Network<f32>,
}

impl Models {
    pub fn new(pre_pre: Network<f32>, post_post: Network<f32>, pre_post: Network<f32>) -> Result<Self> {
        for (net, tag) in [(&pre_pre, ModelTag::PrePre), (&post_post, ModelTag::PostPost), (&pre_post, ModelTag::PrePost)] {
            if net.tag() != tag {
                return Err(Error::Config(format!("expected a {tag} model, got {}", net.tag())));
            }
        }
        Ok(Self { pre_pre, post_post, pre_post })
    }

    pub fn get(&self, tag: ModelTag) -> &Network<f32> {
        match tag {
            ModelTag::PrePre => &self.pre_pre,
            ModelTag::PostPost => &self.post_post,
            ModelTag::PrePost => &self.pre_post,
        }
    }

    /// Model used for duplicate lookups of one phase.
    pub fn for_phase(&self, phase: Phase) -> &Network<f32> {
        self.get(tag_for_phase(phase))
    }
}

pub fn tag_for_phase(phase: Phase) -> ModelTag {
    match phase {
        Phase::Pre => ModelTag::PrePre,
        Phase::Post => ModelTag::PostPost,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    /// Shared acceptance threshold on squared L2 distance.
    pub theta: f64,
    /// Per-tag overrides of `theta`, indexed PRE-PRE, POST-POST, PRE-POST.
    pub theta_overrides: [Option<f64>; 3],
    pub ela: ElaConfig,
    pub canny: CannyParams,
    pub dilate_k: usize,
    pub background_removal: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            theta: DEFAULT_THETA,
            theta_overrides: [None; 3],
            ela: ElaConfig::default(),
            canny: CannyParams::default(),
            dilate_k: DEFAULT_DILATE_K,
            background_removal: true,
        }
    }
}

pub const DEFAULT_THETA: f64 = 1.0;

impl PipelineConfig {
    pub fn theta_for(&self, tag: ModelTag) -> f64 {
        self.theta_overrides[tag.code() as usize].unwrap_or(self.theta)
    }

    fn prepare(&self, img: &Image) -> Result<Image> {
        if self.background_removal {
            remove_background(img, &self.canny, self.dilate_k)
        } else {
            Ok(img.clone())
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Accepted,
    RejectedForgery,
    RejectedDistance,
}

impl Outcome {
    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::Accepted => "accepted",
            Outcome::RejectedForgery => "rejected_forgery",
            Outcome::RejectedDistance => "rejected_distance",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Verdict {
    pub outcome: Outcome,
    /// Squared L2 distance; `None` when rejected as a forgery.
    pub distance: Option<f64>,
    /// `(phase, report)` for each image, filled only on forgery rejection.
    pub ela_reports: Vec<(Phase, ElaReport)>,
    pub duplicates: Vec<u64>,
}

impl Verdict {
    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "outcome": self.outcome.as_str(),
            "distance": self.distance,
            "ela_reports": self.ela_reports.iter().map(|(p, r)| {
                let mut v = r.to_json();
                v["image"] = json!(p.as_str());
                v
            }).collect::<Vec<_>>(),
            "duplicates": self.duplicates,
        })
    }
}

/// Steps taken by a verification, in order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceEvent {
    Decoded(Phase),
    ElaChecked(Phase),
    Preprocessed(Phase),
    Embedded(Phase, ModelTag),
}

fn decode_input(bytes: &[u8], phase: Phase) -> Result<Image> {
    decode_jpeg(bytes).map_err(|e| Error::Input(format!("{} image: {e}", phase.as_str())))
}

/// [`verify_pair_traced`] without a trace.
pub fn verify_pair(pre_jpeg: &[u8], post_jpeg: &[u8], models: &Models, cfg: &PipelineConfig) -> Result<Verdict> {
    verify_pair_traced(pre_jpeg, post_jpeg, models, cfg, &mut Vec::new())
}

/// Decodes both images, runs error level analysis on pre then post and
/// returns early if either is forged. Otherwise removes backgrounds, embeds
/// both with the PRE-POST model and accepts iff the squared distance is at
/// most the PRE-POST threshold. Every step is appended to `trace`.
pub fn verify_pair_traced(
    pre_jpeg: &[u8],
    post_jpeg: &[u8],
    models: &Models,
    cfg: &PipelineConfig,
    trace: &mut Vec<TraceEvent>,
) -> Result<Verdict> {
    let pre = decode_input(pre_jpeg, Phase::Pre)?;
    trace.push(TraceEvent::Decoded(Phase::Pre));
    let post = decode_input(post_jpeg, Phase::Post)?;
    trace.push(TraceEvent::Decoded(Phase::Post));

    let mut reports = Vec::with_capacity(2);
    for (phase, bytes) in [(Phase::Pre, pre_jpeg), (Phase::Post, post_jpeg)] {
        let r = check_image_forgery(bytes, &cfg.ela).map_err(|e| Error::Input(format!("{}: {e}", phase.as_str())))?;
        trace.push(TraceEvent::ElaChecked(phase));
        reports.push((phase, r));
    }
    if reports.iter().any(|(_, r)| r.is_forged()) {
        return Ok(Verdict { outcome: Outcome::RejectedForgery, distance: None, ela_reports: reports, duplicates: vec![] });
    }

    let net = &models.pre_post;
    let mut emb = Vec::with_capacity(2);
    for (phase, img) in [(Phase::Pre, &pre), (Phase::Post, &post)] {
        let prepared = cfg.prepare(img)?;
        trace.push(TraceEvent::Preprocessed(phase));
        emb.push(embed(net, &prepared)?);
        trace.push(TraceEvent::Embedded(phase, net.tag()));
    }
    let d = emb[0].squared_distance(&emb[1]) as f64;
    let outcome = if d <= cfg.theta_for(ModelTag::PrePost) { Outcome::Accepted } else { Outcome::RejectedDistance };
    Ok(Verdict { outcome, distance: Some(d), ela_reports: vec![], duplicates: vec![] })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DuplicateReport {
    /// `(record id, squared distance)` for every stored match, in insertion order.
    pub matches: Vec<(u64, f64)>,
    pub new_record: u64,
}

impl DuplicateReport {
    pub fn ids(&self) -> Vec<u64> {
        self.matches.iter().map(|m| m.0).collect()
    }

    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "duplicates": self.matches.iter().map(|&(id, d)| json!({"record_id": id, "distance": d})).collect::<Vec<_>>(),
            "new_record": self.new_record,
        })
    }
}

/// Embedding of a decoded, not-yet-preprocessed image with the model for `phase`.
pub fn phase_embedding(img: &Image, phase: Phase, models: &Models, cfg: &PipelineConfig) -> Result<Embedding> {
    embed(models.for_phase(phase), &cfg.prepare(img)?)
}

/// Every stored record of `tag` within `theta` of `vector`, by linear scan.
pub fn scan_duplicates(db: &EmbeddingDb, tag: ModelTag, vector: &[f32], theta: f64) -> Result<Vec<(u64, f64)>> {
    let probe = Embedding::new(vector.to_vec());
    let mut out = Vec::new();
    for r in db.scan(tag) {
        if r.vector.len() != vector.len() {
            return Err(Error::Corruption(format!(
                "record {} has dimension {} but the {tag} model produces {}",
                r.record_id,
                r.vector.len(),
                vector.len()
            )));
        }
        let d = probe.squared_distance(&Embedding::new(r.vector.clone())) as f64;
        if d <= theta {
            out.push((r.record_id, d));
        }
    }
    Ok(out)
}

/// Embeds the image with the phase's specialist model, reports every
/// same-tag record within threshold, then stores the new embedding.
pub fn check_duplicates(
    img_jpeg: &[u8],
    phase: Phase,
    models: &Models,
    db: &mut EmbeddingDb,
    cfg: &PipelineConfig,
    identity_hint: &str,
    created_at: i64,
) -> Result<DuplicateReport> {
    let img = decode_input(img_jpeg, phase)?;
    let tag = tag_for_phase(phase);
    let e = phase_embedding(&img, phase, models, cfg)?;
    let matches = scan_duplicates(db, tag, &e.values, cfg.theta_for(tag))?;
    let new_record = db.put(tag, identity_hint, e.values, created_at)?;
    Ok(DuplicateReport { matches, new_record })
}
