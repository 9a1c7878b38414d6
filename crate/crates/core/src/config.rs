//! Flat `key = value` run configuration shared by every CLI command.
//!
//! Lines are `key = value`; blank lines and lines starting with `#` are
//! ignored. Unknown keys are errors. Defaults are the library defaults.

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::forensics::ElaConfig;
use crate::imaging::JpegQuality;
use crate::losses::SamplingStrategy;
use crate::neuralnet::{ArchConfig, ConvBlock, ModelTag};
use crate::pipeline::PipelineConfig;
use crate::preprocess::{AugmentConfig, CannyParams, DEFAULT_DILATE_K};
use crate::trainer::{LossKind, TrainConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub augment: AugmentConfig,
    pub canny: CannyParams,
    pub dilate_k: usize,
    pub background_removal: bool,
    pub train: TrainConfig,
    /// Fraction of identities used for training; the rest are held out.
    pub train_fraction: f64,
    pub split_seed: u64,
    /// Augmented copies per held-out original used for evaluation pairs.
    pub eval_copies: usize,
    pub eval_seed: u64,
    pub ela: ElaConfig,
    pub theta: f64,
    pub theta_overrides: [Option<f64>; 3],
    pub sweep_min: f64,
    pub sweep_max: f64,
    /// Grid intervals; 0 sweeps the single point `sweep_min`.
    pub sweep_steps: usize,
    /// Fixed record timestamp; the current time when unset.
    pub timestamp: Option<i64>,
    pub manifest: Option<PathBuf>,
    pub model_dir: Option<PathBuf>,
    pub db: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let p = PipelineConfig::default();
        Self {
            augment: AugmentConfig::default(),
            canny: CannyParams::default(),
            dilate_k: DEFAULT_DILATE_K,
            background_removal: true,
            train: TrainConfig::default(),
            train_fraction: 0.8,
            split_seed: 7,
            eval_copies: 8,
            eval_seed: 43,
            ela: ElaConfig::default(),
            theta: p.theta,
            theta_overrides: [None; 3],
            sweep_min: 0.0,
            sweep_max: 4.0,
            sweep_steps: 400,
            timestamp: None,
            manifest: None,
            model_dir: None,
            db: None,
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| Error::Config(format!("bad value `{v}` for `{key}`")))
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v.to_ascii_lowercase().as_str() {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        _ => Err(Error::Config(format!("bad boolean `{v}` for `{key}`"))),
    }
}

fn parse_opt<T: std::str::FromStr>(key: &str, v: &str) -> Result<Option<T>> {
    if v.is_empty() || v.eq_ignore_ascii_case("none") {
        Ok(None)
    } else {
        parse(key, v).map(Some)
    }
}

fn opt_str<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map_or_else(|| "none".to_string(), |x| x.to_string())
}

fn path_str(p: &Option<PathBuf>) -> String {
    p.as_ref().map_or_else(|| "none".to_string(), |x| x.display().to_string())
}

/// `16x3x2,32x3x2` style block list.
pub fn parse_blocks(v: &str) -> Result<Vec<ConvBlock>> {
    if v.trim().is_empty() || v.eq_ignore_ascii_case("none") {
        return Ok(Vec::new());
    }
    v.split(',')
        .map(|b| {
            let parts: Vec<&str> = b.trim().split('x').collect();
            match parts.as_slice() {
                [o, k, p] => Ok(ConvBlock::new(parse("conv_blocks", o)?, parse("conv_blocks", k)?, parse("conv_blocks", p)?)),
                _ => Err(Error::Config(format!("bad conv block `{b}`, expected OUTxKERNELxPOOL"))),
            }
        })
        .collect()
}

pub fn format_blocks(blocks: &[ConvBlock]) -> String {
    if blocks.is_empty() {
        return "none".into();
    }
    blocks
        .iter()
        .map(|b| format!("{}x{}x{}", b.out_channels, b.kernel_size, b.pool_size))
        .collect::<Vec<_>>()
        .join(",")
}

fn loss_name(l: LossKind) -> &'static str {
    match l {
        LossKind::Contrastive => "contrastive",
        LossKind::Triplet => "triplet",
    }
}

fn sampling_name(s: SamplingStrategy) -> &'static str {
    match s {
        SamplingStrategy::Random => "random",
        SamplingStrategy::SemiHard => "semi-hard",
    }
}

impl RunConfig {
    /// Every key with its current value, in a fixed order.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let a = &self.augment;
        let t = &self.train;
        let arch = &t.arch;
        vec![
            ("flip_lr_prob", a.flip_lr_prob.to_string()),
            ("rotate_prob", a.rotate_prob.to_string()),
            ("rotate_max_left_deg", a.rotate_max_left_deg.to_string()),
            ("rotate_max_right_deg", a.rotate_max_right_deg.to_string()),
            ("zoom_prob", a.zoom_prob.to_string()),
            ("zoom_min_factor", a.zoom_min_factor.to_string()),
            ("zoom_max_factor", a.zoom_max_factor.to_string()),
            ("distort_prob", a.distort_prob.to_string()),
            ("distort_grid_w", a.distort_grid_w.to_string()),
            ("distort_grid_h", a.distort_grid_h.to_string()),
            ("distort_magnitude", a.distort_magnitude.to_string()),
            ("augment_seed", a.seed.to_string()),
            ("canny_sigma", self.canny.gaussian_sigma.to_string()),
            ("canny_low", self.canny.low_threshold.to_string()),
            ("canny_high", self.canny.high_threshold.to_string()),
            ("dilate_k", self.dilate_k.to_string()),
            ("background_removal", self.background_removal.to_string()),
            ("variant", t.variant.to_string()),
            ("loss", loss_name(t.loss).into()),
            ("epochs", t.epochs.to_string()),
            ("batch_size", t.batch_size.to_string()),
            ("lr", t.lr.to_string()),
            ("momentum", t.momentum.to_string()),
            ("augment_copies", t.augment_copies.to_string()),
            ("seed", t.seed.to_string()),
            ("margin", t.margin.to_string()),
            ("alpha", t.alpha.to_string()),
            ("sampling", sampling_name(t.sampling).into()),
            ("input_side", arch.input_side.to_string()),
            ("input_channels", arch.input_channels.to_string()),
            ("conv_blocks", format_blocks(&arch.conv_blocks)),
            ("embedding_dim", arch.embedding_dim.to_string()),
            ("normalize_embeddings", arch.normalize_embeddings.to_string()),
            ("train_fraction", self.train_fraction.to_string()),
            ("split_seed", self.split_seed.to_string()),
            ("eval_copies", self.eval_copies.to_string()),
            ("eval_seed", self.eval_seed.to_string()),
            ("ela_requality", self.ela.requality.get().to_string()),
            ("ela_outlier_factor", self.ela.outlier_factor.to_string()),
            ("ela_floor", self.ela.absolute_floor.to_string()),
            ("ela_min_region", self.ela.min_region.to_string()),
            ("ela_gain", self.ela.display_gain.to_string()),
            ("theta", self.theta.to_string()),
            ("theta_pre_pre", opt_str(&self.theta_overrides[0])),
            ("theta_post_post", opt_str(&self.theta_overrides[1])),
            ("theta_pre_post", opt_str(&self.theta_overrides[2])),
            ("sweep_min", self.sweep_min.to_string()),
            ("sweep_max", self.sweep_max.to_string()),
            ("sweep_steps", self.sweep_steps.to_string()),
            ("timestamp", opt_str(&self.timestamp)),
            ("manifest", path_str(&self.manifest)),
            ("model_dir", path_str(&self.model_dir)),
            ("db", path_str(&self.db)),
        ]
    }

    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        let v = v.trim();
        let a = &mut self.augment;
        let t = &mut self.train;
        match key {
            "flip_lr_prob" => a.flip_lr_prob = parse(key, v)?,
            "rotate_prob" => a.rotate_prob = parse(key, v)?,
            "rotate_max_left_deg" => a.rotate_max_left_deg = parse(key, v)?,
            "rotate_max_right_deg" => a.rotate_max_right_deg = parse(key, v)?,
            "zoom_prob" => a.zoom_prob = parse(key, v)?,
            "zoom_min_factor" => a.zoom_min_factor = parse(key, v)?,
            "zoom_max_factor" => a.zoom_max_factor = parse(key, v)?,
            "distort_prob" => a.distort_prob = parse(key, v)?,
            "distort_grid_w" => a.distort_grid_w = parse(key, v)?,
            "distort_grid_h" => a.distort_grid_h = parse(key, v)?,
            "distort_magnitude" => a.distort_magnitude = parse(key, v)?,
            "augment_seed" => a.seed = parse(key, v)?,
            "canny_sigma" => self.canny.gaussian_sigma = parse(key, v)?,
            "canny_low" => self.canny.low_threshold = parse(key, v)?,
            "canny_high" => self.canny.high_threshold = parse(key, v)?,
            "dilate_k" => self.dilate_k = parse(key, v)?,
            "background_removal" => self.background_removal = parse_bool(key, v)?,
            "variant" => t.variant = v.parse::<ModelTag>()?,
            "loss" => {
                t.loss = match v.to_ascii_lowercase().as_str() {
                    "contrastive" => LossKind::Contrastive,
                    "triplet" => LossKind::Triplet,
                    _ => return Err(Error::Config(format!("unknown loss `{v}`"))),
                }
            }
            "epochs" => t.epochs = parse(key, v)?,
            "batch_size" => t.batch_size = parse(key, v)?,
            "lr" => t.lr = parse(key, v)?,
            "momentum" => t.momentum = parse(key, v)?,
            "augment_copies" => t.augment_copies = parse(key, v)?,
            "seed" => t.seed = parse(key, v)?,
            "margin" => t.margin = parse(key, v)?,
            "alpha" => t.alpha = parse(key, v)?,
            "sampling" => {
                t.sampling = match v.to_ascii_lowercase().as_str() {
                    "random" => SamplingStrategy::Random,
                    "semi-hard" | "semihard" | "semi_hard" => SamplingStrategy::SemiHard,
                    _ => return Err(Error::Config(format!("unknown sampling strategy `{v}`"))),
                }
            }
            "input_side" => t.arch.input_side = parse(key, v)?,
            "input_channels" => t.arch.input_channels = parse(key, v)?,
            "conv_blocks" => t.arch.conv_blocks = parse_blocks(v)?,
            "embedding_dim" => t.arch.embedding_dim = parse(key, v)?,
            "normalize_embeddings" => t.arch.normalize_embeddings = parse_bool(key, v)?,
            "train_fraction" => self.train_fraction = parse(key, v)?,
            "split_seed" => self.split_seed = parse(key, v)?,
            "eval_copies" => self.eval_copies = parse(key, v)?,
            "eval_seed" => self.eval_seed = parse(key, v)?,
            "ela_requality" => self.ela.requality = JpegQuality::new(parse(key, v)?)?,
            "ela_outlier_factor" => self.ela.outlier_factor = parse(key, v)?,
            "ela_floor" => self.ela.absolute_floor = parse(key, v)?,
            "ela_min_region" => self.ela.min_region = parse(key, v)?,
            "ela_gain" => self.ela.display_gain = parse(key, v)?,
            "theta" => self.theta = parse(key, v)?,
            "theta_pre_pre" => self.theta_overrides[0] = parse_opt(key, v)?,
            "theta_post_post" => self.theta_overrides[1] = parse_opt(key, v)?,
            "theta_pre_post" => self.theta_overrides[2] = parse_opt(key, v)?,
            "sweep_min" => self.sweep_min = parse(key, v)?,
            "sweep_max" => self.sweep_max = parse(key, v)?,
            "sweep_steps" => self.sweep_steps = parse(key, v)?,
            "timestamp" => self.timestamp = parse_opt(key, v)?,
            "manifest" => self.manifest = parse_opt::<String>(key, v)?.map(PathBuf::from),
            "model_dir" => self.model_dir = parse_opt::<String>(key, v)?.map(PathBuf::from),
            "db" => self.db = parse_opt::<String>(key, v)?.map(PathBuf::from),
            _ => return Err(Error::Config(format!("unknown config key `{key}`"))),
        }
        Ok(())
    }

    /// Applies a `key=value` override.
    pub fn apply_override(&mut self, kv: &str) -> Result<()> {
        let (k, v) = kv.split_once('=').ok_or_else(|| Error::Config(format!("override `{kv}` is not key=value")))?;
        self.set(k.trim(), v)
    }

    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", n + 1)))?;
            self.set(k.trim(), v).map_err(|e| Error::Config(format!("line {}: {e}", n + 1)))?;
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut c = Self::default();
        c.apply_text(text)?;
        Ok(c)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_text(&text)
    }

    /// Canonical `key = value` text; parses back to an equal config.
    pub fn to_text(&self) -> String {
        self.entries().into_iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    pub fn validate(&self) -> Result<()> {
        self.augment.validate()?;
        self.canny.validate()?;
        let mut t = self.train.clone();
        t.augment = self.augment.clone();
        t.validate()?;
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::Config(format!("train_fraction {} must be inside (0, 1)", self.train_fraction)));
        }
        if !(self.sweep_min <= self.sweep_max) {
            return Err(Error::Config("sweep range must be ascending".into()));
        }
        Ok(())
    }

    /// Training configuration with this run's augmentation settings.
    pub fn train_config(&self) -> TrainConfig {
        TrainConfig { augment: self.augment.clone(), ..self.train.clone() }
    }

    pub fn arch(&self) -> &ArchConfig {
        &self.train.arch
    }

    pub fn pipeline_config(&self) -> PipelineConfig {
        PipelineConfig {
            theta: self.theta,
            theta_overrides: self.theta_overrides,
            ela: self.ela.clone(),
            canny: self.canny,
            dilate_k: self.dilate_k,
            background_removal: self.background_removal,
        }
    }
}
