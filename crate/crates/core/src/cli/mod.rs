//! The `ocuverify` command line.
//!
//! Exit codes: 0 success or positive verdict, 1 operational error, 2
//! negative verdict (forged image, rejected pair, duplicates found).

mod manifest;

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde_json::json;

pub use manifest::{parse_input_name, read_manifest, write_manifest, ManifestRow, MANIFEST_HEADER};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::forensics::check_image_forgery;
use crate::imaging::pnm::{decode_pnm, encode_pnm};
use crate::imaging::{decode_jpeg, encode_jpeg, Image, JpegQuality};
use crate::neuralnet::{load_network, save_network, ModelTag, Network};
use crate::pipeline::{check_duplicates, verify_pair, EmbeddingDb, Models, Outcome};
use crate::preprocess::{augment_stream, remove_background};
use crate::synth::{gen_forgery_fixture, gen_identity_pair, SynthIdentitySpec};
use crate::trainer::{
    augment_items, build_eval_pairs, evaluate, linear_grid, split_identities, sweep_threshold, train, DatasetItem,
    Phase,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_NEGATIVE: i32 = 2;

/// Model file names expected inside a model directory.
pub fn model_file_name(tag: ModelTag) -> &'static str {
    match tag {
        ModelTag::PrePre => "pre-pre.ocv",
        ModelTag::PostPost => "post-post.ocv",
        ModelTag::PrePost => "pre-post.ocv",
    }
}

#[derive(Parser, Debug)]
#[command(name = "ocuverify", version, about = "One-shot occluded face verification and JPEG forgery screening")]
pub struct Cli {
    /// Flat `key = value` configuration file.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Override one configuration key; repeatable, applied after the file.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Remove backgrounds from `<identity>_<PRE|POST>.jpg` files and write a manifest.
    Preprocess {
        #[arg(long = "in", value_name = "DIR")]
        input: PathBuf,
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
    },
    /// Write `augment_copies` augmented copies of every manifest image.
    Augment {
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
    },
    /// Train one model variant on the training split of a manifest.
    Train {
        #[arg(long)]
        manifest: Option<PathBuf>,
        /// Output model file.
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
        /// Per-epoch mean loss as CSV.
        #[arg(long, value_name = "FILE")]
        loss_csv: Option<PathBuf>,
    },
    /// Accuracy, FA and FR of a model on held-out pairs at the configured threshold.
    Evaluate {
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long, value_name = "FILE")]
        model: PathBuf,
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// FA/FR/accuracy over a threshold grid, with the equal error threshold.
    Sweep {
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long, value_name = "FILE")]
        model: PathBuf,
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Error level analysis of one JPEG; exit 2 when forged.
    Ela {
        image: PathBuf,
        /// Directory for `<name>.ela.jpg`; defaults to the image's directory.
        #[arg(long, value_name = "DIR")]
        out_dir: Option<PathBuf>,
        /// Also write the JSON report here.
        #[arg(long, value_name = "FILE")]
        report: Option<PathBuf>,
    },
    /// Verify a pre/post pair, then run duplicate checks for both images.
    Verify {
        #[arg(long)]
        pre: PathBuf,
        #[arg(long)]
        post: PathBuf,
        #[arg(long, value_name = "DIR")]
        model_dir: Option<PathBuf>,
        /// Embedding database; an in-memory one is used when absent.
        #[arg(long, value_name = "FILE")]
        db: Option<PathBuf>,
        /// Shared threshold; overrides the `theta` key.
        #[arg(long)]
        theta: Option<f64>,
    },
    /// Duplicate check of one image against the database; exit 2 on matches.
    Dedupe {
        image: PathBuf,
        /// `pre` or `post`.
        #[arg(long)]
        phase: String,
        #[arg(long, value_name = "DIR")]
        model_dir: Option<PathBuf>,
        #[arg(long, value_name = "FILE")]
        db: Option<PathBuf>,
        /// Label stored with the new record.
        #[arg(long, default_value = "")]
        hint: String,
    },
    /// Print every database record as CSV.
    DbDump {
        #[arg(long, value_name = "FILE")]
        db: Option<PathBuf>,
    },
    /// Generate synthetic identities and optional splice fixtures.
    Synth {
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
        #[arg(long, default_value_t = 20)]
        identities: u64,
        /// Identity `i` uses spec seed `seed + i`.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 96)]
        canvas: usize,
        #[arg(long, default_value_t = 95)]
        quality: i64,
        /// Number of genuine/forged fixture pairs written under `fixtures/`.
        #[arg(long, default_value_t = 0)]
        fixtures: u64,
        #[arg(long, default_value_t = 75)]
        carrier_quality: i64,
        #[arg(long, default_value_t = 95)]
        splice_quality: i64,
    },
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
            let _ = if e.use_stderr() { write!(err, "{e}") } else { write!(out, "{e}") };
            return code;
        }
    };
    match execute(&cli, out, err) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_ERROR
        }
    }
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::from_file(p)?,
        None => RunConfig::default(),
    };
    for kv in &cli.set {
        cfg.apply_override(kv)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn required(flag: Option<&PathBuf>, key: Option<&PathBuf>, name: &str) -> Result<PathBuf> {
    flag.or(key).cloned().ok_or_else(|| Error::Config(format!("no {name} given (flag or `{name}` config key)")))
}

fn io_context(path: &Path, e: std::io::Error) -> Error {
    Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| io_context(path, e))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| io_context(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| io_context(path, e))
}

fn config_sidecar(path: &Path, cfg: &RunConfig) -> Result<()> {
    let mut p = path.as_os_str().to_owned();
    p.push(".config");
    write_file(Path::new(&p), cfg.to_text().as_bytes())
}

fn json_text(v: &serde_json::Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("JSON values serialize");
    s.push('\n');
    s
}

fn timestamp(cfg: &RunConfig) -> i64 {
    cfg.timestamp.unwrap_or_else(|| {
        std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map_or(0, |d| d.as_secs() as i64)
    })
}

fn execute(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    let cfg = load_config(cli)?;
    match &cli.command {
        Command::Preprocess { input, out: dir } => cmd_preprocess(input, dir, &cfg, err),
        Command::Augment { manifest, out: dir } => {
            cmd_augment(&required(manifest.as_ref(), cfg.manifest.as_ref(), "manifest")?, dir, &cfg)
        }
        Command::Train { manifest, out: model, loss_csv } => cmd_train(
            &required(manifest.as_ref(), cfg.manifest.as_ref(), "manifest")?,
            model,
            loss_csv.as_deref(),
            &cfg,
            err,
        ),
        Command::Evaluate { manifest, model, out: csv } => cmd_evaluate(
            &required(manifest.as_ref(), cfg.manifest.as_ref(), "manifest")?,
            model,
            csv.as_deref(),
            &cfg,
            out,
        ),
        Command::Sweep { manifest, model, out: csv } => cmd_sweep(
            &required(manifest.as_ref(), cfg.manifest.as_ref(), "manifest")?,
            model,
            csv.as_deref(),
            &cfg,
            out,
            err,
        ),
        Command::Ela { image, out_dir, report } => cmd_ela(image, out_dir.as_deref(), report.as_deref(), &cfg, out),
        Command::Verify { pre, post, model_dir, db, theta } => {
            let mut cfg = cfg.clone();
            if let Some(t) = theta {
                cfg.theta = *t;
            }
            let dir = required(model_dir.as_ref(), cfg.model_dir.as_ref(), "model_dir")?;
            let db = db.as_ref().or(cfg.db.as_ref()).cloned();
            cmd_verify(pre, post, &dir, db.as_deref(), &cfg, out)
        }
        Command::Dedupe { image, phase, model_dir, db, hint } => {
            let phase = parse_phase(phase)?;
            let dir = required(model_dir.as_ref(), cfg.model_dir.as_ref(), "model_dir")?;
            let db = required(db.as_ref(), cfg.db.as_ref(), "db")?;
            cmd_dedupe(image, phase, &dir, &db, hint, &cfg, out)
        }
        Command::DbDump { db } => cmd_db_dump(&required(db.as_ref(), cfg.db.as_ref(), "db")?, out),
        Command::Synth { out: dir, identities, seed, canvas, quality, fixtures, carrier_quality, splice_quality } => {
            cmd_synth(
                dir,
                *identities,
                *seed,
                *canvas,
                JpegQuality::new(*quality)?,
                *fixtures,
                (JpegQuality::new(*carrier_quality)?, JpegQuality::new(*splice_quality)?),
            )
        }
    }
}

fn parse_phase(s: &str) -> Result<Phase> {
    match s.to_ascii_lowercase().as_str() {
        "pre" => Ok(Phase::Pre),
        "post" => Ok(Phase::Post),
        _ => Err(Error::Config(format!("phase must be `pre` or `post`, got `{s}`"))),
    }
}

fn phase_label(p: Phase) -> &'static str {
    match p {
        Phase::Pre => "PRE",
        Phase::Post => "POST",
    }
}

/// Writes `<identity>_<PHASE>.ppm` for every well-named JPEG in `input`
/// (sorted by file name) plus `manifest.csv`. Bad files are reported and
/// skipped; the exit code is 1 if any failed.
pub fn cmd_preprocess(input: &Path, out_dir: &Path, cfg: &RunConfig, err: &mut dyn Write) -> Result<i32> {
    let mut names: Vec<OsString> = fs::read_dir(input)
        .map_err(|e| io_context(input, e))?
        .map(|e| e.map(|e| e.file_name()))
        .collect::<std::io::Result<_>>()
        .map_err(|e| io_context(input, e))?;
    names.sort();
    fs::create_dir_all(out_dir).map_err(|e| io_context(out_dir, e))?;

    let mut rows = Vec::new();
    let mut failed = 0usize;
    for name in names {
        let path = input.join(&name);
        if path.is_dir() {
            continue;
        }
        match preprocess_one(&path, &name, out_dir, cfg, &rows) {
            Ok(row) => rows.push(row),
            Err(e) => {
                failed += 1;
                let _ = writeln!(err, "error: {}: {e}", path.display());
            }
        }
    }
    write_file(&out_dir.join("manifest.csv"), write_manifest(&rows, cfg).as_bytes())?;
    log::info!("preprocessed {} images, {failed} failed", rows.len());
    Ok(if failed > 0 { EXIT_ERROR } else { EXIT_OK })
}

fn preprocess_one(path: &Path, name: &OsString, out_dir: &Path, cfg: &RunConfig, done: &[ManifestRow]) -> Result<ManifestRow> {
    let name = name.to_str().ok_or_else(|| Error::Input("file name is not UTF-8".into()))?;
    let (identity, phase) = parse_input_name(name)?;
    if done.iter().any(|r| r.identity == identity && r.phase == phase) {
        return Err(Error::Input(format!("second {} image for identity `{identity}`", phase_label(phase))));
    }
    let img = decode_jpeg(&read_file(path)?)?;
    let processed =
        if cfg.background_removal { remove_background(&img, &cfg.canny, cfg.dilate_k)? } else { img };
    let output = format!("{identity}_{}.ppm", phase_label(phase));
    write_file(&out_dir.join(&output), &encode_pnm(&processed))?;
    Ok(ManifestRow { identity, phase, source: name.to_string(), output })
}

fn manifest_dir(manifest: &Path) -> &Path {
    manifest.parent().unwrap_or(Path::new(""))
}

fn load_image(path: &Path) -> Result<Image> {
    let bytes = read_file(path)?;
    if bytes.starts_with(b"P5") || bytes.starts_with(b"P6") {
        decode_pnm(&bytes)
    } else {
        decode_jpeg(&bytes)
    }
}

/// Manifest rows as dataset items. Identity ids are positions in the
/// sorted list of distinct identity names.
pub fn manifest_items(manifest: &Path) -> Result<(Vec<DatasetItem>, Vec<String>)> {
    let text = fs::read_to_string(manifest).map_err(|e| {
        Error::Config(format!("cannot read manifest {}: {e}", manifest.display()))
    })?;
    let rows = read_manifest(&text)?;
    let mut names: Vec<String> = rows.iter().map(|r| r.identity.clone()).collect();
    names.sort();
    names.dedup();
    let dir = manifest_dir(manifest);
    let items = rows
        .iter()
        .map(|r| {
            let id = names.binary_search(&r.identity).expect("name listed") as u64;
            Ok(DatasetItem::original(id, r.phase, load_image(&dir.join(&r.output))?))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((items, names))
}

/// Training and held-out items under the configured identity split.
pub fn split_items(items: &[DatasetItem], cfg: &RunConfig) -> Result<(Vec<DatasetItem>, Vec<DatasetItem>)> {
    let mut ids: Vec<u64> = items.iter().map(|i| i.identity_id).collect();
    ids.sort_unstable();
    ids.dedup();
    let (train_ids, _) = split_identities(&ids, cfg.train_fraction, cfg.split_seed)?;
    Ok(items.iter().cloned().partition(|i| train_ids.contains(&i.identity_id)))
}

fn cmd_augment(manifest: &Path, out_dir: &Path, cfg: &RunConfig) -> Result<i32> {
    let text = fs::read_to_string(manifest)
        .map_err(|e| Error::Config(format!("cannot read manifest {}: {e}", manifest.display())))?;
    let rows = read_manifest(&text)?;
    let dir = manifest_dir(manifest);
    let mut out_rows = Vec::new();
    for (i, r) in rows.iter().enumerate() {
        let img = load_image(&dir.join(&r.output))?;
        for c in 0..cfg.train.augment_copies {
            let aug = augment_stream(&img, &cfg.augment, (i as u64) << 16 | c as u64)?;
            let output = format!("{}_{}_aug{c}.ppm", r.identity, phase_label(r.phase));
            write_file(&out_dir.join(&output), &encode_pnm(&aug))?;
            out_rows.push(ManifestRow { identity: r.identity.clone(), phase: r.phase, source: r.output.clone(), output });
        }
    }
    write_file(&out_dir.join("manifest.csv"), write_manifest(&out_rows, cfg).as_bytes())?;
    Ok(EXIT_OK)
}

fn cmd_train(manifest: &Path, model: &Path, loss_csv: Option<&Path>, cfg: &RunConfig, err: &mut dyn Write) -> Result<i32> {
    let (items, _) = manifest_items(manifest)?;
    let (train_items, _) = split_items(&items, cfg)?;
    let (net, report) = train(&train_items, &cfg.train_config())?;
    write_file(model, &save_network(&net)?)?;
    config_sidecar(model, cfg)?;
    if let Some(p) = loss_csv {
        write_file(p, report.loss_csv().as_bytes())?;
    }
    let last = report.loss_curve.last().copied().unwrap_or(f64::NAN);
    let _ = writeln!(err, "trained {} for {} steps, final mean loss {last}", net.tag(), report.steps);
    Ok(EXIT_OK)
}

fn load_model(path: &Path) -> Result<Network<f32>> {
    load_network(&read_file(path)?)
}

/// Held-out items with `eval_copies` augmented copies each.
fn held_out(manifest: &Path, cfg: &RunConfig) -> Result<Vec<DatasetItem>> {
    let (items, _) = manifest_items(manifest)?;
    let (_, test) = split_items(&items, cfg)?;
    let aug = crate::preprocess::AugmentConfig { seed: cfg.eval_seed, ..cfg.augment.clone() };
    augment_items(&test, &aug, cfg.eval_copies)
}

pub const EVAL_HEADER: &str = "theta,accuracy,false_acceptance,false_rejection,genuine_pairs,impostor_pairs";

fn cmd_evaluate(manifest: &Path, model: &Path, csv: Option<&Path>, cfg: &RunConfig, out: &mut dyn Write) -> Result<i32> {
    let net = load_model(model)?;
    let items = held_out(manifest, cfg)?;
    let pairs = build_eval_pairs(&items, net.tag(), cfg.eval_seed)?;
    let (g, i) = pairs.resolve(&items);
    let m = evaluate(&net, &g, &i, cfg.pipeline_config().theta_for(net.tag()))?;
    let text = format!(
        "{EVAL_HEADER}\n{},{},{},{},{},{}\n",
        m.threshold_used, m.accuracy, m.false_acceptance, m.false_rejection, m.genuine_count, m.impostor_count
    );
    match csv {
        Some(p) => {
            write_file(p, text.as_bytes())?;
            config_sidecar(p, cfg)?;
        }
        None => out.write_all(text.as_bytes())?,
    }
    Ok(EXIT_OK)
}

fn cmd_sweep(
    manifest: &Path,
    model: &Path,
    csv: Option<&Path>,
    cfg: &RunConfig,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<i32> {
    let net = load_model(model)?;
    let items = held_out(manifest, cfg)?;
    let pairs = build_eval_pairs(&items, net.tag(), cfg.eval_seed)?;
    let (g, i) = pairs.resolve(&items);
    let grid = linear_grid(cfg.sweep_min, cfg.sweep_max, cfg.sweep_steps);
    let sweep = sweep_threshold(&net, &g, &i, &grid)?;
    let text = sweep.to_csv();
    match csv {
        Some(p) => {
            write_file(p, text.as_bytes())?;
            config_sidecar(p, cfg)?;
        }
        None => out.write_all(text.as_bytes())?,
    }
    let e = sweep.eer_row();
    let _ = writeln!(
        err,
        "theta_eer={} accuracy={} false_acceptance={} false_rejection={}",
        sweep.theta_eer, e.accuracy, e.false_acceptance, e.false_rejection
    );
    Ok(EXIT_OK)
}

/// Display quality of the written ELA image.
const ELA_IMAGE_QUALITY: u8 = 95;

fn cmd_ela(image: &Path, out_dir: Option<&Path>, report_path: Option<&Path>, cfg: &RunConfig, out: &mut dyn Write) -> Result<i32> {
    let bytes = read_file(image)?;
    let report = check_image_forgery(&bytes, &cfg.ela)?;
    let stem = image.file_stem().and_then(|s| s.to_str()).unwrap_or("image");
    let ela_name = format!("{stem}.ela.jpg");
    let dir = out_dir.map(Path::to_path_buf).unwrap_or_else(|| manifest_dir(image).to_path_buf());
    if let Some(img) = &report.ela_image {
        let q = JpegQuality::new(ELA_IMAGE_QUALITY as i64)?;
        write_file(&dir.join(&ela_name), &encode_jpeg(img, q))?;
    }
    let mut v = report.to_json();
    v["ela_image"] = json!(ela_name);
    let text = json_text(&v);
    if let Some(p) = report_path {
        write_file(p, text.as_bytes())?;
    }
    out.write_all(text.as_bytes())?;
    Ok(if report.is_forged() { EXIT_NEGATIVE } else { EXIT_OK })
}

/// Loads `pre-pre.ocv`, `post-post.ocv` and `pre-post.ocv` from `dir`.
pub fn load_models(dir: &Path) -> Result<Models> {
    let get = |t| load_model(&dir.join(model_file_name(t)));
    Models::new(get(ModelTag::PrePre)?, get(ModelTag::PostPost)?, get(ModelTag::PrePost)?)
}

fn open_db(path: Option<&Path>) -> Result<EmbeddingDb> {
    match path {
        Some(p) => EmbeddingDb::open(p),
        None => Ok(EmbeddingDb::in_memory()),
    }
}

fn file_label(path: &Path) -> String {
    path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default()
}

/// Verdict JSON for one pair: the pair verdict and, unless it was rejected
/// as a forgery, a duplicate check of pre then post against `db`.
pub fn verify_transcript(
    pre_path: &Path,
    post_path: &Path,
    models: &Models,
    db: &mut EmbeddingDb,
    cfg: &RunConfig,
) -> Result<(Outcome, serde_json::Value)> {
    let pre = read_file(pre_path)?;
    let post = read_file(post_path)?;
    let pcfg = cfg.pipeline_config();
    let mut verdict = verify_pair(&pre, &post, models, &pcfg)?;
    let mut checks = serde_json::Map::new();
    if verdict.outcome != Outcome::RejectedForgery {
        let ts = timestamp(cfg);
        for (phase, bytes, path) in [(Phase::Pre, &pre, pre_path), (Phase::Post, &post, post_path)] {
            let r = check_duplicates(bytes, phase, models, db, &pcfg, &file_label(path), ts)?;
            verdict.duplicates.extend(r.ids());
            checks.insert(phase.as_str().to_string(), r.to_json());
        }
    }
    let mut v = verdict.to_json();
    v["duplicate_checks"] = serde_json::Value::Object(checks);
    Ok((verdict.outcome, v))
}

fn cmd_verify(pre: &Path, post: &Path, model_dir: &Path, db: Option<&Path>, cfg: &RunConfig, out: &mut dyn Write) -> Result<i32> {
    let models = load_models(model_dir)?;
    let mut db = open_db(db)?;
    let (outcome, v) = verify_transcript(pre, post, &models, &mut db, cfg)?;
    out.write_all(json_text(&v).as_bytes())?;
    Ok(if outcome == Outcome::Accepted { EXIT_OK } else { EXIT_NEGATIVE })
}

fn cmd_dedupe(
    image: &Path,
    phase: Phase,
    model_dir: &Path,
    db: &Path,
    hint: &str,
    cfg: &RunConfig,
    out: &mut dyn Write,
) -> Result<i32> {
    let models = load_models(model_dir)?;
    let mut db = open_db(Some(db))?;
    let bytes = read_file(image)?;
    let hint = if hint.is_empty() { file_label(image) } else { hint.to_string() };
    let r = check_duplicates(&bytes, phase, &models, &mut db, &cfg.pipeline_config(), &hint, timestamp(cfg))?;
    out.write_all(json_text(&r.to_json()).as_bytes())?;
    Ok(if r.matches.is_empty() { EXIT_OK } else { EXIT_NEGATIVE })
}

pub const DB_DUMP_HEADER: &str = "record_id,model_tag,identity_hint,created_at,dim,vector";

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn cmd_db_dump(path: &Path, out: &mut dyn Write) -> Result<i32> {
    let db = EmbeddingDb::from_bytes(&read_file(path)?)?;
    writeln!(out, "{DB_DUMP_HEADER}")?;
    for r in db.records() {
        let vector: Vec<String> = r.vector.iter().map(|v| v.to_string()).collect();
        writeln!(
            out,
            "{},{},{},{},{},{}",
            r.record_id,
            r.model_tag,
            csv_field(&r.identity_hint),
            r.created_at,
            r.vector.len(),
            vector.join(" ")
        )?;
    }
    Ok(EXIT_OK)
}

fn cmd_synth(
    dir: &Path,
    identities: u64,
    seed: u64,
    canvas: usize,
    q: JpegQuality,
    fixtures: u64,
    (q_carrier, q_splice): (JpegQuality, JpegQuality),
) -> Result<i32> {
    fs::create_dir_all(dir).map_err(|e| io_context(dir, e))?;
    for i in 0..identities {
        let (pre, post) = gen_identity_pair(&SynthIdentitySpec::from_seed(seed + i), canvas)?;
        write_file(&dir.join(format!("id{i:03}_PRE.jpg")), &encode_jpeg(&pre, q))?;
        write_file(&dir.join(format!("id{i:03}_POST.jpg")), &encode_jpeg(&post, q))?;
    }
    if fixtures > 0 {
        let fdir = dir.join("fixtures");
        let mut csv = String::from("fixture,genuine,forged,x,y,w,h\n");
        for k in 0..fixtures {
            let (genuine, forged, r) = gen_forgery_fixture(seed + k, seed + 1000 + k, q_carrier, q_splice)?;
            let (g, f) = (format!("genuine_{k:03}.jpg"), format!("forged_{k:03}.jpg"));
            write_file(&fdir.join(&g), &genuine)?;
            write_file(&fdir.join(&f), &forged)?;
            csv.push_str(&format!("{k},{g},{f},{},{},{},{}\n", r.x, r.y, r.w, r.h));
        }
        write_file(&fdir.join("fixtures.csv"), csv.as_bytes())?;
    }
    Ok(EXIT_OK)
}
