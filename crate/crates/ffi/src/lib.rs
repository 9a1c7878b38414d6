//! C ABI over the `ocuverify` pipeline.
//!
//! Every fallible call returns an [`OcvStatus`]. On failure the message is
//! retrievable with [`ocv_last_error`] on the same thread. Handles are opaque
//! and owned by the caller until passed to the matching `*_free`.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;
use std::slice;

use ocuverify::config::RunConfig;
use ocuverify::forensics::check_image_forgery;
use ocuverify::neuralnet::{embed, load_network, save_network, Network};
use ocuverify::pipeline::{check_duplicates, verify_pair, EmbeddingDb, Models, Outcome};
use ocuverify::trainer::Phase;
use ocuverify::Error;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OcvStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidArgument = 2,
    Io = 3,
    Decode = 4,
    ModelFormat = 5,
    Corruption = 6,
    RejectedWrite = 7,
    BufferTooSmall = 8,
    Internal = 9,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OcvOutcome {
    Accepted = 0,
    RejectedForgery = 1,
    RejectedDistance = 2,
}

/// Model variant codes, as stored in model files and database records.
pub const OCV_TAG_PRE_PRE: u32 = 0;
pub const OCV_TAG_POST_POST: u32 = 1;
pub const OCV_TAG_PRE_POST: u32 = 2;

/// Image phase for duplicate checks.
pub const OCV_PHASE_PRE: u32 = 0;
pub const OCV_PHASE_POST: u32 = 1;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OcvVerdict {
    pub outcome: OcvOutcome,
    /// False when rejected as a forgery; `distance` is then 0.
    pub has_distance: bool,
    pub distance: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OcvElaResult {
    pub forged: bool,
    pub suspect_blocks: usize,
    pub median_block_mean: f64,
    pub max_block_mean: f64,
}

/// A trained embedding network.
pub struct OcvModel(Network);

/// The three models plus the run configuration used for verification.
pub struct OcvVerifier {
    models: Models,
    config: RunConfig,
}

/// An embedding database, in memory or file backed.
pub struct OcvDb(EmbeddingDb);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> OcvStatus {
    match e {
        Error::Io(_) => OcvStatus::Io,
        Error::Decode { .. } | Error::Unsupported { .. } | Error::Input(_) | Error::InvalidImage(_) => OcvStatus::Decode,
        Error::ModelFormat(_) => OcvStatus::ModelFormat,
        Error::Corruption(_) => OcvStatus::Corruption,
        Error::RejectedWrite(_) => OcvStatus::RejectedWrite,
        Error::Config(_) | Error::InvalidQuality(_) => OcvStatus::InvalidArgument,
        _ => OcvStatus::Internal,
    }
}

struct Fail(OcvStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> OcvStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            OcvStatus::Ok
        }
        Ok(Err(Fail(s, msg))) => {
            set_error(msg);
            s
        }
        Err(_) => {
            set_error("internal panic".into());
            OcvStatus::Internal
        }
    }
}

fn null(what: &str) -> Fail {
    Fail(OcvStatus::NullArgument, format!("{what} is null"))
}

unsafe fn bytes<'a>(data: *const u8, len: usize, what: &str) -> Result<&'a [u8], Fail> {
    if data.is_null() {
        if len == 0 {
            return Ok(&[]);
        }
        return Err(null(what));
    }
    Ok(slice::from_raw_parts(data, len))
}

unsafe fn text<'a>(s: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if s.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(s).to_str().map_err(|_| Fail(OcvStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

unsafe fn out<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

fn phase_of(phase: u32) -> Result<Phase, Fail> {
    match phase {
        OCV_PHASE_PRE => Ok(Phase::Pre),
        OCV_PHASE_POST => Ok(Phase::Post),
        p => Err(Fail(OcvStatus::InvalidArgument, format!("unknown phase {p}"))),
    }
}

/// Message of the last failed call on this thread, or null after a success.
/// Valid until the next call on this thread.
#[no_mangle]
pub extern "C" fn ocv_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ocv_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

#[no_mangle]
pub unsafe extern "C" fn ocv_model_load(path: *const c_char, out_model: *mut *mut OcvModel) -> OcvStatus {
    guard(|| {
        let out_model = out(out_model, "out_model")?;
        let bytes = std::fs::read(PathBuf::from(text(path, "path")?)).map_err(Error::from)?;
        *out_model = Box::into_raw(Box::new(OcvModel(load_network(&bytes)?)));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn ocv_model_load_bytes(data: *const u8, len: usize, out_model: *mut *mut OcvModel) -> OcvStatus {
    guard(|| {
        let out_model = out(out_model, "out_model")?;
        *out_model = Box::into_raw(Box::new(OcvModel(load_network(bytes(data, len, "data")?)?)));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn ocv_model_save(model: *const OcvModel, path: *const c_char) -> OcvStatus {
    guard(|| {
        let m = handle(model, "model")?;
        let bytes = save_network(&m.0)?;
        std::fs::write(text(path, "path")?, bytes).map_err(Error::from)?;
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn ocv_model_free(model: *mut OcvModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Embedding dimension, or 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn ocv_model_embedding_dim(model: *const OcvModel) -> usize {
    model.as_ref().map_or(0, |m| m.0.arch().embedding_dim)
}

/// One of the `OCV_TAG_*` values.
#[no_mangle]
pub unsafe extern "C" fn ocv_model_tag(model: *const OcvModel, out_tag: *mut u32) -> OcvStatus {
    guard(|| {
        let m = handle(model, "model")?;
        *out(out_tag, "out_tag")? = u32::from(m.0.tag().code());
        Ok(())
    })
}

/// Embeds a JPEG as is (no background removal). `out_len` receives the
/// dimension; if `cap` is smaller nothing is written and
/// `BufferTooSmall` is returned.
#[no_mangle]
pub unsafe extern "C" fn ocv_model_embed_jpeg(
    model: *const OcvModel,
    jpeg: *const u8,
    jpeg_len: usize,
    out_vec: *mut f32,
    cap: usize,
    out_len: *mut usize,
) -> OcvStatus {
    guard(|| {
        let m = handle(model, "model")?;
        let out_len = out(out_len, "out_len")?;
        let img = ocuverify::imaging::decode_jpeg(bytes(jpeg, jpeg_len, "jpeg")?)?;
        let e = embed(&m.0, &img)?;
        *out_len = e.dim();
        if cap < e.dim() {
            return Err(Fail(OcvStatus::BufferTooSmall, format!("need {} floats, have {cap}", e.dim())));
        }
        if out_vec.is_null() {
            return Err(null("out_vec"));
        }
        slice::from_raw_parts_mut(out_vec, e.dim()).copy_from_slice(&e.values);
        Ok(())
    })
}

/// Builds a verifier from copies of the three models, with default settings.
#[no_mangle]
pub unsafe extern "C" fn ocv_verifier_new(
    pre_pre: *const OcvModel,
    post_post: *const OcvModel,
    pre_post: *const OcvModel,
    out_verifier: *mut *mut OcvVerifier,
) -> OcvStatus {
    guard(|| {
        let out_verifier = out(out_verifier, "out_verifier")?;
        let (a, b, c) = (handle(pre_pre, "pre_pre")?, handle(post_post, "post_post")?, handle(pre_post, "pre_post")?);
        let models = Models::new(a.0.clone(), b.0.clone(), c.0.clone()).map_err(|e| Fail(OcvStatus::InvalidArgument, e.to_string()))?;
        *out_verifier = Box::into_raw(Box::new(OcvVerifier { models, config: RunConfig::default() }));
        Ok(())
    })
}

/// Sets one configuration key, using the same keys and value syntax as the
/// command-line `--set KEY=VALUE`.
#[no_mangle]
pub unsafe extern "C" fn ocv_verifier_set(verifier: *mut OcvVerifier, key: *const c_char, value: *const c_char) -> OcvStatus {
    guard(|| {
        let v = out(verifier, "verifier")?;
        let mut next = v.config.clone();
        next.set(text(key, "key")?, text(value, "value")?)?;
        next.validate()?;
        v.config = next;
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn ocv_verifier_free(verifier: *mut OcvVerifier) {
    if !verifier.is_null() {
        drop(Box::from_raw(verifier));
    }
}

#[no_mangle]
pub unsafe extern "C" fn ocv_verify_pair(
    verifier: *const OcvVerifier,
    pre: *const u8,
    pre_len: usize,
    post: *const u8,
    post_len: usize,
    out_verdict: *mut OcvVerdict,
) -> OcvStatus {
    guard(|| {
        let v = handle(verifier, "verifier")?;
        let out_verdict = out(out_verdict, "out_verdict")?;
        let verdict = verify_pair(bytes(pre, pre_len, "pre")?, bytes(post, post_len, "post")?, &v.models, &v.config.pipeline_config())?;
        *out_verdict = OcvVerdict {
            outcome: match verdict.outcome {
                Outcome::Accepted => OcvOutcome::Accepted,
                Outcome::RejectedForgery => OcvOutcome::RejectedForgery,
                Outcome::RejectedDistance => OcvOutcome::RejectedDistance,
            },
            has_distance: verdict.distance.is_some(),
            distance: verdict.distance.unwrap_or(0.0),
        };
        Ok(())
    })
}

/// Error level analysis with the verifier's settings, or the defaults when
/// `verifier` is null.
#[no_mangle]
pub unsafe extern "C" fn ocv_ela_check(
    verifier: *const OcvVerifier,
    jpeg: *const u8,
    jpeg_len: usize,
    out_result: *mut OcvElaResult,
) -> OcvStatus {
    guard(|| {
        let out_result = out(out_result, "out_result")?;
        let cfg = verifier.as_ref().map_or_else(|| RunConfig::default().ela, |v| v.config.ela.clone());
        let r = check_image_forgery(bytes(jpeg, jpeg_len, "jpeg")?, &cfg)?;
        *out_result = OcvElaResult {
            forged: r.is_forged(),
            suspect_blocks: r.suspect_blocks.len(),
            median_block_mean: r.stats.median_block_mean,
            max_block_mean: r.stats.max_block_mean,
        };
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn ocv_db_new_in_memory(out_db: *mut *mut OcvDb) -> OcvStatus {
    guard(|| {
        *out(out_db, "out_db")? = Box::into_raw(Box::new(OcvDb(EmbeddingDb::in_memory())));
        Ok(())
    })
}

/// Opens or creates a file-backed database; every insert is appended.
#[no_mangle]
pub unsafe extern "C" fn ocv_db_open(path: *const c_char, out_db: *mut *mut OcvDb) -> OcvStatus {
    guard(|| {
        let out_db = out(out_db, "out_db")?;
        *out_db = Box::into_raw(Box::new(OcvDb(EmbeddingDb::open(text(path, "path")?)?)));
        Ok(())
    })
}

/// Record count, or 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn ocv_db_len(db: *const OcvDb) -> usize {
    db.as_ref().map_or(0, |d| d.0.len())
}

#[no_mangle]
pub unsafe extern "C" fn ocv_db_free(db: *mut OcvDb) {
    if !db.is_null() {
        drop(Box::from_raw(db));
    }
}

/// Duplicate lookup for one image of `phase` (`OCV_PHASE_*`). Matching
/// record ids go to `out_ids` (at most `cap`; `out_count` receives the full
/// count) and the id of the newly stored record to `out_new_record`.
#[no_mangle]
pub unsafe extern "C" fn ocv_check_duplicates(
    verifier: *const OcvVerifier,
    db: *mut OcvDb,
    jpeg: *const u8,
    jpeg_len: usize,
    phase: u32,
    identity_hint: *const c_char,
    created_at: i64,
    out_ids: *mut u64,
    cap: usize,
    out_count: *mut usize,
    out_new_record: *mut u64,
) -> OcvStatus {
    guard(|| {
        let v = handle(verifier, "verifier")?;
        let db = out(db, "db")?;
        let out_count = out(out_count, "out_count")?;
        let out_new_record = out(out_new_record, "out_new_record")?;
        if out_ids.is_null() && cap > 0 {
            return Err(null("out_ids"));
        }
        let hint = if identity_hint.is_null() { "" } else { text(identity_hint, "identity_hint")? };
        let phase = phase_of(phase)?;
        let report = check_duplicates(
            bytes(jpeg, jpeg_len, "jpeg")?,
            phase,
            &v.models,
            &mut db.0,
            &v.config.pipeline_config(),
            hint,
            created_at,
        )?;
        let ids = report.ids();
        *out_count = ids.len();
        *out_new_record = report.new_record;
        for (k, id) in ids.iter().take(cap).enumerate() {
            *out_ids.add(k) = *id;
        }
        Ok(())
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ocuverify::neuralnet::ModelTag;

    #[test]
    fn tag_constants_match_the_core_codes() {
        assert_eq!(u32::from(ModelTag::PrePre.code()), OCV_TAG_PRE_PRE);
        assert_eq!(u32::from(ModelTag::PostPost.code()), OCV_TAG_POST_POST);
        assert_eq!(u32::from(ModelTag::PrePost.code()), OCV_TAG_PRE_POST);
    }
}
