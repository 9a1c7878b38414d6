use std::ffi::{CStr, CString};
use std::ptr;

use ocuverify::imaging::{encode_jpeg, Image, JpegQuality};
use ocuverify::neuralnet::{embed, init_network, save_network, ArchConfig, ConvBlock, ModelTag};
use ocuverify::synth::{gen_identity_pair, SynthIdentitySpec};
use ocuverify_ffi::*;

fn arch() -> ArchConfig {
    ArchConfig {
        input_side: 16,
        input_channels: 1,
        conv_blocks: vec![ConvBlock::new(4, 3, 2)],
        embedding_dim: 8,
        normalize_embeddings: true,
    }
}

fn model_bytes(tag: ModelTag, seed: u64) -> Vec<u8> {
    save_network(&init_network::<f32>(&arch(), seed, tag).unwrap()).unwrap()
}

fn load(tag: ModelTag, seed: u64) -> *mut OcvModel {
    let b = model_bytes(tag, seed);
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { ocv_model_load_bytes(b.as_ptr(), b.len(), &mut m) }, OcvStatus::Ok);
    m
}

fn verifier() -> *mut OcvVerifier {
    let ms = [load(ModelTag::PrePre, 1), load(ModelTag::PostPost, 2), load(ModelTag::PrePost, 3)];
    let mut v = ptr::null_mut();
    assert_eq!(unsafe { ocv_verifier_new(ms[0], ms[1], ms[2], &mut v) }, OcvStatus::Ok);
    for m in ms {
        unsafe { ocv_model_free(m) };
    }
    v
}

fn face(seed: u64) -> Vec<u8> {
    let (pre, _) = gen_identity_pair(&SynthIdentitySpec::from_seed(seed), 96).unwrap();
    encode_jpeg(&pre, JpegQuality::new(90).unwrap())
}

fn last_error() -> Option<String> {
    let p = ocv_last_error();
    (!p.is_null()).then(|| unsafe { CStr::from_ptr(p) }.to_str().unwrap().to_string())
}

fn set(v: *mut OcvVerifier, k: &str, val: &str) -> OcvStatus {
    let (k, val) = (CString::new(k).unwrap(), CString::new(val).unwrap());
    unsafe { ocv_verifier_set(v, k.as_ptr(), val.as_ptr()) }
}

#[test]
fn model_handle_reports_tag_dim_and_embeddings() {
    let m = load(ModelTag::PostPost, 9);
    let mut tag = 99;
    assert_eq!(unsafe { ocv_model_tag(m, &mut tag) }, OcvStatus::Ok);
    assert_eq!(tag, OCV_TAG_POST_POST);
    assert_eq!(unsafe { ocv_model_embedding_dim(m) }, 8);
    assert_eq!(unsafe { ocv_model_embedding_dim(ptr::null()) }, 0);

    let jpeg = face(4);
    let mut buf = [0f32; 8];
    let mut len = 0;
    assert_eq!(unsafe { ocv_model_embed_jpeg(m, jpeg.as_ptr(), jpeg.len(), buf.as_mut_ptr(), 3, &mut len) }, OcvStatus::BufferTooSmall);
    assert_eq!(len, 8);
    assert!(last_error().unwrap().contains("need 8"));
    assert_eq!(unsafe { ocv_model_embed_jpeg(m, jpeg.as_ptr(), jpeg.len(), buf.as_mut_ptr(), 8, &mut len) }, OcvStatus::Ok);
    assert_eq!(last_error(), None);
    let net = init_network::<f32>(&arch(), 9, ModelTag::PostPost).unwrap();
    let want = embed(&net, &ocuverify::imaging::decode_jpeg(&jpeg).unwrap()).unwrap();
    assert_eq!(buf.to_vec(), want.values);
    unsafe { ocv_model_free(m) };
}

#[test]
fn model_files_round_trip_through_the_handle() {
    let dir = tempfile::tempdir().unwrap();
    let path = CString::new(dir.path().join("m.ocv").to_str().unwrap()).unwrap();
    let m = load(ModelTag::PrePre, 5);
    assert_eq!(unsafe { ocv_model_save(m, path.as_ptr()) }, OcvStatus::Ok);
    assert_eq!(std::fs::read(dir.path().join("m.ocv")).unwrap(), model_bytes(ModelTag::PrePre, 5));
    let mut back = ptr::null_mut();
    assert_eq!(unsafe { ocv_model_load(path.as_ptr(), &mut back) }, OcvStatus::Ok);
    unsafe { ocv_model_free(back) };
    unsafe { ocv_model_free(m) };

    let missing = CString::new(dir.path().join("nope.ocv").to_str().unwrap()).unwrap();
    assert_eq!(unsafe { ocv_model_load(missing.as_ptr(), &mut back) }, OcvStatus::Io);
    assert_eq!(unsafe { ocv_model_load_bytes(b"junk".as_ptr(), 4, &mut back) }, OcvStatus::ModelFormat);
}

#[test]
fn null_arguments_are_reported_not_dereferenced() {
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { ocv_model_load(ptr::null(), &mut m) }, OcvStatus::NullArgument);
    assert!(last_error().unwrap().contains("path"));
    assert_eq!(unsafe { ocv_model_load_bytes(ptr::null(), 10, &mut m) }, OcvStatus::NullArgument);
    let mut verdict = OcvVerdict { outcome: OcvOutcome::Accepted, has_distance: false, distance: 0.0 };
    assert_eq!(unsafe { ocv_verify_pair(ptr::null(), ptr::null(), 0, ptr::null(), 0, &mut verdict) }, OcvStatus::NullArgument);
    let mut db = ptr::null_mut();
    assert_eq!(unsafe { ocv_db_open(ptr::null(), &mut db) }, OcvStatus::NullArgument);
    assert_eq!(unsafe { ocv_db_new_in_memory(ptr::null_mut()) }, OcvStatus::NullArgument);
    unsafe {
        ocv_model_free(ptr::null_mut());
        ocv_verifier_free(ptr::null_mut());
        ocv_db_free(ptr::null_mut());
    }
    assert!(unsafe { CStr::from_ptr(ocv_version()) }.to_str().unwrap().starts_with("0."));
}

#[test]
fn verifier_accepts_identical_images_and_rejects_forgeries() {
    let v = verifier();
    let jpeg = face(2);
    let mut out = OcvVerdict { outcome: OcvOutcome::RejectedDistance, has_distance: false, distance: -1.0 };
    assert_eq!(unsafe { ocv_verify_pair(v, jpeg.as_ptr(), jpeg.len(), jpeg.as_ptr(), jpeg.len(), &mut out) }, OcvStatus::Ok);
    assert_eq!(out, OcvVerdict { outcome: OcvOutcome::Accepted, has_distance: true, distance: 0.0 });

    // A never-compressed noise patch pasted into a smooth carrier.
    let q = JpegQuality::new(75).unwrap();
    let carrier = Image::from_fn(128, 128, 3, |x, y, c| (100 + (x + y + c) % 40) as u8).unwrap();
    let forged = Image::from_fn(128, 128, 3, |x, y, c| {
        if (40..80).contains(&x) && (32..72).contains(&y) {
            if (x * 7 + y * 13 + c * 5) % 3 == 0 { 255 } else { 0 }
        } else {
            carrier.get(x, y, c)
        }
    })
    .unwrap();
    let forged = encode_jpeg(&forged, q);
    assert_eq!(set(v, "ela_floor", "1.0"), OcvStatus::Ok);
    let mut ela = OcvElaResult { forged: false, suspect_blocks: 0, median_block_mean: 0.0, max_block_mean: 0.0 };
    assert_eq!(unsafe { ocv_ela_check(v, forged.as_ptr(), forged.len(), &mut ela) }, OcvStatus::Ok);
    assert!(ela.forged && ela.suspect_blocks > 0);
    assert_eq!(unsafe { ocv_verify_pair(v, forged.as_ptr(), forged.len(), jpeg.as_ptr(), jpeg.len(), &mut out) }, OcvStatus::Ok);
    assert_eq!(out.outcome, OcvOutcome::RejectedForgery);
    assert!(!out.has_distance);

    assert_eq!(set(v, "theta", "-1"), OcvStatus::Ok);
    assert_eq!(unsafe { ocv_verify_pair(v, jpeg.as_ptr(), jpeg.len(), jpeg.as_ptr(), jpeg.len(), &mut out) }, OcvStatus::Ok);
    assert_eq!(out.outcome, OcvOutcome::RejectedDistance);
    assert_eq!(set(v, "no_such_key", "1"), OcvStatus::InvalidArgument);
    assert!(last_error().unwrap().contains("no_such_key"));
    assert_eq!(set(v, "ela_requality", "500"), OcvStatus::InvalidArgument);

    let junk = b"not a jpeg";
    assert_eq!(unsafe { ocv_verify_pair(v, junk.as_ptr(), junk.len(), jpeg.as_ptr(), jpeg.len(), &mut out) }, OcvStatus::Decode);
    assert_eq!(unsafe { ocv_ela_check(ptr::null(), junk.as_ptr(), junk.len(), &mut ela) }, OcvStatus::Decode);
    unsafe { ocv_verifier_free(v) };
}

#[test]
fn verifier_requires_matching_tags() {
    let (a, b) = (load(ModelTag::PrePre, 1), load(ModelTag::PrePre, 2));
    let mut v = ptr::null_mut();
    assert_eq!(unsafe { ocv_verifier_new(a, b, a, &mut v) }, OcvStatus::InvalidArgument);
    assert!(v.is_null());
    unsafe {
        ocv_model_free(a);
        ocv_model_free(b);
    }
}

#[test]
fn duplicate_checks_store_and_report() {
    let v = verifier();
    let mut db = ptr::null_mut();
    assert_eq!(unsafe { ocv_db_new_in_memory(&mut db) }, OcvStatus::Ok);
    let jpeg = face(6);
    let hint = CString::new("case-6").unwrap();
    let mut ids = [0u64; 4];
    let (mut count, mut new_id) = (9, 0);
    let check = |db, phase, ids: &mut [u64], cap, count: &mut usize, new_id: &mut u64| unsafe {
        ocv_check_duplicates(v, db, jpeg.as_ptr(), jpeg.len(), phase, hint.as_ptr(), 17, ids.as_mut_ptr(), cap, count, new_id)
    };
    assert_eq!(check(db, OCV_PHASE_PRE, &mut ids, 4, &mut count, &mut new_id), OcvStatus::Ok);
    assert_eq!((count, new_id), (0, 1));
    assert_eq!(check(db, OCV_PHASE_PRE, &mut ids, 4, &mut count, &mut new_id), OcvStatus::Ok);
    assert_eq!((count, new_id, ids[0]), (1, 2, 1));
    // Post images never match pre records.
    assert_eq!(check(db, OCV_PHASE_POST, &mut ids, 4, &mut count, &mut new_id), OcvStatus::Ok);
    assert_eq!((count, new_id), (0, 3));
    ids = [0; 4];
    assert_eq!(check(db, OCV_PHASE_PRE, &mut ids, 0, &mut count, &mut new_id), OcvStatus::Ok);
    assert_eq!((count, ids[0]), (2, 0));
    assert_eq!(check(db, 7, &mut ids, 4, &mut count, &mut new_id), OcvStatus::InvalidArgument);
    assert_eq!(unsafe { ocv_db_len(db) }, 4);
    unsafe {
        ocv_db_free(db);
        ocv_verifier_free(v);
    }
}

#[test]
fn file_database_persists_between_handles() {
    let dir = tempfile::tempdir().unwrap();
    let path = CString::new(dir.path().join("d.ocdb").to_str().unwrap()).unwrap();
    let v = verifier();
    let jpeg = face(1);
    for expected_len in [1, 2] {
        let mut db = ptr::null_mut();
        assert_eq!(unsafe { ocv_db_open(path.as_ptr(), &mut db) }, OcvStatus::Ok);
        let (mut count, mut new_id) = (0, 0);
        let s = unsafe {
            ocv_check_duplicates(v, db, jpeg.as_ptr(), jpeg.len(), OCV_PHASE_POST, ptr::null(), 0, ptr::null_mut(), 0, &mut count, &mut new_id)
        };
        assert_eq!(s, OcvStatus::Ok);
        assert_eq!((unsafe { ocv_db_len(db) }, count, new_id), (expected_len, expected_len - 1, expected_len as u64));
        unsafe { ocv_db_free(db) };
    }
    std::fs::write(dir.path().join("bad.ocdb"), b"XXXX\x01\x00").unwrap();
    let bad = CString::new(dir.path().join("bad.ocdb").to_str().unwrap()).unwrap();
    let mut db = ptr::null_mut();
    assert_eq!(unsafe { ocv_db_open(bad.as_ptr(), &mut db) }, OcvStatus::Corruption);
    unsafe { ocv_verifier_free(v) };
}

fn exported_functions() -> Vec<String> {
    let src = include_str!("../src/lib.rs");
    src.lines()
        .filter_map(|l| l.split("extern \"C\" fn ").nth(1))
        .map(|rest| rest.split('(').next().unwrap().to_string())
        .collect()
}

#[test]
fn header_declares_every_export() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/ocuverify.h")).unwrap();
    let fns = exported_functions();
    assert!(fns.len() >= 15, "{fns:?}");
    for f in &fns {
        assert!(header.contains(&format!("{f}(")), "{f} missing from header");
    }
    for t in ["OCV_STATUS_BUFFER_TOO_SMALL", "OCV_OUTCOME_REJECTED_FORGERY", "typedef struct OcvVerifier OcvVerifier", "OCV_PHASE_POST"] {
        assert!(header.contains(t), "{t} missing from header");
    }
}

#[test]
fn header_compiles_as_c() {
    let Some(cc) = ["cc", "clang", "gcc"].into_iter().find(|c| std::process::Command::new(c).arg("--version").output().is_ok()) else {
        eprintln!("no C compiler found; skipping");
        return;
    };
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("use.c");
    std::fs::write(
        &src,
        "#include \"ocuverify.h\"\n\
         int probe(const uint8_t *a, size_t n) {\n\
           OcvModel *m = 0; OcvVerifier *v = 0; OcvDb *d = 0; OcvVerdict out;\n\
           if (ocv_model_load_bytes(a, n, &m) != OCV_STATUS_OK) return 1;\n\
           if (ocv_verifier_new(m, m, m, &v) != OCV_STATUS_OK) return 2;\n\
           if (ocv_db_new_in_memory(&d) != OCV_STATUS_OK) return 3;\n\
           if (ocv_verify_pair(v, a, n, a, n, &out) != OCV_STATUS_OK) return 4;\n\
           size_t len = ocv_db_len(d);\n\
           ocv_db_free(d); ocv_verifier_free(v); ocv_model_free(m);\n\
           return out.outcome == OCV_OUTCOME_ACCEPTED ? 0 : (int)len;\n\
         }\n",
    )
    .unwrap();
    let out = std::process::Command::new(cc)
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I", concat!(env!("CARGO_MANIFEST_DIR"), "/include")])
        .arg(&src)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}
