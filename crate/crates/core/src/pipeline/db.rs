use std::fs::{File, OpenOptions};
use std::io::{Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::neuralnet::ModelTag;

const MAGIC: &[u8; 4] = b"OCDB";
const VERSION: u16 = 1;
/// Magic, version, then one u32 dimension per model tag (0 = none yet).
const HEADER_LEN: usize = 4 + 2 + 3 * 4;

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingRecord {
    pub record_id: u64,
    pub identity_hint: String,
    pub model_tag: ModelTag,
    pub vector: Vec<f32>,
    /// Seconds since the Unix epoch.
    pub created_at: i64,
}

/// Append-only embedding store. Record ids start at 1 and are never reused.
///
/// File layout: `OCDB`, version u16, three u32 dimensions (PRE-PRE,
/// POST-POST, PRE-POST; 0 while a tag has no records), then records of
/// `id u64, tag u8, label length u32, label bytes, created_at i64,
/// vector as d LE f32`. All integers little-endian. A partially written
/// final record is ignored on load.
#[derive(Debug)]
pub struct EmbeddingDb {
    dims: [u32; 3],
    records: Vec<EmbeddingRecord>,
    file: Option<(PathBuf, File)>,
}

impl Default for EmbeddingDb {
    fn default() -> Self {
        Self::in_memory()
    }
}

fn tag_slot(tag: ModelTag) -> usize {
    tag.code() as usize
}

fn encode_header(dims: &[u32; 3]) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    for d in dims {
        out.extend_from_slice(&d.to_le_bytes());
    }
    out
}

fn encode_record(r: &EmbeddingRecord) -> Vec<u8> {
    let mut out = Vec::with_capacity(25 + r.identity_hint.len() + 4 * r.vector.len());
    out.extend_from_slice(&r.record_id.to_le_bytes());
    out.push(r.model_tag.code());
    out.extend_from_slice(&(r.identity_hint.len() as u32).to_le_bytes());
    out.extend_from_slice(r.identity_hint.as_bytes());
    out.extend_from_slice(&r.created_at.to_le_bytes());
    for v in &r.vector {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

impl EmbeddingDb {
    pub fn in_memory() -> Self {
        Self { dims: [0; 3], records: Vec::new(), file: None }
    }

    /// Opens a file-backed database, creating it if missing. Writes go
    /// straight to the file.
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let mut db = if path.exists() { Self::from_bytes(&std::fs::read(&path)?)? } else { Self::in_memory() };
        let mut file = OpenOptions::new().read(true).write(true).create(true).truncate(false).open(&path)?;
        // Rewrite the canonical byte image so a torn trailing record is
        // discarded before anything new is appended.
        let bytes = db.to_bytes();
        file.set_len(0)?;
        file.write_all(&bytes)?;
        file.flush()?;
        db.file = Some((path, file));
        Ok(db)
    }

    pub fn path(&self) -> Option<&Path> {
        self.file.as_ref().map(|(p, _)| p.as_path())
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Vector dimension fixed for `tag`, if any record of it exists.
    pub fn dim(&self, tag: ModelTag) -> Option<usize> {
        match self.dims[tag_slot(tag)] {
            0 => None,
            d => Some(d as usize),
        }
    }

    pub fn next_id(&self) -> u64 {
        self.records.last().map_or(1, |r| r.record_id + 1)
    }

    /// Appends a record and returns its id. The first record of a tag fixes
    /// that tag's dimension; later mismatches are rejected.
    pub fn put(&mut self, tag: ModelTag, identity_hint: &str, vector: Vec<f32>, created_at: i64) -> Result<u64> {
        if vector.is_empty() {
            return Err(Error::RejectedWrite("empty vector".into()));
        }
        if u32::try_from(identity_hint.len()).is_err() {
            return Err(Error::RejectedWrite("label too long".into()));
        }
        let slot = tag_slot(tag);
        let d = u32::try_from(vector.len()).map_err(|_| Error::RejectedWrite("vector too long".into()))?;
        let new_dim = match self.dims[slot] {
            0 => true,
            existing if existing == d => false,
            existing => {
                return Err(Error::RejectedWrite(format!(
                    "{tag} records have dimension {existing}, got {d}"
                )))
            }
        };
        let rec = EmbeddingRecord {
            record_id: self.next_id(),
            identity_hint: identity_hint.to_string(),
            model_tag: tag,
            vector,
            created_at,
        };
        if new_dim {
            self.dims[slot] = d;
        }
        if let Some((_, f)) = self.file.as_mut() {
            let res = (|| -> std::io::Result<()> {
                if new_dim {
                    f.seek(SeekFrom::Start(0))?;
                    f.write_all(&encode_header(&self.dims))?;
                }
                f.seek(SeekFrom::End(0))?;
                f.write_all(&encode_record(&rec))?;
                f.flush()
            })();
            if let Err(e) = res {
                if new_dim {
                    self.dims[slot] = 0;
                }
                return Err(e.into());
            }
        }
        let id = rec.record_id;
        self.records.push(rec);
        Ok(id)
    }

    /// Records of `tag` in insertion order.
    pub fn scan(&self, tag: ModelTag) -> impl Iterator<Item = &EmbeddingRecord> {
        self.records.iter().filter(move |r| r.model_tag == tag)
    }

    pub fn records(&self) -> &[EmbeddingRecord] {
        &self.records
    }

    pub fn get(&self, id: u64) -> Option<&EmbeddingRecord> {
        self.records.binary_search_by_key(&id, |r| r.record_id).ok().map(|i| &self.records[i])
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = encode_header(&self.dims);
        for r in &self.records {
            out.extend(encode_record(r));
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_LEN || &bytes[..4] != MAGIC {
            return Err(Error::Corruption("missing OCDB header".into()));
        }
        let version = u16::from_le_bytes([bytes[4], bytes[5]]);
        if version != VERSION {
            return Err(Error::Corruption(format!("unsupported OCDB version {version}")));
        }
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
        let dims = [u32_at(6), u32_at(10), u32_at(14)];
        let mut db = Self { dims, records: Vec::new(), file: None };
        let mut pos = HEADER_LEN;
        while pos < bytes.len() {
            match parse_record(bytes, pos, &dims)? {
                Some((rec, next)) => {
                    if rec.record_id < db.next_id() {
                        return Err(Error::Corruption(format!(
                            "record id {} at byte {pos} is not increasing",
                            rec.record_id
                        )));
                    }
                    db.records.push(rec);
                    pos = next;
                }
                None => break,
            }
        }
        Ok(db)
    }

    /// Writes the whole database to `path`.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

/// One record at `pos`, or `None` if the bytes stop partway through it.
fn parse_record(bytes: &[u8], pos: usize, dims: &[u32; 3]) -> Result<Option<(EmbeddingRecord, usize)>> {
    let avail = |n: usize| pos.checked_add(n).is_some_and(|e| e <= bytes.len());
    if !avail(13) {
        return Ok(None);
    }
    let id = u64::from_le_bytes(bytes[pos..pos + 8].try_into().unwrap());
    let code = bytes[pos + 8];
    let tag = ModelTag::from_code(code)
        .ok_or_else(|| Error::Corruption(format!("unknown model tag {code} at byte {}", pos + 8)))?;
    let d = dims[tag_slot(tag)] as usize;
    if d == 0 {
        return Err(Error::Corruption(format!("{tag} record at byte {pos} but header has no {tag} dimension")));
    }
    let label_len = u32::from_le_bytes(bytes[pos + 9..pos + 13].try_into().unwrap()) as usize;
    let total = 13usize.checked_add(label_len).and_then(|v| v.checked_add(8 + 4 * d));
    let Some(total) = total.filter(|&t| avail(t)) else {
        return Ok(None);
    };
    let label_start = pos + 13;
    let identity_hint = String::from_utf8(bytes[label_start..label_start + label_len].to_vec())
        .map_err(|_| Error::Corruption(format!("label at byte {label_start} is not UTF-8")))?;
    let ts = label_start + label_len;
    let created_at = i64::from_le_bytes(bytes[ts..ts + 8].try_into().unwrap());
    let vector = bytes[ts + 8..pos + total]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(Some((EmbeddingRecord { record_id: id, identity_hint, model_tag: tag, vector, created_at }, pos + total)))
}
