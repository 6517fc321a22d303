//! Per-token vector stores (NAVF binary / JSONL), static word-vector
//! tables, and cosine similarity.
//!
//! NAVF layout, all integers little-endian:
//!
//! ```text
//! "NAVF" | u32 version (1) | u32 dim
//! repeated: u32 id_len | sent_id bytes | u32 n_tokens | n_tokens * dim f32
//! ```

use std::collections::HashMap;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::treebank::{Sentence, Token};

pub const NAVF_MAGIC: &[u8; 4] = b"NAVF";
pub const NAVF_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("cosine of a zero-norm vector is undefined")]
    ZeroNorm,

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimMismatch { expected: usize, found: usize },

    #[error("no embeddings for sentence {0}")]
    UnknownSentence(String),

    #[error("sentence {sent_id}: token {index} out of range 1..={len}")]
    TokenOutOfRange { sent_id: String, index: usize, len: usize },

    #[error("sentence {sent_id}: {found} vectors for {expected} tokens")]
    TokenCount { sent_id: String, expected: usize, found: usize },

    #[error("out of vocabulary: {0}")]
    OutOfVocabulary(String),

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Cosine similarity with 64-bit accumulation, clamped to [-1, 1].
pub fn cosine(u: &[f32], v: &[f32]) -> Result<f64, EmbedError> {
    if u.len() != v.len() {
        return Err(EmbedError::DimMismatch { expected: u.len(), found: v.len() });
    }
    let (mut dot, mut uu, mut vv) = (0f64, 0f64, 0f64);
    for (&a, &b) in u.iter().zip(v) {
        let (a, b) = (f64::from(a), f64::from(b));
        dot += a * b;
        uu += a * a;
        vv += b * b;
    }
    if uu == 0.0 || vv == 0.0 {
        return Err(EmbedError::ZeroNorm);
    }
    Ok((dot / (uu.sqrt() * vv.sqrt())).clamp(-1.0, 1.0))
}

#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingRecord {
    pub sent_id: String,
    pub dim: usize,
    /// Row-major `n_tokens x dim`.
    pub vectors: Vec<f32>,
}

#[derive(Serialize)]
struct JsonlRecordOut<'a> {
    sent_id: &'a str,
    dim: usize,
    vectors: Vec<&'a [f32]>,
}

#[derive(Deserialize)]
struct JsonlRecordIn {
    sent_id: String,
    dim: usize,
    vectors: Vec<Vec<f32>>,
}

impl EmbeddingRecord {
    pub fn new(sent_id: &str, dim: usize, vectors: Vec<f32>) -> Result<Self, EmbedError> {
        if dim == 0 || !vectors.len().is_multiple_of(dim) {
            return Err(EmbedError::Format(format!(
                "record {sent_id}: {} values do not form rows of dim {dim}",
                vectors.len()
            )));
        }
        Ok(EmbeddingRecord { sent_id: sent_id.to_owned(), dim, vectors })
    }

    pub fn from_rows(sent_id: &str, rows: &[Vec<f32>]) -> Result<Self, EmbedError> {
        let dim = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != dim) {
            return Err(EmbedError::DimMismatch { expected: dim, found: bad.len() });
        }
        EmbeddingRecord::new(sent_id, dim, rows.concat())
    }

    pub fn n_tokens(&self) -> usize {
        self.vectors.len() / self.dim
    }

    /// Row for a 1-based token index.
    pub fn row(&self, index: usize) -> Result<&[f32], EmbedError> {
        let len = self.n_tokens();
        if index == 0 || index > len {
            return Err(EmbedError::TokenOutOfRange { sent_id: self.sent_id.clone(), index, len });
        }
        Ok(&self.vectors[(index - 1) * self.dim..index * self.dim])
    }
}

/// Per-sentence token vectors sharing one dimension.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct EmbeddingStore {
    dim: usize,
    records: Vec<EmbeddingRecord>,
    by_id: HashMap<String, usize>,
}

impl EmbeddingStore {
    pub fn new(dim: usize) -> Self {
        EmbeddingStore { dim, ..Default::default() }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[EmbeddingRecord] {
        &self.records
    }

    /// Add a record; a later record with the same sent_id replaces the earlier one.
    pub fn insert(&mut self, record: EmbeddingRecord) -> Result<(), EmbedError> {
        if self.records.is_empty() && self.dim == 0 {
            self.dim = record.dim;
        }
        if record.dim != self.dim {
            return Err(EmbedError::Format(format!(
                "record {} has dim {}, store has dim {}",
                record.sent_id, record.dim, self.dim
            )));
        }
        match self.by_id.get(&record.sent_id) {
            Some(&i) => self.records[i] = record,
            None => {
                self.by_id.insert(record.sent_id.clone(), self.records.len());
                self.records.push(record);
            }
        }
        Ok(())
    }

    pub fn record(&self, sent_id: &str) -> Result<&EmbeddingRecord, EmbedError> {
        self.by_id
            .get(sent_id)
            .map(|&i| &self.records[i])
            .ok_or_else(|| EmbedError::UnknownSentence(sent_id.to_owned()))
    }

    /// Vector of the 1-based token `index` of sentence `sent_id`.
    pub fn vector_for(&self, sent_id: &str, index: usize) -> Result<&[f32], EmbedError> {
        self.record(sent_id)?.row(index)
    }

    /// The record for `sentence`, checked against its token count.
    pub fn aligned_record(&self, sentence: &Sentence) -> Result<&EmbeddingRecord, EmbedError> {
        let record = self.record(&sentence.sent_id)?;
        if record.n_tokens() != sentence.len() {
            return Err(EmbedError::TokenCount {
                sent_id: sentence.sent_id.clone(),
                expected: sentence.len(),
                found: record.n_tokens(),
            });
        }
        Ok(record)
    }

    pub fn write_navf<W: Write>(&self, mut w: W) -> Result<(), EmbedError> {
        w.write_all(NAVF_MAGIC)?;
        w.write_u32::<LittleEndian>(NAVF_VERSION)?;
        w.write_u32::<LittleEndian>(to_u32(self.dim)?)?;
        for record in &self.records {
            w.write_u32::<LittleEndian>(to_u32(record.sent_id.len())?)?;
            w.write_all(record.sent_id.as_bytes())?;
            w.write_u32::<LittleEndian>(to_u32(record.n_tokens())?)?;
            for &x in &record.vectors {
                w.write_f32::<LittleEndian>(x)?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_navf<R: Read>(mut r: R) -> Result<Self, EmbedError> {
        let mut magic = [0u8; 4];
        read_exact(&mut r, &mut magic, "magic")?;
        if &magic != NAVF_MAGIC {
            return Err(EmbedError::Format("missing NAVF magic".to_owned()));
        }
        let version = read_u32(&mut r, "version")?;
        if version != NAVF_VERSION {
            return Err(EmbedError::Format(format!("unsupported NAVF version {version}")));
        }
        let dim = read_u32(&mut r, "dim")? as usize;
        let mut store = EmbeddingStore::new(dim);
        loop {
            let mut len_bytes = [0u8; 4];
            match r.read(&mut len_bytes[..1])? {
                0 => break,
                _ => read_exact(&mut r, &mut len_bytes[1..], "record header")?,
            }
            if dim == 0 {
                return Err(EmbedError::Format("records in a dim-0 store".to_owned()));
            }
            let id_len = u32::from_le_bytes(len_bytes) as usize;
            let mut id = vec![0u8; id_len];
            read_exact(&mut r, &mut id, "sent_id")?;
            let sent_id = String::from_utf8(id).map_err(|_| EmbedError::Format("sent_id is not UTF-8".to_owned()))?;
            let n_tokens = read_u32(&mut r, "n_tokens")? as usize;
            let mut vectors = vec![0f32; n_tokens * dim];
            r.read_f32_into::<LittleEndian>(&mut vectors).map_err(|e| truncated(e, "vectors"))?;
            store.insert(EmbeddingRecord { sent_id, dim, vectors })?;
        }
        Ok(store)
    }

    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<(), EmbedError> {
        for record in &self.records {
            if let Some(x) = record.vectors.iter().find(|x| !x.is_finite()) {
                return Err(EmbedError::Format(format!(
                    "record {}: non-finite value {x} cannot be written as JSON",
                    record.sent_id
                )));
            }
            let out = JsonlRecordOut {
                sent_id: &record.sent_id,
                dim: record.dim,
                vectors: record.vectors.chunks(record.dim).collect(),
            };
            serde_json::to_writer(&mut w, &out).map_err(io::Error::from)?;
            w.write_all(b"\n")?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(r: R) -> Result<Self, EmbedError> {
        let mut store = EmbeddingStore::default();
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: JsonlRecordIn =
                serde_json::from_str(&line).map_err(|e| EmbedError::Format(format!("line {}: {e}", i + 1)))?;
            if let Some(row) = rec.vectors.iter().find(|row| row.len() != rec.dim) {
                return Err(EmbedError::Format(format!(
                    "line {}: row of length {} in record of dim {}",
                    i + 1,
                    row.len(),
                    rec.dim
                )));
            }
            let record = EmbeddingRecord::new(&rec.sent_id, rec.dim, rec.vectors.concat())?;
            store.insert(record)?;
        }
        Ok(store)
    }
}

fn to_u32(n: usize) -> Result<u32, EmbedError> {
    u32::try_from(n).map_err(|_| EmbedError::Format(format!("{n} does not fit in u32")))
}

fn truncated(e: io::Error, what: &str) -> EmbedError {
    if e.kind() == io::ErrorKind::UnexpectedEof {
        EmbedError::Format(format!("truncated file while reading {what}"))
    } else {
        EmbedError::Io(e)
    }
}

fn read_exact<R: Read>(r: &mut R, buf: &mut [u8], what: &str) -> Result<(), EmbedError> {
    r.read_exact(buf).map_err(|e| truncated(e, what))
}

fn read_u32<R: Read>(r: &mut R, what: &str) -> Result<u32, EmbedError> {
    r.read_u32::<LittleEndian>().map_err(|e| truncated(e, what))
}

/// Load a store, detecting NAVF by its magic and falling back to JSONL.
pub fn load_embeddings(path: &Path) -> Result<EmbeddingStore, EmbedError> {
    let mut reader = BufReader::new(File::open(path)?);
    let is_navf = reader.fill_buf()?.starts_with(NAVF_MAGIC);
    if is_navf {
        EmbeddingStore::read_navf(reader)
    } else {
        EmbeddingStore::read_jsonl(reader)
    }
}

pub fn save_navf(store: &EmbeddingStore, path: &Path) -> Result<(), EmbedError> {
    store.write_navf(BufWriter::new(File::create(path)?))
}

pub fn save_jsonl(store: &EmbeddingStore, path: &Path) -> Result<(), EmbedError> {
    store.write_jsonl(BufWriter::new(File::create(path)?))
}

/// Uncontextualized word vectors (`<count> <dim>` header, then `word f1 .. fdim`).
#[derive(Clone, Debug, Default)]
pub struct StaticTable {
    dim: usize,
    vectors: HashMap<String, Vec<f32>>,
}

impl StaticTable {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn get(&self, word: &str) -> Option<&[f32]> {
        self.vectors.get(word).map(Vec::as_slice)
    }

    pub fn read_text<R: BufRead>(r: R) -> Result<Self, EmbedError> {
        let mut lines = r.lines();
        let header = lines.next().ok_or_else(|| EmbedError::Format("empty static table".to_owned()))??;
        let mut parts = header.split_whitespace();
        let parse_header = |field: Option<&str>| {
            field
                .and_then(|f| f.parse::<usize>().ok())
                .ok_or_else(|| EmbedError::Format(format!("bad header {header:?}")))
        };
        let count = parse_header(parts.next())?;
        let dim = parse_header(parts.next())?;
        let mut vectors = HashMap::with_capacity(count);
        for (i, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let mut fields = line.split(' ').filter(|f| !f.is_empty());
            let word = fields.next().expect("nonempty line").to_owned();
            let vector = fields
                .map(|f| f.parse::<f32>())
                .collect::<Result<Vec<f32>, _>>()
                .map_err(|e| EmbedError::Format(format!("line {}: {e}", i + 2)))?;
            if vector.len() != dim {
                return Err(EmbedError::DimMismatch { expected: dim, found: vector.len() });
            }
            vectors.insert(word, vector);
        }
        if vectors.len() != count {
            return Err(EmbedError::Format(format!("header announces {count} words, found {}", vectors.len())));
        }
        Ok(StaticTable { dim, vectors })
    }

    pub fn load(path: &Path) -> Result<Self, EmbedError> {
        StaticTable::read_text(BufReader::new(File::open(path)?))
    }
}

/// Static vector for a token: surface form, then lowercased form, then lemma.
pub fn static_vector<'t>(table: &'t StaticTable, token: &Token) -> Result<&'t [f32], EmbedError> {
    table
        .get(&token.form)
        .or_else(|| table.get(&token.form.to_lowercase()))
        .or_else(|| table.get(&token.lemma))
        .ok_or_else(|| EmbedError::OutOfVocabulary(token.form.clone()))
}

/// Embed every sentence from a static table, one record per sentence.
pub fn static_store(table: &StaticTable, sentences: &[Sentence]) -> Result<EmbeddingStore, EmbedError> {
    let mut store = EmbeddingStore::new(table.dim());
    for sentence in sentences {
        let mut vectors = Vec::with_capacity(sentence.len() * table.dim());
        for token in &sentence.tokens {
            vectors.extend_from_slice(static_vector(table, token)?);
        }
        store.insert(EmbeddingRecord::new(&sentence.sent_id, table.dim(), vectors)?)?;
    }
    Ok(store)
}
