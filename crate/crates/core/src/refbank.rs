//! Per-verb bank of labeled verbal reference-argument vectors.
//!
//! Bank file layout, all integers little-endian:
//!
//! ```text
//! "NABK" | u32 version (1) | u32 dim | u32 cap
//! u32 n_strings | n_strings * (u32 len | UTF-8 bytes)
//! u32 n_verbs | per verb:
//!     u32 verb string | u32 sentences | u32 n_args | per argument:
//!         u32 label string | u32 sent_id string | u32 token | u32 ordinal | dim * f32
//! ```

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use thiserror::Error;

use crate::embedstore::{cosine, EmbedError, EmbeddingStore};
use crate::relation::{nmod_preposition, Label};
use crate::treebank::Sentence;

pub const BANK_MAGIC: &[u8; 4] = b"NABK";
pub const BANK_VERSION: u32 = 1;
pub const DEFAULT_SENTENCE_CAP: usize = 1500;

#[derive(Debug, Error)]
pub enum RefBankError {
    #[error("sentence {sent_id}: {source}")]
    Embedding {
        sent_id: String,
        #[source]
        source: EmbedError,
    },

    #[error("reference argument {sent_id}:{token} has a zero vector")]
    ZeroVector { sent_id: String, token: usize },

    #[error("bank format error: {0}")]
    Format(String),

    #[error("k must be at least 1")]
    ZeroK,

    #[error(transparent)]
    Similarity(#[from] EmbedError),

    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Clone, Debug, PartialEq)]
pub struct RefArgument {
    pub verb_lemma: String,
    pub label: Label,
    pub vector: Vec<f32>,
    /// `(sent_id, token index)` of the argument head.
    pub source: (String, usize),
    /// Insertion index within the verb, dense from 0.
    pub ordinal: usize,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct VerbEntry {
    pub arguments: Vec<RefArgument>,
    /// Number of reference sentences that contributed arguments.
    pub sentences: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RefBank {
    dim: usize,
    cap: usize,
    verbs: BTreeMap<String, VerbEntry>,
}

impl RefBank {
    pub fn new(dim: usize, cap: usize) -> Self {
        RefBank { dim, cap, verbs: BTreeMap::new() }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn cap(&self) -> usize {
        self.cap
    }

    pub fn arguments(&self, verb: &str) -> &[RefArgument] {
        self.verbs.get(verb).map_or(&[], |e| e.arguments.as_slice())
    }

    pub fn verbs(&self) -> impl Iterator<Item = (&str, &VerbEntry)> {
        self.verbs.iter().map(|(v, e)| (v.as_str(), e))
    }

    pub fn len(&self) -> usize {
        self.verbs.values().map(|e| e.arguments.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Append an argument, assigning the next ordinal for its verb.
    pub fn push(
        &mut self,
        verb: &str,
        label: Label,
        vector: Vec<f32>,
        source: (String, usize),
    ) -> Result<(), RefBankError> {
        if vector.len() != self.dim {
            return Err(EmbedError::DimMismatch { expected: self.dim, found: vector.len() }.into());
        }
        let entry = self.verbs.entry(verb.to_owned()).or_default();
        let ordinal = entry.arguments.len();
        entry.arguments.push(RefArgument { verb_lemma: verb.to_owned(), label, vector, source, ordinal });
        Ok(())
    }

    /// Record a verb with its contributing sentence count (possibly empty).
    pub fn set_sentence_count(&mut self, verb: &str, sentences: usize) {
        self.verbs.entry(verb.to_owned()).or_default().sentences = sentences;
    }
}

/// Labeled arguments of the verb at `verb`, in token order.
///
/// Active voice keeps nsubj, dobj and nmod:X; a passive clause (nsubjpass
/// or auxpass child) maps nsubjpass to dobj and the by-phrase to nsubj.
/// At most one argument per label, the first in token order.
pub fn extract_verbal_arguments(sentence: &Sentence, verb: usize) -> Vec<(Label, usize)> {
    let children: Vec<_> = sentence.children(verb).collect();
    let passive = children.iter().any(|t| t.deprel == "nsubjpass" || t.deprel == "auxpass");
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for child in children {
        let label = if passive {
            match child.deprel.as_str() {
                "nsubjpass" => Some(Label::Dobj),
                "nmod:by" | "nmod:agent" => Some(Label::Nsubj),
                rel => nmod_preposition(rel).map(|p| Label::Nmod(p.to_owned())),
            }
        } else {
            Label::from_relation(&child.deprel)
        };
        if let Some(label) = label {
            if seen.insert(label.clone()) {
                out.push((label, child.id));
            }
        }
    }
    out
}

const VERB_UPOS: &str = "VERB";

/// Arguments of every occurrence of `verb` in a sentence, one per label.
fn sentence_arguments(sentence: &Sentence, verb: &str) -> Vec<(Label, usize)> {
    let mut all: Vec<(Label, usize)> = sentence
        .tokens
        .iter()
        .filter(|t| t.upos == VERB_UPOS && t.lemma.to_lowercase() == verb)
        .flat_map(|t| extract_verbal_arguments(sentence, t.id))
        .collect();
    all.sort_by_key(|(_, head)| *head);
    let mut seen = BTreeSet::new();
    all.retain(|(label, _)| seen.insert(label.clone()));
    all
}

/// Build a bank from a parsed reference corpus. For each verb, sentences
/// are scanned in corpus order until `cap` of them have contributed.
pub fn build_refbank(
    corpus: &[Sentence],
    verbs: &BTreeSet<String>,
    store: &EmbeddingStore,
    cap: usize,
) -> Result<RefBank, RefBankError> {
    let mut bank = RefBank::new(store.dim(), cap);
    for verb in verbs {
        let mut contributing = 0;
        for sentence in corpus {
            if contributing == cap {
                break;
            }
            let arguments = sentence_arguments(sentence, verb);
            if arguments.is_empty() {
                continue;
            }
            let record = store
                .aligned_record(sentence)
                .map_err(|source| RefBankError::Embedding { sent_id: sentence.sent_id.clone(), source })?;
            for (label, head) in arguments {
                let vector = record.row(head)?.to_vec();
                if vector.iter().all(|&x| x == 0.0) {
                    return Err(RefBankError::ZeroVector { sent_id: sentence.sent_id.clone(), token: head });
                }
                bank.push(verb, label, vector, (sentence.sent_id.clone(), head))?;
            }
            contributing += 1;
        }
        bank.set_sentence_count(verb, contributing);
    }
    Ok(bank)
}

/// The `k` references of `verb` most cosine-similar to `query`,
/// descending by score, ties broken by ascending ordinal.
pub fn query_knn<'b>(
    bank: &'b RefBank,
    verb: &str,
    query: &[f32],
    k: usize,
) -> Result<Vec<(&'b RefArgument, f64)>, RefBankError> {
    if k == 0 {
        return Err(RefBankError::ZeroK);
    }
    if query.iter().all(|&x| x == 0.0) {
        return Err(EmbedError::ZeroNorm.into());
    }
    let mut scored = bank
        .arguments(verb)
        .iter()
        .map(|arg| cosine(query, &arg.vector).map(|s| (arg, s)))
        .collect::<Result<Vec<_>, _>>()?;
    scored.sort_by(|(a, sa), (b, sb)| sb.total_cmp(sa).then(a.ordinal.cmp(&b.ordinal)));
    scored.truncate(k);
    Ok(scored)
}

/// Per-label arithmetic mean of the verb's reference vectors.
pub fn label_centroids(bank: &RefBank, verb: &str) -> BTreeMap<Label, Vec<f32>> {
    let mut sums: BTreeMap<Label, (Vec<f64>, usize)> = BTreeMap::new();
    for arg in bank.arguments(verb) {
        let (sum, count) = sums.entry(arg.label.clone()).or_insert_with(|| (vec![0.0; bank.dim()], 0));
        for (s, &x) in sum.iter_mut().zip(&arg.vector) {
            *s += f64::from(x);
        }
        *count += 1;
    }
    sums.into_iter()
        .map(|(label, (sum, count))| {
            let n = count as f64;
            (label, sum.into_iter().map(|s| (s / n) as f32).collect())
        })
        .collect()
}

struct StringTable {
    strings: Vec<String>,
    index: HashMap<String, u32>,
}

impl StringTable {
    fn new() -> Self {
        StringTable { strings: Vec::new(), index: HashMap::new() }
    }

    fn intern(&mut self, s: &str) -> u32 {
        if let Some(&i) = self.index.get(s) {
            return i;
        }
        let i = self.strings.len() as u32;
        self.strings.push(s.to_owned());
        self.index.insert(s.to_owned(), i);
        i
    }
}

fn to_u32(n: usize) -> Result<u32, RefBankError> {
    u32::try_from(n).map_err(|_| RefBankError::Format(format!("{n} does not fit in u32")))
}

pub fn write_refbank<W: Write>(bank: &RefBank, mut w: W) -> Result<(), RefBankError> {
    let mut table = StringTable::new();
    let mut body: Vec<u8> = Vec::new();
    body.write_u32::<LittleEndian>(to_u32(bank.verbs.len())?)?;
    for (verb, entry) in &bank.verbs {
        body.write_u32::<LittleEndian>(table.intern(verb))?;
        body.write_u32::<LittleEndian>(to_u32(entry.sentences)?)?;
        body.write_u32::<LittleEndian>(to_u32(entry.arguments.len())?)?;
        for arg in &entry.arguments {
            body.write_u32::<LittleEndian>(table.intern(&arg.label.to_string()))?;
            body.write_u32::<LittleEndian>(table.intern(&arg.source.0))?;
            body.write_u32::<LittleEndian>(to_u32(arg.source.1)?)?;
            body.write_u32::<LittleEndian>(to_u32(arg.ordinal)?)?;
            for &x in &arg.vector {
                body.write_f32::<LittleEndian>(x)?;
            }
        }
    }
    w.write_all(BANK_MAGIC)?;
    w.write_u32::<LittleEndian>(BANK_VERSION)?;
    w.write_u32::<LittleEndian>(to_u32(bank.dim)?)?;
    w.write_u32::<LittleEndian>(to_u32(bank.cap)?)?;
    w.write_u32::<LittleEndian>(to_u32(table.strings.len())?)?;
    for s in &table.strings {
        w.write_u32::<LittleEndian>(to_u32(s.len())?)?;
        w.write_all(s.as_bytes())?;
    }
    w.write_all(&body)?;
    w.flush()?;
    Ok(())
}

fn format_err(e: io::Error) -> RefBankError {
    if e.kind() == io::ErrorKind::UnexpectedEof {
        RefBankError::Format("truncated bank file".to_owned())
    } else {
        RefBankError::Io(e)
    }
}

pub fn read_refbank<R: Read>(mut r: R) -> Result<RefBank, RefBankError> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(format_err)?;
    if &magic != BANK_MAGIC {
        return Err(RefBankError::Format("missing NABK magic".to_owned()));
    }
    let mut u32_field = || r.read_u32::<LittleEndian>().map_err(format_err);
    let version = u32_field()?;
    if version != BANK_VERSION {
        return Err(RefBankError::Format(format!("unsupported bank version {version}")));
    }
    let dim = u32_field()? as usize;
    let cap = u32_field()? as usize;
    let n_strings = u32_field()? as usize;

    let mut strings = Vec::with_capacity(n_strings.min(1 << 16));
    for _ in 0..n_strings {
        let len = r.read_u32::<LittleEndian>().map_err(format_err)? as usize;
        let mut buf = vec![0u8; len];
        r.read_exact(&mut buf).map_err(format_err)?;
        strings.push(
            String::from_utf8(buf).map_err(|_| RefBankError::Format("string table entry is not UTF-8".to_owned()))?,
        );
    }
    let lookup =
        |i: u32| strings.get(i as usize).ok_or_else(|| RefBankError::Format(format!("string index {i} out of range")));

    let mut bank = RefBank::new(dim, cap);
    let n_verbs = r.read_u32::<LittleEndian>().map_err(format_err)?;
    for _ in 0..n_verbs {
        let verb = lookup(r.read_u32::<LittleEndian>().map_err(format_err)?)?.clone();
        let sentences = r.read_u32::<LittleEndian>().map_err(format_err)? as usize;
        let n_args = r.read_u32::<LittleEndian>().map_err(format_err)?;
        let mut arguments = Vec::with_capacity(n_args.min(1 << 16) as usize);
        for expected_ordinal in 0..n_args as usize {
            let label: Label =
                lookup(r.read_u32::<LittleEndian>().map_err(format_err)?)?.parse().map_err(RefBankError::Format)?;
            let sent_id = lookup(r.read_u32::<LittleEndian>().map_err(format_err)?)?.clone();
            let token = r.read_u32::<LittleEndian>().map_err(format_err)? as usize;
            let ordinal = r.read_u32::<LittleEndian>().map_err(format_err)? as usize;
            if ordinal != expected_ordinal {
                return Err(RefBankError::Format(format!(
                    "verb {verb}: ordinal {ordinal} where {expected_ordinal} expected"
                )));
            }
            let mut vector = vec![0f32; dim];
            r.read_f32_into::<LittleEndian>(&mut vector).map_err(format_err)?;
            arguments.push(RefArgument { verb_lemma: verb.clone(), label, vector, source: (sent_id, token), ordinal });
        }
        bank.verbs.insert(verb, VerbEntry { arguments, sentences });
    }
    let mut trailing = [0u8; 1];
    if r.read(&mut trailing)? != 0 {
        return Err(RefBankError::Format("trailing bytes after bank".to_owned()));
    }
    Ok(bank)
}

pub fn save_refbank(bank: &RefBank, path: &Path) -> Result<(), RefBankError> {
    write_refbank(bank, BufWriter::new(File::create(path)?))
}

pub fn load_refbank(path: &Path) -> Result<RefBank, RefBankError> {
    read_refbank(BufReader::new(File::open(path)?))
}
