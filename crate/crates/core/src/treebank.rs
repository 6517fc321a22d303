//! CoNLL-U sentences: parsing, tree queries and serialization.
//!
//! Multiword-token ranges (`3-4`) and empty nodes (`5.1`) are kept as
//! opaque lines at their original position and never enter the tree.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::{self, BufRead, Write};

use thiserror::Error;

use crate::relation::RelPattern;

#[derive(Debug, Error)]
pub enum TreebankError {
    #[error("line {line}: {reason}")]
    Malformed { line: usize, reason: String },

    #[error("sentence {sent_id}: {reason}")]
    Structure { sent_id: String, reason: String },

    #[error("token index {index} out of range 0..={len}")]
    Range { index: usize, len: usize },

    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Token {
    pub id: usize,
    pub form: String,
    pub lemma: String,
    pub upos: String,
    pub xpos: String,
    pub feats: String,
    pub head: usize,
    pub deprel: String,
    /// Enhanced arcs `(head, relation)`, kept sorted by head.
    pub deps: Vec<(usize, String)>,
    /// MISC column as ordered `key[=value]` entries.
    pub misc: Vec<(String, Option<String>)>,
}

impl Token {
    /// A token with `_` in every unspecified column.
    pub fn new(id: usize, form: &str, lemma: &str, upos: &str, head: usize, deprel: &str) -> Self {
        Token {
            id,
            form: form.to_owned(),
            lemma: lemma.to_owned(),
            upos: upos.to_owned(),
            xpos: "_".to_owned(),
            feats: "_".to_owned(),
            head,
            deprel: deprel.to_owned(),
            deps: Vec::new(),
            misc: Vec::new(),
        }
    }

    pub fn misc_value(&self, key: &str) -> Option<&str> {
        self.misc.iter().find(|(k, _)| k == key).and_then(|(_, v)| v.as_deref())
    }

    /// Insert an enhanced arc, keeping `deps` sorted. Returns `false` if
    /// the arc was already present.
    pub fn add_dep(&mut self, head: usize, rel: &str) -> bool {
        if self.deps.iter().any(|(h, r)| *h == head && r == rel) {
            return false;
        }
        let pos = self.deps.partition_point(|(h, r)| (*h, r.as_str()) < (head, rel));
        self.deps.insert(pos, (head, rel.to_owned()));
        true
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Sentence {
    pub sent_id: String,
    pub tokens: Vec<Token>,
    /// Comment lines preceding the tokens, verbatim (including `#`).
    pub comments: Vec<String>,
    /// Lines that are not tree nodes, each paired with the number of
    /// regular tokens that precede it.
    pub opaque: Vec<(usize, String)>,
}

impl Sentence {
    /// Build a sentence from tokens and check the tree invariants.
    pub fn new(sent_id: &str, tokens: Vec<Token>) -> Result<Self, TreebankError> {
        let sentence = Sentence {
            sent_id: sent_id.to_owned(),
            tokens,
            comments: vec![format!("# sent_id = {sent_id}")],
            opaque: Vec::new(),
        };
        sentence.validate()?;
        Ok(sentence)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Token by 1-based index.
    pub fn token(&self, index: usize) -> Result<&Token, TreebankError> {
        if index == 0 || index > self.tokens.len() {
            return Err(TreebankError::Range { index, len: self.tokens.len() });
        }
        Ok(&self.tokens[index - 1])
    }

    pub fn forms(&self) -> Vec<String> {
        self.tokens.iter().map(|t| t.form.clone()).collect()
    }

    /// Children of `head` (0 is the virtual root) in token order.
    pub fn children(&self, head: usize) -> impl Iterator<Item = &Token> {
        self.tokens.iter().filter(move |t| t.head == head)
    }

    /// Children of `head` whose relation matches any of `patterns`.
    pub fn children_by_relation(
        &self,
        head: usize,
        patterns: &[RelPattern],
    ) -> Result<Vec<(usize, &str)>, TreebankError> {
        if head > self.tokens.len() {
            return Err(TreebankError::Range { index: head, len: self.tokens.len() });
        }
        Ok(self
            .children(head)
            .filter(|t| patterns.iter().any(|p| p.matches(&t.deprel)))
            .map(|t| (t.id, t.deprel.as_str()))
            .collect())
    }

    /// Whether `node` lies in the subtree rooted at `root`.
    pub fn dominates(&self, root: usize, mut node: usize) -> bool {
        // The tree is acyclic, so at most `len` steps reach the root.
        for _ in 0..=self.tokens.len() {
            if node == root {
                return true;
            }
            if node == 0 {
                return false;
            }
            node = self.tokens[node - 1].head;
        }
        false
    }

    /// Indices of the subtree rooted at `root` (inclusive), ascending.
    pub fn subtree(&self, root: usize) -> Vec<usize> {
        (1..=self.tokens.len()).filter(|&i| self.dominates(root, i)).collect()
    }

    /// Projection `(min, max)` of the subtree rooted at `root`.
    pub fn subtree_span(&self, root: usize) -> (usize, usize) {
        let nodes = self.subtree(root);
        (nodes[0], nodes[nodes.len() - 1])
    }

    /// Check ids, head ranges, enhanced arcs and the tree shape.
    pub fn validate(&self) -> Result<(), TreebankError> {
        let n = self.tokens.len();
        let structure = |reason: String| TreebankError::Structure { sent_id: self.sent_id.clone(), reason };
        if n == 0 {
            return Err(structure("sentence has no tokens".to_owned()));
        }
        let mut roots = 0;
        for (i, token) in self.tokens.iter().enumerate() {
            if token.id != i + 1 {
                return Err(structure(format!("token ids not contiguous: expected {}, found {}", i + 1, token.id)));
            }
            if token.head > n {
                return Err(structure(format!(
                    "token {} has head {} beyond sentence length {n}",
                    token.id, token.head
                )));
            }
            if token.head == token.id {
                return Err(structure(format!("token {} is its own head", token.id)));
            }
            if token.head == 0 {
                roots += 1;
            }
            for (head, rel) in &token.deps {
                if *head > n || rel.is_empty() {
                    return Err(structure(format!("token {} has invalid enhanced arc {head}:{rel}", token.id)));
                }
            }
        }
        if roots != 1 {
            return Err(structure(format!("expected exactly one root, found {roots}")));
        }
        for token in &self.tokens {
            if !self.dominates(0, token.id) {
                return Err(structure(format!("token {} does not reach the root (cycle)", token.id)));
            }
        }
        Ok(())
    }
}

/// Relation rename table applied at parse time.
///
/// An exact entry wins; otherwise the base of a subtyped relation is
/// looked up (`obl` → `nmod` turns `obl:to` into `nmod:to`).
#[derive(Clone, Debug, Default)]
pub struct RelationRenames {
    table: HashMap<String, String>,
}

impl RelationRenames {
    pub fn new<I, S>(pairs: I) -> Self
    where
        I: IntoIterator<Item = (S, S)>,
        S: Into<String>,
    {
        RelationRenames { table: pairs.into_iter().map(|(from, to)| (from.into(), to.into())).collect() }
    }

    /// UDv2 → UDv1 renames for the relations this toolkit reads.
    pub fn udv2_to_udv1() -> Self {
        RelationRenames::new([
            ("obj", "dobj"),
            ("obl", "nmod"),
            ("nsubj:pass", "nsubjpass"),
            ("csubj:pass", "csubjpass"),
            ("aux:pass", "auxpass"),
        ])
    }

    pub fn rename(&self, rel: &str) -> String {
        if let Some(to) = self.table.get(rel) {
            return to.clone();
        }
        if let Some((base, subtype)) = rel.split_once(':') {
            if let Some(to) = self.table.get(base) {
                return format!("{to}:{subtype}");
            }
        }
        rel.to_owned()
    }
}

#[derive(Clone, Debug, Default)]
pub struct ParseOptions {
    pub renames: Option<RelationRenames>,
}

enum IdColumn {
    Word(usize),
    Opaque,
}

fn parse_id(field: &str, line: usize) -> Result<IdColumn, TreebankError> {
    if field.contains('-') || field.contains('.') {
        return Ok(IdColumn::Opaque);
    }
    field
        .parse::<usize>()
        .ok()
        .filter(|&id| id >= 1)
        .map(IdColumn::Word)
        .ok_or_else(|| TreebankError::Malformed { line, reason: format!("invalid token id {field:?}") })
}

fn parse_deps(field: &str, line: usize) -> Result<Vec<(usize, String)>, TreebankError> {
    if field == "_" {
        return Ok(Vec::new());
    }
    let mut deps = Vec::new();
    for arc in field.split('|') {
        let (head, rel) = arc.split_once(':').ok_or_else(|| TreebankError::Malformed {
            line,
            reason: format!("enhanced arc {arc:?} is not head:rel"),
        })?;
        let head = head.parse::<usize>().map_err(|_| TreebankError::Malformed {
            line,
            reason: format!("enhanced arc head {head:?} is not a token index"),
        })?;
        if rel.is_empty() {
            return Err(TreebankError::Malformed {
                line,
                reason: format!("enhanced arc {arc:?} has an empty relation"),
            });
        }
        deps.push((head, rel.to_owned()));
    }
    deps.sort();
    Ok(deps)
}

fn parse_misc(field: &str) -> Vec<(String, Option<String>)> {
    if field == "_" {
        return Vec::new();
    }
    field
        .split('|')
        .map(|entry| match entry.split_once('=') {
            Some((k, v)) => (k.to_owned(), Some(v.to_owned())),
            None => (entry.to_owned(), None),
        })
        .collect()
}

fn parse_token(fields: &[&str], id: usize, line: usize, opts: &ParseOptions) -> Result<Token, TreebankError> {
    let head = fields[6]
        .parse::<usize>()
        .map_err(|_| TreebankError::Malformed { line, reason: format!("invalid head {:?}", fields[6]) })?;
    if fields[7].is_empty() || fields[7] == "_" {
        return Err(TreebankError::Malformed { line, reason: "missing dependency relation".to_owned() });
    }
    let rename = |rel: &str| match &opts.renames {
        Some(table) => table.rename(rel),
        None => rel.to_owned(),
    };
    let mut deps = parse_deps(fields[8], line)?;
    for (_, rel) in deps.iter_mut() {
        *rel = rename(rel);
    }
    deps.sort();
    Ok(Token {
        id,
        form: fields[1].to_owned(),
        lemma: fields[2].to_owned(),
        upos: fields[3].to_owned(),
        xpos: fields[4].to_owned(),
        feats: fields[5].to_owned(),
        head,
        deprel: rename(fields[7]),
        deps,
        misc: parse_misc(fields[9]),
    })
}

#[derive(Default)]
struct Pending {
    comments: Vec<String>,
    tokens: Vec<Token>,
    opaque: Vec<(usize, String)>,
}

impl Pending {
    fn is_empty(&self) -> bool {
        self.comments.is_empty() && self.tokens.is_empty() && self.opaque.is_empty()
    }

    fn finish(self, ordinal: usize, line: usize) -> Result<Sentence, TreebankError> {
        let sent_id = self
            .comments
            .iter()
            .find_map(|c| {
                c.strip_prefix('#')
                    .map(str::trim_start)
                    .and_then(|c| c.strip_prefix("sent_id"))
                    .map(str::trim_start)
                    .and_then(|c| c.strip_prefix('='))
                    .map(|id| id.trim().to_owned())
            })
            .unwrap_or_else(|| format!("s{ordinal}"));
        if self.tokens.is_empty() {
            return Err(TreebankError::Malformed { line, reason: format!("sentence {sent_id} has no tokens") });
        }
        let sentence = Sentence { sent_id, tokens: self.tokens, comments: self.comments, opaque: self.opaque };
        sentence.validate()?;
        Ok(sentence)
    }
}

/// Parse a CoNLL-U stream.
pub fn parse_conllu<R: BufRead>(reader: R, opts: &ParseOptions) -> Result<Vec<Sentence>, TreebankError> {
    let mut sentences = Vec::new();
    let mut pending = Pending::default();
    let mut last_line = 0;

    for (idx, raw) in reader.lines().enumerate() {
        let line_no = idx + 1;
        last_line = line_no;
        let raw = raw?;
        let line = raw.strip_suffix('\r').unwrap_or(&raw);

        if line.trim().is_empty() {
            if !pending.is_empty() {
                let done = std::mem::take(&mut pending);
                sentences.push(done.finish(sentences.len() + 1, line_no)?);
            }
            continue;
        }

        if line.starts_with('#') {
            if pending.tokens.is_empty() && pending.opaque.is_empty() {
                pending.comments.push(line.to_owned());
            } else {
                pending.opaque.push((pending.tokens.len(), line.to_owned()));
            }
            continue;
        }

        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 10 {
            return Err(TreebankError::Malformed {
                line: line_no,
                reason: format!("expected 10 tab-separated columns, found {}", fields.len()),
            });
        }
        match parse_id(fields[0], line_no)? {
            IdColumn::Opaque => pending.opaque.push((pending.tokens.len(), line.to_owned())),
            IdColumn::Word(id) => {
                let expected = pending.tokens.len() + 1;
                if id != expected {
                    return Err(TreebankError::Malformed {
                        line: line_no,
                        reason: format!("expected token id {expected}, found {id}"),
                    });
                }
                pending.tokens.push(parse_token(&fields, id, line_no, opts)?);
            }
        }
    }
    if !pending.is_empty() {
        sentences.push(pending.finish(sentences.len() + 1, last_line)?);
    }
    Ok(sentences)
}

pub fn parse_conllu_str(text: &str, opts: &ParseOptions) -> Result<Vec<Sentence>, TreebankError> {
    parse_conllu(text.as_bytes(), opts)
}

fn token_line(token: &Token) -> String {
    let deps = if token.deps.is_empty() {
        "_".to_owned()
    } else {
        let mut sorted: Vec<&(usize, String)> = token.deps.iter().collect();
        sorted.sort();
        sorted.iter().map(|(h, r)| format!("{h}:{r}")).collect::<Vec<_>>().join("|")
    };
    let misc = if token.misc.is_empty() {
        "_".to_owned()
    } else {
        token
            .misc
            .iter()
            .map(|(k, v)| match v {
                Some(v) => format!("{k}={v}"),
                None => k.clone(),
            })
            .collect::<Vec<_>>()
            .join("|")
    };
    format!(
        "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
        token.id, token.form, token.lemma, token.upos, token.xpos, token.feats, token.head, token.deprel, deps, misc
    )
}

/// Render one sentence block, including its trailing blank line.
pub fn sentence_to_string(sentence: &Sentence) -> String {
    let mut out = String::new();
    for comment in &sentence.comments {
        out.push_str(comment);
        out.push('\n');
    }
    let mut opaque = sentence.opaque.iter().peekable();
    for (i, token) in sentence.tokens.iter().enumerate() {
        while let Some((_, line)) = opaque.next_if(|(pos, _)| *pos <= i) {
            out.push_str(line);
            out.push('\n');
        }
        let _ = writeln!(out, "{}", token_line(token));
    }
    for (_, line) in opaque {
        out.push_str(line);
        out.push('\n');
    }
    out.push('\n');
    out
}

pub fn write_conllu<W: Write>(mut writer: W, sentences: &[Sentence]) -> io::Result<()> {
    for sentence in sentences {
        writer.write_all(sentence_to_string(sentence).as_bytes())?;
    }
    Ok(())
}

pub fn serialize_conllu(sentences: &[Sentence]) -> String {
    sentences.iter().map(sentence_to_string).collect()
}
