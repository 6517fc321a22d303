//! Gold data, dataset builders, metrics and perturbations for evaluating
//! argument labeling.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;
use std::io::{self, BufRead, Write};

use log::warn;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embedstore::{EmbedError, EmbeddingStore};
use crate::identify::{find_noun_instances, Candidate};
use crate::label::{Enrichment, EnrichmentRecord, LabelError, PairRecord};
use crate::lexicon::{match_patterns, Lexicon};
use crate::refbank::RefBank;
use crate::relation::Label;
use crate::treebank::{Sentence, Token};

/// Key used for the ∅ row of per-relation tables.
pub const NULL_ROW: &str = "∅";
pub const NOMLEX_PER_VERB_CAP: usize = 25;
pub const TUNE_RATIO: f64 = 0.2;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("alignment error: {0}")]
    Alignment(String),

    #[error("unsupported instance {sent_id}: {reason}")]
    Unsupported { sent_id: String, reason: String },

    #[error("invalid argument: {0}")]
    Config(String),

    #[error("line {line}: {source}")]
    Json {
        line: usize,
        #[source]
        source: serde_json::Error,
    },

    #[error(transparent)]
    Label(#[from] LabelError),

    #[error(transparent)]
    Embedding(#[from] EmbedError),

    #[error(transparent)]
    Io(#[from] io::Error),
}

/// A noun instance with gold `(label, head)` pairs.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldInstance {
    pub sent_id: String,
    pub tokens: Vec<String>,
    pub noun: usize,
    #[serde(rename = "verb")]
    pub verb_lemma: String,
    #[serde(with = "pair_list")]
    pub gold: Vec<(Label, usize)>,
}

mod pair_list {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use crate::label::PairRecord;
    use crate::relation::Label;

    pub fn serialize<S: Serializer>(pairs: &[(Label, usize)], s: S) -> Result<S::Ok, S::Error> {
        pairs
            .iter()
            .map(|(label, head)| PairRecord { label: label.clone(), head: *head })
            .collect::<Vec<_>>()
            .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<(Label, usize)>, D::Error> {
        Ok(Vec::<PairRecord>::deserialize(d)?.into_iter().map(|p| (p.label, p.head)).collect())
    }
}

impl GoldInstance {
    pub fn key(&self) -> (String, usize) {
        (self.sent_id.clone(), self.noun)
    }

    /// Gold pairs as a checked enrichment.
    pub fn enrichment(&self) -> Result<Enrichment, LabelError> {
        Enrichment::new(self.noun, self.gold.clone())
    }
}

/// A predicted enrichment for the instance `(sent_id, noun)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Prediction {
    pub sent_id: String,
    pub enrichment: Enrichment,
}

impl Prediction {
    pub fn key(&self) -> (String, usize) {
        (self.sent_id.clone(), self.enrichment.noun)
    }
}

#[derive(Deserialize)]
struct PredictionLine {
    sent_id: String,
    noun: usize,
    #[serde(alias = "gold")]
    pairs: Vec<PairRecord>,
}

fn parse_jsonl<T, R>(reader: R) -> Result<Vec<T>, EvalError>
where
    T: for<'de> Deserialize<'de>,
    R: BufRead,
{
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|source| EvalError::Json { line: i + 1, source })?);
    }
    Ok(out)
}

pub fn read_gold<R: BufRead>(reader: R) -> Result<Vec<GoldInstance>, EvalError> {
    let gold: Vec<GoldInstance> = parse_jsonl(reader)?;
    for instance in &gold {
        instance.enrichment()?;
    }
    Ok(gold)
}

pub fn write_gold<W: Write>(mut writer: W, gold: &[GoldInstance]) -> io::Result<()> {
    for instance in gold {
        serde_json::to_writer(&mut writer, instance)?;
        writer.write_all(b"\n")?;
    }
    writer.flush()
}

/// Read predictions from enrichment JSONL; gold JSONL is accepted too.
pub fn read_predictions<R: BufRead>(reader: R) -> Result<Vec<Prediction>, EvalError> {
    parse_jsonl::<PredictionLine, _>(reader)?
        .into_iter()
        .map(|line| {
            let enrichment = Enrichment::new(line.noun, line.pairs.into_iter().map(|p| (p.label, p.head)).collect())?;
            Ok(Prediction { sent_id: line.sent_id, enrichment })
        })
        .collect()
}

pub fn write_predictions<W: Write>(mut writer: W, predictions: &[Prediction]) -> io::Result<()> {
    for p in predictions {
        let record = EnrichmentRecord {
            sent_id: p.sent_id.clone(),
            noun: p.enrichment.noun,
            verb: None,
            pairs: p
                .enrichment
                .pairs()
                .iter()
                .map(|(label, head)| PairRecord { label: label.clone(), head: *head })
                .collect(),
            scores: BTreeMap::new(),
            coordinated: Vec::new(),
        };
        serde_json::to_writer(&mut writer, &record)?;
        writer.write_all(b"\n")?;
    }
    writer.flush()
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct RelationRow {
    pub support: usize,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Precision, recall and F1 from counts. An empty side is scored 0
/// unless both sides are empty, which counts as perfect agreement.
fn prf(tp: usize, predicted: usize, gold: usize) -> (f64, f64, f64) {
    let ratio = |num: usize, den: usize, other: usize| {
        if den > 0 {
            num as f64 / den as f64
        } else if other == 0 {
            1.0
        } else {
            0.0
        }
    };
    let p = ratio(tp, predicted, gold);
    let r = ratio(tp, gold, predicted);
    let f = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
    (p, r, f)
}

impl RelationRow {
    fn from_counts(tp: usize, predicted: usize, gold: usize) -> Self {
        let (precision, recall, f1) = prf(tp, predicted, gold);
        RelationRow { support: gold, tp, fp: predicted - tp, fn_: gold - tp, precision, recall, f1 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EvalReport {
    pub instances: usize,
    pub precision: f64,
    pub recall: f64,
    pub relation_f1: f64,
    pub exact_match: f64,
    pub per_relation: BTreeMap<String, RelationRow>,
}

impl EvalReport {
    /// Aligned plain-text rendering (scores in percent).
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "instances     {}", self.instances);
        let _ = writeln!(out, "precision     {:6.2}", 100.0 * self.precision);
        let _ = writeln!(out, "recall        {:6.2}", 100.0 * self.recall);
        let _ = writeln!(out, "relation-f1   {:6.2}", 100.0 * self.relation_f1);
        let _ = writeln!(out, "exact-match   {:6.2}", 100.0 * self.exact_match);
        if self.per_relation.is_empty() {
            return out;
        }
        let width = self.per_relation.keys().map(|k| k.chars().count()).max().unwrap_or(0).max("relation".len());
        let _ = writeln!(out, "\n{:<width$}  {:>7}  {:>6}  {:>6}  {:>6}", "relation", "support", "P", "R", "F1");
        let mut rows: Vec<(&String, &RelationRow)> = self.per_relation.iter().collect();
        rows.sort_by(|a, b| b.1.support.cmp(&a.1.support).then(a.0.cmp(b.0)));
        for (name, row) in rows {
            let pad = width - name.chars().count() + name.len();
            let _ = writeln!(
                out,
                "{:<pad$}  {:>7}  {:6.2}  {:6.2}  {:6.2}",
                name,
                row.support,
                100.0 * row.precision,
                100.0 * row.recall,
                100.0 * row.f1
            );
        }
        out
    }
}

/// Pair every gold instance with its prediction (empty when absent).
fn align<'a>(
    gold: &'a [GoldInstance],
    pred: &'a [Prediction],
) -> Result<Vec<(&'a GoldInstance, Option<&'a Enrichment>)>, EvalError> {
    let mut by_key: HashMap<(String, usize), &Enrichment> = HashMap::new();
    for p in pred {
        if by_key.insert(p.key(), &p.enrichment).is_some() {
            return Err(EvalError::Alignment(format!(
                "duplicate prediction for {} noun {}",
                p.sent_id, p.enrichment.noun
            )));
        }
    }
    let mut seen = BTreeSet::new();
    let mut aligned = Vec::with_capacity(gold.len());
    for g in gold {
        if !seen.insert(g.key()) {
            return Err(EvalError::Alignment(format!("duplicate gold instance {} noun {}", g.sent_id, g.noun)));
        }
        aligned.push((g, by_key.remove(&g.key())));
    }
    if let Some(((sent_id, noun), _)) = by_key.into_iter().min_by(|a, b| a.0.cmp(&b.0)) {
        return Err(EvalError::Alignment(format!("prediction {sent_id} noun {noun} has no gold instance")));
    }
    Ok(aligned)
}

/// Relation-F1 (micro-pooled, label and head must both match),
/// Exact-Match, and per-label rows.
pub fn score(gold: &[GoldInstance], pred: &[Prediction]) -> Result<EvalReport, EvalError> {
    let aligned = align(gold, pred)?;
    let (mut tp, mut n_pred, mut n_gold, mut exact) = (0, 0, 0, 0);
    let mut per_label: BTreeMap<Label, (usize, usize, usize)> = BTreeMap::new();
    for (g, p) in &aligned {
        let gold_set: BTreeSet<&(Label, usize)> = g.gold.iter().collect();
        let pred_set: BTreeSet<&(Label, usize)> = p.map(|e| e.pairs().iter().collect()).unwrap_or_default();
        let hits = gold_set.intersection(&pred_set).count();
        tp += hits;
        n_pred += pred_set.len();
        n_gold += gold_set.len();
        if gold_set == pred_set {
            exact += 1;
        }
        for (label, _) in &gold_set {
            per_label.entry(label.clone()).or_default().2 += 1;
        }
        for pair in &pred_set {
            let row = per_label.entry(pair.0.clone()).or_default();
            row.1 += 1;
            if gold_set.contains(pair) {
                row.0 += 1;
            }
        }
    }
    let (precision, recall, relation_f1) = prf(tp, n_pred, n_gold);
    let exact_match = if aligned.is_empty() { 0.0 } else { exact as f64 / aligned.len() as f64 };
    Ok(EvalReport {
        instances: aligned.len(),
        precision,
        recall,
        relation_f1,
        exact_match,
        per_relation: per_label
            .into_iter()
            .map(|(label, (tp, p, g))| (label.to_string(), RelationRow::from_counts(tp, p, g)))
            .collect(),
    })
}

/// Per-label rows plus the ∅ row. `identified` holds the candidate heads
/// used at prediction time for each `(sent_id, noun)`. Gold-∅ are
/// candidates absent from the gold pairs; predicted-∅ are candidates
/// that received no label.
pub fn per_relation_report(
    gold: &[GoldInstance],
    pred: &[Prediction],
    identified: &HashMap<(String, usize), Vec<usize>>,
) -> Result<BTreeMap<String, RelationRow>, EvalError> {
    let mut rows = score(gold, pred)?.per_relation;
    let aligned = align(gold, pred)?;
    let (mut tp, mut n_pred, mut n_gold) = (0, 0, 0);
    for (g, p) in aligned {
        let Some(candidates) = identified.get(&g.key()) else {
            continue;
        };
        let gold_heads: BTreeSet<usize> = g.gold.iter().map(|(_, h)| *h).collect();
        let pred_heads: BTreeSet<usize> = p.map(|e| e.pairs().iter().map(|(_, h)| *h).collect()).unwrap_or_default();
        let gold_null: BTreeSet<usize> = candidates.iter().copied().filter(|h| !gold_heads.contains(h)).collect();
        let pred_null: BTreeSet<usize> = candidates.iter().copied().filter(|h| !pred_heads.contains(h)).collect();
        tp += gold_null.intersection(&pred_null).count();
        n_pred += pred_null.len();
        n_gold += gold_null.len();
    }
    if n_pred > 0 || n_gold > 0 {
        rows.insert(NULL_ROW.to_owned(), RelationRow::from_counts(tp, n_pred, n_gold));
    }
    Ok(rows)
}

/// Label every candidate with `label`; only the first in token order
/// keeps it so the output stays a valid enrichment.
pub fn baseline_all(label: &Label, noun: usize, candidates: &[Candidate]) -> Enrichment {
    let first = candidates.iter().map(|c| c.head).min();
    Enrichment::new(noun, first.map(|h| (label.clone(), h)).into_iter().collect()).expect("single pair")
}

/// Gold instances from lexicon patterns: instances whose fulfilled
/// patterns disagree are discarded, only instances with exactly two
/// labeled arguments are kept, at most `per_verb_cap` per verb.
pub fn build_nomlex_evalset(corpus: &[Sentence], lexicon: &Lexicon, per_verb_cap: usize) -> Vec<GoldInstance> {
    let mut per_verb: HashMap<String, usize> = HashMap::new();
    let mut out = Vec::new();
    for sentence in corpus {
        for instance in find_noun_instances(sentence, lexicon) {
            let count = per_verb.entry(instance.verb_lemma.to_owned()).or_insert(0);
            if *count >= per_verb_cap {
                continue;
            }
            let entry = lexicon
                .get(&sentence.tokens[instance.noun - 1].lemma.to_lowercase())
                .expect("instance comes from the lexicon");
            let matches = match_patterns(entry, sentence, instance.noun);
            if matches.is_empty() {
                continue;
            }
            let Some(pairs) = agreed_assignment(matches.iter().flat_map(|m| &m.bindings)) else {
                continue;
            };
            if pairs.len() != 2 {
                continue;
            }
            *count += 1;
            out.push(GoldInstance {
                sent_id: sentence.sent_id.clone(),
                tokens: sentence.forms(),
                noun: instance.noun,
                verb_lemma: instance.verb_lemma.to_owned(),
                gold: pairs,
            });
        }
    }
    out
}

/// Union of bindings, or `None` if any head gets two roles or any label
/// two heads.
fn agreed_assignment<'a, I>(bindings: I) -> Option<Vec<(Label, usize)>>
where
    I: Iterator<Item = &'a crate::lexicon::Binding>,
{
    let mut head_label: BTreeMap<usize, Option<Label>> = BTreeMap::new();
    let mut label_head: BTreeMap<Label, usize> = BTreeMap::new();
    for binding in bindings {
        let label = binding.label();
        match head_label.get(&binding.head) {
            Some(existing) if *existing != label => return None,
            _ => {
                head_label.insert(binding.head, label.clone());
            }
        }
        if let Some(label) = label {
            match label_head.get(&label) {
                Some(&h) if h != binding.head => return None,
                _ => {
                    label_head.insert(label, binding.head);
                }
            }
        }
    }
    let mut pairs: Vec<(Label, usize)> = label_head.into_iter().collect();
    pairs.sort_by_key(|(_, h)| *h);
    Some(pairs)
}

/// One row of a nominal→verbal paraphrase annotation.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParaphraseRow {
    pub sent_id: String,
    /// Surface form of the deverbal noun.
    pub nominalization: String,
    /// 1-based noun index, when known.
    #[serde(default)]
    pub noun: Option<usize>,
    pub verb: String,
    #[serde(default)]
    pub adj_noun: Option<String>,
    #[serde(default)]
    pub prep: Option<String>,
    #[serde(default)]
    pub pobj: Option<String>,
    #[serde(default)]
    pub arg0: Option<String>,
    #[serde(default)]
    pub arg1: Option<String>,
    #[serde(default)]
    pub pp: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
enum VerbalSlot {
    Arg1,
    Arg0,
    Pp,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DroppedRow {
    pub row: usize,
    pub sent_id: String,
    pub reason: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Conversion {
    pub instances: Vec<GoldInstance>,
    pub dropped: Vec<DroppedRow>,
}

fn normalize(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

/// Closest verbal slot by normalized edit distance; ties favor arg1,
/// then arg0. The pp slot is compared with the preposition included.
fn closest_slot(row: &ParaphraseRow, nominal: &str, prep: Option<&str>) -> Option<VerbalSlot> {
    let slots = [
        (VerbalSlot::Arg1, row.arg1.as_deref()),
        (VerbalSlot::Arg0, row.arg0.as_deref()),
        (VerbalSlot::Pp, row.pp.as_deref()),
    ];
    let mut best: Option<(VerbalSlot, f64)> = None;
    for (slot, text) in slots {
        let Some(text) = text.filter(|t| !t.trim().is_empty()) else {
            continue;
        };
        let nominal_text = match (slot, prep) {
            (VerbalSlot::Pp, Some(p)) => format!("{p} {nominal}"),
            _ => nominal.to_owned(),
        };
        let sim = strsim::normalized_levenshtein(&normalize(&nominal_text), &normalize(text));
        if best.is_none_or(|(_, b)| sim > b) {
            best = Some((slot, sim));
        }
    }
    best.map(|(slot, _)| slot)
}

fn token_matches(token: &Token, word: &str) -> bool {
    token.form.to_lowercase() == word
}

/// Head of the occurrence of `phrase` nearest to the noun: the span token
/// whose parent lies outside the span.
fn locate_head(sentence: &Sentence, phrase: &str, noun: usize) -> Result<usize, String> {
    let words: Vec<String> = normalize(phrase).split(' ').map(str::to_owned).collect();
    if words.is_empty() || words[0].is_empty() {
        return Err("empty component".to_owned());
    }
    let n = sentence.len();
    let best_start = (1..=n.saturating_sub(words.len() - 1))
        .filter(|&start| words.iter().enumerate().all(|(i, w)| token_matches(&sentence.tokens[start + i - 1], w)))
        .filter(|&start| !(start..start + words.len()).contains(&noun))
        .min_by_key(|&start| {
            let end = start + words.len() - 1;
            if end < noun {
                noun - end
            } else {
                start - noun
            }
        })
        .ok_or_else(|| format!("component {phrase:?} not found in sentence"))?;
    let span = best_start..best_start + words.len();
    let roots: Vec<usize> = span.clone().filter(|&i| !span.contains(&sentence.tokens[i - 1].head)).collect();
    if roots.len() > 1 {
        warn!(
            "sentence {}: component {phrase:?} has {} roots, choosing the noun's dependent if any",
            sentence.sent_id,
            roots.len()
        );
    }
    Ok(roots.iter().copied().find(|&i| sentence.tokens[i - 1].head == noun).unwrap_or(roots[0]))
}

fn convert_row(row: &ParaphraseRow, sentence: &Sentence) -> Result<GoldInstance, String> {
    let noun = match row.noun {
        Some(i) if (1..=sentence.len()).contains(&i) => i,
        Some(i) => return Err(format!("noun index {i} out of range")),
        None => {
            let form = row.nominalization.to_lowercase();
            sentence
                .tokens
                .iter()
                .find(|t| token_matches(t, &form))
                .map(|t| t.id)
                .ok_or_else(|| format!("nominalization {:?} not found", row.nominalization))?
        }
    };
    let mut components: Vec<(&str, Option<&str>)> = Vec::new();
    if let Some(adj) = row.adj_noun.as_deref().filter(|s| !s.trim().is_empty()) {
        components.push((adj, None));
    }
    if let Some(pobj) = row.pobj.as_deref().filter(|s| !s.trim().is_empty()) {
        components.push((pobj, row.prep.as_deref().filter(|s| !s.trim().is_empty())));
    }
    if components.is_empty() {
        return Err("no nominal components".to_owned());
    }
    let mut used = BTreeSet::new();
    let mut gold = Vec::new();
    for (text, prep) in components {
        let slot = closest_slot(row, text, prep).ok_or("no verbal components")?;
        if !used.insert(slot) {
            return Err("two nominal components map to one verbal component".to_owned());
        }
        let label = match slot {
            VerbalSlot::Arg0 => Label::Nsubj,
            VerbalSlot::Arg1 => Label::Dobj,
            VerbalSlot::Pp => {
                let pp = row.pp.as_deref().unwrap_or_default();
                let lead = pp.split_whitespace().next().ok_or("empty pp component")?;
                Label::Nmod(lead.to_lowercase())
            }
        };
        gold.push((label, locate_head(sentence, text, noun)?));
    }
    let enrichment = Enrichment::new(noun, gold).map_err(|e| e.to_string())?;
    Ok(GoldInstance {
        sent_id: sentence.sent_id.clone(),
        tokens: sentence.forms(),
        noun,
        verb_lemma: row.verb.to_lowercase(),
        gold: enrichment.pairs().to_vec(),
    })
}

/// Convert paraphrase annotations into gold instances. Rows whose two
/// nominal components map to the same verbal component, repeated
/// nominal phrases, and rows that cannot be located in their sentence
/// are dropped with a reason.
pub fn convert_paraphrase_dataset(rows: &[ParaphraseRow], sentences: &[Sentence]) -> Conversion {
    let by_id: HashMap<&str, &Sentence> = sentences.iter().map(|s| (s.sent_id.as_str(), s)).collect();
    let mut seen_phrases = BTreeSet::new();
    let mut out = Conversion::default();
    for (i, row) in rows.iter().enumerate() {
        let phrase = normalize(
            &[row.adj_noun.as_deref(), Some(row.nominalization.as_str()), row.prep.as_deref(), row.pobj.as_deref()]
                .iter()
                .flatten()
                .copied()
                .collect::<Vec<_>>()
                .join(" "),
        );
        let result = match by_id.get(row.sent_id.as_str()) {
            None => Err("sentence not in parsed corpus".to_owned()),
            Some(_) if seen_phrases.contains(&phrase) => Err(format!("repeated nominal phrase {phrase:?}")),
            Some(sentence) => convert_row(row, sentence),
        };
        match result {
            Ok(instance) => {
                seen_phrases.insert(phrase);
                out.instances.push(instance);
            }
            Err(reason) => {
                warn!("paraphrase row {i} ({}): dropped, {reason}", row.sent_id);
                out.dropped.push(DroppedRow { row: i, sent_id: row.sent_id.clone(), reason });
            }
        }
    }
    out
}

/// Verbs routed wholly to one side of a split; all others are shared.
#[derive(Clone, Debug, Default)]
pub struct VerbPartition {
    pub tune_only: BTreeSet<String>,
    pub test_only: BTreeSet<String>,
}

/// Seeded tune/test split. Shared instances are shuffled and
/// `round(ratio * n)` go to tune. Both outputs keep input order.
pub fn tune_test_split(
    instances: &[GoldInstance],
    ratio: f64,
    seed: u64,
    partition: Option<&VerbPartition>,
) -> Result<(Vec<GoldInstance>, Vec<GoldInstance>), EvalError> {
    if !(0.0..=1.0).contains(&ratio) {
        return Err(EvalError::Config(format!("split ratio {ratio} outside [0, 1]")));
    }
    let mut to_tune = vec![false; instances.len()];
    let mut shared = Vec::new();
    for (i, instance) in instances.iter().enumerate() {
        match partition {
            Some(p) if p.tune_only.contains(&instance.verb_lemma) => to_tune[i] = true,
            Some(p) if p.test_only.contains(&instance.verb_lemma) => {}
            _ => shared.push(i),
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    shared.shuffle(&mut rng);
    let n_tune = (ratio * shared.len() as f64).round() as usize;
    for &i in &shared[..n_tune] {
        to_tune[i] = true;
    }
    let (tune, test): (Vec<_>, Vec<_>) = instances.iter().cloned().zip(to_tune).partition(|(_, tune)| *tune);
    Ok((tune.into_iter().map(|(g, _)| g).collect(), test.into_iter().map(|(g, _)| g).collect()))
}

const SWAP_TRIM: &[&str] = &["case", "det", "punct", "cc", "mark"];

/// Span of an argument without function-word dependents at its edges.
fn content_span(sentence: &Sentence, head: usize, sent_id: &str) -> Result<(usize, usize), EvalError> {
    let (mut start, mut end) = sentence.subtree_span(head);
    let subtree = sentence.subtree(head);
    if subtree.len() != end - start + 1 {
        return Err(EvalError::Unsupported {
            sent_id: sent_id.to_owned(),
            reason: format!("argument {head} has a discontinuous subtree"),
        });
    }
    let trimmable = |i: usize| {
        let t = &sentence.tokens[i - 1];
        t.head == head && SWAP_TRIM.contains(&t.deprel.as_str())
    };
    while start < head && trimmable(start) {
        start += 1;
    }
    while end > head && trimmable(end) {
        end -= 1;
    }
    Ok((start, end))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SwappedInstance {
    pub instance: GoldInstance,
    /// The reordered parse, for re-embedding. Multiword-token and
    /// empty-node lines are not carried over.
    pub sentence: Sentence,
}

/// Exchange the sentence positions of the two gold arguments (their
/// content spans, without edge function words). The argument words move
/// while each position keeps its attachment and function words, so
/// "Rome 's destruction of the city" becomes "city 's destruction of
/// the Rome". Gold pairs follow their words.
pub fn swap_arguments(instance: &GoldInstance, sentence: &Sentence) -> Result<SwappedInstance, EvalError> {
    let unsupported = |reason: String| EvalError::Unsupported { sent_id: instance.sent_id.clone(), reason };
    if instance.gold.len() != 2 {
        return Err(unsupported(format!("{} gold arguments, swapping needs exactly two", instance.gold.len())));
    }
    if sentence.sent_id != instance.sent_id || sentence.len() != instance.tokens.len() {
        return Err(EvalError::Alignment(format!(
            "parse {} does not match instance {}",
            sentence.sent_id, instance.sent_id
        )));
    }
    let mut spans = [
        content_span(sentence, instance.gold[0].1, &instance.sent_id)?,
        content_span(sentence, instance.gold[1].1, &instance.sent_id)?,
    ];
    spans.sort();
    let [(a1, b1), (a2, b2)] = spans;
    if b1 >= a2 {
        return Err(unsupported("argument spans overlap".to_owned()));
    }
    if (a1..=b1).contains(&instance.noun) || (a2..=b2).contains(&instance.noun) {
        return Err(unsupported("argument span contains the noun".to_owned()));
    }

    let (h1, h2) = (instance.gold[0].1, instance.gold[1].1);
    let in_spans = |i: usize| (a1..=b1).contains(&i) || (a2..=b2).contains(&i);
    let exchange = |i: usize| match i {
        i if i == h1 => h2,
        i if i == h2 => h1,
        i => i,
    };

    // Words move, slots stay: the two heads trade attachment, and
    // function words left outside the spans follow the slot.
    let mut slotted = sentence.tokens.clone();
    for (i, t) in slotted.iter_mut().enumerate() {
        let i = i + 1;
        if i == h1 || i == h2 {
            let other = &sentence.tokens[exchange(i) - 1];
            t.head = exchange(other.head);
            t.deprel = other.deprel.clone();
            t.deps = other.deps.iter().map(|(h, r)| (exchange(*h), r.clone())).collect();
        } else if !in_spans(i) {
            t.head = exchange(t.head);
            for (h, _) in t.deps.iter_mut() {
                *h = exchange(*h);
            }
        }
    }

    // New order as old indices.
    let order: Vec<usize> =
        (1..a1).chain(a2..=b2).chain(b1 + 1..a2).chain(a1..=b1).chain(b2 + 1..=sentence.len()).collect();
    let mut new_index = vec![0usize; sentence.len() + 1];
    for (pos, &old) in order.iter().enumerate() {
        new_index[old] = pos + 1;
    }
    let tokens: Vec<Token> = order
        .iter()
        .enumerate()
        .map(|(pos, &old)| {
            let mut t = slotted[old - 1].clone();
            t.id = pos + 1;
            t.head = new_index[t.head];
            for (h, _) in t.deps.iter_mut() {
                *h = new_index[*h];
            }
            t.deps.sort();
            t
        })
        .collect();
    let perturbed =
        Sentence { sent_id: sentence.sent_id.clone(), tokens, comments: sentence.comments.clone(), opaque: Vec::new() };
    perturbed.validate().map_err(|e| unsupported(e.to_string()))?;

    let gold = Enrichment::new(
        new_index[instance.noun],
        instance.gold.iter().map(|(label, head)| (label.clone(), new_index[*head])).collect(),
    )?;
    Ok(SwappedInstance {
        instance: GoldInstance {
            sent_id: instance.sent_id.clone(),
            tokens: perturbed.forms(),
            noun: new_index[instance.noun],
            verb_lemma: instance.verb_lemma.clone(),
            gold: gold.pairs().to_vec(),
        },
        sentence: perturbed,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VectorSource {
    pub sent_id: String,
    pub token: usize,
}

/// One exported argument vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArgumentVectorRow {
    pub verb: String,
    pub label: String,
    /// `reference` (verbal bank entry) or `nominal` (labeled noun argument).
    pub kind: String,
    pub source: VectorSource,
    pub vector: Vec<f32>,
}

/// Vectors of the labeled nominal arguments in enrichment records.
pub fn nominal_argument_vectors(
    records: &[EnrichmentRecord],
    store: &EmbeddingStore,
) -> Result<Vec<ArgumentVectorRow>, EvalError> {
    let mut rows = Vec::new();
    for record in records {
        for pair in &record.pairs {
            rows.push(ArgumentVectorRow {
                verb: record.verb.clone().unwrap_or_default(),
                label: pair.label.to_string(),
                kind: "nominal".to_owned(),
                source: VectorSource { sent_id: record.sent_id.clone(), token: pair.head },
                vector: store.vector_for(&record.sent_id, pair.head)?.to_vec(),
            });
        }
    }
    Ok(rows)
}

/// Write bank references followed by `nominal` rows as JSONL; returns
/// the number of rows written.
pub fn export_argument_vectors<W: Write>(
    bank: &RefBank,
    nominal: &[ArgumentVectorRow],
    mut writer: W,
) -> Result<usize, EvalError> {
    let mut count = 0;
    for (verb, entry) in bank.verbs() {
        for arg in &entry.arguments {
            let row = ArgumentVectorRow {
                verb: verb.to_owned(),
                label: arg.label.to_string(),
                kind: "reference".to_owned(),
                source: VectorSource { sent_id: arg.source.0.clone(), token: arg.source.1 },
                vector: arg.vector.clone(),
            };
            serde_json::to_writer(&mut writer, &row).map_err(io::Error::from)?;
            writer.write_all(b"\n")?;
            count += 1;
        }
    }
    for row in nominal {
        serde_json::to_writer(&mut writer, row).map_err(io::Error::from)?;
        writer.write_all(b"\n")?;
        count += 1;
    }
    writer.flush()?;
    Ok(count)
}
