//! Labeling of argument candidates against a reference bank, and the
//! enrichment output (extra arcs in the CoNLL-U `deps` column).
//!
//! Two scorers are available. `NearestAvg` compares the candidate vector
//! with the per-label centroid of the verb's references; `KNearest` takes
//! the `k` most similar references and sums their similarities per label.
//! A candidate whose similarity never reaches the threshold gets no label
//! (∅). With `unique` set, label conflicts inside one noun instance are
//! resolved greedily: claims are processed by descending score and a
//! candidate whose preferred label is taken moves to its next one.
//! Thresholding is applied to the resolved assignment, so raising the
//! threshold can only turn labels into ∅.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embedstore::{cosine, EmbedError};
use crate::identify::{Candidate, NounInstance};
use crate::refbank::{label_centroids, query_knn, RefBank, RefBankError};
use crate::relation::{nmod_preposition, Label};
use crate::treebank::{Sentence, TreebankError};

/// Threshold tuned on paraphrasing-derived data.
pub const THRESHOLD_PARAPHRASE: f64 = 0.56;
/// Threshold tuned on lexicon-derived data (the default).
pub const THRESHOLD_NOMLEX: f64 = 0.48;
pub const DEFAULT_K: usize = 5;

#[derive(Debug, Error)]
pub enum LabelError {
    #[error("invalid labeler configuration: {0}")]
    Config(String),

    #[error("{0} candidates but {1} vectors")]
    Misaligned(usize, usize),

    #[error("enrichment of noun {noun} repeats {what}")]
    NotUnique { noun: usize, what: String },

    #[error("enrichment of noun {noun}: invalid head {head}")]
    InvalidHead { noun: usize, head: usize },

    #[error(transparent)]
    Bank(#[from] RefBankError),

    #[error(transparent)]
    Embedding(#[from] EmbedError),

    #[error(transparent)]
    Treebank(#[from] TreebankError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    NearestAvg,
    KNearest,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LabelerConfig {
    pub method: Method,
    pub k: usize,
    pub threshold: f64,
    pub unique: bool,
}

impl Default for LabelerConfig {
    fn default() -> Self {
        LabelerConfig { method: Method::KNearest, k: DEFAULT_K, threshold: THRESHOLD_NOMLEX, unique: true }
    }
}

impl LabelerConfig {
    pub fn validate(&self) -> Result<(), LabelError> {
        if self.k == 0 {
            return Err(LabelError::Config("k must be at least 1".to_owned()));
        }
        if !(-1.0..=1.0).contains(&self.threshold) {
            return Err(LabelError::Config(format!("threshold {} outside [-1, 1]", self.threshold)));
        }
        Ok(())
    }
}

/// The K `(label, head)` pairs found for one noun instance. No label and
/// no head appears twice; pairs are kept in head order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Enrichment {
    pub noun: usize,
    pairs: Vec<(Label, usize)>,
}

impl Enrichment {
    pub fn new(noun: usize, mut pairs: Vec<(Label, usize)>) -> Result<Self, LabelError> {
        let mut labels = BTreeSet::new();
        let mut heads = BTreeSet::new();
        for (label, head) in &pairs {
            if *head == 0 || *head == noun {
                return Err(LabelError::InvalidHead { noun, head: *head });
            }
            if !labels.insert(label) {
                return Err(LabelError::NotUnique { noun, what: format!("label {label}") });
            }
            if !heads.insert(*head) {
                return Err(LabelError::NotUnique { noun, what: format!("head {head}") });
            }
        }
        pairs.sort_by_key(|(_, head)| *head);
        Ok(Enrichment { noun, pairs })
    }

    pub fn empty(noun: usize) -> Self {
        Enrichment { noun, pairs: Vec::new() }
    }

    pub fn pairs(&self) -> &[(Label, usize)] {
        &self.pairs
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn from_labeled(noun: usize, labeled: &[LabeledArgument]) -> Result<Self, LabelError> {
        Enrichment::new(noun, labeled.iter().filter_map(|a| a.label.clone().map(|l| (l, a.candidate.head))).collect())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LabeledArgument {
    pub candidate: Candidate,
    /// `None` is ∅: not an argument of the noun.
    pub label: Option<Label>,
    /// Score of the assigned label; for ∅ the best score reached (0 if none).
    pub score: f64,
    /// Admissible labels with their scores, best first.
    pub alternatives: Vec<(Label, f64)>,
}

fn sort_scores(scores: &mut [(Label, f64)]) {
    scores.sort_by(|(la, sa), (lb, sb)| sb.total_cmp(sa).then_with(|| la.cmp(lb)));
}

/// Cosine of `query` with each label centroid, best first.
pub fn score_nearest_avg(
    query: &[f32],
    centroids: &BTreeMap<Label, Vec<f32>>,
) -> Result<Vec<(Label, f64)>, EmbedError> {
    let mut scores = centroids
        .iter()
        .map(|(label, c)| cosine(query, c).map(|s| (label.clone(), s)))
        .collect::<Result<Vec<_>, _>>()?;
    sort_scores(&mut scores);
    Ok(scores)
}

/// Per-label scores within the k-set: summed similarity and best single
/// similarity.
struct KnnTally {
    sums: Vec<(Label, f64)>,
    best: BTreeMap<Label, f64>,
}

fn knn_tally(query: &[f32], bank: &RefBank, verb: &str, k: usize) -> Result<KnnTally, RefBankError> {
    let mut sums: BTreeMap<Label, f64> = BTreeMap::new();
    let mut best: BTreeMap<Label, f64> = BTreeMap::new();
    for (arg, score) in query_knn(bank, verb, query, k)? {
        *sums.entry(arg.label.clone()).or_insert(0.0) += score;
        let b = best.entry(arg.label.clone()).or_insert(f64::NEG_INFINITY);
        *b = b.max(score);
    }
    let mut sums: Vec<(Label, f64)> = sums.into_iter().collect();
    sort_scores(&mut sums);
    Ok(KnnTally { sums, best })
}

/// Summed similarity per label over the `k` nearest references, best first.
pub fn score_knn(query: &[f32], bank: &RefBank, verb: &str, k: usize) -> Result<Vec<(Label, f64)>, RefBankError> {
    Ok(knn_tally(query, bank, verb, k)?.sums)
}

/// Labels a candidate may take given the relation that identified it:
/// an `nmod:Y` candidate keeps its preposition, other `nmod` forms can
/// only be nsubj or dobj.
pub fn admissible(relation: &str, label: &Label) -> bool {
    match label {
        Label::Nsubj | Label::Dobj => true,
        Label::Nmod(prep) => match nmod_preposition(relation) {
            Some(own) => own == prep,
            None if relation == "nmod:poss" => true,
            None => relation != "nmod" && !relation.starts_with("nmod:"),
        },
    }
}

/// Ranked alternatives of one candidate, each with the value compared
/// against the threshold when that alternative is assigned.
struct Ranked {
    alternatives: Vec<(Label, f64)>,
    gates: Vec<f64>,
}

fn rank_candidate(
    relation: &str,
    query: &[f32],
    verb: &str,
    bank: &RefBank,
    centroids: &BTreeMap<Label, Vec<f32>>,
    config: &LabelerConfig,
) -> Result<Ranked, LabelError> {
    let (alternatives, mut gates): (Vec<(Label, f64)>, Vec<f64>) = match config.method {
        Method::NearestAvg => {
            let scores: Vec<(Label, f64)> =
                score_nearest_avg(query, centroids)?.into_iter().filter(|(l, _)| admissible(relation, l)).collect();
            let gates = scores.iter().map(|(_, s)| *s).collect();
            (scores, gates)
        }
        Method::KNearest => {
            let tally = knn_tally(query, bank, verb, config.k)?;
            let sums: Vec<(Label, f64)> = tally.sums.into_iter().filter(|(l, _)| admissible(relation, l)).collect();
            let gates = sums.iter().map(|(l, _)| tally.best[l]).collect();
            (sums, gates)
        }
    };
    // The top choice passes if any admissible reference reaches the threshold.
    if let Some(best) = gates.iter().copied().reduce(f64::max) {
        gates[0] = best;
    }
    Ok(Ranked { alternatives, gates })
}

/// Label every candidate of one noun instance.
pub fn label_instance(
    instance: &NounInstance<'_>,
    candidates: &[Candidate],
    vectors: &[&[f32]],
    bank: &RefBank,
    config: &LabelerConfig,
) -> Result<Vec<LabeledArgument>, LabelError> {
    config.validate()?;
    if candidates.len() != vectors.len() {
        return Err(LabelError::Misaligned(candidates.len(), vectors.len()));
    }
    let verb = instance.verb_lemma;
    let centroids = match config.method {
        Method::NearestAvg => label_centroids(bank, verb),
        Method::KNearest => BTreeMap::new(),
    };
    let ranked = candidates
        .iter()
        .zip(vectors)
        .map(|(c, q)| rank_candidate(&c.relation, q, verb, bank, &centroids, config))
        .collect::<Result<Vec<_>, _>>()?;

    // Index into each candidate's alternatives, before thresholding.
    let mut assigned: Vec<Option<usize>> = vec![None; candidates.len()];
    if config.unique {
        let mut claims: Vec<(usize, usize)> =
            ranked.iter().enumerate().flat_map(|(c, r)| (0..r.alternatives.len()).map(move |a| (c, a))).collect();
        claims.sort_by(|&(ca, aa), &(cb, ab)| {
            let (la, sa) = &ranked[ca].alternatives[aa];
            let (lb, sb) = &ranked[cb].alternatives[ab];
            sb.total_cmp(sa).then_with(|| la.cmp(lb)).then_with(|| candidates[ca].head.cmp(&candidates[cb].head))
        });
        let mut taken: BTreeSet<&Label> = BTreeSet::new();
        for (c, a) in claims {
            let label = &ranked[c].alternatives[a].0;
            if assigned[c].is_none() && !taken.contains(label) {
                assigned[c] = Some(a);
                taken.insert(label);
            }
        }
    } else {
        for (c, r) in ranked.iter().enumerate() {
            if !r.alternatives.is_empty() {
                assigned[c] = Some(0);
            }
        }
    }

    Ok(candidates
        .iter()
        .zip(ranked)
        .zip(assigned)
        .map(|((candidate, r), slot)| {
            let passing = slot.filter(|&a| r.gates[a] >= config.threshold);
            let (label, score) = match passing {
                Some(a) => {
                    let (label, score) = &r.alternatives[a];
                    (Some(label.clone()), *score)
                }
                None => (None, r.alternatives.first().map_or(0.0, |(_, s)| *s)),
            };
            LabeledArgument { candidate: candidate.clone(), label, score, alternatives: r.alternatives }
        })
        .collect())
}

/// Add each enrichment pair as an enhanced arc `noun:label` on the
/// argument head. The primary tree is untouched; repeating is a no-op.
pub fn enrich(sentence: &Sentence, enrichments: &[Enrichment]) -> Result<Sentence, LabelError> {
    let mut out = sentence.clone();
    for enrichment in enrichments {
        sentence.token(enrichment.noun)?;
        for (label, head) in enrichment.pairs() {
            sentence.token(*head)?;
            out.tokens[head - 1].add_dep(enrichment.noun, &label.to_string());
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairRecord {
    pub label: Label,
    pub head: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidateScores {
    pub relation: String,
    /// Assigned label, `_` for ∅.
    pub label: String,
    pub score: f64,
    pub alternatives: BTreeMap<String, f64>,
}

/// One line of the enrichment JSONL output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnrichmentRecord {
    pub sent_id: String,
    pub noun: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verb: Option<String>,
    pub pairs: Vec<PairRecord>,
    /// Per candidate head (as a string key).
    #[serde(default)]
    pub scores: BTreeMap<String, CandidateScores>,
    /// Candidate heads with coordinated dependents; only the first
    /// conjunct is labeled.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub coordinated: Vec<usize>,
}

impl EnrichmentRecord {
    pub fn new(
        sent_id: &str,
        verb: &str,
        enrichment: &Enrichment,
        labeled: &[LabeledArgument],
        coordinated: Vec<usize>,
    ) -> Self {
        EnrichmentRecord {
            sent_id: sent_id.to_owned(),
            noun: enrichment.noun,
            verb: Some(verb.to_owned()),
            pairs: enrichment
                .pairs()
                .iter()
                .map(|(label, head)| PairRecord { label: label.clone(), head: *head })
                .collect(),
            scores: labeled
                .iter()
                .map(|a| {
                    (
                        a.candidate.head.to_string(),
                        CandidateScores {
                            relation: a.candidate.relation.clone(),
                            label: a.label.as_ref().map_or("_".to_owned(), Label::to_string),
                            score: a.score,
                            alternatives: a.alternatives.iter().map(|(l, s)| (l.to_string(), *s)).collect(),
                        },
                    )
                })
                .collect(),
            coordinated,
        }
    }

    pub fn enrichment(&self) -> Result<Enrichment, LabelError> {
        Enrichment::new(self.noun, self.pairs.iter().map(|p| (p.label.clone(), p.head)).collect())
    }
}
