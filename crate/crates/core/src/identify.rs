//! Deverbal-noun instances and their argument candidates.

use serde::Serialize;
use thiserror::Error;

use crate::lexicon::Lexicon;
use crate::relation::RelPattern;
use crate::treebank::Sentence;

#[derive(Debug, Error)]
pub enum IdentifyError {
    #[error("identification relation set is empty")]
    EmptyRelationSet,
}

/// Nominal categories eligible as deverbal nouns.
const NOUN_UPOS: &[&str] = &["NOUN"];

#[derive(Clone, Copy, Debug)]
pub struct NounInstance<'a> {
    pub sentence: &'a Sentence,
    pub noun: usize,
    pub verb_lemma: &'a str,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Candidate {
    pub head: usize,
    pub relation: String,
    /// Inclusive token range covered by the subtree of `head`.
    pub span: (usize, usize),
}

#[derive(Clone, Debug)]
pub struct IdentifyConfig {
    pub include_amod: bool,
    relation_set: Vec<RelPattern>,
}

impl Default for IdentifyConfig {
    fn default() -> Self {
        IdentifyConfig {
            include_amod: true,
            // Plain `nmod` stays a candidate; it can only be labeled nsubj/dobj.
            relation_set: ["nmod:poss", "compound", "amod", "nmod:*", "nmod"]
                .iter()
                .map(|p| p.parse().expect("static pattern"))
                .collect(),
        }
    }
}

impl IdentifyConfig {
    pub fn with_relations(relation_set: Vec<RelPattern>, include_amod: bool) -> Result<Self, IdentifyError> {
        if relation_set.is_empty() {
            return Err(IdentifyError::EmptyRelationSet);
        }
        Ok(IdentifyConfig { include_amod, relation_set })
    }

    pub fn without_amod() -> Self {
        IdentifyConfig { include_amod: false, ..Default::default() }
    }

    pub fn relation_set(&self) -> &[RelPattern] {
        &self.relation_set
    }

    fn active_patterns(&self) -> Vec<RelPattern> {
        self.relation_set
            .iter()
            .filter(|p| self.include_amod || !matches!(p, RelPattern::Exact(r) if r == "amod"))
            .cloned()
            .collect()
    }
}

/// One instance per common-noun token whose lemma is a lexicon noun.
pub fn find_noun_instances<'a>(sentence: &'a Sentence, lexicon: &'a Lexicon) -> Vec<NounInstance<'a>> {
    sentence
        .tokens
        .iter()
        .filter(|t| NOUN_UPOS.contains(&t.upos.as_str()))
        .filter_map(|t| {
            lexicon.get(&t.lemma.to_lowercase()).map(|entry| NounInstance {
                sentence,
                noun: t.id,
                verb_lemma: entry.verb_lemma.as_str(),
            })
        })
        .collect()
}

/// Direct children of the noun in the conromed relation set, with
/// their subtree spans. Coordinated arguments yield only the first
/// conjunct (the direct child).
pub fn identify_candidates(instance: &NounInstance<'_>, config: &IdentifyConfig) -> Vec<Candidate> {
    let sentence = instance.sentence;
    let patterns = config.active_patterns();
    sentence
        .children_by_relation(instance.noun, &patterns)
        .unwrap_or_default()
        .into_iter()
        .map(|(head, relation)| Candidate { head, relation: relation.to_owned(), span: sentence.subtree_span(head) })
        .collect()
}

/// Candidate heads that have `conj` dependents not labeled themselves.
pub fn coordinated_heads(sentence: &Sentence, candidates: &[Candidate]) -> Vec<usize> {
    candidates.iter().filter(|c| sentence.children(c.head).any(|t| t.deprel == "conj")).map(|c| c.head).collect()
}
