//! Deverbal-noun lexicon (JSON, NomLex-style dependency patterns).

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::label::Enrichment;
use crate::relation::{Label, RelPattern};
use crate::treebank::Sentence;

#[derive(Debug, Error)]
pub enum LexiconError {
    #[error("lexicon is not valid JSON: {0}")]
    Json(#[from] serde_json::Error),

    #[error("lexicon entry {index} ({noun}): {reason}")]
    Schema { index: usize, noun: String, reason: String },

    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Role {
    Subject,
    Object,
    Pp,
    Unknown,
}

impl Role {
    /// Verbal label for a role bound through an arc with relation `deprel`.
    /// PP takes its preposition from the arc; UNKNOWN has no label.
    pub fn verbal_label(self, deprel: &str) -> Option<Label> {
        match self {
            Role::Subject => Some(Label::Nsubj),
            Role::Object => Some(Label::Dobj),
            Role::Pp => match Label::from_relation(deprel) {
                Some(label @ Label::Nmod(_)) => Some(label),
                _ => None,
            },
            Role::Unknown => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Constraint {
    #[serde(with = "rel_pattern_serde")]
    pub rel: RelPattern,
    pub role: Role,
    #[serde(default = "default_required")]
    pub required: bool,
}

fn default_required() -> bool {
    true
}

mod rel_pattern_serde {
    use serde::{Deserialize, Deserializer, Serializer};

    use crate::relation::RelPattern;

    pub fn serialize<S: Serializer>(p: &RelPattern, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(p)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<RelPattern, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DepPattern {
    pub constraints: Vec<Constraint>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LexiconEntry {
    #[serde(rename = "noun")]
    pub noun_lemma: String,
    #[serde(rename = "verb")]
    pub verb_lemma: String,
    #[serde(default)]
    pub patterns: Vec<DepPattern>,
}

fn allowed_constraint_rel(rel: &RelPattern) -> bool {
    match rel {
        RelPattern::Exact(r) => {
            matches!(r.as_str(), "nmod:poss" | "compound" | "amod")
                || r.strip_prefix("nmod:").is_some_and(|x| !x.is_empty())
        }
        RelPattern::AnySubtype(base) => base == "nmod",
    }
}

impl LexiconEntry {
    fn validate(&self) -> Result<(), String> {
        for (what, lemma) in [("noun", &self.noun_lemma), ("verb", &self.verb_lemma)] {
            if lemma.is_empty() {
                return Err(format!("{what} lemma is empty"));
            }
            if lemma.chars().any(char::is_uppercase) {
                return Err(format!("{what} lemma {lemma:?} is not lowercase"));
            }
        }
        for (i, pattern) in self.patterns.iter().enumerate() {
            if pattern.constraints.is_empty() {
                return Err(format!("pattern {i} has no constraints"));
            }
            if let Some(c) = pattern.constraints.iter().find(|c| !allowed_constraint_rel(&c.rel)) {
                return Err(format!("pattern {i} uses relation {} outside nmod:poss/compound/amod/nmod:X", c.rel));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default)]
pub struct Lexicon {
    entries: BTreeMap<String, LexiconEntry>,
    /// Non-fatal load diagnostics (duplicate nouns).
    pub warnings: Vec<String>,
}

#[derive(Serialize)]
struct LexiconFile<'a> {
    nouns: Vec<&'a LexiconEntry>,
}

impl Lexicon {
    pub fn from_entries<I: IntoIterator<Item = LexiconEntry>>(entries: I) -> Self {
        let mut lexicon = Lexicon::default();
        for entry in entries {
            lexicon.insert(entry);
        }
        lexicon
    }

    fn insert(&mut self, entry: LexiconEntry) {
        if let Some(old) = self.entries.insert(entry.noun_lemma.clone(), entry) {
            self.warnings.push(format!("duplicate noun {:?} (verb {:?} replaced)", old.noun_lemma, old.verb_lemma));
        }
    }

    pub fn from_json_str(text: &str) -> Result<Self, LexiconError> {
        let root: Value = serde_json::from_str(text)?;
        let schema =
            |index: usize, noun: &str, reason: String| LexiconError::Schema { index, noun: noun.to_owned(), reason };
        let Value::Object(mut root) = root else {
            return Err(schema(0, "-", "top level is not an object".to_owned()));
        };
        let nouns = match root.remove("nouns") {
            None => Vec::new(),
            Some(Value::Array(nouns)) => nouns,
            Some(_) => return Err(schema(0, "-", "`nouns` is not an array".to_owned())),
        };
        let mut lexicon = Lexicon::default();
        for (index, raw) in nouns.into_iter().enumerate() {
            let noun = raw.get("noun").and_then(Value::as_str).unwrap_or("?").to_owned();
            let entry: LexiconEntry = serde_json::from_value(raw).map_err(|e| schema(index, &noun, e.to_string()))?;
            entry.validate().map_err(|reason| schema(index, &noun, reason))?;
            lexicon.insert(entry);
        }
        Ok(lexicon)
    }

    pub fn to_json_string(&self) -> String {
        let file = LexiconFile { nouns: self.entries.values().collect() };
        serde_json::to_string_pretty(&file).expect("lexicon serializes")
    }

    pub fn get(&self, noun_lemma: &str) -> Option<&LexiconEntry> {
        self.entries.get(noun_lemma)
    }

    pub fn entries(&self) -> impl Iterator<Item = &LexiconEntry> {
        self.entries.values()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Distinct verb lemmas, sorted.
    pub fn verbs(&self) -> BTreeSet<String> {
        self.entries.values().map(|e| e.verb_lemma.clone()).collect()
    }
}

pub fn load_lexicon(path: &Path) -> Result<Lexicon, LexiconError> {
    Lexicon::from_json_str(&fs::read_to_string(path)?)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Binding {
    pub role: Role,
    pub head: usize,
    pub relation: String,
}

impl Binding {
    pub fn label(&self) -> Option<Label> {
        self.role.verbal_label(&self.relation)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PatternMatch {
    /// Index of the fulfilled pattern within the entry.
    pub pattern: usize,
    /// One binding per bound constraint, in constraint order.
    pub bindings: Vec<Binding>,
}

/// Assign required constraints to distinct children; first solution in
/// child order, with backtracking.
fn assign_required(
    required: &[&Constraint],
    children: &[(usize, &str)],
    used: &mut Vec<bool>,
    chosen: &mut Vec<usize>,
) -> bool {
    let Some((constraint, rest)) = required.split_first() else {
        return true;
    };
    for (i, (_, rel)) in children.iter().enumerate() {
        if used[i] || !constraint.rel.matches(rel) {
            continue;
        }
        used[i] = true;
        chosen.push(i);
        if assign_required(rest, children, used, chosen) {
            return true;
        }
        chosen.pop();
        used[i] = false;
    }
    false
}

fn match_pattern(pattern: &DepPattern, children: &[(usize, &str)]) -> Option<Vec<Binding>> {
    let required: Vec<&Constraint> = pattern.constraints.iter().filter(|c| c.required).collect();
    let mut used = vec![false; children.len()];
    let mut chosen = Vec::new();
    if !assign_required(&required, children, &mut used, &mut chosen) {
        return None;
    }
    let mut required_slots = chosen.into_iter();
    let mut bindings = Vec::new();
    for constraint in &pattern.constraints {
        let slot = if constraint.required {
            required_slots.next()
        } else {
            let free = children.iter().enumerate().position(|(i, (_, rel))| !used[i] && constraint.rel.matches(rel));
            if let Some(i) = free {
                used[i] = true;
            }
            free
        };
        if let Some(i) = slot {
            let (head, rel) = children[i];
            bindings.push(Binding { role: constraint.role, head, relation: rel.to_owned() });
        }
    }
    Some(bindings)
}

/// All fulfilled patterns of `entry` for the noun at `noun`, in lexicon order.
pub fn match_patterns(entry: &LexiconEntry, sentence: &Sentence, noun: usize) -> Vec<PatternMatch> {
    let children: Vec<(usize, &str)> = sentence.children(noun).map(|t| (t.id, t.deprel.as_str())).collect();
    if children.is_empty() {
        return Vec::new();
    }
    entry
        .patterns
        .iter()
        .enumerate()
        .filter_map(|(pattern, p)| match_pattern(p, &children).map(|bindings| PatternMatch { pattern, bindings }))
        .collect()
}

/// Lexicon-only labeling: union of non-colliding bindings of every
/// fulfilled pattern, with relations claimed by two heads dropped.
pub fn baseline_label(entry: &LexiconEntry, sentence: &Sentence, noun: usize) -> Enrichment {
    let matches = match_patterns(entry, sentence, noun);
    resolve_bindings(noun, &matches)
}

pub(crate) fn resolve_bindings(noun: usize, matches: &[PatternMatch]) -> Enrichment {
    let mut per_head: BTreeMap<usize, BTreeSet<Option<Label>>> = BTreeMap::new();
    for binding in matches.iter().flat_map(|m| &m.bindings) {
        per_head.entry(binding.head).or_default().insert(binding.label());
    }
    let mut per_label: BTreeMap<Label, Vec<usize>> = BTreeMap::new();
    for (head, labels) in per_head {
        if labels.len() != 1 {
            continue;
        }
        if let Some(Some(label)) = labels.into_iter().next() {
            per_label.entry(label).or_default().push(head);
        }
    }
    let pairs =
        per_label.into_iter().filter(|(_, heads)| heads.len() == 1).map(|(label, heads)| (label, heads[0])).collect();
    Enrichment::new(noun, pairs).expect("pairs are unique by construction")
}
