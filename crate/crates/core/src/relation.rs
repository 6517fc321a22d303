//! Dependency relation patterns and the verbal label set.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// nmod subtypes that do not name a preposition.
const NON_PREPOSITIONAL_NMOD: &[&str] = &["poss", "tmod", "npmod"];

/// A relation pattern: either an exact relation (`compound`) or a
/// subtype wildcard (`nmod:*`, matching any `nmod:<subtype>`).
#[derive(Clone, Debug, Eq, PartialEq, Hash)]
pub enum RelPattern {
    Exact(String),
    AnySubtype(String),
}

impl RelPattern {
    pub fn matches(&self, deprel: &str) -> bool {
        match self {
            RelPattern::Exact(rel) => rel == deprel,
            RelPattern::AnySubtype(base) => deprel
                .strip_prefix(base.as_str())
                .and_then(|rest| rest.strip_prefix(':'))
                .is_some_and(|subtype| !subtype.is_empty()),
        }
    }
}

impl FromStr for RelPattern {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.is_empty() {
            return Err("empty relation pattern".to_owned());
        }
        match s.strip_suffix(":*") {
            Some("") => Err(format!("relation pattern without base: {s}")),
            Some(base) => Ok(RelPattern::AnySubtype(base.to_owned())),
            None => Ok(RelPattern::Exact(s.to_owned())),
        }
    }
}

impl fmt::Display for RelPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RelPattern::Exact(rel) => f.write_str(rel),
            RelPattern::AnySubtype(base) => write!(f, "{base}:*"),
        }
    }
}

/// Returns the preposition of a prepositional `nmod:X` relation.
pub fn nmod_preposition(deprel: &str) -> Option<&str> {
    let subtype = deprel.strip_prefix("nmod:")?;
    if subtype.is_empty() || NON_PREPOSITIONAL_NMOD.contains(&subtype) {
        None
    } else {
        Some(subtype)
    }
}

/// A verbal argument label: `nsubj`, `dobj` or `nmod:X`.
///
/// The derived ordering (nsubj < dobj < nmod:X, prepositions
/// lexicographic) is the tie-breaking order used throughout.
#[derive(Clone, Debug, Eq, PartialEq, Ord, PartialOrd, Hash)]
pub enum Label {
    Nsubj,
    Dobj,
    Nmod(String),
}

impl Label {
    /// Map an active-clause relation to its label, if it is one.
    pub fn from_relation(deprel: &str) -> Option<Label> {
        match deprel {
            "nsubj" => Some(Label::Nsubj),
            "dobj" => Some(Label::Dobj),
            _ => nmod_preposition(deprel).map(|p| Label::Nmod(p.to_owned())),
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Nsubj => f.write_str("nsubj"),
            Label::Dobj => f.write_str("dobj"),
            Label::Nmod(prep) => write!(f, "nmod:{prep}"),
        }
    }
}

impl FromStr for Label {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Label::from_relation(s).ok_or_else(|| format!("not a verbal argument label: {s:?}"))
    }
}

impl Serialize for Label {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Label {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
