//! Label the arguments of deverbal nouns in Universal Dependencies trees
//! with the relations their verbal counterparts would take.
//!
//! The pipeline reads CoNLL-U ([`treebank`]), finds lexicon nouns and their
//! candidate arguments ([`lexicon`], [`identify`]), embeds candidates in
//! context ([`embedstore`]), compares them against verbal reference
//! arguments ([`refbank`]) and writes labels back as enhanced
//! dependencies ([`label`], [`pipeline`]). [`evalkit`] scores the output.

pub mod cli;
pub mod embedstore;
pub mod evalkit;
pub mod identify;
pub mod label;
pub mod lexicon;
pub mod pipeline;
pub mod refbank;
pub mod relation;
pub mod treebank;

pub use embedstore::{cosine, EmbeddingRecord, EmbeddingStore};
pub use identify::{Candidate, IdentifyConfig, NounInstance};
pub use label::{Enrichment, LabelerConfig, Method};
pub use lexicon::Lexicon;
pub use pipeline::Pipeline;
pub use refbank::RefBank;
pub use relation::{Label, RelPattern};
pub use treebank::{Sentence, Token};
