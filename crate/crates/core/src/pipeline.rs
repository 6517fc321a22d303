//! Corpus-level enrichment: identify, embed, label and rewrite each
//! sentence. Sentences are processed on a worker pool and merged back in
//! input order.

use rayon::prelude::*;
use rayon::ThreadPoolBuilder;
use thiserror::Error;

use crate::embedstore::{EmbedError, EmbeddingStore};
use crate::identify::{coordinated_heads, find_noun_instances, identify_candidates, IdentifyConfig};
use crate::label::{enrich, label_instance, Enrichment, EnrichmentRecord, LabelError, LabelerConfig};
use crate::lexicon::Lexicon;
use crate::refbank::RefBank;
use crate::treebank::Sentence;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("sentence {sent_id}: {source}")]
    Sentence {
        sent_id: String,
        #[source]
        source: LabelError,
    },

    #[error("could not start worker pool: {0}")]
    Pool(String),
}

pub struct Pipeline<'a> {
    pub lexicon: &'a Lexicon,
    pub bank: &'a RefBank,
    pub store: &'a EmbeddingStore,
    pub identify: IdentifyConfig,
    pub labeler: LabelerConfig,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnrichedSentence {
    pub sentence: Sentence,
    pub records: Vec<EnrichmentRecord>,
}

impl Pipeline<'_> {
    /// Enrich one sentence. Sentences without deverbal nouns need no
    /// embeddings.
    pub fn enrich_sentence(&self, sentence: &Sentence) -> Result<EnrichedSentence, LabelError> {
        let instances = find_noun_instances(sentence, self.lexicon);
        if instances.is_empty() {
            return Ok(EnrichedSentence { sentence: sentence.clone(), records: Vec::new() });
        }
        let record = self.store.aligned_record(sentence)?;
        let mut enrichments = Vec::with_capacity(instances.len());
        let mut records = Vec::with_capacity(instances.len());
        for instance in &instances {
            let candidates = identify_candidates(instance, &self.identify);
            let vectors = candidates.iter().map(|c| record.row(c.head)).collect::<Result<Vec<&[f32]>, EmbedError>>()?;
            let labeled = label_instance(instance, &candidates, &vectors, self.bank, &self.labeler)?;
            let enrichment = Enrichment::from_labeled(instance.noun, &labeled)?;
            records.push(EnrichmentRecord::new(
                &sentence.sent_id,
                instance.verb_lemma,
                &enrichment,
                &labeled,
                coordinated_heads(sentence, &candidates),
            ));
            enrichments.push(enrichment);
        }
        Ok(EnrichedSentence { sentence: enrich(sentence, &enrichments)?, records })
    }

    /// Enrich a corpus with `jobs` workers (0 = available cores). Output
    /// order equals input order.
    pub fn enrich_corpus(&self, sentences: &[Sentence], jobs: usize) -> Result<Vec<EnrichedSentence>, PipelineError> {
        let pool =
            ThreadPoolBuilder::new().num_threads(jobs).build().map_err(|e| PipelineError::Pool(e.to_string()))?;
        pool.install(|| {
            sentences
                .par_iter()
                .map(|s| {
                    self.enrich_sentence(s)
                        .map_err(|source| PipelineError::Sentence { sent_id: s.sent_id.clone(), source })
                })
                .collect()
        })
    }
}
