//! In-browser demo operations. Each takes and returns plain strings
//! (JSON or text) so the page needs no bundler; the `*_js` wrappers are
//! what the page imports.

use serde::{Deserialize, Serialize};
use wasm_bindgen::prelude::*;

use nomarg::evalkit::{read_gold, read_predictions, score};
use nomarg::identify::{find_noun_instances, identify_candidates, Candidate, IdentifyConfig, NounInstance};
use nomarg::label::{label_instance, score_knn, LabelerConfig, Method};
use nomarg::lexicon::Lexicon;
use nomarg::refbank::{query_knn, RefBank};
use nomarg::relation::Label;
use nomarg::treebank::{parse_conllu_str, ParseOptions, Sentence, Token};

#[derive(Serialize)]
struct InstanceView {
    sent_id: String,
    noun: usize,
    noun_form: String,
    verb: String,
    candidates: Vec<CandidateView>,
}

#[derive(Serialize)]
struct CandidateView {
    head: usize,
    form: String,
    relation: String,
    span: (usize, usize),
    text: String,
}

/// Deverbal nouns and their candidate arguments, as JSON.
pub fn identify(conllu: &str, lexicon_json: &str, include_amod: bool) -> Result<String, String> {
    let sentences = parse_conllu_str(conllu, &ParseOptions::default()).map_err(|e| e.to_string())?;
    let lexicon = Lexicon::from_json_str(lexicon_json).map_err(|e| e.to_string())?;
    let config = if include_amod { IdentifyConfig::default() } else { IdentifyConfig::without_amod() };
    let mut out = Vec::new();
    for sentence in &sentences {
        for instance in find_noun_instances(sentence, &lexicon) {
            let form = |i: usize| sentence.tokens[i - 1].form.clone();
            out.push(InstanceView {
                sent_id: sentence.sent_id.clone(),
                noun: instance.noun,
                noun_form: form(instance.noun),
                verb: instance.verb_lemma.to_owned(),
                candidates: identify_candidates(&instance, &config)
                    .into_iter()
                    .map(|c| CandidateView {
                        head: c.head,
                        form: form(c.head),
                        text: (c.span.0..=c.span.1).map(form).collect::<Vec<_>>().join(" "),
                        relation: c.relation,
                        span: c.span,
                    })
                    .collect(),
            });
        }
    }
    serde_json::to_string(&out).map_err(|e| e.to_string())
}

#[derive(Deserialize)]
struct BankPoint {
    label: Label,
    vector: Vec<f32>,
}

#[derive(Serialize)]
struct Neighbor {
    ordinal: usize,
    label: String,
    score: f64,
}

#[derive(Serialize)]
struct Exploration {
    neighbors: Vec<Neighbor>,
    /// Per-label scores of the chosen method, best first.
    scores: Vec<(String, f64)>,
    /// Label assigned to the query as a possessor-like candidate, or null.
    label: Option<String>,
}

const VERB: &str = "explore";

/// Label a query vector against a small bank (`[{"label", "vector"}]`).
pub fn explore(bank_json: &str, query: &[f32], method: &str, k: usize, threshold: f64) -> Result<String, String> {
    let points: Vec<BankPoint> = serde_json::from_str(bank_json).map_err(|e| e.to_string())?;
    let mut bank = RefBank::new(query.len(), points.len());
    for (i, p) in points.into_iter().enumerate() {
        bank.push(VERB, p.label, p.vector, (format!("point{i}"), 1)).map_err(|e| e.to_string())?;
    }
    let config = LabelerConfig {
        method: match method {
            "knn" => Method::KNearest,
            "avg" => Method::NearestAvg,
            other => return Err(format!("unknown method {other:?}")),
        },
        k,
        threshold,
        unique: true,
    };
    config.validate().map_err(|e| e.to_string())?;

    let neighbors = query_knn(&bank, VERB, query, k)
        .map_err(|e| e.to_string())?
        .into_iter()
        .map(|(arg, score)| Neighbor { ordinal: arg.ordinal, label: arg.label.to_string(), score })
        .collect();

    // One candidate whose relation admits every label.
    let sentence = Sentence::new(
        "query",
        vec![Token::new(1, "query", "query", "NOUN", 2, "nmod:poss"), Token::new(2, "noun", "noun", "NOUN", 0, "root")],
    )
    .map_err(|e| e.to_string())?;
    let instance = NounInstance { sentence: &sentence, noun: 2, verb_lemma: VERB };
    let candidate = Candidate { head: 1, relation: "nmod:poss".to_owned(), span: (1, 1) };
    let labeled = label_instance(&instance, &[candidate], &[query], &bank, &config).map_err(|e| e.to_string())?;
    let scores = match config.method {
        Method::KNearest => score_knn(query, &bank, VERB, k).map_err(|e| e.to_string())?,
        Method::NearestAvg => labeled[0].alternatives.clone(),
    };
    serde_json::to_string(&Exploration {
        neighbors,
        scores: scores.into_iter().map(|(l, s)| (l.to_string(), s)).collect(),
        label: labeled[0].label.as_ref().map(Label::to_string),
    })
    .map_err(|e| e.to_string())
}

/// Relation-F1 table for gold and predicted JSONL.
pub fn evaluate(gold_jsonl: &str, pred_jsonl: &str) -> Result<String, String> {
    let gold = read_gold(gold_jsonl.as_bytes()).map_err(|e| format!("gold: {e}"))?;
    let pred = read_predictions(pred_jsonl.as_bytes()).map_err(|e| format!("predictions: {e}"))?;
    Ok(score(&gold, &pred).map_err(|e| e.to_string())?.to_table())
}

#[wasm_bindgen(js_name = identify)]
pub fn identify_js(conllu: &str, lexicon_json: &str, include_amod: bool) -> Result<String, JsError> {
    identify(conllu, lexicon_json, include_amod).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = explore)]
pub fn explore_js(bank_json: &str, query: &[f32], method: &str, k: usize, threshold: f64) -> Result<String, JsError> {
    explore(bank_json, query, method, k, threshold).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = evaluate)]
pub fn evaluate_js(gold_jsonl: &str, pred_jsonl: &str) -> Result<String, JsError> {
    evaluate(gold_jsonl, pred_jsonl).map_err(|e| JsError::new(&e))
}
