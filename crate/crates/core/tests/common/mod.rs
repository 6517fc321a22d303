#![allow(dead_code)]

use std::fmt::Write as _;

use nomarg::embedstore::{EmbeddingRecord, EmbeddingStore};
use nomarg::evalkit::GoldInstance;
use nomarg::lexicon::Lexicon;
use nomarg::refbank::RefBank;
use nomarg::relation::Label;
use nomarg::treebank::{parse_conllu_str, ParseOptions, Sentence, Token};
use rand::seq::IndexedRandom;
use rand::Rng;

pub const ROME_NOMINAL: &str = "# sent_id = nominal
# text = Rome's destruction of the city
1\tRome\tRome\tPROPN\tNNP\t_\t3\tnmod:poss\t_\t_
2\t's\t's\tPART\tPOS\t_\t1\tcase\t_\t_
3\tdestruction\tdestruction\tNOUN\tNN\t_\t0\troot\t_\t_
4\tof\tof\tADP\tIN\t_\t6\tcase\t_\t_
5\tthe\tthe\tDET\tDT\t_\t6\tdet\t_\t_
6\tcity\tcity\tNOUN\tNN\t_\t3\tnmod:of\t_\t_

";

pub const ROME_POSSESSIVE: &str = "# sent_id = possessive
1\tRome\tRome\tPROPN\tNNP\t_\t3\tnmod:poss\t_\t_
2\t's\t's\tPART\tPOS\t_\t1\tcase\t_\t_
3\tdestruction\tdestruction\tNOUN\tNN\t_\t0\troot\t_\t_

";

pub const DESTRUCTION_LEXICON: &str = r#"{
  "nouns": [
    {
      "noun": "destruction",
      "verb": "destroy",
      "patterns": [
        { "constraints": [
          { "rel": "nmod:poss", "role": "SUBJECT" },
          { "rel": "nmod:of", "role": "OBJECT" }
        ] },
        { "constraints": [
          { "rel": "nmod:poss", "role": "OBJECT" },
          { "rel": "nmod:by", "role": "SUBJECT" }
        ] }
      ]
    }
  ]
}"#;

const ROME: [f32; 4] = [0.9, 0.15, 0.05, 0.1];
const CITY: [f32; 4] = [0.1, 0.9, 0.1, 0.05];

pub fn parse(text: &str) -> Vec<Sentence> {
    parse_conllu_str(text, &ParseOptions::default()).expect("fixture parses")
}

pub fn lexicon() -> Lexicon {
    Lexicon::from_json_str(DESTRUCTION_LEXICON).expect("fixture lexicon")
}

fn bank_of(rows: &[(Label, [f32; 4])]) -> RefBank {
    let mut bank = RefBank::new(4, rows.len());
    for (i, (label, v)) in rows.iter().enumerate() {
        bank.push("destroy", label.clone(), v.to_vec(), (format!("ref{i}"), 1)).unwrap();
    }
    bank.set_sentence_count("destroy", rows.len());
    bank
}

/// Six references: subjects near the possessor vector, objects near the
/// of-object vector.
pub fn agent_patient_bank() -> RefBank {
    bank_of(&[
        (Label::Nsubj, [1.0, 0.1, 0.0, 0.1]),
        (Label::Nsubj, [0.9, 0.2, 0.1, 0.0]),
        (Label::Nsubj, [0.95, 0.0, 0.1, 0.1]),
        (Label::Dobj, [0.1, 1.0, 0.1, 0.0]),
        (Label::Dobj, [0.0, 0.9, 0.2, 0.1]),
        (Label::Dobj, [0.2, 0.95, 0.0, 0.1]),
    ])
}

/// Six references where possessor-like vectors are objects.
pub fn patient_bank() -> RefBank {
    bank_of(&[
        (Label::Dobj, [0.85, 0.2, 0.1, 0.1]),
        (Label::Dobj, [0.9, 0.1, 0.0, 0.2]),
        (Label::Dobj, [0.8, 0.25, 0.05, 0.1]),
        (Label::Dobj, [0.95, 0.15, 0.1, 0.0]),
        (Label::Nsubj, [0.0, 0.2, 1.0, 0.1]),
        (Label::Nsubj, [0.1, 0.0, 0.9, 0.3]),
    ])
}

pub fn rome_store() -> EmbeddingStore {
    let mut store = EmbeddingStore::new(4);
    let nominal = [
        ROME.to_vec(),
        vec![0.1, 0.1, 0.9, 0.2],
        vec![0.3, 0.3, 0.3, 0.8],
        vec![0.1, 0.2, 0.8, 0.3],
        vec![0.2, 0.1, 0.7, 0.4],
        CITY.to_vec(),
    ];
    store.insert(EmbeddingRecord::from_rows("nominal", &nominal).unwrap()).unwrap();
    let possessive = [ROME.to_vec(), vec![0.1, 0.1, 0.9, 0.2], vec![0.3, 0.3, 0.3, 0.8]];
    store.insert(EmbeddingRecord::from_rows("possessive", &possessive).unwrap()).unwrap();
    store
}

pub fn random_vector<R: Rng>(rng: &mut R, dim: usize) -> Vec<f32> {
    loop {
        let v: Vec<f32> = (0..dim).map(|_| rng.random_range(-1.0f32..1.0)).collect();
        if v.iter().any(|&x| x != 0.0) {
            return v;
        }
    }
}

/// Brute-force cosine, written independently of the library.
pub fn oracle_cosine(u: &[f32], v: &[f32]) -> f64 {
    let dot: f64 = u.iter().zip(v).map(|(&a, &b)| a as f64 * b as f64).sum();
    let nu: f64 = u.iter().map(|&a| (a as f64).powi(2)).sum::<f64>().sqrt();
    let nv: f64 = v.iter().map(|&b| (b as f64).powi(2)).sum::<f64>().sqrt();
    (dot / (nu * nv)).clamp(-1.0, 1.0)
}

const FORMS: &[&str] = &["the", "city", "war", "old", "Rome", "army", "of", "by", "'s", "quick", "data", "x"];
const RELS: &[&str] = &["nsubj", "dobj", "nmod:of", "amod", "det", "case", "compound", "conj", "cc", "punct"];

/// A random valid sentence with comments, enhanced arcs, misc values and
/// opaque (multiword/empty-node) lines.
pub fn random_sentence<R: Rng>(rng: &mut R, sent_id: &str) -> Sentence {
    let n = rng.random_range(1..=12);
    let root = rng.random_range(1..=n);
    let mut tokens = Vec::with_capacity(n);
    for id in 1..=n {
        // Attach to an earlier token or the root, which keeps the tree acyclic.
        let head = if id == root {
            0
        } else if id < root || rng.random_bool(0.3) {
            root
        } else {
            rng.random_range(root..id)
        };
        let form = *FORMS.choose(rng).unwrap();
        let deprel = if head == 0 { "root" } else { RELS.choose(rng).unwrap() };
        let mut t = Token::new(id, form, &form.to_lowercase(), "NOUN", head, deprel);
        if rng.random_bool(0.3) {
            t.xpos = "NN".to_owned();
        }
        if rng.random_bool(0.3) {
            t.feats = "Number=Sing".to_owned();
        }
        for _ in 0..rng.random_range(0..3) {
            let h = rng.random_range(0..=n);
            if h != id {
                t.add_dep(h, RELS.choose(rng).unwrap());
            }
        }
        if rng.random_bool(0.3) {
            t.misc.push(("SpaceAfter".to_owned(), Some("No".to_owned())));
        }
        if rng.random_bool(0.1) {
            t.misc.push(("Flag".to_owned(), None));
        }
        tokens.push(t);
    }
    let mut sentence = Sentence::new(sent_id, tokens).expect("generated tree is valid");
    if rng.random_bool(0.5) {
        sentence.comments.push(format!("# text = {}", sentence.forms().join(" ")));
    }
    let mut positions: Vec<usize> = (0..rng.random_range(0..3)).map(|_| rng.random_range(0..n)).collect();
    positions.sort();
    for pos in positions {
        let line = if rng.random_bool(0.5) && pos + 2 <= n {
            format!("{}-{}\tdon't\t_\t_\t_\t_\t_\t_\t_\t_", pos + 1, pos + 2)
        } else {
            format!("{pos}.1\tgap\tgap\tNOUN\t_\t_\t_\t_\t{}:conj\t_", pos.max(1))
        };
        sentence.opaque.push((pos, line));
    }
    sentence
}

/// A sentence "[They saw] [det] [adj*] A1 's NOUN of [det] [adj*] A2 [.]"
/// with both arguments as gold, for perturbation tests.
pub fn random_swap_case<R: Rng>(rng: &mut R, sent_id: &str) -> (GoldInstance, Sentence) {
    let mut text = String::new();
    let mut rows: Vec<(String, String, usize, String)> = Vec::new();
    let verb_frame = rng.random_bool(0.5);
    let n_adj1 = rng.random_range(0..3);
    let n_adj2 = rng.random_range(0..3);
    let det1 = rng.random_bool(0.5);
    let det2 = rng.random_bool(0.5);
    let punct = rng.random_bool(0.5);

    let offset = if verb_frame { 2 } else { 0 };
    let a1 = offset + det1 as usize + n_adj1 + 1;
    let noun = a1 + 2;
    let a2 = noun + 1 + det2 as usize + n_adj2 + 1;
    let noun_head = if verb_frame { 2 } else { 0 };
    let noun_rel = if verb_frame { "dobj" } else { "root" };

    if verb_frame {
        rows.push(("They".into(), "PRON".into(), 2, "nsubj".into()));
        rows.push(("saw".into(), "VERB".into(), 0, "root".into()));
    }
    if det1 {
        rows.push(("the".into(), "DET".into(), a1, "det".into()));
    }
    for _ in 0..n_adj1 {
        rows.push((["big", "old", "red"].choose(rng).unwrap().to_string(), "ADJ".into(), a1, "amod".into()));
    }
    rows.push((["Rome", "army", "John"].choose(rng).unwrap().to_string(), "PROPN".into(), noun, "nmod:poss".into()));
    rows.push(("'s".into(), "PART".into(), a1, "case".into()));
    rows.push(("destruction".into(), "NOUN".into(), noun_head, noun_rel.into()));
    rows.push(("of".into(), "ADP".into(), a2, "case".into()));
    if det2 {
        rows.push(("a".into(), "DET".into(), a2, "det".into()));
    }
    for _ in 0..n_adj2 {
        rows.push((["small", "ancient"].choose(rng).unwrap().to_string(), "ADJ".into(), a2, "amod".into()));
    }
    rows.push((["city", "town", "bridge"].choose(rng).unwrap().to_string(), "NOUN".into(), noun, "nmod:of".into()));
    let root = if verb_frame { 2 } else { noun };
    if punct {
        rows.push((".".into(), "PUNCT".into(), root, "punct".into()));
    }

    let _ = writeln!(text, "# sent_id = {sent_id}");
    for (i, (form, upos, head, rel)) in rows.iter().enumerate() {
        let _ = writeln!(text, "{}\t{form}\t{}\t{upos}\t_\t_\t{head}\t{rel}\t_\t_", i + 1, form.to_lowercase());
    }
    text.push('\n');
    let sentence = parse(&text).remove(0);
    let mut gold = vec![(Label::Nsubj, a1), (Label::Dobj, a2)];
    if rng.random_bool(0.5) {
        gold = vec![(Label::Dobj, a1), (Label::Nsubj, a2)];
        gold.sort_by_key(|(_, h)| *h);
    }
    let instance = GoldInstance {
        sent_id: sent_id.to_owned(),
        tokens: sentence.forms(),
        noun,
        verb_lemma: "destroy".to_owned(),
        gold,
    };
    (instance, sentence)
}

/// A labelable corpus: random swap-case sentences with random vectors,
/// plus a random destroy bank.
pub fn random_pipeline_inputs<R: Rng>(rng: &mut R, n: usize, dim: usize) -> (Vec<Sentence>, EmbeddingStore, RefBank) {
    let mut sentences = Vec::with_capacity(n);
    let mut store = EmbeddingStore::new(dim);
    for i in 0..n {
        let (_, sentence) = random_swap_case(rng, &format!("s{i}"));
        let rows: Vec<Vec<f32>> = (0..sentence.len()).map(|_| random_vector(rng, dim)).collect();
        store.insert(EmbeddingRecord::from_rows(&sentence.sent_id, &rows).unwrap()).unwrap();
        sentences.push(sentence);
    }
    let labels = [Label::Nsubj, Label::Dobj, Label::Nmod("of".into()), Label::Nmod("by".into())];
    let mut bank = RefBank::new(dim, 100);
    for i in 0..rng.random_range(1..60) {
        let label = labels.choose(rng).unwrap().clone();
        bank.push("destroy", label, random_vector(rng, dim), (format!("r{i}"), 1)).unwrap();
    }
    (sentences, store, bank)
}
