//! Generators and brute-force oracles shared by the integration tests.
#![allow(dead_code)]

use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ppattach::kb::{Assertion, ConceptKey, KbStore};
use ppattach::morph::Inflector;
use ppattach::resolver::{AmbiguityRequest, Candidate};
use ppattach::scorer::{EmbeddingStore, PrototypeScorer, RelationModels};

pub const NOUNS: &[&str] = &[
    "guitar", "guitars", "string", "strings", "finger", "fingers", "box", "boxes", "knife",
    "knives", "city", "cities", "child", "children", "house", "table", "fork", "spoon", "man",
    "men",
];
pub const VERBS: &[&str] = &["play", "eat", "cut", "see", "build", "hold"];
pub const RELATIONS: &[&str] = &["AtLocation", "HasA", "IsA", "RelatedTo", "UsedFor"];
/// Few distinct weights, so ties are common.
pub const WEIGHTS: &[f64] = &[0.5, 1.0, 1.0, 2.0, 2.8284, 3.0];

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn key(s: &str) -> ConceptKey {
    ConceptKey::new(s).unwrap()
}

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join(name)
}

pub fn random_assertions(rng: &mut impl Rng, n: usize) -> Vec<Assertion> {
    let vocab: Vec<&str> = NOUNS.iter().chain(VERBS).copied().collect();
    (0..n)
        .map(|_| {
            let s = vocab.choose(rng).unwrap();
            let e = vocab.choose(rng).unwrap();
            let r = RELATIONS.choose(rng).unwrap();
            let w = *WEIGHTS.choose(rng).unwrap();
            Assertion::new(*r, key(s), key(e), w).unwrap()
        })
        .collect()
}

pub fn random_candidate(rng: &mut impl Rng) -> Candidate {
    match rng.gen_range(0..3) {
        0 => Candidate::verb(key(VERBS.choose(rng).unwrap())),
        1 => Candidate::noun_phrase(key(NOUNS.choose(rng).unwrap()), Some("the".into())),
        _ => Candidate::prep_phrase("with", key(NOUNS.choose(rng).unwrap()), None),
    }
}

pub fn random_request(rng: &mut impl Rng) -> AmbiguityRequest {
    let n = rng.gen_range(1..=4);
    let candidates = (0..n).map(|_| random_candidate(rng)).collect();
    AmbiguityRequest::new(
        "with",
        key(NOUNS.choose(rng).unwrap()),
        Some("one".into()),
        candidates,
    )
    .unwrap()
}

/// What a kb-only decision must be: `(chosen index, best (relation, weight) per candidate)`.
///
/// Enumerates every variant pair against every assertion. Within a pair the
/// heaviest assertion wins, ties going to the smallest (relation, start, end);
/// within a candidate the first pair (PP variant major) reaching the maximum
/// wins; across candidates the earliest maximum wins, index 0 when nothing
/// matched.
pub fn oracle_decide(
    request: &AmbiguityRequest,
    assertions: &[Assertion],
    inflector: &Inflector,
) -> (usize, Vec<Option<(String, f64)>>) {
    let pp_forms = inflector.noun_variants(&request.pp_noun);
    let mut per_candidate = Vec::new();
    for cand in &request.candidates {
        let cand_forms = cand.variants(inflector);
        let mut best: Option<(String, f64)> = None;
        for p in &pp_forms {
            for c in &cand_forms {
                let mut pair_best: Option<&Assertion> = None;
                for a in assertions {
                    let hit = (&a.start == p && &a.end == c) || (&a.start == c && &a.end == p);
                    if !hit {
                        continue;
                    }
                    pair_best = match pair_best {
                        None => Some(a),
                        Some(b) if a.weight > b.weight => Some(a),
                        Some(b)
                            if a.weight == b.weight
                                && (&a.relation, &a.start, &a.end)
                                    < (&b.relation, &b.start, &b.end) =>
                        {
                            Some(a)
                        }
                        keep => keep,
                    };
                }
                if let Some(a) = pair_best {
                    if best.as_ref().is_none_or(|(_, w)| a.weight > *w) {
                        best = Some((a.relation.clone(), a.weight));
                    }
                }
            }
        }
        per_candidate.push(best);
    }
    let mut chosen = 0;
    let mut top: Option<f64> = None;
    for (i, b) in per_candidate.iter().enumerate() {
        if let Some((_, w)) = b {
            if top.is_none_or(|t| *w > t) {
                top = Some(*w);
                chosen = i;
            }
        }
    }
    (chosen, per_candidate)
}

pub fn oracle_store(assertions: &[Assertion]) -> KbStore {
    KbStore::from_assertions(assertions.iter().cloned())
}

/// w* straight from its definition, `log(exp(exp(w_max)) / Σ exp(exp(w_j)))`.
/// Only finite for small weights.
pub fn direct_wstar(weights: &[f64]) -> f64 {
    let w_max = weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let num = w_max.exp().exp();
    let den: f64 = weights.iter().map(|w| w.exp().exp()).sum();
    (num / den).ln()
}

/// Random unit-ish vectors for `n` terms named `t0 .. t{n-1}`.
pub fn random_store(rng: &mut impl Rng, n: usize, dim: usize) -> EmbeddingStore {
    let mut store = EmbeddingStore::new(dim);
    for i in 0..n {
        let v: Vec<f32> = (0..dim).map(|_| rng.gen_range(-1.0f32..1.0)).collect();
        store.insert(format!("t{i}"), &v).unwrap();
    }
    store
}

/// A store plus relation models trained on random assertions over its terms.
pub fn random_trained_scorer(rng: &mut impl Rng, n_terms: usize, dim: usize) -> PrototypeScorer {
    let store = random_store(rng, n_terms, dim);
    let assertions: Vec<Assertion> = (0..rng.gen_range(5..40))
        .map(|_| {
            let s = format!("t{}", rng.gen_range(0..n_terms));
            let e = format!("t{}", rng.gen_range(0..n_terms));
            let r = RELATIONS.choose(rng).unwrap();
            Assertion::new(*r, key(&s), key(&e), rng.gen_range(0.1..4.0)).unwrap()
        })
        .collect();
    let kb = KbStore::from_assertions(assertions);
    let models = RelationModels::train(&store, &kb, 1).unwrap();
    PrototypeScorer::new(store, models).unwrap()
}

/// Normalize whitespace runs to single spaces.
pub fn squash(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn random_word(rng: &mut impl Rng) -> String {
    let len = rng.gen_range(1..9);
    let mut w: String = (0..len)
        .map(|_| rng.gen_range(b'a'..=b'z') as char)
        .collect();
    if rng.gen_bool(0.2) {
        w.push('_');
        w.push(rng.gen_range(b'a'..=b'z') as char);
    }
    w
}

/// Free text for prepositions and determiners, including characters the
/// printer has to escape.
fn random_text(rng: &mut impl Rng) -> String {
    const EXTRA: &[&str] = &["\"", "\\", " ", "(", ")", ";", ":", "é", "'"];
    let mut s = random_word(rng);
    for _ in 0..rng.gen_range(0..3) {
        s.push_str(EXTRA.choose(rng).unwrap());
        s.push_str(&random_word(rng));
    }
    s
}

/// Requests over an open vocabulary, for protocol round trips.
pub fn random_protocol_request(rng: &mut impl Rng) -> AmbiguityRequest {
    let det = |rng: &mut ChaCha8Rng| rng.gen_bool(0.6).then(|| random_text(rng));
    let mut r = ChaCha8Rng::seed_from_u64(rng.gen());
    let candidates = (0..r.gen_range(1..=5))
        .map(|_| match r.gen_range(0..3) {
            0 => Candidate::verb(key(&random_word(&mut r))),
            1 => {
                let d = det(&mut r);
                Candidate::noun_phrase(key(&random_word(&mut r)), d)
            }
            _ => {
                let p = random_text(&mut r);
                let d = det(&mut r);
                Candidate::prep_phrase(p, key(&random_word(&mut r)), d)
            }
        })
        .collect();
    let prep = random_text(&mut r);
    let d = det(&mut r);
    AmbiguityRequest::new(prep, key(&random_word(&mut r)), d, candidates).unwrap()
}

/// Between zero and `max - 1` random assertions.
pub fn up_to_assertions(rng: &mut impl Rng, max: usize) -> Vec<Assertion> {
    let n = rng.gen_range(0..max);
    random_assertions(rng, n)
}
