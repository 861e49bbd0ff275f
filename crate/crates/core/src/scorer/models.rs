//! Per-relation prototype-offset models.
//!
//! Each relation is summarized by the weight-weighted mean of
//! `vec(end) - vec(start)` over its assertions. A concept pair is scored
//! against a relation by the cosine between its offset and the prototype,
//! clamped at zero and scaled by the relation's mean assertion weight.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::embeddings::{cosine, EmbeddingStore};
use super::{RelationScore, RelationScorer, ScorerError};
use crate::kb::{ConceptKey, KbStore};

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelationModel {
    pub relation: String,
    pub prototype: Vec<f64>,
    pub mean_weight: f64,
    pub support: usize,
}

/// Relation models sorted by label. Serialized as versioned JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelationModels {
    version: u32,
    dim: usize,
    min_support: usize,
    models: Vec<RelationModel>,
}

impl RelationModels {
    /// Fit one prototype per relation with at least `min_support` assertions
    /// whose concepts are both in the embedding vocabulary.
    pub fn train(
        store: &EmbeddingStore,
        kb: &KbStore,
        min_support: usize,
    ) -> Result<Self, ScorerError> {
        struct Acc {
            weighted: Vec<f64>,
            plain: Vec<f64>,
            weight_sum: f64,
            count: usize,
        }
        let dim = store.dim();
        let mut acc: BTreeMap<&str, Acc> = BTreeMap::new();
        for a in kb.assertions() {
            let (Some(s), Some(e)) = (store.get(a.start.as_str()), store.get(a.end.as_str()))
            else {
                continue;
            };
            let slot = acc.entry(a.relation.as_str()).or_insert_with(|| Acc {
                weighted: vec![0.0; dim],
                plain: vec![0.0; dim],
                weight_sum: 0.0,
                count: 0,
            });
            for i in 0..dim {
                let off = f64::from(e[i]) - f64::from(s[i]);
                slot.weighted[i] += a.weight * off;
                slot.plain[i] += off;
            }
            slot.weight_sum += a.weight;
            slot.count += 1;
        }

        let models: Vec<RelationModel> = acc
            .into_iter()
            .filter(|(_, a)| a.count >= min_support.max(1))
            .map(|(rel, a)| {
                // All-zero weights leave the weighted mean undefined.
                let prototype = if a.weight_sum > 0.0 {
                    a.weighted.iter().map(|x| x / a.weight_sum).collect()
                } else {
                    a.plain.iter().map(|x| x / a.count as f64).collect()
                };
                RelationModel {
                    relation: rel.to_string(),
                    prototype,
                    mean_weight: a.weight_sum / a.count as f64,
                    support: a.count,
                }
            })
            .collect();
        if models.is_empty() {
            return Err(ScorerError::EmptyModelSet { min_support });
        }
        Ok(RelationModels {
            version: MODEL_FORMAT_VERSION,
            dim,
            min_support,
            models,
        })
    }

    /// Assemble from explicit models; they are re-sorted by label.
    pub fn from_models(dim: usize, mut models: Vec<RelationModel>) -> Result<Self, ScorerError> {
        if models.is_empty() {
            return Err(ScorerError::EmptyModelSet { min_support: 0 });
        }
        for m in &models {
            if m.prototype.len() != dim {
                return Err(ScorerError::DimensionMismatch {
                    expected: dim,
                    found: m.prototype.len(),
                });
            }
        }
        models.sort_by(|a, b| a.relation.cmp(&b.relation));
        let min_support = models.iter().map(|m| m.support).min().unwrap_or(0);
        Ok(RelationModels {
            version: MODEL_FORMAT_VERSION,
            dim,
            min_support,
            models,
        })
    }

    pub fn models(&self) -> &[RelationModel] {
        &self.models
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn write_json<W: Write>(&self, out: W) -> Result<(), ScorerError> {
        serde_json::to_writer_pretty(out, self).map_err(|e| ScorerError::ModelFormat(e.to_string()))
    }

    pub fn read_json<R: Read>(input: R) -> Result<Self, ScorerError> {
        let models: RelationModels =
            serde_json::from_reader(input).map_err(|e| ScorerError::ModelFormat(e.to_string()))?;
        if models.version != MODEL_FORMAT_VERSION {
            return Err(ScorerError::ModelFormat(format!(
                "unsupported model file version {}",
                models.version
            )));
        }
        if models
            .models
            .iter()
            .any(|m| m.prototype.len() != models.dim)
        {
            return Err(ScorerError::ModelFormat(
                "prototype dimension mismatch".into(),
            ));
        }
        Ok(models)
    }
}

/// Prototype-offset relation scorer over one embedding space.
#[derive(Debug, Clone)]
pub struct PrototypeScorer {
    store: EmbeddingStore,
    models: RelationModels,
}

impl PrototypeScorer {
    pub fn new(store: EmbeddingStore, models: RelationModels) -> Result<Self, ScorerError> {
        if store.dim() != models.dim() {
            return Err(ScorerError::DimensionMismatch {
                expected: store.dim(),
                found: models.dim(),
            });
        }
        Ok(PrototypeScorer { store, models })
    }

    pub fn store(&self) -> &EmbeddingStore {
        &self.store
    }

    pub fn models(&self) -> &RelationModels {
        &self.models
    }
}

impl RelationScorer for PrototypeScorer {
    fn score_pair(&self, a: &ConceptKey, b: &ConceptKey) -> Result<RelationScore, ScorerError> {
        let va = self.store.resolve(a)?;
        let vb = self.store.resolve(b)?;
        let forward: Vec<f64> = va
            .as_slice()
            .iter()
            .zip(vb.as_slice())
            .map(|(&x, &y)| f64::from(y) - f64::from(x))
            .collect();
        let backward: Vec<f64> = forward.iter().map(|x| -x).collect();

        let mut best: Option<RelationScore> = None;
        for m in &self.models.models {
            let cos = cosine(&forward, &m.prototype).max(cosine(&backward, &m.prototype));
            let weight = m.mean_weight * cos.max(0.0);
            // Models are sorted by label, so strict `>` keeps the first on ties.
            if best.as_ref().is_none_or(|b| weight > b.weight) {
                best = Some(RelationScore {
                    relation: m.relation.clone(),
                    weight,
                });
            }
        }
        best.ok_or(ScorerError::EmptyModelSet { min_support: 0 })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kb::Assertion;

    fn key(s: &str) -> ConceptKey {
        ConceptKey::new(s).unwrap()
    }

    fn toy_store() -> EmbeddingStore {
        EmbeddingStore::load("a 1 0 0\nb 0 1 0\nc 0 0 1\nd 1 1 0\n".as_bytes()).unwrap()
    }

    #[test]
    fn singleton_relation_prototype_is_the_offset() {
        let kb =
            KbStore::from_assertions([Assertion::new("HasA", key("a"), key("b"), 2.0).unwrap()]);
        let m = RelationModels::train(&toy_store(), &kb, 1).unwrap();
        assert_eq!(m.models().len(), 1);
        let r = &m.models()[0];
        assert_eq!(r.prototype, vec![-1.0, 1.0, 0.0]);
        assert_eq!((r.mean_weight, r.support), (2.0, 1));
    }

    #[test]
    fn weighted_mean_prototype() {
        // offsets: b-a = (-1,1,0) w=1 ; c-a = (-1,0,1) w=3
        // prototype = (1*(-1,1,0) + 3*(-1,0,1)) / 4 = (-1, 0.25, 0.75)
        let kb = KbStore::from_assertions([
            Assertion::new("UsedFor", key("a"), key("b"), 1.0).unwrap(),
            Assertion::new("UsedFor", key("a"), key("c"), 3.0).unwrap(),
        ]);
        let m = RelationModels::train(&toy_store(), &kb, 1).unwrap();
        assert_eq!(m.models()[0].prototype, vec![-1.0, 0.25, 0.75]);
        assert_eq!(m.models()[0].mean_weight, 2.0);
    }

    #[test]
    fn support_threshold_and_oov_assertions() {
        let kb = KbStore::from_assertions([
            Assertion::new("HasA", key("a"), key("b"), 1.0).unwrap(),
            Assertion::new("IsA", key("a"), key("c"), 1.0).unwrap(),
            Assertion::new("IsA", key("b"), key("c"), 1.0).unwrap(),
            Assertion::new("IsA", key("a"), key("zzz"), 1.0).unwrap(),
        ]);
        let m = RelationModels::train(&toy_store(), &kb, 2).unwrap();
        let labels: Vec<_> = m.models().iter().map(|r| r.relation.as_str()).collect();
        assert_eq!(labels, ["IsA"]);
        assert_eq!(m.models()[0].support, 2);
        assert!(matches!(
            RelationModels::train(&toy_store(), &kb, 3),
            Err(ScorerError::EmptyModelSet { min_support: 3 })
        ));
    }

    #[test]
    fn exact_offset_scores_mean_weight() {
        let kb =
            KbStore::from_assertions([Assertion::new("HasA", key("a"), key("b"), 2.0).unwrap()]);
        let models = RelationModels::train(&toy_store(), &kb, 1).unwrap();
        let scorer = PrototypeScorer::new(toy_store(), models).unwrap();
        let s = scorer.score_pair(&key("a"), &key("b")).unwrap();
        assert_eq!(s.relation, "HasA");
        assert!((s.weight - 2.0).abs() < 1e-12);
        let r = scorer.score_pair(&key("b"), &key("a")).unwrap();
        assert_eq!(r, s);
    }

    #[test]
    fn orthogonal_pair_scores_zero_with_first_label() {
        let models = RelationModels::from_models(
            3,
            vec![
                RelationModel {
                    relation: "UsedFor".into(),
                    prototype: vec![0.0, 0.0, 1.0],
                    mean_weight: 5.0,
                    support: 1,
                },
                RelationModel {
                    relation: "AtLocation".into(),
                    prototype: vec![0.0, 0.0, 2.0],
                    mean_weight: 1.0,
                    support: 1,
                },
            ],
        )
        .unwrap();
        let scorer = PrototypeScorer::new(toy_store(), models).unwrap();
        // a -> b offset (-1, 1, 0) is orthogonal to both prototypes.
        let s = scorer.score_pair(&key("a"), &key("b")).unwrap();
        assert_eq!((s.relation.as_str(), s.weight), ("AtLocation", 0.0));
    }

    #[test]
    fn json_roundtrip_and_version_check() {
        let kb =
            KbStore::from_assertions([Assertion::new("HasA", key("a"), key("b"), 2.0).unwrap()]);
        let m = RelationModels::train(&toy_store(), &kb, 1).unwrap();
        let mut buf = Vec::new();
        m.write_json(&mut buf).unwrap();
        assert_eq!(RelationModels::read_json(buf.as_slice()).unwrap(), m);

        let bumped = String::from_utf8(buf)
            .unwrap()
            .replace("\"version\": 1", "\"version\": 99");
        assert!(matches!(
            RelationModels::read_json(bumped.as_bytes()),
            Err(ScorerError::ModelFormat(_))
        ));
    }
}
