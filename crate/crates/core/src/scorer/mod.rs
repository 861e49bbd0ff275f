//! Fallback relation scoring for concept pairs the knowledge base cannot
//! connect directly.
//!
//! The pieces are pluggable: any [`RelationScorer`] paired with any
//! [`NeighborSource`] feeds [`aggregate_wstar`]. The shipped scorer is
//! [`PrototypeScorer`], which fits one offset prototype per relation from
//! knowledge-base assertions and an embedding store.

mod aggregate;
mod embeddings;
mod models;

use std::collections::HashMap;
use std::io::BufRead;

use serde::Serialize;
use thiserror::Error;

use crate::kb::ConceptKey;

pub use aggregate::{
    aggregate_wstar, score_neighborhoods, trim_and_aggregate, wstar, AggregationConfig,
    AggregationTrace, ScoredPair,
};
pub use embeddings::{cosine, EmbeddingStore, Lookup, Neighborhood};
pub use models::{PrototypeScorer, RelationModel, RelationModels, MODEL_FORMAT_VERSION};

#[derive(Debug, Error)]
pub enum ScorerError {
    #[error("embedding line {line}: {message}")]
    Ingest { line: usize, message: String },
    #[error("vector dimension {found} does not match store dimension {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("unknown concept {0}")]
    UnknownConcept(ConceptKey),
    #[error("{concept} has only {available} candidate neighbors, {wanted} requested")]
    NotEnoughNeighbors {
        concept: ConceptKey,
        wanted: usize,
        available: usize,
    },
    #[error("no relation reaches min_support = {min_support}")]
    EmptyModelSet { min_support: usize },
    #[error("aggregation config: {0}")]
    Config(String),
    #[error("relation model file: {0}")]
    ModelFormat(String),
    #[error("w* table line {line}: {message}")]
    Table { line: usize, message: String },
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RelationScore {
    pub relation: String,
    pub weight: f64,
}

/// Predicts the highest-weighted relation for a concept pair.
pub trait RelationScorer: Send + Sync {
    fn score_pair(&self, a: &ConceptKey, b: &ConceptKey) -> Result<RelationScore, ScorerError>;
}

/// Supplies the `k` nearest neighbors of a concept.
pub trait NeighborSource: Send + Sync {
    fn neighborhood(&self, concept: &ConceptKey, k: usize) -> Result<Neighborhood, ScorerError>;
}

impl NeighborSource for EmbeddingStore {
    fn neighborhood(&self, concept: &ConceptKey, k: usize) -> Result<Neighborhood, ScorerError> {
        self.nearest_neighbors(concept, k)
    }
}

impl NeighborSource for PrototypeScorer {
    fn neighborhood(&self, concept: &ConceptKey, k: usize) -> Result<Neighborhood, ScorerError> {
        self.store().nearest_neighbors(concept, k)
    }
}

/// One fallback answer for a (PP noun, candidate head) pair.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FallbackScore {
    pub relation: String,
    pub w_star: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace: Option<AggregationTrace>,
}

/// What the resolver consults when the knowledge base has nothing.
pub trait FallbackScorer: Send + Sync {
    fn score(&self, pp_noun: &ConceptKey, head: &ConceptKey) -> Result<FallbackScore, ScorerError>;
}

/// Neighborhood-aggregated w* over any scorer that is also a neighbor source.
#[derive(Debug, Clone)]
pub struct WStarFallback<S> {
    scorer: S,
    config: AggregationConfig,
}

impl<S: RelationScorer + NeighborSource> WStarFallback<S> {
    pub fn new(scorer: S, config: AggregationConfig) -> Result<Self, ScorerError> {
        config.validate()?;
        Ok(WStarFallback { scorer, config })
    }

    pub fn scorer(&self) -> &S {
        &self.scorer
    }

    pub fn config(&self) -> AggregationConfig {
        self.config
    }
}

impl<S: RelationScorer + NeighborSource> FallbackScorer for WStarFallback<S> {
    fn score(&self, pp_noun: &ConceptKey, head: &ConceptKey) -> Result<FallbackScore, ScorerError> {
        let trace = aggregate_wstar(&self.scorer, &self.scorer, pp_noun, head, self.config)?;
        Ok(FallbackScore {
            relation: trace.best_relation.clone(),
            w_star: trace.w_star,
            trace: Some(trace),
        })
    }
}

/// Fixed w* answers read from a table, for replaying externally computed
/// scores. Pairs are looked up in either order.
#[derive(Debug, Clone, Default)]
pub struct TabulatedFallback {
    table: HashMap<(ConceptKey, ConceptKey), (String, f64)>,
}

impl TabulatedFallback {
    pub fn insert(&mut self, pp_noun: ConceptKey, head: ConceptKey, relation: &str, w_star: f64) {
        self.table
            .insert((pp_noun, head), (relation.to_string(), w_star));
    }

    /// Lines of `pp_noun<TAB>head<TAB>relation<TAB>w*`; `#` starts a comment.
    pub fn load<R: BufRead>(reader: R) -> Result<Self, ScorerError> {
        let mut out = TabulatedFallback::default();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = |message: &str| ScorerError::Table {
                line: i + 1,
                message: message.to_string(),
            };
            let cols: Vec<&str> = line.split('\t').map(str::trim).collect();
            let [a, b, rel, w] = cols[..] else {
                return Err(bad("expected four tab-separated columns"));
            };
            let a = ConceptKey::new(a).map_err(|_| bad("invalid concept"))?;
            let b = ConceptKey::new(b).map_err(|_| bad("invalid concept"))?;
            let w: f64 = w.parse().map_err(|_| bad("w* is not a number"))?;
            if !w.is_finite() {
                return Err(bad("w* is not finite"));
            }
            out.insert(a, b, rel, w);
        }
        Ok(out)
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }
}

impl FallbackScorer for TabulatedFallback {
    fn score(&self, pp_noun: &ConceptKey, head: &ConceptKey) -> Result<FallbackScore, ScorerError> {
        self.table
            .get(&(pp_noun.clone(), head.clone()))
            .or_else(|| self.table.get(&(head.clone(), pp_noun.clone())))
            .map(|(relation, w_star)| FallbackScore {
                relation: relation.clone(),
                w_star: *w_star,
                trace: None,
            })
            .ok_or_else(|| ScorerError::UnknownConcept(head.clone()))
    }
}
