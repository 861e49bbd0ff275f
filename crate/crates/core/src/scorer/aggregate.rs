//! Neighborhood pairing, outlier trimming and the w* aggregate.
//!
//! Both concepts are widened to neighborhoods of `k + 1` members and every
//! cross pair is scored, giving `(k + 1)^2` weights. The `trim` largest and
//! `trim` smallest are discarded with their relations. Over the `n`
//! retained weights `w` we compute
//!
//! ```text
//! w* = log max_i softmax(exp(w))_i
//!    = -log sum_j exp(exp(w_j) - exp(w_max))
//! ```
//!
//! The second form never exponentiates a large `exp(w)` directly. Since the
//! maximal term of the sum is exactly 1 and every term is at most 1,
//! `w*` lies in `[-ln n, 0]`, reaching `-ln n` only when all weights are
//! equal.

use serde::Serialize;

use super::embeddings::Neighborhood;
use super::{NeighborSource, RelationScorer, ScorerError};
use crate::kb::ConceptKey;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct AggregationConfig {
    /// Neighbors drawn per concept (the neighborhood has `k + 1` members).
    pub k: usize,
    /// Weights dropped from each end of the sorted list.
    pub trim: usize,
}

impl Default for AggregationConfig {
    fn default() -> Self {
        AggregationConfig { k: 5, trim: 3 }
    }
}

impl AggregationConfig {
    pub fn new(k: usize, trim: usize) -> Result<Self, ScorerError> {
        let cfg = AggregationConfig { k, trim };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn pair_count(&self) -> usize {
        (self.k + 1) * (self.k + 1)
    }

    pub fn retained_count(&self) -> usize {
        self.pair_count().saturating_sub(2 * self.trim)
    }

    pub fn validate(&self) -> Result<(), ScorerError> {
        if self.pair_count() <= 2 * self.trim {
            return Err(ScorerError::Config(format!(
                "(k+1)^2 = {} pairs cannot survive trimming {} from each end",
                self.pair_count(),
                self.trim
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoredPair {
    pub a: ConceptKey,
    pub b: ConceptKey,
    pub relation: String,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AggregationTrace {
    /// All cross-neighborhood pairs, in generation order.
    pub pair_scores: Vec<ScoredPair>,
    /// Survivors of trimming, ascending by weight.
    pub retained: Vec<ScoredPair>,
    pub trimmed_low: Vec<ScoredPair>,
    pub trimmed_high: Vec<ScoredPair>,
    pub w_star: f64,
    /// Relation of the largest retained weight.
    pub best_relation: String,
}

impl AggregationTrace {
    pub fn retained_weights(&self) -> Vec<f64> {
        self.retained.iter().map(|p| p.weight).collect()
    }
}

/// `log max softmax(exp(w))` in its overflow-free form.
///
/// # Panics
///
/// Panics on an empty slice or a non-finite weight.
pub fn wstar(weights: &[f64]) -> f64 {
    assert!(!weights.is_empty(), "w* of an empty weight vector");
    assert!(
        weights.iter().all(|w| w.is_finite()),
        "w* requires finite weights"
    );
    let w_max = weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let scale = w_max.exp();
    let sum: f64 = weights
        .iter()
        .map(|&w| {
            if w == w_max {
                1.0
            } else {
                // exp(w) - exp(w_max) = exp(w_max) * expm1(w - w_max)
                (scale * (w - w_max).exp_m1()).exp()
            }
        })
        .sum();
    -sum.ln()
}

/// Order pairs by weight, then by relation and concepts, so that trimming
/// and the best relation are independent of input order.
fn total_order(x: &ScoredPair, y: &ScoredPair) -> std::cmp::Ordering {
    x.weight
        .total_cmp(&y.weight)
        .then_with(|| x.relation.cmp(&y.relation))
        .then_with(|| x.a.cmp(&y.a))
        .then_with(|| x.b.cmp(&y.b))
}

/// Trim `trim` pairs from each end and aggregate the rest.
pub fn trim_and_aggregate(
    pair_scores: Vec<ScoredPair>,
    trim: usize,
) -> Result<AggregationTrace, ScorerError> {
    if pair_scores.len() <= 2 * trim {
        return Err(ScorerError::Config(format!(
            "{} pair scores cannot survive trimming {} from each end",
            pair_scores.len(),
            trim
        )));
    }
    if let Some(bad) = pair_scores.iter().find(|p| !p.weight.is_finite()) {
        return Err(ScorerError::Config(format!(
            "non-finite weight for ({}, {})",
            bad.a, bad.b
        )));
    }
    let mut sorted = pair_scores.clone();
    sorted.sort_by(total_order);
    let trimmed_high = sorted.split_off(sorted.len() - trim);
    let retained = sorted.split_off(trim);
    let trimmed_low = sorted;

    let weights: Vec<f64> = retained.iter().map(|p| p.weight).collect();
    let w_star = wstar(&weights);
    // Sorted ascending by (weight, relation), so the first pair carrying the
    // top weight has the smallest relation label among ties.
    let top = weights[weights.len() - 1];
    let best_relation = retained
        .iter()
        .find(|p| p.weight == top)
        .map(|p| p.relation.clone())
        .unwrap_or_default();

    Ok(AggregationTrace {
        pair_scores,
        retained,
        trimmed_low,
        trimmed_high,
        w_star,
        best_relation,
    })
}

/// Score every pair drawn from two neighborhoods, first-neighborhood major.
pub fn score_neighborhoods<S: RelationScorer + ?Sized>(
    scorer: &S,
    left: &Neighborhood,
    right: &Neighborhood,
) -> Result<Vec<ScoredPair>, ScorerError> {
    let mut out = Vec::with_capacity(left.len() * right.len());
    for a in left.members() {
        for b in right.members() {
            let s = scorer.score_pair(a, b)?;
            out.push(ScoredPair {
                a: a.clone(),
                b: b.clone(),
                relation: s.relation,
                weight: s.weight,
            });
        }
    }
    Ok(out)
}

/// Full neighborhood → score → trim → w* pipeline for one concept pair.
pub fn aggregate_wstar<N, S>(
    neighbors: &N,
    scorer: &S,
    a: &ConceptKey,
    b: &ConceptKey,
    config: AggregationConfig,
) -> Result<AggregationTrace, ScorerError>
where
    N: NeighborSource + ?Sized,
    S: RelationScorer + ?Sized,
{
    config.validate()?;
    let left = neighbors.neighborhood(a, config.k)?;
    let right = neighbors.neighborhood(b, config.k)?;
    let pairs = score_neighborhoods(scorer, &left, &right)?;
    trim_and_aggregate(pairs, config.trim)
}
