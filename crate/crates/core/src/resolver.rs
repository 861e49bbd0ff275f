//! Attachment decisions for one ambiguous prepositional phrase.
//!
//! Every candidate site is paired with the PP noun across their surface
//! variants, the knowledge base is asked for the strongest direct assertion
//! per pair, and the per-candidate maxima decide. When no candidate has any
//! knowledge-base hit, a fallback scorer can supply w* values instead. The
//! two scales are never mixed in one comparison.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;
use thiserror::Error;

use crate::kb::{ConceptKey, KbHit, KbStore};
use crate::morph::{Inflector, VariantSet};
use crate::scorer::{FallbackScorer, ScorerError};

#[derive(Debug, Error)]
pub enum ResolveError {
    #[error("ambiguity request has no candidate attachments")]
    EmptyCandidates,
    #[error("mode {0} needs a knowledge base")]
    MissingKb(BackendMode),
    #[error("mode {0} needs a fallback scorer")]
    MissingFallback(BackendMode),
    #[error("fallback scorer failed: {0}")]
    Fallback(#[from] ScorerError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum CandidateKind {
    Verb,
    NounPhrase,
    PrepPhrase,
}

impl CandidateKind {
    /// Tag used on the wire: `V`, `NP`, `PP`.
    pub fn tag(self) -> &'static str {
        match self {
            CandidateKind::Verb => "V",
            CandidateKind::NounPhrase => "NP",
            CandidateKind::PrepPhrase => "PP",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        match tag.to_ascii_uppercase().as_str() {
            "V" => Some(CandidateKind::Verb),
            "NP" => Some(CandidateKind::NounPhrase),
            "PP" => Some(CandidateKind::PrepPhrase),
            _ => None,
        }
    }
}

/// One possible attachment site.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Candidate {
    kind: CandidateKind,
    head: ConceptKey,
    determiner: Option<String>,
    preposition: Option<String>,
}

impl Candidate {
    pub fn verb(lemma: ConceptKey) -> Self {
        Candidate {
            kind: CandidateKind::Verb,
            head: lemma,
            determiner: None,
            preposition: None,
        }
    }

    pub fn noun_phrase(noun: ConceptKey, determiner: Option<String>) -> Self {
        Candidate {
            kind: CandidateKind::NounPhrase,
            head: noun,
            determiner,
            preposition: None,
        }
    }

    /// An earlier PP as attachment site; its noun is the head.
    pub fn prep_phrase(
        preposition: impl Into<String>,
        noun: ConceptKey,
        determiner: Option<String>,
    ) -> Self {
        Candidate {
            kind: CandidateKind::PrepPhrase,
            head: noun,
            determiner,
            preposition: Some(preposition.into()),
        }
    }

    pub fn kind(&self) -> CandidateKind {
        self.kind
    }

    pub fn head(&self) -> &ConceptKey {
        &self.head
    }

    pub fn determiner(&self) -> Option<&str> {
        self.determiner.as_deref()
    }

    pub fn preposition(&self) -> Option<&str> {
        self.preposition.as_deref()
    }

    pub fn variants(&self, inflector: &Inflector) -> VariantSet {
        match self.kind {
            CandidateKind::Verb => inflector.verb_variants(&self.head),
            CandidateKind::NounPhrase | CandidateKind::PrepPhrase => {
                inflector.noun_variants(&self.head)
            }
        }
    }
}

/// An ambiguous PP plus its candidate sites, parser-preferred first.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AmbiguityRequest {
    pub preposition: String,
    pub pp_noun: ConceptKey,
    pub pp_determiner: Option<String>,
    pub candidates: Vec<Candidate>,
}

impl AmbiguityRequest {
    pub fn new(
        preposition: impl Into<String>,
        pp_noun: ConceptKey,
        pp_determiner: Option<String>,
        candidates: Vec<Candidate>,
    ) -> Result<Self, ResolveError> {
        if candidates.is_empty() {
            return Err(ResolveError::EmptyCandidates);
        }
        Ok(AmbiguityRequest {
            preposition: preposition.into(),
            pp_noun,
            pp_determiner,
            candidates,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum BackendMode {
    KbOnly,
    FallbackOnly,
    Hybrid,
}

impl fmt::Display for BackendMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BackendMode::KbOnly => "kb-only",
            BackendMode::FallbackOnly => "fallback-only",
            BackendMode::Hybrid => "hybrid",
        })
    }
}

impl FromStr for BackendMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "kb-only" | "kb" => Ok(BackendMode::KbOnly),
            "fallback-only" | "fallback" => Ok(BackendMode::FallbackOnly),
            "hybrid" => Ok(BackendMode::Hybrid),
            other => Err(format!(
                "unknown mode {other:?} (expected kb-only, fallback-only or hybrid)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ScoreSource {
    Kb,
    Fallback,
    None,
}

impl ScoreSource {
    pub fn as_str(self) -> &'static str {
        match self {
            ScoreSource::Kb => "kb",
            ScoreSource::Fallback => "fallback",
            ScoreSource::None => "none",
        }
    }
}

/// Which side of a KB hit was the assertion's start.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum StartSide {
    PpNoun,
    Candidate,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CandidateScore {
    pub candidate_index: usize,
    pub relation: Option<String>,
    pub weight: Option<f64>,
    /// Set for KB hits only.
    pub start: Option<StartSide>,
    pub source: ScoreSource,
}

impl CandidateScore {
    pub fn none(candidate_index: usize) -> Self {
        CandidateScore {
            candidate_index,
            relation: None,
            weight: None,
            start: None,
            source: ScoreSource::None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AttachmentDecision {
    pub chosen_index: usize,
    pub chosen: Candidate,
    pub scores: Vec<CandidateScore>,
    pub backend_mode: BackendMode,
    /// No knowledge informed the choice; the parser default was kept.
    pub defaulted: bool,
}

impl AttachmentDecision {
    pub fn chosen_score(&self) -> &CandidateScore {
        &self.scores[self.chosen_index]
    }
}

/// One variant pair to look up.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VariantPair {
    pub candidate_index: usize,
    pub pp_form: ConceptKey,
    pub candidate_form: ConceptKey,
}

/// Backends available to [`Resolver::decide`].
#[derive(Clone, Copy, Default)]
pub struct Backends<'a> {
    pub kb: Option<&'a KbStore>,
    pub fallback: Option<&'a dyn FallbackScorer>,
}

impl fmt::Debug for Backends<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Backends")
            .field("kb", &self.kb.map(KbStore::len))
            .field("fallback", &self.fallback.is_some())
            .finish()
    }
}

/// The decision procedure, parameterized by its noun inflector.
#[derive(Debug, Clone, Default)]
pub struct Resolver {
    inflector: Inflector,
}

impl Resolver {
    pub fn new(inflector: Inflector) -> Self {
        Resolver { inflector }
    }

    pub fn inflector(&self) -> &Inflector {
        &self.inflector
    }

    /// Cross the PP noun's variants with each candidate's variants.
    /// Candidates in request order, PP variant major, candidate variant minor.
    pub fn generate_pairs(&self, request: &AmbiguityRequest) -> Vec<VariantPair> {
        let pp_forms = self.inflector.noun_variants(&request.pp_noun);
        let mut out = Vec::new();
        for (idx, cand) in request.candidates.iter().enumerate() {
            let cand_forms = cand.variants(&self.inflector);
            for p in &pp_forms {
                for c in &cand_forms {
                    out.push(VariantPair {
                        candidate_index: idx,
                        pp_form: p.clone(),
                        candidate_form: c.clone(),
                    });
                }
            }
        }
        out
    }

    pub fn decide(
        &self,
        request: &AmbiguityRequest,
        backends: Backends<'_>,
        mode: BackendMode,
    ) -> Result<AttachmentDecision, ResolveError> {
        if request.candidates.is_empty() {
            return Err(ResolveError::EmptyCandidates);
        }
        let kb = match mode {
            BackendMode::KbOnly | BackendMode::Hybrid => {
                Some(backends.kb.ok_or(ResolveError::MissingKb(mode))?)
            }
            BackendMode::FallbackOnly => None,
        };
        let fallback = match mode {
            BackendMode::FallbackOnly | BackendMode::Hybrid => Some(
                backends
                    .fallback
                    .ok_or(ResolveError::MissingFallback(mode))?,
            ),
            BackendMode::KbOnly => None,
        };

        let mut scores = match kb {
            Some(kb) => self.kb_scores(request, kb),
            None => (0..request.candidates.len())
                .map(CandidateScore::none)
                .collect(),
        };
        let any_kb = scores.iter().any(|s| s.source == ScoreSource::Kb);
        if let (Some(fb), false) = (fallback, any_kb) {
            scores = fallback_scores(request, fb)?;
        }

        let chosen = argmax_earliest(&scores);
        let chosen_index = chosen.unwrap_or(0);
        Ok(AttachmentDecision {
            chosen_index,
            chosen: request.candidates[chosen_index].clone(),
            scores,
            backend_mode: mode,
            defaulted: chosen.is_none(),
        })
    }

    /// Decide each request independently, preserving order.
    pub fn resolve_sequence(
        &self,
        requests: &[AmbiguityRequest],
        backends: Backends<'_>,
        mode: BackendMode,
    ) -> Result<Vec<AttachmentDecision>, ResolveError> {
        requests
            .iter()
            .map(|r| self.decide(r, backends, mode))
            .collect()
    }

    fn kb_scores(&self, request: &AmbiguityRequest, kb: &KbStore) -> Vec<CandidateScore> {
        let pairs = self.generate_pairs(request);
        let raw: Vec<(VariantPair, Option<KbHit>)> = pairs
            .into_iter()
            .map(|p| {
                let hit = kb.best_assertion(&p.pp_form, &p.candidate_form);
                (p, hit)
            })
            .collect();
        compress(request.candidates.len(), &raw)
    }
}

/// Keep each candidate's highest-weighted hit over all its variant pairs.
/// Equal weights keep the earlier pair. The start side is reported against
/// the base forms so it reads in terms of the partial parse.
pub fn compress(
    candidate_count: usize,
    raw: &[(VariantPair, Option<KbHit>)],
) -> Vec<CandidateScore> {
    let mut out: Vec<CandidateScore> = (0..candidate_count).map(CandidateScore::none).collect();
    for (pair, hit) in raw {
        let Some(hit) = hit else { continue };
        let slot = &mut out[pair.candidate_index];
        if slot.weight.is_some_and(|w| hit.weight <= w) {
            continue;
        }
        let start = if hit.starts_at(&pair.pp_form) {
            StartSide::PpNoun
        } else {
            StartSide::Candidate
        };
        *slot = CandidateScore {
            candidate_index: pair.candidate_index,
            relation: Some(hit.relation.clone()),
            weight: Some(hit.weight),
            start: Some(start),
            source: ScoreSource::Kb,
        };
    }
    out
}

fn fallback_scores(
    request: &AmbiguityRequest,
    fallback: &dyn FallbackScorer,
) -> Result<Vec<CandidateScore>, ResolveError> {
    request
        .candidates
        .iter()
        .enumerate()
        .map(
            |(idx, cand)| match fallback.score(&request.pp_noun, cand.head()) {
                Ok(s) => Ok(CandidateScore {
                    candidate_index: idx,
                    relation: Some(s.relation),
                    weight: Some(s.w_star),
                    start: None,
                    source: ScoreSource::Fallback,
                }),
                // Out-of-vocabulary concepts simply yield no score.
                Err(ScorerError::UnknownConcept(_)) => Ok(CandidateScore::none(idx)),
                Err(e) => Err(e.into()),
            },
        )
        .collect()
}

/// Index of the maximum weight, earliest on ties; `None` when nothing scored.
fn argmax_earliest(scores: &[CandidateScore]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, s) in scores.iter().enumerate() {
        if let Some(w) = s.weight {
            if best.is_none_or(|(_, bw)| w > bw) {
                best = Some((i, w));
            }
        }
    }
    best.map(|(i, _)| i)
}
