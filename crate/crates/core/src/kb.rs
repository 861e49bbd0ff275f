//! Commonsense assertion store.
//!
//! Assertions are ingested from either a ConceptNet 5.x tab-separated dump
//! or a line-oriented JSON fixture, and indexed by the unordered pair of
//! concepts they connect. Once built, a [`KbStore`] is read-only.

use std::collections::HashMap;
use std::fmt;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum KbError {
    #[error("invalid concept {0:?}: empty after normalization")]
    InvalidConcept(String),
    #[error("negative or non-finite weight {weight} for {relation}({start}, {end})")]
    InvalidWeight {
        relation: String,
        start: String,
        end: String,
        weight: f64,
    },
    #[error("I/O error while reading assertions: {0}")]
    Io(#[from] std::io::Error),
}

/// A normalized English concept label, e.g. `string_instrument`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct ConceptKey(String);

impl ConceptKey {
    /// Normalize raw text: trim surrounding punctuation, lowercase, and join
    /// internal whitespace/underscore runs with a single `_`.
    pub fn new(text: &str) -> Result<Self, KbError> {
        let trimmed = text.trim_matches(|c: char| !c.is_alphanumeric());
        let mut out = String::with_capacity(trimmed.len());
        let mut pending_sep = false;
        for c in trimmed.chars() {
            if c.is_whitespace() || c == '_' {
                pending_sep = true;
                continue;
            }
            if pending_sep {
                out.push('_');
                pending_sep = false;
            }
            out.extend(c.to_lowercase());
        }
        if out.is_empty() {
            return Err(KbError::InvalidConcept(text.to_string()));
        }
        Ok(ConceptKey(out))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

/// Free-function form of [`ConceptKey::new`].
pub fn normalize_concept(text: &str) -> Result<ConceptKey, KbError> {
    ConceptKey::new(text)
}

impl fmt::Display for ConceptKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl AsRef<str> for ConceptKey {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for ConceptKey {
    type Error = KbError;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        ConceptKey::new(&value)
    }
}

impl From<ConceptKey> for String {
    fn from(key: ConceptKey) -> Self {
        key.0
    }
}

/// One directed, weighted edge: `start --relation--> end`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assertion {
    #[serde(rename = "rel")]
    pub relation: String,
    pub start: ConceptKey,
    pub end: ConceptKey,
    pub weight: f64,
}

impl Assertion {
    pub fn new(
        relation: impl Into<String>,
        start: ConceptKey,
        end: ConceptKey,
        weight: f64,
    ) -> Result<Self, KbError> {
        let relation = relation.into();
        if !weight.is_finite() || weight < 0.0 {
            return Err(KbError::InvalidWeight {
                relation,
                start: start.0,
                end: end.0,
                weight,
            });
        }
        Ok(Assertion {
            relation,
            start,
            end,
            weight,
        })
    }
}

/// The highest-weighted assertion connecting a queried pair.
#[derive(Debug, Clone, PartialEq)]
pub struct KbHit {
    pub relation: String,
    pub weight: f64,
    pub start: ConceptKey,
    pub end: ConceptKey,
}

impl KbHit {
    /// True when `concept` is the assertion's start.
    pub fn starts_at(&self, concept: &ConceptKey) -> bool {
        &self.start == concept
    }
}

/// Which language each end of an assertion must carry to be kept.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LanguageFilter {
    pub start: String,
    pub end: String,
}

impl Default for LanguageFilter {
    fn default() -> Self {
        LanguageFilter {
            start: "en".to_string(),
            end: "en".to_string(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SkipReason {
    /// Wrong number of tab-separated fields, or an unparseable URI.
    MalformedRecord,
    /// Metadata is not JSON or lacks a numeric, non-negative `weight`.
    MalformedWeight,
    /// Fixture line that is not a valid assertion object.
    MalformedFixture,
    /// A concept outside the configured language pair.
    LanguageFiltered,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SkippedLine {
    /// 1-based line number.
    pub line: usize,
    pub reason: SkipReason,
}

/// What happened to every input line during ingestion.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SkipReport {
    pub lines_read: usize,
    pub kept: usize,
    pub skipped: Vec<SkippedLine>,
}

impl SkipReport {
    pub fn malformed(&self) -> usize {
        self.skipped
            .iter()
            .filter(|s| s.reason != SkipReason::LanguageFiltered)
            .count()
    }

    pub fn filtered(&self) -> usize {
        self.skipped.len() - self.malformed()
    }
}

impl fmt::Display for SkipReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} read, {} kept", self.lines_read, self.kept)?;
        if !self.skipped.is_empty() {
            write!(f, ", {} skipped", self.skipped.len())?;
        }
        Ok(())
    }
}

type PairKey = (ConceptKey, ConceptKey);

fn pair_key(a: &ConceptKey, b: &ConceptKey) -> PairKey {
    if a <= b {
        (a.clone(), b.clone())
    } else {
        (b.clone(), a.clone())
    }
}

/// Immutable assertion store indexed by unordered concept pair.
#[derive(Debug, Clone, Default)]
pub struct KbStore {
    assertions: Vec<Assertion>,
    by_pair: HashMap<PairKey, Vec<usize>>,
    source: Option<String>,
}

impl KbStore {
    /// Build a store from already-validated assertions.
    pub fn from_assertions(assertions: impl IntoIterator<Item = Assertion>) -> Self {
        let mut builder = KbBuilder::default();
        for a in assertions {
            builder.push(a);
        }
        builder.finish()
    }

    pub fn len(&self) -> usize {
        self.assertions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assertions.is_empty()
    }

    pub fn source(&self) -> Option<&str> {
        self.source.as_deref()
    }

    pub fn assertions(&self) -> &[Assertion] {
        &self.assertions
    }

    /// All assertions mentioning both concepts, in either direction.
    pub fn between<'s>(
        &'s self,
        a: &ConceptKey,
        b: &ConceptKey,
    ) -> impl Iterator<Item = &'s Assertion> + 's {
        self.by_pair
            .get(&pair_key(a, b))
            .into_iter()
            .flatten()
            .map(move |&i| &self.assertions[i])
    }

    /// Highest-weighted direct assertion between `a` and `b`. Ties go to the
    /// lexicographically smallest `(relation, start, end)`, so the answer does
    /// not depend on argument order. No multi-hop search.
    pub fn best_assertion(&self, a: &ConceptKey, b: &ConceptKey) -> Option<KbHit> {
        let mut best: Option<&Assertion> = None;
        for cand in self.between(a, b) {
            best = match best {
                None => Some(cand),
                Some(cur) if beats(cand, cur) => Some(cand),
                keep => keep,
            };
        }
        best.map(|x| KbHit {
            relation: x.relation.clone(),
            weight: x.weight,
            start: x.start.clone(),
            end: x.end.clone(),
        })
    }

    /// Write the store in the JSON fixture format, one assertion per line.
    pub fn write_fixture<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for a in &self.assertions {
            serde_json::to_writer(&mut out, a)?;
            out.write_all(b"\n")?;
        }
        out.flush()
    }
}

fn beats(cand: &Assertion, cur: &Assertion) -> bool {
    match cand.weight.total_cmp(&cur.weight) {
        std::cmp::Ordering::Greater => true,
        std::cmp::Ordering::Less => false,
        std::cmp::Ordering::Equal => {
            (&cand.relation, &cand.start, &cand.end) < (&cur.relation, &cur.start, &cur.end)
        }
    }
}

/// Single-writer accumulator; [`KbBuilder::finish`] freezes it into a store.
#[derive(Debug, Default)]
pub struct KbBuilder {
    store: KbStore,
}

impl KbBuilder {
    pub fn with_source(source: impl Into<String>) -> Self {
        let mut b = KbBuilder::default();
        b.store.source = Some(source.into());
        b
    }

    pub fn push(&mut self, assertion: Assertion) {
        let idx = self.store.assertions.len();
        self.store
            .by_pair
            .entry(pair_key(&assertion.start, &assertion.end))
            .or_default()
            .push(idx);
        self.store.assertions.push(assertion);
    }

    /// Ingest every line of `reader`, auto-detecting the format per line:
    /// lines starting with `{` are fixture objects, all others are dump
    /// records. Bad lines land in the returned report; I/O errors abort.
    pub fn ingest<R: BufRead>(
        &mut self,
        reader: R,
        filter: &LanguageFilter,
    ) -> Result<SkipReport, KbError> {
        let mut report = SkipReport::default();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            let trimmed = line.trim_end_matches(['\r', '\n']);
            if trimmed.trim().is_empty() {
                continue;
            }
            report.lines_read += 1;
            let parsed = if trimmed.trim_start().starts_with('{') {
                parse_fixture_line(trimmed)
            } else {
                parse_dump_line(trimmed, filter)
            };
            match parsed {
                Ok(a) => {
                    self.push(a);
                    report.kept += 1;
                }
                Err(reason) => report.skipped.push(SkippedLine {
                    line: i + 1,
                    reason,
                }),
            }
        }
        Ok(report)
    }

    pub fn finish(self) -> KbStore {
        self.store
    }
}

/// Ingest one stream into a fresh store.
pub fn ingest_dump<R: BufRead>(
    reader: R,
    filter: &LanguageFilter,
) -> Result<(KbStore, SkipReport), KbError> {
    let mut builder = KbBuilder::default();
    let report = builder.ingest(reader, filter)?;
    Ok((builder.finish(), report))
}

#[derive(Deserialize)]
struct FixtureLine {
    rel: String,
    start: String,
    end: String,
    weight: f64,
}

fn parse_fixture_line(line: &str) -> Result<Assertion, SkipReason> {
    let raw: FixtureLine = serde_json::from_str(line).map_err(|_| SkipReason::MalformedFixture)?;
    let start = ConceptKey::new(&raw.start).map_err(|_| SkipReason::MalformedFixture)?;
    let end = ConceptKey::new(&raw.end).map_err(|_| SkipReason::MalformedFixture)?;
    if raw.rel.trim().is_empty() {
        return Err(SkipReason::MalformedFixture);
    }
    Assertion::new(raw.rel.trim(), start, end, raw.weight).map_err(|_| SkipReason::MalformedWeight)
}

fn parse_dump_line(line: &str, filter: &LanguageFilter) -> Result<Assertion, SkipReason> {
    let fields: Vec<&str> = line.split('\t').collect();
    if fields.len() != 5 {
        return Err(SkipReason::MalformedRecord);
    }
    let relation = relation_label(fields[1]).ok_or(SkipReason::MalformedRecord)?;
    let (start_lang, start_term) = concept_parts(fields[2]).ok_or(SkipReason::MalformedRecord)?;
    let (end_lang, end_term) = concept_parts(fields[3]).ok_or(SkipReason::MalformedRecord)?;

    let meta: serde_json::Value =
        serde_json::from_str(fields[4]).map_err(|_| SkipReason::MalformedWeight)?;
    let weight = meta
        .get("weight")
        .and_then(serde_json::Value::as_f64)
        .ok_or(SkipReason::MalformedWeight)?;

    if start_lang != filter.start || end_lang != filter.end {
        return Err(SkipReason::LanguageFiltered);
    }
    let start = ConceptKey::new(start_term).map_err(|_| SkipReason::MalformedRecord)?;
    let end = ConceptKey::new(end_term).map_err(|_| SkipReason::MalformedRecord)?;
    Assertion::new(relation, start, end, weight).map_err(|_| SkipReason::MalformedWeight)
}

/// `/r/HasA` -> `HasA`; `/r/dbpedia/genre` -> `dbpedia/genre`.
fn relation_label(uri: &str) -> Option<&str> {
    let tail = uri.strip_prefix("/r/")?.trim_end_matches('/');
    (!tail.is_empty()).then_some(tail)
}

/// `/c/en/string/n/wn/artifact` -> (`en`, `string`). Sense suffixes dropped.
fn concept_parts(uri: &str) -> Option<(&str, &str)> {
    let mut segs = uri.strip_prefix("/c/")?.split('/');
    let lang = segs.next().filter(|s| !s.is_empty())?;
    let term = segs.next().filter(|s| !s.is_empty())?;
    Some((lang, term))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn key(s: &str) -> ConceptKey {
        ConceptKey::new(s).unwrap()
    }

    fn dump_line(rel: &str, start: &str, end: &str, weight: f64) -> String {
        format!(
            "/a/[{rel}/,{start}/,{end}/]\t{rel}\t{start}\t{end}\t{{\"dataset\": \"/d/test\", \"weight\": {weight}}}"
        )
    }

    #[test]
    fn normalization_examples() {
        assert_eq!(key("String Instrument").as_str(), "string_instrument");
        assert_eq!(key("guitar").as_str(), "guitar");
        assert_eq!(key("  Play ").as_str(), "play");
        assert_eq!(key("\"one  _ finger.\"").as_str(), "one_finger");
        assert!(matches!(
            ConceptKey::new("  ...  "),
            Err(KbError::InvalidConcept(_))
        ));
        assert!(ConceptKey::new("").is_err());
    }

    #[test]
    fn dump_line_parses_guitar_assertions() {
        let text = [
            dump_line("/r/HasA", "/c/en/guitar", "/c/en/strings", 2.8284),
            dump_line(
                "/r/IsA",
                "/c/en/guitar/n",
                "/c/en/string_instrument/n/wn/artifact",
                6.32,
            ),
            dump_line("/r/HasA", "/c/fr/guitare", "/c/en/strings", 1.0),
        ]
        .join("\n");
        let (store, report) = ingest_dump(text.as_bytes(), &LanguageFilter::default()).unwrap();
        assert_eq!(report.lines_read, 3);
        assert_eq!(report.kept, 2);
        assert_eq!(report.filtered(), 1);
        assert_eq!(
            store.assertions()[0],
            Assertion::new("HasA", key("guitar"), key("strings"), 2.8284).unwrap()
        );
        assert_eq!(
            store.assertions()[1],
            Assertion::new("IsA", key("guitar"), key("string_instrument"), 6.32).unwrap()
        );
    }

    #[test]
    fn malformed_lines_are_reported_not_fatal() {
        let text = [
            "only\ttwo".to_string(),
            "/a/x\t/r/HasA\t/c/en/a\t/c/en/b\tnot json".to_string(),
            "/a/x\t/r/HasA\t/c/en/a\t/c/en/b\t{\"weight\": \"heavy\"}".to_string(),
            "/a/x\tHasA\t/c/en/a\t/c/en/b\t{\"weight\": 1}".to_string(),
            "{\"rel\": \"HasA\", \"start\": \"a\"}".to_string(),
            dump_line("/r/HasA", "/c/en/a", "/c/en/b", 1.0),
        ]
        .join("\n");
        let (store, report) = ingest_dump(text.as_bytes(), &LanguageFilter::default()).unwrap();
        assert_eq!(store.len(), 1);
        let reasons: Vec<_> = report.skipped.iter().map(|s| (s.line, s.reason)).collect();
        assert_eq!(
            reasons,
            vec![
                (1, SkipReason::MalformedRecord),
                (2, SkipReason::MalformedWeight),
                (3, SkipReason::MalformedWeight),
                (4, SkipReason::MalformedRecord),
                (5, SkipReason::MalformedFixture),
            ]
        );
        assert_eq!(report.to_string(), "6 read, 1 kept, 5 skipped");
    }

    #[test]
    fn best_assertion_on_guitar_assertions() {
        let fixture = r#"{"rel": "AtLocation", "start": "string", "end": "guitar", "weight": 2.0}
{"rel": "HasA", "start": "guitar", "end": "strings", "weight": 2.8284}
{"rel": "RelatedTo", "start": "finger", "end": "play", "weight": 1.0}"#;
        let (store, _) = ingest_dump(fixture.as_bytes(), &LanguageFilter::default()).unwrap();

        let hit = store
            .best_assertion(&key("strings"), &key("guitar"))
            .unwrap();
        assert_eq!((hit.relation.as_str(), hit.weight), ("HasA", 2.8284));
        assert!(hit.starts_at(&key("guitar")));

        let hit = store
            .best_assertion(&key("string"), &key("guitar"))
            .unwrap();
        assert_eq!((hit.relation.as_str(), hit.weight), ("AtLocation", 2.0));
        assert!(hit.starts_at(&key("string")));

        assert_eq!(store.best_assertion(&key("string"), &key("play")), None);
    }

    #[test]
    fn ties_prefer_smallest_relation_in_either_query_order() {
        let store = KbStore::from_assertions([
            Assertion::new("UsedFor", key("a"), key("b"), 3.0).unwrap(),
            Assertion::new("RelatedTo", key("b"), key("a"), 3.0).unwrap(),
            Assertion::new("AtLocation", key("a"), key("b"), 1.0).unwrap(),
        ]);
        let ab = store.best_assertion(&key("a"), &key("b")).unwrap();
        let ba = store.best_assertion(&key("b"), &key("a")).unwrap();
        assert_eq!(ab, ba);
        assert_eq!(ab.relation, "RelatedTo");
    }

    #[test]
    fn fixture_written_by_store_reloads_identically() {
        let store = KbStore::from_assertions([
            Assertion::new("HasA", key("guitar"), key("strings"), 2.8284).unwrap(),
            Assertion::new("IsA", key("guitar"), key("string_instrument"), 6.32).unwrap(),
        ]);
        let mut buf = Vec::new();
        store.write_fixture(&mut buf).unwrap();
        let (again, report) = ingest_dump(buf.as_slice(), &LanguageFilter::default()).unwrap();
        assert_eq!(report.kept, 2);
        assert_eq!(again.assertions(), store.assertions());
    }

    #[test]
    fn negative_weight_rejected() {
        assert!(Assertion::new("HasA", key("a"), key("b"), -1.0).is_err());
        assert!(Assertion::new("HasA", key("a"), key("b"), f64::NAN).is_err());
    }
}
