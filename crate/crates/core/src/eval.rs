//! PP-attachment evaluation over the parallel-file dataset layout.
//!
//! A dataset directory holds five line-aligned files: prepositions,
//! children (the PP nouns), space-separated candidate heads, head counts
//! and 1-based gold labels.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::kb::ConceptKey;
use crate::resolver::{
    AmbiguityRequest, AttachmentDecision, BackendMode, Backends, Candidate, ResolveError, Resolver,
    ScoreSource,
};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("no dataset file ending in {suffix:?} in {dir}")]
    MissingFile { dir: PathBuf, suffix: String },
    #[error("{suffix:?} matches several files in {dir}; set an explicit prefix")]
    AmbiguousFile { dir: PathBuf, suffix: String },
    #[error("line counts differ: {0}")]
    LineCountMismatch(String),
    #[error("line {line}: {message}")]
    BadRecord { line: usize, message: String },
    #[error("no records")]
    EmptyDataset,
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Resolve(#[from] ResolveError),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalRecord {
    pub preposition: String,
    pub child: ConceptKey,
    pub heads: Vec<ConceptKey>,
    pub n_heads: usize,
    /// 1-based index into `heads`.
    pub gold_index: usize,
}

impl EvalRecord {
    pub fn new(
        preposition: &str,
        child: ConceptKey,
        heads: Vec<ConceptKey>,
        gold_index: usize,
    ) -> Result<Self, String> {
        if gold_index == 0 || gold_index > heads.len() {
            return Err(format!(
                "gold label {gold_index} out of range for {} heads",
                heads.len()
            ));
        }
        Ok(EvalRecord {
            preposition: preposition.trim().to_lowercase(),
            child,
            n_heads: heads.len(),
            heads,
            gold_index,
        })
    }

    pub fn gold_head(&self) -> &ConceptKey {
        &self.heads[self.gold_index - 1]
    }

    /// Heads in dataset order become candidates. Heads carry no POS tag, so
    /// each is expanded as a noun, whose variants already include the
    /// verb lemma itself.
    pub fn to_request(&self) -> AmbiguityRequest {
        AmbiguityRequest {
            preposition: self.preposition.clone(),
            pp_noun: self.child.clone(),
            pp_determiner: None,
            candidates: self
                .heads
                .iter()
                .map(|h| Candidate::noun_phrase(h.clone(), None))
                .collect(),
        }
    }
}

/// Filenames are `<prefix><suffix>`; the prefix is detected when absent.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetLayout {
    pub prefix: Option<String>,
    pub prepositions: String,
    pub children: String,
    pub heads: String,
    pub nheads: String,
    pub labels: String,
}

impl Default for DatasetLayout {
    fn default() -> Self {
        DatasetLayout {
            prefix: None,
            prepositions: "preps.words".into(),
            children: "children.words".into(),
            heads: "heads.words".into(),
            nheads: "nheads".into(),
            labels: "labels".into(),
        }
    }
}

impl DatasetLayout {
    pub fn with_prefix(prefix: impl Into<String>) -> Self {
        DatasetLayout {
            prefix: Some(prefix.into()),
            ..Default::default()
        }
    }

    fn locate(&self, dir: &Path, suffix: &str) -> Result<PathBuf, DatasetError> {
        if let Some(p) = &self.prefix {
            return Ok(dir.join(format!("{p}{suffix}")));
        }
        let entries = fs::read_dir(dir).map_err(|source| DatasetError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        let mut hits: Vec<PathBuf> = entries
            .filter_map(Result::ok)
            .map(|e| e.path())
            .filter(|p| {
                p.file_name()
                    .and_then(|n| n.to_str())
                    .is_some_and(|n| n == suffix || n.ends_with(&format!(".{suffix}")))
            })
            .collect();
        hits.sort();
        match hits.len() {
            0 => Err(DatasetError::MissingFile {
                dir: dir.to_path_buf(),
                suffix: suffix.to_string(),
            }),
            1 => Ok(hits.remove(0)),
            _ => Err(DatasetError::AmbiguousFile {
                dir: dir.to_path_buf(),
                suffix: suffix.to_string(),
            }),
        }
    }
}

fn read_lines(path: &Path) -> Result<Vec<String>, DatasetError> {
    let text = fs::read_to_string(path).map_err(|source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(text.lines().map(str::to_string).collect())
}

pub fn load_dataset(dir: &Path, layout: &DatasetLayout) -> Result<Vec<EvalRecord>, DatasetError> {
    let files = [
        &layout.prepositions,
        &layout.children,
        &layout.heads,
        &layout.nheads,
        &layout.labels,
    ]
    .map(|suffix| {
        layout
            .locate(dir, suffix)
            .and_then(|p| read_lines(&p).map(|l| (p, l)))
    });
    let [preps, children, heads, nheads, labels] = files;
    let (preps, children, heads, nheads, labels) = (preps?, children?, heads?, nheads?, labels?);

    let counts = [&preps, &children, &heads, &nheads, &labels];
    if counts.iter().any(|(_, l)| l.len() != preps.1.len()) {
        let summary = counts
            .iter()
            .map(|(p, l)| format!("{}={}", p.display(), l.len()))
            .collect::<Vec<_>>()
            .join(", ");
        return Err(DatasetError::LineCountMismatch(summary));
    }

    let mut out = Vec::with_capacity(preps.1.len());
    for i in 0..preps.1.len() {
        let line = i + 1;
        let bad = |message: String| DatasetError::BadRecord { line, message };
        let key = |s: &str| ConceptKey::new(s).map_err(|e| bad(e.to_string()));

        let child = key(&children.1[i])?;
        let head_keys = heads.1[i]
            .split_whitespace()
            .map(key)
            .collect::<Result<Vec<_>, _>>()?;
        let n: usize = nheads.1[i]
            .trim()
            .parse()
            .map_err(|_| bad(format!("head count {:?} is not a number", nheads.1[i])))?;
        if n != head_keys.len() {
            return Err(bad(format!(
                "head count {n} but {} heads listed",
                head_keys.len()
            )));
        }
        let gold: usize = labels.1[i]
            .trim()
            .parse()
            .map_err(|_| bad(format!("label {:?} is not a number", labels.1[i])))?;
        out.push(EvalRecord::new(&preps.1[i], child, head_keys, gold).map_err(bad)?);
    }
    Ok(out)
}

/// Keep records with the given preposition and at most `max_heads` heads.
pub fn filter_records(
    records: &[EvalRecord],
    preposition: &str,
    max_heads: usize,
) -> Vec<EvalRecord> {
    let prep = preposition.trim().to_lowercase();
    records
        .iter()
        .filter(|r| r.preposition == prep && r.n_heads <= max_heads)
        .cloned()
        .collect()
}

/// Expected accuracy of a uniform random head choice.
pub fn baseline(records: &[EvalRecord]) -> Result<f64, DatasetError> {
    if records.is_empty() {
        return Err(DatasetError::EmptyDataset);
    }
    let sum: f64 = records.iter().map(|r| 1.0 / r.n_heads as f64).sum();
    Ok(sum / records.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecordOutcome {
    pub record: EvalRecord,
    pub decision: AttachmentDecision,
    pub correct: bool,
    /// `|w*(picked) - w*(gold)|` for wrong answers where both candidates
    /// carry fallback w* scores.
    pub wstar_gap: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub mode: BackendMode,
    pub total: usize,
    pub correct: usize,
    pub accuracy: f64,
    pub baseline: f64,
    /// `None` when the mode never produces w* scores.
    pub within_tenth: Option<f64>,
    pub within_tenth_count: Option<usize>,
    pub defaulted: usize,
    pub per_record: Vec<RecordOutcome>,
}

pub const WITHIN_TOLERANCE: f64 = 0.1;

/// Resolve every record and score the outcomes. Records are processed in
/// parallel; results keep dataset order.
pub fn run_eval(
    records: &[EvalRecord],
    resolver: &Resolver,
    backends: Backends<'_>,
    mode: BackendMode,
) -> Result<EvalReport, EvalError> {
    let base = baseline(records)?;
    let per_record = records
        .par_iter()
        .map(|rec| {
            let decision = resolver.decide(&rec.to_request(), backends, mode)?;
            let correct = decision.chosen.head() == rec.gold_head();
            let picked = decision.chosen_score();
            let gold = &decision.scores[rec.gold_index - 1];
            let wstar_gap = match (correct, picked.source, gold.source) {
                (false, ScoreSource::Fallback, ScoreSource::Fallback) => {
                    picked.weight.zip(gold.weight).map(|(p, g)| (p - g).abs())
                }
                _ => None,
            };
            Ok(RecordOutcome {
                record: rec.clone(),
                decision,
                correct,
                wstar_gap,
            })
        })
        .collect::<Result<Vec<_>, ResolveError>>()?;

    let total = records.len();
    let correct = per_record.iter().filter(|o| o.correct).count();
    let defaulted = per_record.iter().filter(|o| o.decision.defaulted).count();
    let within_tenth_count = (mode != BackendMode::KbOnly).then(|| {
        per_record
            .iter()
            .filter(|o| o.wstar_gap.is_some_and(|g| g <= WITHIN_TOLERANCE))
            .count()
    });
    Ok(EvalReport {
        mode,
        total,
        correct,
        accuracy: correct as f64 / total as f64,
        baseline: base,
        within_tenth: within_tenth_count.map(|c| c as f64 / total as f64),
        within_tenth_count,
        defaulted,
        per_record,
    })
}

#[derive(Serialize)]
struct JsonRecord<'a> {
    index: usize,
    preposition: &'a str,
    child: &'a str,
    heads: Vec<&'a str>,
    gold: usize,
    picked: usize,
    correct: bool,
    defaulted: bool,
    source: ScoreSource,
    relation: Option<&'a str>,
    weight: Option<f64>,
    wstar_gap: Option<f64>,
}

#[derive(Serialize)]
struct JsonSummary {
    summary: bool,
    mode: BackendMode,
    total: usize,
    correct: usize,
    accuracy: f64,
    baseline: f64,
    within_tenth: Option<f64>,
    defaulted: usize,
}

impl EvalReport {
    /// One JSON object per record followed by a summary object.
    pub fn to_json_lines(&self) -> String {
        let mut out = String::new();
        for (i, o) in self.per_record.iter().enumerate() {
            let score = o.decision.chosen_score();
            let rec = JsonRecord {
                index: i,
                preposition: &o.record.preposition,
                child: o.record.child.as_str(),
                heads: o.record.heads.iter().map(ConceptKey::as_str).collect(),
                gold: o.record.gold_index,
                picked: o.decision.chosen_index + 1,
                correct: o.correct,
                defaulted: o.decision.defaulted,
                source: score.source,
                relation: score.relation.as_deref(),
                weight: score.weight,
                wstar_gap: o.wstar_gap,
            };
            out.push_str(&serde_json::to_string(&rec).expect("record serializes"));
            out.push('\n');
        }
        let summary = JsonSummary {
            summary: true,
            mode: self.mode,
            total: self.total,
            correct: self.correct,
            accuracy: self.accuracy,
            baseline: self.baseline,
            within_tenth: self.within_tenth,
            defaulted: self.defaulted,
        };
        out.push_str(&serde_json::to_string(&summary).expect("summary serializes"));
        out.push('\n');
        out
    }
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "mode        {}", self.mode)?;
        writeln!(f, "records     {}", self.total)?;
        writeln!(f, "defaulted   {}", self.defaulted)?;
        writeln!(f)?;
        writeln!(f, "{:<10} {:<10} w* within 0.1", "Baseline", "Accuracy")?;
        let within = match self.within_tenth {
            Some(w) => format!("{:.1}%", w * 100.0),
            None => "n/a".to_string(),
        };
        writeln!(
            f,
            "{:<10} {:<10} {}",
            format!("{:.1}%", self.baseline * 100.0),
            format!("{:.1}%", self.accuracy * 100.0),
            within
        )?;
        write!(f, "({} correct out of {})", self.correct, self.total)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kb::{Assertion, KbStore};

    fn key(s: &str) -> ConceptKey {
        ConceptKey::new(s).unwrap()
    }

    fn rec(prep: &str, child: &str, heads: &[&str], gold: usize) -> EvalRecord {
        EvalRecord::new(
            prep,
            key(child),
            heads.iter().map(|h| key(h)).collect(),
            gold,
        )
        .unwrap()
    }

    fn write_dataset(dir: &Path, rows: &[(&str, &str, &str, &str, &str)]) {
        let suffixes = [
            "preps.words",
            "children.words",
            "heads.words",
            "nheads",
            "labels",
        ];
        for (i, suffix) in suffixes.iter().enumerate() {
            let text: String = rows
                .iter()
                .map(|r| [r.0, r.1, r.2, r.3, r.4][i])
                .map(|c| format!("{c}\n"))
                .collect();
            fs::write(dir.join(format!("t.{suffix}")), text).unwrap();
        }
    }

    #[test]
    fn loads_three_records() {
        let dir = tempfile::tempdir().unwrap();
        write_dataset(
            dir.path(),
            &[
                ("with", "string", "play guitar", "2", "2"),
                ("with", "finger", "play guitar string", "3", "1"),
                ("of", "cake", "piece", "1", "1"),
            ],
        );
        let recs = load_dataset(dir.path(), &DatasetLayout::default()).unwrap();
        assert_eq!(recs.len(), 3);
        assert_eq!(recs[0], rec("with", "string", &["play", "guitar"], 2));
        assert_eq!(recs[1].n_heads, 3);
        assert_eq!(recs[2].gold_head(), &key("piece"));
    }

    #[test]
    fn rejects_bad_datasets() {
        let dir = tempfile::tempdir().unwrap();
        write_dataset(dir.path(), &[("with", "string", "play guitar", "2", "3")]);
        match load_dataset(dir.path(), &DatasetLayout::default()) {
            Err(DatasetError::BadRecord { line: 1, .. }) => {}
            other => panic!("{other:?}"),
        }

        write_dataset(dir.path(), &[("with", "string", "play guitar", "2", "1")]);
        fs::write(dir.path().join("t.labels"), "1\n2\n").unwrap();
        assert!(matches!(
            load_dataset(dir.path(), &DatasetLayout::default()),
            Err(DatasetError::LineCountMismatch(_))
        ));

        let empty = tempfile::tempdir().unwrap();
        assert!(matches!(
            load_dataset(empty.path(), &DatasetLayout::default()),
            Err(DatasetError::MissingFile { .. })
        ));
    }

    #[test]
    fn filtering() {
        let recs = vec![
            rec("with", "a", &["x", "y"], 1),
            rec("With", "b", &["x", "y", "z", "w"], 1),
            rec("of", "c", &["x"], 1),
            rec("with", "d", &["x", "y", "z"], 3),
        ];
        let kept = filter_records(&recs, "with", 3);
        assert_eq!(
            kept.iter().map(|r| r.child.as_str()).collect::<Vec<_>>(),
            ["a", "d"]
        );
        assert!(filter_records(&recs, "with", 0).is_empty());
        assert!(filter_records(&recs[..2], "of", 3).is_empty());
    }

    #[test]
    fn baseline_values() {
        let two = rec("with", "a", &["x", "y"], 1);
        let three = rec("with", "a", &["x", "y", "z"], 1);
        let four = rec("with", "a", &["w", "x", "y", "z"], 1);
        let one = rec("with", "a", &["x"], 1);
        let mut split = vec![two.clone(); 17];
        split.extend(vec![three; 31]);
        assert!((baseline(&split).unwrap() - 0.392_361_111).abs() < 1e-6);
        assert_eq!(baseline(&[one.clone(), one]).unwrap(), 1.0);
        assert_eq!(baseline(&[two, four]).unwrap(), 0.375);
        assert!(matches!(baseline(&[]), Err(DatasetError::EmptyDataset)));
    }

    #[test]
    fn no_knowledge_accuracy_is_first_candidate_rate() {
        let recs = vec![
            rec("with", "a", &["x", "y"], 1),
            rec("with", "b", &["x", "y"], 2),
            rec("with", "c", &["x", "y", "z"], 1),
        ];
        let kb = KbStore::default();
        let backends = Backends {
            kb: Some(&kb),
            fallback: None,
        };
        let r = run_eval(&recs, &Resolver::default(), backends, BackendMode::KbOnly).unwrap();
        assert_eq!((r.correct, r.total, r.defaulted), (2, 3, 3));
        assert_eq!(r.within_tenth, None);
    }

    #[test]
    fn within_tenth_counts_near_misses_over_all_records() {
        let mut table = crate::scorer::TabulatedFallback::default();
        // a: right. b: wrong by 0.05. c: wrong by 0.5. d: wrong, gold unscored.
        table.insert(key("a"), key("x"), "R", -1.0);
        table.insert(key("a"), key("y"), "R", -2.0);
        table.insert(key("b"), key("x"), "R", -1.0);
        table.insert(key("b"), key("y"), "R", -1.05);
        table.insert(key("c"), key("x"), "R", -1.0);
        table.insert(key("c"), key("y"), "R", -1.5);
        table.insert(key("d"), key("x"), "R", -1.0);
        let recs = vec![
            rec("with", "a", &["x", "y"], 1),
            rec("with", "b", &["x", "y"], 2),
            rec("with", "c", &["x", "y"], 2),
            rec("with", "d", &["x", "y"], 2),
        ];
        let backends = Backends {
            kb: None,
            fallback: Some(&table),
        };
        let r = run_eval(
            &recs,
            &Resolver::default(),
            backends,
            BackendMode::FallbackOnly,
        )
        .unwrap();
        assert_eq!(r.correct, 1);
        assert_eq!(r.within_tenth_count, Some(1));
        assert_eq!(r.within_tenth, Some(0.25));
        let gaps: Vec<Option<f64>> = r.per_record.iter().map(|o| o.wstar_gap).collect();
        assert_eq!(gaps[0], None);
        assert!((gaps[1].unwrap() - 0.05).abs() < 1e-12);
        assert!((gaps[2].unwrap() - 0.5).abs() < 1e-12);
        assert_eq!(gaps[3], None);
    }

    #[test]
    fn json_lines_end_with_summary() {
        let recs = vec![rec("with", "string", &["play", "guitar"], 2)];
        let kb = KbStore::from_assertions([Assertion::new(
            "HasA",
            key("guitar"),
            key("strings"),
            2.8284,
        )
        .unwrap()]);
        let backends = Backends {
            kb: Some(&kb),
            fallback: None,
        };
        let r = run_eval(&recs, &Resolver::default(), backends, BackendMode::KbOnly).unwrap();
        let lines: Vec<_> = r.to_json_lines().lines().map(str::to_string).collect();
        assert_eq!(lines.len(), 2);
        let first: serde_json::Value = serde_json::from_str(&lines[0]).unwrap();
        assert_eq!(first["correct"], true);
        assert_eq!(first["relation"], "HasA");
        let last: serde_json::Value = serde_json::from_str(&lines[1]).unwrap();
        assert_eq!(last["summary"], true);
        assert_eq!(last["accuracy"], 1.0);
    }
}
