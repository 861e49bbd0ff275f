//! Word-vector store in the common text interchange format.

use std::collections::HashMap;
use std::io::BufRead;

use super::ScorerError;
use crate::kb::ConceptKey;

/// A resolved vector: either stored directly or averaged from the
/// underscore-separated parts of a multi-word concept.
#[derive(Debug, Clone, PartialEq)]
pub enum Lookup<'s> {
    Stored(&'s [f32]),
    BackedOff(Vec<f32>),
}

impl Lookup<'_> {
    pub fn as_slice(&self) -> &[f32] {
        match self {
            Lookup::Stored(v) => v,
            Lookup::BackedOff(v) => v,
        }
    }
}

/// Dense vectors of one fixed dimension, keyed by term.
#[derive(Debug, Clone)]
pub struct EmbeddingStore {
    dim: usize,
    terms: Vec<String>,
    index: HashMap<String, usize>,
    data: Vec<f32>,
    norms: Vec<f64>,
}

impl EmbeddingStore {
    pub fn new(dim: usize) -> Self {
        EmbeddingStore {
            dim,
            terms: Vec::new(),
            index: HashMap::new(),
            data: Vec::new(),
            norms: Vec::new(),
        }
    }

    /// Insert or overwrite a vector; its length must equal the store dimension.
    pub fn insert(&mut self, term: impl Into<String>, vector: &[f32]) -> Result<(), ScorerError> {
        if vector.len() != self.dim {
            return Err(ScorerError::DimensionMismatch {
                expected: self.dim,
                found: vector.len(),
            });
        }
        let term = term.into();
        let norm = norm(vector);
        match self.index.get(&term) {
            Some(&i) => {
                self.data[i * self.dim..(i + 1) * self.dim].copy_from_slice(vector);
                self.norms[i] = norm;
            }
            None => {
                self.index.insert(term.clone(), self.terms.len());
                self.terms.push(term);
                self.data.extend_from_slice(vector);
                self.norms.push(norm);
            }
        }
        Ok(())
    }

    /// Parse `term v1 ... vd` lines with an optional leading `count dim`
    /// header. The first data line fixes the dimension.
    pub fn load<R: BufRead>(reader: R) -> Result<Self, ScorerError> {
        let mut store: Option<EmbeddingStore> = None;
        let mut header_dim = None;
        for (i, line) in reader.lines().enumerate() {
            let lineno = i + 1;
            let line = line?;
            let mut parts = line.split_whitespace();
            let Some(term) = parts.next() else { continue };
            let rest: Vec<&str> = parts.collect();

            if lineno == 1 && rest.len() == 1 {
                if let (Ok(_), Ok(d)) = (term.parse::<usize>(), rest[0].parse::<usize>()) {
                    header_dim = Some(d);
                    continue;
                }
            }

            let values = rest
                .iter()
                .map(|t| t.parse::<f32>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|_| ScorerError::Ingest {
                    line: lineno,
                    message: "non-numeric vector component".into(),
                })?;
            let store = store
                .get_or_insert_with(|| EmbeddingStore::new(header_dim.unwrap_or(values.len())));
            if values.is_empty() || values.len() != store.dim {
                return Err(ScorerError::Ingest {
                    line: lineno,
                    message: format!("expected {} components, found {}", store.dim, values.len()),
                });
            }
            store.insert(term, &values)?;
        }
        Ok(store.unwrap_or_else(|| EmbeddingStore::new(header_dim.unwrap_or(0))))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn contains(&self, term: &str) -> bool {
        self.index.contains_key(term)
    }

    pub fn get(&self, term: &str) -> Option<&[f32]> {
        self.index.get(term).map(|&i| self.row(i))
    }

    fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    /// Look up a concept, backing off to the mean of its `_`-separated parts
    /// when the whole term is absent. Parts that are themselves absent are
    /// skipped; if none resolve the concept is unknown.
    pub fn resolve(&self, concept: &ConceptKey) -> Result<Lookup<'_>, ScorerError> {
        if let Some(v) = self.get(concept.as_str()) {
            return Ok(Lookup::Stored(v));
        }
        let mut sum = vec![0.0f64; self.dim];
        let mut found = 0usize;
        for part in concept.as_str().split('_') {
            if let Some(v) = self.get(part) {
                for (s, x) in sum.iter_mut().zip(v) {
                    *s += f64::from(*x);
                }
                found += 1;
            }
        }
        if found == 0 || !concept.as_str().contains('_') {
            return Err(ScorerError::UnknownConcept(concept.clone()));
        }
        Ok(Lookup::BackedOff(
            sum.into_iter().map(|s| (s / found as f64) as f32).collect(),
        ))
    }

    /// The `k` stored terms most cosine-similar to `term`, excluding `term`
    /// itself. Ties are broken by term order so results are deterministic.
    pub fn nearest_neighbors(
        &self,
        term: &ConceptKey,
        k: usize,
    ) -> Result<Neighborhood, ScorerError> {
        let query = self.resolve(term)?;
        let query = query.as_slice();
        let qnorm = norm(query);

        let mut scored: Vec<(f64, &str)> = self
            .terms
            .iter()
            .enumerate()
            .filter(|(_, t)| t.as_str() != term.as_str())
            .map(|(i, t)| {
                (
                    cosine_with_norms(query, qnorm, self.row(i), self.norms[i]),
                    t.as_str(),
                )
            })
            .collect();
        if scored.len() < k {
            return Err(ScorerError::NotEnoughNeighbors {
                concept: term.clone(),
                wanted: k,
                available: scored.len(),
            });
        }
        let by_score = |a: &(f64, &str), b: &(f64, &str)| b.0.total_cmp(&a.0).then(a.1.cmp(b.1));
        if k < scored.len() && k > 0 {
            scored.select_nth_unstable_by(k - 1, by_score);
            scored.truncate(k);
        }
        scored.sort_by(by_score);
        scored.truncate(k);

        let mut members = Vec::with_capacity(k + 1);
        members.push(term.clone());
        for (_, t) in scored {
            // Stored terms are not guaranteed to be normalized keys; those that
            // are not cannot be queried downstream, so fail loudly.
            let key = ConceptKey::new(t).map_err(|_| ScorerError::Ingest {
                line: 0,
                message: format!("stored term {t:?} is not a valid concept"),
            })?;
            members.push(key);
        }
        Ok(Neighborhood { members })
    }
}

/// A concept and its nearest neighbors; the center is always first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Neighborhood {
    members: Vec<ConceptKey>,
}

impl Neighborhood {
    pub fn center(&self) -> &ConceptKey {
        &self.members[0]
    }

    pub fn members(&self) -> &[ConceptKey] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

pub(crate) fn norm(v: &[f32]) -> f64 {
    v.iter()
        .map(|&x| f64::from(x) * f64::from(x))
        .sum::<f64>()
        .sqrt()
}

fn cosine_with_norms(a: &[f32], anorm: f64, b: &[f32], bnorm: f64) -> f64 {
    if anorm == 0.0 || bnorm == 0.0 {
        return 0.0;
    }
    let dot: f64 = a
        .iter()
        .zip(b)
        .map(|(&x, &y)| f64::from(x) * f64::from(y))
        .sum();
    dot / (anorm * bnorm)
}

/// Cosine similarity in f64; zero when either side has zero length.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let (mut dot, mut na, mut nb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    dot / (na.sqrt() * nb.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn key(s: &str) -> ConceptKey {
        ConceptKey::new(s).unwrap()
    }

    #[test]
    fn loads_plain_and_headered_files() {
        let plain = "a 1 0 0 0\nb 0 1 0 0\nc 0 0 1 0\n";
        let s = EmbeddingStore::load(plain.as_bytes()).unwrap();
        assert_eq!((s.len(), s.dim()), (3, 4));

        let v = vec!["0.5"; 300].join(" ");
        let headered = format!("2 300\nx {v}\ny {v}\n");
        let s = EmbeddingStore::load(headered.as_bytes()).unwrap();
        assert_eq!((s.len(), s.dim()), (2, 300));
    }

    #[test]
    fn short_line_is_an_ingest_error_with_line_number() {
        let text = "a 1 2 3\nb 1 2\n";
        match EmbeddingStore::load(text.as_bytes()) {
            Err(ScorerError::Ingest { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn header_dimension_is_enforced() {
        let text = "1 3\na 1 2\n";
        assert!(matches!(
            EmbeddingStore::load(text.as_bytes()),
            Err(ScorerError::Ingest { line: 2, .. })
        ));
    }

    #[test]
    fn absent_term_differs_from_zero_vector() {
        let s = EmbeddingStore::load("zero 0 0\n".as_bytes()).unwrap();
        assert_eq!(s.get("zero"), Some(&[0.0f32, 0.0][..]));
        assert_eq!(s.get("missing"), None);
        assert!(matches!(
            s.resolve(&key("missing")),
            Err(ScorerError::UnknownConcept(_))
        ));
    }

    #[test]
    fn backoff_averages_parts() {
        let s = EmbeddingStore::load("string 2 0\ninstrument 0 4\n".as_bytes()).unwrap();
        let v = s.resolve(&key("string_instrument")).unwrap();
        assert_eq!(v, Lookup::BackedOff(vec![1.0, 2.0]));
        assert!(s.resolve(&key("nothing_here")).is_err());
    }

    #[test]
    fn neighbors_exact_copy_first_and_k_zero() {
        let s = EmbeddingStore::load("a 1 2 3\nb 1 2 3\nc 3 2 1\nd -1 0 0\n".as_bytes()).unwrap();
        let n = s.nearest_neighbors(&key("a"), 0).unwrap();
        assert_eq!(n.members(), &[key("a")]);
        let n = s.nearest_neighbors(&key("a"), 2).unwrap();
        assert_eq!(n.members(), &[key("a"), key("b"), key("c")]);
        assert!(matches!(
            s.nearest_neighbors(&key("a"), 4),
            Err(ScorerError::NotEnoughNeighbors { available: 3, .. })
        ));
    }
}
