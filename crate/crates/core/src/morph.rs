//! Noun surface variants for widening knowledge-base queries.
//!
//! Nouns are expanded to their singular and plural forms with a small
//! rule set plus an exception table. Verbs arrive lemmatized from the
//! parser and are left alone.

use std::collections::HashMap;
use std::io::BufRead;

use thiserror::Error;

use crate::kb::ConceptKey;

#[derive(Debug, Error)]
pub enum MorphError {
    #[error("exception table line {line}: expected `singular<TAB>plural`")]
    BadLine { line: usize },
    #[error("I/O error while reading exception table: {0}")]
    Io(#[from] std::io::Error),
}

/// Built-in irregular forms. Invariant plurals map to themselves.
const DEFAULT_EXCEPTIONS: &[(&str, &str)] = &[
    ("child", "children"),
    ("foot", "feet"),
    ("sheep", "sheep"),
    ("person", "people"),
    ("tooth", "teeth"),
    ("mouse", "mice"),
    ("man", "men"),
    ("woman", "women"),
    ("goose", "geese"),
    ("ox", "oxen"),
    ("fish", "fish"),
    ("deer", "deer"),
    ("series", "series"),
    ("species", "species"),
    ("bus", "buses"),
    ("gas", "gases"),
];

/// Singular stems that take `-ves` in the plural.
const VES_NOUNS: &[&str] = &[
    "calf", "elf", "half", "knife", "leaf", "life", "loaf", "self", "shelf", "thief", "wife",
    "wolf",
];

/// Ordered, deduplicated surface forms of one concept; `base` comes first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VariantSet {
    variants: Vec<ConceptKey>,
}

impl VariantSet {
    fn from_forms(base: ConceptKey, others: impl IntoIterator<Item = ConceptKey>) -> Self {
        let mut variants = vec![base];
        for v in others {
            if !variants.contains(&v) {
                variants.push(v);
            }
        }
        VariantSet { variants }
    }

    pub fn base(&self) -> &ConceptKey {
        &self.variants[0]
    }

    pub fn iter(&self) -> std::slice::Iter<'_, ConceptKey> {
        self.variants.iter()
    }

    pub fn len(&self) -> usize {
        self.variants.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, key: &ConceptKey) -> bool {
        self.variants.contains(key)
    }

    pub fn as_slice(&self) -> &[ConceptKey] {
        &self.variants
    }
}

impl<'a> IntoIterator for &'a VariantSet {
    type Item = &'a ConceptKey;
    type IntoIter = std::slice::Iter<'a, ConceptKey>;

    fn into_iter(self) -> Self::IntoIter {
        self.variants.iter()
    }
}

/// Rule-based English noun inflector.
#[derive(Debug, Clone)]
pub struct Inflector {
    to_plural: HashMap<String, String>,
    to_singular: HashMap<String, String>,
}

impl Default for Inflector {
    fn default() -> Self {
        Inflector::from_pairs(
            DEFAULT_EXCEPTIONS
                .iter()
                .map(|&(s, p)| (s.to_string(), p.to_string())),
        )
    }
}

impl Inflector {
    pub fn from_pairs(pairs: impl IntoIterator<Item = (String, String)>) -> Self {
        let mut to_plural = HashMap::new();
        let mut to_singular = HashMap::new();
        for (s, p) in pairs {
            to_singular.insert(p.clone(), s.clone());
            to_plural.insert(s, p);
        }
        Inflector {
            to_plural,
            to_singular,
        }
    }

    /// Load a `singular<TAB>plural` table. Blank lines and `#` comments are
    /// ignored. Entries are added on top of the built-in defaults.
    pub fn with_table<R: BufRead>(mut self, reader: R) -> Result<Self, MorphError> {
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut cols = line.split('\t').map(str::trim);
            match (cols.next(), cols.next(), cols.next()) {
                (Some(s), Some(p), None) if !s.is_empty() && !p.is_empty() => {
                    let s = s.to_lowercase();
                    let p = p.to_lowercase();
                    self.to_singular.insert(p.clone(), s.clone());
                    self.to_plural.insert(s, p);
                }
                _ => return Err(MorphError::BadLine { line: i + 1 }),
            }
        }
        Ok(self)
    }

    pub fn pluralize(&self, word: &str) -> String {
        if let Some(p) = self.to_plural.get(word) {
            return p.clone();
        }
        if let Some(stem) = ves_stem(word) {
            return format!("{stem}ves");
        }
        if ["s", "x", "z", "ch", "sh"]
            .iter()
            .any(|suf| word.ends_with(suf))
        {
            return format!("{word}es");
        }
        if let Some(stem) = word.strip_suffix('y') {
            if stem.chars().last().is_some_and(is_consonant) {
                return format!("{stem}ies");
            }
        }
        format!("{word}s")
    }

    /// Best-effort inverse of [`Inflector::pluralize`]; words that do not look
    /// plural come back unchanged.
    pub fn singularize(&self, word: &str) -> String {
        if let Some(s) = self.to_singular.get(word) {
            return s.clone();
        }
        if self.to_plural.contains_key(word) {
            return word.to_string();
        }
        if let Some(stem) = word.strip_suffix("ves") {
            for cand in VES_NOUNS {
                if ves_stem(cand) == Some(stem) {
                    return cand.to_string();
                }
            }
        }
        if let Some(stem) = word.strip_suffix("ies") {
            if stem.chars().last().is_some_and(is_consonant) {
                return format!("{stem}y");
            }
        }
        if let Some(stem) = word.strip_suffix("es") {
            if ["ss", "x", "zz", "ch", "sh"]
                .iter()
                .any(|suf| stem.ends_with(suf))
            {
                return stem.to_string();
            }
        }
        if word.ends_with("ss") || word.ends_with("us") || word.ends_with("is") {
            return word.to_string();
        }
        match word.strip_suffix('s') {
            Some(stem) if !stem.is_empty() => stem.to_string(),
            _ => word.to_string(),
        }
    }

    /// True when the word reads as a plural under these rules.
    pub fn is_plural(&self, word: &str) -> bool {
        self.singularize(word) != word
    }

    /// `{noun, its plural or singular}`, base first.
    pub fn noun_variants(&self, noun: &ConceptKey) -> VariantSet {
        let word = noun.as_str();
        let other = if self.is_plural(word) {
            self.singularize(word)
        } else {
            self.pluralize(word)
        };
        // Inflection only touches the final segment of multi-word concepts,
        // and the result is always a valid key when the input was.
        let other = ConceptKey::new(&other).ok();
        VariantSet::from_forms(noun.clone(), other)
    }

    pub fn verb_variants(&self, verb: &ConceptKey) -> VariantSet {
        verb_variants(verb)
    }
}

/// Verbs are registered as lemmas; the parser already supplies one.
pub fn verb_variants(verb: &ConceptKey) -> VariantSet {
    VariantSet::from_forms(verb.clone(), None)
}

/// Variants using the built-in exception table.
pub fn noun_variants(noun: &ConceptKey) -> VariantSet {
    Inflector::default().noun_variants(noun)
}

fn is_consonant(c: char) -> bool {
    c.is_ascii_alphabetic() && !matches!(c, 'a' | 'e' | 'i' | 'o' | 'u')
}

fn ves_stem(word: &str) -> Option<&str> {
    if !VES_NOUNS.contains(&word) {
        return None;
    }
    word.strip_suffix("fe").or_else(|| word.strip_suffix('f'))
}
