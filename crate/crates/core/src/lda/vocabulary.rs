use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::preprocess::ProcessedDocument;

/// Bijection between tokens and dense ids `0..len`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct Vocabulary {
    words: Vec<String>,
    ids: HashMap<String, u32>,
}

impl From<Vec<String>> for Vocabulary {
    fn from(words: Vec<String>) -> Self {
        let ids = words
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), i as u32))
            .collect();
        Vocabulary { words, ids }
    }
}

impl From<Vocabulary> for Vec<String> {
    fn from(v: Vocabulary) -> Self {
        v.words
    }
}

impl Vocabulary {
    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn id(&self, word: &str) -> Option<u32> {
        self.ids.get(word).copied()
    }

    pub fn word(&self, id: u32) -> &str {
        &self.words[id as usize]
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    /// Maps tokens to ids, dropping out-of-vocabulary tokens.
    pub fn encode<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<u32> {
        tokens.iter().filter_map(|t| self.id(t.as_ref())).collect()
    }
}

/// Keeps tokens that occur in at least `min_doc_freq` documents. Ids are
/// assigned by descending corpus frequency, ties broken lexicographically.
pub fn build_vocabulary(corpus: &[ProcessedDocument], min_doc_freq: usize) -> Result<Vocabulary> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut doc_freq: HashMap<&str, usize> = HashMap::new();
    let mut term_freq: HashMap<&str, usize> = HashMap::new();
    for doc in corpus {
        let mut seen = HashSet::new();
        for t in &doc.tokens {
            *term_freq.entry(t).or_insert(0) += 1;
            if seen.insert(t.as_str()) {
                *doc_freq.entry(t).or_insert(0) += 1;
            }
        }
    }
    let mut kept: Vec<(&str, usize)> = term_freq
        .into_iter()
        .filter(|(w, _)| doc_freq[w] >= min_doc_freq)
        .collect();
    if kept.is_empty() {
        return Err(Error::EmptyVocabulary { min_doc_freq });
    }
    kept.sort_unstable_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    Ok(Vocabulary::from(
        kept.into_iter().map(|(w, _)| w.to_owned()).collect::<Vec<_>>(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn corpus(docs: &[&[&str]]) -> Vec<ProcessedDocument> {
        docs.iter()
            .enumerate()
            .map(|(i, d)| ProcessedDocument::new(i.to_string(), d.iter().map(|s| s.to_string()).collect()))
            .collect()
    }

    #[test]
    fn min_doc_freq_filters() {
        let c = corpus(&[&["a", "b"], &["a"]]);
        assert_eq!(build_vocabulary(&c, 1).unwrap().len(), 2);
        let v = build_vocabulary(&c, 2).unwrap();
        assert_eq!(v.words(), ["a"]);
        assert!(matches!(
            build_vocabulary(&c, 3),
            Err(Error::EmptyVocabulary { .. })
        ));
        assert!(matches!(build_vocabulary(&[], 1), Err(Error::EmptyCorpus)));
    }

    #[test]
    fn ordering_is_frequency_then_lexicographic() {
        let c = corpus(&[&["z", "y", "y", "x"], &["x", "w"]]);
        let v = build_vocabulary(&c, 1).unwrap();
        assert_eq!(v.words(), ["x", "y", "w", "z"]);
        for (i, w) in v.words().iter().enumerate() {
            assert_eq!(v.id(w), Some(i as u32));
        }
        assert_eq!(v.encode(&["w", "nope", "x"]), [2, 0]);
    }

    #[test]
    fn serde_round_trip() {
        let v = Vocabulary::from(vec!["a".to_string(), "b".to_string()]);
        let json = serde_json::to_string(&v).unwrap();
        assert_eq!(json, r#"["a","b"]"#);
        let back: Vocabulary = serde_json::from_str(&json).unwrap();
        assert_eq!(back, v);
        assert_eq!(back.id("b"), Some(1));
    }
}
