//! Ranked keyword lists, the unit every topic-quality metric consumes.

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TopicWord {
    pub word: String,
    pub weight: f64,
}

/// K keyword lists of equal length N, each sorted by descending weight.
///
/// Serialized as `{"topics": [[{"word": .., "weight": ..}, ..], ..]}`. When
/// reading, a bare string is accepted in place of a `{word, weight}` object
/// so keyword lists from other models can be written by hand; such words get
/// weight 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicSet {
    pub topics: Vec<Vec<TopicWord>>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum WireWord {
    Bare(String),
    Weighted {
        word: String,
        #[serde(default)]
        weight: f64,
    },
}

impl<'de> Deserialize<'de> for TopicWord {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        Ok(match WireWord::deserialize(d)? {
            WireWord::Bare(word) => TopicWord { word, weight: 0.0 },
            WireWord::Weighted { word, weight } => TopicWord { word, weight },
        })
    }
}

impl TopicSet {
    /// Builds an unweighted topic set from plain keyword lists.
    pub fn from_words<S: AsRef<str>>(lists: &[Vec<S>]) -> Self {
        TopicSet {
            topics: lists
                .iter()
                .map(|l| {
                    l.iter()
                        .map(|w| TopicWord {
                            word: w.as_ref().to_owned(),
                            weight: 0.0,
                        })
                        .collect()
                })
                .collect(),
        }
    }

    pub fn k(&self) -> usize {
        self.topics.len()
    }

    /// Words per topic (taken from the first topic).
    pub fn n(&self) -> usize {
        self.topics.first().map_or(0, Vec::len)
    }

    pub fn words(&self, topic: usize) -> impl Iterator<Item = &str> {
        self.topics[topic].iter().map(|w| w.word.as_str())
    }

    pub fn word_lists(&self) -> Vec<Vec<String>> {
        self.topics
            .iter()
            .map(|t| t.iter().map(|w| w.word.clone()).collect())
            .collect()
    }

    /// Checks the shape the metrics need: at least one topic, every topic
    /// non-empty with the same length, and no repeated word within a topic.
    pub fn validate(&self) -> Result<()> {
        let n = self.n();
        if self.topics.is_empty() || n == 0 {
            return Err(Error::MalformedTopics("no topics or empty topic".into()));
        }
        for (k, topic) in self.topics.iter().enumerate() {
            if topic.len() != n {
                return Err(Error::MalformedTopics(format!(
                    "topic {k} has {} words, expected {n}",
                    topic.len()
                )));
            }
            let mut seen = HashSet::with_capacity(n);
            for w in topic {
                if w.word.is_empty() {
                    return Err(Error::MalformedTopics(format!("topic {k} has an empty word")));
                }
                if !seen.insert(w.word.as_str()) {
                    return Err(Error::MalformedTopics(format!(
                        "topic {k} repeats word {:?}",
                        w.word
                    )));
                }
            }
        }
        Ok(())
    }

    /// Additional checks for model output: weights in (0, 1) and
    /// non-increasing within each topic.
    pub fn validate_weights(&self) -> Result<()> {
        self.validate()?;
        for (k, topic) in self.topics.iter().enumerate() {
            for pair in topic.windows(2) {
                if pair[1].weight > pair[0].weight {
                    return Err(Error::MalformedTopics(format!("topic {k} weights increase")));
                }
            }
            if let Some(w) = topic.iter().find(|w| !(w.weight > 0.0 && w.weight < 1.0)) {
                return Err(Error::MalformedTopics(format!(
                    "topic {k} weight {} of {:?} outside (0, 1)",
                    w.weight, w.word
                )));
            }
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let set: TopicSet = serde_json::from_str(&text)?;
        set.validate()?;
        Ok(set)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut json = serde_json::to_string_pretty(self)?;
        json.push('\n');
        fs::write(path, json).map_err(|e| Error::io(path, e))
    }
}
