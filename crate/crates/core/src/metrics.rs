//! Topic-quality metrics: NPMI-based C_v coherence, topic uniqueness (TU),
//! topic redundancy (TR) and topic diversity (TD).
//!
//! TU, TR and TD depend only on `#(x)`, the number of topics whose keyword
//! list contains `x`. All three sum per-word terms within a topic in list
//! order, divide by N, sum over topics in order and divide by K.

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::cooccur::CooccurrenceIndex;
use crate::error::Result;
use crate::topics::TopicSet;

/// `#(x)` for every word of a topic set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WordOccurrenceCount(HashMap<String, usize>);

impl WordOccurrenceCount {
    pub fn from_topics(topics: &TopicSet) -> Self {
        let mut counts = HashMap::new();
        for topic in &topics.topics {
            for w in topic {
                *counts.entry(w.word.clone()).or_insert(0) += 1;
            }
        }
        WordOccurrenceCount(counts)
    }

    pub fn get(&self, word: &str) -> usize {
        self.0.get(word).copied().unwrap_or(0)
    }

    /// Number of distinct words.
    pub fn distinct(&self) -> usize {
        self.0.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, usize)> {
        self.0.iter().map(|(w, &c)| (w.as_str(), c))
    }
}

/// `#(x)` of every keyword slot, topic by topic.
fn slot_counts<'a>(topics: &'a TopicSet, counts: &'a WordOccurrenceCount) -> impl Iterator<Item = usize> + 'a {
    topics.topics.iter().flatten().map(|w| counts.get(&w.word))
}

// The three diversity scores are ratios of integers: the slot sums below
// are exact, and a single division rounds them correctly.

/// Topic uniqueness: mean of `1/#(x)` over all keyword slots. Lies in
/// `[1/K, 1]`. The sum of `1/#(x)` over slots is the number of distinct
/// words.
pub fn tu(topics: &TopicSet) -> Result<f64> {
    topics.validate()?;
    let counts = WordOccurrenceCount::from_topics(topics);
    Ok(counts.distinct() as f64 / (topics.k() * topics.n()) as f64)
}

/// Topic redundancy: mean of `(#(x) - 1) / (K - 1)`. Defined as 0 when
/// K = 1; [`evaluate`] flags that case.
pub fn tr(topics: &TopicSet) -> Result<f64> {
    topics.validate()?;
    let k = topics.k();
    if k == 1 {
        return Ok(0.0);
    }
    let counts = WordOccurrenceCount::from_topics(topics);
    let excess: usize = slot_counts(topics, &counts).map(|c| c - 1).sum();
    Ok(excess as f64 / ((k - 1) * k * topics.n()) as f64)
}

/// Topic diversity: fraction of keyword slots holding a word that appears
/// in exactly one topic.
pub fn td(topics: &TopicSet) -> Result<f64> {
    topics.validate()?;
    let counts = WordOccurrenceCount::from_topics(topics);
    let once = slot_counts(topics, &counts).filter(|&c| c == 1).count();
    Ok(once as f64 / (topics.k() * topics.n()) as f64)
}

/// Smoothed normalized PMI. The self-pair uses `P(w, w) = P(w)`.
pub fn npmi(index: &CooccurrenceIndex, wi: &str, wj: &str) -> f64 {
    let eps = index.epsilon();
    let p_i = index.probability(wi);
    let p_j = index.probability(wj);
    let p_ij = index.pair_probability(wi, wj);
    ((p_ij + eps) / (p_i * p_j + eps)).ln() / -(p_ij + eps).ln()
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

/// C_v of a single keyword list: each word's NPMI vector against every
/// word of the list is compared by cosine with the summed vector, and the
/// cosines are averaged.
pub fn topic_cv<S: AsRef<str>>(words: &[S], index: &CooccurrenceIndex) -> f64 {
    let t = words.len();
    if t == 0 {
        return 0.0;
    }
    let matrix: Vec<Vec<f64>> = words
        .iter()
        .map(|xi| words.iter().map(|xj| npmi(index, xi.as_ref(), xj.as_ref())).collect())
        .collect();
    let aggregate: Vec<f64> = (0..t).map(|j| matrix.iter().map(|row| row[j]).sum()).collect();
    matrix.iter().map(|row| cosine(row, &aggregate)).sum::<f64>() / t as f64
}

/// Per-topic C_v scores in topic order.
pub fn cv_per_topic(topics: &TopicSet, index: &CooccurrenceIndex) -> Result<Vec<f64>> {
    topics.validate()?;
    Ok(topics
        .word_lists()
        .iter()
        .map(|words| topic_cv(words, index))
        .collect())
}

/// Mean per-topic C_v.
pub fn cv(topics: &TopicSet, index: &CooccurrenceIndex) -> Result<f64> {
    let scores = cv_per_topic(topics, index)?;
    Ok(scores.iter().sum::<f64>() / scores.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub cv: f64,
    pub tu: f64,
    pub tr: f64,
    pub td: f64,
    pub k: usize,
    pub n: usize,
    pub cv_per_topic: Vec<f64>,
    pub index_config: String,
    #[serde(default)]
    pub model_id: String,
    #[serde(default)]
    pub variant: String,
    /// Keywords outside the index's word universe or never seen in it.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub unseen_words: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<String>,
}

/// Computes all four metrics for one topic set.
pub fn evaluate(topics: &TopicSet, index: &CooccurrenceIndex) -> Result<MetricReport> {
    topics.validate()?;
    let cv_per_topic = cv_per_topic(topics, index)?;
    let cv = cv_per_topic.iter().sum::<f64>() / cv_per_topic.len() as f64;

    let unseen: BTreeSet<String> = topics
        .topics
        .iter()
        .flatten()
        .filter(|w| !index.covers(&w.word) || index.word_count(&w.word) == 0)
        .map(|w| w.word.clone())
        .collect();

    let mut flags = Vec::new();
    if topics.k() == 1 {
        flags.push("single_topic_tr_defined_as_zero".to_owned());
    }
    if cv < 0.0 {
        flags.push("negative_cv".to_owned());
    }
    if topics.topics.iter().flatten().any(|w| !index.covers(&w.word)) {
        flags.push("keywords_outside_index_filter".to_owned());
    }

    Ok(MetricReport {
        cv,
        tu: tu(topics)?,
        tr: tr(topics)?,
        td: td(topics)?,
        k: topics.k(),
        n: topics.n(),
        cv_per_topic,
        index_config: index.config_id(),
        model_id: String::new(),
        variant: String::new(),
        unseen_words: unseen.into_iter().collect(),
        flags,
    })
}

impl MetricReport {
    pub fn with_labels(mut self, variant: impl Into<String>, model_id: impl Into<String>) -> Self {
        self.variant = variant.into();
        self.model_id = model_id.into();
        self
    }
}

/// Direction in which a metric improves.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Better {
    Higher,
    Lower,
}

pub const METRIC_COLUMNS: [(&str, Better); 4] = [
    ("C_v", Better::Higher),
    ("TU", Better::Higher),
    ("TR", Better::Lower),
    ("TD", Better::Higher),
];

fn metric_values(r: &MetricReport) -> [f64; 4] {
    [r.cv, r.tu, r.tr, r.td]
}

/// Plain-text table with one row per report. Rows sharing a `model_id` form
/// a group; within each group the best value of every metric is marked with
/// `*`.
pub fn render_table(reports: &[MetricReport]) -> String {
    let labels: Vec<String> = reports
        .iter()
        .map(|r| match (r.model_id.is_empty(), r.variant.is_empty()) {
            (false, false) => format!("{} / {}", r.model_id, r.variant),
            (false, true) => r.model_id.clone(),
            (true, false) => r.variant.clone(),
            (true, true) => "-".to_owned(),
        })
        .collect();
    let width = labels.iter().map(String::len).max().unwrap_or(0).max(5);

    let mut best: HashMap<&str, [f64; 4]> = HashMap::new();
    for r in reports {
        let vals = metric_values(r);
        let entry = best.entry(r.model_id.as_str()).or_insert(vals);
        for (i, (_, dir)) in METRIC_COLUMNS.iter().enumerate() {
            entry[i] = match dir {
                Better::Higher => entry[i].max(vals[i]),
                Better::Lower => entry[i].min(vals[i]),
            };
        }
    }
    let group_size = |model: &str| reports.iter().filter(|r| r.model_id == model).count();

    let mut out = String::new();
    let _ = write!(out, "{:width$}", "run");
    for (name, dir) in METRIC_COLUMNS {
        let arrow = if dir == Better::Higher { "↑" } else { "↓" };
        let _ = write!(out, "  {:>10}", format!("{name} {arrow}"));
    }
    out.push('\n');
    let mut last_model: Option<&str> = None;
    for (r, label) in reports.iter().zip(&labels) {
        if last_model.is_some_and(|m| m != r.model_id) {
            out.push_str(&"-".repeat(width + 4 * 12));
            out.push('\n');
        }
        last_model = Some(&r.model_id);
        let _ = write!(out, "{label:width$}");
        let top = best[r.model_id.as_str()];
        for (i, v) in metric_values(r).iter().enumerate() {
            let mark = if group_size(&r.model_id) > 1 && *v == top[i] { "*" } else { " " };
            let _ = write!(out, "  {:>9.4}{mark}", v);
        }
        out.push('\n');
    }
    out
}

/// Row-by-row difference table `b - a` for two aligned report lists.
pub fn render_delta_table(a: &[MetricReport], b: &[MetricReport]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:24}  {:>10}  {:>10}  {:>10}  {:>10}",
        "run (b - a)", "ΔC_v", "ΔTU", "ΔTR", "ΔTD"
    );
    for (ra, rb) in a.iter().zip(b) {
        let label = format!(
            "{} vs {}",
            if ra.variant.is_empty() { "a" } else { &ra.variant },
            if rb.variant.is_empty() { "b" } else { &rb.variant }
        );
        let (va, vb) = (metric_values(ra), metric_values(rb));
        let _ = write!(out, "{label:24}");
        for i in 0..4 {
            let _ = write!(out, "  {:>+10.4}", vb[i] - va[i]);
        }
        out.push('\n');
    }
    out
}
