//! Latent Dirichlet Allocation fitted by collapsed Gibbs sampling.
//!
//! Documents are swept in a canonical order (sorted by id) and every
//! document owns a random stream seeded from `(seed, doc id)`, so the fitted
//! model does not depend on the order documents are passed in and two runs
//! with the same inputs and seed produce identical count matrices.

mod inference;
mod vocabulary;

use std::fs;
use std::path::Path;

use log::debug;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::preprocess::ProcessedDocument;
use crate::topics::{TopicSet, TopicWord};

pub use inference::{infer_doc_topics, DocTopics, InferenceConfig};
pub use vocabulary::{build_vocabulary, Vocabulary};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LdaConfig {
    pub k: usize,
    /// Symmetric document-topic prior; `None` means `50 / k`.
    pub alpha: Option<f64>,
    pub beta: f64,
    pub iterations: usize,
    pub seed: u64,
    pub min_doc_freq: usize,
    /// Split each sweep across this many partitions sampled in parallel
    /// against a snapshot of the topic-word counts. `1` is exact sequential
    /// Gibbs sampling; other values give an approximate sampler whose output
    /// depends on the partition count.
    pub partitions: usize,
}

impl Default for LdaConfig {
    fn default() -> Self {
        LdaConfig {
            k: 8,
            alpha: None,
            beta: 0.01,
            iterations: 1000,
            seed: 0,
            min_doc_freq: 2,
            partitions: 1,
        }
    }
}

impl LdaConfig {
    pub fn alpha(&self) -> f64 {
        self.alpha.unwrap_or(50.0 / self.k as f64)
    }
}

/// A fitted model. Count matrices are stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LdaModel {
    pub k: usize,
    pub alpha: f64,
    pub beta: f64,
    pub seed: u64,
    pub iterations: usize,
    pub vocabulary: Vocabulary,
    /// Document ids in the order of `doc_topic_counts` rows (input order).
    pub doc_ids: Vec<String>,
    /// K × V.
    pub topic_word_counts: Vec<Vec<u32>>,
    pub topic_totals: Vec<u64>,
    /// D × K.
    pub doc_topic_counts: Vec<Vec<u32>>,
    /// Joint log-likelihood log p(w, z) after each sweep.
    pub log_likelihood: Vec<f64>,
}

/// Stable per-document random stream.
pub(crate) fn doc_rng(seed: u64, doc_id: &str, salt: &[u8]) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(salt);
    h.update(doc_id.as_bytes());
    let digest = h.finalize();
    let mut bytes = [0u8; 32];
    bytes.copy_from_slice(&digest);
    ChaCha8Rng::from_seed(bytes)
}

/// Draws an index proportionally to `weights` (all non-negative, positive sum).
pub(crate) fn sample_index<R: Rng>(rng: &mut R, weights: &[f64]) -> usize {
    let total: f64 = weights.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (i, &w) in weights.iter().enumerate() {
        if u < w {
            return i;
        }
        u -= w;
    }
    weights.len() - 1
}

struct Chain {
    k: usize,
    v: usize,
    alpha: f64,
    beta: f64,
    /// Canonical sweep order: documents sorted by id.
    docs: Vec<Vec<u32>>,
    assignments: Vec<Vec<u16>>,
    rngs: Vec<ChaCha8Rng>,
    doc_topic: Vec<Vec<u32>>,
    /// Flat K × V.
    topic_word: Vec<u32>,
    topic_totals: Vec<u64>,
}

impl Chain {
    fn init(k: usize, v: usize, alpha: f64, beta: f64, docs: Vec<Vec<u32>>, ids: &[&str], seed: u64) -> Self {
        let mut rngs: Vec<ChaCha8Rng> = ids.iter().map(|id| doc_rng(seed, id, b"fit")).collect();
        let mut topic_word = vec![0u32; k * v];
        let mut topic_totals = vec![0u64; k];
        let mut doc_topic = vec![vec![0u32; k]; docs.len()];
        let mut assignments = Vec::with_capacity(docs.len());
        for (d, doc) in docs.iter().enumerate() {
            let z: Vec<u16> = doc
                .iter()
                .map(|&w| {
                    let t = rngs[d].random_range(0..k);
                    topic_word[t * v + w as usize] += 1;
                    topic_totals[t] += 1;
                    doc_topic[d][t] += 1;
                    t as u16
                })
                .collect();
            assignments.push(z);
        }
        Chain {
            k,
            v,
            alpha,
            beta,
            docs,
            assignments,
            rngs,
            doc_topic,
            topic_word,
            topic_totals,
        }
    }

    /// One sequential sweep over the documents in `range`, updating the
    /// given topic-word tables.
    #[allow(clippy::too_many_arguments)]
    fn sweep_docs(
        k: usize,
        v: usize,
        alpha: f64,
        beta: f64,
        docs: &[Vec<u32>],
        assignments: &mut [Vec<u16>],
        rngs: &mut [ChaCha8Rng],
        doc_topic: &mut [Vec<u32>],
        topic_word: &mut [u32],
        topic_totals: &mut [u64],
    ) {
        let v_beta = v as f64 * beta;
        let mut weights = vec![0.0f64; k];
        for d in 0..docs.len() {
            let rng = &mut rngs[d];
            for (i, &w) in docs[d].iter().enumerate() {
                let w = w as usize;
                let old = assignments[d][i] as usize;
                doc_topic[d][old] -= 1;
                topic_word[old * v + w] -= 1;
                topic_totals[old] -= 1;
                for t in 0..k {
                    weights[t] = (doc_topic[d][t] as f64 + alpha)
                        * (topic_word[t * v + w] as f64 + beta)
                        / (topic_totals[t] as f64 + v_beta);
                }
                let new = sample_index(rng, &weights);
                assignments[d][i] = new as u16;
                doc_topic[d][new] += 1;
                topic_word[new * v + w] += 1;
                topic_totals[new] += 1;
            }
        }
    }

    fn sweep(&mut self) {
        Self::sweep_docs(
            self.k,
            self.v,
            self.alpha,
            self.beta,
            &self.docs,
            &mut self.assignments,
            &mut self.rngs,
            &mut self.doc_topic,
            &mut self.topic_word,
            &mut self.topic_totals,
        );
    }

    /// Approximate distributed sweep: every partition samples against its
    /// own copy of the topic-word counts and the deltas are summed after.
    fn sweep_partitioned(&mut self, partitions: usize) {
        let chunk = self.docs.len().div_ceil(partitions).max(1);
        let (k, v, alpha, beta) = (self.k, self.v, self.alpha, self.beta);
        let snapshot_tw = self.topic_word.clone();
        let snapshot_tt = self.topic_totals.clone();
        let deltas: Vec<(Vec<i64>, Vec<i64>)> = self
            .docs
            .par_chunks(chunk)
            .zip(self.assignments.par_chunks_mut(chunk))
            .zip(self.rngs.par_chunks_mut(chunk))
            .zip(self.doc_topic.par_chunks_mut(chunk))
            .map(|(((docs, z), rngs), dt)| {
                let mut tw = snapshot_tw.clone();
                let mut tt = snapshot_tt.clone();
                Self::sweep_docs(k, v, alpha, beta, docs, z, rngs, dt, &mut tw, &mut tt);
                let dtw = tw
                    .iter()
                    .zip(&snapshot_tw)
                    .map(|(&a, &b)| a as i64 - b as i64)
                    .collect();
                let dtt = tt
                    .iter()
                    .zip(&snapshot_tt)
                    .map(|(&a, &b)| a as i64 - b as i64)
                    .collect();
                (dtw, dtt)
            })
            .collect();
        for (dtw, dtt) in deltas {
            for (c, d) in self.topic_word.iter_mut().zip(dtw) {
                *c = (*c as i64 + d) as u32;
            }
            for (c, d) in self.topic_totals.iter_mut().zip(dtt) {
                *c = (*c as i64 + d) as u64;
            }
        }
    }

    fn log_likelihood(&self) -> f64 {
        let (k, v) = (self.k as f64, self.v as f64);
        let lg = libm::lgamma;
        let mut ll = k * (lg(v * self.beta) - v * lg(self.beta));
        for t in 0..self.k {
            let row = &self.topic_word[t * self.v..(t + 1) * self.v];
            ll += row.iter().map(|&c| lg(c as f64 + self.beta)).sum::<f64>();
            ll -= lg(self.topic_totals[t] as f64 + v * self.beta);
        }
        let docs = self.docs.iter().filter(|d| !d.is_empty()).count() as f64;
        ll += docs * (lg(k * self.alpha) - k * lg(self.alpha));
        for (d, doc) in self.docs.iter().enumerate() {
            if doc.is_empty() {
                continue;
            }
            ll += self.doc_topic[d].iter().map(|&c| lg(c as f64 + self.alpha)).sum::<f64>();
            ll -= lg(doc.len() as f64 + k * self.alpha);
        }
        ll
    }
}

/// Fits a model, building the vocabulary with `config.min_doc_freq`.
pub fn fit(corpus: &[ProcessedDocument], config: &LdaConfig) -> Result<LdaModel> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let vocabulary = build_vocabulary(corpus, config.min_doc_freq)?;
    fit_with_vocabulary(corpus, vocabulary, config)
}

/// Fits a model over a fixed vocabulary; out-of-vocabulary tokens are ignored.
pub fn fit_with_vocabulary(
    corpus: &[ProcessedDocument],
    vocabulary: Vocabulary,
    config: &LdaConfig,
) -> Result<LdaModel> {
    let k = config.k;
    let alpha = config.alpha();
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    if k < 2 || k > u16::MAX as usize {
        return Err(Error::InvalidArgument(format!("k must be in 2..=65535, got {k}")));
    }
    if config.iterations == 0 {
        return Err(Error::InvalidArgument("iterations must be at least 1".into()));
    }
    if !(alpha > 0.0 && config.beta > 0.0) {
        return Err(Error::InvalidArgument("alpha and beta must be positive".into()));
    }
    if config.partitions == 0 {
        return Err(Error::InvalidArgument("partitions must be at least 1".into()));
    }

    let mut order: Vec<usize> = (0..corpus.len()).collect();
    order.sort_by(|&a, &b| corpus[a].id.cmp(&corpus[b].id));
    let docs: Vec<Vec<u32>> = order
        .iter()
        .map(|&i| vocabulary.encode(&corpus[i].tokens))
        .collect();
    let non_empty = docs.iter().filter(|d| !d.is_empty()).count();
    if non_empty < k {
        return Err(Error::InvalidArgument(format!(
            "k = {k} exceeds the {non_empty} documents with in-vocabulary tokens"
        )));
    }
    let ids: Vec<&str> = order.iter().map(|&i| corpus[i].id.as_str()).collect();
    let v = vocabulary.len();
    let mut chain = Chain::init(k, v, alpha, config.beta, docs, &ids, config.seed);

    let mut trace = Vec::with_capacity(config.iterations);
    for sweep in 0..config.iterations {
        if config.partitions == 1 {
            chain.sweep();
        } else {
            chain.sweep_partitioned(config.partitions);
        }
        let ll = chain.log_likelihood();
        debug!("sweep {} log-likelihood {ll:.4}", sweep + 1);
        trace.push(ll);
    }

    // back to input order
    let mut doc_topic_counts = vec![Vec::new(); corpus.len()];
    for (pos, &i) in order.iter().enumerate() {
        doc_topic_counts[i] = std::mem::take(&mut chain.doc_topic[pos]);
    }
    Ok(LdaModel {
        k,
        alpha,
        beta: config.beta,
        seed: config.seed,
        iterations: config.iterations,
        topic_word_counts: chain.topic_word.chunks(v).map(<[u32]>::to_vec).collect(),
        topic_totals: chain.topic_totals,
        doc_ids: corpus.iter().map(|d| d.id.clone()).collect(),
        doc_topic_counts,
        vocabulary,
        log_likelihood: trace,
    })
}

impl LdaModel {
    pub fn vocabulary_len(&self) -> usize {
        self.vocabulary.len()
    }

    /// Smoothed topic-word probability `(n_kw + beta) / (n_k + V beta)`.
    pub fn word_probability(&self, topic: usize, word: u32) -> f64 {
        let v = self.vocabulary.len() as f64;
        (self.topic_word_counts[topic][word as usize] as f64 + self.beta)
            / (self.topic_totals[topic] as f64 + v * self.beta)
    }

    /// Checks the count invariants: per-topic rows sum to topic totals and
    /// per-document rows sum to the document's in-vocabulary token count.
    pub fn check_counts(&self, corpus: &[ProcessedDocument]) -> Result<()> {
        for (t, row) in self.topic_word_counts.iter().enumerate() {
            let sum: u64 = row.iter().map(|&c| c as u64).sum();
            if sum != self.topic_totals[t] {
                return Err(Error::InvalidArgument(format!("topic {t} counts do not sum to total")));
            }
        }
        for (doc, row) in corpus.iter().zip(&self.doc_topic_counts) {
            let expected = self.vocabulary.encode(&doc.tokens).len() as u64;
            if row.iter().map(|&c| c as u64).sum::<u64>() != expected {
                return Err(Error::InvalidArgument(format!(
                    "document {} topic counts do not sum to its length",
                    doc.id
                )));
            }
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string(self)?;
        fs::write(path, json + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let model: LdaModel = serde_json::from_str(&text)?;
        if model.topic_word_counts.len() != model.k
            || model
                .topic_word_counts
                .iter()
                .any(|r| r.len() != model.vocabulary.len())
        {
            return Err(Error::InvalidArgument("model count matrix has the wrong shape".into()));
        }
        Ok(model)
    }
}

/// The `n` most probable words of every topic. Weights are the smoothed
/// topic-word probabilities; equal weights are ordered lexicographically.
pub fn top_keywords(model: &LdaModel, n: usize) -> Result<TopicSet> {
    let v = model.vocabulary.len();
    if n == 0 || n > v {
        return Err(Error::InvalidArgument(format!(
            "top-N must be in 1..={v} (vocabulary size), got {n}"
        )));
    }
    let topics = (0..model.k)
        .map(|t| {
            let counts = &model.topic_word_counts[t];
            let mut ids: Vec<u32> = (0..v as u32).collect();
            // weight is monotone in the count within a topic, so ordering by
            // integer count gives exact ties
            ids.sort_unstable_by(|&a, &b| {
                counts[b as usize]
                    .cmp(&counts[a as usize])
                    .then_with(|| model.vocabulary.word(a).cmp(model.vocabulary.word(b)))
            });
            ids.truncate(n);
            ids.into_iter()
                .map(|id| TopicWord {
                    word: model.vocabulary.word(id).to_owned(),
                    weight: model.word_probability(t, id),
                })
                .collect()
        })
        .collect();
    Ok(TopicSet { topics })
}
