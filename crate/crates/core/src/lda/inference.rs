use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{doc_rng, sample_index, LdaModel};
use crate::preprocess::ProcessedDocument;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InferenceConfig {
    pub iterations: usize,
    /// Sweeps discarded before averaging.
    pub burn_in: usize,
}

impl Default for InferenceConfig {
    fn default() -> Self {
        InferenceConfig {
            iterations: 100,
            burn_in: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocTopics {
    pub probabilities: Vec<f64>,
    pub dominant: usize,
    /// No in-vocabulary tokens: `probabilities` is the uniform fallback.
    pub no_known_tokens: bool,
}

/// Fold-in Gibbs estimate of one document's topic mixture against the fixed
/// topic-word counts of `model`. The estimate averages
/// `(n_dk + alpha) / (n_d + K alpha)` over the post-burn-in sweeps.
pub fn infer_doc_topics(model: &LdaModel, doc: &ProcessedDocument, config: &InferenceConfig) -> DocTopics {
    let k = model.k;
    let words = model.vocabulary.encode(&doc.tokens);
    if words.is_empty() {
        return DocTopics {
            probabilities: vec![1.0 / k as f64; k],
            dominant: 0,
            no_known_tokens: true,
        };
    }

    let v_beta = model.vocabulary.len() as f64 * model.beta;
    let phi = |t: usize, w: u32| {
        (model.topic_word_counts[t][w as usize] as f64 + model.beta)
            / (model.topic_totals[t] as f64 + v_beta)
    };
    let mut rng = doc_rng(model.seed, &doc.id, b"infer");
    let mut counts = vec![0u32; k];
    let mut z: Vec<usize> = words
        .iter()
        .map(|_| {
            let t = rng.random_range(0..k);
            counts[t] += 1;
            t
        })
        .collect();

    let iterations = config.iterations.max(config.burn_in + 1);
    let denom = words.len() as f64 + k as f64 * model.alpha;
    let mut acc = vec![0.0f64; k];
    let mut weights = vec![0.0f64; k];
    for sweep in 0..iterations {
        for (i, &w) in words.iter().enumerate() {
            counts[z[i]] -= 1;
            for t in 0..k {
                weights[t] = (counts[t] as f64 + model.alpha) * phi(t, w);
            }
            z[i] = sample_index(&mut rng, &weights);
            counts[z[i]] += 1;
        }
        if sweep >= config.burn_in {
            for t in 0..k {
                acc[t] += (counts[t] as f64 + model.alpha) / denom;
            }
        }
    }
    let total: f64 = acc.iter().sum();
    let probabilities: Vec<f64> = acc.iter().map(|a| a / total).collect();
    let dominant = probabilities
        .iter()
        .enumerate()
        .fold(0, |best, (t, &p)| if p > probabilities[best] { t } else { best });
    DocTopics {
        probabilities,
        dominant,
        no_known_tokens: false,
    }
}
