//! Synthetic inputs for the benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tmr_core::{ProcessedDocument, TopicSet};

/// `docs` documents of `len` tokens, each drawn from one of `topics`
/// disjoint blocks of `words_per_topic` words.
pub fn synthetic_corpus(
    docs: usize,
    len: usize,
    topics: usize,
    words_per_topic: usize,
    seed: u64,
) -> Vec<ProcessedDocument> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..docs)
        .map(|d| {
            let t = d % topics;
            let tokens = (0..len)
                .map(|_| format!("t{t}w{}", rng.random_range(0..words_per_topic)))
                .collect();
            ProcessedDocument::new(format!("d{d:06}"), tokens)
        })
        .collect()
}

/// Random topic set over a vocabulary of `vocab` words.
pub fn random_topics(k: usize, n: usize, vocab: usize, seed: u64) -> TopicSet {
    assert!(n <= vocab);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lists: Vec<Vec<String>> = (0..k)
        .map(|_| {
            let mut picked: Vec<usize> = Vec::with_capacity(n);
            while picked.len() < n {
                let w = rng.random_range(0..vocab);
                if !picked.contains(&w) {
                    picked.push(w);
                }
            }
            picked.into_iter().map(|w| format!("w{w}")).collect()
        })
        .collect();
    TopicSet::from_words(&lists)
}
