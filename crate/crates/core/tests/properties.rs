//! Property tests for the module invariants.

use std::collections::{BTreeMap, HashMap};

use proptest::prelude::*;
use tmr_core::cooccur::{build_index, CooccurrenceIndex};
use tmr_core::corpus::{self, RawDocument};
use tmr_core::lda::{self, LdaConfig};
use tmr_core::metrics::{self, topic_cv};
use tmr_core::preprocess::{preprocess, PreprocessConfig};
use tmr_core::{ProcessedDocument, TopicSet};

// ---- corpus ----

fn text_strategy() -> impl Strategy<Value = String> {
    prop::collection::vec(
        prop_oneof![
            "[a-zA-Z]{1,8}",
            "[0-9]{1,3}",
            Just("héllo".to_string()),
            Just("\"quoted\"".to_string()),
            Just("tab\there".to_string()),
            Just("🙂".to_string()),
            Just("#tag".to_string()),
            Just("a,b".to_string()),
        ],
        1..12,
    )
    .prop_map(|w| w.join(" "))
}

fn corpus_strategy() -> impl Strategy<Value = Vec<RawDocument>> {
    prop::collection::vec(text_strategy(), 1..20).prop_map(|texts| {
        texts
            .into_iter()
            .enumerate()
            .map(|(i, t)| RawDocument::new(format!("id-{i}"), t))
            .collect()
    })
}

proptest! {
    #[test]
    fn jsonl_round_trip(docs in corpus_strategy()) {
        let mut buf = Vec::new();
        corpus::write_jsonl(&mut buf, &docs).unwrap();
        let back = corpus::ingest_jsonl_str(std::str::from_utf8(&buf).unwrap()).unwrap();
        prop_assert!(back.rejections.is_empty());
        prop_assert_eq!(&back.documents, &docs);
        let mut again = Vec::new();
        corpus::write_jsonl(&mut again, &back.documents).unwrap();
        prop_assert_eq!(buf, again);
    }

    #[test]
    fn stats_permutation_invariant(docs in corpus_strategy(), seed in any::<u64>()) {
        let a = corpus::stats(&docs).unwrap();
        let mut shuffled = docs.clone();
        let mut s = seed;
        for i in (1..shuffled.len()).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            shuffled.swap(i, (s >> 33) as usize % (i + 1));
        }
        let b = corpus::stats(&shuffled).unwrap();
        prop_assert_eq!(a.mean_words.to_bits(), b.mean_words.to_bits());
        prop_assert_eq!(a.std_words.to_bits(), b.std_words.to_bits());
        prop_assert_eq!(a, b);
    }

    #[test]
    fn percentiles_are_observed(docs in corpus_strategy()) {
        let s = corpus::stats(&docs).unwrap();
        let counts: Vec<usize> = docs.iter().map(|d| d.text.split_whitespace().count()).collect();
        for p in [s.p25, s.median, s.p75, s.min_words, s.max_words] {
            prop_assert!(counts.contains(&p));
        }
        prop_assert!(s.min_words <= s.p25 && s.p25 <= s.median);
        prop_assert!(s.median <= s.p75 && s.p75 <= s.max_words);
    }
}

// ---- preprocess ----

fn messy_text() -> impl Strategy<Value = String> {
    prop::collection::vec(
        prop_oneof![
            "[a-zA-Z]{1,10}",
            Just("The".to_string()),
            Just("WERE".to_string()),
            Just("vaccines".to_string()),
            Just("children".to_string()),
            Just("don't".to_string()),
            Just("'quoted'".to_string()),
            Just("https://t.co/xyz".to_string()),
            Just("www.example.com/a?b=1".to_string()),
            Just("#Vaccine".to_string()),
            Just("#was".to_string()),
            Just("@User_1".to_string()),
            Just("café".to_string()),
            Just("naïve".to_string()),
            Just("😷🎉".to_string()),
            Just("!!!".to_string()),
            Just("e-mail".to_string()),
            Just("a#b@c".to_string()),
            Just("ＡＢＣ".to_string()),
            Just("_".to_string()),
        ],
        0..15,
    )
    .prop_map(|w| w.join(" "))
}

fn configs() -> Vec<PreprocessConfig> {
    let stripped = PreprocessConfig {
        keep_hashtags: false,
        keep_mentions: false,
        ..PreprocessConfig::default()
    };
    vec![PreprocessConfig::default(), stripped, PreprocessConfig::bare()]
}

fn token_ok(t: &str) -> bool {
    let body = t.strip_prefix(['#', '@']).unwrap_or(t);
    !body.is_empty()
        && !t.contains("://")
        && body
            .chars()
            .all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_' || c == '\'')
        && !body.starts_with('\'')
        && !body.ends_with('\'')
}

proptest! {
    #[test]
    fn preprocess_idempotent(text in messy_text()) {
        for config in configs() {
            let once = preprocess(&text, &config);
            let twice = preprocess(&once.join(" "), &config);
            prop_assert_eq!(&once, &twice, "text {:?}", text);
        }
    }

    #[test]
    fn preprocess_token_class(text in messy_text()) {
        for config in configs() {
            for t in preprocess(&text, &config) {
                prop_assert!(token_ok(&t), "bad token {:?} from {:?}", t, text);
                if !config.stopwords.is_empty() {
                    prop_assert!(!config.stopwords.contains(&t));
                }
            }
        }
    }

    #[test]
    fn preprocess_deterministic(text in messy_text()) {
        let config = PreprocessConfig::default();
        prop_assert_eq!(preprocess(&text, &config), preprocess(&text, &config.clone()));
    }
}

// ---- co-occurrence index ----

fn token_docs() -> impl Strategy<Value = Vec<Vec<String>>> {
    let word = prop::sample::select(vec!["a", "b", "c", "d", "e"]).prop_map(String::from);
    prop::collection::vec(prop::collection::vec(word, 0..15), 1..10)
}

fn index_bytes(idx: &CooccurrenceIndex) -> Vec<u8> {
    let mut buf = Vec::new();
    idx.write_to(&mut buf).unwrap();
    buf
}

proptest! {
    #[test]
    fn index_symmetric(docs in token_docs(), w in 1usize..8) {
        let idx = build_index(&docs, w, None).unwrap();
        for a in ["a", "b", "c", "d", "e"] {
            for b in ["a", "b", "c", "d", "e"] {
                prop_assert_eq!(idx.pair_count(a, b), idx.pair_count(b, a));
                prop_assert!(idx.pair_count(a, b) <= idx.word_count(a).min(idx.word_count(b)));
            }
        }
    }

    #[test]
    fn index_monotone(docs in token_docs(), extra in prop::collection::vec(prop::sample::select(vec!["a", "b", "c", "z"]), 0..10), w in 1usize..8) {
        let before = build_index(&docs, w, None).unwrap();
        let mut more = docs.clone();
        more.push(extra.iter().map(|s| s.to_string()).collect());
        let after = build_index(&more, w, None).unwrap();
        prop_assert!(after.total_windows() >= before.total_windows());
        for a in ["a", "b", "c", "d", "e", "z"] {
            prop_assert!(after.word_count(a) >= before.word_count(a));
            for b in ["a", "b", "c", "d", "e", "z"] {
                prop_assert!(after.pair_count(a, b) >= before.pair_count(a, b));
            }
        }
    }

    #[test]
    fn index_rebuild_byte_stable(docs in token_docs(), w in 1usize..8) {
        let a = build_index(&docs, w, None).unwrap();
        let b = build_index(&docs, w, None).unwrap();
        let bytes = index_bytes(&a);
        prop_assert_eq!(&bytes, &index_bytes(&b));
        let back = CooccurrenceIndex::read_from(bytes.as_slice()).unwrap();
        prop_assert_eq!(back, a);
    }
}

// ---- metrics ----

fn topic_set() -> impl Strategy<Value = TopicSet> {
    (1usize..6, 1usize..7).prop_flat_map(|(k, n)| {
        prop::collection::vec(
            prop::sample::subsequence((0..16).collect::<Vec<u32>>(), n).prop_shuffle(),
            k,
        )
        .prop_map(|lists| {
            let words: Vec<Vec<String>> = lists
                .into_iter()
                .map(|l| l.into_iter().map(|w| format!("w{w}")).collect())
                .collect();
            TopicSet::from_words(&words)
        })
    })
}

fn permuted(t: &TopicSet, seed: u64) -> TopicSet {
    let mut lists = t.word_lists();
    let mut s = seed | 1;
    let mut next = |m: usize| {
        s ^= s << 13;
        s ^= s >> 7;
        s ^= s << 17;
        (s % m as u64) as usize
    };
    for l in lists.iter_mut() {
        for i in (1..l.len()).rev() {
            let j = next(i + 1);
            l.swap(i, j);
        }
    }
    for i in (1..lists.len()).rev() {
        let j = next(i + 1);
        lists.swap(i, j);
    }
    TopicSet::from_words(&lists)
}

proptest! {
    #[test]
    fn distinctness_equivalence(t in topic_set()) {
        let (tu, tr, td) = (metrics::tu(&t).unwrap(), metrics::tr(&t).unwrap(), metrics::td(&t).unwrap());
        prop_assert_eq!(tu == 1.0, tr == 0.0);
        prop_assert_eq!(tr == 0.0, td == 1.0);
        prop_assert!(tu >= 1.0 / t.k() as f64 - 1e-15);
        prop_assert!((0.0..=1.0).contains(&tr) && (0.0..=1.0).contains(&td));
    }

    #[test]
    fn diversity_permutation_invariant(t in topic_set(), seed in any::<u64>()) {
        let p = permuted(&t, seed);
        for (a, b) in [
            (metrics::tu(&t).unwrap(), metrics::tu(&p).unwrap()),
            (metrics::tr(&t).unwrap(), metrics::tr(&p).unwrap()),
            (metrics::td(&t).unwrap(), metrics::td(&p).unwrap()),
        ] {
            prop_assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn metrics_pure(t in topic_set()) {
        prop_assert_eq!(metrics::tu(&t).unwrap().to_bits(), metrics::tu(&t.clone()).unwrap().to_bits());
        prop_assert_eq!(metrics::tr(&t).unwrap().to_bits(), metrics::tr(&t.clone()).unwrap().to_bits());
        prop_assert_eq!(metrics::td(&t).unwrap().to_bits(), metrics::td(&t.clone()).unwrap().to_bits());
    }

    #[test]
    fn tr_matches_excess_count(t in topic_set()) {
        let k = t.k();
        let mut counts: HashMap<String, usize> = HashMap::new();
        for l in t.word_lists() {
            for w in l {
                *counts.entry(w).or_default() += 1;
            }
        }
        let total: usize = counts.values().sum();
        prop_assert_eq!(total, k * t.n());
        let excess: usize = t.word_lists().iter().flatten().map(|w| counts[w] - 1).sum();
        let want = if k == 1 { 0.0 } else { excess as f64 / ((k - 1) * k * t.n()) as f64 };
        prop_assert_eq!(metrics::tr(&t).unwrap().to_bits(), want.to_bits());
    }

    #[test]
    fn cv_word_order_invariant(docs in token_docs(), seed in any::<u64>()) {
        prop_assume!(docs.iter().any(|d| !d.is_empty()));
        let idx = build_index(&docs, 4, None).unwrap();
        let t = TopicSet::from_words(&[vec!["a", "b", "c"], vec!["d", "e", "a"]]);
        let p = permuted(&t, seed);
        let a = metrics::cv(&t, &idx).unwrap();
        let b = metrics::cv(&p, &idx).unwrap();
        prop_assert!((a - b).abs() < 1e-12);
        prop_assert_eq!(a.to_bits(), metrics::cv(&t, &idx).unwrap().to_bits());
        let single = topic_cv(&["a", "b"], &idx);
        prop_assert!((single - topic_cv(&["b", "a"], &idx)).abs() < 1e-12);
    }
}

// ---- lda ----

fn lda_corpus() -> impl Strategy<Value = Vec<ProcessedDocument>> {
    let word = prop::sample::select(vec!["a", "b", "c", "d", "e", "f", "g"]).prop_map(String::from);
    prop::collection::vec(prop::collection::vec(word, 0..10), 3..12).prop_map(|docs| {
        docs.into_iter()
            .enumerate()
            .map(|(i, t)| ProcessedDocument::new(format!("doc{i:02}"), t))
            .collect()
    })
}

fn small_config(seed: u64, iterations: usize) -> LdaConfig {
    LdaConfig {
        k: 2,
        alpha: Some(0.5),
        beta: 0.1,
        iterations,
        seed,
        min_doc_freq: 1,
        partitions: 1,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn lda_conserves_counts(corpus in lda_corpus(), seed in any::<u64>(), iters in 1usize..6) {
        prop_assume!(corpus.iter().filter(|d| !d.tokens.is_empty()).count() >= 2);
        let model = lda::fit(&corpus, &small_config(seed, iters)).unwrap();
        model.check_counts(&corpus).unwrap();
        let tokens: usize = corpus.iter().map(|d| d.tokens.len()).sum();
        prop_assert_eq!(model.topic_totals.iter().sum::<u64>() as usize, tokens);
        prop_assert_eq!(model.log_likelihood.len(), iters);
    }

    #[test]
    fn lda_exchangeable(corpus in lda_corpus(), seed in any::<u64>()) {
        prop_assume!(corpus.iter().filter(|d| !d.tokens.is_empty()).count() >= 2);
        let config = small_config(seed, 5);
        let a = lda::fit(&corpus, &config).unwrap();
        let mut reversed = corpus.clone();
        reversed.reverse();
        let b = lda::fit(&reversed, &config).unwrap();
        prop_assert_eq!(&a.topic_word_counts, &b.topic_word_counts);
        let by_id: BTreeMap<&str, &Vec<u32>> =
            b.doc_ids.iter().map(String::as_str).zip(&b.doc_topic_counts).collect();
        for (id, row) in a.doc_ids.iter().zip(&a.doc_topic_counts) {
            prop_assert_eq!(row, by_id[id.as_str()]);
        }
        prop_assert_eq!(
            a.log_likelihood.iter().map(|x| x.to_bits()).collect::<Vec<_>>(),
            b.log_likelihood.iter().map(|x| x.to_bits()).collect::<Vec<_>>()
        );
    }

    #[test]
    fn top_keyword_weights_recomputed(corpus in lda_corpus(), seed in any::<u64>()) {
        prop_assume!(corpus.iter().filter(|d| !d.tokens.is_empty()).count() >= 2);
        let model = lda::fit(&corpus, &small_config(seed, 3)).unwrap();
        let v = model.vocabulary.len();
        let topics = lda::top_keywords(&model, v.min(4)).unwrap();
        for (t, list) in topics.topics.iter().enumerate() {
            for tw in list {
                let id = model.vocabulary.id(&tw.word).unwrap() as usize;
                let want = (model.topic_word_counts[t][id] as f64 + model.beta)
                    / (model.topic_totals[t] as f64 + v as f64 * model.beta);
                prop_assert_eq!(tw.weight.to_bits(), want.to_bits());
            }
            for pair in list.windows(2) {
                prop_assert!(pair[0].weight >= pair[1].weight);
            }
        }
    }
}
