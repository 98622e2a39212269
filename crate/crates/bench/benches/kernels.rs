use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use std::hint::black_box;

use tmr_bench::{random_topics, synthetic_corpus};
use tmr_core::cooccur::build_index;
use tmr_core::lda::{fit, LdaConfig};
use tmr_core::metrics;

fn gibbs(c: &mut Criterion) {
    let corpus = synthetic_corpus(500, 20, 4, 50, 1);
    let mut group = c.benchmark_group("lda");
    group.sample_size(10);
    for partitions in [1, 4] {
        let config = LdaConfig {
            k: 8,
            iterations: 20,
            min_doc_freq: 1,
            partitions,
            ..LdaConfig::default()
        };
        group.bench_function(format!("fit_500x20_20sweeps_p{partitions}"), |b| {
            b.iter(|| fit(black_box(&corpus), &config).unwrap())
        });
    }
    group.finish();
}

fn index(c: &mut Criterion) {
    let corpus = synthetic_corpus(1000, 40, 4, 100, 2);
    let tokens: Vec<Vec<String>> = corpus.into_iter().map(|d| d.tokens).collect();
    let mut group = c.benchmark_group("cooccur");
    group.sample_size(10);
    group.bench_function("build_1000x40_w10", |b| {
        b.iter(|| build_index(black_box(&tokens), 10, None).unwrap())
    });
    group.finish();
}

fn metric_kernels(c: &mut Criterion) {
    let corpus = synthetic_corpus(300, 30, 4, 40, 3);
    let tokens: Vec<Vec<String>> = corpus.into_iter().map(|d| d.tokens).collect();
    let idx = build_index(&tokens, 10, None).unwrap();
    let topics = {
        let lists: Vec<Vec<String>> = (0..8)
            .map(|t| (0..15).map(|w| format!("t{}w{}", t % 4, w + 15 * (t / 4))).collect())
            .collect();
        tmr_core::TopicSet::from_words(&lists)
    };
    c.bench_function("cv_8x15", |b| b.iter(|| metrics::cv(black_box(&topics), &idx).unwrap()));
    c.bench_function("diversity_8x15", |b| {
        b.iter_batched(
            || random_topics(8, 15, 60, 4),
            |t| {
                (
                    metrics::tu(&t).unwrap(),
                    metrics::tr(&t).unwrap(),
                    metrics::td(&t).unwrap(),
                )
            },
            BatchSize::SmallInput,
        )
    });
}

criterion_group!(benches, gibbs, index, metric_kernels);
criterion_main!(benches);
