//! End-to-end experiment: every requested variant goes through
//! (rephrase) → preprocess → fit → top keywords → evaluate with identical
//! settings, and the results land side by side in one report.
//!
//! Output layout (version [`LAYOUT_VERSION`]):
//!
//! ```text
//! <output>/layout_version
//! <output>/cache/rephrase.jsonl            shared response cache (default)
//! <output>/cache/<variant>.rephrase.jsonl  per-document rephrase outcomes
//! <output>/processed/<variant>.jsonl
//! <output>/models/<variant>.model.json
//! <output>/models/reference.cooc           when built from reference_corpus
//! <output>/topics/<variant>.topics.json
//! <output>/reports/<variant>.metrics.json
//! <output>/reports/ingest.json
//! <output>/reports/comparison.json
//! <output>/reports/comparison.txt
//! ```
//!
//! Reports carry no timestamps or absolute paths, so a run replayed from a
//! frozen cache reproduces them byte for byte.

mod config;
mod report;

use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use log::{info, warn};
use serde::Serialize;

pub use config::{ProviderKind, RunConfig, Variant};
pub use report::{AssignmentSample, ComparisonReport, MissingVariant, SampleCell, VariantTopics};

use crate::cooccur::{self, CooccurrenceIndex};
use crate::corpus::{self, RawDocument, Rejection};
use crate::error::{Error, Result};
use crate::lda::{self, LdaModel};
use crate::metrics;
use crate::preprocess::{self, PreprocessConfig, ProcessedDocument};
use crate::rephrase::{
    CacheOnlyProvider, HttpProvider, IdentityProvider, Limits, Provider, RephraseCache, Rephraser,
};
use crate::topics::TopicSet;

pub const LAYOUT_VERSION: u32 = 1;
/// Model label used in report rows.
pub const MODEL_ID: &str = "lda";

const SUBDIRS: [&str; 5] = ["cache", "processed", "models", "topics", "reports"];

/// Paths of the final report files under `output`.
pub fn report_paths(output: &Path) -> [PathBuf; 2] {
    let reports = output.join("reports");
    [reports.join("comparison.json"), reports.join("comparison.txt")]
}

/// Creates the output layout, refusing directories written by a different
/// layout version.
pub fn prepare_layout(output: &Path) -> Result<()> {
    let marker = output.join("layout_version");
    if marker.exists() {
        let found = fs::read_to_string(&marker).map_err(|e| Error::io(&marker, e))?;
        if found.trim() != LAYOUT_VERSION.to_string() {
            return Err(Error::Config(format!(
                "{} holds layout version {}, expected {LAYOUT_VERSION}",
                output.display(),
                found.trim()
            )));
        }
    }
    for sub in SUBDIRS {
        let dir = output.join(sub);
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    }
    fs::write(&marker, format!("{LAYOUT_VERSION}\n")).map_err(|e| Error::io(&marker, e))
}

pub fn preprocess_config(config: &RunConfig) -> Result<PreprocessConfig> {
    let mut pre = PreprocessConfig::default();
    if let Some(p) = &config.stopwords {
        pre = pre.with_stopwords_file(p)?;
    }
    if let Some(p) = &config.lemmas {
        pre = pre.with_lemma_file(p)?;
    }
    pre.keep_hashtags = config.keep_hashtags;
    pre.keep_mentions = config.keep_mentions;
    Ok(pre)
}

/// Provider named by the config together with the pacing it needs. Local
/// providers run unthrottled.
pub fn build_provider(config: &RunConfig) -> Result<(Box<dyn Provider>, Limits)> {
    let pc = &config.provider_config;
    let local = Limits {
        requests_per_minute: 0,
        ..Limits::from(pc)
    };
    Ok(match config.provider {
        ProviderKind::Identity => (Box::new(IdentityProvider), local),
        ProviderKind::CacheOnly => (Box::new(CacheOnlyProvider::new(pc.model.clone())), local),
        ProviderKind::Http => (Box::new(HttpProvider::from_env(pc.clone())?), Limits::from(pc)),
    })
}

struct VariantRun {
    variant: Variant,
    docs: Vec<RawDocument>,
    model: LdaModel,
    topics: TopicSet,
    failures: Vec<String>,
}

struct Failure {
    stage: &'static str,
    error: Error,
}

fn at(stage: &'static str) -> impl FnOnce(Error) -> Failure {
    move |error| Failure { stage, error }
}

#[derive(Serialize)]
struct IngestSummary<'a> {
    documents: usize,
    rejections: &'a [Rejection],
}

/// Runs the whole experiment and writes every artifact under
/// `config.output`. A failing variant is recorded in
/// [`ComparisonReport::missing`]; shared stages (ingest, index) abort.
pub fn run_pipeline(config: &RunConfig) -> Result<ComparisonReport> {
    config.validate()?;
    let out = config.output.as_path();
    prepare_layout(out)?;

    let ingest = corpus::ingest(&config.input, config.input_format())?;
    if ingest.documents.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    info!(
        "ingested {} documents ({} rejected)",
        ingest.documents.len(),
        ingest.rejections.len()
    );
    write_json(
        &out.join("reports/ingest.json"),
        &IngestSummary {
            documents: ingest.documents.len(),
            rejections: &ingest.rejections,
        },
    )?;
    let originals = ingest.documents;
    let pre = preprocess_config(config)?;

    let wants_rephrase = config.variants.iter().any(|v| *v != Variant::Original);
    let rephrase_setup = if wants_rephrase {
        Some(build_provider(config).and_then(|(p, limits)| {
            RephraseCache::open(&config.cache_path()).map(|cache| (p, limits, cache))
        }))
    } else {
        None
    };

    let mut runs = Vec::new();
    let mut missing = Vec::new();
    for &variant in &config.variants {
        info!("variant {variant}");
        let result = match (variant, &rephrase_setup) {
            (Variant::Original, _) => Ok((originals.clone(), Vec::new())),
            (Variant::Rephrased(scheme), Some(Ok((provider, limits, cache)))) => {
                let rephraser = Rephraser::new(provider.as_ref(), cache, *limits);
                let outcome = rephraser.rephrase_corpus(&originals, scheme);
                info!(
                    "{variant}: {} cached, {} failed",
                    outcome.cache_hits(),
                    outcome.failed_ids.len()
                );
                write_jsonl(
                    &out.join(format!("cache/{variant}.rephrase.jsonl")),
                    &outcome.entries,
                )
                .map(|_| {
                    (
                        outcome.documents(&originals, config.fallback_to_original),
                        outcome.failed_ids.clone(),
                    )
                })
            }
            (Variant::Rephrased(_), Some(Err(e))) => Err(Error::Config(e.to_string())),
            (Variant::Rephrased(_), None) => unreachable!("provider built for rephrased variants"),
        };
        let run = result
            .map_err(at("rephrase"))
            .and_then(|(docs, failures)| model_variant(config, variant, &pre, docs, failures));
        match run {
            Ok(run) => runs.push(run),
            Err(f) => {
                warn!("variant {variant} failed at {}: {}", f.stage, f.error);
                missing.push(MissingVariant {
                    variant: variant.id().to_owned(),
                    stage: f.stage.to_owned(),
                    error: f.error.to_string(),
                });
            }
        }
    }

    let mut rows = Vec::new();
    let mut index_config = String::new();
    if !runs.is_empty() {
        let index = load_or_build_index(config, &pre, &runs)?;
        index_config = index.config_id();
        let mut kept = Vec::new();
        for run in runs {
            match metrics::evaluate(&run.topics, &index) {
                Ok(report) => {
                    let report = report.with_labels(run.variant.id(), MODEL_ID);
                    write_json(
                        &out.join(format!("reports/{}.metrics.json", run.variant)),
                        &report,
                    )?;
                    rows.push(report);
                    kept.push(run);
                }
                Err(e) => missing.push(MissingVariant {
                    variant: run.variant.id().to_owned(),
                    stage: "evaluate".into(),
                    error: e.to_string(),
                }),
            }
        }
        runs = kept;
    }

    let samples = assignment_samples(&originals, &runs, config.sample_docs);
    let report = ComparisonReport {
        k: config.k,
        n: config.n,
        index_config,
        variants: config.variants.iter().map(|v| v.id().to_owned()).collect(),
        rows,
        missing,
        topics: runs
            .iter()
            .map(|r| VariantTopics {
                variant: r.variant.id().to_owned(),
                topics: r.topics.clone(),
                rephrase_failures: r.failures.clone(),
            })
            .collect(),
        samples,
    };
    let [json_path, text_path] = report_paths(out);
    fs::write(&json_path, report.to_json()?).map_err(|e| Error::io(&json_path, e))?;
    fs::write(&text_path, report.render_text()).map_err(|e| Error::io(&text_path, e))?;
    Ok(report)
}

fn model_variant(
    config: &RunConfig,
    variant: Variant,
    pre: &PreprocessConfig,
    docs: Vec<RawDocument>,
    failures: Vec<String>,
) -> std::result::Result<VariantRun, Failure> {
    let out = config.output.as_path();
    if docs.is_empty() {
        return Err(Failure {
            stage: "rephrase",
            error: Error::EmptyCorpus,
        });
    }
    let processed = preprocess::preprocess_corpus(&docs, pre);
    write_processed_file(&out.join(format!("processed/{variant}.jsonl")), &processed)
        .map_err(at("preprocess"))?;

    let model = lda::fit(&processed, &config.lda_config(variant)).map_err(at("fit"))?;
    model
        .save(&out.join(format!("models/{variant}.model.json")))
        .map_err(at("fit"))?;

    let topics = lda::top_keywords(&model, config.n).map_err(at("top_keywords"))?;
    topics
        .save(&out.join(format!("topics/{variant}.topics.json")))
        .map_err(at("top_keywords"))?;
    Ok(VariantRun {
        variant,
        docs,
        model,
        topics,
        failures,
    })
}

/// Loads the configured index, or builds one from the reference corpus
/// restricted to the keywords of all fitted variants.
fn load_or_build_index(
    config: &RunConfig,
    pre: &PreprocessConfig,
    runs: &[VariantRun],
) -> Result<CooccurrenceIndex> {
    if let Some(path) = &config.index {
        return CooccurrenceIndex::load(path);
    }
    let source = config
        .reference_corpus
        .as_ref()
        .ok_or_else(|| Error::Config("no index or reference corpus configured".into()))?;
    let lines = cooccur::read_reference_corpus(source)?;
    let tokenized: Vec<Vec<String>> = lines.iter().map(|l| preprocess::preprocess(l, pre)).collect();
    let filter: BTreeSet<String> = runs
        .iter()
        .flat_map(|r| r.topics.word_lists().into_iter().flatten())
        .collect();
    let index = cooccur::build_index(&tokenized, config.window_size, Some(filter))?;
    index.save(&config.output.join("models/reference.cooc"))?;
    Ok(index)
}

fn assignment_samples(
    originals: &[RawDocument],
    runs: &[VariantRun],
    count: usize,
) -> Vec<AssignmentSample> {
    let lookups: Vec<HashMap<&str, usize>> = runs
        .iter()
        .map(|r| {
            r.model
                .doc_ids
                .iter()
                .enumerate()
                .map(|(i, id)| (id.as_str(), i))
                .collect()
        })
        .collect();
    originals
        .iter()
        .take(count)
        .map(|doc| AssignmentSample {
            doc_id: doc.id.clone(),
            original: doc.text.clone(),
            cells: runs
                .iter()
                .zip(&lookups)
                .map(|(run, lookup)| {
                    let pos = lookup.get(doc.id.as_str()).copied();
                    let topic = pos.and_then(|i| dominant(&run.model.doc_topic_counts[i]));
                    SampleCell {
                        variant: run.variant.id().to_owned(),
                        text: pos.map(|i| run.docs[i].text.clone()),
                        topic,
                        keywords: topic
                            .map(|t| run.topics.words(t).map(str::to_owned).collect())
                            .unwrap_or_default(),
                    }
                })
                .collect(),
        })
        .collect()
}

/// Most frequent topic among a document's tokens; ties go to the lower id.
fn dominant(counts: &[u32]) -> Option<usize> {
    let (best, &max) = counts
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))?;
    (max > 0).then_some(best)
}

fn write_processed_file(path: &Path, docs: &[ProcessedDocument]) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    preprocess::write_processed(BufWriter::new(file), docs)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    fs::write(path, s).map_err(|e| Error::io(path, e))
}

fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for item in items {
        serde_json::to_writer(&mut w, item)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dominant_topic() {
        assert_eq!(dominant(&[1, 3, 3]), Some(1));
        assert_eq!(dominant(&[0, 0]), None);
        assert_eq!(dominant(&[]), None);
    }

    #[test]
    fn layout_version_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        prepare_layout(dir.path()).unwrap();
        for sub in SUBDIRS {
            assert!(dir.path().join(sub).is_dir());
        }
        fs::write(dir.path().join("layout_version"), "0\n").unwrap();
        assert!(prepare_layout(dir.path()).is_err());
    }
}
