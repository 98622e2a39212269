//! Core library for rephrase-then-model experiments on short informal texts.
//!
//! The pipeline ingests a corpus of short documents, optionally rewrites every
//! document through an LLM prompt scheme, cleans and tokenizes the text, fits
//! an LDA topic model by collapsed Gibbs sampling and scores the resulting
//! topics with four quality metrics: NPMI-based C_v coherence, topic
//! uniqueness (TU), topic redundancy (TR) and topic diversity (TD).
//!
//! Each stage lives in its own module and can be driven on its own:
//!
//! - [`corpus`]: JSONL/CSV ingestion and descriptive statistics
//! - [`preprocess`]: URL/emoji/punctuation stripping, lemmatization, stopwords
//! - [`rephrase`]: prompt schemes, LLM providers, append-only response cache
//! - [`lda`]: vocabulary, Gibbs sampler, keyword extraction, fold-in inference
//! - [`cooccur`]: boolean sliding-window co-occurrence index
//! - [`metrics`]: NPMI, C_v, TU, TR, TD
//! - [`pipeline`]: run configuration, end-to-end runs, comparison reports

pub mod cooccur;
pub mod corpus;
mod error;
pub mod lda;
pub mod metrics;
pub mod pipeline;
pub mod preprocess;
pub mod rephrase;
pub mod topics;

pub use corpus::{CorpusStats, InputFormat, RawDocument};
pub use cooccur::CooccurrenceIndex;
pub use error::{Error, Result};
pub use lda::{LdaConfig, LdaModel, Vocabulary};
pub use metrics::MetricReport;
pub use pipeline::{ComparisonReport, RunConfig};
pub use preprocess::{PreprocessConfig, ProcessedDocument};
pub use rephrase::{RephraseRecord, RephraseScheme};
pub use topics::{TopicSet, TopicWord};
