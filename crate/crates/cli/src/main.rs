//! `tmr`: run the rephrase-then-model experiment or any single stage of it.
//!
//! Exit codes: 0 on success, 1 on usage errors, 2 when a stage fails.
//! Errors are written to stderr as one JSON object `{"error", "kind"}`.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use tmr_core::cooccur::{self, CooccurrenceIndex};
use tmr_core::corpus::{self, InputFormat, RawDocument};
use tmr_core::lda::{self, LdaConfig};
use tmr_core::metrics::{self, MetricReport};
use tmr_core::pipeline::{self, ProviderKind, RunConfig};
use tmr_core::preprocess::{self, PreprocessConfig};
use tmr_core::rephrase::{ApiStyle, ProviderConfig, RephraseCache, RephraseScheme, Rephraser};
use tmr_core::{ComparisonReport, Error, TopicSet};

#[derive(Parser)]
#[command(name = "tmr", version, about = "Topic modeling on LLM-rephrased short texts")]
struct Cli {
    /// Log verbosity (error, warn, info, debug, trace); overrides RUST_LOG.
    #[arg(long, global = true)]
    log_level: Option<String>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Word-count statistics of a raw corpus (JSON on stdout).
    Stats {
        #[command(flatten)]
        input: InputArgs,
    },
    /// Clean and tokenize a raw corpus into processed JSONL.
    Preprocess {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        pre: PreArgs,
        /// Destination JSONL file.
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Rewrite every document of a raw corpus with one scheme.
    Rephrase {
        #[command(flatten)]
        input: InputArgs,
        /// Rewriting scheme: general or colloquial_to_formal (c2f).
        #[arg(long)]
        scheme: RephraseScheme,
        #[command(flatten)]
        provider: ProviderArgs,
        /// Response cache (JSONL, appended to).
        #[arg(long)]
        cache: PathBuf,
        /// Destination JSONL with one outcome per input document.
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Count sliding-window co-occurrences over a reference corpus.
    BuildIndex {
        /// Text file or directory with one document per line.
        #[arg(long)]
        reference: PathBuf,
        /// Window length in tokens.
        #[arg(long, default_value_t = cooccur::DEFAULT_WINDOW_SIZE)]
        window_size: usize,
        /// Restrict counts to the words of these topic files.
        #[arg(long = "topics")]
        topics: Vec<PathBuf>,
        /// Split reference lines on whitespace only, skipping cleaning.
        #[arg(long)]
        raw: bool,
        #[command(flatten)]
        pre: PreArgs,
        /// Destination index file.
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Fit LDA on processed JSONL and extract top keywords.
    Fit {
        /// Processed JSONL from `preprocess`.
        #[arg(short, long)]
        input: PathBuf,
        #[command(flatten)]
        lda: LdaArgs,
        /// Keywords per topic.
        #[arg(short = 'n', long, default_value_t = 15)]
        n: usize,
        /// Where to write the model JSON.
        #[arg(long)]
        model_out: Option<PathBuf>,
        /// Where to write the topic set; stdout when omitted.
        #[arg(long)]
        topics_out: Option<PathBuf>,
    },
    /// Score a topic set (MetricReport JSON on stdout).
    Evaluate {
        /// Topic set JSON.
        #[arg(long)]
        topics: PathBuf,
        /// Co-occurrence index from `build-index`.
        #[arg(long)]
        index: PathBuf,
        /// Variant label recorded in the report.
        #[arg(long, default_value = "")]
        variant: String,
        /// Model label recorded in the report.
        #[arg(long, default_value = "")]
        model_id: String,
    },
    /// Row-by-row metric differences (b - a) between two reports.
    Compare {
        /// MetricReport or comparison report JSON.
        a: PathBuf,
        /// MetricReport or comparison report JSON.
        b: PathBuf,
    },
    /// Run the whole experiment described by a config file.
    Run {
        /// `key = value` run configuration.
        #[arg(long)]
        config: PathBuf,
        /// Override `output`.
        #[arg(long)]
        output: Option<PathBuf>,
        /// Override `seed`.
        #[arg(long)]
        seed: Option<u64>,
        /// Override `k`.
        #[arg(short = 'k', long)]
        k: Option<usize>,
        /// Override `n`.
        #[arg(short = 'n', long)]
        n: Option<usize>,
        /// Override `iterations`.
        #[arg(long)]
        iterations: Option<usize>,
        /// Override `provider` (identity, cache_only, http).
        #[arg(long)]
        provider: Option<ProviderKind>,
        /// Give each variant its own sampler seed.
        #[arg(long)]
        reseed_per_variant: bool,
    },
}

#[derive(Args)]
struct InputArgs {
    /// Raw corpus (JSONL or CSV with `id` and `text`).
    #[arg(short, long)]
    input: PathBuf,
    /// Input format; inferred from the extension when omitted.
    #[arg(long)]
    format: Option<InputFormat>,
}

impl InputArgs {
    fn load(&self) -> tmr_core::Result<Vec<RawDocument>> {
        let format = self.format.unwrap_or_else(|| InputFormat::from_path(&self.input));
        let report = corpus::ingest(&self.input, format)?;
        for r in &report.rejections {
            log::warn!("line {}: skipped: {}", r.line, r.reason);
        }
        Ok(report.documents)
    }
}

#[derive(Args)]
struct PreArgs {
    /// Stopword list, one word per line (default: bundled English list).
    #[arg(long)]
    stopwords: Option<PathBuf>,
    /// Tab-separated `surface<TAB>lemma` table (default: bundled table).
    #[arg(long)]
    lemmas: Option<PathBuf>,
    /// Drop the '#' from hashtags instead of keeping it.
    #[arg(long)]
    strip_hashtags: bool,
    /// Drop the '@' from mentions instead of keeping it.
    #[arg(long)]
    strip_mentions: bool,
}

impl PreArgs {
    fn config(&self) -> tmr_core::Result<PreprocessConfig> {
        let mut c = PreprocessConfig::default();
        if let Some(p) = &self.stopwords {
            c = c.with_stopwords_file(p)?;
        }
        if let Some(p) = &self.lemmas {
            c = c.with_lemma_file(p)?;
        }
        c.keep_hashtags = !self.strip_hashtags;
        c.keep_mentions = !self.strip_mentions;
        Ok(c)
    }
}

#[derive(Args)]
struct ProviderArgs {
    /// identity, cache_only or http.
    #[arg(long, default_value = "cache_only")]
    provider: ProviderKind,
    /// HTTP API style: gemini or openai_chat.
    #[arg(long, default_value = "gemini")]
    api_style: ApiStyle,
    /// Base URL (gemini) or full chat completions URL (openai_chat).
    #[arg(long)]
    endpoint: Option<String>,
    /// Model name; also the provider id in cache keys.
    #[arg(long)]
    model: Option<String>,
    /// Environment variable holding the API key.
    #[arg(long)]
    api_key_env: Option<String>,
    #[arg(long, default_value_t = 0.0)]
    temperature: f64,
    #[arg(long, default_value_t = 3)]
    max_retries: u32,
    /// Request cap per minute; 0 disables it.
    #[arg(long, default_value_t = 60)]
    requests_per_minute: u32,
    #[arg(long, default_value_t = 4)]
    max_in_flight: usize,
}

impl ProviderArgs {
    fn run_config(&self) -> RunConfig {
        let defaults = ProviderConfig::default();
        let mut c = RunConfig::new("", "");
        c.provider = self.provider;
        c.provider_config = ProviderConfig {
            style: self.api_style,
            endpoint: self.endpoint.clone().unwrap_or(defaults.endpoint),
            model: self.model.clone().unwrap_or(defaults.model),
            api_key_env: self.api_key_env.clone().unwrap_or(defaults.api_key_env),
            temperature: self.temperature,
            max_retries: self.max_retries,
            requests_per_minute: self.requests_per_minute,
            max_in_flight: self.max_in_flight,
            ..defaults
        };
        c
    }
}

#[derive(Args)]
struct LdaArgs {
    /// Number of topics.
    #[arg(short = 'k', long, default_value_t = 8)]
    k: usize,
    /// Document-topic prior; 50/K when omitted.
    #[arg(long)]
    alpha: Option<f64>,
    /// Topic-word prior.
    #[arg(long, default_value_t = 0.01)]
    beta: f64,
    /// Gibbs sweeps.
    #[arg(long, default_value_t = 1000)]
    iterations: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Minimum number of documents a word must appear in.
    #[arg(long, default_value_t = 2)]
    min_doc_freq: usize,
    /// Parallel document partitions per sweep; 1 is the exact serial sampler.
    #[arg(long, default_value_t = 1)]
    partitions: usize,
}

impl From<&LdaArgs> for LdaConfig {
    fn from(a: &LdaArgs) -> Self {
        LdaConfig {
            k: a.k,
            alpha: a.alpha,
            beta: a.beta,
            iterations: a.iterations,
            seed: a.seed,
            min_doc_freq: a.min_doc_freq,
            partitions: a.partitions,
        }
    }
}

enum Failure {
    Usage(String),
    Stage(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Stage(e)
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Stage(Error::Io {
            path: PathBuf::from("<stdout>"),
            source: e,
        })
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help / --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.kind().to_string();
            let detail = e.render().to_string();
            eprintln!("{}", json!({"error": detail.trim(), "kind": "usage", "reason": msg}));
            return ExitCode::from(1);
        }
    };
    let mut logger = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"));
    if let Some(level) = &cli.log_level {
        logger.parse_filters(level);
    }
    logger.init();

    match execute(cli.command) {
        Ok(code) => code,
        Err(Failure::Usage(msg)) => {
            eprintln!("{}", json!({"error": msg, "kind": "usage"}));
            ExitCode::from(1)
        }
        Err(Failure::Stage(e)) => {
            eprintln!("{}", json!({"error": e.to_string(), "kind": e.kind()}));
            ExitCode::from(2)
        }
    }
}

fn execute(command: Command) -> Result<ExitCode, Failure> {
    let stdout = io::stdout();
    match command {
        Command::Stats { input } => {
            let stats = corpus::stats(&input.load()?)?;
            print_json(&stats)?;
        }
        Command::Preprocess { input, pre, output } => {
            let docs = input.load()?;
            let processed = preprocess::preprocess_corpus(&docs, &pre.config()?);
            let file = create(&output)?;
            preprocess::write_processed(BufWriter::new(file), &processed)?;
            let empty = processed.iter().filter(|d| d.empty).count();
            eprintln!("{} documents ({} empty) -> {}", processed.len(), empty, output.display());
        }
        Command::Rephrase {
            input,
            scheme,
            provider,
            cache,
            output,
        } => {
            let docs = input.load()?;
            let rc = provider.run_config();
            rc.provider_config.validate()?;
            let (provider, limits) = pipeline::build_provider(&rc)?;
            let cache = RephraseCache::open(&cache)?;
            let outcome = Rephraser::new(provider.as_ref(), &cache, limits).rephrase_corpus(&docs, scheme);
            let mut w = BufWriter::new(create(&output)?);
            for entry in &outcome.entries {
                serde_json::to_writer(&mut w, entry).map_err(Error::from)?;
                w.write_all(b"\n")?;
            }
            w.flush()?;
            eprintln!(
                "{} rephrased ({} from cache), {} failed -> {}",
                docs.len() - outcome.failed_ids.len(),
                outcome.cache_hits(),
                outcome.failed_ids.len(),
                output.display()
            );
            if !outcome.failed_ids.is_empty() {
                return Ok(ExitCode::from(2));
            }
        }
        Command::BuildIndex {
            reference,
            window_size,
            topics,
            raw,
            pre,
            output,
        } => {
            let lines = cooccur::read_reference_corpus(&reference)?;
            let tokens: Vec<Vec<String>> = if raw {
                lines
                    .iter()
                    .map(|l| l.split_whitespace().map(str::to_owned).collect())
                    .collect()
            } else {
                let config = pre.config()?;
                lines.iter().map(|l| preprocess::preprocess(l, &config)).collect()
            };
            let filter = if topics.is_empty() {
                None
            } else {
                let mut words = std::collections::BTreeSet::new();
                for path in &topics {
                    words.extend(TopicSet::load(path)?.word_lists().into_iter().flatten());
                }
                Some(words)
            };
            let index = cooccur::build_index(&tokens, window_size, filter)?;
            index.save(&output)?;
            eprintln!(
                "{} windows, {} words -> {}",
                index.total_windows(),
                index.vocabulary_len(),
                output.display()
            );
        }
        Command::Fit {
            input,
            lda: lda_args,
            n,
            model_out,
            topics_out,
        } => {
            if n == 0 {
                return Err(Failure::Usage("-n must be at least 1".into()));
            }
            let processed = preprocess::read_processed(&input)?;
            let model = lda::fit(&processed, &LdaConfig::from(&lda_args))?;
            if let Some(p) = &model_out {
                model.save(p)?;
            }
            let topics = lda::top_keywords(&model, n)?;
            match &topics_out {
                Some(p) => topics.save(p)?,
                None => print_json(&topics)?,
            }
        }
        Command::Evaluate {
            topics,
            index,
            variant,
            model_id,
        } => {
            let topics = TopicSet::load(&topics)?;
            let index = CooccurrenceIndex::load(&index)?;
            let report = metrics::evaluate(&topics, &index)?.with_labels(variant, model_id);
            print_json(&report)?;
        }
        Command::Compare { a, b } => {
            let (ra, rb) = (load_rows(&a)?, load_rows(&b)?);
            if ra.len() != rb.len() {
                return Err(Failure::Usage(format!(
                    "reports have {} and {} rows",
                    ra.len(),
                    rb.len()
                )));
            }
            let mut out = stdout.lock();
            out.write_all(metrics::render_delta_table(&ra, &rb).as_bytes())?;
        }
        Command::Run {
            config,
            output,
            seed,
            k,
            n,
            iterations,
            provider,
            reseed_per_variant,
        } => {
            let mut rc = RunConfig::from_file(&config)?;
            if let Some(o) = output {
                rc.output = o;
            }
            if let Some(s) = seed {
                rc.seed = s;
            }
            if let Some(k) = k {
                rc.k = k;
            }
            if let Some(n) = n {
                rc.n = n;
            }
            if let Some(i) = iterations {
                rc.iterations = i;
            }
            if let Some(p) = provider {
                rc.provider = p;
            }
            rc.reseed_per_variant |= reseed_per_variant;
            let report = pipeline::run_pipeline(&rc)?;
            let mut out = stdout.lock();
            out.write_all(report.render_text().as_bytes())?;
            for path in pipeline::report_paths(&rc.output) {
                writeln!(out, "wrote {}", path.display())?;
            }
            if !report.missing.is_empty() {
                return Ok(ExitCode::from(2));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn create(path: &Path) -> Result<File, Failure> {
    File::create(path).map_err(|e| {
        Failure::Stage(Error::Io {
            path: path.to_path_buf(),
            source: e,
        })
    })
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<(), Failure> {
    let mut out = io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value).map_err(Error::from)?;
    out.write_all(b"\n")?;
    Ok(())
}

/// Metric rows from either a single MetricReport or a comparison report.
fn load_rows(path: &Path) -> Result<Vec<MetricReport>, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        Failure::Stage(Error::Io {
            path: path.to_path_buf(),
            source: e,
        })
    })?;
    let value: serde_json::Value = serde_json::from_str(&text).map_err(Error::from)?;
    if value.get("rows").is_some() {
        let report: ComparisonReport = serde_json::from_value(value).map_err(Error::from)?;
        Ok(report.rows)
    } else {
        Ok(vec![serde_json::from_value(value).map_err(Error::from)?])
    }
}
