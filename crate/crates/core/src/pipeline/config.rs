//! Run configuration and its `key = value` file format.
//!
//! ```text
//! # comments start with '#'
//! include = common.cfg        # relative to this file
//! input = data/tweets.jsonl
//! schemes = none, colloquial_to_formal
//! k = 8
//! ```
//!
//! Includes are read where they appear, so later lines override values
//! from an included file. Relative paths resolve against the directory of
//! the file that names them.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::InputFormat;
use crate::error::{Error, Result};
use crate::lda::LdaConfig;
use crate::rephrase::{ApiStyle, ProviderConfig, RephraseScheme};

/// One arm of the comparison: the untouched corpus or one rewriting scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Variant {
    Original,
    Rephrased(RephraseScheme),
}

impl Variant {
    pub fn id(self) -> &'static str {
        match self {
            Variant::Original => "none",
            Variant::Rephrased(s) => s.id(),
        }
    }

    /// Fixed position used to derive per-variant seeds, independent of
    /// which variants a run requests.
    pub fn ordinal(self) -> u64 {
        match self {
            Variant::Original => 0,
            Variant::Rephrased(RephraseScheme::General) => 1,
            Variant::Rephrased(RephraseScheme::ColloquialToFormal) => 2,
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "none" | "original" => Ok(Variant::Original),
            other => other.parse().map(Variant::Rephrased),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProviderKind {
    /// Echoes the input text.
    Identity,
    /// Serves cached responses only; misses fail.
    CacheOnly,
    /// Calls the configured HTTP endpoint.
    Http,
}

impl FromStr for ProviderKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "identity" => Ok(ProviderKind::Identity),
            "cache_only" | "offline" => Ok(ProviderKind::CacheOnly),
            "http" => Ok(ProviderKind::Http),
            other => Err(Error::Config(format!("unknown provider {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub input: PathBuf,
    /// Inferred from the input extension when unset.
    pub input_format: Option<InputFormat>,
    pub variants: Vec<Variant>,
    pub provider: ProviderKind,
    pub provider_config: ProviderConfig,
    /// Cache file; defaults to `<output>/cache/rephrase.jsonl`.
    pub cache: Option<PathBuf>,
    pub stopwords: Option<PathBuf>,
    pub lemmas: Option<PathBuf>,
    pub keep_hashtags: bool,
    pub keep_mentions: bool,
    pub k: usize,
    pub n: usize,
    pub alpha: Option<f64>,
    pub beta: f64,
    pub iterations: usize,
    pub seed: u64,
    pub min_doc_freq: usize,
    pub partitions: usize,
    /// Prebuilt co-occurrence index.
    pub index: Option<PathBuf>,
    /// Raw reference corpus to build an index from when `index` is unset.
    pub reference_corpus: Option<PathBuf>,
    pub window_size: usize,
    pub output: PathBuf,
    pub reseed_per_variant: bool,
    pub fallback_to_original: bool,
    /// Number of documents shown in the assignment sample table.
    pub sample_docs: usize,
}

impl RunConfig {
    pub fn new(input: impl Into<PathBuf>, output: impl Into<PathBuf>) -> Self {
        let lda = LdaConfig::default();
        RunConfig {
            input: input.into(),
            input_format: None,
            variants: vec![Variant::Original],
            provider: ProviderKind::CacheOnly,
            provider_config: ProviderConfig::default(),
            cache: None,
            stopwords: None,
            lemmas: None,
            keep_hashtags: true,
            keep_mentions: true,
            k: 8,
            n: 15,
            alpha: None,
            beta: lda.beta,
            iterations: lda.iterations,
            seed: lda.seed,
            min_doc_freq: lda.min_doc_freq,
            partitions: 1,
            index: None,
            reference_corpus: None,
            window_size: crate::cooccur::DEFAULT_WINDOW_SIZE,
            output: output.into(),
            reseed_per_variant: false,
            fallback_to_original: false,
            sample_docs: 5,
        }
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let mut entries = BTreeMap::new();
        let mut seen = HashSet::new();
        read_entries(path, &mut entries, &mut seen)?;
        Self::from_entries(entries)
    }

    /// Parses config text; relative paths resolve against `base_dir`.
    pub fn parse_str(text: &str, base_dir: &Path) -> Result<Self> {
        let mut entries = BTreeMap::new();
        let mut seen = HashSet::new();
        parse_into(text, base_dir, Path::new("<string>"), &mut entries, &mut seen)?;
        Self::from_entries(entries)
    }

    fn from_entries(entries: BTreeMap<String, Entry>) -> Result<Self> {
        let get = |key: &str| entries.get(key);
        let input = get("input")
            .map(Entry::path)
            .ok_or_else(|| Error::Config("`input` is required".into()))?;
        let output = get("output")
            .map(Entry::path)
            .ok_or_else(|| Error::Config("`output` is required".into()))?;
        let mut c = RunConfig::new(input, output);
        for (key, entry) in &entries {
            let v = entry.value.as_str();
            match key.as_str() {
                "input" | "output" => {}
                "input_format" => c.input_format = Some(v.parse()?),
                "schemes" | "variants" => {
                    let mut list = Vec::new();
                    for part in v.split(',').map(str::trim).filter(|p| !p.is_empty()) {
                        let variant: Variant = part.parse()?;
                        if !list.contains(&variant) {
                            list.push(variant);
                        }
                    }
                    if list.is_empty() {
                        return Err(Error::Config("`schemes` lists no variants".into()));
                    }
                    c.variants = list;
                }
                "provider" => c.provider = v.parse()?,
                "provider_style" => c.provider_config.style = v.parse::<ApiStyle>()?,
                "provider_endpoint" => c.provider_config.endpoint = v.to_owned(),
                "provider_model" => c.provider_config.model = v.to_owned(),
                "provider_api_key_env" => c.provider_config.api_key_env = v.to_owned(),
                "temperature" => c.provider_config.temperature = num(key, v)?,
                "max_retries" => c.provider_config.max_retries = num(key, v)?,
                "retry_backoff_ms" => c.provider_config.retry_backoff_ms = num(key, v)?,
                "requests_per_minute" => c.provider_config.requests_per_minute = num(key, v)?,
                "max_in_flight" => c.provider_config.max_in_flight = num(key, v)?,
                "timeout_secs" => c.provider_config.timeout_secs = num(key, v)?,
                "cache" => c.cache = Some(entry.path()),
                "stopwords" => c.stopwords = Some(entry.path()),
                "lemmas" => c.lemmas = Some(entry.path()),
                "keep_hashtags" => c.keep_hashtags = flag(key, v)?,
                "keep_mentions" => c.keep_mentions = flag(key, v)?,
                "k" => c.k = num(key, v)?,
                "n" => c.n = num(key, v)?,
                "alpha" => c.alpha = Some(num(key, v)?),
                "beta" => c.beta = num(key, v)?,
                "iterations" => c.iterations = num(key, v)?,
                "seed" => c.seed = num(key, v)?,
                "min_doc_freq" => c.min_doc_freq = num(key, v)?,
                "partitions" => c.partitions = num(key, v)?,
                "index" => c.index = Some(entry.path()),
                "reference_corpus" => c.reference_corpus = Some(entry.path()),
                "window_size" => c.window_size = num(key, v)?,
                "reseed_per_variant" => c.reseed_per_variant = flag(key, v)?,
                "fallback_to_original" => c.fallback_to_original = flag(key, v)?,
                "sample_docs" => c.sample_docs = num(key, v)?,
                _ => {
                    return Err(Error::Config(format!(
                        "{}:{}: unknown key `{key}`",
                        entry.file.display(),
                        entry.line
                    )))
                }
            }
        }
        Ok(c)
    }

    pub fn lda_config(&self, variant: Variant) -> LdaConfig {
        let seed = if self.reseed_per_variant {
            self.seed.wrapping_add(variant.ordinal())
        } else {
            self.seed
        };
        LdaConfig {
            k: self.k,
            alpha: self.alpha,
            beta: self.beta,
            iterations: self.iterations,
            seed,
            min_doc_freq: self.min_doc_freq,
            partitions: self.partitions,
        }
    }

    pub fn cache_path(&self) -> PathBuf {
        self.cache
            .clone()
            .unwrap_or_else(|| self.output.join("cache").join("rephrase.jsonl"))
    }

    pub fn input_format(&self) -> InputFormat {
        self.input_format
            .unwrap_or_else(|| InputFormat::from_path(&self.input))
    }

    /// Checks value ranges and that every referenced input exists.
    pub fn validate(&self) -> Result<()> {
        if self.k < 2 {
            return Err(Error::Config(format!("k must be at least 2, got {}", self.k)));
        }
        if self.n < 1 {
            return Err(Error::Config("n must be at least 1".into()));
        }
        if self.iterations == 0 {
            return Err(Error::Config("iterations must be at least 1".into()));
        }
        if self.partitions == 0 {
            return Err(Error::Config("partitions must be at least 1".into()));
        }
        if self.window_size == 0 {
            return Err(Error::Config("window_size must be at least 1".into()));
        }
        let positive = |x: f64| x > 0.0 && x.is_finite();
        if !positive(self.beta) || self.alpha.is_some_and(|a| !positive(a)) {
            return Err(Error::Config("alpha and beta must be positive".into()));
        }
        if self.variants.is_empty() {
            return Err(Error::Config("no variants requested".into()));
        }
        if self.variants.iter().any(|v| *v != Variant::Original) {
            self.provider_config.validate()?;
        }
        match (&self.index, &self.reference_corpus) {
            (None, None) => {
                return Err(Error::Config(
                    "one of `index` or `reference_corpus` is required".into(),
                ))
            }
            (Some(_), Some(_)) => {
                return Err(Error::Config(
                    "`index` and `reference_corpus` are mutually exclusive".into(),
                ))
            }
            _ => {}
        }
        let files = [
            ("input", Some(&self.input)),
            ("stopwords", self.stopwords.as_ref()),
            ("lemmas", self.lemmas.as_ref()),
            ("index", self.index.as_ref()),
            ("reference_corpus", self.reference_corpus.as_ref()),
        ];
        for (key, path) in files {
            if let Some(p) = path {
                if !p.exists() {
                    return Err(Error::Config(format!("{key}: {} does not exist", p.display())));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
struct Entry {
    value: String,
    base: PathBuf,
    file: PathBuf,
    line: usize,
}

impl Entry {
    fn path(&self) -> PathBuf {
        let p = Path::new(&self.value);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base.join(p)
        }
    }
}

fn read_entries(
    path: &Path,
    entries: &mut BTreeMap<String, Entry>,
    seen: &mut HashSet<PathBuf>,
) -> Result<()> {
    let canonical = fs::canonicalize(path).map_err(|e| Error::io(path, e))?;
    if !seen.insert(canonical.clone()) {
        return Err(Error::Config(format!("include cycle at {}", path.display())));
    }
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = canonical.parent().unwrap_or(Path::new(".")).to_path_buf();
    parse_into(&text, &base, path, entries, seen)?;
    seen.remove(&canonical);
    Ok(())
}

fn parse_into(
    text: &str,
    base: &Path,
    file: &Path,
    entries: &mut BTreeMap<String, Entry>,
    seen: &mut HashSet<PathBuf>,
) -> Result<()> {
    for (i, raw) in text.lines().enumerate() {
        let line = strip_comment(raw).trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::Config(format!("{}:{}: expected `key = value`", file.display(), i + 1))
        })?;
        let (key, value) = (key.trim().to_ascii_lowercase(), value.trim());
        if key.is_empty() {
            return Err(Error::Config(format!("{}:{}: empty key", file.display(), i + 1)));
        }
        if key == "include" {
            let p = Path::new(value);
            let target = if p.is_absolute() { p.to_path_buf() } else { base.join(p) };
            read_entries(&target, entries, seen)?;
            continue;
        }
        entries.insert(
            key,
            Entry {
                value: value.to_owned(),
                base: base.to_path_buf(),
                file: file.to_path_buf(),
                line: i + 1,
            },
        );
    }
    Ok(())
}

/// A '#' starts a comment at line start or after whitespace, so values
/// such as `#hashtag` survive when written without a leading space.
fn strip_comment(line: &str) -> &str {
    let bytes = line.as_bytes();
    for (i, &b) in bytes.iter().enumerate() {
        if b == b'#' && (i == 0 || bytes[i - 1].is_ascii_whitespace()) {
            return &line[..i];
        }
    }
    line
}

fn num<T: FromStr>(key: &str, v: &str) -> Result<T>
where
    T::Err: fmt::Display,
{
    v.parse()
        .map_err(|e| Error::Config(format!("`{key}`: cannot parse {v:?}: {e}")))
}

fn flag(key: &str, v: &str) -> Result<bool> {
    match v.to_ascii_lowercase().as_str() {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(Error::Config(format!("`{key}`: expected a boolean, got {v:?}"))),
    }
}
