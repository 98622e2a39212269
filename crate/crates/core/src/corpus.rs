//! Raw short-text ingestion and descriptive corpus statistics.

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One ingested short text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawDocument {
    pub id: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reply_to_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<String>,
}

impl RawDocument {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Self {
        RawDocument {
            id: id.into(),
            text: text.into(),
            reply_to_id: None,
            timestamp: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InputFormat {
    Jsonl,
    Csv,
}

impl InputFormat {
    /// Guesses the format from a file extension, defaulting to JSONL.
    pub fn from_path(path: &Path) -> InputFormat {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => InputFormat::Csv,
            _ => InputFormat::Jsonl,
        }
    }
}

impl FromStr for InputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "jsonl" | "json" => Ok(InputFormat::Jsonl),
            "csv" => Ok(InputFormat::Csv),
            other => Err(Error::InvalidArgument(format!(
                "unknown input format {other:?} (expected jsonl or csv)"
            ))),
        }
    }
}

impl fmt::Display for InputFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            InputFormat::Jsonl => "jsonl",
            InputFormat::Csv => "csv",
        })
    }
}

/// A record skipped during ingestion.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rejection {
    pub line: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    pub reason: String,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct IngestReport {
    pub documents: Vec<RawDocument>,
    pub rejections: Vec<Rejection>,
}

/// Reads a JSONL or CSV corpus from disk.
///
/// Records come back in file order. Records whose text is empty after
/// trimming (or whose id is empty) are skipped and listed in
/// [`IngestReport::rejections`]; a malformed record, a repeated id or a
/// non-UTF-8 file aborts ingestion.
pub fn ingest(path: &Path, format: InputFormat) -> Result<IngestReport> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let text = std::str::from_utf8(&bytes).map_err(|e| {
        let line = bytes[..e.valid_up_to()].iter().filter(|&&b| b == b'\n').count() + 1;
        Error::Encoding {
            path: path.to_path_buf(),
            line,
        }
    })?;
    let text = text.strip_prefix('\u{feff}').unwrap_or(text);
    match format {
        InputFormat::Jsonl => ingest_jsonl_str(text),
        InputFormat::Csv => ingest_csv_str(text),
    }
}

#[derive(Deserialize)]
struct WireRecord {
    id: Option<serde_json::Value>,
    text: Option<serde_json::Value>,
    #[serde(default)]
    reply_to_id: Option<serde_json::Value>,
    #[serde(default)]
    timestamp: Option<String>,
}

fn scalar_to_string(v: serde_json::Value, field: &str, line: usize) -> Result<String> {
    match v {
        serde_json::Value::String(s) => Ok(s),
        serde_json::Value::Number(n) => Ok(n.to_string()),
        other => Err(Error::MalformedRecord {
            line,
            reason: format!("field `{field}` must be a string, found {other}"),
        }),
    }
}

pub fn ingest_jsonl_str(input: &str) -> Result<IngestReport> {
    let mut acc = Accumulator::default();
    for (idx, raw) in input.lines().enumerate() {
        let line = idx + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let rec: WireRecord = serde_json::from_str(raw).map_err(|e| Error::MalformedRecord {
            line,
            reason: e.to_string(),
        })?;
        let id = rec.id.ok_or_else(|| Error::MalformedRecord {
            line,
            reason: "missing `id`".into(),
        })?;
        let text = rec.text.ok_or_else(|| Error::MalformedRecord {
            line,
            reason: "missing `text`".into(),
        })?;
        let doc = RawDocument {
            id: scalar_to_string(id, "id", line)?,
            text: scalar_to_string(text, "text", line)?,
            reply_to_id: rec
                .reply_to_id
                .filter(|v| !v.is_null())
                .map(|v| scalar_to_string(v, "reply_to_id", line))
                .transpose()?,
            timestamp: rec.timestamp,
        };
        acc.push(doc, line)?;
    }
    Ok(acc.finish())
}

pub fn ingest_csv_str(input: &str) -> Result<IngestReport> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(input.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| Error::MalformedRecord {
            line: 1,
            reason: e.to_string(),
        })?
        .clone();
    let column = |name: &str| headers.iter().position(|h| h.trim() == name);
    let id_col = column("id").ok_or_else(|| Error::MalformedRecord {
        line: 1,
        reason: "header has no `id` column".into(),
    })?;
    let text_col = column("text").ok_or_else(|| Error::MalformedRecord {
        line: 1,
        reason: "header has no `text` column".into(),
    })?;
    let reply_col = column("reply_to_id");
    let ts_col = column("timestamp");

    let mut acc = Accumulator::default();
    for rec in reader.records() {
        let rec = rec.map_err(|e| Error::MalformedRecord {
            line: e.position().map(|p| p.line() as usize).unwrap_or(0),
            reason: e.to_string(),
        })?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        let optional = |col: Option<usize>| {
            col.and_then(|c| rec.get(c))
                .filter(|s| !s.is_empty())
                .map(str::to_owned)
        };
        let doc = RawDocument {
            id: rec.get(id_col).unwrap_or_default().to_owned(),
            text: rec.get(text_col).unwrap_or_default().to_owned(),
            reply_to_id: optional(reply_col),
            timestamp: optional(ts_col),
        };
        acc.push(doc, line)?;
    }
    Ok(acc.finish())
}

#[derive(Default)]
struct Accumulator {
    seen: HashSet<String>,
    report: IngestReport,
}

impl Accumulator {
    fn push(&mut self, doc: RawDocument, line: usize) -> Result<()> {
        if doc.id.trim().is_empty() {
            self.report.rejections.push(Rejection {
                line,
                id: None,
                reason: "empty id".into(),
            });
            return Ok(());
        }
        if !self.seen.insert(doc.id.clone()) {
            return Err(Error::DuplicateId { id: doc.id, line });
        }
        if doc.text.trim().is_empty() {
            self.report.rejections.push(Rejection {
                line,
                id: Some(doc.id),
                reason: "empty text".into(),
            });
            return Ok(());
        }
        self.report.documents.push(doc);
        Ok(())
    }

    fn finish(self) -> IngestReport {
        self.report
    }
}

/// Writes documents as JSONL, one object per line.
pub fn write_jsonl<W: Write>(mut out: W, docs: &[RawDocument]) -> Result<()> {
    for doc in docs {
        serde_json::to_writer(&mut out, doc)?;
        out.write_all(b"\n").map_err(|e| Error::io("<output>", e))?;
    }
    Ok(())
}

/// Word-count statistics over raw (whitespace-split) text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub total_docs: usize,
    pub mean_words: f64,
    pub std_words: f64,
    pub min_words: usize,
    pub p25: usize,
    pub median: usize,
    pub p75: usize,
    pub max_words: usize,
}

/// Computes word-count statistics. The standard deviation is the population
/// one and percentiles use the nearest-rank convention, so every percentile
/// is an observed count.
pub fn stats(corpus: &[RawDocument]) -> Result<CorpusStats> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut counts: Vec<usize> = corpus
        .iter()
        .map(|d| d.text.split_whitespace().count())
        .collect();
    counts.sort_unstable();
    let n = counts.len() as f64;
    let mean = counts.iter().sum::<usize>() as f64 / n;
    let var = counts
        .iter()
        .map(|&c| {
            let d = c as f64 - mean;
            d * d
        })
        .sum::<f64>()
        / n;
    Ok(CorpusStats {
        total_docs: counts.len(),
        mean_words: mean,
        std_words: var.sqrt(),
        min_words: counts[0],
        p25: nearest_rank(&counts, 25),
        median: nearest_rank(&counts, 50),
        p75: nearest_rank(&counts, 75),
        max_words: counts[counts.len() - 1],
    })
}

/// Nearest-rank percentile of an ascending, non-empty slice.
pub fn nearest_rank(sorted: &[usize], percent: u32) -> usize {
    // rank = ceil(p/100 * n), clamped to [1, n]; integer arithmetic avoids
    // rounding surprises at exact multiples.
    let n = sorted.len();
    let rank = (percent as usize * n).div_ceil(100).clamp(1, n);
    sorted[rank - 1]
}
