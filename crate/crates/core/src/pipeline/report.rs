use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{render_table, MetricReport};
use crate::topics::TopicSet;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MissingVariant {
    pub variant: String,
    pub stage: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantTopics {
    pub variant: String,
    pub topics: TopicSet,
    /// Documents whose rewrite failed, in input order.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub rephrase_failures: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleCell {
    pub variant: String,
    /// Text the variant modeled; `None` when the document was dropped.
    pub text: Option<String>,
    pub topic: Option<usize>,
    pub keywords: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssignmentSample {
    pub doc_id: String,
    pub original: String,
    pub cells: Vec<SampleCell>,
}

/// Side-by-side results for every requested variant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub k: usize,
    pub n: usize,
    pub index_config: String,
    /// Requested variants, in request order.
    pub variants: Vec<String>,
    pub rows: Vec<MetricReport>,
    pub missing: Vec<MissingVariant>,
    pub topics: Vec<VariantTopics>,
    pub samples: Vec<AssignmentSample>,
}

/// Keywords shown per topic in the text rendering of samples.
const SAMPLE_KEYWORDS: usize = 5;

impl ComparisonReport {
    pub fn row(&self, variant: &str) -> Option<&MetricReport> {
        self.rows.iter().find(|r| r.variant == variant)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn render_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "K = {}, N = {}, index = {}\n",
            self.k, self.n, self.index_config
        );
        out.push_str(&render_table(&self.rows));
        for m in &self.missing {
            let _ = writeln!(out, "missing {}: {} failed: {}", m.variant, m.stage, m.error);
        }
        for vt in &self.topics {
            let _ = writeln!(out, "\n[{}] top keywords", vt.variant);
            let cv = self.row(&vt.variant).map(|r| r.cv_per_topic.as_slice());
            for (t, words) in vt.topics.word_lists().iter().enumerate() {
                let score = cv
                    .and_then(|c| c.get(t))
                    .map(|v| format!("{v:.4}"))
                    .unwrap_or_else(|| "-".into());
                let _ = writeln!(out, "  {:>2}  {score:>7}  {}", t, words.join(" "));
            }
            if !vt.rephrase_failures.is_empty() {
                let _ = writeln!(
                    out,
                    "  rephrase failures: {}",
                    vt.rephrase_failures.join(", ")
                );
            }
        }
        if !self.samples.is_empty() {
            out.push_str("\nassignment samples\n");
        }
        for s in &self.samples {
            let _ = writeln!(out, "\n  doc {}", s.doc_id);
            let _ = writeln!(out, "    original: {}", one_line(&s.original));
            for c in &s.cells {
                let text = c.text.as_deref().map(one_line).unwrap_or_else(|| "(dropped)".into());
                let topic = match c.topic {
                    Some(t) => {
                        let kw: Vec<&str> =
                            c.keywords.iter().take(SAMPLE_KEYWORDS).map(String::as_str).collect();
                        format!("topic {t}: {}", kw.join(" "))
                    }
                    None => "no topic".into(),
                };
                let _ = writeln!(out, "    {:<22} {text}", format!("{}:", c.variant));
                let _ = writeln!(out, "    {:<22} {topic}", "");
            }
        }
        out
    }
}

fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}
