use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const GENERAL_TEMPLATE: &str = "Rephrase the following tweet to improve grammar, clarity, and tone, while keeping the meaning exactly the same.\n\
Do not alter or remove any named entities, hashtags, usernames, or specific terms.\n\
Return only the rephrased tweet \u{2014} no explanation, no formatting.";

const COLLOQUIAL_TO_FORMAL_TEMPLATE: &str = "Convert the following tweet into formal, professional, and standard English suitable for inclusion in a public health report or professional summary.\n\
Preserve the original meaning and do not change or remove any named entities, hashtags, usernames, or specific terms.\n\
Avoid slang, contractions, or overly casual language. Use complete sentences and proper grammar.\n\
Return only the rephrased tweet \u{2014} no explanation or formatting.";

/// Built-in rewriting prompts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RephraseScheme {
    /// Light grammar / clarity / tone cleanup.
    General,
    /// Rewrite into formal, professional English.
    ColloquialToFormal,
}

impl RephraseScheme {
    pub const ALL: [RephraseScheme; 2] = [RephraseScheme::General, RephraseScheme::ColloquialToFormal];

    pub fn id(self) -> &'static str {
        match self {
            RephraseScheme::General => "general",
            RephraseScheme::ColloquialToFormal => "colloquial_to_formal",
        }
    }

    pub fn template(self) -> &'static str {
        match self {
            RephraseScheme::General => GENERAL_TEMPLATE,
            RephraseScheme::ColloquialToFormal => COLLOQUIAL_TO_FORMAL_TEMPLATE,
        }
    }
}

impl fmt::Display for RephraseScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for RephraseScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "general" => Ok(RephraseScheme::General),
            "colloquial_to_formal" | "c_to_f" | "c2f" => Ok(RephraseScheme::ColloquialToFormal),
            other => Err(Error::InvalidArgument(format!("unknown rephrase scheme {other:?}"))),
        }
    }
}

/// The prompt sent to the model: the scheme's template, one newline, then
/// the document text unchanged.
pub fn render_prompt(scheme: RephraseScheme, text: &str) -> Result<String> {
    if text.trim().is_empty() {
        return Err(Error::InvalidArgument("cannot rephrase empty text".into()));
    }
    let template = scheme.template();
    let mut prompt = String::with_capacity(template.len() + 1 + text.len());
    prompt.push_str(template);
    prompt.push('\n');
    prompt.push_str(text);
    Ok(prompt)
}

/// Strips surrounding whitespace and at most one layer of matching quotes.
pub fn clean_response(raw: &str) -> &str {
    let s = raw.trim();
    const PAIRS: [(char, char); 5] = [
        ('"', '"'),
        ('\'', '\''),
        ('\u{201C}', '\u{201D}'),
        ('\u{2018}', '\u{2019}'),
        ('`', '`'),
    ];
    for (open, close) in PAIRS {
        if s.len() >= open.len_utf8() + close.len_utf8() && s.starts_with(open) && s.ends_with(close) {
            return s[open.len_utf8()..s.len() - close.len_utf8()].trim();
        }
    }
    s
}
