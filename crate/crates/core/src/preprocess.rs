//! Text cleaning and tokenization.
//!
//! Stages run in a fixed order: URL removal, emoji removal, lowercasing,
//! punctuation stripping, whitespace tokenization, lemmatization and finally
//! stopword removal. URLs go first so that their punctuation does not shatter
//! them into junk tokens; stopwords are matched against lemmas.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::io::Write;
use std::path::Path;
use std::sync::LazyLock;

use rayon::prelude::*;
use regex::Regex;
use serde::{Deserialize, Serialize};
use unicode_normalization::char::is_combining_mark;
use unicode_normalization::UnicodeNormalization;

use crate::corpus::RawDocument;
use crate::error::{Error, Result};

const DEFAULT_STOPWORDS: &str = include_str!("../data/stopwords_en.txt");
const DEFAULT_LEMMAS: &str = include_str!("../data/lemmas_en.tsv");

static URL_RE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)\b(?:https?|ftp)://\S+|\bwww\.\S+|\bpic\.twitter\.com/\S+").unwrap()
});

#[derive(Debug, Clone, PartialEq)]
pub struct PreprocessConfig {
    pub stopwords: HashSet<String>,
    pub lemma_table: HashMap<String, String>,
    /// Keep the `#` sigil on hashtags (otherwise it is stripped, the word stays).
    pub keep_hashtags: bool,
    /// Keep the `@` sigil on mentions (otherwise it is stripped, the word stays).
    pub keep_mentions: bool,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig {
            stopwords: parse_stopwords(DEFAULT_STOPWORDS),
            lemma_table: parse_lemma_table(DEFAULT_LEMMAS).expect("bundled lemma table"),
            keep_hashtags: true,
            keep_mentions: true,
        }
    }
}

impl PreprocessConfig {
    /// A config with no stopwords and no lemmas; only cleaning is applied.
    pub fn bare() -> Self {
        PreprocessConfig {
            stopwords: HashSet::new(),
            lemma_table: HashMap::new(),
            keep_hashtags: true,
            keep_mentions: true,
        }
    }

    pub fn with_stopwords_file(mut self, path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        self.stopwords = parse_stopwords(&text);
        Ok(self)
    }

    pub fn with_lemma_file(mut self, path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        self.lemma_table = parse_lemma_table(&text)?;
        Ok(self)
    }

    fn lemma<'a>(&'a self, token: &'a str) -> &'a str {
        self.lemma_table.get(token).map_or(token, String::as_str)
    }
}

/// One entry per line; blank lines ignored; entries lowercased.
pub fn parse_stopwords(text: &str) -> HashSet<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// `surface<TAB>lemma` per line; blank lines ignored; entries lowercased.
pub fn parse_lemma_table(text: &str) -> Result<HashMap<String, String>> {
    let mut table = HashMap::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let (surface, lemma) = line.split_once('\t').ok_or_else(|| {
            Error::Config(format!("lemma table line {}: expected surface<TAB>lemma", idx + 1))
        })?;
        let (surface, lemma) = (surface.trim(), lemma.trim());
        if surface.is_empty() || lemma.is_empty() {
            return Err(Error::Config(format!("lemma table line {}: empty field", idx + 1)));
        }
        table.insert(surface.to_lowercase(), lemma.to_lowercase());
    }
    Ok(table)
}

/// True for characters in the emoji / pictograph blocks and the joiners,
/// selectors and modifiers used to compose emoji sequences.
pub fn is_emoji(c: char) -> bool {
    matches!(c as u32,
        0x1F000..=0x1FAFF       // mahjong .. symbols & pictographs ext-A, incl. regional indicators
        | 0x2300..=0x23FF       // misc technical (watch, hourglass, ...)
        | 0x2460..=0x24FF       // enclosed alphanumerics
        | 0x25A0..=0x27BF       // geometric shapes, misc symbols, dingbats
        | 0x2900..=0x297F
        | 0x2B00..=0x2BFF
        | 0x3030 | 0x303D | 0x3297 | 0x3299
        | 0x200D                // zero-width joiner
        | 0x20E3                // combining keycap
        | 0xFE00..=0xFE0F       // variation selectors
        | 0xE0020..=0xE007F     // tag characters
    )
}

fn is_token_char(c: char) -> bool {
    c.is_ascii_lowercase() || c.is_ascii_digit() || matches!(c, '_' | '#' | '@' | '\'')
}

/// Runs the full cleaning pipeline over one text.
pub fn preprocess(text: &str, config: &PreprocessConfig) -> Vec<String> {
    let no_urls = URL_RE.replace_all(text, " ");
    let no_emoji: String = no_urls
        .chars()
        .map(|c| if is_emoji(c) { ' ' } else { c })
        .collect();
    let lower = no_emoji.to_lowercase();
    let stripped = strip_punctuation(&lower);

    let mut tokens = Vec::new();
    for raw in stripped.split_whitespace() {
        for piece in split_sigils(raw) {
            let Some(token) = normalize_token(piece, config) else {
                continue;
            };
            let lemma = if token.starts_with(['#', '@']) {
                token.as_str()
            } else {
                config.lemma(&token)
            };
            if !config.stopwords.contains(lemma) {
                tokens.push(lemma.to_owned());
            }
        }
    }
    tokens
}

fn strip_punctuation(text: &str) -> String {
    // Compatibility decomposition folds accents and full-width forms onto
    // ASCII; anything left outside the token class becomes a separator.
    text.nfkd()
        .filter(|c| !is_combining_mark(*c))
        .map(|c| match c {
            '\u{2018}' | '\u{2019}' | '\u{02BC}' => '\'',
            c if is_token_char(c) => c,
            _ => ' ',
        })
        .collect()
}

/// `#` and `@` only act as sigils at the start of a token; elsewhere they
/// start a new token.
fn split_sigils(raw: &str) -> impl Iterator<Item = &str> {
    let mut starts: Vec<usize> = raw
        .char_indices()
        .filter(|&(i, c)| i > 0 && matches!(c, '#' | '@'))
        .map(|(i, _)| i)
        .collect();
    starts.insert(0, 0);
    let ends: Vec<usize> = starts.iter().skip(1).copied().chain([raw.len()]).collect();
    starts
        .into_iter()
        .zip(ends)
        .map(move |(s, e)| &raw[s..e])
}

fn normalize_token(piece: &str, config: &PreprocessConfig) -> Option<String> {
    let (sigil, body) = match piece.chars().next() {
        Some(c @ ('#' | '@')) => (Some(c), &piece[1..]),
        _ => (None, piece),
    };
    let body = body.trim_matches('\'');
    if !body.bytes().any(|b| b.is_ascii_alphanumeric() || b == b'_') {
        return None;
    }
    let keep_sigil = match sigil {
        Some('#') => config.keep_hashtags,
        Some('@') => config.keep_mentions,
        _ => false,
    };
    Some(match sigil {
        Some(c) if keep_sigil => format!("{c}{body}"),
        _ => body.to_owned(),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProcessedDocument {
    pub id: String,
    pub tokens: Vec<String>,
    /// Set when cleaning removed every token. Such documents are kept so
    /// ids stay aligned across corpus variants.
    pub empty: bool,
}

impl ProcessedDocument {
    pub fn new(id: impl Into<String>, tokens: Vec<String>) -> Self {
        let empty = tokens.is_empty();
        ProcessedDocument {
            id: id.into(),
            tokens,
            empty,
        }
    }
}

pub fn preprocess_corpus(docs: &[RawDocument], config: &PreprocessConfig) -> Vec<ProcessedDocument> {
    docs.par_iter()
        .map(|d| ProcessedDocument::new(d.id.clone(), preprocess(&d.text, config)))
        .collect()
}

pub fn write_processed<W: Write>(mut out: W, docs: &[ProcessedDocument]) -> Result<()> {
    for doc in docs {
        serde_json::to_writer(&mut out, doc)?;
        out.write_all(b"\n").map_err(|e| Error::io("<output>", e))?;
    }
    Ok(())
}

pub fn read_processed(path: &Path) -> Result<Vec<ProcessedDocument>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| Error::MalformedRecord {
                line: i + 1,
                reason: e.to_string(),
            })
        })
        .collect()
}
