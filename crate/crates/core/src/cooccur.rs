//! Boolean sliding-window co-occurrence counts over a reference corpus.
//!
//! A window of `window_size` consecutive tokens slides with stride 1 over
//! every document; a document shorter than the window is a single window.
//! Each window counts a word (or an unordered pair of words) at most once,
//! so counts are numbers of windows, never token frequencies.
//!
//! # On-disk format
//!
//! All integers little-endian:
//!
//! ```text
//! magic        8 bytes  "TMRCOOC\0"
//! version      u32      1
//! window_size  u64
//! epsilon      f64
//! total        u64      number of windows
//! source       string   digest of the token stream the index was built
//!                       from ("" when unknown)
//! has_filter   u8       0 or 1
//! [filter]     u64 n, then n strings, sorted
//! words        u64 n, then n × (string, u64 count), sorted by word
//! pairs        u64 n, then n × (u32 a, u32 b, u64 count), a < b index into
//!              the word table, sorted by (a, b)
//! ```
//!
//! Strings are a u32 byte length followed by UTF-8 bytes. Rebuilding from
//! the same corpus and configuration produces identical bytes.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const DEFAULT_WINDOW_SIZE: usize = 110;
pub const DEFAULT_EPSILON: f64 = 1e-12;

const MAGIC: &[u8; 8] = b"TMRCOOC\0";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct CooccurrenceIndex {
    window_size: usize,
    epsilon: f64,
    total_windows: u64,
    source_digest: String,
    filter: Option<BTreeSet<String>>,
    word_counts: BTreeMap<String, u64>,
    pair_counts: BTreeMap<(String, String), u64>,
}

impl CooccurrenceIndex {
    pub fn new(window_size: usize, filter: Option<BTreeSet<String>>) -> Result<Self> {
        if window_size == 0 {
            return Err(Error::InvalidArgument("window_size must be at least 1".into()));
        }
        Ok(CooccurrenceIndex {
            window_size,
            epsilon: DEFAULT_EPSILON,
            total_windows: 0,
            source_digest: String::new(),
            filter,
            word_counts: BTreeMap::new(),
            pair_counts: BTreeMap::new(),
        })
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::InvalidArgument(format!("epsilon must be > 0, got {epsilon}")));
        }
        self.epsilon = epsilon;
        Ok(self)
    }

    pub fn window_size(&self) -> usize {
        self.window_size
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn total_windows(&self) -> u64 {
        self.total_windows
    }

    pub fn filter(&self) -> Option<&BTreeSet<String>> {
        self.filter.as_ref()
    }

    pub fn vocabulary_len(&self) -> usize {
        self.word_counts.len()
    }

    /// Whether `word` is inside the index's word universe (always true when
    /// the index was built without a filter).
    pub fn covers(&self, word: &str) -> bool {
        self.filter.as_ref().is_none_or(|f| f.contains(word))
    }

    pub fn word_count(&self, word: &str) -> u64 {
        self.word_counts.get(word).copied().unwrap_or(0)
    }

    pub fn pair_count(&self, a: &str, b: &str) -> u64 {
        if a == b {
            return self.word_count(a);
        }
        let key = ordered(a, b);
        self.pair_counts
            .get(&(key.0.to_owned(), key.1.to_owned()))
            .copied()
            .unwrap_or(0)
    }

    /// Fraction of windows containing `word`; 0 for unseen words.
    pub fn probability(&self, word: &str) -> f64 {
        ratio(self.word_count(word), self.total_windows)
    }

    /// Fraction of windows containing both words; for `a == b` this is
    /// `probability(a)`.
    pub fn pair_probability(&self, a: &str, b: &str) -> f64 {
        ratio(self.pair_count(a, b), self.total_windows)
    }

    /// Counts every window of one tokenized document.
    pub fn add_document<S: AsRef<str>>(&mut self, tokens: &[S]) {
        self.source_digest.clear();
        if tokens.is_empty() {
            return;
        }
        let span = self.window_size.min(tokens.len());
        let mut present: Vec<&str> = Vec::with_capacity(span);
        for start in 0..=(tokens.len() - span) {
            present.clear();
            present.extend(
                tokens[start..start + span]
                    .iter()
                    .map(AsRef::as_ref)
                    .filter(|w| self.covers(w)),
            );
            present.sort_unstable();
            present.dedup();
            self.total_windows += 1;
            for (i, &a) in present.iter().enumerate() {
                bump(&mut self.word_counts, a);
                for &b in &present[i + 1..] {
                    *self
                        .pair_counts
                        .entry((a.to_owned(), b.to_owned()))
                        .or_insert(0) += 1;
                }
            }
        }
    }

    /// Adds another index's counts. Both must share window size, epsilon and
    /// filter.
    pub fn merge(&mut self, other: CooccurrenceIndex) -> Result<()> {
        if self.window_size != other.window_size
            || self.epsilon.to_bits() != other.epsilon.to_bits()
            || self.filter != other.filter
        {
            return Err(Error::InvalidArgument(
                "cannot merge indexes with different configurations".into(),
            ));
        }
        self.total_windows += other.total_windows;
        self.source_digest.clear();
        for (w, c) in other.word_counts {
            *self.word_counts.entry(w).or_insert(0) += c;
        }
        for (p, c) in other.pair_counts {
            *self.pair_counts.entry(p).or_insert(0) += c;
        }
        Ok(())
    }

    /// Identifier for reports. Indexes built by [`build_index`] are
    /// identified by window size, epsilon and a digest of the reference token
    /// stream, so two indexes over the same corpus that differ only in their
    /// filter share an id (their counts for shared words are identical).
    /// Other indexes fall back to a digest of their full contents.
    pub fn config_id(&self) -> String {
        let digest = if self.source_digest.is_empty() {
            let mut buf = Vec::new();
            self.write_to(&mut buf).expect("in-memory write");
            hex::encode(Sha256::digest(&buf))
        } else {
            self.source_digest.clone()
        };
        format!(
            "cooc-w{}-e{:e}-n{}-{}",
            self.window_size,
            self.epsilon,
            self.total_windows,
            &digest[..12]
        )
    }

    pub fn write_to<W: Write>(&self, mut out: W) -> io::Result<()> {
        out.write_all(MAGIC)?;
        out.write_all(&VERSION.to_le_bytes())?;
        out.write_all(&(self.window_size as u64).to_le_bytes())?;
        out.write_all(&self.epsilon.to_le_bytes())?;
        out.write_all(&self.total_windows.to_le_bytes())?;
        write_str(&mut out, &self.source_digest)?;
        match &self.filter {
            None => out.write_all(&[0])?,
            Some(f) => {
                out.write_all(&[1])?;
                out.write_all(&(f.len() as u64).to_le_bytes())?;
                for w in f {
                    write_str(&mut out, w)?;
                }
            }
        }
        out.write_all(&(self.word_counts.len() as u64).to_le_bytes())?;
        let mut ids = BTreeMap::new();
        for (i, (w, c)) in self.word_counts.iter().enumerate() {
            write_str(&mut out, w)?;
            out.write_all(&c.to_le_bytes())?;
            ids.insert(w.as_str(), i as u32);
        }
        let mut pairs: Vec<(u32, u32, u64)> = self
            .pair_counts
            .iter()
            .map(|((a, b), c)| (ids[a.as_str()], ids[b.as_str()], *c))
            .collect();
        pairs.sort_unstable();
        out.write_all(&(pairs.len() as u64).to_le_bytes())?;
        for (a, b, c) in pairs {
            out.write_all(&a.to_le_bytes())?;
            out.write_all(&b.to_le_bytes())?;
            out.write_all(&c.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(mut input: R) -> Result<Self> {
        let bad = |e: io::Error| Error::IndexFormat(format!("truncated or unreadable: {e}"));
        let mut magic = [0u8; 8];
        input.read_exact(&mut magic).map_err(bad)?;
        if &magic != MAGIC {
            return Err(Error::IndexFormat("bad magic bytes".into()));
        }
        let version = read_u32(&mut input).map_err(bad)?;
        if version != VERSION {
            return Err(Error::IndexFormat(format!("unsupported version {version}")));
        }
        let window_size = read_u64(&mut input).map_err(bad)? as usize;
        let epsilon = f64::from_bits(read_u64(&mut input).map_err(bad)?);
        let total_windows = read_u64(&mut input).map_err(bad)?;
        let source_digest = read_str(&mut input)?;
        let mut flag = [0u8; 1];
        input.read_exact(&mut flag).map_err(bad)?;
        let filter = match flag[0] {
            0 => None,
            1 => {
                let n = read_u64(&mut input).map_err(bad)?;
                let mut f = BTreeSet::new();
                for _ in 0..n {
                    f.insert(read_str(&mut input)?);
                }
                Some(f)
            }
            other => return Err(Error::IndexFormat(format!("bad filter flag {other}"))),
        };
        let n_words = read_u64(&mut input).map_err(bad)?;
        let mut table = Vec::new();
        let mut word_counts = BTreeMap::new();
        for _ in 0..n_words {
            let w = read_str(&mut input)?;
            let c = read_u64(&mut input).map_err(bad)?;
            table.push(w.clone());
            word_counts.insert(w, c);
        }
        let n_pairs = read_u64(&mut input).map_err(bad)?;
        let mut pair_counts = BTreeMap::new();
        for _ in 0..n_pairs {
            let a = read_u32(&mut input).map_err(bad)? as usize;
            let b = read_u32(&mut input).map_err(bad)? as usize;
            let c = read_u64(&mut input).map_err(bad)?;
            let (Some(wa), Some(wb)) = (table.get(a), table.get(b)) else {
                return Err(Error::IndexFormat(format!("pair references unknown word {a}/{b}")));
            };
            pair_counts.insert((wa.clone(), wb.clone()), c);
        }
        let index = CooccurrenceIndex {
            window_size,
            epsilon,
            total_windows,
            source_digest,
            filter,
            word_counts,
            pair_counts,
        };
        index.check_invariants()?;
        Ok(index)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::new();
        self.write_to(&mut buf).map_err(|e| Error::io(path, e))?;
        fs::write(path, buf).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::read_from(bytes.as_slice())
    }

    fn check_invariants(&self) -> Result<()> {
        if self.window_size == 0 || self.epsilon.is_nan() || self.epsilon <= 0.0 {
            return Err(Error::IndexFormat("window_size and epsilon must be positive".into()));
        }
        if let Some((w, _)) = self.word_counts.iter().find(|(_, &c)| c > self.total_windows) {
            return Err(Error::IndexFormat(format!("count of {w:?} exceeds total windows")));
        }
        for ((a, b), &c) in &self.pair_counts {
            if a >= b || c > self.word_count(a).min(self.word_count(b)) {
                return Err(Error::IndexFormat(format!("inconsistent pair ({a:?}, {b:?})")));
            }
        }
        Ok(())
    }
}

/// Builds an index over tokenized documents. Documents are sharded across
/// threads and merged; the result does not depend on the sharding.
pub fn build_index<S: AsRef<str> + Sync>(
    corpus: &[Vec<S>],
    window_size: usize,
    filter: Option<BTreeSet<String>>,
) -> Result<CooccurrenceIndex> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let empty = CooccurrenceIndex::new(window_size, filter)?;
    let mut index = corpus
        .par_chunks(256)
        .map(|chunk| {
            let mut shard = empty.clone();
            for doc in chunk {
                shard.add_document(doc);
            }
            Ok::<_, Error>(shard)
        })
        .try_reduce(
            || empty.clone(),
            |mut a, b| {
                a.merge(b)?;
                Ok(a)
            },
        )?;
    let mut hasher = Sha256::new();
    for doc in corpus {
        for t in doc {
            hasher.update(t.as_ref().as_bytes());
            hasher.update([0x1f]);
        }
        hasher.update([0x1e]);
    }
    index.source_digest = hex::encode(hasher.finalize());
    Ok(index)
}

/// Reads a reference corpus: a text file with one document per line, or a
/// directory whose files (recursively, in path order) each hold one document
/// per line. Blank lines are skipped.
pub fn read_reference_corpus(path: &Path) -> Result<Vec<String>> {
    let mut files = Vec::new();
    collect_files(path, &mut files)?;
    files.sort();
    let mut docs = Vec::new();
    for file in files {
        let text = fs::read_to_string(&file).map_err(|e| Error::io(&file, e))?;
        docs.extend(
            text.lines()
                .filter(|l| !l.trim().is_empty())
                .map(str::to_owned),
        );
    }
    if docs.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    Ok(docs)
}

fn collect_files(path: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    let meta = fs::metadata(path).map_err(|e| Error::io(path, e))?;
    if meta.is_dir() {
        for entry in fs::read_dir(path).map_err(|e| Error::io(path, e))? {
            let entry = entry.map_err(|e| Error::io(path, e))?;
            collect_files(&entry.path(), out)?;
        }
    } else {
        out.push(path.to_path_buf());
    }
    Ok(())
}

fn ordered<'a>(a: &'a str, b: &'a str) -> (&'a str, &'a str) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

fn ratio(count: u64, total: u64) -> f64 {
    if total == 0 {
        0.0
    } else {
        count as f64 / total as f64
    }
}

fn bump(map: &mut BTreeMap<String, u64>, key: &str) {
    if let Some(c) = map.get_mut(key) {
        *c += 1;
    } else {
        map.insert(key.to_owned(), 1);
    }
}

fn write_str<W: Write>(out: &mut W, s: &str) -> io::Result<()> {
    out.write_all(&(s.len() as u32).to_le_bytes())?;
    out.write_all(s.as_bytes())
}

fn read_u32<R: Read>(r: &mut R) -> io::Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> io::Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_str<R: Read>(r: &mut R) -> Result<String> {
    let bad = |e: io::Error| Error::IndexFormat(format!("truncated string: {e}"));
    let len = read_u32(r).map_err(bad)? as usize;
    let mut buf = vec![0u8; len];
    r.read_exact(&mut buf).map_err(bad)?;
    String::from_utf8(buf).map_err(|_| Error::IndexFormat("string is not UTF-8".into()))
}
