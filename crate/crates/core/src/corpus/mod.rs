//! Dictionaries, attacked sets, and the synthetic corpus generator.

mod synth;

use std::collections::{HashMap, HashSet};
use std::fs;
use std::io;
use std::path::Path;

use thiserror::Error;

use crate::rules::{is_printable, MAX_WORD_LEN};

pub use synth::{synth_ruleset, synthesize_corpus, PlantedTarget, SynthCorpus, SynthManifest, SynthSpec, FAMILY_NAMES, TEMPLATE_NAMES};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("corpus is empty ({dropped} lines dropped)")]
    EmptyCorpus { dropped: usize },
    #[error("invalid synthesis spec: {0}")]
    InvalidSpec(String),
}

/// Counters for lines rejected while reading a wordlist.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize)]
pub struct LoadStats {
    pub accepted: usize,
    pub dropped_non_ascii: usize,
    pub dropped_length: usize,
    pub duplicates: usize,
}

impl LoadStats {
    pub fn dropped(&self) -> usize {
        self.dropped_non_ascii + self.dropped_length
    }
}

/// An ordered list of unique dictionary words.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dictionary {
    words: Vec<String>,
    source_name: String,
}

impl Dictionary {
    /// Builds a dictionary from words that are already valid; duplicates keep the first occurrence.
    pub fn new(source_name: impl Into<String>, words: impl IntoIterator<Item = String>) -> Result<Self, CorpusError> {
        let mut seen = HashSet::new();
        let mut dropped = 0;
        let mut kept = Vec::new();
        for w in words {
            if !valid_entry(w.as_bytes()) {
                dropped += 1;
            } else if seen.insert(w.clone()) {
                kept.push(w);
            }
        }
        if kept.is_empty() {
            return Err(CorpusError::EmptyCorpus { dropped });
        }
        Ok(Dictionary { words: kept, source_name: source_name.into() })
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn source_name(&self) -> &str {
        &self.source_name
    }

    pub fn to_text(&self) -> String {
        lines(self.words.iter())
    }
}

/// The set of passwords under attack.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttackedSet {
    passwords: HashSet<String>,
    original_size: usize,
}

impl AttackedSet {
    pub fn new(passwords: impl IntoIterator<Item = String>) -> Result<Self, CorpusError> {
        let mut dropped = 0;
        let mut set = HashSet::new();
        for p in passwords {
            if valid_entry(p.as_bytes()) {
                set.insert(p);
            } else {
                dropped += 1;
            }
        }
        if set.is_empty() {
            return Err(CorpusError::EmptyCorpus { dropped });
        }
        let original_size = set.len();
        Ok(AttackedSet { passwords: set, original_size })
    }

    pub fn contains(&self, guess: &str) -> bool {
        self.passwords.contains(guess)
    }

    pub fn original_size(&self) -> usize {
        self.original_size
    }

    pub fn passwords(&self) -> &HashSet<String> {
        &self.passwords
    }

    /// Entries in lexicographic order.
    pub fn sorted(&self) -> Vec<&str> {
        let mut v: Vec<&str> = self.passwords.iter().map(String::as_str).collect();
        v.sort_unstable();
        v
    }

    pub fn to_text(&self) -> String {
        lines(self.sorted().into_iter())
    }
}

fn lines<S: AsRef<str>>(items: impl Iterator<Item = S>) -> String {
    let mut out = String::new();
    for item in items {
        out.push_str(item.as_ref());
        out.push('\n');
    }
    out
}

fn valid_entry(bytes: &[u8]) -> bool {
    (1..=MAX_WORD_LEN).contains(&bytes.len()) && bytes.iter().all(|&b| is_printable(b))
}

/// Splits newline-separated bytes into valid entries, in file order, without duplicates.
pub fn parse_wordlist(data: &[u8]) -> (Vec<String>, LoadStats) {
    let mut stats = LoadStats::default();
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for raw in data.split(|&b| b == b'\n') {
        let line = raw.strip_suffix(b"\r").unwrap_or(raw);
        if line.is_empty() {
            continue;
        }
        if !line.iter().all(|&b| is_printable(b)) {
            stats.dropped_non_ascii += 1;
        } else if line.len() > MAX_WORD_LEN {
            stats.dropped_length += 1;
        } else {
            // validated as ASCII above
            let word = String::from_utf8(line.to_vec()).expect("ASCII line");
            if seen.insert(word.clone()) {
                stats.accepted += 1;
                out.push(word);
            } else {
                stats.duplicates += 1;
            }
        }
    }
    (out, stats)
}

pub fn load_dictionary(path: impl AsRef<Path>) -> Result<(Dictionary, LoadStats), CorpusError> {
    let path = path.as_ref();
    let (words, stats) = parse_wordlist(&fs::read(path)?);
    if words.is_empty() {
        return Err(CorpusError::EmptyCorpus { dropped: stats.dropped() });
    }
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    Ok((Dictionary { words, source_name: name }, stats))
}

pub fn load_targets(path: impl AsRef<Path>) -> Result<(AttackedSet, LoadStats), CorpusError> {
    let (words, stats) = parse_wordlist(&fs::read(path.as_ref())?);
    if words.is_empty() {
        return Err(CorpusError::EmptyCorpus { dropped: stats.dropped() });
    }
    let original_size = words.len();
    Ok((AttackedSet { passwords: words.into_iter().collect(), original_size }, stats))
}

/// Unique entries ordered by descending count, ties broken lexicographically.
pub fn sort_by_frequency<S: AsRef<str>>(
    source_name: &str,
    entries: impl IntoIterator<Item = S>,
) -> Result<Dictionary, CorpusError> {
    let mut counts: HashMap<String, usize> = HashMap::new();
    for e in entries {
        *counts.entry(e.as_ref().to_string()).or_default() += 1;
    }
    let mut ranked: Vec<(String, usize)> = counts.into_iter().collect();
    ranked.sort_unstable_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    Dictionary::new(source_name, ranked.into_iter().map(|(w, _)| w))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn file(content: &[u8]) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content).unwrap();
        f
    }

    #[test]
    fn dictionary_dedup_keeps_first() {
        let f = file(b"a\nb\na\n");
        let (d, stats) = load_dictionary(f.path()).unwrap();
        assert_eq!(d.words(), ["a", "b"]);
        assert_eq!(stats.duplicates, 1);
    }

    #[test]
    fn overlong_only_is_empty() {
        let f = file(format!("{}\n", "x".repeat(40)).as_bytes());
        match load_dictionary(f.path()) {
            Err(CorpusError::EmptyCorpus { dropped }) => assert_eq!(dropped, 1),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn non_ascii_dropped() {
        let f = file("p@ss\n日本\n".as_bytes());
        let (d, stats) = load_dictionary(f.path()).unwrap();
        assert_eq!(d.words(), ["p@ss"]);
        assert_eq!(stats.dropped(), 1);
        let (t, _) = load_targets(f.path()).unwrap();
        assert!(t.contains("p@ss"));
        assert_eq!(t.original_size(), 1);
    }

    #[test]
    fn missing_file_is_io_error() {
        assert!(matches!(load_dictionary("/nonexistent/words.txt"), Err(CorpusError::Io(_))));
    }

    #[test]
    fn frequency_sort() {
        let d = sort_by_frequency("t", ["a", "b", "c", "a", "c", "a", "c"]).unwrap();
        assert_eq!(d.words(), ["a", "c", "b"]);
        let d = sort_by_frequency("t", ["x"]).unwrap();
        assert_eq!(d.words(), ["x"]);
        let empty: [&str; 0] = [];
        assert!(matches!(sort_by_frequency("t", empty), Err(CorpusError::EmptyCorpus { .. })));
    }
}
