//! Multi-label training data built by simulating the attack.
//!
//! Bit `(i, j)` is set when rule `j` turns word `i` into a member of the
//! attacked set and the result differs from the word itself. The attacked set
//! is never shrunk, so several (word, rule) pairs may claim the same password.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::corpus::{AttackedSet, Dictionary};
use crate::rules::{RuleSet, RulesetFingerprint, Scratch};

const MAGIC: &[u8; 4] = b"ADTS";
const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum LabelError {
    #[error("training set has {rows} rows; at least 2 are needed to split")]
    TooSmall { rows: usize },
    #[error("validation fraction must lie strictly between 0 and 1")]
    InvalidFraction,
    #[error("corrupt training-set file: {0}")]
    CorruptFile(String),
    #[error("unsupported training-set version {0}")]
    VersionMismatch(u32),
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
}

/// Dense row-major bit matrix; each row is padded to whole bytes, LSB first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitGrid {
    rows: usize,
    cols: usize,
    stride: usize,
    data: Vec<u8>,
}

impl BitGrid {
    pub fn new(rows: usize, cols: usize) -> Self {
        let stride = cols.div_ceil(8);
        BitGrid { rows, cols, stride, data: vec![0; rows * stride] }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, row: usize, col: usize) -> bool {
        assert!(row < self.rows && col < self.cols);
        self.data[row * self.stride + col / 8] >> (col % 8) & 1 == 1
    }

    pub fn set(&mut self, row: usize, col: usize, value: bool) {
        assert!(row < self.rows && col < self.cols);
        let byte = &mut self.data[row * self.stride + col / 8];
        if value {
            *byte |= 1 << (col % 8);
        } else {
            *byte &= !(1 << (col % 8));
        }
    }

    pub fn row_bytes(&self, row: usize) -> &[u8] {
        &self.data[row * self.stride..(row + 1) * self.stride]
    }

    pub fn count_ones(&self) -> usize {
        self.data.iter().map(|b| b.count_ones() as usize).sum()
    }

    fn select_rows(&self, rows: &[usize]) -> BitGrid {
        let mut out = BitGrid::new(rows.len(), self.cols);
        for (dst, &src) in rows.iter().enumerate() {
            out.data[dst * self.stride..(dst + 1) * self.stride].copy_from_slice(self.row_bytes(src));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    words: Vec<String>,
    labels: BitGrid,
    fingerprint: RulesetFingerprint,
    p_bar: f64,
}

impl TrainingSet {
    pub fn from_parts(words: Vec<String>, labels: BitGrid, fingerprint: RulesetFingerprint) -> Self {
        assert_eq!(words.len(), labels.rows(), "one label row per word");
        let total = labels.rows() * labels.cols();
        let p_bar = if total == 0 { 0.0 } else { labels.count_ones() as f64 / total as f64 };
        TrainingSet { words, labels, fingerprint, p_bar }
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn labels(&self) -> &BitGrid {
        &self.labels
    }

    pub fn n_rules(&self) -> usize {
        self.labels.cols()
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn fingerprint(&self) -> RulesetFingerprint {
        self.fingerprint
    }

    /// Ratio of set bits over the whole grid.
    pub fn p_bar(&self) -> f64 {
        self.p_bar
    }

    /// Row-disjoint random split; both sides keep their original relative order.
    pub fn split(&self, val_fraction: f64, seed: u64) -> Result<(TrainingSet, TrainingSet), LabelError> {
        if !(val_fraction > 0.0 && val_fraction < 1.0) {
            return Err(LabelError::InvalidFraction);
        }
        let n = self.len();
        if n < 2 {
            return Err(LabelError::TooSmall { rows: n });
        }
        let n_val = ((n as f64 * val_fraction).round() as usize).clamp(1, n - 1);
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let (val, train) = idx.split_at_mut(n_val);
        val.sort_unstable();
        train.sort_unstable();
        Ok((self.subset(train), self.subset(val)))
    }

    pub fn subset(&self, rows: &[usize]) -> TrainingSet {
        TrainingSet::from_parts(
            rows.iter().map(|&i| self.words[i].clone()).collect(),
            self.labels.select_rows(rows),
            self.fingerprint,
        )
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.len() as u32).to_le_bytes());
        out.extend_from_slice(&(self.n_rules() as u32).to_le_bytes());
        out.extend_from_slice(&self.fingerprint.0.to_le_bytes());
        for w in &self.words {
            out.push(w.len() as u8);
            out.extend_from_slice(w.as_bytes());
        }
        out.extend_from_slice(&self.labels.data);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<TrainingSet, LabelError> {
        let corrupt = |m: &str| LabelError::CorruptFile(m.to_string());
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4).ok_or_else(|| corrupt("missing magic"))? != MAGIC {
            return Err(corrupt("bad magic"));
        }
        let version = r.u32().ok_or_else(|| corrupt("truncated header"))?;
        if version != VERSION {
            return Err(LabelError::VersionMismatch(version));
        }
        let rows = r.u32().ok_or_else(|| corrupt("truncated header"))? as usize;
        let cols = r.u32().ok_or_else(|| corrupt("truncated header"))? as usize;
        let fp = r.u64().ok_or_else(|| corrupt("truncated header"))?;
        let mut words = Vec::with_capacity(rows);
        for _ in 0..rows {
            let len = r.take(1).ok_or_else(|| corrupt("truncated word"))?[0] as usize;
            let w = r.take(len).ok_or_else(|| corrupt("truncated word"))?;
            let w = String::from_utf8(w.to_vec()).map_err(|_| corrupt("non-UTF-8 word"))?;
            words.push(w);
        }
        let mut labels = BitGrid::new(rows, cols);
        let data = r.take(labels.data.len()).ok_or_else(|| corrupt("truncated label rows"))?;
        labels.data.copy_from_slice(data);
        if r.pos != bytes.len() {
            return Err(corrupt("trailing bytes"));
        }
        Ok(TrainingSet::from_parts(words, labels, RulesetFingerprint(fp)))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), LabelError> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<TrainingSet, LabelError> {
        TrainingSet::from_bytes(&fs::read(path)?)
    }

    /// Sparse `word_index,rule_index` listing of every set bit.
    pub fn write_sparse_csv(&self, mut out: impl Write) -> io::Result<()> {
        writeln!(out, "word_index,rule_index")?;
        for i in 0..self.len() {
            for j in 0..self.n_rules() {
                if self.labels.get(i, j) {
                    writeln!(out, "{i},{j}")?;
                }
            }
        }
        Ok(())
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Option<&'a [u8]> {
        let s = self.bytes.get(self.pos..self.pos.checked_add(n)?)?;
        self.pos += n;
        Some(s)
    }

    fn u32(&mut self) -> Option<u32> {
        Some(u32::from_le_bytes(self.take(4)?.try_into().ok()?))
    }

    fn u64(&mut self) -> Option<u64> {
        Some(u64::from_le_bytes(self.take(8)?.try_into().ok()?))
    }
}

/// Labels every (word, rule) pair of `dictionary x rules` against `targets`.
///
/// Rejected applications and results equal to the input word are negatives.
/// Non-emptiness of the inputs is guaranteed by their constructors.
pub fn generate_labels(dictionary: &Dictionary, rules: &RuleSet, targets: &AttackedSet) -> TrainingSet {
    let mut labels = BitGrid::new(dictionary.len(), rules.len());
    let mut buf = Vec::new();
    let mut scratch = Scratch::default();
    for (i, word) in dictionary.words().iter().enumerate() {
        for (j, rule) in rules.rules().iter().enumerate() {
            if !rule.apply_into(word.as_bytes(), &mut buf, &mut scratch) || buf == word.as_bytes() {
                continue;
            }
            // rule output is printable ASCII
            let guess = std::str::from_utf8(&buf).expect("ASCII guess");
            if targets.contains(guess) {
                labels.set(i, j, true);
            }
        }
    }
    TrainingSet::from_parts(dictionary.words().to_vec(), labels, rules.fingerprint())
}
