//! Neural approximation of the word/rule compatibility function.
//!
//! A word is embedded character by character, passed through a stem
//! convolution, `depth` residual blocks and a bottleneck convolution, then
//! mapped by one dense layer to a logit per rule. The sigmoid of logit `j` is
//! the estimated probability that rule `j` turns the word into a hit.

mod adam;
mod config;
mod loss;
pub mod network;
mod train;
mod weights;

use std::io::{self, Write};
use std::path::Path;

use thiserror::Error;

use crate::rules::{RuleSet, RulesetFingerprint};
use crate::scalar::{sigmoid, Scalar};

pub use adam::{adam_step, adam_update, AdamState, ADAM_EPSILON};
pub use config::{AlphaMode, ModelConfig, TrainConfig, ALPHABET_SIZE};
pub use loss::{alpha_from_ratio, compute_alpha, focal_from_logit, focal_loss, loss_and_grad, loss_total};
pub use network::{backward, forward, update_running_stats, ForwardCache, ForwardOutput, Mode};
pub use train::{train, validation_auc, EpochRecord, TrainLog};
pub use weights::{decode_weights, encode_weights, load_weights, save_weights, BatchNorm, Conv, ResBlock, Weights};

/// Inference batch size used when none is given.
pub const DEFAULT_INFER_BATCH: usize = 4096;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("word {word_index} cannot be encoded: {reason}")]
    UnencodableCharacter { word_index: usize, reason: String },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("training labels are degenerate (no positives, or no negatives)")]
    DegenerateLabels,
    #[error("model was trained for rule set {expected}, got {found}")]
    FingerprintMismatch { expected: RulesetFingerprint, found: RulesetFingerprint },
    #[error("corrupt weight file: {0}")]
    CorruptFile(String),
    #[error("unsupported weight file version {0}")]
    VersionMismatch(u32),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
}

/// Maps each word to `max_len` alphabet indices: PAD is 0, byte `b` in
/// `0x20..=0x7e` is `b - 0x1f`. Words are right-padded.
pub fn encode_words<S: AsRef<str>>(words: &[S], max_len: usize) -> Result<Vec<u8>, ModelError> {
    let mut out = vec![0u8; words.len() * max_len];
    for (i, word) in words.iter().enumerate() {
        let bytes = word.as_ref().as_bytes();
        if bytes.len() > max_len {
            return Err(ModelError::UnencodableCharacter {
                word_index: i,
                reason: format!("length {} exceeds {max_len}", bytes.len()),
            });
        }
        for (j, &b) in bytes.iter().enumerate() {
            if !crate::rules::is_printable(b) {
                return Err(ModelError::UnencodableCharacter {
                    word_index: i,
                    reason: format!("byte 0x{b:02x} at position {j} is not printable ASCII"),
                });
            }
            out[i * max_len + j] = b - 0x1f;
        }
    }
    Ok(out)
}

/// `[rows, n_rules]` compatibility scores in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CompatMatrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> CompatMatrix<T> {
    pub fn new(rows: usize, cols: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), rows * cols);
        CompatMatrix { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.cols + j]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }
}

/// Anything that scores words against a fixed rule set.
pub trait CompatScorer {
    fn fingerprint(&self) -> RulesetFingerprint;
    fn n_rules(&self) -> usize;
    /// One row of `n_rules` scores per word, in input order.
    fn score(&self, words: &[&str]) -> Result<CompatMatrix<f64>, ModelError>;
}

/// A configured network with its weights.
#[derive(Debug, Clone, PartialEq)]
pub struct CompatModel<T> {
    pub config: ModelConfig,
    pub weights: Weights<T>,
}

impl<T: Scalar> CompatModel<T> {
    pub fn new(config: ModelConfig, weights: Weights<T>) -> Result<Self, ModelError> {
        config.validate()?;
        weights.check_shapes(&config)?;
        Ok(CompatModel { config, weights })
    }

    /// Randomly initialized model for `rules`.
    pub fn init(config: ModelConfig, rules: &RuleSet, seed: u64) -> Result<Self, ModelError> {
        if config.n_rules != rules.len() {
            return Err(ModelError::ShapeMismatch(format!("config has {} rules, rule set {}", config.n_rules, rules.len())));
        }
        config.validate()?;
        Ok(CompatModel { config, weights: Weights::init(&config, rules.fingerprint(), seed) })
    }

    pub fn fingerprint(&self) -> RulesetFingerprint {
        self.weights.fingerprint
    }

    pub fn check_ruleset(&self, rules: &RuleSet) -> Result<(), ModelError> {
        let found = rules.fingerprint();
        if found != self.weights.fingerprint {
            return Err(ModelError::FingerprintMismatch { expected: self.weights.fingerprint, found });
        }
        Ok(())
    }

    /// Raw logits, `[words.len(), n_rules]`, in inference mode.
    pub fn logits(&self, words: &[&str]) -> Result<Vec<T>, ModelError> {
        let mut out = Vec::with_capacity(words.len() * self.config.n_rules);
        for chunk in words.chunks(DEFAULT_INFER_BATCH) {
            let tokens = encode_words(chunk, self.config.max_len)?;
            out.extend(forward(&self.config, &self.weights, &tokens, chunk.len(), Mode::Infer).logits);
        }
        Ok(out)
    }

    /// Sigmoid scores for every (word, rule) pair, computed in batches of `batch_size` words.
    pub fn infer_batch(&self, words: &[&str], batch_size: usize) -> Result<CompatMatrix<T>, ModelError> {
        let mut data = Vec::with_capacity(words.len() * self.config.n_rules);
        for chunk in words.chunks(batch_size.max(1)) {
            let tokens = encode_words(chunk, self.config.max_len)?;
            let out = forward(&self.config, &self.weights, &tokens, chunk.len(), Mode::Infer);
            data.extend(out.logits.into_iter().map(sigmoid));
        }
        Ok(CompatMatrix::new(words.len(), self.config.n_rules, data))
    }

    /// Flattened bottleneck representation of each word, `[words.len(), flat_dim]`.
    pub fn embeddings(&self, words: &[&str]) -> Result<Vec<T>, ModelError> {
        let mut out = Vec::with_capacity(words.len() * self.config.flat_dim());
        for chunk in words.chunks(DEFAULT_INFER_BATCH) {
            let tokens = encode_words(chunk, self.config.max_len)?;
            out.extend(forward(&self.config, &self.weights, &tokens, chunk.len(), Mode::Infer).representation);
        }
        Ok(out)
    }

    /// CSV with a `word` column followed by one column per representation entry.
    pub fn export_embeddings(&self, words: &[&str], mut out: impl Write) -> Result<(), ModelError> {
        let dim = self.config.flat_dim();
        let emb = self.embeddings(words)?;
        let header: Vec<String> = std::iter::once("word".to_string()).chain((0..dim).map(|i| format!("e{i}"))).collect();
        writeln!(out, "{}", header.join(","))?;
        for (i, w) in words.iter().enumerate() {
            write!(out, "{}", crate::eval::csv_field(w))?;
            for v in &emb[i * dim..(i + 1) * dim] {
                write!(out, ",{}", crate::eval::fmt_float(v.as_f64()))?;
            }
            writeln!(out)?;
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        encode_weights(&self.config, &self.weights)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ModelError> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ModelError> {
        let (config, weights) = decode_weights(&std::fs::read(path)?)?;
        Ok(CompatModel { config, weights })
    }
}

impl<T: Scalar> CompatScorer for CompatModel<T> {
    fn fingerprint(&self) -> RulesetFingerprint {
        self.weights.fingerprint
    }

    fn n_rules(&self) -> usize {
        self.config.n_rules
    }

    fn score(&self, words: &[&str]) -> Result<CompatMatrix<f64>, ModelError> {
        let m = self.infer_batch(words, DEFAULT_INFER_BATCH)?;
        Ok(CompatMatrix::new(m.rows, m.cols, m.data.into_iter().map(Scalar::as_f64).collect()))
    }
}
