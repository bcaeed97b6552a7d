//! Parameter tensors of the compatibility network and their file format.
//!
//! Layout conventions: convolution kernels are `[kernel * in_channels, out_channels]`
//! row-major with the tap index outermost; the embedding table is
//! `[vocab_size, embed_dim]` with row 0 (PAD) pinned to zero; the dense matrix
//! is `[max_len * bottleneck_channels, n_rules]` with the flattened input in
//! position-major order.

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::ModelConfig;
use super::ModelError;
use crate::rules::RulesetFingerprint;
use crate::scalar::Scalar;

const MAGIC: &[u8; 4] = b"ADMW";
const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Conv<T> {
    pub weight: Vec<T>,
    pub bias: Vec<T>,
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchNorm<T> {
    pub gamma: Vec<T>,
    pub beta: Vec<T>,
    pub running_mean: Vec<T>,
    pub running_var: Vec<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResBlock<T> {
    pub norm1: BatchNorm<T>,
    pub conv1: Conv<T>,
    pub norm2: BatchNorm<T>,
    pub conv2: Conv<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Weights<T> {
    pub embedding: Vec<T>,
    pub stem: Conv<T>,
    pub blocks: Vec<ResBlock<T>>,
    pub bottleneck: Conv<T>,
    pub dense_weight: Vec<T>,
    pub dense_bias: Vec<T>,
    pub fingerprint: RulesetFingerprint,
}

fn uniform<T: Scalar>(rng: &mut ChaCha8Rng, n: usize, limit: f64) -> Vec<T> {
    (0..n).map(|_| T::from_f64_lossy(rng.gen_range(-limit..=limit))).collect()
}

impl<T: Scalar> Conv<T> {
    fn init(rng: &mut ChaCha8Rng, kernel: usize, in_channels: usize, out_channels: usize) -> Self {
        let fan_in = kernel * in_channels;
        Conv {
            weight: uniform(rng, fan_in * out_channels, (6.0 / fan_in as f64).sqrt()),
            bias: vec![T::zero(); out_channels],
            in_channels,
            out_channels,
            kernel,
        }
    }
}

impl<T: Scalar> BatchNorm<T> {
    fn init(channels: usize) -> Self {
        BatchNorm {
            gamma: vec![T::one(); channels],
            beta: vec![T::zero(); channels],
            running_mean: vec![T::zero(); channels],
            running_var: vec![T::one(); channels],
        }
    }
}

impl<T: Scalar> Weights<T> {
    /// Seeded He-uniform initialization (limit `sqrt(6 / fan_in)`), zero biases,
    /// identity normalization, small uniform embeddings.
    pub fn init(config: &ModelConfig, fingerprint: RulesetFingerprint, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (e, f, k) = (config.embed_dim, config.filters, config.kernel);
        let mut embedding = uniform(&mut rng, config.vocab_size * e, 0.05);
        embedding[..e].fill(T::zero());
        let stem = Conv::init(&mut rng, k, e, f);
        let blocks = (0..config.depth)
            .map(|_| ResBlock {
                norm1: BatchNorm::init(f),
                conv1: Conv::init(&mut rng, k, f, f),
                norm2: BatchNorm::init(f),
                conv2: Conv::init(&mut rng, k, f, f),
            })
            .collect();
        let bottleneck = Conv::init(&mut rng, k, f, config.bottleneck_channels());
        let flat = config.flat_dim();
        Weights {
            embedding,
            stem,
            blocks,
            bottleneck,
            dense_weight: uniform(&mut rng, flat * config.n_rules, (6.0 / flat as f64).sqrt()),
            dense_bias: vec![T::zero(); config.n_rules],
            fingerprint,
        }
    }

    /// Every tensor in file order, flagged trainable or not.
    pub fn tensors(&self) -> Vec<(&Vec<T>, bool)> {
        let mut out = vec![(&self.embedding, true), (&self.stem.weight, true), (&self.stem.bias, true)];
        for b in &self.blocks {
            for (norm, conv) in [(&b.norm1, &b.conv1), (&b.norm2, &b.conv2)] {
                out.push((&norm.gamma, true));
                out.push((&norm.beta, true));
                out.push((&norm.running_mean, false));
                out.push((&norm.running_var, false));
                out.push((&conv.weight, true));
                out.push((&conv.bias, true));
            }
        }
        out.push((&self.bottleneck.weight, true));
        out.push((&self.bottleneck.bias, true));
        out.push((&self.dense_weight, true));
        out.push((&self.dense_bias, true));
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<(&mut Vec<T>, bool)> {
        let mut out = vec![(&mut self.embedding, true), (&mut self.stem.weight, true), (&mut self.stem.bias, true)];
        for b in &mut self.blocks {
            for (norm, conv) in [(&mut b.norm1, &mut b.conv1), (&mut b.norm2, &mut b.conv2)] {
                out.push((&mut norm.gamma, true));
                out.push((&mut norm.beta, true));
                out.push((&mut norm.running_mean, false));
                out.push((&mut norm.running_var, false));
                out.push((&mut conv.weight, true));
                out.push((&mut conv.bias, true));
            }
        }
        out.push((&mut self.bottleneck.weight, true));
        out.push((&mut self.bottleneck.bias, true));
        out.push((&mut self.dense_weight, true));
        out.push((&mut self.dense_bias, true));
        out
    }

    /// Same shapes, every value zero. Used for gradients and optimizer moments.
    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        for (t, _) in z.tensors_mut() {
            t.fill(T::zero());
        }
        z
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors().iter().filter(|(_, trainable)| *trainable).map(|(t, _)| t.len()).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.tensors().iter().all(|(t, _)| t.iter().all(|v| v.is_finite()))
    }

    pub fn check_shapes(&self, config: &ModelConfig) -> Result<(), ModelError> {
        let fresh = Weights::<T>::init(config, self.fingerprint, 0);
        let expected: Vec<usize> = fresh.tensors().iter().map(|(t, _)| t.len()).collect();
        let found: Vec<usize> = self.tensors().iter().map(|(t, _)| t.len()).collect();
        if expected != found {
            return Err(ModelError::ShapeMismatch(format!("weights do not match config {config:?}")));
        }
        Ok(())
    }

    pub fn convert<U: Scalar>(&self) -> Weights<U> {
        let conv = |c: &Conv<T>| Conv {
            weight: cast(&c.weight),
            bias: cast(&c.bias),
            in_channels: c.in_channels,
            out_channels: c.out_channels,
            kernel: c.kernel,
        };
        let norm = |n: &BatchNorm<T>| BatchNorm {
            gamma: cast(&n.gamma),
            beta: cast(&n.beta),
            running_mean: cast(&n.running_mean),
            running_var: cast(&n.running_var),
        };
        Weights {
            embedding: cast(&self.embedding),
            stem: conv(&self.stem),
            blocks: self
                .blocks
                .iter()
                .map(|b| ResBlock {
                    norm1: norm(&b.norm1),
                    conv1: conv(&b.conv1),
                    norm2: norm(&b.norm2),
                    conv2: conv(&b.conv2),
                })
                .collect(),
            bottleneck: conv(&self.bottleneck),
            dense_weight: cast(&self.dense_weight),
            dense_bias: cast(&self.dense_bias),
            fingerprint: self.fingerprint,
        }
    }
}

fn cast<T: Scalar, U: Scalar>(v: &[T]) -> Vec<U> {
    v.iter().map(|x| U::from_f64_lossy(x.as_f64())).collect()
}

fn config_fields(c: &ModelConfig) -> [usize; 8] {
    [c.depth, c.filters, c.kernel, c.bottleneck, c.embed_dim, c.max_len, c.vocab_size, c.n_rules]
}

/// Serializes to the weight file format: magic, version, config, fingerprint,
/// then every tensor as little-endian `f32`.
pub fn encode_weights<T: Scalar>(config: &ModelConfig, weights: &Weights<T>) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    for v in config_fields(config) {
        out.extend_from_slice(&(v as u32).to_le_bytes());
    }
    out.extend_from_slice(&weights.fingerprint.0.to_le_bytes());
    for (t, _) in weights.tensors() {
        for v in t {
            out.extend_from_slice(&(v.as_f64() as f32).to_le_bytes());
        }
    }
    out
}

pub fn decode_weights<T: Scalar>(bytes: &[u8]) -> Result<(ModelConfig, Weights<T>), ModelError> {
    let corrupt = |m: &str| ModelError::CorruptFile(m.to_string());
    let header = 4 + 4 + 8 * 4 + 8;
    if bytes.len() < header {
        return Err(corrupt("truncated header"));
    }
    if &bytes[..4] != MAGIC {
        return Err(corrupt("bad magic"));
    }
    let u32_at = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().expect("4 bytes")) as usize;
    let version = u32_at(4) as u32;
    if version != FORMAT_VERSION {
        return Err(ModelError::VersionMismatch(version));
    }
    let f: Vec<usize> = (0..8).map(|i| u32_at(8 + 4 * i)).collect();
    let config = ModelConfig {
        depth: f[0],
        filters: f[1],
        kernel: f[2],
        bottleneck: f[3],
        embed_dim: f[4],
        max_len: f[5],
        vocab_size: f[6],
        n_rules: f[7],
    };
    config.validate().map_err(|e| corrupt(&format!("invalid config: {e}")))?;
    let fp = u64::from_le_bytes(bytes[40..48].try_into().expect("8 bytes"));
    let mut weights = Weights::<T>::init(&config, RulesetFingerprint(fp), 0);
    let total: usize = weights.tensors().iter().map(|(t, _)| t.len()).sum();
    if bytes.len() != header + 4 * total {
        return Err(corrupt("tensor data length does not match config"));
    }
    let mut values = bytes[header..]
        .chunks_exact(4)
        .map(|c| T::from_f64_lossy(f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64));
    for (t, _) in weights.tensors_mut() {
        for v in t.iter_mut() {
            *v = values.next().expect("length checked");
        }
    }
    if !weights.all_finite() {
        return Err(corrupt("non-finite weight"));
    }
    Ok((config, weights))
}

pub fn save_weights<T: Scalar>(path: impl AsRef<Path>, config: &ModelConfig, weights: &Weights<T>) -> Result<(), ModelError> {
    fs::write(path, encode_weights(config, weights))?;
    Ok(())
}

pub fn load_weights<T: Scalar>(path: impl AsRef<Path>) -> Result<(ModelConfig, Weights<T>), ModelError> {
    decode_weights(&fs::read(path)?)
}
