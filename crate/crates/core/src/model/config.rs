use serde::{Deserialize, Serialize};

use super::ModelError;
use crate::rules::MAX_WORD_LEN;

/// PAD plus the 95 printable ASCII characters.
pub const ALPHABET_SIZE: usize = 96;

/// Architecture of the compatibility network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Number of residual blocks.
    pub depth: usize,
    /// Channels of every convolution before the bottleneck.
    pub filters: usize,
    /// Convolution window; odd so that same-padding is symmetric.
    pub kernel: usize,
    /// The bottleneck convolution keeps `ceil(filters / bottleneck)` channels.
    pub bottleneck: usize,
    pub embed_dim: usize,
    pub max_len: usize,
    pub vocab_size: usize,
    pub n_rules: usize,
}

impl ModelConfig {
    /// Desk-scale defaults: three blocks of 64 filters, kernel 5, bottleneck 2.
    pub fn new(n_rules: usize) -> Self {
        ModelConfig {
            depth: 3,
            filters: 64,
            kernel: 5,
            bottleneck: 2,
            embed_dim: 128,
            max_len: MAX_WORD_LEN,
            vocab_size: ALPHABET_SIZE,
            n_rules,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: &str| Err(ModelError::InvalidConfig(m.to_string()));
        if self.depth < 1 || self.filters < 1 || self.bottleneck < 1 || self.embed_dim < 1 {
            return bad("depth, filters, bottleneck and embed_dim must be at least 1");
        }
        if self.kernel % 2 == 0 {
            return bad("kernel size must be odd");
        }
        if self.max_len != MAX_WORD_LEN {
            return bad("max_len must be 32");
        }
        if self.vocab_size != ALPHABET_SIZE {
            return bad("vocab_size must be 96");
        }
        if self.n_rules < 1 {
            return bad("n_rules must be at least 1");
        }
        Ok(())
    }

    pub fn bottleneck_channels(&self) -> usize {
        self.filters.div_ceil(self.bottleneck)
    }

    /// Width of the flattened representation fed to the dense layer.
    pub fn flat_dim(&self) -> usize {
        self.max_len * self.bottleneck_channels()
    }
}

/// How the focal-loss class weight is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlphaMode {
    Fixed(f64),
    /// `p / (1 - p)` for the positive-label ratio `p` of the training grid.
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub betas: (f64, f64),
    pub gamma: f64,
    pub alpha: AlphaMode,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            betas: (0.9, 0.999),
            gamma: 2.0,
            alpha: AlphaMode::Auto,
            batch_size: 64,
            max_epochs: 30,
            patience: 3,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: &str| Err(ModelError::InvalidConfig(m.to_string()));
        if !(self.gamma >= 0.0) {
            return bad("gamma must be non-negative");
        }
        if !(self.learning_rate > 0.0) {
            return bad("learning rate must be positive");
        }
        if self.patience < 1 || self.batch_size < 1 || self.max_epochs < 1 {
            return bad("patience, batch size and max epochs must be at least 1");
        }
        if let AlphaMode::Fixed(a) = self.alpha {
            if !(0.0..=1.0).contains(&a) {
                return bad("fixed alpha must lie in [0, 1]");
            }
        }
        let (b1, b2) = self.betas;
        if !(0.0..1.0).contains(&b1) || !(0.0..1.0).contains(&b2) {
            return bad("Adam decays must lie in [0, 1)");
        }
        Ok(())
    }
}
