use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adam::{adam_step, AdamState};
use super::config::{AlphaMode, ModelConfig, TrainConfig};
use super::loss::{alpha_from_ratio, loss_and_grad};
use super::network::{backward, forward, update_running_stats, Mode};
use super::weights::Weights;
use super::{encode_words, CompatModel, ModelError};
use crate::eval::{auc, EvalError};
use crate::labels::TrainingSet;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean training loss over the epoch's mini-batches.
    pub loss: f64,
    /// Validation micro-AUC after the epoch.
    pub auc: f64,
    pub elapsed_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub alpha: f64,
    pub epochs: Vec<EpochRecord>,
    /// 1-based epoch whose weights were kept.
    pub best_epoch: usize,
    pub best_auc: f64,
}

impl TrainLog {
    /// One JSON object per epoch.
    pub fn to_json_lines(&self) -> String {
        self.epochs.iter().map(|e| serde_json::to_string(e).expect("record serializes") + "\n").collect()
    }
}

/// Validation micro-AUC of `weights` over every (word, rule) pair of `set`.
pub fn validation_auc<T: Scalar>(config: &ModelConfig, weights: &Weights<T>, set: &TrainingSet) -> Result<f64, ModelError> {
    let model = CompatModel { config: *config, weights: weights.clone() };
    let words: Vec<&str> = set.words().iter().map(String::as_str).collect();
    let logits = model.logits(&words)?;
    let labels = set.labels();
    let flags: Vec<bool> = (0..labels.rows()).flat_map(|i| (0..labels.cols()).map(move |j| labels.get(i, j))).collect();
    auc(&logits, &flags).map_err(|e| match e {
        EvalError::DegenerateLabels => ModelError::DegenerateLabels,
        other => ModelError::ShapeMismatch(other.to_string()),
    })
}

/// Trains a freshly initialized model with mini-batch Adam, keeping the
/// weights of the epoch with the best validation AUC.
pub fn train<T: Scalar>(
    config: &ModelConfig,
    train_set: &TrainingSet,
    val_set: &TrainingSet,
    tc: &TrainConfig,
) -> Result<(CompatModel<T>, TrainLog), ModelError> {
    config.validate()?;
    tc.validate()?;
    if train_set.is_empty() || val_set.is_empty() {
        return Err(ModelError::InvalidConfig("training and validation sets must be non-empty".into()));
    }
    for set in [train_set, val_set] {
        if set.n_rules() != config.n_rules {
            return Err(ModelError::ShapeMismatch(format!("labels have {} rules, model {}", set.n_rules(), config.n_rules)));
        }
    }
    if val_set.fingerprint() != train_set.fingerprint() {
        return Err(ModelError::FingerprintMismatch { expected: train_set.fingerprint(), found: val_set.fingerprint() });
    }
    let p_bar = train_set.p_bar();
    let prior = alpha_from_ratio(p_bar)?;
    let alpha = match tc.alpha {
        AlphaMode::Auto => prior,
        AlphaMode::Fixed(a) => a,
    };

    let mut weights = Weights::<T>::init(config, train_set.fingerprint(), tc.seed);
    // start every rule at the base rate
    weights.dense_bias.fill(T::from_f64_lossy(prior.ln()));
    let mut state = AdamState::new(&weights);
    let mut rng = ChaCha8Rng::seed_from_u64(tc.seed ^ 0x5eed_5eed_5eed_5eed);
    let tokens = encode_words(train_set.words(), config.max_len)?;
    let (a, g) = (T::from_f64_lossy(alpha), T::from_f64_lossy(tc.gamma));

    let start = Instant::now();
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut best = (weights.clone(), f64::NEG_INFINITY, 0usize);
    let mut stale = 0;
    let mut epochs = Vec::new();
    let mut batch_tokens = Vec::with_capacity(tc.batch_size * config.max_len);
    for epoch in 1..=tc.max_epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut batches = 0usize;
        for rows in order.chunks(tc.batch_size) {
            batch_tokens.clear();
            for &r in rows {
                batch_tokens.extend_from_slice(&tokens[r * config.max_len..(r + 1) * config.max_len]);
            }
            let out = forward(config, &weights, &batch_tokens, rows.len(), Mode::Train);
            let cache = out.cache.expect("training pass keeps a cache");
            let (loss, dlogits) = loss_and_grad(&out.logits, train_set.labels(), rows, a, g)?;
            let grads = backward(config, &weights, &cache, &dlogits);
            update_running_stats(&mut weights, &cache, state.t);
            adam_step(&mut weights, &grads, &mut state, tc.learning_rate, tc.betas);
            loss_sum += loss.as_f64();
            batches += 1;
        }
        if !weights.all_finite() {
            return Err(ModelError::Domain(format!("weights diverged in epoch {epoch}")));
        }
        let val_auc = validation_auc(config, &weights, val_set)?;
        epochs.push(EpochRecord {
            epoch,
            loss: loss_sum / batches as f64,
            auc: val_auc,
            elapsed_ms: start.elapsed().as_millis() as u64,
        });
        if val_auc > best.1 {
            best = (weights.clone(), val_auc, epoch);
            stale = 0;
        } else {
            stale += 1;
            if stale >= tc.patience {
                break;
            }
        }
    }
    let (weights, best_auc, best_epoch) = best;
    let log = TrainLog { alpha, epochs, best_epoch, best_auc };
    Ok((CompatModel { config: *config, weights }, log))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::labels::BitGrid;
    use crate::rules::RulesetFingerprint;

    fn tiny(n_rules: usize) -> ModelConfig {
        ModelConfig { depth: 1, filters: 8, kernel: 3, bottleneck: 2, embed_dim: 8, ..ModelConfig::new(n_rules) }
    }

    fn memorizable() -> TrainingSet {
        let words: Vec<String> = ["alice", "bob", "1234", "zz", "Q!q", "maria", "777", "hello", "x", "sun"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let mut labels = BitGrid::new(10, 3);
        for i in 0..10 {
            labels.set(i, i % 3, true);
            if i % 4 == 0 {
                labels.set(i, (i + 1) % 3, true);
            }
        }
        TrainingSet::from_parts(words, labels, RulesetFingerprint(7))
    }

    #[test]
    fn memorizes_a_tiny_task() {
        let ts = memorizable();
        let tc = TrainConfig { learning_rate: 1e-2, batch_size: 10, max_epochs: 300, patience: 1, ..TrainConfig::default() };
        let (model, log) = train::<f32>(&tiny(3), &ts, &ts, &tc).unwrap();
        assert!(log.best_auc >= 0.99, "{log:?}");
        assert!((validation_auc(&model.config, &model.weights, &ts).unwrap() - log.best_auc).abs() < 1e-12);
    }

    #[test]
    fn deterministic_under_seed() {
        let ts = memorizable();
        let tc = TrainConfig { batch_size: 4, max_epochs: 3, patience: 3, seed: 9, ..TrainConfig::default() };
        let (a, la) = train::<f32>(&tiny(3), &ts, &ts, &tc).unwrap();
        let (b, lb) = train::<f32>(&tiny(3), &ts, &ts, &tc).unwrap();
        assert_eq!(a.to_bytes(), b.to_bytes());
        assert_eq!(la.epochs.len(), lb.epochs.len());
        for (x, y) in la.epochs.iter().zip(&lb.epochs) {
            assert_eq!((x.loss, x.auc), (y.loss, y.auc));
        }
    }

    #[test]
    fn degenerate_labels_abort() {
        let ts = TrainingSet::from_parts(vec!["a".into(), "b".into()], BitGrid::new(2, 3), RulesetFingerprint(1));
        assert!(matches!(train::<f32>(&tiny(3), &ts, &ts, &TrainConfig::default()), Err(ModelError::DegenerateLabels)));
    }

    #[test]
    fn log_has_one_line_per_epoch() {
        let ts = memorizable();
        let tc = TrainConfig { max_epochs: 2, patience: 5, ..TrainConfig::default() };
        let (_, log) = train::<f64>(&tiny(3), &ts, &ts, &tc).unwrap();
        let text = log.to_json_lines();
        assert_eq!(text.lines().count(), 2);
        let rec: EpochRecord = serde_json::from_str(text.lines().next().unwrap()).unwrap();
        assert_eq!(rec.epoch, 1);
    }
}
