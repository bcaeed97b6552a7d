//! Analytic gradients of the network against central finite differences.

use adams::labels::BitGrid;
use adams::model::{backward, encode_words, forward, loss_and_grad, ModelConfig, Mode, Weights};
use adams::rules::RulesetFingerprint;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn tiny(n_rules: usize) -> ModelConfig {
    ModelConfig { depth: 2, filters: 3, kernel: 3, bottleneck: 2, embed_dim: 4, ..ModelConfig::new(n_rules) }
}

/// Random weights with non-trivial normalization parameters and biases.
pub fn randomized(cfg: &ModelConfig, seed: u64) -> Weights<f64> {
    let mut w = Weights::<f64>::init(cfg, RulesetFingerprint(seed), seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabc);
    for b in &mut w.blocks {
        for n in [&mut b.norm1, &mut b.norm2] {
            n.gamma.iter_mut().for_each(|g| *g = rng.gen_range(0.5..1.5));
            n.beta.iter_mut().for_each(|g| *g = rng.gen_range(-0.3..0.3));
            n.running_mean.iter_mut().for_each(|g| *g = rng.gen_range(-0.2..0.2));
            n.running_var.iter_mut().for_each(|g| *g = rng.gen_range(0.5..2.0));
        }
        for c in [&mut b.conv1, &mut b.conv2] {
            c.bias.iter_mut().for_each(|g| *g = rng.gen_range(-0.1..0.1));
        }
    }
    w.stem.bias.iter_mut().for_each(|g| *g = rng.gen_range(-0.1..0.1));
    w.bottleneck.bias.iter_mut().for_each(|g| *g = rng.gen_range(-0.1..0.1));
    w.dense_bias.iter_mut().for_each(|g| *g = rng.gen_range(-1.0..1.0));
    w
}

pub fn random_labels(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> BitGrid {
    let mut g = BitGrid::new(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            g.set(i, j, rng.gen_bool(0.3));
        }
    }
    g
}

pub fn train_loss(cfg: &ModelConfig, w: &Weights<f64>, tokens: &[u8], labels: &BitGrid, rows: &[usize]) -> f64 {
    let out = forward(cfg, w, tokens, rows.len(), Mode::Train);
    loss_and_grad(&out.logits, labels, rows, 0.3, 2.0).unwrap().0
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-4)
}

/// Largest relative error between analytic and central-difference (step
/// 1e-4) gradients over every trainable entry except the frozen PAD
/// embedding row, plus the number of entries checked.
///
/// An entry whose 1e-4 and 1e-6 differences disagree sits within one step of
/// a ReLU kink; it is compared at step 1e-6 and counted in the second value.
pub fn gradient_check(seed: u64) -> (f64, usize, usize) {
    let cfg = tiny(3);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut w = randomized(&cfg, seed);
    let words = ["abc", "hello!", "x9"];
    let tokens = encode_words(&words, cfg.max_len).unwrap();
    let labels = random_labels(&mut rng, 3, 3);
    let rows = [0, 1, 2];
    let out = forward(&cfg, &w, &tokens, 3, Mode::Train);
    let (_, dlogits) = loss_and_grad(&out.logits, &labels, &rows, 0.3, 2.0).unwrap();
    let grads = backward(&cfg, &w, out.cache.as_ref().unwrap(), &dlogits);
    let analytic: Vec<Vec<f64>> = grads.tensors().into_iter().map(|(t, _)| t.clone()).collect();
    assert!(analytic[0][..cfg.embed_dim].iter().all(|&g| g == 0.0), "PAD row must not move");

    let central = |w: &mut Weights<f64>, ti: usize, k: usize, h: f64| {
        let orig = w.tensors_mut()[ti].0[k];
        w.tensors_mut()[ti].0[k] = orig + h;
        let up = train_loss(&cfg, w, &tokens, &labels, &rows);
        w.tensors_mut()[ti].0[k] = orig - h;
        let down = train_loss(&cfg, w, &tokens, &labels, &rows);
        w.tensors_mut()[ti].0[k] = orig;
        (up - down) / (2.0 * h)
    };
    let (mut worst, mut checked, mut kinks) = (0.0f64, 0, 0);
    for ti in 0..analytic.len() {
        let (len, trainable) = {
            let t = w.tensors();
            (t[ti].0.len(), t[ti].1)
        };
        if !trainable {
            continue;
        }
        let skip = if ti == 0 { cfg.embed_dim } else { 0 };
        for k in skip..len {
            let a = analytic[ti][k];
            let coarse = central(&mut w, ti, k, 1e-4);
            let mut err = rel_err(a, coarse);
            if err >= 1e-3 {
                let fine = central(&mut w, ti, k, 1e-6);
                if rel_err(coarse, fine) >= 1e-3 {
                    kinks += 1;
                    err = rel_err(a, fine);
                }
            }
            worst = worst.max(err);
            checked += 1;
        }
    }
    (worst, checked, kinks)
}

/// Asserts the finite-difference check on 5 seeded tiny models.
pub fn check_five_seeds() {
    for seed in 0..5 {
        let (err, checked, kinks) = gradient_check(seed);
        assert!(err < 1e-3, "seed {seed}: max relative error {err}");
        assert!(kinks * 100 < checked, "seed {seed}: {kinks} of {checked} entries straddle a kink");
    }
}
