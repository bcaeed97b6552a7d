//! Forward and backward passes of the residual 1-D convolutional classifier.
//!
//! Activations are stored row-major as `[batch * max_len, channels]`. The
//! embedding lookup and the first convolution are fused: each kernel tap is
//! folded into a `[vocab, filters]` table, so the stem costs one table lookup
//! per tap instead of a full `embed_dim x filters` product.

use super::config::ModelConfig;
use super::weights::{BatchNorm, Conv, ResBlock, Weights};
use crate::scalar::Scalar;

pub const RESIDUAL_SCALE: f64 = 0.3;
pub const NORM_EPSILON: f64 = 1e-3;
/// Weight of the old running statistic in each update.
pub const NORM_MOMENTUM: f64 = 0.99;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Batch statistics in normalization layers; a cache is kept for backprop.
    Train,
    /// Running statistics; rows are independent of each other.
    Infer,
}

struct NormCache<T> {
    xhat: Vec<T>,
    inv_std: Vec<T>,
    mean: Vec<T>,
    var: Vec<T>,
}

struct BlockCache<T> {
    norm1: NormCache<T>,
    relu1: Vec<T>,
    cols1: Vec<T>,
    norm2: NormCache<T>,
    relu2: Vec<T>,
    cols2: Vec<T>,
}

/// Intermediate values of a training-mode forward pass.
pub struct ForwardCache<T> {
    batch: usize,
    tokens: Vec<u8>,
    blocks: Vec<BlockCache<T>>,
    cols_bottleneck: Vec<T>,
    flat: Vec<T>,
}

pub struct ForwardOutput<T> {
    /// `[batch, n_rules]`
    pub logits: Vec<T>,
    /// Flattened bottleneck output, `[batch, flat_dim]`.
    pub representation: Vec<T>,
    pub cache: Option<ForwardCache<T>>,
}

fn c<T: Scalar>(v: f64) -> T {
    T::from_f64_lossy(v)
}

/// `[rows, kernel * channels]` patches with zero same-padding along the word axis.
fn im2col<T: Scalar>(x: &[T], batch: usize, len: usize, channels: usize, kernel: usize) -> Vec<T> {
    let pad = kernel / 2;
    let width = kernel * channels;
    let mut cols = vec![T::zero(); batch * len * width];
    for b in 0..batch {
        for l in 0..len {
            let row = &mut cols[(b * len + l) * width..(b * len + l + 1) * width];
            for t in 0..kernel {
                let src = l + t;
                if src < pad || src - pad >= len {
                    continue;
                }
                let src_row = b * len + src - pad;
                row[t * channels..(t + 1) * channels].copy_from_slice(&x[src_row * channels..(src_row + 1) * channels]);
            }
        }
    }
    cols
}

fn col2im<T: Scalar>(dcols: &[T], batch: usize, len: usize, channels: usize, kernel: usize) -> Vec<T> {
    let pad = kernel / 2;
    let width = kernel * channels;
    let mut dx = vec![T::zero(); batch * len * channels];
    for b in 0..batch {
        for l in 0..len {
            let row = &dcols[(b * len + l) * width..(b * len + l + 1) * width];
            for t in 0..kernel {
                let src = l + t;
                if src < pad || src - pad >= len {
                    continue;
                }
                let dst = &mut dx[(b * len + src - pad) * channels..(b * len + src - pad + 1) * channels];
                for (d, s) in dst.iter_mut().zip(&row[t * channels..(t + 1) * channels]) {
                    *d += *s;
                }
            }
        }
    }
    dx
}

fn add_bias<T: Scalar>(y: &mut [T], bias: &[T]) {
    for row in y.chunks_exact_mut(bias.len()) {
        for (v, b) in row.iter_mut().zip(bias) {
            *v += *b;
        }
    }
}

fn conv_forward<T: Scalar>(conv: &Conv<T>, x: &[T], batch: usize, len: usize) -> (Vec<T>, Vec<T>) {
    let rows = batch * len;
    let width = conv.kernel * conv.in_channels;
    let cols = im2col(x, batch, len, conv.in_channels, conv.kernel);
    let mut y = vec![T::zero(); rows * conv.out_channels];
    let n = conv.out_channels;
    T::gemm(rows, width, n, T::one(), &cols, width as isize, 1, &conv.weight, n as isize, 1, T::zero(), &mut y, n as isize, 1);
    add_bias(&mut y, &conv.bias);
    (y, cols)
}

/// Accumulates parameter gradients into `grad` and returns the input gradient.
fn conv_backward<T: Scalar>(conv: &Conv<T>, grad: &mut Conv<T>, cols: &[T], dy: &[T], batch: usize, len: usize) -> Vec<T> {
    let rows = batch * len;
    let width = conv.kernel * conv.in_channels;
    let n = conv.out_channels;
    // dW += cols^T dy
    T::gemm(width, rows, n, T::one(), cols, 1, width as isize, dy, n as isize, 1, T::one(), &mut grad.weight, n as isize, 1);
    for row in dy.chunks_exact(n) {
        for (g, v) in grad.bias.iter_mut().zip(row) {
            *g += *v;
        }
    }
    // dcols = dy W^T
    let mut dcols = vec![T::zero(); rows * width];
    T::gemm(rows, n, width, T::one(), dy, n as isize, 1, &conv.weight, 1, n as isize, T::zero(), &mut dcols, width as isize, 1);
    col2im(&dcols, batch, len, conv.in_channels, conv.kernel)
}

/// Fused embedding lookup + first convolution.
fn stem_forward<T: Scalar>(cfg: &ModelConfig, w: &Weights<T>, tokens: &[u8], batch: usize) -> Vec<T> {
    let (v, e, f, k, len) = (cfg.vocab_size, cfg.embed_dim, cfg.filters, cfg.kernel, cfg.max_len);
    let pad = k / 2;
    // table[t] = E * W_t, shape [vocab, filters]
    let mut table = vec![T::zero(); k * v * f];
    for t in 0..k {
        T::gemm(
            v,
            e,
            f,
            T::one(),
            &w.embedding,
            e as isize,
            1,
            &w.stem.weight[t * e * f..(t + 1) * e * f],
            f as isize,
            1,
            T::zero(),
            &mut table[t * v * f..(t + 1) * v * f],
            f as isize,
            1,
        );
    }
    let mut y = vec![T::zero(); batch * len * f];
    for b in 0..batch {
        for l in 0..len {
            let out = &mut y[(b * len + l) * f..(b * len + l + 1) * f];
            out.copy_from_slice(&w.stem.bias);
            for t in 0..k {
                let src = l + t;
                if src < pad || src - pad >= len {
                    continue;
                }
                let tok = tokens[b * len + src - pad] as usize;
                let row = &table[(t * v + tok) * f..(t * v + tok + 1) * f];
                for (o, r) in out.iter_mut().zip(row) {
                    *o += *r;
                }
            }
        }
    }
    y
}

fn stem_backward<T: Scalar>(cfg: &ModelConfig, w: &Weights<T>, grad: &mut Weights<T>, tokens: &[u8], dy: &[T], batch: usize) {
    let (v, e, f, k, len) = (cfg.vocab_size, cfg.embed_dim, cfg.filters, cfg.kernel, cfg.max_len);
    let pad = k / 2;
    // per-tap gradient w.r.t. the folded tables
    let mut gtable = vec![T::zero(); k * v * f];
    for b in 0..batch {
        for l in 0..len {
            let d = &dy[(b * len + l) * f..(b * len + l + 1) * f];
            for (g, x) in grad.stem.bias.iter_mut().zip(d) {
                *g += *x;
            }
            for t in 0..k {
                let src = l + t;
                if src < pad || src - pad >= len {
                    continue;
                }
                let tok = tokens[b * len + src - pad] as usize;
                let row = &mut gtable[(t * v + tok) * f..(t * v + tok + 1) * f];
                for (g, x) in row.iter_mut().zip(d) {
                    *g += *x;
                }
            }
        }
    }
    for t in 0..k {
        let g_t = &gtable[t * v * f..(t + 1) * v * f];
        // dW_t += E^T G_t
        T::gemm(
            e,
            v,
            f,
            T::one(),
            &w.embedding,
            1,
            e as isize,
            g_t,
            f as isize,
            1,
            T::one(),
            &mut grad.stem.weight[t * e * f..(t + 1) * e * f],
            f as isize,
            1,
        );
        // dE += G_t W_t^T
        T::gemm(
            v,
            f,
            e,
            T::one(),
            g_t,
            f as isize,
            1,
            &w.stem.weight[t * e * f..(t + 1) * e * f],
            1,
            f as isize,
            T::one(),
            &mut grad.embedding,
            e as isize,
            1,
        );
    }
    // PAD row is frozen at zero
    grad.embedding[..e].fill(T::zero());
}

fn norm_train<T: Scalar>(norm: &BatchNorm<T>, x: &[T]) -> (Vec<T>, NormCache<T>) {
    let ch = norm.gamma.len();
    let rows = x.len() / ch;
    let inv_n = c::<T>(1.0 / rows as f64);
    let mut mean = vec![T::zero(); ch];
    for row in x.chunks_exact(ch) {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += *v;
        }
    }
    mean.iter_mut().for_each(|m| *m *= inv_n);
    let mut var = vec![T::zero(); ch];
    for row in x.chunks_exact(ch) {
        for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
            let d = *v - *m;
            *s += d * d;
        }
    }
    var.iter_mut().for_each(|s| *s *= inv_n);
    let eps = c::<T>(NORM_EPSILON);
    let inv_std: Vec<T> = var.iter().map(|v| T::one() / (*v + eps).sqrt()).collect();
    let mut xhat = vec![T::zero(); x.len()];
    let mut y = vec![T::zero(); x.len()];
    for ((xr, hr), yr) in x.chunks_exact(ch).zip(xhat.chunks_exact_mut(ch)).zip(y.chunks_exact_mut(ch)) {
        for j in 0..ch {
            hr[j] = (xr[j] - mean[j]) * inv_std[j];
            yr[j] = norm.gamma[j] * hr[j] + norm.beta[j];
        }
    }
    (y, NormCache { xhat, inv_std, mean, var })
}

fn norm_infer<T: Scalar>(norm: &BatchNorm<T>, x: &[T]) -> Vec<T> {
    let ch = norm.gamma.len();
    let eps = c::<T>(NORM_EPSILON);
    let scale: Vec<T> = (0..ch).map(|j| norm.gamma[j] / (norm.running_var[j] + eps).sqrt()).collect();
    let shift: Vec<T> = (0..ch).map(|j| norm.beta[j] - norm.running_mean[j] * scale[j]).collect();
    let mut y = x.to_vec();
    for row in y.chunks_exact_mut(ch) {
        for j in 0..ch {
            row[j] = row[j] * scale[j] + shift[j];
        }
    }
    y
}

fn norm_backward<T: Scalar>(norm: &BatchNorm<T>, grad: &mut BatchNorm<T>, cache: &NormCache<T>, dy: &[T]) -> Vec<T> {
    let ch = norm.gamma.len();
    let rows = dy.len() / ch;
    let mut sum_dy = vec![T::zero(); ch];
    let mut sum_dy_xhat = vec![T::zero(); ch];
    for (dr, hr) in dy.chunks_exact(ch).zip(cache.xhat.chunks_exact(ch)) {
        for j in 0..ch {
            sum_dy[j] += dr[j];
            sum_dy_xhat[j] += dr[j] * hr[j];
        }
    }
    for j in 0..ch {
        grad.gamma[j] += sum_dy_xhat[j];
        grad.beta[j] += sum_dy[j];
    }
    let n = c::<T>(rows as f64);
    let coef: Vec<T> = (0..ch).map(|j| norm.gamma[j] * cache.inv_std[j] / n).collect();
    let mut dx = vec![T::zero(); dy.len()];
    for ((xr, dr), hr) in dx.chunks_exact_mut(ch).zip(dy.chunks_exact(ch)).zip(cache.xhat.chunks_exact(ch)) {
        for j in 0..ch {
            xr[j] = coef[j] * (n * dr[j] - sum_dy[j] - hr[j] * sum_dy_xhat[j]);
        }
    }
    dx
}

fn relu_in_place<T: Scalar>(x: &mut [T]) {
    x.iter_mut().for_each(|v| {
        if *v < T::zero() {
            *v = T::zero()
        }
    });
}

fn relu_mask<T: Scalar>(dy: &mut [T], activated: &[T]) {
    for (d, a) in dy.iter_mut().zip(activated) {
        if *a <= T::zero() {
            *d = T::zero();
        }
    }
}

fn block_forward<T: Scalar>(block: &ResBlock<T>, x: &[T], batch: usize, len: usize, mode: Mode) -> (Vec<T>, Option<BlockCache<T>>) {
    let (mut a1, nc1) = match mode {
        Mode::Train => {
            let (y, cache) = norm_train(&block.norm1, x);
            (y, Some(cache))
        }
        Mode::Infer => (norm_infer(&block.norm1, x), None),
    };
    relu_in_place(&mut a1);
    let (h1, cols1) = conv_forward(&block.conv1, &a1, batch, len);
    let (mut a2, nc2) = match mode {
        Mode::Train => {
            let (y, cache) = norm_train(&block.norm2, &h1);
            (y, Some(cache))
        }
        Mode::Infer => (norm_infer(&block.norm2, &h1), None),
    };
    relu_in_place(&mut a2);
    let (h2, cols2) = conv_forward(&block.conv2, &a2, batch, len);
    let scale = c::<T>(RESIDUAL_SCALE);
    let out: Vec<T> = x.iter().zip(&h2).map(|(xi, hi)| *xi + scale * *hi).collect();
    let cache = match (nc1, nc2) {
        (Some(norm1), Some(norm2)) => Some(BlockCache { norm1, relu1: a1, cols1, norm2, relu2: a2, cols2 }),
        _ => None,
    };
    (out, cache)
}

fn block_backward<T: Scalar>(block: &ResBlock<T>, grad: &mut ResBlock<T>, cache: &BlockCache<T>, dout: &[T], batch: usize, len: usize) -> Vec<T> {
    let scale = c::<T>(RESIDUAL_SCALE);
    let dh2: Vec<T> = dout.iter().map(|d| *d * scale).collect();
    let mut da2 = conv_backward(&block.conv2, &mut grad.conv2, &cache.cols2, &dh2, batch, len);
    relu_mask(&mut da2, &cache.relu2);
    let dh1 = norm_backward(&block.norm2, &mut grad.norm2, &cache.norm2, &da2);
    let mut da1 = conv_backward(&block.conv1, &mut grad.conv1, &cache.cols1, &dh1, batch, len);
    relu_mask(&mut da1, &cache.relu1);
    let mut dx = norm_backward(&block.norm1, &mut grad.norm1, &cache.norm1, &da1);
    for (d, o) in dx.iter_mut().zip(dout) {
        *d += *o;
    }
    dx
}

/// Words per block of an inference pass; keeps the im2col buffers cache-sized.
const INFER_BLOCK: usize = 64;

/// Runs the network on `batch` encoded words (`tokens.len() == batch * max_len`).
pub fn forward<T: Scalar>(cfg: &ModelConfig, w: &Weights<T>, tokens: &[u8], batch: usize, mode: Mode) -> ForwardOutput<T> {
    let len = cfg.max_len;
    assert_eq!(tokens.len(), batch * len, "token grid shape");
    if mode == Mode::Infer && batch > INFER_BLOCK {
        let mut logits = Vec::with_capacity(batch * cfg.n_rules);
        let mut representation = Vec::with_capacity(batch * cfg.flat_dim());
        for block in tokens.chunks(INFER_BLOCK * len) {
            let out = forward(cfg, w, block, block.len() / len, mode);
            logits.extend(out.logits);
            representation.extend(out.representation);
        }
        return ForwardOutput { logits, representation, cache: None };
    }
    let mut x = stem_forward(cfg, w, tokens, batch);
    let mut caches = Vec::new();
    for block in &w.blocks {
        let (y, cache) = block_forward(block, &x, batch, len, mode);
        caches.extend(cache);
        x = y;
    }
    let (flat, cols_bottleneck) = conv_forward(&w.bottleneck, &x, batch, len);
    let fd = cfg.flat_dim();
    let r = cfg.n_rules;
    let mut logits = vec![T::zero(); batch * r];
    T::gemm(batch, fd, r, T::one(), &flat, fd as isize, 1, &w.dense_weight, r as isize, 1, T::zero(), &mut logits, r as isize, 1);
    add_bias(&mut logits, &w.dense_bias);
    let cache = match mode {
        Mode::Train => Some(ForwardCache {
            batch,
            tokens: tokens.to_vec(),
            blocks: caches,
            cols_bottleneck,
            flat: flat.clone(),
        }),
        Mode::Infer => None,
    };
    ForwardOutput { logits, representation: flat, cache }
}

/// Gradients of every parameter given `dlogits = dLoss/dlogits`.
pub fn backward<T: Scalar>(cfg: &ModelConfig, w: &Weights<T>, cache: &ForwardCache<T>, dlogits: &[T]) -> Weights<T> {
    let (batch, len, r, fd) = (cache.batch, cfg.max_len, cfg.n_rules, cfg.flat_dim());
    let mut grad = w.zeros_like();
    T::gemm(fd, batch, r, T::one(), &cache.flat, 1, fd as isize, dlogits, r as isize, 1, T::zero(), &mut grad.dense_weight, r as isize, 1);
    for row in dlogits.chunks_exact(r) {
        for (g, d) in grad.dense_bias.iter_mut().zip(row) {
            *g += *d;
        }
    }
    let mut dflat = vec![T::zero(); batch * fd];
    T::gemm(batch, r, fd, T::one(), dlogits, r as isize, 1, &w.dense_weight, 1, r as isize, T::zero(), &mut dflat, fd as isize, 1);
    let mut dx = conv_backward(&w.bottleneck, &mut grad.bottleneck, &cache.cols_bottleneck, &dflat, batch, len);
    for (i, block) in w.blocks.iter().enumerate().rev() {
        dx = block_backward(block, &mut grad.blocks[i], &cache.blocks[i], &dx, batch, len);
    }
    stem_backward(cfg, w, &mut grad, &cache.tokens, &dx, batch);
    grad
}

/// Folds the batch statistics of training step `step` (0-based) into the
/// running averages. The first steps are averaged with equal weight, so the
/// initial running values are forgotten after one step.
pub fn update_running_stats<T: Scalar>(w: &mut Weights<T>, cache: &ForwardCache<T>, step: u64) {
    let m = c::<T>(NORM_MOMENTUM.min(step as f64 / (step as f64 + 1.0)));
    let one_minus = T::one() - m;
    for (block, bc) in w.blocks.iter_mut().zip(&cache.blocks) {
        for (norm, nc) in [(&mut block.norm1, &bc.norm1), (&mut block.norm2, &bc.norm2)] {
            for j in 0..norm.gamma.len() {
                norm.running_mean[j] = m * norm.running_mean[j] + one_minus * nc.mean[j];
                norm.running_var[j] = m * norm.running_var[j] + one_minus * nc.var[j];
            }
        }
    }
}
