use super::weights::Weights;
use crate::scalar::Scalar;

pub const ADAM_EPSILON: f64 = 1e-8;

/// First and second moment estimates, shaped like the weights.
#[derive(Debug, Clone)]
pub struct AdamState<T> {
    pub m: Weights<T>,
    pub v: Weights<T>,
    /// Number of steps taken so far.
    pub t: u64,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(weights: &Weights<T>) -> Self {
        AdamState { m: weights.zeros_like(), v: weights.zeros_like(), t: 0 }
    }
}

/// One bias-corrected Adam update on a flat parameter slice.
pub fn adam_update<T: Scalar>(params: &mut [T], grads: &[T], m: &mut [T], v: &mut [T], lr: f64, betas: (f64, f64), t: u64) {
    let (b1, b2) = betas;
    let bc1 = 1.0 - b1.powi(t as i32);
    let bc2 = 1.0 - b2.powi(t as i32);
    let step = T::from_f64_lossy(lr / bc1);
    let inv_bc2 = T::from_f64_lossy(1.0 / bc2);
    let (b1, b2) = (T::from_f64_lossy(b1), T::from_f64_lossy(b2));
    let eps = T::from_f64_lossy(ADAM_EPSILON);
    for i in 0..params.len() {
        let g = grads[i];
        m[i] = b1 * m[i] + (T::one() - b1) * g;
        v[i] = b2 * v[i] + (T::one() - b2) * g * g;
        params[i] -= step * m[i] / ((v[i] * inv_bc2).sqrt() + eps);
    }
}

/// Applies one Adam step to every trainable tensor.
pub fn adam_step<T: Scalar>(weights: &mut Weights<T>, grads: &Weights<T>, state: &mut AdamState<T>, lr: f64, betas: (f64, f64)) {
    state.t += 1;
    let t = state.t;
    let grads = grads.tensors();
    let ms = state.m.tensors_mut();
    let vs = state.v.tensors_mut();
    for (((p, trainable), (g, _)), ((m, _), (v, _))) in weights.tensors_mut().into_iter().zip(grads).zip(ms.into_iter().zip(vs)) {
        if trainable {
            adam_update(p, g, m, v, lr, betas, t);
        }
    }
}
