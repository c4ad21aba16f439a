//! Decoupled-weight-decay adaptive-moment optimizer with linear warmup.

use crate::model::{ECodeParams, TrainState};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;

pub struct AdamW<F> {
    pub learning_rate: F,
    pub weight_decay: F,
    /// Steps of linear warmup from zero to the base rate.
    pub warmup_steps: u64,
    m: Vec<Vec<F>>,
    v: Vec<Vec<F>>,
    step: u64,
}

impl<F: Scalar> AdamW<F> {
    pub fn new(params: &ECodeParams<F>, learning_rate: F, weight_decay: F, warmup_steps: u64) -> Self {
        let sizes: Vec<usize> = params.named_tensors().iter().map(|(_, t)| t.len()).collect();
        Self {
            learning_rate,
            weight_decay,
            warmup_steps,
            m: sizes.iter().map(|&n| vec![F::zero(); n]).collect(),
            v: sizes.iter().map(|&n| vec![F::zero(); n]).collect(),
            step: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// Restores moment buffers and the step counter from a checkpoint.
    pub fn restore(&mut self, state: &TrainState) {
        self.step = state.step;
        for (slot, stored) in self.m.iter_mut().zip(&state.adam_m) {
            *slot = stored.iter().map(|&x| F::from_f64(x)).collect();
        }
        for (slot, stored) in self.v.iter_mut().zip(&state.adam_v) {
            *slot = stored.iter().map(|&x| F::from_f64(x)).collect();
        }
    }

    pub fn export_moments(&self) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let m = self.m.iter().map(|b| b.iter().map(|&x| x.as_f64()).collect()).collect();
        let v = self.v.iter().map(|b| b.iter().map(|&x| x.as_f64()).collect()).collect();
        (m, v)
    }

    fn rate(&self) -> F {
        if self.warmup_steps > 0 && self.step <= self.warmup_steps {
            let frac = self.step as f64 / self.warmup_steps as f64;
            self.learning_rate * F::from_f64(frac)
        } else {
            self.learning_rate
        }
    }

    /// Applies one update; `grads` are in registry order.
    pub fn apply(&mut self, params: &mut ECodeParams<F>, grads: &[Tensor<F>]) {
        self.step += 1;
        let b1 = F::from_f64(BETA1);
        let b2 = F::from_f64(BETA2);
        let eps = F::from_f64(EPSILON);
        let one = F::one();
        let bc1 = one - F::from_f64(BETA1.powi(self.step as i32));
        let bc2 = one - F::from_f64(BETA2.powi(self.step as i32));
        let lr = self.rate();
        let wd = self.weight_decay;
        for (((_, tensor), grad), (m, v)) in params
            .named_tensors_mut()
            .into_iter()
            .zip(grads)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            for (i, theta) in tensor.data_mut().iter_mut().enumerate() {
                let g = grad.data()[i];
                m[i] = b1 * m[i] + (one - b1) * g;
                v[i] = b2 * v[i] + (one - b2) * g * g;
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                *theta = *theta - lr * (m_hat / (v_hat.sqrt() + eps) + wd * *theta);
            }
        }
    }
}
