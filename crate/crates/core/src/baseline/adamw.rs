//! Adam with decoupled weight decay.
//!
//! One step with gradient `g` at step count `t` (after incrementing):
//!
//! ```text
//! m = b1 m + (1 - b1) g
//! v = b2 v + (1 - b2) g^2
//! p = p - lr ( m / (1 - b1^t) / (sqrt(v / (1 - b2^t)) + eps) + wd p )
//! ```
//!
//! The decay term uses the parameter value from before the step and is
//! skipped entirely for parameter groups marked as not decayed (biases).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamWConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub weight_decay: f64,
}

impl Default for AdamWConfig {
    fn default() -> Self {
        AdamWConfig {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            weight_decay: 0.01,
        }
    }
}

impl AdamWConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::validation("AdamW betas must lie in [0, 1)"));
        }
        if !(self.epsilon > 0.0) || !(self.weight_decay >= 0.0) {
            return Err(Error::validation("AdamW epsilon must be > 0 and weight_decay >= 0"));
        }
        Ok(())
    }
}

/// Moment estimates for one parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamWState {
    pub first_moment: Vec<f64>,
    pub second_moment: Vec<f64>,
    pub step: u64,
}

impl AdamWState {
    pub fn new(len: usize) -> Self {
        AdamWState {
            first_moment: vec![0.0; len],
            second_moment: vec![0.0; len],
            step: 0,
        }
    }
}

/// Applies one AdamW update to `params` in place and advances `state`.
pub fn adamw_step(
    params: &mut [f64],
    grads: &[f64],
    state: &mut AdamWState,
    learning_rate: f64,
    config: &AdamWConfig,
    decay: bool,
) -> Result<()> {
    if params.len() != grads.len()
        || params.len() != state.first_moment.len()
        || params.len() != state.second_moment.len()
    {
        return Err(Error::validation(format!(
            "shape mismatch: {} params, {} grads, {}/{} moments",
            params.len(),
            grads.len(),
            state.first_moment.len(),
            state.second_moment.len()
        )));
    }
    if let Some(i) = grads.iter().position(|g| !g.is_finite()) {
        return Err(Error::Numerical(format!("non-finite gradient at index {i}")));
    }

    state.step += 1;
    let t = state.step as i32;
    let AdamWConfig {
        beta1,
        beta2,
        epsilon,
        weight_decay,
    } = *config;
    let correction1 = 1.0 - beta1.powi(t);
    let correction2 = 1.0 - beta2.powi(t);
    let wd = if decay { weight_decay } else { 0.0 };

    for (((p, &g), m), v) in params
        .iter_mut()
        .zip(grads)
        .zip(state.first_moment.iter_mut())
        .zip(state.second_moment.iter_mut())
    {
        *m = beta1 * *m + (1.0 - beta1) * g;
        *v = beta2 * *v + (1.0 - beta2) * g * g;
        let m_hat = *m / correction1;
        let v_hat = *v / correction2;
        *p -= learning_rate * (m_hat / (v_hat.sqrt() + epsilon) + wd * *p);
    }
    Ok(())
}
