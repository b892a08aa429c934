//! Adam optimizer with bias-corrected moment estimates.

use serde::{Deserialize, Serialize};

use super::model::ModelParams;
use super::NnError;

/// Adam hyperparameters. The defaults are the values used throughout the
/// experiments: learning rate 1e-4 with the standard moment decays.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamHyper {
    pub alpha: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamHyper {
    fn default() -> Self {
        AdamHyper {
            alpha: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// First and second moment accumulators, flattened over the canonical tensor
/// order of [`ModelParams`], plus the step counter.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl AdamState {
    pub fn new(param_count: usize) -> Self {
        AdamState {
            m: vec![0.0; param_count],
            v: vec![0.0; param_count],
            t: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }
}

/// Applies one bias-corrected Adam update in place.
pub fn adam_step(
    params: &mut ModelParams,
    grads: &ModelParams,
    state: &mut AdamState,
    hyper: &AdamHyper,
) -> Result<(), NnError> {
    if params.param_count() != grads.param_count() || params.param_count() != state.m.len() {
        return Err(NnError::ShapeMismatch {
            what: "adam operands",
        });
    }
    state.t += 1;
    let bc1 = 1.0 - hyper.beta1.powi(state.t as i32);
    let bc2 = 1.0 - hyper.beta2.powi(state.t as i32);
    let mut off = 0;
    let g_tensors = grads.tensors();
    for (slot, p_slice) in params.tensors_mut().into_iter().enumerate() {
        let g_slice = g_tensors[slot];
        for (k, p) in p_slice.iter_mut().enumerate() {
            let g = g_slice[k];
            let m = &mut state.m[off + k];
            let v = &mut state.v[off + k];
            *m = hyper.beta1 * *m + (1.0 - hyper.beta1) * g;
            *v = hyper.beta2 * *v + (1.0 - hyper.beta2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *p -= hyper.alpha * m_hat / (v_hat.sqrt() + hyper.epsilon);
        }
        off += g_slice.len();
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::ModelSpec;

    fn tiny_spec() -> ModelSpec {
        ModelSpec {
            embed_dim: 2,
            hidden_dim: 2,
            num_lstm_layers: 1,
            head_dims: vec![],
            num_classes: 2,
            dropout_rate: 0.0,
        }
    }

    #[test]
    fn zero_gradients_leave_parameters_untouched() {
        let spec = tiny_spec();
        let mut params = ModelParams::zeros(&spec, 3);
        for t in params.tensors_mut() {
            for v in t {
                *v = 0.25;
            }
        }
        let before = params.clone();
        let grads = ModelParams::zeros(&spec, 3);
        let mut state = AdamState::new(params.param_count());
        adam_step(&mut params, &grads, &mut state, &AdamHyper::default()).unwrap();
        assert_eq!(params, before);
        assert_eq!(state.step_count(), 1);
    }

    #[test]
    fn first_step_with_unit_gradient_moves_by_the_learning_rate() {
        let spec = tiny_spec();
        let mut params = ModelParams::zeros(&spec, 3);
        let mut grads = ModelParams::zeros(&spec, 3);
        for t in grads.tensors_mut() {
            for v in t {
                *v = 1.0;
            }
        }
        let hyper = AdamHyper::default();
        let mut state = AdamState::new(params.param_count());
        adam_step(&mut params, &grads, &mut state, &hyper).unwrap();
        // At t = 1 the bias corrections cancel exactly, so the update is
        // -alpha * g / (|g| + epsilon).
        let got = params.tensors()[0][0];
        assert!((got + hyper.alpha).abs() < 1e-10);
    }

    #[test]
    fn constant_gradient_keeps_moving_against_its_sign() {
        let spec = tiny_spec();
        let mut params = ModelParams::zeros(&spec, 3);
        let mut grads = ModelParams::zeros(&spec, 3);
        for t in grads.tensors_mut() {
            for v in t {
                *v = -2.5;
            }
        }
        let mut state = AdamState::new(params.param_count());
        let mut last = 0.0;
        for _ in 0..3 {
            adam_step(&mut params, &grads, &mut state, &AdamHyper::default()).unwrap();
            let now = params.tensors()[0][0];
            assert!(now > last);
            last = now;
        }
    }

    #[test]
    fn mismatched_operands_are_rejected() {
        let spec = tiny_spec();
        let mut params = ModelParams::zeros(&spec, 3);
        let grads = ModelParams::zeros(&spec, 4);
        let mut state = AdamState::new(params.param_count());
        assert_eq!(
            adam_step(&mut params, &grads, &mut state, &AdamHyper::default()),
            Err(NnError::ShapeMismatch {
                what: "adam operands"
            })
        );
    }
}
