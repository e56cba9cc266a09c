use serde::{Deserialize, Serialize};

use super::{AdamConfig, ModelParams, NetError};

/// First/second moment estimates and the step count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub m: ModelParams,
    pub v: ModelParams,
    pub t: u64,
}

impl AdamState {
    pub fn new(params: &ModelParams) -> Self {
        Self {
            m: params.zeros_like(),
            v: params.zeros_like(),
            t: 0,
        }
    }
}

/// One bias-corrected Adam update, in place.
///
/// Every gradient is checked for finiteness before anything is modified, so
/// a rejected step leaves `params` and `state` untouched.
pub fn adam_step(
    params: &mut ModelParams,
    grads: &ModelParams,
    state: &mut AdamState,
    hyper: &AdamConfig,
) -> Result<(), NetError> {
    let g = grads.tensors();
    if g.len() != state.m.tensors().len() {
        return Err(NetError::shape("gradient tensors", state.m.tensors().len(), g.len()));
    }
    for (idx, t) in g.iter().enumerate() {
        if !t.iter().all(|x| x.is_finite()) {
            return Err(NetError::NonFiniteGradient { tensor: idx });
        }
    }

    state.t += 1;
    let t = state.t as i32;
    let (b1, b2) = (hyper.beta1, hyper.beta2);
    let bias1 = 1.0 - b1.powi(t);
    let bias2 = 1.0 - b2.powi(t);

    let p = params.tensors_mut();
    let m = state.m.tensors_mut();
    let v = state.v.tensors_mut();
    for (((p, g), m), v) in p.into_iter().zip(g).zip(m).zip(v) {
        if p.len() != g.len() {
            return Err(NetError::shape("gradient tensor", p.len(), g.len()));
        }
        for k in 0..p.len() {
            m[k] = b1 * m[k] + (1.0 - b1) * g[k];
            v[k] = b2 * v[k] + (1.0 - b2) * g[k] * g[k];
            let m_hat = m[k] / bias1;
            let v_hat = v[k] / bias2;
            p[k] -= hyper.learning_rate * m_hat / (v_hat.sqrt() + hyper.epsilon);
        }
    }
    Ok(())
}
