//! Finite-difference verification of [`model_backward`].
//!
//! The numeric side uses only the forward pass and the configured loss, so it
//! shares no code with the analytic gradients it checks.

use ndarray::Array2;

use super::model::{model_backward, model_forward, Mode};
use super::{ModelConfig, ModelParams, NetError};

pub const DEFAULT_STEP: f64 = 1e-5;

/// Denominator floor for the relative error, so entries whose true gradient
/// is ~0 are judged on absolute error instead.
pub const RELATIVE_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub analytic: Vec<f64>,
    pub numeric: Vec<f64>,
    pub max_relative_error: f64,
    /// Flat index (canonical order) of the worst entry.
    pub worst_index: usize,
}

pub fn relative_error(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(RELATIVE_FLOOR)
}

/// Loss in inference mode, i.e. with dropout disabled.
pub fn loss_at(
    config: &ModelConfig,
    params: &ModelParams,
    batch: &[&Array2<f64>],
    targets: &[f64],
) -> Result<f64, NetError> {
    let (pred, _) = model_forward(config, params, batch, Mode::Infer)?;
    Ok(config.loss.evaluate(&pred, targets, config.huber_delta)?.0)
}

/// Analytic gradients, flattened in canonical order.
pub fn analytic_gradients(
    config: &ModelConfig,
    params: &ModelParams,
    batch: &[&Array2<f64>],
    targets: &[f64],
) -> Result<Vec<f64>, NetError> {
    let (pred, cache) = model_forward(config, params, batch, Mode::Infer)?;
    let (_, d_pred) = config.loss.evaluate(&pred, targets, config.huber_delta)?;
    Ok(model_backward(params, &cache, &d_pred)?.flatten())
}

fn set_flat(params: &mut ModelParams, index: usize, value: f64) {
    let mut offset = 0;
    params.for_each_tensor_mut(|t| {
        if (offset..offset + t.len()).contains(&index) {
            t[index - offset] = value;
        }
        offset += t.len();
    });
}

/// Central differences `(L(θ+h) - L(θ-h)) / 2h` for every parameter.
pub fn numeric_gradients(
    config: &ModelConfig,
    params: &ModelParams,
    batch: &[&Array2<f64>],
    targets: &[f64],
    step: f64,
) -> Result<Vec<f64>, NetError> {
    let base = params.flatten();
    let mut probe = params.clone();
    let mut out = Vec::with_capacity(base.len());
    for (i, &x) in base.iter().enumerate() {
        set_flat(&mut probe, i, x + step);
        let up = loss_at(config, &probe, batch, targets)?;
        set_flat(&mut probe, i, x - step);
        let down = loss_at(config, &probe, batch, targets)?;
        set_flat(&mut probe, i, x);
        out.push((up - down) / (2.0 * step));
    }
    Ok(out)
}

pub fn gradient_check(
    config: &ModelConfig,
    params: &ModelParams,
    batch: &[&Array2<f64>],
    targets: &[f64],
    step: f64,
) -> Result<GradCheckReport, NetError> {
    let analytic = analytic_gradients(config, params, batch, targets)?;
    let numeric = numeric_gradients(config, params, batch, targets, step)?;
    let (worst_index, max_relative_error) = analytic
        .iter()
        .zip(&numeric)
        .map(|(&a, &n)| relative_error(a, n))
        .enumerate()
        .fold((0, 0.0), |best, (i, e)| if e > best.1 { (i, e) } else { best });
    Ok(GradCheckReport {
        analytic,
        numeric,
        max_relative_error,
        worst_index,
    })
}
