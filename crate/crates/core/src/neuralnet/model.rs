use ndarray::Array2;
use rand::{Rng, RngCore};

use super::lstm::{lstm_backward, lstm_forward, LstmCache};
use super::params::ModelParams;
use super::{sigmoid, ModelConfig, NetError, OutputActivation};

/// Forward-pass mode. Dropout masks are drawn only in training.
pub enum Mode<'a> {
    Train(&'a mut dyn RngCore),
    Infer,
}

/// Everything [`model_backward`] needs from a forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    batch_size: usize,
    features: usize,
    units: usize,
    layers: Vec<LstmCache>,
    /// Inverted-dropout masks on the hidden sequences passed between layers.
    seq_masks: Vec<Option<Vec<Array2<f64>>>>,
    /// Mask on the last layer's final hidden state.
    head_mask: Option<Array2<f64>>,
    dense_input: Array2<f64>,
    predictions: Vec<f64>,
    output: OutputActivation,
}

impl ForwardCache {
    pub fn batch_size(&self) -> usize {
        self.batch_size
    }

    pub fn predictions(&self) -> &[f64] {
        &self.predictions
    }
}

fn dropout_mask(rows: usize, cols: usize, rate: f64, mode: &mut Mode<'_>) -> Option<Array2<f64>> {
    match mode {
        Mode::Train(rng) if rate > 0.0 => {
            let keep = 1.0 / (1.0 - rate);
            Some(Array2::from_shape_simple_fn((rows, cols), || {
                if rng.random::<f64>() < rate {
                    0.0
                } else {
                    keep
                }
            }))
        }
        _ => None,
    }
}

/// Stacks `batch` windows (each (L, F)) into one (B, F) matrix per step.
fn time_major(batch: &[&Array2<f64>], config: &ModelConfig) -> Result<Vec<Array2<f64>>, NetError> {
    if batch.is_empty() {
        return Err(NetError::Empty("batch"));
    }
    let (l, f) = (config.sequence_length, config.no_features);
    for (b, w) in batch.iter().enumerate() {
        if w.dim() != (l, f) {
            return Err(NetError::shape(format!("window {b}"), format!("({l}, {f})"), format!("{:?}", w.dim())));
        }
    }
    Ok((0..l)
        .map(|t| {
            let mut x = Array2::zeros((batch.len(), f));
            for (b, w) in batch.iter().enumerate() {
                x.row_mut(b).assign(&w.row(t));
            }
            x
        })
        .collect())
}

/// Predicts one scaled value per window.
pub fn model_forward(
    config: &ModelConfig,
    params: &ModelParams,
    batch: &[&Array2<f64>],
    mut mode: Mode<'_>,
) -> Result<(Vec<f64>, ForwardCache), NetError> {
    params.check_shapes(config)?;
    let mut seq = time_major(batch, config)?;
    let b = batch.len();
    let u = config.no_units;

    let n_layers = params.layers.len();
    let mut caches = Vec::with_capacity(n_layers);
    let mut seq_masks = Vec::with_capacity(n_layers.saturating_sub(1));
    let mut last_h = None;
    for (li, layer) in params.layers.iter().enumerate() {
        let out = lstm_forward(layer, &seq, None, None, config.hidden_activation)?;
        caches.push(out.cache);
        if li + 1 < n_layers {
            let masks: Option<Vec<Array2<f64>>> = (config.dropout_rate > 0.0 && matches!(mode, Mode::Train(_)))
                .then(|| {
                    (0..out.hidden.len())
                        .map(|_| dropout_mask(b, u, config.dropout_rate, &mut mode).expect("train mode"))
                        .collect()
                });
            seq = match &masks {
                Some(ms) => out.hidden.iter().zip(ms).map(|(h, m)| h * m).collect(),
                None => out.hidden,
            };
            seq_masks.push(masks);
        } else {
            last_h = Some(out.h);
        }
    }
    let last_h = last_h.expect("at least one layer");
    let head_mask = dropout_mask(b, u, config.dropout_rate, &mut mode);
    let dense_input = match &head_mask {
        Some(m) => &last_h * m,
        None => last_h,
    };

    let logits = dense_input.dot(&params.dense.w).column(0).to_owned() + params.dense.b[0];
    let predictions: Vec<f64> = logits
        .iter()
        .map(|&y| match config.output_activation {
            OutputActivation::Sigmoid => sigmoid(y),
            OutputActivation::Identity => y,
        })
        .collect();

    let cache = ForwardCache {
        batch_size: b,
        features: config.no_features,
        units: u,
        layers: caches,
        seq_masks,
        head_mask,
        dense_input,
        predictions: predictions.clone(),
        output: config.output_activation,
    };
    Ok((predictions, cache))
}

/// Exact gradients of the loss with respect to every parameter, given the
/// loss gradient with respect to each prediction.
pub fn model_backward(
    params: &ModelParams,
    cache: &ForwardCache,
    d_pred: &[f64],
) -> Result<ModelParams, NetError> {
    if d_pred.len() != cache.batch_size {
        return Err(NetError::StaleCache(format!(
            "{} prediction gradients for a batch of {}",
            d_pred.len(),
            cache.batch_size
        )));
    }
    if params.layers.len() != cache.layers.len()
        || params.dense.w.nrows() != cache.units
        || params.layers.first().map(|l| l.input_size()) != Some(cache.features)
    {
        return Err(NetError::StaleCache("parameters do not match the recorded forward pass".into()));
    }

    let mut grads = params.zeros_like();
    let b = cache.batch_size;

    let dy: Array2<f64> = Array2::from_shape_fn((b, 1), |(i, _)| {
        let p = cache.predictions[i];
        match cache.output {
            OutputActivation::Sigmoid => d_pred[i] * p * (1.0 - p),
            OutputActivation::Identity => d_pred[i],
        }
    });
    grads.dense.w = cache.dense_input.t().dot(&dy).as_standard_layout().into_owned();
    grads.dense.b[0] = dy.sum();
    let mut d_last = dy.dot(&params.dense.w.t()).as_standard_layout().into_owned();
    if let Some(m) = &cache.head_mask {
        d_last *= m;
    }

    let n_layers = params.layers.len();
    let steps = cache.layers[n_layers - 1].len();
    let mut d_hidden: Vec<Array2<f64>> = (0..steps)
        .map(|_| Array2::zeros((b, cache.units)))
        .collect();
    d_hidden[steps - 1] = d_last;

    for li in (0..n_layers).rev() {
        let dx = lstm_backward(&params.layers[li], &cache.layers[li], &d_hidden, &mut grads.layers[li])?;
        if li > 0 {
            d_hidden = match &cache.seq_masks[li - 1] {
                Some(masks) => dx.iter().zip(masks).map(|(d, m)| d * m).collect(),
                None => dx,
            };
        }
    }
    Ok(grads)
}
