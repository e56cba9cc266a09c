use std::fmt::Write as _;
use std::time::Instant;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adam::{adam_step, AdamState};
use super::loss::mae;
use super::model::{model_backward, model_forward, Mode};
use super::{ModelConfig, ModelParams, NetError};
use crate::pipeline::{invert_scaler, ScalerParams, SupervisedDataset, SupervisedSample};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    /// 1-based.
    pub epoch: usize,
    /// Sample-weighted mean of the minibatch losses, with dropout active.
    pub train_loss: f64,
    pub val_loss: f64,
    pub train_mae: f64,
    pub val_mae: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainHistory {
    pub epochs: Vec<EpochStats>,
    /// Wall-clock time per epoch. Kept apart from the losses because it is
    /// the only non-reproducible quantity.
    pub epoch_seconds: Vec<f64>,
}

impl TrainHistory {
    pub fn len(&self) -> usize {
        self.epochs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.epochs.is_empty()
    }

    pub fn last(&self) -> Option<&EpochStats> {
        self.epochs.last()
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("epoch,train_loss,val_loss,train_mae,val_mae\n");
        for e in &self.epochs {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                e.epoch, e.train_loss, e.val_loss, e.train_mae, e.val_mae
            );
        }
        out
    }
}

fn targets(samples: &[SupervisedSample]) -> Vec<f64> {
    samples.iter().map(|s| s.target).collect()
}

/// Trains for `config.epochs` epochs and returns the final weights.
///
/// Each epoch reshuffles the training samples, then runs Adam over minibatches
/// of `batch_size` (the last one may be smaller). Shuffling and dropout both
/// draw from one ChaCha8 stream seeded with `seed`.
pub fn train(
    config: &ModelConfig,
    params: ModelParams,
    train_set: &[SupervisedSample],
    validation_set: &[SupervisedSample],
    seed: u64,
) -> Result<(ModelParams, TrainHistory), NetError> {
    train_with(config, params, train_set, validation_set, seed, |_| {})
}

/// As [`train`], calling `on_epoch` after every epoch.
pub fn train_with(
    config: &ModelConfig,
    mut params: ModelParams,
    train_set: &[SupervisedSample],
    validation_set: &[SupervisedSample],
    seed: u64,
    mut on_epoch: impl FnMut(&EpochStats),
) -> Result<(ModelParams, TrainHistory), NetError> {
    config.validate()?;
    params.check_shapes(config)?;
    if train_set.is_empty() {
        return Err(NetError::Empty("training set"));
    }
    if validation_set.is_empty() {
        return Err(NetError::Empty("validation set"));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state = AdamState::new(&params);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut history = TrainHistory::default();
    let n = train_set.len() as f64;

    for epoch in 1..=config.epochs {
        let started = Instant::now();
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut mae_sum = 0.0;
        for (batch_idx, chunk) in order.chunks(config.batch_size).enumerate() {
            let windows: Vec<&Array2<f64>> = chunk.iter().map(|&i| &train_set[i].window).collect();
            let target: Vec<f64> = chunk.iter().map(|&i| train_set[i].target).collect();
            let (pred, cache) = model_forward(config, &params, &windows, Mode::Train(&mut rng))?;
            let (loss, d_pred) = config.loss.evaluate(&pred, &target, config.huber_delta)?;
            if !loss.is_finite() {
                return Err(NetError::NonFiniteLoss { epoch, batch: batch_idx });
            }
            loss_sum += loss * chunk.len() as f64;
            mae_sum += mae(&pred, &target)? * chunk.len() as f64;
            let grads = model_backward(&params, &cache, &d_pred)?;
            adam_step(&mut params, &grads, &mut state, &config.optimizer).inspect_err(|e| {
                log::error!("epoch {epoch}, batch {batch_idx}: {e}");
            })?;
        }
        let (val_loss, val_mae) = evaluate(config, &params, validation_set)?;
        if !val_loss.is_finite() {
            return Err(NetError::NonFiniteLoss { epoch, batch: usize::MAX });
        }
        let stats = EpochStats {
            epoch,
            train_loss: loss_sum / n,
            val_loss,
            train_mae: mae_sum / n,
            val_mae,
        };
        let secs = started.elapsed().as_secs_f64();
        log::info!(
            "epoch {epoch}/{}: loss {:.6} val_loss {:.6} mae {:.6} val_mae {:.6} ({secs:.2}s)",
            config.epochs,
            stats.train_loss,
            stats.val_loss,
            stats.train_mae,
            stats.val_mae
        );
        on_epoch(&stats);
        history.epochs.push(stats);
        history.epoch_seconds.push(secs);
    }
    Ok((params, history))
}

/// Inference-mode predictions in scaled space, in sample order.
pub fn predict_scaled(
    config: &ModelConfig,
    params: &ModelParams,
    samples: &[SupervisedSample],
) -> Result<Vec<f64>, NetError> {
    let mut out = Vec::with_capacity(samples.len());
    for chunk in samples.chunks(config.batch_size.max(1)) {
        let windows: Vec<&Array2<f64>> = chunk.iter().map(|s| &s.window).collect();
        let (pred, _) = model_forward(config, params, &windows, Mode::Infer)?;
        out.extend(pred);
    }
    Ok(out)
}

/// Configured loss and MAE over `samples`, in scaled space.
pub fn evaluate(
    config: &ModelConfig,
    params: &ModelParams,
    samples: &[SupervisedSample],
) -> Result<(f64, f64), NetError> {
    let pred = predict_scaled(config, params, samples)?;
    let target = targets(samples);
    let (loss, _) = config.loss.evaluate(&pred, &target, config.huber_delta)?;
    Ok((loss, mae(&pred, &target)?))
}

/// Predicted next-day adj_close in price units, one per sample.
pub fn predict(
    config: &ModelConfig,
    params: &ModelParams,
    samples: &[SupervisedSample],
    scaler: &ScalerParams,
) -> Result<Vec<f64>, NetError> {
    let scaled = predict_scaled(config, params, samples)?;
    Ok(invert_scaler(&scaled, scaler)?)
}

/// Forecast for the trading day after the series ends.
pub fn predict_next(
    config: &ModelConfig,
    params: &ModelParams,
    dataset: &SupervisedDataset,
) -> Result<f64, NetError> {
    let (pred, _) = model_forward(config, params, &[&dataset.last_window], Mode::Infer)?;
    Ok(invert_scaler(&pred, &dataset.scaler)?[0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neuralnet::init_params;
    use crate::pipeline::{Feature, MinMax};
    use chrono::NaiveDate;

    fn cfg() -> ModelConfig {
        ModelConfig {
            sequence_length: 4,
            no_features: 2,
            no_units: 3,
            batch_size: 3,
            epochs: 3,
            ..Default::default()
        }
    }

    fn samples(n: usize) -> Vec<SupervisedSample> {
        let d = NaiveDate::from_ymd_opt(2021, 1, 1).unwrap();
        (0..n)
            .map(|i| {
                let phase = i as f64 * 0.3;
                SupervisedSample {
                    window: Array2::from_shape_fn((4, 2), |(t, f)| {
                        0.5 + 0.4 * (phase + t as f64 * 0.3 + f as f64).sin()
                    }),
                    target: 0.5 + 0.4 * (phase + 1.2).sin(),
                    window_end_date: d,
                    target_date: d,
                    current_price: 1.0,
                    actual_future_price: 1.0,
                }
            })
            .collect()
    }

    #[test]
    fn deterministic_per_seed() {
        let c = cfg();
        let s = samples(10);
        let p = init_params(&c, 1).unwrap();
        let (a, ha) = train(&c, p.clone(), &s[..7], &s[7..], 5).unwrap();
        let (b, hb) = train(&c, p, &s[..7], &s[7..], 5).unwrap();
        assert_eq!(a, b);
        assert_eq!(ha.epochs, hb.epochs);
        assert_eq!(ha.len(), 3);
        assert!(ha.epochs.iter().all(|e| e.train_loss >= 0.0 && e.val_loss.is_finite()));
    }

    #[test]
    fn zero_epochs_returns_input() {
        let c = ModelConfig { epochs: 0, ..cfg() };
        let s = samples(5);
        let p = init_params(&c, 1).unwrap();
        let (q, h) = train(&c, p.clone(), &s[..3], &s[3..], 0).unwrap();
        assert_eq!(q, p);
        assert!(h.is_empty());
        assert_eq!(h.to_csv_string(), "epoch,train_loss,val_loss,train_mae,val_mae\n");
    }

    #[test]
    fn empty_sets_rejected() {
        let c = cfg();
        let s = samples(3);
        let p = init_params(&c, 1).unwrap();
        assert_eq!(train(&c, p.clone(), &[], &s, 0).unwrap_err(), NetError::Empty("training set"));
        assert_eq!(train(&c, p, &s, &[], 0).unwrap_err(), NetError::Empty("validation set"));
    }

    #[test]
    fn prediction_inverts_scaler_and_keeps_order() {
        let c = cfg();
        let s = samples(7);
        let p = init_params(&c, 2).unwrap();
        let scaler = ScalerParams {
            columns: vec![(Feature::AdjClose, MinMax { min: 100.0, max: 300.0 })],
        };
        let scaled = predict_scaled(&c, &p, &s).unwrap();
        let prices = predict(&c, &p, &s, &scaler).unwrap();
        assert_eq!(prices.len(), 7);
        for (y, x) in scaled.iter().zip(&prices) {
            assert_eq!(*x, y * 200.0 + 100.0);
            assert!((100.0..=300.0).contains(x));
        }
        // batching must not change per-sample results
        let one_by_one: Vec<f64> = s
            .iter()
            .map(|x| predict_scaled(&c, &p, std::slice::from_ref(x)).unwrap()[0])
            .collect();
        for (a, b) in one_by_one.iter().zip(&scaled) {
            assert!((a - b).abs() < 1e-15);
        }
        assert_eq!(predict(&c, &p, &s, &scaler).unwrap(), prices);
    }
}
