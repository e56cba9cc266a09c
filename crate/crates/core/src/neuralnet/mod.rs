//! Stacked LSTM regressor for next-day prices.
//!
//! Architecture: `no_layers` LSTM layers of `no_units` cells. Every layer but
//! the last hands its full hidden sequence to the next one; the last layer's
//! final hidden state feeds a single-output dense head. Dropout follows each
//! LSTM layer during training. Gates use the logistic sigmoid, while the cell
//! candidate and cell output use the configured hidden activation (ReLU by
//! default). The head applies a sigmoid so predictions live in the (0, 1)
//! scaled price space.
//!
//! Everything runs in `f64` on a single thread and is fully determined by the
//! configured seed.

mod adam;
mod checkpoint;
mod grid;
mod init;
mod loss;
mod lstm;
mod model;
mod params;
mod train;

pub mod gradcheck;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pipeline::{PipelineConfig, PipelineError};

pub use adam::{adam_step, AdamState};
pub use checkpoint::{
    load_checkpoint, load_checkpoint_expecting, save_checkpoint, Checkpoint, CheckpointError,
    CHECKPOINT_MAGIC, CHECKPOINT_VERSION,
};
pub use grid::{grid_search, GridRow, GridSpec};
pub use init::init_params;
pub use loss::{huber_loss, mae, mae_loss, mse_loss, LossKind};
pub use lstm::{lstm_backward, lstm_forward, LstmCache, LstmOutput};
pub use model::{model_backward, model_forward, ForwardCache, Mode};
pub use params::{DenseParams, GateParams, LstmLayerParams, ModelParams};
pub use train::{
    evaluate, predict, predict_next, predict_scaled, train, train_with, EpochStats, TrainHistory,
};

#[derive(Debug, Error, PartialEq)]
pub enum NetError {
    #[error("invalid model config: {0}")]
    InvalidConfig(String),
    #[error("shape mismatch for {what}: expected {expected}, got {actual}")]
    Shape {
        what: String,
        expected: String,
        actual: String,
    },
    #[error("non-finite input at step {step}")]
    NonFiniteInput { step: usize },
    #[error("non-finite gradient in parameter tensor {tensor}")]
    NonFiniteGradient { tensor: usize },
    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },
    #[error("forward cache does not match: {0}")]
    StaleCache(String),
    #[error("{0} is empty")]
    Empty(&'static str),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
}

impl NetError {
    pub(crate) fn shape(what: impl Into<String>, expected: impl ToString, actual: impl ToString) -> Self {
        NetError::Shape {
            what: what.into(),
            expected: expected.to_string(),
            actual: actual.to_string(),
        }
    }
}

/// Nonlinearity for the cell candidate and the cell output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HiddenActivation {
    #[default]
    Relu,
    Tanh,
}

impl HiddenActivation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            HiddenActivation::Relu => x.max(0.0),
            HiddenActivation::Tanh => x.tanh(),
        }
    }

    /// Derivative expressed through the input `x` and output `y = apply(x)`.
    #[inline]
    pub fn derivative(self, x: f64, y: f64) -> f64 {
        match self {
            HiddenActivation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            HiddenActivation::Tanh => 1.0 - y * y,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputActivation {
    #[default]
    Sigmoid,
    Identity,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub sequence_length: usize,
    pub no_features: usize,
    pub no_units: usize,
    pub no_layers: usize,
    pub dropout_rate: f64,
    pub loss: LossKind,
    pub huber_delta: f64,
    pub optimizer: AdamConfig,
    pub batch_size: usize,
    pub epochs: usize,
    pub hidden_activation: HiddenActivation,
    pub output_activation: OutputActivation,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            sequence_length: 50,
            no_features: 5,
            no_units: 256,
            no_layers: 2,
            dropout_rate: 0.3,
            loss: LossKind::Huber,
            huber_delta: 1.0,
            optimizer: AdamConfig::default(),
            batch_size: 64,
            epochs: 100,
            hidden_activation: HiddenActivation::Relu,
            output_activation: OutputActivation::Sigmoid,
            seed: 0,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<(), NetError> {
        let bad = |m: &str| Err(NetError::InvalidConfig(m.to_string()));
        if self.sequence_length == 0
            || self.no_features == 0
            || self.no_units == 0
            || self.no_layers == 0
            || self.batch_size == 0
        {
            return bad("sequence_length, no_features, no_units, no_layers and batch_size must be >= 1");
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return bad("dropout_rate must lie in [0, 1)");
        }
        if !(self.huber_delta > 0.0 && self.huber_delta.is_finite()) {
            return bad("huber_delta must be positive");
        }
        let o = &self.optimizer;
        if !(o.learning_rate > 0.0
            && (0.0..1.0).contains(&o.beta1)
            && (0.0..1.0).contains(&o.beta2)
            && o.epsilon > 0.0)
        {
            return bad("adam requires learning_rate > 0, betas in [0, 1) and epsilon > 0");
        }
        Ok(())
    }

    /// Input shape and output head matched to a pipeline: window length,
    /// feature count, and an identity head when prices are left unscaled.
    pub fn aligned_with(&self, pipeline: &PipelineConfig) -> Self {
        Self {
            sequence_length: pipeline.no_steps,
            no_features: pipeline.input_features().len(),
            output_activation: if pipeline.scale {
                self.output_activation
            } else {
                OutputActivation::Identity
            },
            ..self.clone()
        }
    }

    /// Same architecture, i.e. interchangeable weight shapes.
    pub fn same_architecture(&self, other: &ModelConfig) -> bool {
        self.no_features == other.no_features
            && self.no_units == other.no_units
            && self.no_layers == other.no_layers
    }
}

#[inline]
pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
