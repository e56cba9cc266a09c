use ndarray::Array2;
use rand::distr::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{ModelConfig, ModelParams, NetError};

/// Glorot-uniform weights, zero biases except the forget gate (1.0).
///
/// Tensors are filled in canonical order from a ChaCha8 stream seeded with
/// `seed`, so equal seeds give bitwise-equal parameters.
pub fn init_params(config: &ModelConfig, seed: u64) -> Result<ModelParams, NetError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = ModelParams::zeros(config);

    let mut glorot = |m: &mut Array2<f64>| {
        let (fan_in, fan_out) = m.dim();
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let dist = Uniform::new_inclusive(-limit, limit).expect("finite limit");
        m.iter_mut().for_each(|x| *x = dist.sample(&mut rng));
    };
    for layer in &mut params.layers {
        for g in layer.gates_mut() {
            glorot(&mut g.w);
        }
        for g in layer.gates_mut() {
            glorot(&mut g.r);
        }
        layer.forget.b.fill(1.0);
    }
    glorot(&mut params.dense.w);
    Ok(params)
}
