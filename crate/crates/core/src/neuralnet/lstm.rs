use ndarray::linalg::general_mat_mul;
use ndarray::{Array1, Array2, Axis};

use super::params::{GateParams, LstmLayerParams};
use super::{sigmoid, HiddenActivation, NetError};

/// Per-step values kept for backpropagation through time.
#[derive(Debug, Clone)]
struct StepCache {
    x: Array2<f64>,
    /// Pre-activations of the input, forget, cell-candidate and output gates.
    z: [Array2<f64>; 4],
    c: Array2<f64>,
}

/// Forward-pass record of one layer over a batch of sequences.
#[derive(Debug, Clone)]
pub struct LstmCache {
    steps: Vec<StepCache>,
    hidden: Vec<Array2<f64>>,
    h0: Array2<f64>,
    c0: Array2<f64>,
    activation: HiddenActivation,
}

impl LstmCache {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn batch_size(&self) -> usize {
        self.h0.nrows()
    }

    pub fn units(&self) -> usize {
        self.h0.ncols()
    }

    pub fn input_size(&self) -> usize {
        self.steps.first().map_or(0, |s| s.x.ncols())
    }

    /// Gate pre-activations at `step`, in input/forget/cell/output order.
    pub fn pre_activations(&self, step: usize) -> Option<&[Array2<f64>; 4]> {
        self.steps.get(step).map(|s| &s.z)
    }
}

#[derive(Debug, Clone)]
pub struct LstmOutput {
    /// Hidden state after every step, each (B, U).
    pub hidden: Vec<Array2<f64>>,
    pub h: Array2<f64>,
    pub c: Array2<f64>,
    pub cache: LstmCache,
}

fn gate_preactivation(g: &GateParams, x: &Array2<f64>, h_prev: &Array2<f64>) -> Array2<f64> {
    let batch = x.nrows();
    let mut z = g.b.broadcast((batch, g.b.len())).expect("bias broadcast").to_owned();
    general_mat_mul(1.0, x, &g.w, 1.0, &mut z);
    general_mat_mul(1.0, h_prev, &g.r, 1.0, &mut z);
    z
}

/// Runs one LSTM layer over `inputs` (one (B, F_in) matrix per time step).
///
/// ```text
/// i = σ(x·W_i + h·R_i + b_i)      f = σ(x·W_f + h·R_f + b_f)
/// g = φ(x·W_c + h·R_c + b_c)      o = σ(x·W_o + h·R_o + b_o)
/// c' = f ⊙ c + i ⊙ g              h' = o ⊙ φ(c')
/// ```
/// with φ the hidden activation. `h0`/`c0` default to zeros.
pub fn lstm_forward(
    layer: &LstmLayerParams,
    inputs: &[Array2<f64>],
    h0: Option<&Array2<f64>>,
    c0: Option<&Array2<f64>>,
    activation: HiddenActivation,
) -> Result<LstmOutput, NetError> {
    let first = inputs.first().ok_or(NetError::Empty("input sequence"))?;
    let batch = first.nrows();
    let (f_in, units) = (layer.input_size(), layer.units());
    for (t, x) in inputs.iter().enumerate() {
        if x.dim() != (batch, f_in) {
            return Err(NetError::shape(format!("input at step {t}"), format!("({batch}, {f_in})"), format!("{:?}", x.dim())));
        }
        if !x.iter().all(|v| v.is_finite()) {
            return Err(NetError::NonFiniteInput { step: t });
        }
    }
    let init_state = |s: Option<&Array2<f64>>, what: &str| -> Result<Array2<f64>, NetError> {
        match s {
            None => Ok(Array2::zeros((batch, units))),
            Some(m) if m.dim() == (batch, units) => Ok(m.clone()),
            Some(m) => Err(NetError::shape(what, format!("({batch}, {units})"), format!("{:?}", m.dim()))),
        }
    };
    let h0 = init_state(h0, "h0")?;
    let c0 = init_state(c0, "c0")?;

    let mut h = h0.clone();
    let mut c = c0.clone();
    let mut steps = Vec::with_capacity(inputs.len());
    let mut hidden = Vec::with_capacity(inputs.len());
    for x in inputs {
        let z = [
            gate_preactivation(&layer.input, x, &h),
            gate_preactivation(&layer.forget, x, &h),
            gate_preactivation(&layer.cell, x, &h),
            gate_preactivation(&layer.output, x, &h),
        ];
        let mut c_next = Array2::zeros((batch, units));
        let mut h_next = Array2::zeros((batch, units));
        {
            let zi = z[0].as_slice().expect("standard layout");
            let zf = z[1].as_slice().expect("standard layout");
            let zc = z[2].as_slice().expect("standard layout");
            let zo = z[3].as_slice().expect("standard layout");
            let c_prev = c.as_slice().expect("standard layout");
            let cn = c_next.as_slice_mut().expect("standard layout");
            let hn = h_next.as_slice_mut().expect("standard layout");
            for k in 0..cn.len() {
                let i = sigmoid(zi[k]);
                let f = sigmoid(zf[k]);
                let g = activation.apply(zc[k]);
                let o = sigmoid(zo[k]);
                cn[k] = f * c_prev[k] + i * g;
                hn[k] = o * activation.apply(cn[k]);
            }
        }
        steps.push(StepCache {
            x: x.clone(),
            z,
            c: c_next.clone(),
        });
        hidden.push(h_next.clone());
        h = h_next;
        c = c_next;
    }

    Ok(LstmOutput {
        hidden: hidden.clone(),
        h,
        c,
        cache: LstmCache {
            steps,
            hidden,
            h0,
            c0,
            activation,
        },
    })
}

/// Backpropagates through a layer.
///
/// `d_hidden[t]` is the loss gradient arriving at the hidden output of step
/// `t` from above. Parameter gradients are accumulated into `grads`; the
/// returned vector holds the gradient with respect to each step's input.
pub fn lstm_backward(
    layer: &LstmLayerParams,
    cache: &LstmCache,
    d_hidden: &[Array2<f64>],
    grads: &mut LstmLayerParams,
) -> Result<Vec<Array2<f64>>, NetError> {
    let t_len = cache.len();
    let (batch, units) = (cache.batch_size(), cache.units());
    if layer.units() != units || layer.input_size() != cache.input_size() {
        return Err(NetError::StaleCache(format!(
            "layer is ({}, {}) but cache was recorded for ({}, {})",
            layer.input_size(),
            layer.units(),
            cache.input_size(),
            units
        )));
    }
    if grads.units() != units || grads.input_size() != layer.input_size() {
        return Err(NetError::shape("gradient buffer", format!("({}, {units})", layer.input_size()), format!("({}, {})", grads.input_size(), grads.units())));
    }
    if d_hidden.len() != t_len {
        return Err(NetError::StaleCache(format!("{} hidden gradients for {} steps", d_hidden.len(), t_len)));
    }
    if let Some((t, d)) = d_hidden.iter().enumerate().find(|(_, d)| d.dim() != (batch, units)) {
        return Err(NetError::shape(format!("hidden gradient at step {t}"), format!("({batch}, {units})"), format!("{:?}", d.dim())));
    }

    let act = cache.activation;
    let n = batch * units;
    let mut dh_next = Array2::<f64>::zeros((batch, units));
    let mut dc_next = vec![0.0; n];
    let mut dz: [Array2<f64>; 4] = std::array::from_fn(|_| Array2::zeros((batch, units)));
    let mut dx_seq = vec![Array2::zeros((0, 0)); t_len];

    for t in (0..t_len).rev() {
        let step = &cache.steps[t];
        let c_prev = if t == 0 { &cache.c0 } else { &cache.steps[t - 1].c };
        let h_prev = if t == 0 { &cache.h0 } else { &cache.hidden[t - 1] };
        {
            let zi = step.z[0].as_slice().expect("standard layout");
            let zf = step.z[1].as_slice().expect("standard layout");
            let zc = step.z[2].as_slice().expect("standard layout");
            let zo = step.z[3].as_slice().expect("standard layout");
            let c = step.c.as_slice().expect("standard layout");
            let cp = c_prev.as_slice().expect("standard layout");
            let dh_up = d_hidden[t].as_standard_layout();
            let dh_up = dh_up.as_slice().expect("standard layout");
            let dhn = dh_next.as_slice().expect("standard layout");
            let [dzi, dzf, dzc, dzo] = &mut dz;
            let dzi = dzi.as_slice_mut().expect("standard layout");
            let dzf = dzf.as_slice_mut().expect("standard layout");
            let dzc = dzc.as_slice_mut().expect("standard layout");
            let dzo = dzo.as_slice_mut().expect("standard layout");
            for k in 0..n {
                let i = sigmoid(zi[k]);
                let f = sigmoid(zf[k]);
                let g = act.apply(zc[k]);
                let o = sigmoid(zo[k]);
                let a = act.apply(c[k]);
                let dh = dh_up[k] + dhn[k];
                dzo[k] = dh * a * o * (1.0 - o);
                let dc = dc_next[k] + dh * o * act.derivative(c[k], a);
                dzi[k] = dc * g * i * (1.0 - i);
                dzc[k] = dc * i * act.derivative(zc[k], g);
                dzf[k] = dc * cp[k] * f * (1.0 - f);
                dc_next[k] = dc * f;
            }
        }

        let mut dx = Array2::zeros((batch, layer.input_size()));
        let mut dh_prev = Array2::zeros((batch, units));
        for ((g, dg), dzk) in layer.gates().into_iter().zip(grads.gates_mut()).zip(dz.iter()) {
            general_mat_mul(1.0, &step.x.t(), dzk, 1.0, &mut dg.w);
            general_mat_mul(1.0, &h_prev.t(), dzk, 1.0, &mut dg.r);
            let db: Array1<f64> = dzk.sum_axis(Axis(0));
            dg.b += &db;
            general_mat_mul(1.0, dzk, &g.w.t(), 1.0, &mut dx);
            general_mat_mul(1.0, dzk, &g.r.t(), 1.0, &mut dh_prev);
        }
        dx_seq[t] = dx;
        dh_next = dh_prev;
    }
    Ok(dx_seq)
}
