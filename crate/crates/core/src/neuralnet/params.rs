use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::{ModelConfig, NetError};

/// Weights of one gate: input projection `w` (F_in × U), recurrent
/// projection `r` (U × U) and bias `b` (U).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateParams {
    pub w: Array2<f64>,
    pub r: Array2<f64>,
    pub b: Array1<f64>,
}

impl GateParams {
    pub fn zeros(f_in: usize, units: usize) -> Self {
        Self {
            w: Array2::zeros((f_in, units)),
            r: Array2::zeros((units, units)),
            b: Array1::zeros(units),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmLayerParams {
    pub input: GateParams,
    pub forget: GateParams,
    pub cell: GateParams,
    pub output: GateParams,
}

impl LstmLayerParams {
    pub fn zeros(f_in: usize, units: usize) -> Self {
        Self {
            input: GateParams::zeros(f_in, units),
            forget: GateParams::zeros(f_in, units),
            cell: GateParams::zeros(f_in, units),
            output: GateParams::zeros(f_in, units),
        }
    }

    pub fn input_size(&self) -> usize {
        self.input.w.nrows()
    }

    pub fn units(&self) -> usize {
        self.input.w.ncols()
    }

    /// Gates in storage order: input, forget, cell candidate, output.
    pub fn gates(&self) -> [&GateParams; 4] {
        [&self.input, &self.forget, &self.cell, &self.output]
    }

    pub fn gates_mut(&mut self) -> [&mut GateParams; 4] {
        [&mut self.input, &mut self.forget, &mut self.cell, &mut self.output]
    }

    fn check(&self, f_in: usize, units: usize) -> Result<(), NetError> {
        for g in self.gates() {
            if g.w.dim() != (f_in, units) || g.r.dim() != (units, units) || g.b.len() != units {
                return Err(NetError::shape(
                    "lstm gate",
                    format!("W ({f_in}, {units}), R ({units}, {units}), b ({units})"),
                    format!("W {:?}, R {:?}, b ({})", g.w.dim(), g.r.dim(), g.b.len()),
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseParams {
    /// U × 1
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

/// All trainable weights. Gradients and optimizer moments reuse this type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub layers: Vec<LstmLayerParams>,
    pub dense: DenseParams,
}

impl ModelParams {
    pub fn zeros(config: &ModelConfig) -> Self {
        let u = config.no_units;
        let layers = (0..config.no_layers)
            .map(|i| LstmLayerParams::zeros(if i == 0 { config.no_features } else { u }, u))
            .collect();
        Self {
            layers,
            dense: DenseParams {
                w: Array2::zeros((u, 1)),
                b: Array1::zeros(1),
            },
        }
    }

    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        z.for_each_tensor_mut(|t| t.fill(0.0));
        z
    }

    /// Confirms every tensor has the shape `config` implies.
    pub fn check_shapes(&self, config: &ModelConfig) -> Result<(), NetError> {
        if self.layers.len() != config.no_layers {
            return Err(NetError::shape("layer count", config.no_layers, self.layers.len()));
        }
        let u = config.no_units;
        for (i, layer) in self.layers.iter().enumerate() {
            layer.check(if i == 0 { config.no_features } else { u }, u)?;
        }
        if self.dense.w.dim() != (u, 1) || self.dense.b.len() != 1 {
            return Err(NetError::shape(
                "dense head",
                format!("W ({u}, 1), b (1)"),
                format!("W {:?}, b ({})", self.dense.w.dim(), self.dense.b.len()),
            ));
        }
        Ok(())
    }

    /// Visits tensors in canonical order: per layer W_i, W_f, W_c, W_o,
    /// R_i, R_f, R_c, R_o, b_i, b_f, b_c, b_o; then dense W and b.
    pub fn for_each_tensor(&self, mut f: impl FnMut(&[f64])) {
        for layer in &self.layers {
            for g in layer.gates() {
                f(g.w.as_slice().expect("standard layout"));
            }
            for g in layer.gates() {
                f(g.r.as_slice().expect("standard layout"));
            }
            for g in layer.gates() {
                f(g.b.as_slice().expect("standard layout"));
            }
        }
        f(self.dense.w.as_slice().expect("standard layout"));
        f(self.dense.b.as_slice().expect("standard layout"));
    }

    pub fn for_each_tensor_mut(&mut self, mut f: impl FnMut(&mut [f64])) {
        for layer in &mut self.layers {
            for g in layer.gates_mut() {
                f(g.w.as_slice_mut().expect("standard layout"));
            }
            for g in layer.gates_mut() {
                f(g.r.as_slice_mut().expect("standard layout"));
            }
            for g in layer.gates_mut() {
                f(g.b.as_slice_mut().expect("standard layout"));
            }
        }
        f(self.dense.w.as_slice_mut().expect("standard layout"));
        f(self.dense.b.as_slice_mut().expect("standard layout"));
    }

    /// Mutable tensor views in canonical order.
    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::new();
        for layer in &mut self.layers {
            let [i, f, c, o] = layer.gates_mut();
            let (wi, ri, bi) = split_gate(i);
            let (wf, rf, bf) = split_gate(f);
            let (wc, rc, bc) = split_gate(c);
            let (wo, ro, bo) = split_gate(o);
            out.extend([wi, wf, wc, wo, ri, rf, rc, ro, bi, bf, bc, bo]);
        }
        out.push(self.dense.w.as_slice_mut().expect("standard layout"));
        out.push(self.dense.b.as_slice_mut().expect("standard layout"));
        out
    }

    pub fn tensors(&self) -> Vec<&[f64]> {
        let mut out = Vec::new();
        for layer in &self.layers {
            for g in layer.gates() {
                out.push(g.w.as_slice().expect("standard layout"));
            }
            for g in layer.gates() {
                out.push(g.r.as_slice().expect("standard layout"));
            }
            for g in layer.gates() {
                out.push(g.b.as_slice().expect("standard layout"));
            }
        }
        out.push(self.dense.w.as_slice().expect("standard layout"));
        out.push(self.dense.b.as_slice().expect("standard layout"));
        out
    }

    pub fn parameter_count(&self) -> usize {
        let mut n = 0;
        self.for_each_tensor(|t| n += t.len());
        n
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.parameter_count());
        self.for_each_tensor(|t| v.extend_from_slice(t));
        v
    }

    pub fn all_finite(&self) -> bool {
        let mut ok = true;
        self.for_each_tensor(|t| ok &= t.iter().all(|x| x.is_finite()));
        ok
    }
}

fn split_gate(g: &mut GateParams) -> (&mut [f64], &mut [f64], &mut [f64]) {
    (
        g.w.as_slice_mut().expect("standard layout"),
        g.r.as_slice_mut().expect("standard layout"),
        g.b.as_slice_mut().expect("standard layout"),
    )
}
