//! Recurrent combiner: an LSTM consumes the M base forecasts one step at
//! a time and a linear readout turns each hidden state into that step's
//! forecast. Nothing in the structure depends on the horizon, so one
//! trained model unrolls to any sequence length.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Tensor, Var};
use crate::core::Matrix;
use crate::error::{Error, Result};

/// Architecture of the recurrent combiner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RnnConfig {
    pub n_models: usize,
    /// Cell-state dimension.
    pub state_size: usize,
    /// Read the raw cell state instead of the gated hidden state.
    #[serde(default)]
    pub readout_from_cell: bool,
}

impl RnnConfig {
    pub fn new(n_models: usize, state_size: usize) -> Self {
        RnnConfig {
            n_models,
            state_size,
            readout_from_cell: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_models == 0 || self.state_size == 0 {
            return Err(Error::Config(
                "rnn model count and state size must be positive".into(),
            ));
        }
        Ok(())
    }
}

const GATES: [&str; 4] = ["input", "forget", "output", "candidate"];

/// Parameters of one recurrent combiner instance: four gate weight
/// matrices of shape `state x (models + state)` with bias vectors, plus
/// the scalar readout.
#[derive(Debug, Clone, PartialEq)]
pub struct RnnModel {
    config: RnnConfig,
    gate_weights: Vec<Tensor>,
    gate_biases: Vec<Tensor>,
    readout_weight: Tensor,
    readout_bias: Tensor,
}

impl RnnModel {
    /// Glorot-uniform weights; biases zero except the forget gate, which
    /// starts at 1 so early training does not erase the cell state.
    pub fn init(config: RnnConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = config.state_size;
        let d = config.n_models + s;
        let gate_weights: Vec<Tensor> = (0..4)
            .map(|_| Tensor::glorot_uniform(&[s, d], d, s, &mut rng))
            .collect();
        let mut gate_biases: Vec<Tensor> = (0..4).map(|_| Tensor::zeros(&[s, 1])).collect();
        gate_biases[1].data_mut().fill(1.0);
        let readout_weight = Tensor::glorot_uniform(&[1, s], s, 1, &mut rng);
        let readout_bias = Tensor::zeros(&[1, 1]);
        Ok(RnnModel {
            config,
            gate_weights,
            gate_biases,
            readout_weight,
            readout_bias,
        })
    }

    /// All parameters zero: gates open halfway, the cell stays at zero and
    /// every output is exactly zero.
    pub fn zeroed(config: RnnConfig) -> Result<Self> {
        let mut model = Self::init(config, 0)?;
        for p in model.params_mut() {
            p.data_mut().fill(0.0);
        }
        Ok(model)
    }

    pub fn config(&self) -> &RnnConfig {
        &self.config
    }

    /// Named parameters, in binding order.
    pub fn params(&self) -> Vec<(String, &Tensor)> {
        let mut out = Vec::with_capacity(10);
        for (g, name) in GATES.iter().enumerate() {
            out.push((format!("{name}.weight"), &self.gate_weights[g]));
            out.push((format!("{name}.bias"), &self.gate_biases[g]));
        }
        out.push(("readout.weight".to_string(), &self.readout_weight));
        out.push(("readout.bias".to_string(), &self.readout_bias));
        out
    }

    /// Mutable parameters, in the same order as [`RnnModel::params`].
    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out: Vec<&mut Tensor> = Vec::with_capacity(10);
        for (w, b) in self.gate_weights.iter_mut().zip(self.gate_biases.iter_mut()) {
            out.push(w);
            out.push(b);
        }
        out.push(&mut self.readout_weight);
        out.push(&mut self.readout_bias);
        out
    }

    /// Replaces parameters from named tensors (deserialization).
    pub fn load_params(&mut self, tensors: &[(String, Tensor)]) -> Result<()> {
        let expected: Vec<(String, Vec<usize>)> = self
            .params()
            .iter()
            .map(|(n, t)| (n.clone(), t.shape().to_vec()))
            .collect();
        if tensors.len() != expected.len() {
            return Err(Error::Data(format!(
                "rnn expects {} parameter tensors, got {}",
                expected.len(),
                tensors.len()
            )));
        }
        for ((name, tensor), (want_name, want_shape)) in tensors.iter().zip(&expected) {
            if name != want_name || tensor.shape() != &want_shape[..] {
                return Err(Error::Data(format!(
                    "unexpected parameter {name} {:?}, wanted {want_name} {want_shape:?}",
                    tensor.shape()
                )));
            }
        }
        for (slot, (_, tensor)) in self.params_mut().into_iter().zip(tensors) {
            *slot = tensor.clone();
        }
        Ok(())
    }

    /// Inserts every parameter as a grad-requiring leaf.
    pub fn bind(&self, tape: &mut Tape) -> Vec<Var> {
        self.params()
            .into_iter()
            .map(|(_, t)| tape.leaf(t.clone(), true))
            .collect()
    }

    /// Unrolls the cell over however many rows the features have; only the
    /// model count is fixed. Both states start at zero.
    pub fn forward_bound(&self, tape: &mut Tape, params: &[Var], features: &Matrix) -> Result<Var> {
        if features.cols() != self.config.n_models || features.rows() == 0 {
            return Err(Error::Shape {
                op: "rnn_forward",
                lhs: vec![features.rows(), features.cols()],
                rhs: vec![0, self.config.n_models],
            });
        }
        let (h, m) = (features.rows(), features.cols());
        let s = self.config.state_size;
        let x = tape.leaf(Tensor::new(vec![h, m], features.data().to_vec())?, false);

        let (w_i, b_i) = (params[0], params[1]);
        let (w_f, b_f) = (params[2], params[3]);
        let (w_o, b_o) = (params[4], params[5]);
        let (w_c, b_c) = (params[6], params[7]);
        let (w_r, b_r) = (params[8], params[9]);

        let mut hidden = tape.leaf(Tensor::zeros(&[s, 1]), false);
        let mut cell = tape.leaf(Tensor::zeros(&[s, 1]), false);
        let mut outputs = Vec::with_capacity(h);
        for step in 0..h {
            let row = tape.slice_rows(x, step, 1)?;
            let col = tape.reshape(row, &[m, 1])?;
            let z = tape.concat(&[col, hidden])?;

            let gate = |tape: &mut Tape, w: Var, b: Var| -> Result<Var> {
                let lin = tape.matmul(w, z)?;
                tape.add(lin, b)
            };
            let pre_i = gate(tape, w_i, b_i)?;
            let pre_f = gate(tape, w_f, b_f)?;
            let pre_o = gate(tape, w_o, b_o)?;
            let pre_c = gate(tape, w_c, b_c)?;
            let gate_i = tape.sigmoid(pre_i);
            let gate_f = tape.sigmoid(pre_f);
            let gate_o = tape.sigmoid(pre_o);
            let cand = tape.tanh(pre_c);

            let keep = tape.mul(gate_f, cell)?;
            let write = tape.mul(gate_i, cand)?;
            cell = tape.add(keep, write)?;
            let squashed = tape.tanh(cell);
            hidden = tape.mul(gate_o, squashed)?;

            let source = if self.config.readout_from_cell {
                cell
            } else {
                hidden
            };
            let lin = tape.matmul(w_r, source)?;
            let out = tape.add(lin, b_r)?;
            outputs.push(out);
        }
        let stacked = tape.concat(&outputs)?;
        tape.reshape(stacked, &[h])
    }

    /// Convenience forward pass on a private tape; accepts any horizon.
    pub fn predict(&self, features: &Matrix) -> Result<Vec<f64>> {
        let mut tape = Tape::new();
        let params = self.bind(&mut tape);
        let out = self.forward_bound(&mut tape, &params, features)?;
        Ok(tape.value(out).data().to_vec())
    }
}
