//! Convolutional combiner: a bias-free linear branch over the model axis
//! plus a residual branch of 3x3 same-padding sigmoid convolutions, summed
//! into the final h-step forecast. Removing the residual branch collapses
//! the model to a pure linear combination.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Padding, Tape, Tensor, Var};
use crate::core::Matrix;
use crate::error::{Error, Result};

/// What sits on top of the convolutional stack.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CnnHead {
    /// Dense layer from the flattened stack output to h values.
    FullyConnected,
    /// One linear map across the model axis per step; fewer parameters
    /// when the dense head overfits.
    Linear,
    /// No residual branch at all (requires zero conv layers).
    None,
}

impl CnnHead {
    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "fc" | "fully_connected" => Ok(CnnHead::FullyConnected),
            "linear" => Ok(CnnHead::Linear),
            "none" => Ok(CnnHead::None),
            other => Err(Error::Config(format!("unknown cnn head '{other}'"))),
        }
    }
}

/// Architecture of the convolutional combiner. The horizon is baked into
/// the dense head, so one model serves exactly one horizon.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CnnConfig {
    pub horizon: usize,
    pub n_models: usize,
    pub n_conv_layers: usize,
    pub conv_channels: usize,
    pub head: CnnHead,
}

impl CnnConfig {
    pub fn new(horizon: usize, n_models: usize) -> Self {
        CnnConfig {
            horizon,
            n_models,
            n_conv_layers: 4,
            conv_channels: 8,
            head: CnnHead::FullyConnected,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 || self.n_models == 0 {
            return Err(Error::Config(
                "cnn horizon and model count must be positive".into(),
            ));
        }
        if self.head == CnnHead::None && self.n_conv_layers != 0 {
            return Err(Error::Config(
                "a headless cnn must have zero conv layers (collapsed linear model)".into(),
            ));
        }
        if self.head != CnnHead::None && self.conv_channels == 0 {
            return Err(Error::Config("conv_channels must be positive".into()));
        }
        Ok(())
    }

    fn stack_channels(&self) -> usize {
        if self.n_conv_layers == 0 {
            1
        } else {
            self.conv_channels
        }
    }
}

/// Parameters of one convolutional combiner instance.
#[derive(Debug, Clone, PartialEq)]
pub struct CnnModel {
    config: CnnConfig,
    linear_kernel: Tensor,
    conv_kernels: Vec<Tensor>,
    conv_biases: Vec<Tensor>,
    head_weight: Option<Tensor>,
    head_bias: Option<Tensor>,
}

impl CnnModel {
    /// Glorot-uniform kernels, zero biases, deterministic per seed.
    pub fn init(config: CnnConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = config.n_models;
        let linear_kernel = Tensor::glorot_uniform(&[1, m, 1, 1], m, 1, &mut rng);
        let mut conv_kernels = Vec::with_capacity(config.n_conv_layers);
        let mut conv_biases = Vec::with_capacity(config.n_conv_layers);
        for layer in 0..config.n_conv_layers {
            let cin = if layer == 0 { 1 } else { config.conv_channels };
            let cout = config.conv_channels;
            conv_kernels.push(Tensor::glorot_uniform(
                &[3, 3, cin, cout],
                9 * cin,
                9 * cout,
                &mut rng,
            ));
            conv_biases.push(Tensor::zeros(&[cout]));
        }
        let (head_weight, head_bias) = match config.head {
            CnnHead::None => (None, None),
            CnnHead::FullyConnected => {
                let d = config.horizon * m * config.stack_channels();
                (
                    Some(Tensor::glorot_uniform(
                        &[config.horizon, d],
                        d,
                        config.horizon,
                        &mut rng,
                    )),
                    Some(Tensor::zeros(&[config.horizon, 1])),
                )
            }
            CnnHead::Linear => {
                let c = config.stack_channels();
                (
                    Some(Tensor::glorot_uniform(&[1, m, c, 1], m * c, 1, &mut rng)),
                    Some(Tensor::zeros(&[1])),
                )
            }
        };
        Ok(CnnModel {
            config,
            linear_kernel,
            conv_kernels,
            conv_biases,
            head_weight,
            head_bias,
        })
    }

    /// All parameters set to zero; the forward pass then returns zeros.
    pub fn zeroed(config: CnnConfig) -> Result<Self> {
        let mut model = Self::init(config, 0)?;
        for p in model.params_mut() {
            p.data_mut().fill(0.0);
        }
        Ok(model)
    }

    pub fn config(&self) -> &CnnConfig {
        &self.config
    }

    /// Named parameters, in binding order.
    pub fn params(&self) -> Vec<(String, &Tensor)> {
        let mut out = vec![("linear.kernel".to_string(), &self.linear_kernel)];
        for (i, (k, b)) in self.conv_kernels.iter().zip(&self.conv_biases).enumerate() {
            out.push((format!("conv{i}.kernel"), k));
            out.push((format!("conv{i}.bias"), b));
        }
        if let Some(w) = &self.head_weight {
            out.push(("head.weight".to_string(), w));
        }
        if let Some(b) = &self.head_bias {
            out.push(("head.bias".to_string(), b));
        }
        out
    }

    /// Mutable parameters, in the same order as [`CnnModel::params`].
    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out: Vec<&mut Tensor> = vec![&mut self.linear_kernel];
        for (k, b) in self.conv_kernels.iter_mut().zip(self.conv_biases.iter_mut()) {
            out.push(k);
            out.push(b);
        }
        if let Some(w) = &mut self.head_weight {
            out.push(w);
        }
        if let Some(b) = &mut self.head_bias {
            out.push(b);
        }
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
                "cnn expects {} parameter tensors, got {}",
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

    /// Forward pass over bound parameters. Rejects any input whose shape
    /// differs from the configured `horizon x n_models`.
    pub fn forward_bound(&self, tape: &mut Tape, params: &[Var], features: &Matrix) -> Result<Var> {
        if features.rows() != self.config.horizon || features.cols() != self.config.n_models {
            return Err(Error::Shape {
                op: "cnn_forward",
                lhs: vec![features.rows(), features.cols()],
                rhs: vec![self.config.horizon, self.config.n_models],
            });
        }
        let (h, m) = (self.config.horizon, self.config.n_models);
        let input2d = tape.leaf(
            Tensor::new(vec![h, m], features.data().to_vec())?,
            false,
        );
        let input = tape.reshape(input2d, &[h, m, 1])?;

        let mut idx = 0;
        let mut next = || {
            let v = params[idx];
            idx += 1;
            v
        };

        // Linear branch: one weight per base model, no bias.
        let linear_kernel = next();
        let lin3d = tape.conv2d(input, linear_kernel, Padding::Valid)?;
        let linear_out = tape.reshape(lin3d, &[h])?;

        if self.config.head == CnnHead::None {
            return Ok(linear_out);
        }

        let mut stack = input;
        for _ in 0..self.config.n_conv_layers {
            let kernel = next();
            let bias = next();
            let conv = tape.conv2d(stack, kernel, Padding::Same)?;
            let biased = tape.add(conv, bias)?;
            stack = tape.sigmoid(biased);
        }

        let head_out = match self.config.head {
            CnnHead::FullyConnected => {
                let weight = next();
                let bias = next();
                let d = h * m * self.config.stack_channels();
                let flat = tape.reshape(stack, &[d, 1])?;
                let dense = tape.matmul(weight, flat)?;
                let biased = tape.add(dense, bias)?;
                tape.reshape(biased, &[h])?
            }
            CnnHead::Linear => {
                let kernel = next();
                let bias = next();
                let conv = tape.conv2d(stack, kernel, Padding::Valid)?;
                let biased = tape.add(conv, bias)?;
                tape.reshape(biased, &[h])?
            }
            CnnHead::None => unreachable!(),
        };
        tape.add(linear_out, head_out)
    }

    /// Convenience forward pass on a private tape.
    pub fn predict(&self, features: &Matrix) -> Result<Vec<f64>> {
        let mut tape = Tape::new();
        let params = self.bind(&mut tape);
        let out = self.forward_bound(&mut tape, &params, features)?;
        Ok(tape.value(out).data().to_vec())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform_features(h: usize, m: usize, v: f64) -> Matrix {
        Matrix::new(h, m, vec![v; h * m]).unwrap()
    }

    #[test]
    fn init_is_deterministic_per_seed() {
        let config = CnnConfig::new(8, 8);
        let a = CnnModel::init(config, 7).unwrap();
        let b = CnnModel::init(config, 7).unwrap();
        let c = CnnModel::init(config, 8).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn init_magnitudes_are_bounded_by_glorot_limit() {
        let config = CnnConfig::new(8, 8);
        let model = CnnModel::init(config, 3).unwrap();
        let limit = (6.0f64 / 9.0).sqrt();
        for v in model.linear_kernel.data() {
            assert!(v.abs() <= limit);
        }
    }

    #[test]
    fn headless_equal_weights_is_row_mean()
    {
        let config = CnnConfig {
            horizon: 4,
            n_models: 5,
            n_conv_layers: 0,
            conv_channels: 0,
            head: CnnHead::None,
        };
        let mut model = CnnModel::zeroed(config).unwrap();
        model.linear_kernel = Tensor::new(vec![1, 5, 1, 1], vec![0.2; 5]).unwrap();
        let features = Matrix::new(
            4,
            5,
            (0..20).map(|i| i as f64).collect(),
        )
        .unwrap();
        let out = model.predict(&features).unwrap();
        for (i, &v) in out.iter().enumerate() {
            let want: f64 = features.row(i).iter().sum::<f64>() / 5.0;
            assert!((v - want).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_parameters_give_zero_output() {
        let model = CnnModel::zeroed(CnnConfig::new(8, 8)).unwrap();
        let out = model.predict(&uniform_features(8, 8, 3.7)).unwrap();
        assert!(out.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn zero_input_headless_gives_zero_output() {
        let config = CnnConfig {
            horizon: 6,
            n_models: 8,
            n_conv_layers: 0,
            conv_channels: 0,
            head: CnnHead::None,
        };
        let model = CnnModel::init(config, 42).unwrap();
        let out = model.predict(&uniform_features(6, 8, 0.0)).unwrap();
        assert!(out.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn horizon_rigidity_rejects_other_shapes() {
        let model = CnnModel::init(CnnConfig::new(8, 8), 1).unwrap();
        assert!(model.predict(&uniform_features(6, 8, 1.0)).is_err());
        assert!(model.predict(&uniform_features(8, 7, 1.0)).is_err());
    }

    #[test]
    fn collapsed_model_is_exactly_linear() {
        let config = CnnConfig {
            horizon: 8,
            n_models: 8,
            n_conv_layers: 0,
            conv_channels: 0,
            head: CnnHead::None,
        };
        let model = CnnModel::init(config, 5).unwrap();
        let x = Matrix::new(8, 8, (0..64).map(|i| (i as f64).sin()).collect()).unwrap();
        let y = Matrix::new(8, 8, (0..64).map(|i| (i as f64 * 0.3).cos()).collect()).unwrap();
        let (alpha, beta) = (1.7, -0.4);
        let mixed = Matrix::new(
            8,
            8,
            x.data()
                .iter()
                .zip(y.data())
                .map(|(a, b)| alpha * a + beta * b)
                .collect(),
        )
        .unwrap();
        let fx = model.predict(&x).unwrap();
        let fy = model.predict(&y).unwrap();
        let fmix = model.predict(&mixed).unwrap();
        for i in 0..8 {
            let want = alpha * fx[i] + beta * fy[i];
            assert!((fmix[i] - want).abs() < 1e-12);
        }
    }

    #[test]
    fn validate_rejects_headless_with_layers() {
        let config = CnnConfig {
            horizon: 8,
            n_models: 8,
            n_conv_layers: 2,
            conv_channels: 4,
            head: CnnHead::None,
        };
        assert!(config.validate().is_err());
    }

    #[test]
    fn linear_head_shape_works() {
        let config = CnnConfig {
            horizon: 8,
            n_models: 8,
            n_conv_layers: 2,
            conv_channels: 4,
            head: CnnHead::Linear,
        };
        let model = CnnModel::init(config, 9).unwrap();
        let out = model.predict(&uniform_features(8, 8, 0.5)).unwrap();
        assert_eq!(out.len(), 8);
        assert!(out.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn both_branches_receive_gradient() {
        let config = CnnConfig::new(4, 3);
        let model = CnnModel::init(config, 2).unwrap();
        let features = Matrix::new(4, 3, (0..12).map(|i| 0.1 * i as f64).collect()).unwrap();
        let label = Tensor::vector(&[0.4, -0.2, 0.9, 0.0]);
        let mut tape = Tape::new();
        let params = model.bind(&mut tape);
        let out = model.forward_bound(&mut tape, &params, &features).unwrap();
        let target = tape.leaf(label, false);
        let diff = tape.sub(out, target).unwrap();
        let absd = tape.abs(diff);
        let loss = tape.mean(absd);
        let grads = tape.backward(loss).unwrap();
        let names: Vec<String> = model.params().into_iter().map(|(n, _)| n).collect();
        for (var, name) in params.iter().zip(&names) {
            if name.ends_with("bias") {
                continue;
            }
            let g = grads.get(*var).unwrap_or_else(|| panic!("no grad for {name}"));
            assert!(
                g.data().iter().any(|&v| v != 0.0),
                "dead branch: {name} has all-zero gradient"
            );
        }
    }
}
