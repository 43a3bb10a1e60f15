//! Adam optimizer over flat parameter lists.

use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Adam hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamHyper {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamHyper {
    fn default() -> Self {
        AdamHyper {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First/second moment estimates, one pair per parameter tensor.
#[derive(Debug, Clone)]
pub struct AdamState {
    m: Vec<Tensor>,
    v: Vec<Tensor>,
    step: u64,
}

impl AdamState {
    pub fn new(params: &[&Tensor]) -> Self {
        AdamState {
            m: params.iter().map(|p| Tensor::zeros(p.shape())).collect(),
            v: params.iter().map(|p| Tensor::zeros(p.shape())).collect(),
            step: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }
}

/// One Adam update. A `None` gradient is treated as zero (moments decay,
/// parameters still move along the remembered momentum).
pub fn adam_step(
    params: &mut [&mut Tensor],
    grads: &[Option<&Tensor>],
    state: &mut AdamState,
    hyper: &AdamHyper,
) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.m.len() {
        return Err(Error::Data(format!(
            "adam: {} params, {} grads, {} states",
            params.len(),
            grads.len(),
            state.m.len()
        )));
    }
    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - hyper.beta1.powi(t);
    let bc2 = 1.0 - hyper.beta2.powi(t);
    for (k, p) in params.iter_mut().enumerate() {
        if let Some(g) = grads[k] {
            if g.shape() != p.shape() {
                return Err(Error::Shape {
                    op: "adam_step",
                    lhs: p.shape().to_vec(),
                    rhs: g.shape().to_vec(),
                });
            }
        }
        let m = state.m[k].data_mut();
        let v = state.v[k].data_mut();
        let pd = p.data_mut();
        for i in 0..pd.len() {
            let gi = grads[k].map_or(0.0, |g| g.data()[i]);
            m[i] = hyper.beta1 * m[i] + (1.0 - hyper.beta1) * gi;
            v[i] = hyper.beta2 * v[i] + (1.0 - hyper.beta2) * gi * gi;
            let m_hat = m[i] / bc1;
            let v_hat = v[i] / bc2;
            pd[i] -= hyper.lr * m_hat / (v_hat.sqrt() + hyper.eps);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_from_fresh_state_leaves_params() {
        let mut p = Tensor::vector(&[1.0, -2.0]);
        let mut state = AdamState::new(&[&p]);
        let zero = Tensor::zeros(&[2]);
        adam_step(
            &mut [&mut p],
            &[Some(&zero)],
            &mut state,
            &AdamHyper::default(),
        )
        .unwrap();
        assert_eq!(p.data(), &[1.0, -2.0]);
    }

    #[test]
    fn first_step_matches_closed_form() {
        // With zero state, step 1 moves by lr * g / (|g| + eps).
        let hyper = AdamHyper::default();
        let g = 0.37;
        let mut p = Tensor::scalar(2.0);
        let mut state = AdamState::new(&[&p]);
        let grad = Tensor::scalar(g);
        adam_step(&mut [&mut p], &[Some(&grad)], &mut state, &hyper).unwrap();
        let expected = 2.0 - hyper.lr * g / (g.abs() + hyper.eps);
        assert!((p.data()[0] - expected).abs() < 1e-15);
    }

    #[test]
    fn constant_gradient_matches_scalar_simulation() {
        // Independent scalar re-simulation of the update recurrence.
        let hyper = AdamHyper {
            lr: 0.01,
            ..AdamHyper::default()
        };
        let g = -1.5;
        let mut p = Tensor::scalar(0.0);
        let mut state = AdamState::new(&[&p]);
        let grad = Tensor::scalar(g);

        let (mut m, mut v, mut x) = (0.0f64, 0.0f64, 0.0f64);
        for t in 1..=200 {
            adam_step(&mut [&mut p], &[Some(&grad)], &mut state, &hyper).unwrap();
            m = hyper.beta1 * m + (1.0 - hyper.beta1) * g;
            v = hyper.beta2 * v + (1.0 - hyper.beta2) * g * g;
            let m_hat = m / (1.0 - hyper.beta1.powi(t));
            let v_hat = v / (1.0 - hyper.beta2.powi(t));
            x -= hyper.lr * m_hat / (v_hat.sqrt() + hyper.eps);
            assert!((p.data()[0] - x).abs() < 1e-12, "diverged at step {t}");
        }
        // Constant gradient drives a steady step of roughly lr, opposing g.
        assert!((x - 200.0 * hyper.lr).abs() < 0.05);
    }

    #[test]
    fn missing_gradient_decays_moments() {
        let hyper = AdamHyper::default();
        let mut p = Tensor::scalar(0.0);
        let mut state = AdamState::new(&[&p]);
        let grad = Tensor::scalar(1.0);
        adam_step(&mut [&mut p], &[Some(&grad)], &mut state, &hyper).unwrap();
        let after_one = p.data()[0];
        adam_step(&mut [&mut p], &[None], &mut state, &hyper).unwrap();
        // Momentum keeps moving the parameter in the same direction.
        assert!(p.data()[0] < after_one);
        assert!(state.step_count() == 2);
    }
}
