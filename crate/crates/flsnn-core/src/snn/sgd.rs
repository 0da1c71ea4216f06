//! Momentum SGD with a weight-decay term added to the gradient.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::snn::network::{GradAccumulator, Network};
use crate::tensor::{Scalar, Tensor};

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SgdConfig<F: Scalar> {
    pub learning_rate: F,
    pub momentum: F,
    pub weight_decay: F,
}

impl<F: Scalar> SgdConfig<F> {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > F::zero()) {
            return Err(Error::config(format!(
                "optim.learning_rate must be > 0, got {}",
                self.learning_rate
            )));
        }
        if !(self.momentum >= F::zero() && self.momentum < F::one()) {
            return Err(Error::config(format!(
                "optim.momentum must be in [0,1), got {}",
                self.momentum
            )));
        }
        if !(self.weight_decay >= F::zero()) {
            return Err(Error::config(format!(
                "optim.weight_decay must be >= 0, got {}",
                self.weight_decay
            )));
        }
        Ok(())
    }
}

/// Per-layer momentum buffers.
#[derive(Debug, Clone)]
pub struct SgdState<F: Scalar> {
    pub buffers: Vec<Tensor<F>>,
}

impl<F: Scalar> SgdState<F> {
    pub fn zeros_like(net: &Network<F>) -> Self {
        SgdState {
            buffers: net.layers.iter().map(|l| Tensor::zeros(l.shape())).collect(),
        }
    }
}

/// `buffer <- momentum * buffer + grad + weight_decay * param;`
/// `param  <- param - lr * buffer`
pub fn sgd_step<F: Scalar>(
    net: &mut Network<F>,
    grads: &GradAccumulator<F>,
    state: &mut SgdState<F>,
    cfg: &SgdConfig<F>,
) -> Result<()> {
    if grads.layers.len() != net.layers.len() || state.buffers.len() != net.layers.len() {
        return Err(Error::shape("sgd_step: layer count mismatch".to_string()));
    }
    for ((param, grad), buf) in net
        .layers
        .iter_mut()
        .zip(&grads.layers)
        .zip(&mut state.buffers)
    {
        if !param.same_shape(grad) || !param.same_shape(buf) {
            return Err(Error::shape("sgd_step: shape mismatch".to_string()));
        }
        for ((p, &g), b) in param
            .data_mut()
            .iter_mut()
            .zip(grad.data())
            .zip(buf.data_mut())
        {
            *b = cfg.momentum * *b + g + cfg.weight_decay * *p;
            *p -= cfg.learning_rate * *b;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::snn::lif::LifConfig;
    use crate::snn::network::NetworkKind;

    fn net_with(params: Vec<f64>) -> Network<f64> {
        Network {
            kind: NetworkKind::Ann,
            layers: vec![Tensor::from_vec(&[1, params.len()], params).unwrap()],
            lif: LifConfig::default(),
        }
    }

    fn grads_of(net: &Network<f64>, g: f64) -> GradAccumulator<f64> {
        let mut ga = GradAccumulator::zeros_like(net);
        for v in ga.layers[0].data_mut() {
            *v = g;
        }
        ga
    }

    #[test]
    fn plain_gradient_step() {
        let mut net = net_with(vec![1.0, 2.0]);
        let g = grads_of(&net, 0.25);
        let mut st = SgdState::zeros_like(&net);
        let cfg = SgdConfig { learning_rate: 1.0, momentum: 0.0, weight_decay: 0.0 };
        sgd_step(&mut net, &g, &mut st, &cfg).unwrap();
        assert_eq!(net.layers[0].data(), &[0.75, 1.75]);
    }

    #[test]
    fn zero_grad_is_fixed_point() {
        let mut net = net_with(vec![0.5, -0.5]);
        let g = grads_of(&net, 0.0);
        let mut st = SgdState::zeros_like(&net);
        let cfg = SgdConfig { learning_rate: 0.1, momentum: 0.9, weight_decay: 0.0 };
        sgd_step(&mut net, &g, &mut st, &cfg).unwrap();
        assert_eq!(net.layers[0].data(), &[0.5, -0.5]);
    }

    #[test]
    fn momentum_two_step_recurrence() {
        // Constant grad g, lr=1, momentum=0.95:
        // step1 moves -g, step2 moves -(0.95+1)g; total -(1 + 1.95)g.
        let g0 = 0.2;
        let mut net = net_with(vec![1.0]);
        let g = grads_of(&net, g0);
        let mut st = SgdState::zeros_like(&net);
        let cfg = SgdConfig { learning_rate: 1.0, momentum: 0.95, weight_decay: 0.0 };
        sgd_step(&mut net, &g, &mut st, &cfg).unwrap();
        sgd_step(&mut net, &g, &mut st, &cfg).unwrap();
        assert!((net.layers[0].data()[0] - (1.0 - 2.95 * g0)).abs() < 1e-12);
    }

    #[test]
    fn weight_decay_enters_buffer() {
        let mut net = net_with(vec![2.0]);
        let g = grads_of(&net, 0.0);
        let mut st = SgdState::zeros_like(&net);
        let cfg = SgdConfig { learning_rate: 0.5, momentum: 0.0, weight_decay: 0.1 };
        sgd_step(&mut net, &g, &mut st, &cfg).unwrap();
        // buffer = 0.1*2.0 = 0.2; param = 2.0 - 0.5*0.2
        assert!((net.layers[0].data()[0] - 1.9).abs() < 1e-12);
    }
}
