//! Dense ReLU reference network: forward, cross-entropy, exact backprop.

use crate::error::{Error, Result};
use crate::snn::loss::{accuracy, cross_entropy_loss};
use crate::snn::network::{GradAccumulator, Network, NetworkKind};
use crate::tensor::{matmul_nn, matmul_nt, outer_acc, Scalar, Tensor};

/// One forward/backward pass of the ANN: hidden layers are dense + ReLU,
/// the last layer is linear logits.
pub fn ann_forward_backward<F: Scalar>(
    net: &Network<F>,
    batch: &Tensor<F>,
    labels: &[usize],
) -> Result<(F, f64, GradAccumulator<F>)> {
    if net.kind != NetworkKind::Ann {
        return Err(Error::input("ann_forward_backward is for ANN networks".to_string()));
    }
    net.validate()?;
    if batch.cols() != net.input_width() {
        return Err(Error::shape(format!(
            "input features {} != first layer in width {}",
            batch.cols(),
            net.input_width()
        )));
    }
    let n = net.layers.len();
    // activations[k] is the input to layer k; the last entry is the logits.
    let mut activations: Vec<Tensor<F>> = Vec::with_capacity(n + 1);
    activations.push(batch.clone());
    for (k, layer) in net.layers.iter().enumerate() {
        let mut z = matmul_nt(activations.last().unwrap(), layer);
        if k + 1 < n {
            for v in z.data_mut() {
                *v = v.max(F::zero());
            }
        }
        activations.push(z);
    }
    let logits = activations.last().unwrap();
    logits.check_finite("ann logits")?;
    let acc = accuracy(logits, labels);
    let (loss, mut grad) = cross_entropy_loss(logits, labels)?;

    let mut grads = GradAccumulator::zeros_like(net);
    for k in (0..n).rev() {
        outer_acc(&grad, &activations[k], &mut grads.layers[k]);
        if k > 0 {
            let mut prev = matmul_nn(&grad, &net.layers[k]);
            // ReLU gate of the layer below
            for (g, &a) in prev.data_mut().iter_mut().zip(activations[k].data()) {
                if a <= F::zero() {
                    *g = F::zero();
                }
            }
            grad = prev;
        }
    }
    Ok((loss, acc, grads))
}
