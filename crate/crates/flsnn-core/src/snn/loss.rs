//! Categorical cross-entropy over softmax logits.

use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

/// Mean negative log-likelihood over the batch, plus `d(loss)/d(logits)`.
pub fn cross_entropy_loss<F: Scalar>(
    logits: &Tensor<F>,
    labels: &[usize],
) -> Result<(F, Tensor<F>)> {
    let (batch, classes) = (logits.rows(), logits.cols());
    if labels.len() != batch {
        return Err(Error::shape(format!(
            "{} labels for batch of {batch}",
            labels.len()
        )));
    }
    let inv_b = F::one() / F::from_usize(batch).unwrap();
    let mut grad = Tensor::zeros(&[batch, classes]);
    let mut loss = F::zero();
    for b in 0..batch {
        let y = labels[b];
        if y >= classes {
            return Err(Error::input(format!("label {y} out of range [0,{classes})")));
        }
        let row = logits.row(b);
        // stabilized softmax
        let max = row.iter().copied().fold(F::neg_infinity(), F::max);
        let mut denom = F::zero();
        for &v in row {
            denom += (v - max).exp();
        }
        let log_denom = denom.ln();
        loss += -(row[y] - max - log_denom);
        let g = grad.row_mut(b);
        for (c, &v) in row.iter().enumerate() {
            let p = (v - max).exp() / denom;
            g[c] = (p - if c == y { F::one() } else { F::zero() }) * inv_b;
        }
    }
    Ok((loss * inv_b, grad))
}

/// Fraction of rows whose argmax equals the label.
pub fn accuracy<F: Scalar>(logits: &Tensor<F>, labels: &[usize]) -> f64 {
    let mut hits = 0usize;
    for b in 0..logits.rows() {
        let row = logits.row(b);
        let mut best = 0usize;
        for (c, &v) in row.iter().enumerate() {
            if v > row[best] {
                best = c;
            }
        }
        if best == labels[b] {
            hits += 1;
        }
    }
    hits as f64 / logits.rows().max(1) as f64
}
