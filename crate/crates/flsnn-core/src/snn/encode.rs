//! Bernoulli rate encoding of real-valued inputs into spike trains.

use rand::Rng;

use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

/// Binary spike tensor of shape `[T, batch, features]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpikeBatch<F: Scalar> {
    pub timesteps: usize,
    pub batch: usize,
    pub features: usize,
    data: Vec<F>,
}

impl<F: Scalar> SpikeBatch<F> {
    pub fn zeros(timesteps: usize, batch: usize, features: usize) -> Self {
        SpikeBatch {
            timesteps,
            batch,
            features,
            data: vec![F::zero(); timesteps * batch * features],
        }
    }

    /// Spikes at timestep `t` as a `[batch, features]` view.
    pub fn at(&self, t: usize) -> Tensor<F> {
        let n = self.batch * self.features;
        Tensor::from_vec(&[self.batch, self.features], self.data[t * n..(t + 1) * n].to_vec())
            .expect("spike slice is shape-consistent")
    }

    pub fn set(&mut self, t: usize, b: usize, f: usize, v: F) {
        self.data[(t * self.batch + b) * self.features + f] = v;
    }

    pub fn data(&self) -> &[F] {
        &self.data
    }
}

/// Encode `batch [B, features]` of intensities in [0,1] into independent
/// Bernoulli spike trains over `timesteps` steps.
///
/// The Bernoulli decision compares an `f64` uniform draw against the
/// intensity, so the spike pattern is identical for every scalar type given
/// the same seeded generator.
pub fn rate_encode<F: Scalar>(
    batch: &Tensor<F>,
    timesteps: usize,
    rng: &mut impl Rng,
) -> Result<SpikeBatch<F>> {
    if batch.shape().len() != 2 {
        return Err(Error::shape("rate_encode expects [batch, features]".to_string()));
    }
    let (b, f) = (batch.rows(), batch.cols());
    for (i, v) in batch.data().iter().enumerate() {
        let x = v.to_f64().unwrap_or(f64::NAN);
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::input(format!(
                "rate_encode: intensity {x} at element {i} outside [0,1]"
            )));
        }
    }
    let mut out = SpikeBatch::zeros(timesteps, b, f);
    for t in 0..timesteps {
        for bi in 0..b {
            let row = batch.row(bi);
            for fi in 0..f {
                let p = row[fi].to_f64().unwrap();
                let u: f64 = rng.random();
                if u < p {
                    out.set(t, bi, fi, F::one());
                }
            }
        }
    }
    Ok(out)
}
