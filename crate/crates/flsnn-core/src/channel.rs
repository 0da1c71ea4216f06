//! Noisy links: i.i.d. Gaussian perturbation of transmitted parameter
//! values, with absolute or relative noise strength.
//!
//! Gaussian draws are `f64` samples from `rand_distr::Normal` (Ziggurat)
//! over a per-link ChaCha8 stream, so a link's noise depends only on its
//! derived seed.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::compression::SparseUpdate;
use crate::error::{Error, Result};
use crate::fl::ParamVector;
use crate::tensor::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "mode")]
pub enum ChannelConfig {
    Noiseless,
    /// Fixed noise strength σ per round.
    Absolute { sigma: f64 },
    /// σ_r = σ̂ × mean |w| over the transmitted values.
    Relative { sigma: f64 },
}

impl ChannelConfig {
    pub fn validate(&self) -> Result<()> {
        match *self {
            ChannelConfig::Noiseless => Ok(()),
            ChannelConfig::Absolute { sigma } | ChannelConfig::Relative { sigma } => {
                if sigma >= 0.0 {
                    Ok(())
                } else {
                    Err(Error::config(format!("channel.sigma must be >= 0, got {sigma}")))
                }
            }
        }
    }

    pub fn is_noiseless(&self) -> bool {
        matches!(self, ChannelConfig::Noiseless)
            || matches!(
                self,
                ChannelConfig::Absolute { sigma: 0.0 } | ChannelConfig::Relative { sigma: 0.0 }
            )
    }
}

/// Noise strength for one transfer of `transmitted_values`.
pub fn effective_sigma<F: Scalar>(cfg: &ChannelConfig, transmitted_values: &[F]) -> Result<f64> {
    match *cfg {
        ChannelConfig::Noiseless => Ok(0.0),
        ChannelConfig::Absolute { sigma } => Ok(sigma),
        ChannelConfig::Relative { sigma } => {
            if transmitted_values.is_empty() {
                return Err(Error::input(
                    "relative noise needs a non-empty transmitted set".to_string(),
                ));
            }
            let mean_abs = transmitted_values
                .iter()
                .map(|v| v.abs().to_f64().unwrap())
                .sum::<f64>()
                / transmitted_values.len() as f64;
            Ok(sigma * mean_abs)
        }
    }
}

/// Add an independent `N(0, sigma)` draw to each value. `sigma = 0` is the
/// identity and consumes no randomness.
pub fn perturb<F: Scalar>(values: &mut [F], sigma: f64, rng: &mut impl Rng) {
    if sigma == 0.0 {
        return;
    }
    let normal = Normal::new(0.0, sigma).expect("sigma validated non-negative");
    for v in values.iter_mut() {
        *v += F::from_f64c(normal.sample(rng));
    }
}

/// Transfer a sparse payload through the channel: σ_r is computed over the
/// payload's values, only the values are perturbed, indices and metadata
/// stay untouched.
pub fn transmit_sparse<F: Scalar>(
    upd: &mut SparseUpdate<F>,
    cfg: &ChannelConfig,
    rng: &mut impl Rng,
) -> Result<f64> {
    let values: Vec<F> = upd.values().collect();
    let sigma = effective_sigma(cfg, &values)?;
    if sigma > 0.0 {
        let normal = Normal::new(0.0, sigma).expect("sigma non-negative");
        for (_, v) in &mut upd.entries {
            *v += F::from_f64c(normal.sample(rng));
        }
    }
    Ok(sigma)
}

/// Transfer a dense parameter vector through the channel.
pub fn transmit_dense<F: Scalar>(
    params: &mut ParamVector<F>,
    cfg: &ChannelConfig,
    rng: &mut impl Rng,
) -> Result<f64> {
    let sigma = effective_sigma(cfg, &params.values)?;
    perturb(&mut params.values, sigma, rng);
    Ok(sigma)
}
