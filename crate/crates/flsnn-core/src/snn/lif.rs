//! Leaky integrate-and-fire dynamics and the triangular surrogate gradient.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

/// LIF neuron parameters shared by a whole network.
///
/// `beta == 1` gives the non-leaky IF special case.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct LifConfig<F: Scalar> {
    /// Leak factor in (0, 1].
    pub beta: F,
    /// Firing threshold, strictly positive.
    pub u_thr: F,
    /// Surrogate gradient decay factor, strictly positive.
    pub xi: F,
    /// Simulation length T.
    pub timesteps: usize,
}

impl<F: Scalar> LifConfig<F> {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta > F::zero() && self.beta <= F::one()) {
            return Err(Error::config(format!("lif.beta must be in (0,1], got {}", self.beta)));
        }
        if !(self.u_thr > F::zero()) {
            return Err(Error::config(format!("lif.u_thr must be > 0, got {}", self.u_thr)));
        }
        if !(self.xi > F::zero()) {
            return Err(Error::config(format!("lif.xi must be > 0, got {}", self.xi)));
        }
        if self.timesteps == 0 {
            return Err(Error::config("lif.timesteps must be >= 1".to_string()));
        }
        Ok(())
    }
}

impl<F: Scalar> Default for LifConfig<F> {
    fn default() -> Self {
        LifConfig {
            beta: F::from_f64c(0.95),
            u_thr: F::one(),
            xi: F::from_f64c(0.3),
            timesteps: 25,
        }
    }
}

/// Per-layer recurrent state: membrane potentials and previous-step spikes.
#[derive(Debug, Clone)]
pub struct LifLayerState<F: Scalar> {
    pub membrane: Tensor<F>,
    pub prev_spikes: Tensor<F>,
}

impl<F: Scalar> LifLayerState<F> {
    /// Resting state for `batch` samples of `width` neurons.
    pub fn resting(batch: usize, width: usize) -> Self {
        LifLayerState {
            membrane: Tensor::zeros(&[batch, width]),
            prev_spikes: Tensor::zeros(&[batch, width]),
        }
    }
}

/// One LIF timestep:
/// `U^t = input + beta * U^{t-1} - S^{t-1} * U_thr`, spike iff `U^t > U_thr`.
///
/// `weighted_input` must already be the synaptic sum for each neuron; the
/// matrix-vector product is the caller's job.
pub fn lif_step<F: Scalar>(
    state: &LifLayerState<F>,
    weighted_input: &Tensor<F>,
    cfg: &LifConfig<F>,
) -> Result<(LifLayerState<F>, Tensor<F>)> {
    let (membrane, spikes) = lif_step_mode(state, weighted_input, cfg, false)?;
    Ok((
        LifLayerState {
            membrane,
            prev_spikes: spikes.clone(),
        },
        spikes,
    ))
}

/// Shared spiking/smooth step. In smooth mode the emitted "spike" is the
/// differentiable ramp [`smooth_spike`] of the membrane, and that same value
/// feeds the next step's reset term.
pub(crate) fn lif_step_mode<F: Scalar>(
    state: &LifLayerState<F>,
    weighted_input: &Tensor<F>,
    cfg: &LifConfig<F>,
    smooth: bool,
) -> Result<(Tensor<F>, Tensor<F>)> {
    if !state.membrane.same_shape(weighted_input) || !state.prev_spikes.same_shape(weighted_input) {
        return Err(Error::shape(format!(
            "lif_step: state {:?} vs input {:?}",
            state.membrane.shape(),
            weighted_input.shape()
        )));
    }
    weighted_input.check_finite("lif_step input")?;

    let mut membrane = weighted_input.clone();
    for ((u, &u_prev), &s_prev) in membrane
        .data_mut()
        .iter_mut()
        .zip(state.membrane.data())
        .zip(state.prev_spikes.data())
    {
        *u += cfg.beta * u_prev - s_prev * cfg.u_thr;
    }

    let mut spikes = membrane.clone();
    for s in spikes.data_mut() {
        *s = if smooth {
            smooth_spike(*s, cfg)
        } else if *s > cfg.u_thr {
            F::one()
        } else {
            F::zero()
        };
    }
    Ok((membrane, spikes))
}

/// Triangular surrogate for `dS/dU`: `xi * max(0, 1 - |(u - U_thr) / U_thr|)`.
pub fn surrogate_grad<F: Scalar>(u: F, cfg: &LifConfig<F>) -> F {
    let t = ((u - cfg.u_thr) / cfg.u_thr).abs();
    cfg.xi * (F::one() - t).max(F::zero())
}

/// Exact antiderivative of [`surrogate_grad`]: a piecewise-quadratic ramp
/// from 0 at `u = 0` to `xi * U_thr` at `u = 2 * U_thr`, constant outside.
///
/// Used as a differentiable spike stand-in so finite differences of the
/// smooth forward validate the BPTT machinery.
pub fn smooth_spike<F: Scalar>(u: F, cfg: &LifConfig<F>) -> F {
    let thr = cfg.u_thr;
    let two = F::from_f64c(2.0);
    if u <= F::zero() {
        F::zero()
    } else if u <= thr {
        cfg.xi * u * u / (two * thr)
    } else if u <= two * thr {
        // xi*thr/2 + integral of the falling edge from thr to u
        let half = cfg.xi * thr / two;
        half + cfg.xi * (two * (u - thr) - (u * u - thr * thr) / (two * thr))
    } else {
        cfg.xi * thr
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(beta: f64, u_thr: f64, xi: f64) -> LifConfig<f64> {
        LifConfig { beta, u_thr, xi, timesteps: 1 }
    }

    fn step1(
        beta: f64,
        u_thr: f64,
        u_prev: f64,
        s_prev: f64,
        input: f64,
    ) -> (f64, f64) {
        let state = LifLayerState {
            membrane: Tensor::from_vec(&[1, 1], vec![u_prev]).unwrap(),
            prev_spikes: Tensor::from_vec(&[1, 1], vec![s_prev]).unwrap(),
        };
        let inp = Tensor::from_vec(&[1, 1], vec![input]).unwrap();
        let (state, spikes) = lif_step(&state, &inp, &cfg(beta, u_thr, 0.3)).unwrap();
        (state.membrane.data()[0], spikes.data()[0])
    }

    #[test]
    fn integrates_and_fires() {
        let (u, s) = step1(0.5, 1.0, 0.4, 0.0, 0.9);
        assert_eq!(u, 1.1);
        assert_eq!(s, 1.0);
    }

    #[test]
    fn subtraction_reset_after_spike() {
        let (u, s) = step1(0.5, 1.0, 1.1, 1.0, 0.0);
        assert!((u - (-0.45)).abs() < 1e-15);
        assert_eq!(s, 0.0);
    }

    #[test]
    fn if_case_identity_leak() {
        let (u, s) = step1(1.0, 1.0, 0.3, 0.0, 0.0);
        assert_eq!(u, 0.3);
        assert_eq!(s, 0.0);
    }

    #[test]
    fn no_fire_at_exact_threshold() {
        // Strict inequality: U == U_thr does not fire.
        let (_, s) = step1(1.0, 1.0, 0.0, 0.0, 1.0);
        assert_eq!(s, 0.0);
    }

    #[test]
    fn shape_mismatch_rejected() {
        let state = LifLayerState::<f64>::resting(1, 2);
        let inp = Tensor::zeros(&[1, 3]);
        assert!(lif_step(&state, &inp, &cfg(0.5, 1.0, 0.3)).is_err());
    }

    #[test]
    fn non_finite_input_rejected() {
        let state = LifLayerState::<f64>::resting(1, 1);
        let inp = Tensor::from_vec(&[1, 1], vec![f64::INFINITY]).unwrap();
        assert!(lif_step(&state, &inp, &cfg(0.5, 1.0, 0.3)).is_err());
    }

    #[test]
    fn surrogate_triangle() {
        let c = cfg(0.5, 1.0, 0.3);
        assert_eq!(surrogate_grad(1.0, &c), 0.3); // peak at threshold
        assert_eq!(surrogate_grad(0.0, &c), 0.0); // support edge
        assert_eq!(surrogate_grad(2.0, &c), 0.0); // support edge
        assert!((surrogate_grad(1.5, &c) - 0.15).abs() < 1e-15);
        // symmetry around the threshold
        for d in [0.1, 0.4, 0.9, 1.3] {
            assert!(
                (surrogate_grad(1.0 + d, &c) - surrogate_grad(1.0 - d, &c)).abs() < 1e-15
            );
        }
    }

    #[test]
    fn smooth_spike_matches_surrogate_derivative() {
        // Central differences of the ramp reproduce the triangle.
        let c = cfg(0.5, 1.3, 0.4);
        let h = 1e-6;
        for u in [-0.5, 0.2, 0.9, 1.3, 1.7, 2.5, 3.0] {
            let fd = (smooth_spike(u + h, &c) - smooth_spike(u - h, &c)) / (2.0 * h);
            assert!(
                (fd - surrogate_grad(u, &c)).abs() < 1e-6,
                "u={u}: fd={fd} vs {}",
                surrogate_grad(u, &c)
            );
        }
        // endpoints of the ramp
        assert_eq!(smooth_spike(0.0, &c), 0.0);
        assert!((smooth_spike(2.0 * 1.3, &c) - 0.4 * 1.3).abs() < 1e-15);
        assert!((smooth_spike(10.0, &c) - 0.4 * 1.3).abs() < 1e-15);
    }

    #[test]
    fn leak_decay_non_increasing() {
        let c = cfg(0.8, 1.0, 0.3);
        let mut state = LifLayerState::<f64>::resting(1, 1);
        state.membrane.data_mut()[0] = 0.9;
        let zero = Tensor::zeros(&[1, 1]);
        let mut last = 0.9;
        for _ in 0..20 {
            let (next, _) = lif_step(&state, &zero, &c).unwrap();
            let u = next.membrane.data()[0];
            assert!(u <= last && u >= 0.0);
            last = u;
            state = next;
        }
    }
}
