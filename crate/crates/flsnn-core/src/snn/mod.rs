//! Dense spiking and conventional networks: LIF dynamics, rate encoding,
//! forward simulation over T timesteps, surrogate-gradient BPTT, and SGD.

mod ann;
mod encode;
mod lif;
mod loss;
mod network;
mod sgd;

pub use ann::ann_forward_backward;
pub use encode::{rate_encode, SpikeBatch};
pub use lif::{lif_step, smooth_spike, surrogate_grad, LifConfig, LifLayerState};
pub use loss::{accuracy, cross_entropy_loss};
pub use network::{
    backward, forward, forward_mode, GradAccumulator, Network, NetworkKind, SpikeMode, Trace,
};
pub use sgd::{sgd_step, SgdConfig, SgdState};
