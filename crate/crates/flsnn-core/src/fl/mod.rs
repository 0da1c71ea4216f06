//! Federated learning orchestration: parameter vectors, FedAvg, and the
//! sparsified round protocol.

mod engine;
mod params;

pub use engine::{evaluate_model, run_training, ClientState, FlConfig, FlEngine, RoundMetrics};
pub use params::{
    apply_delta, fed_avg, mean_abs_distance, model_delta, DeltaVector, Layout, ParamVector,
};
