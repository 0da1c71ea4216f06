//! Experiment runner: training runs, parameter sweeps, bandwidth tables and
//! SVG line charts on top of `flsnn-core`.

pub mod plot;
pub mod report;
pub mod run;
pub mod sweep;

use std::path::PathBuf;

/// Default output root: `$FLSNN_OUT_ROOT`, falling back to `./runs`.
pub fn output_root() -> PathBuf {
    std::env::var_os("FLSNN_OUT_ROOT")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("runs"))
}
