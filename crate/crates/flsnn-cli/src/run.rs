//! `train`: execute one configured run and persist its artifacts.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use flsnn_core::config::ExperimentConfig;
use flsnn_core::error::{Error, Result};
use flsnn_core::fl::{run_training, RoundMetrics};

use crate::output_root;

/// Sidecar metadata written next to `metrics.csv`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub label: String,
    pub seed: u64,
    pub config_sha256: String,
    pub rounds: usize,
    pub highest_acc: f64,
    pub final_acc: f64,
    pub cum_frac_incl: f64,
    pub cum_frac_excl: f64,
}

impl RunManifest {
    pub fn load(run_dir: &Path) -> Result<RunManifest> {
        let text = fs::read_to_string(run_dir.join("manifest.json"))?;
        serde_json::from_str(&text).map_err(|e| Error::Format(e.to_string()))
    }
}

/// Short human label for legends and report columns.
pub fn run_label(cfg: &ExperimentConfig) -> String {
    let comp = match cfg.compression.mode.as_str() {
        "none" => "dense".to_string(),
        "fixed" => format!("k={}", cfg.compression.kappa),
        "linear" => format!("lin {}->{}", cfg.compression.alpha, cfg.compression.omega),
        "exponential" => format!("exp {}->{}", cfg.compression.alpha, cfg.compression.omega),
        other => other.to_string(),
    };
    let mut label = format!("{:?} {comp}", cfg.model.kind).to_lowercase();
    if cfg.channel.mode != "noiseless" {
        label.push_str(&format!(" {} s={}", cfg.channel.mode, cfg.channel.sigma));
    }
    label
}

pub fn config_hash(cfg: &ExperimentConfig) -> String {
    let canonical = toml::to_string(cfg).expect("config serializes");
    let digest = Sha256::digest(canonical.as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Where a run's artifacts go: explicit `--out`, then the config's `output`
/// key, then `<root>/run-<hash8>-s<seed>` under the default root.
pub fn resolve_run_dir(cfg: &ExperimentConfig, out: Option<&Path>) -> PathBuf {
    if let Some(dir) = out {
        return dir.to_path_buf();
    }
    if let Some(dir) = &cfg.output {
        return dir.clone();
    }
    let hash = config_hash(cfg);
    output_root().join(format!("run-{}-s{}", &hash[..8], cfg.seed))
}

pub fn write_metrics_csv(path: &Path, metrics: &[RoundMetrics]) -> Result<()> {
    let mut f = fs::File::create(path)?;
    writeln!(f, "{}", RoundMetrics::CSV_HEADER)?;
    for m in metrics {
        writeln!(f, "{}", m.csv_row())?;
    }
    Ok(())
}

/// Execute a run from an already-parsed config; returns the run directory
/// and the metrics series. Artifacts: `metrics.csv`, `model.bin` (u64 LE
/// parameter count, then f64 LE values), `manifest.json`, `config.toml`.
pub fn train_config(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<(PathBuf, Vec<RoundMetrics>)> {
    let run_dir = resolve_run_dir(cfg, out);
    fs::create_dir_all(&run_dir)?;

    let fl_cfg = cfg.to_fl_config()?;
    let (train, test) = cfg.load_data()?;
    let (metrics, model) = run_training(fl_cfg, train, test)?;

    write_metrics_csv(&run_dir.join("metrics.csv"), &metrics)?;

    let mut f = fs::File::create(run_dir.join("model.bin"))?;
    f.write_all(&(model.values.len() as u64).to_le_bytes())?;
    for v in &model.values {
        f.write_all(&v.to_le_bytes())?;
    }

    let last = metrics.last().expect("rounds >= 1");
    let manifest = RunManifest {
        label: run_label(cfg),
        seed: cfg.seed,
        config_sha256: config_hash(cfg),
        rounds: metrics.len(),
        highest_acc: metrics.iter().map(|m| m.test_acc).fold(0.0, f64::max),
        final_acc: last.test_acc,
        cum_frac_incl: last.cum_frac_incl,
        cum_frac_excl: last.cum_frac_excl,
    };
    let json = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Format(e.to_string()))?;
    fs::write(run_dir.join("manifest.json"), json + "\n")?;
    fs::write(run_dir.join("config.toml"), toml::to_string(cfg).expect("config serializes"))?;

    Ok((run_dir, metrics))
}

/// `flsnn train`: load the config file, apply overrides, run, persist.
pub fn cmd_train(config: &Path, out: Option<&Path>, seed: Option<u64>) -> Result<PathBuf> {
    let mut cfg = ExperimentConfig::from_file(config)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let (run_dir, metrics) = train_config(&cfg, out)?;
    let last = metrics.last().expect("rounds >= 1");
    println!(
        "{} rounds, test acc {:.4}, cum frac {:.6} -> {}",
        metrics.len(),
        last.test_acc,
        last.cum_frac_excl,
        run_dir.display()
    );
    Ok(run_dir)
}
