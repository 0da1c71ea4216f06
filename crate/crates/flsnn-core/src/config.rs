//! Experiment configuration: a flat-key TOML format with dotted sections
//! (`fl.rounds = 100`). Unknown keys are rejected; every module-level
//! invariant is re-validated at parse time.
//!
//! Defaults follow the reference SNN setup: T = 25, lr = 0.1, momentum =
//! 0.95, batch = 32, E = 1, 5 clients, 100 rounds.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::channel::ChannelConfig;
use crate::compression::{CompressionSchedule, Rounding};
use crate::data::{load_cifar10_binary, load_mnist_idx, make_synthetic, Dataset};
use crate::error::{Error, Result};
use crate::fl::FlConfig;
use crate::seed::{stream_rng, Stream};
use crate::snn::{LifConfig, NetworkKind, SgdConfig};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub seed: u64,
    /// Output directory; the CLI may override it.
    pub output: Option<PathBuf>,
    pub model: ModelCfg,
    pub optim: OptimCfg,
    pub fl: FlCfg,
    pub compression: CompressionCfg,
    pub channel: ChannelCfg,
    pub data: DataCfg,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 42,
            output: None,
            model: ModelCfg::default(),
            optim: OptimCfg::default(),
            fl: FlCfg::default(),
            compression: CompressionCfg::default(),
            channel: ChannelCfg::default(),
            data: DataCfg::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelCfg {
    pub kind: NetworkKind,
    pub layers: Vec<usize>,
    pub beta: f64,
    pub u_thr: f64,
    pub xi: f64,
    pub timesteps: usize,
}

impl Default for ModelCfg {
    fn default() -> Self {
        ModelCfg {
            kind: NetworkKind::Snn,
            layers: vec![784, 128, 10],
            beta: 0.95,
            u_thr: 1.0,
            xi: 0.3,
            timesteps: 25,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimCfg {
    pub learning_rate: f64,
    pub momentum: f64,
    pub weight_decay: f64,
}

impl Default for OptimCfg {
    fn default() -> Self {
        OptimCfg { learning_rate: 0.1, momentum: 0.95, weight_decay: 0.0 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FlCfg {
    pub clients: usize,
    pub rounds: usize,
    pub local_epochs: usize,
    pub batch_size: usize,
}

impl Default for FlCfg {
    fn default() -> Self {
        FlCfg { clients: 5, rounds: 100, local_epochs: 1, batch_size: 32 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CompressionCfg {
    /// "none", "fixed", "linear" or "exponential".
    pub mode: String,
    pub kappa: f64,
    pub alpha: f64,
    pub omega: f64,
    /// Reduction horizon R; 0 means "use fl.rounds".
    pub rounds: usize,
    pub rounding: Rounding,
}

impl Default for CompressionCfg {
    fn default() -> Self {
        CompressionCfg {
            mode: "none".to_string(),
            kappa: 1.0,
            alpha: 0.06,
            omega: 0.01,
            rounds: 0,
            rounding: Rounding::Floor,
        }
    }
}

impl CompressionCfg {
    pub fn schedule(&self, fl_rounds: usize) -> Result<CompressionSchedule> {
        let rounds = if self.rounds == 0 { fl_rounds } else { self.rounds };
        let sched = match self.mode.as_str() {
            "none" => CompressionSchedule::None,
            "fixed" => CompressionSchedule::Fixed { kappa: self.kappa },
            "linear" => {
                CompressionSchedule::Linear { alpha: self.alpha, omega: self.omega, rounds }
            }
            "exponential" => {
                CompressionSchedule::Exponential { alpha: self.alpha, omega: self.omega, rounds }
            }
            other => {
                return Err(Error::config(format!(
                    "compression.mode: unknown mode {other:?} (none|fixed|linear|exponential)"
                )))
            }
        };
        sched.validate()?;
        Ok(sched)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChannelCfg {
    /// "noiseless", "absolute" or "relative".
    pub mode: String,
    pub sigma: f64,
}

impl Default for ChannelCfg {
    fn default() -> Self {
        ChannelCfg { mode: "noiseless".to_string(), sigma: 0.0 }
    }
}

impl ChannelCfg {
    pub fn channel(&self) -> Result<ChannelConfig> {
        let ch = match self.mode.as_str() {
            "noiseless" => ChannelConfig::Noiseless,
            "absolute" => ChannelConfig::Absolute { sigma: self.sigma },
            "relative" => ChannelConfig::Relative { sigma: self.sigma },
            other => {
                return Err(Error::config(format!(
                    "channel.mode: unknown mode {other:?} (noiseless|absolute|relative)"
                )))
            }
        };
        ch.validate()?;
        Ok(ch)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataCfg {
    /// "synthetic", "mnist" or "cifar10".
    pub source: String,
    // mnist
    pub train_images: Option<PathBuf>,
    pub train_labels: Option<PathBuf>,
    pub test_images: Option<PathBuf>,
    pub test_labels: Option<PathBuf>,
    // cifar10
    pub train_batches: Vec<PathBuf>,
    pub test_batches: Vec<PathBuf>,
    // synthetic
    pub classes: usize,
    pub features: usize,
    pub train_samples: usize,
    pub test_samples: usize,
    pub separation: f64,
    /// Optional truncation of loaded datasets (0 = keep all).
    pub train_limit: usize,
    pub test_limit: usize,
}

impl Default for DataCfg {
    fn default() -> Self {
        DataCfg {
            source: "synthetic".to_string(),
            train_images: None,
            train_labels: None,
            test_images: None,
            test_labels: None,
            train_batches: vec![],
            test_batches: vec![],
            classes: 10,
            features: 784,
            train_samples: 2000,
            test_samples: 1000,
            separation: 4.0,
            train_limit: 0,
            test_limit: 0,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.to_fl_config()?;
        match self.data.source.as_str() {
            "synthetic" => {
                if self.data.train_samples < self.data.classes {
                    return Err(Error::config(
                        "data.train_samples must be >= data.classes".to_string(),
                    ));
                }
            }
            "mnist" => {
                for (key, v) in [
                    ("data.train_images", &self.data.train_images),
                    ("data.train_labels", &self.data.train_labels),
                    ("data.test_images", &self.data.test_images),
                    ("data.test_labels", &self.data.test_labels),
                ] {
                    if v.is_none() {
                        return Err(Error::config(format!("{key} is required for mnist")));
                    }
                }
            }
            "cifar10" => {
                if self.data.train_batches.is_empty() || self.data.test_batches.is_empty() {
                    return Err(Error::config(
                        "data.train_batches and data.test_batches are required for cifar10"
                            .to_string(),
                    ));
                }
            }
            other => {
                return Err(Error::config(format!(
                    "data.source: unknown source {other:?} (synthetic|mnist|cifar10)"
                )))
            }
        }
        Ok(())
    }

    /// Assemble the engine config; validates every sub-config.
    pub fn to_fl_config(&self) -> Result<FlConfig> {
        let cfg = FlConfig {
            clients: self.fl.clients,
            rounds: self.fl.rounds,
            local_epochs: self.fl.local_epochs,
            batch_size: self.fl.batch_size,
            kind: self.model.kind,
            widths: self.model.layers.clone(),
            lif: LifConfig {
                beta: self.model.beta,
                u_thr: self.model.u_thr,
                xi: self.model.xi,
                timesteps: self.model.timesteps,
            },
            optim: SgdConfig {
                learning_rate: self.optim.learning_rate,
                momentum: self.optim.momentum,
                weight_decay: self.optim.weight_decay,
            },
            channel: self.channel.channel()?,
            schedule: self.compression.schedule(self.fl.rounds)?,
            rounding: self.compression.rounding,
            seed: self.seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Load (or generate) the train and test datasets.
    pub fn load_data(&self) -> Result<(Dataset, Dataset)> {
        let (mut train, mut test): (Dataset, Dataset) = match self.data.source.as_str() {
            "synthetic" => {
                // one generative model (one set of class centers) for both
                // splits; train gets the leading rows, test the trailing ones
                let mut rng = stream_rng(self.seed, Stream::DataGen, &[0]);
                let total = make_synthetic(
                    self.data.classes,
                    self.data.features,
                    self.data.train_samples + self.data.test_samples,
                    self.data.separation,
                    &mut rng,
                );
                let train_idx: Vec<usize> = (0..self.data.train_samples).collect();
                let test_idx: Vec<usize> =
                    (self.data.train_samples..total.len()).collect();
                let (train_s, train_l) = total.gather(&train_idx);
                let (test_s, test_l) = total.gather(&test_idx);
                (
                    Dataset { samples: train_s, labels: train_l, class_count: total.class_count },
                    Dataset { samples: test_s, labels: test_l, class_count: total.class_count },
                )
            }
            "mnist" => (
                load_mnist_idx(
                    self.data.train_images.as_ref().unwrap(),
                    self.data.train_labels.as_ref().unwrap(),
                )?,
                load_mnist_idx(
                    self.data.test_images.as_ref().unwrap(),
                    self.data.test_labels.as_ref().unwrap(),
                )?,
            ),
            "cifar10" => (
                load_cifar10_binary(&self.data.train_batches)?,
                load_cifar10_binary(&self.data.test_batches)?,
            ),
            other => return Err(Error::config(format!("data.source: unknown source {other:?}"))),
        };
        if self.data.train_limit > 0 {
            train = train.take(self.data.train_limit);
        }
        if self.data.test_limit > 0 {
            test = test.take(self.data.test_limit);
        }
        Ok((train, test))
    }
}
