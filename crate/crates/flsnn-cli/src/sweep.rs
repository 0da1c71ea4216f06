//! `sweep`: run the same config across values of one dotted config key.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use flsnn_core::config::ExperimentConfig;
use flsnn_core::error::{Error, Result};

use crate::run::train_config;

/// Set `axis` (a dotted key like `compression.kappa`) to `value` in the raw
/// TOML text and re-parse, so axis typos fail the same way config typos do.
pub fn override_key(text: &str, axis: &str, value: &str) -> Result<ExperimentConfig> {
    let mut table: toml::Table =
        toml::from_str(text).map_err(|e| Error::config(e.to_string()))?;
    let segments: Vec<&str> = axis.split('.').collect();
    if segments.iter().any(|s| s.is_empty()) {
        return Err(Error::config(format!("sweep axis {axis:?} is not a dotted key")));
    }
    let parsed: toml::Value = if !value.contains(['.', 'e', 'E']) {
        match value.parse::<i64>() {
            Ok(i) => toml::Value::Integer(i),
            Err(_) => toml::Value::Float(
                value
                    .parse::<f64>()
                    .map_err(|_| Error::config(format!("sweep value {value:?} is not numeric")))?,
            ),
        }
    } else {
        toml::Value::Float(
            value
                .parse::<f64>()
                .map_err(|_| Error::config(format!("sweep value {value:?} is not numeric")))?,
        )
    };

    let mut node = &mut table;
    for seg in &segments[..segments.len() - 1] {
        node = node
            .entry(seg.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .ok_or_else(|| Error::config(format!("sweep axis {axis:?}: {seg} is not a table")))?;
    }
    node.insert(segments.last().unwrap().to_string(), parsed);

    let merged = toml::to_string(&table).map_err(|e| Error::config(e.to_string()))?;
    ExperimentConfig::from_toml(&merged)
}

/// `flsnn sweep`: one run directory per value plus a combined `summary.csv`
/// (value, highest accuracy, cumulative fractions). All runs share the
/// master seed; `jobs` bounds run-level parallelism.
pub fn cmd_sweep(
    config: &Path,
    axis: &str,
    values: &[String],
    out: Option<&Path>,
    seed: Option<u64>,
    jobs: Option<usize>,
) -> Result<PathBuf> {
    if values.is_empty() {
        return Err(Error::input("sweep needs at least one value".to_string()));
    }
    let text = fs::read_to_string(config)?;
    let mut configs = Vec::with_capacity(values.len());
    for v in values {
        let mut cfg = override_key(&text, axis, v)?;
        if let Some(s) = seed {
            cfg.seed = s;
        }
        cfg.output = None;
        configs.push(cfg);
    }

    let sweep_dir = out
        .map(Path::to_path_buf)
        .unwrap_or_else(|| crate::output_root().join(format!("sweep-{}", axis.replace('.', "-"))));
    fs::create_dir_all(&sweep_dir)?;
    let short = axis.rsplit('.').next().unwrap();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .map_err(|e| Error::config(e.to_string()))?;
    let results: Vec<Result<PathBuf>> = pool.install(|| {
        use rayon::prelude::*;
        configs
            .par_iter()
            .zip(values.par_iter())
            .map(|(cfg, v)| {
                let dir = sweep_dir.join(format!("{short}-{v}"));
                train_config(cfg, Some(&dir)).map(|(d, _)| d)
            })
            .collect()
    });

    let mut summary = fs::File::create(sweep_dir.join("summary.csv"))?;
    writeln!(summary, "{axis},highest_acc,cum_frac_incl,cum_frac_excl")?;
    for (dir, v) in results.into_iter().zip(values) {
        let manifest = crate::run::RunManifest::load(&dir?)?;
        writeln!(
            summary,
            "{},{},{},{}",
            v, manifest.highest_acc, manifest.cum_frac_incl, manifest.cum_frac_excl
        )?;
    }
    println!("{} runs -> {}", values.len(), sweep_dir.display());
    Ok(sweep_dir)
}
