//! Config-driven experiment runner for `vofdm-core`.
//!
//! A run reads a JSON [`config::ExperimentConfig`], validates it, runs the
//! experiment and writes a CSV plus a `<name>.manifest.json` sidecar.

// `!(x > 0.0)` is used on purpose so that NaN fails.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod experiments;
pub mod output;

use std::path::PathBuf;
use std::time::Instant;

use config::{ConfigError, LoadedConfig};
use output::{config_hash, manifest_path, render_csv, sha256_hex, RunManifest};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv encoding failed: {0}")]
    Csv(#[from] csv::Error),
    #[error("simulation failed: {0}")]
    Simulation(#[from] vofdm_core::Error),
}

impl RunError {
    /// 2 for a bad config, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            _ => 1,
        }
    }
}

/// Validates, runs and writes the CSV and manifest.
pub fn run(loaded: &LoadedConfig) -> Result<RunManifest, RunError> {
    let diags = config::validate(loaded);
    if !diags.is_empty() {
        return Err(ConfigError::Invalid(diags).into());
    }
    let cfg = loaded.config.resolve();
    let io = |path: &std::path::Path| {
        let path = path.to_owned();
        move |source| RunError::Io { path, source }
    };
    // Fail on an unwritable destination before spending any compute.
    let csv_path = cfg.output_path.clone();
    let mpath = manifest_path(&csv_path);
    let csv_file = std::fs::File::create(&csv_path).map_err(io(&csv_path))?;

    let started = Instant::now();
    let table = experiments::run_experiment(&cfg)?;
    let hash = config_hash(&cfg);
    let bytes = render_csv(&table, &hash)?;
    std::io::Write::write_all(&mut &csv_file, &bytes).map_err(io(&csv_path))?;
    drop(csv_file);

    let manifest = RunManifest {
        version: VERSION,
        experiment: cfg.experiment.name().to_owned(),
        seed: cfg.seed,
        config_sha256: hash,
        csv_sha256: sha256_hex(&bytes),
        csv_path: csv_path.clone(),
        rows: table.rows.len(),
        duration_seconds: started.elapsed().as_secs_f64(),
        sample_counts: table.sample_counts,
        config: cfg,
    };
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    std::fs::write(&mpath, json + "\n").map_err(io(&mpath))?;
    Ok(manifest)
}
