//! Config-driven trials, metrics and CSV output.

pub mod check;
mod compare;
mod config;
pub mod log;
mod metrics;
mod runner;

pub use compare::{
    collect_offline_data, compare_estimators, fit_offline_gp, train_for, train_offline_network,
    EstimatorRow,
};
pub use config::{
    AdaptiveConfig, CheckConfig, ControllerKind, ExperimentConfig, LqrConfig, NetworkConfig,
    ObservationMode, OfflineConfig, ReferenceConfig, TruthConfig,
};
pub use log::{quantize, LogError, LogRow, StepFlags, TrajectoryLog, LOG_COLUMNS};
pub use metrics::{
    final_offset, mean_estimation_error, mean_tracking_error, metrics, MetricsReport,
};
pub use runner::{
    minibatch_seed, reference_at, run_experiment, run_trial, run_trial_observed, synthesize,
    SharedEstimator,
};

use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::control::ControlError;
use crate::dataset::DatasetError;
use crate::gp::GpError;
use crate::linalg::LinalgError;
use crate::mlp::MlpError;
use crate::plant::PlantError;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("config: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Log(#[from] LogError),
    #[error(transparent)]
    Plant(#[from] PlantError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Control(#[from] ControlError),
    #[error(transparent)]
    Mlp(#[from] MlpError),
    #[error(transparent)]
    Gp(#[from] GpError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error("metrics: {0}")]
    Metrics(String),
    #[error("check failed: {0}")]
    CheckFailed(String),
}

impl ExperimentError {
    /// Process exit code by failure category: 2 configuration, 3 I/O,
    /// 4 failed check, 5 numerical.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 2,
            Self::Io { .. } | Self::Log(_) => 3,
            Self::Dataset(DatasetError::Csv { .. } | DatasetError::CsvHeader { .. }) => 3,
            Self::Mlp(MlpError::Io(_) | MlpError::Checkpoint(_)) => 3,
            Self::CheckFailed(_) => 4,
            _ => 5,
        }
    }
}

/// `<dir>/<name>_seed<seed>.csv`.
pub fn trial_path(dir: &Path, name: &str, seed: u64) -> PathBuf {
    dir.join(format!("{name}_seed{seed}.csv"))
}

/// Writes one CSV per trial, named with the seed suffix.
pub fn emit_logs(
    dir: &Path,
    name: &str,
    cfg: &ExperimentConfig,
    logs: &[TrajectoryLog],
) -> Result<Vec<PathBuf>, ExperimentError> {
    std::fs::create_dir_all(dir).map_err(|source| ExperimentError::Io {
        path: dir.display().to_string(),
        source,
    })?;
    cfg.seeds
        .iter()
        .zip(logs)
        .map(|(&seed, log)| {
            let path = trial_path(dir, name, seed);
            emit_csv(log, &path)?;
            Ok(path)
        })
        .collect()
}

pub fn emit_csv(log: &TrajectoryLog, path: &Path) -> Result<(), ExperimentError> {
    Ok(log.write_csv(path)?)
}
