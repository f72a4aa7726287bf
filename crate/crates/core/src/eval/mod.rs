//! Metrics, splits, and the training/evaluation protocols.

mod benchmark;
mod experiment;
mod metrics;
mod protocols;
mod split;

use thiserror::Error;

pub use benchmark::{benchmark_experiment, benchmark_sim_config, BENCHMARK_SEEDS};
pub use experiment::{
    build_inputs, evaluate_model, run_experiment, split_samples, EvalReport, ExperimentConfig, ExperimentOutcome,
    InputSet, SplitSamples,
};
pub use metrics::{eva, relative_error_by_angle, rmse, RelErrorBin, DEFAULT_ANGLE_EDGES};
pub use protocols::{compare_inputs, sweep_integration_time, write_rows_csv, ProtocolRow, DEFAULT_SWEEP_TIMES_MS};
pub use split::{make_split, Segment, SplitPlan, Subset, DEFAULT_TEST_LEN_US, DEFAULT_TRAIN_LEN_US};

use crate::frames::FrameError;
use crate::labels::LabelError;
use crate::nn::NnError;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("length mismatch: {pred} predictions vs {obs} observations")]
    LengthMismatch { pred: usize, obs: usize },
    #[error("need at least {need} samples, got {got}")]
    TooFewSamples { got: usize, need: usize },
    #[error("observed angles have zero variance")]
    ZeroVariance,
    #[error("bin edges must be strictly increasing with at least two entries")]
    BadBins,
    #[error("recording has no {0}")]
    MissingModality(&'static str),
    #[error("invalid experiment config: {0}")]
    Config(String),
    #[error("format error: {0}")]
    Format(String),
    #[error(transparent)]
    Frames(#[from] FrameError),
    #[error(transparent)]
    Labels(#[from] LabelError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
