//! Small residual CNN regressor trained from scratch.

mod io;
mod model;
pub mod ops;
mod tensor;
mod train;

use thiserror::Error;

pub use io::{load_model, load_model_with_meta, save_model, save_model_with_meta, MODEL_FORMAT_VERSION, MODEL_MAGIC};
pub use model::{init_model, transfer_init_first_layer, Model, ModelConfig, Param};
pub use tensor::{Real, Tensor};
pub use train::{predict, train, Dataset, TrainConfig, TrainReport};

#[derive(Debug, Error)]
pub enum NnError {
    #[error("shape error: {0}")]
    Shape(String),
    #[error("invalid config: {0}")]
    Config(String),
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("training diverged at epoch {epoch}: {detail}")]
    Diverged { epoch: usize, detail: String },
    #[error("model file error: {0}")]
    Format(String),
}
