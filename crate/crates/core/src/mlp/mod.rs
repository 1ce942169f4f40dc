//! One-dimensional ReLU networks: initialization, Adam training, exact
//! piecewise-linear extraction, and the hard/easy regression experiments.

mod experiment;
mod extract;
mod model;
mod train;

use thiserror::Error;

use crate::pl::PlError;
use crate::separation::SeparationError;

pub use experiment::{run_experiment, DepthSummary, ExperimentConfig, ExperimentRow, ExperimentTable, Task};
pub use extract::{model_to_pl, model_to_pl_on};
pub use model::MlpModel;
pub use train::{
    l1_error, loss_and_grad, mse, train, training_grid, L1Estimate, Target, TrainConfig, TrainResult,
    GRID_L1_CELLS,
};

#[derive(Debug, Error)]
pub enum MlpError {
    #[error("bad model shape: {0}")]
    BadShape(String),
    #[error("model has non-finite parameters or outputs")]
    NonFinite,
    #[error("bad training configuration: {0}")]
    BadConfig(String),
    #[error("training diverged at epoch {epoch}")]
    Diverged { epoch: usize },
    #[error(transparent)]
    Pl(#[from] PlError),
    #[error(transparent)]
    Separation(#[from] SeparationError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
