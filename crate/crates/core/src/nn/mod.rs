//! Direct pose regressor: convolutional backbone, GAP, dual affine heads,
//! the log-std weighted L2 loss, Adam with a cyclical schedule, training
//! and evaluation.

use thiserror::Error;

pub mod checkpoint;
pub mod eval;
pub mod loss;
pub mod network;
pub mod optim;
pub mod tensor;
pub mod train;

pub use checkpoint::Checkpoint;
pub use eval::{evaluate, evaluate_poses, median, prediction_to_pose, summarize, FrameMetrics, Summary, Thresholds};
pub use loss::{combine, loss, LossValue};
pub use network::{Network, NetworkConfig, Prediction};
pub use optim::{adam_step, cyclical_lr, AdamState};
pub use tensor::{Scalar, Tensor};
pub use train::{image_to_input, load_training_data, train, BatchReduction, EpochLog, SplitMetrics, TrainConfig, TrainOutcome, TrainingData};

#[derive(Debug, Error)]
pub enum NnError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("training split is empty")]
    EmptySplit,
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Dataset(#[from] crate::dataset::DatasetError),
    #[error(transparent)]
    Imaging(#[from] crate::imaging::ImagingError),
    #[error(transparent)]
    Pose(#[from] crate::pose::PoseError),
}
