//! Frame-level shot-importance regression for video summarization.
//!
//! A six-stage convolutional network maps preprocessed frames to importance
//! scores in `[0, L]`. Predictions are grouped into fixed 50-frame shots by
//! trimmed RMS, compared against ground truth (MAE, AEV), and thresholded
//! into summaries scored by F-measure.
//!
//! Modules:
//! - [`tensor`], [`ops`], [`io`], [`rng`]: numeric core and file format
//! - [`network`]: architecture, initialization, forward/backward, checkpoints
//! - [`training`]: L2 loss, Adam, training loop, gradient checking
//! - [`datapipe`]: datasets, split, sampling, preprocessing, augmentation
//! - [`scoring`]: shot aggregation and evaluation metrics

pub mod datapipe;
pub mod error;
pub mod io;
pub mod network;
pub mod ops;
pub mod rng;
pub mod scoring;
pub mod tensor;
pub mod training;

pub use error::{DatasetError, Error, FormatError, Result};
pub use network::{build_network, Mode, Network, NetworkConfig, ScoreScale};
pub use rng::Rng;
pub use tensor::{Scalar, Tensor};
