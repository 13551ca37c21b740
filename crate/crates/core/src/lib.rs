//! Two-level conditional GANs that carry video-clip features into an
//! image-frame feature space, so a classifier trained on labeled source
//! images can be applied to unlabeled target videos.
//!
//! The low level maps frame features to clip features, the high level maps
//! clip features to image-frame features, and projected clips are averaged
//! per video. Every network, loss gradient and optimizer step is written
//! out by hand over [`linalg::Matrix`].

pub mod classifier;
pub mod cli;
pub mod config;
pub mod data_io;
pub mod error;
pub mod linalg;
pub mod losses;
pub mod mlp;
pub mod optim;
pub mod pipeline;
pub mod trainer;

pub use config::{Ablation, Architecture, Level, TrainConfig};
pub use error::{HiganError, Result};
pub use linalg::Matrix;
