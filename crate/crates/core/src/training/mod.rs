//! Supervised training: NLL loss, AdamW with global-norm clipping, plateau
//! halving of the learning rate, and window-level augmentation.

mod augment;
mod config;
mod optim;
mod train;

pub use augment::{augment, spatial_shift, temporal_crop, token_drop};
pub use config::TrainConfig;
pub use optim::{clip_grad_norm, global_norm, nll_loss, optimizer_step, OptimizerState};
pub use train::{
    evaluate, prepare, sample_gradients, train, train_with, EpochMetrics, Sample, TrainReport,
};
