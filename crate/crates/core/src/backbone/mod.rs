//! The event transformer network: token embedding, latent cross- and
//! self-attention, additive memory across windows and the pooled
//! classifier head.

mod checkpoint;
mod config;
mod fourier;
mod graph;
mod inference;
mod params;

pub use checkpoint::{Checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use config::{MemoryRule, ModelConfig};
pub use fourier::fourier_positions;
pub use graph::Net;
pub use inference::{
    argmax, attention_block, attention_block_recorded, classify, classify_stream, classify_windows,
    ff1, ff2, memory_update, process_window, Classification, LatentMemory, WindowOutput,
};
pub use params::{param_count, Block, Layout, Linear, Mlp, ModelParams, NamedTensor, Norm};
