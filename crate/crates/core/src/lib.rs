//! Event Transformer pipeline.
//!
//! Event-camera streams are cut into time windows, each window becomes a
//! dense histogram frame, and only the patches with enough active pixels
//! survive as tokens. A small attention network with a fixed set of latent
//! vectors consumes the tokens of each window and folds the result into a
//! running memory, which a light head classifies at any point in the stream.
//!
//! Module map:
//!
//! - [`event_io`]: events, streams, the `EVT1`/CSV file formats and a
//!   deterministic synthetic gesture generator.
//! - [`representation`]: frames, activated patches, adaptive windows.
//! - [`numeric`]: dense matrices, a reverse-mode tape and a gradient checker.
//! - [`backbone`]: the latent-memory attention network and checkpoints.
//! - [`training`]: loss, AdamW, augmentation and the training loop.
//! - [`perf`]: FLOP accounting, latency measurement and patch statistics.
//! - [`config`]: the strict JSON run configuration shared by the CLI.

pub mod backbone;
pub mod config;
pub mod error;
pub mod event_io;
pub mod numeric;
pub mod perf;
pub mod representation;
pub mod training;

pub use error::{Error, Result};
