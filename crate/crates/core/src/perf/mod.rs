//! Efficiency measurements: analytic and tape-counted FLOPs, wall-clock
//! window latency, and activated-patch statistics.

mod flops;
mod latency;
mod stats;

pub use flops::{count_flops, random_tokens, verify_flops, FlopCheck, FlopReport};
pub use latency::{measure_latency, measure_token_latency, LatencyOptions, LatencyReport};
pub use stats::{patch_stats, PatchStats};
