use std::time::Instant;

use serde::Serialize;

use super::flops::random_tokens;
use crate::backbone::{memory_update, process_window, LatentMemory, ModelParams};
use crate::error::{Error, Result};
use crate::event_io::EventStream;
use crate::representation::{next_window, window_iterator, PatchToken, ReprConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LatencyOptions {
    /// Untimed window passes before measuring.
    pub warmup: usize,
    /// Timed repetitions of every window.
    pub reps: usize,
    /// Include building the window's tokens in each timed sample.
    pub include_repr: bool,
}

impl Default for LatencyOptions {
    fn default() -> Self {
        Self {
            warmup: 5,
            reps: 10,
            include_repr: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LatencyReport {
    /// Milliseconds per timed pass, `reps` per window, window by window.
    pub samples_ms: Vec<Vec<f64>>,
    pub tokens: Vec<usize>,
    pub mean_ms: f64,
    pub median_ms: f64,
    pub p95_ms: f64,
    pub budget_ms: f64,
    /// Median below the window length.
    pub budget_met: bool,
}

fn percentile(sorted: &[f64], q: f64) -> f64 {
    let idx = ((sorted.len() - 1) as f64 * q).round() as usize;
    sorted[idx]
}

fn summarize(samples_ms: Vec<Vec<f64>>, tokens: Vec<usize>, budget_ms: f64) -> LatencyReport {
    let mut all: Vec<f64> = samples_ms.iter().flatten().copied().collect();
    all.sort_by(f64::total_cmp);
    let n = all.len();
    let mean_ms = all.iter().sum::<f64>() / n as f64;
    let median_ms = if n % 2 == 1 {
        all[n / 2]
    } else {
        (all[n / 2 - 1] + all[n / 2]) / 2.0
    };
    LatencyReport {
        p95_ms: percentile(&all, 0.95),
        samples_ms,
        tokens,
        mean_ms,
        median_ms,
        budget_ms,
        budget_met: median_ms < budget_ms,
    }
}

fn time_window(
    tokens: &[PatchToken],
    memory: &LatentMemory,
    params: &ModelParams,
) -> Result<(f64, LatentMemory)> {
    let start = Instant::now();
    let out = process_window(tokens, memory, params, false)?;
    let next = memory_update(memory, &out.update)?;
    Ok((start.elapsed().as_secs_f64() * 1e3, next))
}

/// Times `process_window` + `memory_update` over every window of a stream.
/// Each window is replayed `reps` times from the same incoming memory.
pub fn measure_latency(
    stream: &EventStream,
    params: &ModelParams,
    repr: &ReprConfig,
    opts: LatencyOptions,
) -> Result<LatencyReport> {
    if opts.reps == 0 {
        return Err(Error::Config("reps must be at least 1".into()));
    }
    let windows: Vec<_> = window_iterator(stream, repr).collect();
    if windows.is_empty() {
        return Err(Error::NoInformation);
    }
    let mut memory = LatentMemory::new(params);
    for w in windows.iter().cycle().take(opts.warmup) {
        let (_, next) = time_window(&w.tokens, &memory, params)?;
        memory = next;
    }

    let mut memory = LatentMemory::new(params);
    let mut samples = Vec::with_capacity(windows.len());
    for w in &windows {
        let mut reps = Vec::with_capacity(opts.reps);
        let mut next = None;
        for _ in 0..opts.reps {
            let repr_ms = if opts.include_repr {
                let start = Instant::now();
                std::hint::black_box(next_window(stream, w.window_start, repr));
                start.elapsed().as_secs_f64() * 1e3
            } else {
                0.0
            };
            let (ms, m) = time_window(&w.tokens, &memory, params)?;
            reps.push(ms + repr_ms);
            next = Some(m);
        }
        memory = next.expect("reps >= 1");
        samples.push(reps);
    }
    let tokens = windows.iter().map(|w| w.token_count()).collect();
    Ok(summarize(samples, tokens, repr.delta_t_us as f64 / 1e3))
}

/// Times windows of exactly `tokens` random patches, `windows` distinct
/// windows with `reps` timed passes each.
pub fn measure_token_latency(
    params: &ModelParams,
    tokens: usize,
    windows: usize,
    budget_ms: f64,
    opts: LatencyOptions,
    seed: u64,
) -> Result<LatencyReport> {
    if opts.reps == 0 || windows == 0 {
        return Err(Error::Config("reps and windows must be at least 1".into()));
    }
    let cfg = params.config();
    let batches: Vec<_> = (0..windows)
        .map(|k| random_tokens(cfg, tokens, seed.wrapping_add(k as u64)))
        .collect();
    let mut memory = LatentMemory::new(params);
    for b in batches.iter().cycle().take(opts.warmup) {
        memory = time_window(b, &memory, params)?.1;
    }
    let mut memory = LatentMemory::new(params);
    let mut samples = Vec::with_capacity(windows);
    for b in &batches {
        let mut reps = Vec::with_capacity(opts.reps);
        let mut next = None;
        for _ in 0..opts.reps {
            let (ms, m) = time_window(b, &memory, params)?;
            reps.push(ms);
            next = Some(m);
        }
        memory = next.expect("reps >= 1");
        samples.push(reps);
    }
    Ok(summarize(samples, vec![tokens; windows], budget_ms))
}
