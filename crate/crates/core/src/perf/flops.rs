use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::backbone::{param_count, MemoryRule, ModelConfig, ModelParams, Net};
use crate::error::{Error, Result};
use crate::numeric::{cost, Section, Tape};
use crate::representation::PatchToken;

/// Analytic forward FLOPs of one window (embedding, both attention stages,
/// memory update and classifier) for `tokens` activated patches.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FlopReport {
    pub ff1: u64,
    pub ff2: u64,
    pub cross_attention: u64,
    pub self_attention: u64,
    pub memory: u64,
    pub classifier: u64,
    pub total: u64,
    pub tokens: usize,
    pub params: usize,
}

impl FlopReport {
    pub fn get(&self, s: Section) -> u64 {
        match s {
            Section::Ff1 => self.ff1,
            Section::Ff2 => self.ff2,
            Section::CrossAttention => self.cross_attention,
            Section::SelfAttention => self.self_attention,
            Section::Memory => self.memory,
            Section::Classifier => self.classifier,
            Section::Other => 0,
        }
    }
}

/// Linear layer over `n` rows: product plus bias.
fn linear(n: u64, fan_in: u64, fan_out: u64) -> u64 {
    2 * n * fan_in * fan_out + n * fan_out
}

struct Dims {
    d: u64,
    h: u64,
    heads: u64,
    ln: u64,
    gelu: u64,
    softmax: u64,
}

impl Dims {
    fn norm(&self, n: u64) -> u64 {
        self.ln * n * self.d
    }

    fn mlp(&self, n: u64) -> u64 {
        linear(n, self.d, self.h) + self.gelu * n * self.h + linear(n, self.h, self.d)
    }

    /// Pre-norm block with `nq` queries over `nkv` keys; cross blocks have
    /// their own key/value norm.
    fn block(&self, nq: u64, nkv: u64, cross: bool) -> u64 {
        let d = self.d;
        let norms = self.norm(nq) + if cross { self.norm(nkv) } else { 0 } + self.norm(nq);
        let proj = 2 * linear(nq, d, d) + 2 * linear(nkv, d, d);
        // Per head: scores and mix are 2*nq*nkv*dh each, then scaling and
        // softmax per score.
        let core = 4 * nq * nkv * d + self.heads * nq * nkv * (1 + self.softmax);
        let residuals = 2 * nq * d;
        norms + proj + core + residuals + self.mlp(nq)
    }
}

pub fn count_flops(cfg: &ModelConfig, tokens: usize) -> FlopReport {
    let dims = Dims {
        d: cfg.dim as u64,
        h: cfg.ff_hidden() as u64,
        heads: cfg.heads as u64,
        ln: cost::LAYER_NORM as u64,
        gelu: cost::GELU as u64,
        softmax: cost::SOFTMAX as u64,
    };
    let (t, m, d) = (tokens as u64, cfg.latents as u64, cfg.dim as u64);
    let c = cfg.num_classes as u64;

    let ff1 = linear(t, cfg.token_in as u64, d) + linear(t, d + cfg.pos_dim() as u64, d);
    let ff2 = dims.mlp(t) + t * d;
    let cross_attention = dims.block(m, t, true);
    let self_attention = cfg.self_blocks as u64 * dims.block(m, m, false);
    let memory = match cfg.memory_rule {
        MemoryRule::Residual => 2 * m * d,
        MemoryRule::Literal => m * d,
    };
    let classifier = dims.norm(m)
        + linear(m, d, d)
        + dims.gelu * m * d
        + m * d
        + linear(1, d, c)
        + dims.softmax * c;
    FlopReport {
        ff1,
        ff2,
        cross_attention,
        self_attention,
        memory,
        classifier,
        total: ff1 + ff2 + cross_attention + self_attention + memory + classifier,
        tokens,
        params: param_count(cfg),
    }
}

/// Analytic and tape-counted FLOPs for the same window.
#[derive(Debug, Clone)]
pub struct FlopCheck {
    pub analytic: FlopReport,
    /// Tape counts per section, in [`Section::ALL`] order.
    pub instrumented: Vec<(Section, u64)>,
    pub instrumented_total: u64,
    /// `|analytic - instrumented| / instrumented` over the totals.
    pub deviation: f64,
}

/// Random tokens at random grid cells.
pub fn random_tokens(cfg: &ModelConfig, count: usize, seed: u64) -> Vec<PatchToken> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| PatchToken {
            values: (0..cfg.token_in).map(|_| rng.gen_range(0.0..2.0)).collect(),
            grid_row: rng.gen_range(0..cfg.grid_h),
            grid_col: rng.gen_range(0..cfg.grid_w),
        })
        .collect()
}

/// Runs one window through the network on a counting tape and compares
/// the counts with [`count_flops`].
pub fn verify_flops(cfg: &ModelConfig, tokens: usize, seed: u64) -> Result<FlopCheck> {
    if tokens == 0 {
        return Err(Error::EmptyTokens);
    }
    let params = ModelParams::init(cfg, seed)?;
    let toks = random_tokens(cfg, tokens, seed);
    let mut t = Tape::new();
    let mut net = Net::bind(&mut t, &params, false);
    let mem = net.initial_memory();
    let next = net.step(&mut t, &toks, mem)?;
    net.head(&mut t, next)?;

    let counter = t.flops();
    let instrumented: Vec<_> = Section::ALL.iter().map(|&s| (s, counter.get(s))).collect();
    let instrumented_total = counter.total();
    let analytic = count_flops(cfg, tokens);
    let deviation =
        (analytic.total as f64 - instrumented_total as f64).abs() / instrumented_total as f64;
    Ok(FlopCheck {
        analytic,
        instrumented,
        instrumented_total,
        deviation,
    })
}
