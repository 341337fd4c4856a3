use super::graph::Net;
use super::params::{Block, ModelParams};
use crate::error::{Error, Result};
use crate::event_io::EventStream;
use crate::numeric::{Matrix, Tape};
use crate::representation::{window_iterator, PatchToken, ReprConfig, WindowResult};

/// Cross-window state: `M x D` latents and the number of windows folded in.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentMemory {
    state: Matrix,
    windows_seen: usize,
}

impl LatentMemory {
    /// Memory at stream start: a copy of the learned initial latents.
    pub fn new(params: &ModelParams) -> Self {
        Self {
            state: params.tensor(params.layout().latent_init).clone(),
            windows_seen: 0,
        }
    }

    pub fn state(&self) -> &Matrix {
        &self.state
    }

    pub fn windows_seen(&self) -> usize {
        self.windows_seen
    }
}

/// Result of one window pass.
#[derive(Debug, Clone)]
pub struct WindowOutput {
    /// Final latents after the cross and self blocks.
    pub latents: Matrix,
    /// What [`memory_update`] should add, as set by the model's memory rule.
    pub update: Matrix,
    /// Cross-attention weights, one `M x T` matrix per head, when requested.
    pub attention: Option<Vec<Matrix>>,
}

/// Embeds a single token: `token_in -> D`, position features appended,
/// `D + 4*bands -> D`.
pub fn ff1(token: &PatchToken, params: &ModelParams) -> Result<Vec<f64>> {
    let mut t = Tape::new();
    let net = Net::bind(&mut t, params, false);
    let (m, pos) = net.token_matrix(std::slice::from_ref(token))?;
    let x = t.constant(m);
    let y = net.ff1(&mut t, x, &pos)?;
    Ok(t.value(y).as_slice().to_vec())
}

/// `x + W2 gelu(W1 x + b1) + b2` for one D-vector.
pub fn ff2(x: &[f64], params: &ModelParams) -> Result<Vec<f64>> {
    let d = params.config().dim;
    if x.len() != d {
        return Err(Error::Shape(format!(
            "ff2 input of length {} for D = {d}",
            x.len()
        )));
    }
    let mut t = Tape::new();
    let net = Net::bind(&mut t, params, false);
    let xv = t.constant(Matrix::from_vec(1, d, x.to_vec())?);
    let y = net.ff2(&mut t, xv)?;
    Ok(t.value(y).as_slice().to_vec())
}

/// One attention block of `params` applied to explicit inputs. Blocks
/// without a key/value norm reuse the query norm for the keys.
pub fn attention_block(
    queries: &Matrix,
    keys_values: &Matrix,
    params: &ModelParams,
    block: &Block,
) -> Result<Matrix> {
    attention_block_recorded(queries, keys_values, params, block).map(|(m, _)| m)
}

/// [`attention_block`] that also returns the per-head attention weights.
pub fn attention_block_recorded(
    queries: &Matrix,
    keys_values: &Matrix,
    params: &ModelParams,
    block: &Block,
) -> Result<(Matrix, Vec<Matrix>)> {
    let d = params.config().dim;
    if keys_values.cols() != d || keys_values.rows() == 0 {
        return Err(Error::Shape(format!(
            "keys/values {:?} for D = {d}",
            keys_values.shape()
        )));
    }
    let mut t = Tape::new();
    let mut net = Net::bind(&mut t, params, false);
    let q = t.constant(queries.clone());
    let kv = t.constant(keys_values.clone());
    let mut rec = Vec::new();
    let out = net.attention(&mut t, block, q, Some(kv), Some(&mut rec))?;
    Ok((t.value(out).clone(), rec))
}

/// Runs the backbone on one window's tokens with `memory` as queries.
pub fn process_window(
    tokens: &[PatchToken],
    memory: &LatentMemory,
    params: &ModelParams,
    record_attention: bool,
) -> Result<WindowOutput> {
    let mut t = Tape::new();
    let mut net = Net::bind(&mut t, params, false);
    let mem = t.constant_ref(&memory.state);
    let mut rec = Vec::new();
    let latents = net.window(&mut t, tokens, mem, record_attention.then_some(&mut rec))?;
    let update = net.update(&mut t, latents, mem)?;
    Ok(WindowOutput {
        latents: t.value(latents).clone(),
        update: t.value(update).clone(),
        attention: record_attention.then_some(rec),
    })
}

/// `state + window_output`, with the window counter advanced.
pub fn memory_update(memory: &LatentMemory, window_output: &Matrix) -> Result<LatentMemory> {
    Ok(LatentMemory {
        state: memory.state.add(window_output)?,
        windows_seen: memory.windows_seen + 1,
    })
}

/// Class log-probabilities from a memory state.
pub fn classify(memory: &LatentMemory, params: &ModelParams) -> Result<Vec<f64>> {
    let mut t = Tape::new();
    let net = Net::bind(&mut t, params, false);
    let mem = t.constant_ref(&memory.state);
    let out = net.head(&mut t, mem)?;
    Ok(t.value(out).as_slice().to_vec())
}

/// Final decision for a stream.
#[derive(Debug, Clone, PartialEq)]
pub struct Classification {
    pub predicted: usize,
    pub log_probs: Vec<f64>,
    pub windows: usize,
}

/// Index of the largest value; the first one wins ties.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

/// Folds already-built windows into a fresh memory and classifies it.
pub fn classify_windows<I>(windows: I, params: &ModelParams) -> Result<Classification>
where
    I: IntoIterator<Item = WindowResult>,
{
    let mut memory = LatentMemory::new(params);
    for w in windows {
        let out = process_window(&w.tokens, &memory, params, false)?;
        memory = memory_update(&memory, &out.update)?;
    }
    if memory.windows_seen == 0 {
        return Err(Error::NoInformation);
    }
    let log_probs = classify(&memory, params)?;
    Ok(Classification {
        predicted: argmax(&log_probs),
        log_probs,
        windows: memory.windows_seen,
    })
}

/// Online classification: each window is built, processed and folded into
/// the memory before the next one is read.
pub fn classify_stream(
    stream: &EventStream,
    params: &ModelParams,
    repr: &ReprConfig,
) -> Result<Classification> {
    classify_windows(window_iterator(stream, repr), params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backbone::{MemoryRule, ModelConfig};
    use crate::event_io::{generate_synthetic, Motion, SynthSpec};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn tiny_cfg() -> ModelConfig {
        ModelConfig {
            dim: 16,
            latents: 8,
            heads: 2,
            self_blocks: 1,
            grid_h: 4,
            grid_w: 5,
            token_in: 8,
            pos_bands: 3,
            num_classes: 4,
            ..ModelConfig::default()
        }
    }

    fn tokens(n: usize, cfg: &ModelConfig, rng: &mut ChaCha8Rng) -> Vec<PatchToken> {
        (0..n)
            .map(|_| PatchToken {
                values: (0..cfg.token_in).map(|_| rng.gen_range(0.0..2.0)).collect(),
                grid_row: rng.gen_range(0..cfg.grid_h),
                grid_col: rng.gen_range(0..cfg.grid_w),
            })
            .collect()
    }

    #[test]
    fn ff1_of_zero_token_depends_only_on_position() {
        let p = ModelParams::init(&tiny_cfg(), 1).unwrap();
        let tok = |r, c| PatchToken {
            values: vec![0.0; 8],
            grid_row: r,
            grid_col: c,
        };
        // With zero biases the first layer contributes nothing.
        let l = p.layout();
        let pos = p.tensor(l.pos_table).row(5 + 2).to_vec();
        let mut input = vec![0.0; 16];
        input.extend(pos);
        let x = Matrix::from_vec(1, input.len(), input).unwrap();
        let expect = x.matmul(p.tensor(l.ff1_out.w)).unwrap();
        let got = ff1(&tok(1, 2), &p).unwrap();
        assert_eq!(got.len(), 16);
        for (a, b) in got.iter().zip(expect.as_slice()) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_ne!(ff1(&tok(1, 2), &p).unwrap(), ff1(&tok(2, 1), &p).unwrap());
    }

    #[test]
    fn ff1_rejects_off_grid_and_bad_length() {
        let p = ModelParams::init(&tiny_cfg(), 1).unwrap();
        let t = PatchToken {
            values: vec![0.0; 8],
            grid_row: 4,
            grid_col: 0,
        };
        assert!(matches!(
            ff1(&t, &p),
            Err(Error::TokenOutOfGrid { row: 4, .. })
        ));
        let t = PatchToken {
            values: vec![0.0; 7],
            grid_row: 0,
            grid_col: 0,
        };
        assert!(ff1(&t, &p).is_err());
    }

    #[test]
    fn default_ff1_width() {
        let cfg = ModelConfig::default();
        let p = ModelParams::init(&cfg, 0).unwrap();
        let t = PatchToken {
            values: vec![0.5; 144],
            grid_row: 3,
            grid_col: 4,
        };
        assert_eq!(ff1(&t, &p).unwrap().len(), 128);
    }

    #[test]
    fn ff2_with_zero_weights_is_identity() {
        let mut p = ModelParams::init(&tiny_cfg(), 1).unwrap();
        let m = p.layout().ff2;
        for i in [m.fc1.w, m.fc1.b, m.fc2.w, m.fc2.b] {
            p.tensor_mut(i).scale_in_place(0.0);
        }
        let x: Vec<f64> = (0..16).map(|i| i as f64 * 0.3 - 2.0).collect();
        assert_eq!(ff2(&x, &p).unwrap(), x);
        assert!(ff2(&x[..3], &p).is_err());
    }

    #[test]
    fn single_key_gets_all_weight() {
        let p = ModelParams::init(&tiny_cfg(), 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let q = Matrix::random_normal(8, 16, 1.0, &mut rng);
        let kv = Matrix::random_normal(1, 16, 1.0, &mut rng);
        let (_, rec) = attention_block_recorded(&q, &kv, &p, &p.layout().cross).unwrap();
        assert_eq!(rec.len(), 2);
        for a in rec {
            assert!(a.as_slice().iter().all(|&w| w == 1.0));
        }
    }

    #[test]
    fn output_shape_is_independent_of_token_count() {
        let cfg = ModelConfig::default();
        let p = ModelParams::init(&cfg, 3).unwrap();
        let mem = LatentMemory::new(&p);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in [5, 500] {
            let out = process_window(&tokens(n, &cfg, &mut rng), &mem, &p, false).unwrap();
            assert_eq!(out.latents.shape(), (96, 128));
            assert_eq!(out.update.shape(), (96, 128));
        }
    }

    #[test]
    fn token_order_does_not_matter() {
        let cfg = tiny_cfg();
        let p = ModelParams::init(&cfg, 4).unwrap();
        let mem = LatentMemory::new(&p);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let toks = tokens(12, &cfg, &mut rng);
        let mut rev = toks.clone();
        rev.reverse();
        let a = process_window(&toks, &mem, &p, false).unwrap();
        let b = process_window(&rev, &mem, &p, false).unwrap();
        assert!(a.latents.max_abs_diff(&b.latents) < 1e-9);
    }

    #[test]
    fn no_self_blocks_gives_bare_cross_block() {
        let cfg = ModelConfig {
            self_blocks: 0,
            ..tiny_cfg()
        };
        let p = ModelParams::init(&cfg, 5).unwrap();
        let mem = LatentMemory::new(&p);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let toks = tokens(6, &cfg, &mut rng);
        let out = process_window(&toks, &mem, &p, true).unwrap();

        let mut t = Tape::new();
        let net = Net::bind(&mut t, &p, false);
        let kv = net.embed(&mut t, &toks).unwrap();
        let kv = t.value(kv).clone();
        let bare = attention_block(mem.state(), &kv, &p, &p.layout().cross).unwrap();
        assert_eq!(out.latents, bare);
        assert_eq!(out.update, bare.zip_map(mem.state(), |a, b| a - b));
        let att = out.attention.unwrap();
        assert_eq!(att.len(), 2);
        assert_eq!(att[0].shape(), (8, 6));
    }

    #[test]
    fn empty_window_is_rejected() {
        let p = ModelParams::init(&tiny_cfg(), 5).unwrap();
        let mem = LatentMemory::new(&p);
        assert!(matches!(
            process_window(&[], &mem, &p, false),
            Err(Error::EmptyTokens)
        ));
    }

    #[test]
    fn memory_update_algebra() {
        let p = ModelParams::init(&tiny_cfg(), 6).unwrap();
        let m0 = LatentMemory::new(&p);
        assert_eq!(m0.state(), p.tensor(p.layout().latent_init));
        let same = memory_update(&m0, &Matrix::zeros(8, 16)).unwrap();
        assert_eq!(same.state(), m0.state());
        assert_eq!(same.windows_seen(), 1);

        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let a = Matrix::random_normal(8, 16, 1.0, &mut rng);
        let b = Matrix::random_normal(8, 16, 1.0, &mut rng);
        let m2 = memory_update(&memory_update(&m0, &a).unwrap(), &b).unwrap();
        let expect = m0.state().add(&a).unwrap().add(&b).unwrap();
        assert_eq!(m2.state(), &expect);
        assert_eq!(m0.windows_seen(), 0);
        assert!(memory_update(&m0, &Matrix::zeros(2, 2)).is_err());
    }

    #[test]
    fn classify_is_a_distribution_and_pool_symmetric() {
        let p = ModelParams::init(&tiny_cfg(), 7).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let state = Matrix::random_normal(8, 16, 1.0, &mut rng);
        let mem = LatentMemory {
            state: state.clone(),
            windows_seen: 1,
        };
        let lp = classify(&mem, &p).unwrap();
        assert_eq!(lp.len(), 4);
        assert!((lp.iter().map(|v| v.exp()).sum::<f64>() - 1.0).abs() < 1e-6);

        let order: Vec<usize> = (0..8).rev().collect();
        let flipped = LatentMemory {
            state: state.select_rows(&order),
            windows_seen: 1,
        };
        let lp2 = classify(&flipped, &p).unwrap();
        for (a, b) in lp.iter().zip(&lp2) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn untrained_models_are_not_confident() {
        let cfg = ModelConfig {
            num_classes: 4,
            ..ModelConfig::default()
        };
        let unsure = (0..100)
            .filter(|&seed| {
                let p = ModelParams::init(&cfg, seed).unwrap();
                let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
                let mem = LatentMemory {
                    state: Matrix::random_normal(cfg.latents, cfg.dim, 1.0, &mut rng),
                    windows_seen: 1,
                };
                let lp = classify(&mem, &p).unwrap();
                lp.iter().map(|v| v.exp()).fold(0.0, f64::max) < 0.5
            })
            .count();
        assert!(unsure >= 95, "{unsure}");
    }

    fn stream(seed: u64) -> EventStream {
        generate_synthetic(&SynthSpec {
            class_id: Motion::BarRight.id(),
            duration_us: 60_000,
            width: 30,
            height: 24,
            seed,
            ..SynthSpec::default()
        })
        .unwrap()
    }

    fn stream_cfg() -> ModelConfig {
        tiny_cfg().with_sensor(30, 24, &repr())
    }

    fn repr() -> ReprConfig {
        ReprConfig {
            min_patches: 2,
            ..ReprConfig::default()
        }
    }

    #[test]
    fn streaming_equals_batched() {
        let s = stream(1);
        let r = repr();
        let cfg = stream_cfg();
        let p = ModelParams::init(&cfg, 9).unwrap();
        let online = classify_stream(&s, &p, &r).unwrap();
        let windows: Vec<_> = window_iterator(&s, &r).collect();
        assert!(windows.len() >= 2);
        let batched = classify_windows(windows, &p).unwrap();
        assert_eq!(online, batched);
        assert_eq!(online.windows, batched.windows);
        // Running the same stream again starts from a fresh memory.
        assert_eq!(classify_stream(&s, &p, &r).unwrap(), online);
    }

    #[test]
    fn single_window_reduces_to_direct_calls() {
        let s = stream(2);
        let r = ReprConfig {
            delta_t_us: 100_000,
            ..repr()
        };
        let p = ModelParams::init(&stream_cfg(), 10).unwrap();
        let ws: Vec<_> = window_iterator(&s, &r).collect();
        assert_eq!(ws.len(), 1);
        let mem = LatentMemory::new(&p);
        let out = process_window(&ws[0].tokens, &mem, &p, false).unwrap();
        let direct = classify(&memory_update(&mem, &out.update).unwrap(), &p).unwrap();
        assert_eq!(classify_stream(&s, &p, &r).unwrap().log_probs, direct);
    }

    #[test]
    fn empty_stream_has_no_information() {
        let p = ModelParams::init(&stream_cfg(), 11).unwrap();
        let s = EventStream::empty(30, 24);
        assert!(matches!(
            classify_stream(&s, &p, &repr()),
            Err(Error::NoInformation)
        ));
    }

    #[test]
    fn literal_rule_inflates_the_memory() {
        let base = stream_cfg();
        let s = stream(3);
        let r = ReprConfig {
            delta_t_us: 2_000,
            min_patches: 1,
            ..repr()
        };
        let ws: Vec<_> = window_iterator(&s, &r).collect();
        assert!(ws.len() >= 10);
        let norm = |rule| {
            let cfg = ModelConfig {
                memory_rule: rule,
                ..base.clone()
            };
            let p = ModelParams::init(&cfg, 12).unwrap();
            let mut mem = LatentMemory::new(&p);
            for w in &ws {
                let out = process_window(&w.tokens, &mem, &p, false).unwrap();
                mem = memory_update(&mem, &out.update).unwrap();
            }
            mem.state().squared_norm().sqrt()
                / p.tensor(p.layout().latent_init).squared_norm().sqrt()
        };
        let residual = norm(MemoryRule::Residual);
        let literal = norm(MemoryRule::Literal);
        assert!(literal > 100.0 * residual, "{literal} vs {residual}");
    }
}
