//! Backbone checks against the naive oracles: gradients of one window, and
//! attention gradients through the loop reference.

mod common;

use evt_core::backbone::{classify_windows, ModelConfig, ModelParams, NamedTensor, Net};
use evt_core::numeric::{grad_check, Fault, GradCheckOptions, Matrix, Tape};
use evt_core::perf::random_tokens;
use evt_core::representation::WindowResult;
use evt_core::training::sample_gradients;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn tiny() -> ModelConfig {
    ModelConfig {
        dim: 16,
        latents: 8,
        heads: 2,
        grid_h: 4,
        grid_w: 4,
        token_in: 12,
        pos_bands: 3,
        ..ModelConfig::default()
    }
}

fn rebuild(params: &ModelParams, values: &[Matrix]) -> ModelParams {
    let tensors = params
        .tensors()
        .iter()
        .zip(values)
        .map(|(nt, v)| NamedTensor {
            name: nt.name.clone(),
            value: v.clone(),
        })
        .collect();
    ModelParams::from_tensors(params.config(), tensors).unwrap()
}

fn window(cfg: &ModelConfig, tokens: usize, seed: u64) -> WindowResult {
    WindowResult {
        tokens: random_tokens(cfg, tokens, seed),
        window_start: 0,
        window_end: 1,
        exhausted: false,
    }
}

fn values(p: &ModelParams) -> Vec<Matrix> {
    p.tensors().iter().map(|nt| nt.value.clone()).collect()
}

#[test]
fn single_window_gradients_match_finite_differences() {
    let cfg = tiny();
    let params = ModelParams::init(&cfg, 2).unwrap();
    let w = [window(&cfg, 5, 9)];
    let (_, _, analytic) = sample_gradients(&params, &w, 2, None).unwrap();
    let f = |v: &[Matrix]| {
        -classify_windows(w.iter().cloned(), &rebuild(&params, v))
            .unwrap()
            .log_probs[2]
    };
    let r = grad_check(f, &values(&params), &analytic, &GradCheckOptions::default());
    assert!(r.max_rel_error < 1e-4, "{r:?}");
}

#[test]
fn layer_norm_fault_is_detected() {
    let cfg = tiny();
    let params = ModelParams::init(&cfg, 3).unwrap();
    let w = [window(&cfg, 5, 4)];
    let mut t = Tape::new();
    t.inject_fault(Fault::LayerNormMean);
    let mut net = Net::bind(&mut t, &params, true);
    let m = net.initial_memory();
    let m = net.step(&mut t, &w[0].tokens, m).unwrap();
    let lp = net.head(&mut t, m).unwrap();
    let picked = t.pick(lp, 0, 0).unwrap();
    let loss = t.scale(picked, -1.0);
    let mut g = t.backward(loss).unwrap();
    let faulty: Vec<Matrix> = net.vars().iter().map(|&v| g.take(v)).collect();
    let f = |v: &[Matrix]| {
        -classify_windows(w.iter().cloned(), &rebuild(&params, v))
            .unwrap()
            .log_probs[0]
    };
    let r = grad_check(f, &values(&params), &faulty, &GradCheckOptions::default());
    assert!(r.max_rel_error > 1e-2, "{r:?}");
}

/// Tape gradients of a cross-attention block against central differences
/// of the naive loop implementation.
#[test]
fn attention_gradients_match_the_naive_reference() {
    let cfg = tiny();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut params = ModelParams::init(&cfg, 5).unwrap();
    common::randomize(&mut params, &mut rng, 0.5);
    let q = Matrix::random_normal(cfg.latents, cfg.dim, 1.0, &mut rng);
    let kv = Matrix::random_normal(6, cfg.dim, 1.0, &mut rng);
    let weights = Matrix::random_normal(cfg.latents, cfg.dim, 1.0, &mut rng);
    let layout = params.layout().clone();
    let block = layout.cross.clone();

    let mut t = Tape::new();
    let mut net = Net::bind(&mut t, &params, true);
    let qv = t.constant(q.clone());
    let kvv = t.constant(kv.clone());
    let out = net.attention(&mut t, &block, qv, Some(kvv), None).unwrap();
    let weighted = t.mul_const(out, weights.clone()).unwrap();
    let root = t.sum(weighted);
    let mut g = t.backward(root).unwrap();
    let analytic: Vec<Matrix> = net.vars().iter().map(|&v| g.take(v)).collect();

    // Only the block's own tensors; every other gradient is exactly zero.
    let mut idx = Vec::new();
    for n in [Some(block.norm_q), block.norm_kv, Some(block.norm_ff)]
        .into_iter()
        .flatten()
    {
        idx.extend([n.gain, n.bias]);
    }
    for l in [
        block.q,
        block.k,
        block.v,
        block.o,
        block.ff.fc1,
        block.ff.fc2,
    ] {
        idx.extend([l.w, l.b]);
    }
    // Softmax ignores a shift shared by a row of scores, so the key bias
    // has no effect at all.
    idx.retain(|&i| i != block.k.b);
    assert!(analytic[block.k.b]
        .as_slice()
        .iter()
        .all(|g| g.abs() < 1e-12));
    let all = values(&params);
    let f = |sub: &[Matrix]| {
        let mut v = all.clone();
        for (&i, m) in idx.iter().zip(sub) {
            v[i] = m.clone();
        }
        let p = rebuild(&params, &v);
        let o = common::naive_attention(&q, &kv, &p, &block, cfg.heads);
        o.as_slice()
            .iter()
            .zip(weights.as_slice())
            .map(|(a, b)| a * b)
            .sum()
    };
    let pick = |v: &[Matrix]| idx.iter().map(|&i| v[i].clone()).collect::<Vec<_>>();
    let r = grad_check(
        f,
        &pick(&all),
        &pick(&analytic),
        &GradCheckOptions::default(),
    );
    assert!(r.checked > 1000);
    assert!(r.max_rel_error < 1e-4, "{r:?}");
}
