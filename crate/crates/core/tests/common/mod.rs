//! Independent reference implementations used as test oracles. Everything
//! here is written from the definitions with plain loops and shares no
//! code with the library beyond its data types.

#![allow(dead_code)]

use evt_core::backbone::{Block, Linear, ModelParams, Norm};
use evt_core::event_io::{Event, EventStream};
use evt_core::numeric::Matrix;
use evt_core::representation::ReprConfig;
use rand::Rng;

/// A sorted random stream on a random sensor no larger than
/// `max_side x max_side`.
pub fn random_stream(
    rng: &mut impl Rng,
    max_side: u16,
    max_events: usize,
    span_us: u64,
) -> EventStream {
    let w = rng.gen_range(1..=max_side);
    let h = rng.gen_range(1..=max_side);
    let n = rng.gen_range(0..=max_events);
    let mut ev: Vec<Event> = (0..n)
        .map(|_| {
            Event::new(
                rng.gen_range(0..span_us),
                rng.gen_range(0..w),
                rng.gen_range(0..h),
                rng.gen_range(0..2),
            )
        })
        .collect();
    ev.sort_by_key(|e| e.t);
    EventStream::new(w, h, ev, None).unwrap()
}

/// Event counts laid out `[y][x][bin][polarity]`, accumulated one event at
/// a time.
pub fn brute_counts(s: &EventStream, start: u64, end: u64, bins: usize) -> Vec<u32> {
    let (w, h) = (usize::from(s.width()), usize::from(s.height()));
    let mut f = vec![0u32; h * w * bins * 2];
    for e in s.events() {
        if e.t < start || e.t >= end {
            continue;
        }
        let mut b = ((e.t - start) as u128 * bins as u128 / (end - start) as u128) as usize;
        if b >= bins {
            b = bins - 1;
        }
        let (x, y) = (usize::from(e.x), usize::from(e.y));
        f[((y * w + x) * bins + b) * 2 + usize::from(e.p)] += 1;
    }
    f
}

/// Smallest pixel count `k` with `k >= m/100 * P^2`.
pub fn brute_threshold(m: f64, p: usize) -> usize {
    let need = m / 100.0 * (p * p) as f64;
    let mut k = 0;
    while (k as f64) < need {
        k += 1;
    }
    k
}

/// `(grid_row, grid_col, values)` of every activated patch, grid
/// row-major, by explicit loops over each patch's pixels.
pub fn brute_patches(
    counts: &[u32],
    w: usize,
    h: usize,
    cfg: &ReprConfig,
) -> Vec<(usize, usize, Vec<f64>)> {
    let (p, bins) = (cfg.patch_size, cfg.bins);
    let threshold = brute_threshold(cfg.min_pixel_pct, p);
    let mut out = Vec::new();
    for gr in 0..h / p {
        for gc in 0..w / p {
            let mut active = 0;
            let mut values = Vec::new();
            for py in 0..p {
                for px in 0..p {
                    let (y, x) = (gr * p + py, gc * p + px);
                    let mut any = false;
                    for b in 0..bins {
                        for pol in 0..2 {
                            let c = counts[((y * w + x) * bins + b) * 2 + pol];
                            any |= c > 0;
                            values.push(f64::from(c).ln_1p());
                        }
                    }
                    active += usize::from(any);
                }
            }
            if active >= threshold {
                out.push((gr, gc, values));
            }
        }
    }
    out
}

/// Smallest expanded window end meeting the patch rule, found by
/// rebuilding the frame for every candidate end.
pub fn brute_window_end(s: &EventStream, cursor: u64, cfg: &ReprConfig) -> (u64, bool) {
    let step = cfg.expansion_step_us.unwrap_or(cfg.delta_t_us);
    let last = s.events().last().map(|e| e.t);
    let (w, h) = (usize::from(s.width()), usize::from(s.height()));
    let mut end = cursor + cfg.delta_t_us;
    loop {
        let counts = brute_counts(s, cursor, end, cfg.bins);
        if brute_patches(&counts, w, h, cfg).len() >= cfg.min_patches {
            return (end, false);
        }
        match last {
            Some(l) if l >= end => end += step,
            _ => return (end, true),
        }
    }
}

pub fn gelu(x: f64) -> f64 {
    let c = (2.0 / std::f64::consts::PI).sqrt();
    0.5 * x * (1.0 + (c * (x + 0.044715 * x * x * x)).tanh())
}

fn norm_rows(x: &Matrix, p: &ModelParams, n: Norm) -> Vec<Vec<f64>> {
    let (g, b) = (p.tensor(n.gain), p.tensor(n.bias));
    (0..x.rows())
        .map(|r| {
            let row = x.row(r);
            let d = row.len() as f64;
            let mean = row.iter().sum::<f64>() / d;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d;
            let inv = 1.0 / (var + 1e-5).sqrt();
            row.iter()
                .enumerate()
                .map(|(j, v)| (v - mean) * inv * g.get(0, j) + b.get(0, j))
                .collect()
        })
        .collect()
}

fn affine(rows: &[Vec<f64>], p: &ModelParams, l: Linear) -> Vec<Vec<f64>> {
    let (w, b) = (p.tensor(l.w), p.tensor(l.b));
    rows.iter()
        .map(|x| {
            (0..w.cols())
                .map(|j| {
                    let mut s = b.get(0, j);
                    for (i, xi) in x.iter().enumerate() {
                        s += xi * w.get(i, j);
                    }
                    s
                })
                .collect()
        })
        .collect()
}

fn to_matrix(rows: Vec<Vec<f64>>) -> Matrix {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    Matrix::from_vec(r, c, rows.into_iter().flatten().collect()).unwrap()
}

/// Pre-norm attention block by explicit loops over queries, keys and
/// heads. Blocks without a key/value norm use the query norm for keys.
pub fn naive_attention(
    q: &Matrix,
    kv: &Matrix,
    p: &ModelParams,
    blk: &Block,
    heads: usize,
) -> Matrix {
    let d = q.cols();
    let dh = d / heads;
    let qn = norm_rows(q, p, blk.norm_q);
    let kvn = norm_rows(kv, p, blk.norm_kv.unwrap_or(blk.norm_q));
    let qp = affine(&qn, p, blk.q);
    let kp = affine(&kvn, p, blk.k);
    let vp = affine(&kvn, p, blk.v);
    let mut mixed = vec![vec![0.0; d]; q.rows()];
    for h in 0..heads {
        for i in 0..q.rows() {
            let scores: Vec<f64> = (0..kv.rows())
                .map(|j| {
                    let mut s = 0.0;
                    for c in h * dh..(h + 1) * dh {
                        s += qp[i][c] * kp[j][c];
                    }
                    s / (dh as f64).sqrt()
                })
                .collect();
            let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
            let total: f64 = exps.iter().sum();
            for (j, e) in exps.iter().enumerate() {
                for c in h * dh..(h + 1) * dh {
                    mixed[i][c] += e / total * vp[j][c];
                }
            }
        }
    }
    let o = affine(&mixed, p, blk.o);
    let a: Vec<Vec<f64>> = (0..q.rows())
        .map(|i| (0..d).map(|c| q.get(i, c) + o[i][c]).collect())
        .collect();
    let am = to_matrix(a.clone());
    let an = norm_rows(&am, p, blk.norm_ff);
    let hidden: Vec<Vec<f64>> = affine(&an, p, blk.ff.fc1)
        .into_iter()
        .map(|r| r.into_iter().map(gelu).collect())
        .collect();
    let f = affine(&hidden, p, blk.ff.fc2);
    to_matrix(
        a.iter()
            .zip(f)
            .map(|(a, f)| a.iter().zip(f).map(|(x, y)| x + y).collect())
            .collect(),
    )
}

/// Replaces every parameter with random values so biases, gains and
/// offsets all take part in a comparison.
pub fn randomize(p: &mut ModelParams, rng: &mut impl Rng, scale: f64) {
    for i in 0..p.tensors().len() {
        for v in p.tensor_mut(i).as_mut_slice() {
            *v = rng.gen_range(-scale..scale);
        }
    }
}

pub fn golden_dir() -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

/// Small fixed stream used for the golden files. Values are integer
/// formulas so the bytes never depend on an RNG implementation.
pub fn golden_stream() -> EventStream {
    let events = (0..40u64)
        .map(|i| {
            Event::new(
                i * 997 + (i * i) % 13,
                ((i * 7) % 17) as u16,
                ((i * 5) % 11) as u16,
                (i % 3 == 0) as u8,
            )
        })
        .collect();
    EventStream::new(17, 11, events, Some(3)).unwrap()
}

pub fn golden_model() -> evt_core::backbone::ModelConfig {
    evt_core::backbone::ModelConfig {
        dim: 8,
        latents: 4,
        self_blocks: 1,
        heads: 2,
        ff_mult: 2,
        pos_bands: 2,
        num_classes: 3,
        grid_h: 2,
        grid_w: 3,
        token_in: 16,
        ..Default::default()
    }
}

pub fn golden_repr() -> ReprConfig {
    ReprConfig {
        delta_t_us: 5000,
        bins: 2,
        patch_size: 2,
        min_pixel_pct: 25.0,
        min_patches: 2,
        expansion_step_us: Some(2500),
    }
}

/// Checkpoint whose tensor entries are exact dyadic fractions given by a
/// formula over (tensor index, entry index).
pub fn golden_checkpoint() -> evt_core::backbone::Checkpoint {
    use evt_core::backbone::{Checkpoint, NamedTensor};
    let cfg = golden_model();
    let shapes = ModelParams::init(&cfg, 0).unwrap();
    let tensors = shapes
        .tensors()
        .iter()
        .enumerate()
        .map(|(t, nt)| {
            let (r, c) = nt.value.shape();
            let data = (0..r * c)
                .map(|k| ((k * 37 + t * 101) % 256) as f64 / 128.0 - 1.0)
                .collect();
            NamedTensor {
                name: nt.name.clone(),
                value: Matrix::from_vec(r, c, data).unwrap(),
            }
        })
        .collect();
    let params = ModelParams::from_tensors(&cfg, tensors).unwrap();
    Checkpoint::new(params, golden_repr())
}

/// The labelled 4-class synthetic set: `count` streams with seeds
/// `first_seed + i` and class `i % 4`.
pub fn synthetic_set(count: usize, first_seed: u64) -> Vec<EventStream> {
    use evt_core::event_io::{generate_synthetic, SynthSpec};
    (0..count)
        .map(|i| {
            generate_synthetic(&SynthSpec {
                class_id: (i % 4) as u32,
                seed: first_seed + i as u64,
                ..SynthSpec::default()
            })
            .unwrap()
        })
        .collect()
}
