use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::augment::augment;
use super::config::TrainConfig;
use super::optim::{clip_grad_norm, nll_loss, optimizer_step, OptimizerState};
use crate::backbone::{argmax, classify_windows, ModelConfig, ModelParams, Net};
use crate::error::{Error, Result};
use crate::event_io::EventStream;
use crate::numeric::{Matrix, Tape};
use crate::representation::{window_iterator, ReprConfig, WindowResult};

/// A stream reduced to its windows, with its class.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub windows: Vec<WindowResult>,
    pub label: usize,
}

/// Windows every labeled stream. Streams that yield no window carry no
/// information and are left out; the second value counts them.
pub fn prepare(streams: &[EventStream], repr: &ReprConfig) -> Result<(Vec<Sample>, usize)> {
    let mut samples = Vec::with_capacity(streams.len());
    let mut skipped = 0;
    for (i, s) in streams.iter().enumerate() {
        let label = s
            .label()
            .ok_or_else(|| Error::Dataset(format!("stream {i} has no label")))?;
        let windows: Vec<_> = window_iterator(s, repr).collect();
        if windows.is_empty() {
            skipped += 1;
            continue;
        }
        samples.push(Sample {
            windows,
            label: label as usize,
        });
    }
    Ok((samples, skipped))
}

/// Loss, log-probabilities and parameter gradients for one sample, with
/// dropout when `dropout_seed` is given.
pub fn sample_gradients(
    params: &ModelParams,
    windows: &[WindowResult],
    target: usize,
    dropout_seed: Option<u64>,
) -> Result<(f64, Vec<f64>, Vec<Matrix>)> {
    let classes = params.config().num_classes;
    if target >= classes {
        return Err(Error::TargetOutOfRange { target, classes });
    }
    let mut t = Tape::new();
    let mut net = Net::bind(&mut t, params, true);
    if let Some(seed) = dropout_seed {
        net = net.with_dropout(seed);
    }
    let mut memory = net.initial_memory();
    for w in windows {
        memory = net.step(&mut t, &w.tokens, memory)?;
    }
    let lp = net.head(&mut t, memory)?;
    let picked = t.pick(lp, 0, target)?;
    let loss = t.scale(picked, -1.0);
    let mut grads = t.backward(loss)?;
    let g = net.vars().iter().map(|&v| grads.take(v)).collect();
    Ok((t.value(loss).get(0, 0), t.value(lp).as_slice().to_vec(), g))
}

/// Mean NLL and accuracy of clean (non-augmented, dropout-free) inference.
pub fn evaluate(params: &ModelParams, samples: &[Sample]) -> Result<(f64, f64)> {
    if samples.is_empty() {
        return Ok((f64::NAN, f64::NAN));
    }
    let mut loss = 0.0;
    let mut correct = 0;
    for s in samples {
        let c = classify_windows(s.windows.iter().cloned(), params)?;
        loss += nll_loss(&c.log_probs, s.label)?;
        correct += usize::from(c.predicted == s.label);
    }
    let n = samples.len() as f64;
    Ok((loss / n, correct as f64 / n))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    /// Learning rate used during this epoch.
    pub lr: f64,
    /// Mean loss over the epoch's augmented training items.
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub test_loss: Option<f64>,
    pub test_accuracy: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    pub params: ModelParams,
    pub history: Vec<EpochMetrics>,
    /// Streams without any window, left out of training or testing.
    pub skipped: usize,
}

/// Deterministic 64-bit mix of a seed with stream coordinates.
fn derive_seed(seed: u64, parts: &[u64]) -> u64 {
    let mut z = seed;
    for &p in parts {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15).wrapping_add(p);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^= z >> 31;
    }
    z
}

fn check_inputs(
    samples: &[Sample],
    streams: &[EventStream],
    model: &ModelConfig,
    repr: &ReprConfig,
) -> Result<()> {
    if model.token_in != repr.token_len() {
        return Err(Error::Config(format!(
            "token_in {} but the representation gives {}",
            model.token_in,
            repr.token_len()
        )));
    }
    for s in streams {
        let grid = repr.grid_dims(s.width(), s.height());
        if grid != (model.grid_h, model.grid_w) {
            return Err(Error::Config(format!(
                "a {}x{} stream gives a {grid:?} grid, the model expects ({}, {})",
                s.width(),
                s.height(),
                model.grid_h,
                model.grid_w
            )));
        }
    }
    if let Some(s) = samples.iter().find(|s| s.label >= model.num_classes) {
        return Err(Error::TargetOutOfRange {
            target: s.label,
            classes: model.num_classes,
        });
    }
    Ok(())
}

pub fn train(
    train_set: &[EventStream],
    test_set: &[EventStream],
    model: &ModelConfig,
    repr: &ReprConfig,
    cfg: &TrainConfig,
) -> Result<TrainReport> {
    train_with(train_set, test_set, model, repr, cfg, |_| {})
}

/// [`train`] that reports every finished epoch to `on_epoch`.
pub fn train_with(
    train_set: &[EventStream],
    test_set: &[EventStream],
    model: &ModelConfig,
    repr: &ReprConfig,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochMetrics),
) -> Result<TrainReport> {
    model.validate()?;
    repr.validate()?;
    cfg.validate()?;
    if train_set.is_empty() {
        return Err(Error::Dataset("empty training set".into()));
    }
    let (train_samples, skipped_train) = prepare(train_set, repr)?;
    let (test_samples, skipped_test) = prepare(test_set, repr)?;
    check_inputs(&train_samples, train_set, model, repr)?;
    check_inputs(&test_samples, test_set, model, repr)?;
    let mut classes: Vec<usize> = train_samples.iter().map(|s| s.label).collect();
    classes.sort_unstable();
    classes.dedup();
    if classes.len() < 2 {
        return Err(Error::Dataset(format!(
            "training needs at least 2 classes, found {}",
            classes.len()
        )));
    }

    let mut params = ModelParams::init(model, derive_seed(cfg.seed, &[0]))?;
    let mut state = OptimizerState::new(&params);
    let grid = (model.grid_h, model.grid_w);
    let copies = if cfg.repeat_augmented { 2 } else { 1 };
    let mut lr = cfg.lr;
    let mut best = f64::INFINITY;
    let mut stale = 0;
    let mut history = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        let mut order: Vec<usize> = (0..train_samples.len()).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(derive_seed(
            cfg.seed,
            &[1, epoch as u64],
        )));
        let mut loss_sum = 0.0;
        let mut correct = 0;
        let mut items = 0;
        for batch in order.chunks(cfg.batch_size) {
            let mut acc: Option<Vec<Matrix>> = None;
            let mut n = 0;
            for &i in batch {
                let s = &train_samples[i];
                for copy in 0..copies {
                    let seed = derive_seed(cfg.seed, &[2, epoch as u64, i as u64, copy]);
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    let windows = augment(&s.windows, cfg, grid, &mut rng);
                    let (loss, lp, g) =
                        sample_gradients(&params, &windows, s.label, Some(seed ^ 1))?;
                    loss_sum += loss;
                    correct += usize::from(argmax(&lp) == s.label);
                    items += 1;
                    n += 1;
                    match acc.as_mut() {
                        None => acc = Some(g),
                        Some(a) => a.iter_mut().zip(&g).for_each(|(a, g)| a.add_assign(g)),
                    }
                }
            }
            let mut grads = acc.expect("non-empty batch");
            let inv = 1.0 / n as f64;
            grads.iter_mut().for_each(|g| g.scale_in_place(inv));
            clip_grad_norm(&mut grads, cfg.grad_clip_norm);
            optimizer_step(&mut params, &grads, &mut state, cfg, lr)?;
        }

        let train_loss = loss_sum / items as f64;
        if !train_loss.is_finite() {
            return Err(Error::NonFinite(format!("training loss at epoch {epoch}")));
        }
        let (test_loss, test_accuracy) = if test_samples.is_empty() {
            (None, None)
        } else {
            let (l, a) = evaluate(&params, &test_samples)?;
            (Some(l), Some(a))
        };
        let m = EpochMetrics {
            epoch,
            lr,
            train_loss,
            train_accuracy: correct as f64 / items as f64,
            test_loss,
            test_accuracy,
        };
        on_epoch(&m);
        history.push(m);

        if train_loss < best {
            best = train_loss;
            stale = 0;
        } else {
            stale += 1;
            if stale >= cfg.plateau_patience {
                lr *= 0.5;
                stale = 0;
            }
        }
    }
    Ok(TrainReport {
        params,
        history,
        skipped: skipped_train + skipped_test,
    })
}
