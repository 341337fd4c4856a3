use super::config::TrainConfig;
use crate::backbone::ModelParams;
use crate::error::{Error, Result};
use crate::numeric::Matrix;

/// `-log_probs[target]`.
pub fn nll_loss(log_probs: &[f64], target: usize) -> Result<f64> {
    log_probs
        .get(target)
        .map(|v| -v)
        .ok_or(Error::TargetOutOfRange {
            target,
            classes: log_probs.len(),
        })
}

/// AdamW moments, one pair per parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub m: Vec<Matrix>,
    pub v: Vec<Matrix>,
    pub step: u64,
}

impl OptimizerState {
    pub fn new(params: &ModelParams) -> Self {
        let zeros: Vec<Matrix> = params
            .tensors()
            .iter()
            .map(|t| Matrix::zeros(t.value.rows(), t.value.cols()))
            .collect();
        Self {
            m: zeros.clone(),
            v: zeros,
            step: 0,
        }
    }
}

pub fn global_norm(grads: &[Matrix]) -> f64 {
    grads.iter().map(Matrix::squared_norm).sum::<f64>().sqrt()
}

/// Rescales `grads` so their global L2 norm is at most `max_norm`; returns
/// the norm before clipping.
pub fn clip_grad_norm(grads: &mut [Matrix], max_norm: f64) -> f64 {
    let norm = global_norm(grads);
    if norm > max_norm {
        let s = max_norm / norm;
        for g in grads.iter_mut() {
            g.scale_in_place(s);
        }
    }
    norm
}

/// One AdamW update with learning rate `lr`; decay is decoupled from the
/// adaptive ratio.
pub fn optimizer_step(
    params: &mut ModelParams,
    grads: &[Matrix],
    state: &mut OptimizerState,
    cfg: &TrainConfig,
    lr: f64,
) -> Result<()> {
    let n = params.tensors().len();
    if grads.len() != n || state.m.len() != n || state.v.len() != n {
        return Err(Error::Shape(format!(
            "{} gradients and {} moments for {n} tensors",
            grads.len(),
            state.m.len()
        )));
    }
    for (i, g) in grads.iter().enumerate() {
        let shape = params.tensor(i).shape();
        if g.shape() != shape || state.m[i].shape() != shape || state.v[i].shape() != shape {
            return Err(Error::Shape(format!(
                "gradient {:?} for tensor {:?}",
                g.shape(),
                shape
            )));
        }
    }
    state.step += 1;
    let (b1, b2) = cfg.betas;
    let step = i32::try_from(state.step).unwrap_or(i32::MAX);
    let c1 = 1.0 - b1.powi(step);
    let c2 = 1.0 - b2.powi(step);
    let wd = cfg.weight_decay;
    for (i, g) in grads.iter().enumerate() {
        let m = state.m[i].as_mut_slice();
        let v = state.v[i].as_mut_slice();
        let theta = params.tensor_mut(i).as_mut_slice();
        for j in 0..theta.len() {
            let gj = g.as_slice()[j];
            m[j] = b1 * m[j] + (1.0 - b1) * gj;
            v[j] = b2 * v[j] + (1.0 - b2) * gj * gj;
            let mh = m[j] / c1;
            let vh = v[j] / c2;
            theta[j] -= lr * (mh / (vh.sqrt() + 1e-8) + wd * theta[j]);
        }
    }
    Ok(())
}
