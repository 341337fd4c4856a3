use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub lr: f64,
    pub betas: (f64, f64),
    pub weight_decay: f64,
    /// Global L2 norm the summed gradient is clipped to.
    pub grad_clip_norm: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// Epochs without a lower training loss before the LR is halved.
    pub plateau_patience: usize,
    pub seed: u64,
    pub token_drop_p: f64,
    /// Smallest fraction of a sample's windows a temporal crop keeps;
    /// 1 disables cropping.
    pub temporal_crop_frac: f64,
    /// Largest grid offset, in patches, of the random spatial shift.
    pub spatial_shift_max: usize,
    /// Put two independently augmented copies of each sample in its batch.
    pub repeat_augmented: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            betas: (0.9, 0.999),
            weight_decay: 0.01,
            grad_clip_norm: 1.0,
            batch_size: 16,
            epochs: 30,
            plateau_patience: 10,
            seed: 0,
            token_drop_p: 0.1,
            temporal_crop_frac: 0.75,
            spatial_shift_max: 2,
            repeat_augmented: true,
        }
    }
}

impl TrainConfig {
    /// The same config with every augmentation turned off.
    pub fn without_augmentation(self) -> Self {
        Self {
            token_drop_p: 0.0,
            temporal_crop_frac: 1.0,
            spatial_shift_max: 0,
            repeat_augmented: false,
            ..self
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(m.into()));
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return fail("lr must be positive");
        }
        let (b1, b2) = self.betas;
        if !((0.0..1.0).contains(&b1) && (0.0..1.0).contains(&b2)) {
            return fail("betas must lie in [0, 1)");
        }
        if !(self.weight_decay.is_finite() && self.weight_decay >= 0.0) {
            return fail("weight_decay must be >= 0");
        }
        if self.grad_clip_norm.is_nan() || self.grad_clip_norm <= 0.0 {
            return fail("grad_clip_norm must be positive");
        }
        if self.batch_size == 0 {
            return fail("batch_size must be positive");
        }
        if !(0.0..1.0).contains(&self.token_drop_p) {
            return fail("token_drop_p must lie in [0, 1)");
        }
        if !(0.0..=1.0).contains(&self.temporal_crop_frac) {
            return fail("temporal_crop_frac must lie in [0, 1]");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        TrainConfig::default().validate().unwrap();
        TrainConfig::default()
            .without_augmentation()
            .validate()
            .unwrap();
    }

    #[test]
    fn rejects_bad_values() {
        let bad = |f: fn(&mut TrainConfig)| {
            let mut c = TrainConfig::default();
            f(&mut c);
            c.validate().is_err()
        };
        assert!(bad(|c| c.lr = 0.0));
        assert!(bad(|c| c.token_drop_p = 1.0));
        assert!(bad(|c| c.betas = (1.0, 0.9)));
        assert!(bad(|c| c.batch_size = 0));
        assert!(bad(|c| c.grad_clip_norm = f64::NAN));
    }
}
