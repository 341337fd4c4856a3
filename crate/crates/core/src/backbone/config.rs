use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::representation::ReprConfig;

/// How a window's result is folded into the latent memory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MemoryRule {
    /// Add the change the window made to the latents (final latents minus
    /// the incoming memory). The residual paths of the blocks already carry
    /// the incoming memory, so this keeps the state from doubling per window.
    #[default]
    Residual,
    /// Add the final latents themselves.
    Literal,
}

/// Upper bound on every size field, so that shape arithmetic cannot
/// overflow.
pub const MAX_EXTENT: usize = 1 << 16;

/// Network hyperparameters. Defaults follow the reference setup: 128-wide
/// tokens and latents, 96 latents, one cross block and two self blocks
/// with 4 heads, 16 Fourier bands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    /// Token and latent width `D`.
    pub dim: usize,
    /// Number of latent vectors `M`.
    pub latents: usize,
    pub self_blocks: usize,
    pub heads: usize,
    /// Hidden width of every feed-forward sublayer, as a multiple of `dim`.
    pub ff_mult: usize,
    pub pos_bands: usize,
    pub num_classes: usize,
    pub grid_h: usize,
    pub grid_w: usize,
    /// Flattened token length `P^2 * B * 2`.
    pub token_in: usize,
    pub dropout_p: f64,
    pub latent_init_std: f64,
    pub memory_rule: MemoryRule,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            dim: 128,
            latents: 96,
            self_blocks: 2,
            heads: 4,
            ff_mult: 2,
            pos_bands: 16,
            num_classes: 4,
            grid_h: 21,
            grid_w: 21,
            token_in: 144,
            dropout_p: 0.1,
            latent_init_std: 0.2,
            memory_rule: MemoryRule::Residual,
        }
    }
}

impl ModelConfig {
    /// Fills the sensor-dependent fields from a sensor size and
    /// representation config.
    pub fn with_sensor(mut self, width: u16, height: u16, repr: &ReprConfig) -> Self {
        let (gh, gw) = repr.grid_dims(width, height);
        self.grid_h = gh;
        self.grid_w = gw;
        self.token_in = repr.token_len();
        self
    }

    pub fn pos_dim(&self) -> usize {
        4 * self.pos_bands
    }

    pub fn head_dim(&self) -> usize {
        self.dim / self.heads
    }

    pub fn ff_hidden(&self) -> usize {
        self.ff_mult * self.dim
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        for (name, v) in [
            ("dim", self.dim),
            ("latents", self.latents),
            ("heads", self.heads),
            ("ff_mult", self.ff_mult),
            ("pos_bands", self.pos_bands),
            ("grid_h", self.grid_h),
            ("grid_w", self.grid_w),
            ("token_in", self.token_in),
        ] {
            if v == 0 {
                return fail(format!("{name} must be positive"));
            }
        }
        if let Some((name, _)) = [
            ("dim", self.dim),
            ("latents", self.latents),
            ("self_blocks", self.self_blocks),
            ("heads", self.heads),
            ("ff_mult", self.ff_mult),
            ("pos_bands", self.pos_bands),
            ("num_classes", self.num_classes),
            ("grid_h", self.grid_h),
            ("grid_w", self.grid_w),
            ("token_in", self.token_in),
        ]
        .into_iter()
        .find(|&(_, v)| v > MAX_EXTENT)
        {
            return fail(format!("{name} exceeds {MAX_EXTENT}"));
        }
        if !self.dim.is_multiple_of(self.heads) {
            return fail(format!(
                "dim {} not divisible by heads {}",
                self.dim, self.heads
            ));
        }
        if self.num_classes < 2 {
            return fail("num_classes must be >= 2".into());
        }
        if !(0.0..1.0).contains(&self.dropout_p) {
            return fail("dropout_p must lie in [0, 1)".into());
        }
        if !(self.latent_init_std.is_finite() && self.latent_init_std >= 0.0) {
            return fail("latent_init_std must be finite and >= 0".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let c = ModelConfig::default();
        c.validate().unwrap();
        assert_eq!(c.pos_dim(), 64);
        assert_eq!(c.head_dim(), 32);
    }

    #[test]
    fn sensor_fields() {
        let c = ModelConfig::default().with_sensor(240, 180, &ReprConfig::default());
        assert_eq!((c.grid_h, c.grid_w, c.token_in), (30, 40, 144));
    }

    #[test]
    fn rejects_bad_values() {
        let bad = |f: fn(&mut ModelConfig)| {
            let mut c = ModelConfig::default();
            f(&mut c);
            c.validate().is_err()
        };
        assert!(bad(|c| c.heads = 3));
        assert!(bad(|c| c.num_classes = 1));
        assert!(bad(|c| c.dropout_p = 1.0));
        assert!(bad(|c| c.dim = 0));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(serde_json::from_str::<ModelConfig>(r#"{"dim": 8, "depth": 3}"#).is_err());
        let c: ModelConfig = serde_json::from_str(r#"{"dim": 8, "heads": 2}"#).unwrap();
        assert_eq!((c.dim, c.latents), (8, 96));
    }
}
