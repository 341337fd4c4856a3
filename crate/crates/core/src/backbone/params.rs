use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::ModelConfig;
use super::fourier::fourier_positions;
use crate::error::{Error, Result};
use crate::numeric::Matrix;

/// Weight (`in x out`) and bias (`1 x out`) tensor indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Linear {
    pub w: usize,
    pub b: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Norm {
    pub gain: usize,
    pub bias: usize,
}

/// Two-layer feed-forward sublayer with a GELU in between.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Mlp {
    pub fc1: Linear,
    pub fc2: Linear,
}

/// Tensor indices of one pre-norm attention block. `norm_kv` is present
/// only for cross-attention.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Block {
    pub norm_q: Norm,
    pub norm_kv: Option<Norm>,
    pub q: Linear,
    pub k: Linear,
    pub v: Linear,
    pub o: Linear,
    pub norm_ff: Norm,
    pub ff: Mlp,
}

/// Where every learnable tensor lives in [`ModelParams::tensors`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    pub latent_init: usize,
    pub pos_table: usize,
    pub ff1_in: Linear,
    pub ff1_out: Linear,
    pub ff2: Mlp,
    pub cross: Block,
    pub self_blocks: Vec<Block>,
    pub head_norm: Norm,
    pub head_hidden: Linear,
    pub head_out: Linear,
}

#[derive(Debug, Clone, Copy)]
enum Init {
    Xavier,
    Zeros,
    Ones,
    Latent,
    Fourier,
}

/// Name, shape and initializer of each tensor, in storage order.
struct Spec {
    entries: Vec<(String, (usize, usize), Init)>,
}

impl Spec {
    fn push(&mut self, name: String, shape: (usize, usize), init: Init) -> usize {
        self.entries.push((name, shape, init));
        self.entries.len() - 1
    }

    fn linear(&mut self, name: &str, fan_in: usize, fan_out: usize) -> Linear {
        Linear {
            w: self.push(format!("{name}.weight"), (fan_in, fan_out), Init::Xavier),
            b: self.push(format!("{name}.bias"), (1, fan_out), Init::Zeros),
        }
    }

    fn norm(&mut self, name: &str, dim: usize) -> Norm {
        Norm {
            gain: self.push(format!("{name}.gain"), (1, dim), Init::Ones),
            bias: self.push(format!("{name}.bias"), (1, dim), Init::Zeros),
        }
    }

    fn mlp(&mut self, name: &str, dim: usize, hidden: usize) -> Mlp {
        Mlp {
            fc1: self.linear(&format!("{name}.fc1"), dim, hidden),
            fc2: self.linear(&format!("{name}.fc2"), hidden, dim),
        }
    }

    fn block(&mut self, name: &str, cfg: &ModelConfig, cross: bool) -> Block {
        let d = cfg.dim;
        Block {
            norm_q: self.norm(&format!("{name}.norm_q"), d),
            norm_kv: cross.then(|| self.norm(&format!("{name}.norm_kv"), d)),
            q: self.linear(&format!("{name}.q"), d, d),
            k: self.linear(&format!("{name}.k"), d, d),
            v: self.linear(&format!("{name}.v"), d, d),
            o: self.linear(&format!("{name}.o"), d, d),
            norm_ff: self.norm(&format!("{name}.norm_ff"), d),
            ff: self.mlp(&format!("{name}.ff"), d, cfg.ff_hidden()),
        }
    }
}

fn spec(cfg: &ModelConfig) -> (Layout, Spec) {
    let mut s = Spec {
        entries: Vec::new(),
    };
    let d = cfg.dim;
    let latent_init = s.push("latent_init".into(), (cfg.latents, d), Init::Latent);
    let pos_table = s.push(
        "pos_table".into(),
        (cfg.grid_h * cfg.grid_w, cfg.pos_dim()),
        Init::Fourier,
    );
    let ff1_in = s.linear("ff1.in", cfg.token_in, d);
    let ff1_out = s.linear("ff1.out", d + cfg.pos_dim(), d);
    let ff2 = s.mlp("ff2", d, cfg.ff_hidden());
    let cross = s.block("cross", cfg, true);
    let self_blocks = (0..cfg.self_blocks)
        .map(|i| s.block(&format!("self{i}"), cfg, false))
        .collect();
    let head_norm = s.norm("head.norm", d);
    let head_hidden = s.linear("head.hidden", d, d);
    let head_out = s.linear("head.out", d, cfg.num_classes);
    let layout = Layout {
        latent_init,
        pos_table,
        ff1_in,
        ff1_out,
        ff2,
        cross,
        self_blocks,
        head_norm,
        head_hidden,
        head_out,
    };
    (layout, s)
}

/// A named learnable array.
#[derive(Debug, Clone, PartialEq)]
pub struct NamedTensor {
    pub name: String,
    pub value: Matrix,
}

/// Every learnable array of the network plus the config that shaped it.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    config: ModelConfig,
    layout: Layout,
    tensors: Vec<NamedTensor>,
}

impl ModelParams {
    /// Fresh parameters: Glorot-uniform weights, zero biases, unit norm
    /// gains, Gaussian latents and the Fourier position table.
    pub fn init(config: &ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let (layout, spec) = spec(config);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let tensors = spec
            .entries
            .into_iter()
            .map(|(name, (r, c), init)| {
                let value = match init {
                    Init::Xavier => {
                        let bound = (6.0 / (r + c) as f64).sqrt();
                        Matrix::random_uniform(r, c, bound, &mut rng)
                    }
                    Init::Zeros => Matrix::zeros(r, c),
                    Init::Ones => Matrix::filled(r, c, 1.0),
                    Init::Latent => Matrix::random_normal(r, c, config.latent_init_std, &mut rng),
                    Init::Fourier => {
                        fourier_positions(config.grid_h, config.grid_w, config.pos_bands)
                    }
                };
                NamedTensor { name, value }
            })
            .collect();
        Ok(Self {
            config: config.clone(),
            layout,
            tensors,
        })
    }

    /// Reassembles parameters from stored tensors, checking that names and
    /// shapes match what `config` prescribes.
    pub fn from_tensors(config: &ModelConfig, tensors: Vec<NamedTensor>) -> Result<Self> {
        config.validate()?;
        let (layout, spec) = spec(config);
        if tensors.len() != spec.entries.len() {
            return Err(Error::Checkpoint(format!(
                "expected {} tensors, found {}",
                spec.entries.len(),
                tensors.len()
            )));
        }
        for (t, (name, shape, _)) in tensors.iter().zip(&spec.entries) {
            if &t.name != name || t.value.shape() != *shape {
                return Err(Error::Checkpoint(format!(
                    "tensor {} {:?} where {} {:?} was expected",
                    t.name,
                    t.value.shape(),
                    name,
                    shape
                )));
            }
        }
        Ok(Self {
            config: config.clone(),
            layout,
            tensors,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn tensors(&self) -> &[NamedTensor] {
        &self.tensors
    }

    pub fn tensor(&self, i: usize) -> &Matrix {
        &self.tensors[i].value
    }

    pub fn tensor_mut(&mut self, i: usize) -> &mut Matrix {
        &mut self.tensors[i].value
    }

    pub fn by_name(&self, name: &str) -> Option<&Matrix> {
        self.tensors
            .iter()
            .find(|t| t.name == name)
            .map(|t| &t.value)
    }

    /// Total number of learnable scalars.
    pub fn count(&self) -> usize {
        self.tensors.iter().map(|t| t.value.len()).sum()
    }
}

/// Learnable scalar count implied by a config, without allocating.
pub fn param_count(config: &ModelConfig) -> usize {
    spec(config)
        .1
        .entries
        .iter()
        .map(|(_, (r, c), _)| r * c)
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> ModelConfig {
        ModelConfig {
            dim: 8,
            latents: 4,
            heads: 2,
            grid_h: 3,
            grid_w: 4,
            token_in: 8,
            pos_bands: 2,
            ..ModelConfig::default()
        }
    }

    #[test]
    fn init_is_deterministic_and_shaped() {
        let a = ModelParams::init(&tiny(), 3).unwrap();
        let b = ModelParams::init(&tiny(), 3).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, ModelParams::init(&tiny(), 4).unwrap());
        assert_eq!(a.count(), param_count(&tiny()));
        assert_eq!(a.tensor(a.layout().latent_init).shape(), (4, 8));
        assert_eq!(a.tensor(a.layout().pos_table).shape(), (12, 8));
        assert_eq!(a.layout().self_blocks.len(), 2);
        assert!(a.layout().cross.norm_kv.is_some());
        assert!(a.layout().self_blocks[0].norm_kv.is_none());
    }

    #[test]
    fn names_are_unique() {
        let p = ModelParams::init(&tiny(), 0).unwrap();
        let mut names: Vec<_> = p.tensors().iter().map(|t| t.name.as_str()).collect();
        names.sort_unstable();
        names.dedup();
        assert_eq!(names.len(), p.tensors().len());
    }

    #[test]
    fn latent_init_statistics() {
        let cfg = ModelConfig {
            latents: 96,
            dim: 128,
            ..tiny()
        };
        let p = ModelParams::init(&cfg, 11).unwrap();
        let l = p.tensor(p.layout().latent_init);
        let n = l.len() as f64;
        let mean = l.sum() / n;
        let std = (l.squared_norm() / n - mean * mean).sqrt();
        assert!(mean.abs() < 0.01, "{mean}");
        assert!((std - 0.2).abs() < 0.01, "{std}");
    }

    #[test]
    fn from_tensors_checks_shapes() {
        let p = ModelParams::init(&tiny(), 0).unwrap();
        let mut ts = p.tensors().to_vec();
        assert!(ModelParams::from_tensors(&tiny(), ts.clone()).is_ok());
        ts[1].value = Matrix::zeros(1, 1);
        assert!(ModelParams::from_tensors(&tiny(), ts).is_err());
        let bigger = ModelConfig { dim: 16, ..tiny() };
        assert!(ModelParams::from_tensors(&bigger, p.tensors().to_vec()).is_err());
    }
}
