//! The network expressed as tape operations, shared by inference, training
//! and the FLOP harness.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::{MemoryRule, ModelConfig};
use super::params::{Block, Linear, Mlp, ModelParams, Norm};
use crate::error::{Error, Result};
use crate::numeric::{Matrix, Section, Tape, Var};
use crate::representation::PatchToken;

struct Dropout {
    p: f64,
    rng: ChaCha8Rng,
}

/// Parameters bound to a tape, plus optional dropout state.
pub struct Net<'a> {
    params: &'a ModelParams,
    vars: Vec<Var>,
    dropout: Option<Dropout>,
}

impl<'a> Net<'a> {
    /// Places every tensor on `tape`, as differentiable leaves when
    /// `trainable`, as constants otherwise.
    pub fn bind(tape: &mut Tape<'a>, params: &'a ModelParams, trainable: bool) -> Self {
        let vars = params
            .tensors()
            .iter()
            .map(|t| {
                if trainable {
                    tape.param(&t.value)
                } else {
                    tape.constant_ref(&t.value)
                }
            })
            .collect();
        Self {
            params,
            vars,
            dropout: None,
        }
    }

    /// Enables inverted dropout with the model's rate, seeded for
    /// reproducibility. A zero rate leaves the net unchanged.
    pub fn with_dropout(mut self, seed: u64) -> Self {
        let p = self.params.config().dropout_p;
        if p > 0.0 {
            self.dropout = Some(Dropout {
                p,
                rng: ChaCha8Rng::seed_from_u64(seed),
            });
        }
        self
    }

    /// Tape handles of the parameters, in [`ModelParams::tensors`] order.
    pub fn vars(&self) -> &[Var] {
        &self.vars
    }

    pub fn config(&self) -> &ModelConfig {
        self.params.config()
    }

    fn v(&self, i: usize) -> Var {
        self.vars[i]
    }

    fn linear(&self, t: &mut Tape<'a>, x: Var, l: Linear) -> Result<Var> {
        let y = t.matmul(x, self.v(l.w))?;
        t.add_row(y, self.v(l.b))
    }

    fn norm(&self, t: &mut Tape<'a>, x: Var, n: Norm) -> Result<Var> {
        t.layer_norm(x, self.v(n.gain), self.v(n.bias))
    }

    fn mlp(&self, t: &mut Tape<'a>, x: Var, m: Mlp) -> Result<Var> {
        let h = self.linear(t, x, m.fc1)?;
        let h = t.gelu(h);
        self.linear(t, h, m.fc2)
    }

    fn dropout(&mut self, t: &mut Tape<'a>, x: Var) -> Result<Var> {
        let Some(d) = self.dropout.as_mut() else {
            return Ok(x);
        };
        let (r, c) = t.value(x).shape();
        let keep = 1.0 - d.p;
        let mask = Matrix::from_fn(r, c, |_, _| {
            if d.rng.gen::<f64>() < keep {
                1.0 / keep
            } else {
                0.0
            }
        });
        t.mul_const(x, mask)
    }

    /// Stacks tokens into a `T x token_in` matrix and returns it with each
    /// token's row in the position table.
    pub fn token_matrix(&self, tokens: &[PatchToken]) -> Result<(Matrix, Vec<usize>)> {
        let cfg = self.config();
        let mut data = Vec::with_capacity(tokens.len() * cfg.token_in);
        let mut pos = Vec::with_capacity(tokens.len());
        for tok in tokens {
            if tok.values.len() != cfg.token_in {
                return Err(Error::Shape(format!(
                    "token of length {} for token_in {}",
                    tok.values.len(),
                    cfg.token_in
                )));
            }
            if tok.grid_row >= cfg.grid_h || tok.grid_col >= cfg.grid_w {
                return Err(Error::TokenOutOfGrid {
                    row: tok.grid_row,
                    col: tok.grid_col,
                    grid_h: cfg.grid_h,
                    grid_w: cfg.grid_w,
                });
            }
            data.extend_from_slice(&tok.values);
            pos.push(tok.grid_row * cfg.grid_w + tok.grid_col);
        }
        Ok((Matrix::from_vec(tokens.len(), cfg.token_in, data)?, pos))
    }

    /// Token embedding: linear to D, concatenated position features, linear
    /// back to D.
    pub fn ff1(&self, t: &mut Tape<'a>, tokens: Var, pos: &[usize]) -> Result<Var> {
        let l = self.params.layout();
        let h = self.linear(t, tokens, l.ff1_in)?;
        let p = t.gather_rows(self.v(l.pos_table), pos)?;
        let h = t.concat_cols(&[h, p])?;
        self.linear(t, h, l.ff1_out)
    }

    /// Feed-forward refinement with a skip connection.
    pub fn ff2(&self, t: &mut Tape<'a>, x: Var) -> Result<Var> {
        let f = self.mlp(t, x, self.params.layout().ff2)?;
        t.add(x, f)
    }

    /// Runs `ff1` then `ff2` over a token list; FLOPs are attributed to the
    /// matching sections.
    pub fn embed(&self, t: &mut Tape<'a>, tokens: &[PatchToken]) -> Result<Var> {
        let (m, pos) = self.token_matrix(tokens)?;
        let x = t.constant(m);
        let prev = t.set_section(Section::Ff1);
        let h = self.ff1(t, x, &pos)?;
        t.set_section(Section::Ff2);
        let h = self.ff2(t, h)?;
        t.set_section(prev);
        Ok(h)
    }

    /// Pre-norm attention block. `keys_values = None` means self-attention.
    /// With `record`, the per-head attention weights are appended to it.
    pub fn attention(
        &mut self,
        t: &mut Tape<'a>,
        block: &Block,
        queries: Var,
        keys_values: Option<Var>,
        mut record: Option<&mut Vec<Matrix>>,
    ) -> Result<Var> {
        let cfg = self.config();
        let (dim, heads, dh) = (cfg.dim, cfg.heads, cfg.head_dim());
        if t.value(queries).cols() != dim {
            return Err(Error::Shape(format!(
                "queries have {} columns, model width is {dim}",
                t.value(queries).cols()
            )));
        }
        let qn = self.norm(t, queries, block.norm_q)?;
        let kvn = match (keys_values, block.norm_kv) {
            (None, _) => qn,
            (Some(kv), Some(n)) => self.norm(t, kv, n)?,
            (Some(kv), None) => self.norm(t, kv, block.norm_q)?,
        };
        let q = self.linear(t, qn, block.q)?;
        let k = self.linear(t, kvn, block.k)?;
        let v = self.linear(t, kvn, block.v)?;
        let scale = 1.0 / (dh as f64).sqrt();
        let mut outs = Vec::with_capacity(heads);
        for h in 0..heads {
            let qh = t.slice_cols(q, h * dh, dh)?;
            let kh = t.slice_cols(k, h * dh, dh)?;
            let vh = t.slice_cols(v, h * dh, dh)?;
            let s = t.matmul_nt(qh, kh)?;
            let s = t.scale(s, scale);
            let a = t.softmax_rows(s);
            if let Some(rec) = record.as_deref_mut() {
                rec.push(t.value(a).clone());
            }
            outs.push(t.matmul(a, vh)?);
        }
        let o = t.concat_cols(&outs)?;
        let o = self.linear(t, o, block.o)?;
        let o = self.dropout(t, o)?;
        let a = t.add(queries, o)?;
        let an = self.norm(t, a, block.norm_ff)?;
        let f = self.mlp(t, an, block.ff)?;
        let f = self.dropout(t, f)?;
        t.add(a, f)
    }

    /// Final latents of one window: embed the tokens, cross-attend from
    /// `memory`, then the self-attention stack.
    pub fn window(
        &mut self,
        t: &mut Tape<'a>,
        tokens: &[PatchToken],
        memory: Var,
        record: Option<&mut Vec<Matrix>>,
    ) -> Result<Var> {
        if tokens.is_empty() {
            return Err(Error::EmptyTokens);
        }
        let params: &'a ModelParams = self.params;
        let layout = params.layout();
        let kv = self.embed(t, tokens)?;
        let prev = t.set_section(Section::CrossAttention);
        let mut x = self.attention(t, &layout.cross, memory, Some(kv), record)?;
        t.set_section(Section::SelfAttention);
        for b in &layout.self_blocks {
            x = self.attention(t, b, x, None, None)?;
        }
        t.set_section(prev);
        Ok(x)
    }

    /// The amount added to the memory for a window with final `latents`.
    pub fn update(&self, t: &mut Tape<'a>, latents: Var, memory: Var) -> Result<Var> {
        match self.config().memory_rule {
            MemoryRule::Residual => {
                let prev = t.set_section(Section::Memory);
                let u = t.sub(latents, memory);
                t.set_section(prev);
                u
            }
            MemoryRule::Literal => Ok(latents),
        }
    }

    /// Window step as used in training: returns the next memory.
    pub fn step(&mut self, t: &mut Tape<'a>, tokens: &[PatchToken], memory: Var) -> Result<Var> {
        let latents = self.window(t, tokens, memory, None)?;
        let u = self.update(t, latents, memory)?;
        let prev = t.set_section(Section::Memory);
        let next = t.add(memory, u);
        t.set_section(prev);
        next
    }

    /// Class log-probabilities (`1 x C`) from a memory state. The memory
    /// is normalized first since its scale grows with the window count.
    pub fn head(&self, t: &mut Tape<'a>, memory: Var) -> Result<Var> {
        let l = self.params.layout();
        let prev = t.set_section(Section::Classifier);
        let h = self.norm(t, memory, l.head_norm)?;
        let h = self.linear(t, h, l.head_hidden)?;
        let h = t.gelu(h);
        let g = t.mean_rows(h);
        let o = self.linear(t, g, l.head_out)?;
        let out = t.log_softmax_rows(o);
        t.set_section(prev);
        Ok(out)
    }

    /// The initial memory as a tape node.
    pub fn initial_memory(&self) -> Var {
        self.v(self.params.layout().latent_init)
    }
}
