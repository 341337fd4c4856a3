//! Reverse-mode differentiation over a recorded sequence of matrix ops.
//!
//! Every op appends a node holding its value and enough context for the
//! backward rule. Nodes are only ever appended, so index order is a
//! topological order and [`Tape::backward`] walks it in reverse.
//!
//! The tape also counts forward FLOPs per [`Section`], which the perf
//! harness compares against its analytic model.

use super::cost;
use super::matrix::{gemm, Matrix};
use crate::error::{Error, Result};

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Network component that FLOPs are attributed to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Section {
    Ff1,
    Ff2,
    CrossAttention,
    SelfAttention,
    Memory,
    Classifier,
    Other,
}

impl Section {
    pub const ALL: [Section; 7] = [
        Section::Ff1,
        Section::Ff2,
        Section::CrossAttention,
        Section::SelfAttention,
        Section::Memory,
        Section::Classifier,
        Section::Other,
    ];

    fn slot(self) -> usize {
        self as usize
    }
}

/// Forward FLOPs recorded per section.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FlopCounter {
    counts: [u64; 7],
}

impl FlopCounter {
    pub fn get(&self, s: Section) -> u64 {
        self.counts[s.slot()]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

/// Deliberately wrong backward rules, for negative-control tests. Only
/// settable with the `fault-injection` feature.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fault {
    /// GELU backward passes the gradient through unchanged.
    GeluDerivative,
    /// Layer-norm backward forgets the mean-centering term.
    LayerNormMean,
}

enum Value<'p> {
    Owned(Matrix),
    Borrowed(&'p Matrix),
}

impl Value<'_> {
    fn get(&self) -> &Matrix {
        match self {
            Value::Owned(m) => m,
            Value::Borrowed(m) => m,
        }
    }
}

enum Op {
    Leaf,
    MatMul(Var, Var),
    /// `a * b^T`
    MatMulNt(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    AddRow(Var, Var),
    Scale(Var, f64),
    MulConst(Var, Matrix),
    Gelu(Var),
    LayerNorm {
        x: Var,
        gain: Var,
        bias: Var,
        xhat: Matrix,
        rstd: Vec<f64>,
    },
    Softmax(Var),
    LogSoftmax(Var),
    ConcatCols(Vec<Var>),
    SliceCols(Var, usize),
    GatherRows(Var, Vec<usize>),
    MeanRows(Var),
    Sum(Var),
    Pick(Var, usize, usize),
}

struct Node<'p> {
    value: Value<'p>,
    op: Op,
    requires_grad: bool,
}

/// A single-threaded recording of one computation.
///
/// Leaves can borrow their matrices (`'p`), so binding model parameters
/// costs no copies.
pub struct Tape<'p> {
    nodes: Vec<Node<'p>>,
    flops: FlopCounter,
    section: Section,
    fault: Option<Fault>,
}

impl Default for Tape<'_> {
    fn default() -> Self {
        Self::new()
    }
}

const LN_EPS: f64 = 1e-5;
const SQRT_2_OVER_PI: f64 = 0.797_884_560_802_865_4;
const GELU_CUBIC: f64 = 0.044_715;

pub fn gelu_scalar(x: f64) -> f64 {
    0.5 * x * (1.0 + (SQRT_2_OVER_PI * (x + GELU_CUBIC * x * x * x)).tanh())
}

pub fn gelu_grad_scalar(x: f64) -> f64 {
    let u = SQRT_2_OVER_PI * (x + GELU_CUBIC * x * x * x);
    let th = u.tanh();
    0.5 * (1.0 + th) + 0.5 * x * (1.0 - th * th) * SQRT_2_OVER_PI * (1.0 + 3.0 * GELU_CUBIC * x * x)
}

impl<'p> Tape<'p> {
    pub fn new() -> Self {
        Self {
            nodes: Vec::new(),
            flops: FlopCounter::default(),
            section: Section::Other,
            fault: None,
        }
    }

    #[cfg(feature = "fault-injection")]
    pub fn inject_fault(&mut self, fault: Fault) {
        self.fault = Some(fault);
    }

    fn faulty(&self, f: Fault) -> bool {
        self.fault == Some(f)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn flops(&self) -> &FlopCounter {
        &self.flops
    }

    /// Attributes subsequent FLOPs to `s`; returns the previous section.
    pub fn set_section(&mut self, s: Section) -> Section {
        std::mem::replace(&mut self.section, s)
    }

    fn count(&mut self, n: usize) {
        self.flops.counts[self.section.slot()] += n as u64;
    }

    pub fn value(&self, v: Var) -> &Matrix {
        self.nodes[v.0].value.get()
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn push(&mut self, value: Matrix, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value: Value::Owned(value),
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].requires_grad)
    }

    /// Differentiable leaf that borrows its value.
    pub fn param(&mut self, m: &'p Matrix) -> Var {
        self.nodes.push(Node {
            value: Value::Borrowed(m),
            op: Op::Leaf,
            requires_grad: true,
        });
        Var(self.nodes.len() - 1)
    }

    /// Borrowed leaf that receives no gradient.
    pub fn constant_ref(&mut self, m: &'p Matrix) -> Var {
        self.nodes.push(Node {
            value: Value::Borrowed(m),
            op: Op::Leaf,
            requires_grad: false,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn constant(&mut self, m: Matrix) -> Var {
        self.push(m, Op::Leaf, false)
    }

    /// Owned differentiable leaf.
    pub fn leaf(&mut self, m: Matrix) -> Var {
        self.push(m, Op::Leaf, true)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (am, bm) = (self.value(a), self.value(b));
        if am.cols() != bm.rows() {
            return Err(Error::Shape(format!(
                "matmul {:?} by {:?}",
                am.shape(),
                bm.shape()
            )));
        }
        let flops = 2 * am.rows() * am.cols() * bm.cols();
        let out = gemm(am, false, bm, false);
        self.count(flops);
        let rg = self.rg(&[a, b]);
        Ok(self.push(out, Op::MatMul(a, b), rg))
    }

    /// `a * b^T`.
    pub fn matmul_nt(&mut self, a: Var, b: Var) -> Result<Var> {
        let (am, bm) = (self.value(a), self.value(b));
        if am.cols() != bm.cols() {
            return Err(Error::Shape(format!(
                "matmul_nt {:?} by {:?}^T",
                am.shape(),
                bm.shape()
            )));
        }
        let flops = 2 * am.rows() * am.cols() * bm.rows();
        let out = gemm(am, false, bm, true);
        self.count(flops);
        let rg = self.rg(&[a, b]);
        Ok(self.push(out, Op::MatMulNt(a, b), rg))
    }

    fn same_shape(&self, a: Var, b: Var, op: &str) -> Result<()> {
        let (x, y) = (self.value(a).shape(), self.value(b).shape());
        if x != y {
            return Err(Error::Shape(format!("{op}: {x:?} vs {y:?}")));
        }
        Ok(())
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape(a, b, "add")?;
        let out = self.value(a).zip_map(self.value(b), |x, y| x + y);
        self.count(out.len());
        let rg = self.rg(&[a, b]);
        Ok(self.push(out, Op::Add(a, b), rg))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape(a, b, "sub")?;
        let out = self.value(a).zip_map(self.value(b), |x, y| x - y);
        self.count(out.len());
        let rg = self.rg(&[a, b]);
        Ok(self.push(out, Op::Sub(a, b), rg))
    }

    /// Adds a `1 x cols` row to every row of `x`.
    pub fn add_row(&mut self, x: Var, row: Var) -> Result<Var> {
        let (xm, rm) = (self.value(x), self.value(row));
        if rm.rows() != 1 || rm.cols() != xm.cols() {
            return Err(Error::Shape(format!(
                "add_row {:?} + {:?}",
                xm.shape(),
                rm.shape()
            )));
        }
        let cols = xm.cols();
        let r = rm.as_slice();
        let mut data = xm.as_slice().to_vec();
        for chunk in data.chunks_mut(cols.max(1)) {
            for (v, b) in chunk.iter_mut().zip(r) {
                *v += b;
            }
        }
        let out = Matrix::from_raw(xm.rows(), cols, data);
        self.count(out.len());
        let rg = self.rg(&[x, row]);
        Ok(self.push(out, Op::AddRow(x, row), rg))
    }

    pub fn scale(&mut self, x: Var, s: f64) -> Var {
        let out = self.value(x).map(|v| v * s);
        self.count(out.len());
        let rg = self.rg(&[x]);
        self.push(out, Op::Scale(x, s), rg)
    }

    /// Elementwise product with a constant matrix (dropout masks).
    pub fn mul_const(&mut self, x: Var, mask: Matrix) -> Result<Var> {
        if self.value(x).shape() != mask.shape() {
            return Err(Error::Shape("mul_const mask shape".into()));
        }
        let out = self.value(x).zip_map(&mask, |a, b| a * b);
        self.count(out.len());
        let rg = self.rg(&[x]);
        Ok(self.push(out, Op::MulConst(x, mask), rg))
    }

    pub fn gelu(&mut self, x: Var) -> Var {
        let out = self.value(x).map(gelu_scalar);
        self.count(cost::GELU * out.len());
        let rg = self.rg(&[x]);
        self.push(out, Op::Gelu(x), rg)
    }

    /// Per-row normalization to zero mean and unit variance, then the
    /// affine `gain`/`bias` (both `1 x cols`).
    pub fn layer_norm(&mut self, x: Var, gain: Var, bias: Var) -> Result<Var> {
        let xm = self.value(x);
        let (rows, cols) = xm.shape();
        for (name, v) in [("gain", gain), ("bias", bias)] {
            if self.value(v).shape() != (1, cols) {
                return Err(Error::Shape(format!(
                    "layer_norm {name} {:?} for {cols} columns",
                    self.value(v).shape()
                )));
            }
        }
        let g = self.value(gain).as_slice();
        let b = self.value(bias).as_slice();
        let mut xhat = Vec::with_capacity(rows * cols);
        let mut out = Vec::with_capacity(rows * cols);
        let mut rstd = Vec::with_capacity(rows);
        for r in 0..rows {
            let row = xm.row(r);
            let mean = row.iter().sum::<f64>() / cols as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / cols as f64;
            let rs = 1.0 / (var + LN_EPS).sqrt();
            rstd.push(rs);
            for (c, v) in row.iter().enumerate() {
                let h = (v - mean) * rs;
                xhat.push(h);
                out.push(h * g[c] + b[c]);
            }
        }
        let out = Matrix::from_raw(rows, cols, out);
        self.count(cost::LAYER_NORM * out.len());
        let rg = self.rg(&[x, gain, bias]);
        Ok(self.push(
            out,
            Op::LayerNorm {
                x,
                gain,
                bias,
                xhat: Matrix::from_raw(rows, cols, xhat),
                rstd,
            },
            rg,
        ))
    }

    pub fn softmax_rows(&mut self, x: Var) -> Var {
        let out = softmax_rows(self.value(x));
        self.count(cost::SOFTMAX * out.len());
        let rg = self.rg(&[x]);
        self.push(out, Op::Softmax(x), rg)
    }

    pub fn log_softmax_rows(&mut self, x: Var) -> Var {
        let xm = self.value(x);
        let mut data = Vec::with_capacity(xm.len());
        for r in 0..xm.rows() {
            let row = xm.row(r);
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
            data.extend(row.iter().map(|v| v - lse));
        }
        let out = Matrix::from_raw(xm.rows(), xm.cols(), data);
        self.count(cost::SOFTMAX * out.len());
        let rg = self.rg(&[x]);
        self.push(out, Op::LogSoftmax(x), rg)
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let rows = parts.first().map_or(0, |&p| self.value(p).rows());
        if parts.iter().any(|&p| self.value(p).rows() != rows) {
            return Err(Error::Shape("concat_cols row mismatch".into()));
        }
        let cols: usize = parts.iter().map(|&p| self.value(p).cols()).sum();
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for &p in parts {
                data.extend_from_slice(self.value(p).row(r));
            }
        }
        let rg = self.rg(parts);
        Ok(self.push(
            Matrix::from_raw(rows, cols, data),
            Op::ConcatCols(parts.to_vec()),
            rg,
        ))
    }

    pub fn slice_cols(&mut self, x: Var, start: usize, len: usize) -> Result<Var> {
        let xm = self.value(x);
        if start + len > xm.cols() {
            return Err(Error::Shape(format!(
                "slice_cols {start}+{len} of {} columns",
                xm.cols()
            )));
        }
        let mut data = Vec::with_capacity(xm.rows() * len);
        for r in 0..xm.rows() {
            data.extend_from_slice(&xm.row(r)[start..start + len]);
        }
        let out = Matrix::from_raw(xm.rows(), len, data);
        let rg = self.rg(&[x]);
        Ok(self.push(out, Op::SliceCols(x, start), rg))
    }

    pub fn gather_rows(&mut self, table: Var, idx: &[usize]) -> Result<Var> {
        let t = self.value(table);
        if let Some(&bad) = idx.iter().find(|&&i| i >= t.rows()) {
            return Err(Error::Shape(format!("gather row {bad} of {}", t.rows())));
        }
        let out = t.select_rows(idx);
        let rg = self.rg(&[table]);
        Ok(self.push(out, Op::GatherRows(table, idx.to_vec()), rg))
    }

    /// Column means, as a `1 x cols` row.
    pub fn mean_rows(&mut self, x: Var) -> Var {
        let xm = self.value(x);
        let (rows, cols) = xm.shape();
        let mut acc = vec![0.0; cols];
        for r in 0..rows {
            for (a, v) in acc.iter_mut().zip(xm.row(r)) {
                *a += v;
            }
        }
        let inv = 1.0 / rows.max(1) as f64;
        acc.iter_mut().for_each(|a| *a *= inv);
        self.count(rows * cols);
        let rg = self.rg(&[x]);
        self.push(Matrix::row_vector(acc), Op::MeanRows(x), rg)
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let s = self.value(x).sum();
        self.count(self.value(x).len());
        let rg = self.rg(&[x]);
        self.push(Matrix::from_raw(1, 1, vec![s]), Op::Sum(x), rg)
    }

    /// The scalar at `(r, c)` as a `1 x 1` node.
    pub fn pick(&mut self, x: Var, r: usize, c: usize) -> Result<Var> {
        let xm = self.value(x);
        if r >= xm.rows() || c >= xm.cols() {
            return Err(Error::Shape(format!("pick ({r}, {c}) of {:?}", xm.shape())));
        }
        let v = xm.get(r, c);
        let rg = self.rg(&[x]);
        Ok(self.push(Matrix::from_raw(1, 1, vec![v]), Op::Pick(x, r, c), rg))
    }

    /// Reverse accumulation from a scalar root.
    pub fn backward(&self, root: Var) -> Result<Gradients> {
        if self.value(root).shape() != (1, 1) {
            return Err(Error::Shape(format!(
                "backward needs a scalar root, got {:?}",
                self.value(root).shape()
            )));
        }
        let mut grads: Vec<Option<Matrix>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[root.0] = Some(Matrix::filled(1, 1, 1.0));

        for i in (0..=root.0).rev() {
            let node = &self.nodes[i];
            if !node.requires_grad {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            self.backward_node(node, &g, &mut grads);
            if matches!(node.op, Op::Leaf) {
                grads[i] = Some(g);
            }
        }

        let shapes = self.nodes.iter().map(|n| n.value.get().shape()).collect();
        Ok(Gradients { grads, shapes })
    }

    fn accumulate(&self, grads: &mut [Option<Matrix>], v: Var, g: Matrix) {
        if !self.nodes[v.0].requires_grad {
            return;
        }
        match &mut grads[v.0] {
            Some(acc) => acc.add_assign(&g),
            slot => *slot = Some(g),
        }
    }

    fn backward_node(&self, node: &Node<'_>, g: &Matrix, grads: &mut [Option<Matrix>]) {
        let val = |v: Var| self.value(v);
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                if self.requires_grad(*a) {
                    self.accumulate(grads, *a, gemm(g, false, val(*b), true));
                }
                if self.requires_grad(*b) {
                    self.accumulate(grads, *b, gemm(val(*a), true, g, false));
                }
            }
            Op::MatMulNt(a, b) => {
                if self.requires_grad(*a) {
                    self.accumulate(grads, *a, gemm(g, false, val(*b), false));
                }
                if self.requires_grad(*b) {
                    self.accumulate(grads, *b, gemm(g, true, val(*a), false));
                }
            }
            Op::Add(a, b) => {
                self.accumulate(grads, *a, g.clone());
                self.accumulate(grads, *b, g.clone());
            }
            Op::Sub(a, b) => {
                self.accumulate(grads, *a, g.clone());
                self.accumulate(grads, *b, g.map(|v| -v));
            }
            Op::AddRow(x, row) => {
                self.accumulate(grads, *x, g.clone());
                if self.requires_grad(*row) {
                    self.accumulate(grads, *row, column_sums(g));
                }
            }
            Op::Scale(x, s) => self.accumulate(grads, *x, g.map(|v| v * s)),
            Op::MulConst(x, mask) => self.accumulate(grads, *x, g.zip_map(mask, |a, b| a * b)),
            Op::Gelu(x) => {
                let dx = if self.faulty(Fault::GeluDerivative) {
                    g.clone()
                } else {
                    g.zip_map(val(*x), |gv, xv| gv * gelu_grad_scalar(xv))
                };
                self.accumulate(grads, *x, dx);
            }
            Op::LayerNorm {
                x,
                gain,
                bias,
                xhat,
                rstd,
            } => {
                let (rows, cols) = xhat.shape();
                let gn = val(*gain).as_slice();
                if self.requires_grad(*x) {
                    let skip_mean = self.faulty(Fault::LayerNormMean);
                    let mut dx = Vec::with_capacity(rows * cols);
                    for (r, &rs) in rstd.iter().enumerate().take(rows) {
                        let gr = g.row(r);
                        let hr = xhat.row(r);
                        let dxhat: Vec<f64> = gr.iter().zip(gn).map(|(a, b)| a * b).collect();
                        let mean_d = dxhat.iter().sum::<f64>() / cols as f64;
                        let mean_dh =
                            dxhat.iter().zip(hr).map(|(a, b)| a * b).sum::<f64>() / cols as f64;
                        let mean_d = if skip_mean { 0.0 } else { mean_d };
                        for c in 0..cols {
                            dx.push(rs * (dxhat[c] - mean_d - hr[c] * mean_dh));
                        }
                    }
                    self.accumulate(grads, *x, Matrix::from_raw(rows, cols, dx));
                }
                if self.requires_grad(*gain) {
                    self.accumulate(grads, *gain, column_sums(&g.zip_map(xhat, |a, b| a * b)));
                }
                if self.requires_grad(*bias) {
                    self.accumulate(grads, *bias, column_sums(g));
                }
            }
            Op::Softmax(x) => {
                let y = node.value.get();
                let mut dx = Vec::with_capacity(y.len());
                for r in 0..y.rows() {
                    let (yr, gr) = (y.row(r), g.row(r));
                    let dot: f64 = yr.iter().zip(gr).map(|(a, b)| a * b).sum();
                    dx.extend(yr.iter().zip(gr).map(|(yv, gv)| yv * (gv - dot)));
                }
                self.accumulate(grads, *x, Matrix::from_raw(y.rows(), y.cols(), dx));
            }
            Op::LogSoftmax(x) => {
                let y = node.value.get();
                let mut dx = Vec::with_capacity(y.len());
                for r in 0..y.rows() {
                    let (yr, gr) = (y.row(r), g.row(r));
                    let total: f64 = gr.iter().sum();
                    dx.extend(yr.iter().zip(gr).map(|(yv, gv)| gv - yv.exp() * total));
                }
                self.accumulate(grads, *x, Matrix::from_raw(y.rows(), y.cols(), dx));
            }
            Op::ConcatCols(parts) => {
                let mut start = 0;
                for &p in parts {
                    let w = val(p).cols();
                    if self.requires_grad(p) {
                        let part = Matrix::from_fn(g.rows(), w, |r, c| g.get(r, start + c));
                        self.accumulate(grads, p, part);
                    }
                    start += w;
                }
            }
            Op::SliceCols(x, start) => {
                let (rows, cols) = val(*x).shape();
                let mut dx = Matrix::zeros(rows, cols);
                for r in 0..rows {
                    for c in 0..g.cols() {
                        dx.set(r, start + c, g.get(r, c));
                    }
                }
                self.accumulate(grads, *x, dx);
            }
            Op::GatherRows(table, idx) => {
                let (rows, cols) = val(*table).shape();
                let mut dt = Matrix::zeros(rows, cols);
                let d = dt.as_mut_slice();
                for (k, &i) in idx.iter().enumerate() {
                    for (dst, src) in d[i * cols..(i + 1) * cols].iter_mut().zip(g.row(k)) {
                        *dst += src;
                    }
                }
                self.accumulate(grads, *table, dt);
            }
            Op::MeanRows(x) => {
                let (rows, cols) = val(*x).shape();
                let inv = 1.0 / rows.max(1) as f64;
                self.accumulate(
                    grads,
                    *x,
                    Matrix::from_fn(rows, cols, |_, c| g.get(0, c) * inv),
                );
            }
            Op::Sum(x) => {
                let (rows, cols) = val(*x).shape();
                self.accumulate(grads, *x, Matrix::filled(rows, cols, g.get(0, 0)));
            }
            Op::Pick(x, r, c) => {
                let (rows, cols) = val(*x).shape();
                let mut dx = Matrix::zeros(rows, cols);
                dx.set(*r, *c, g.get(0, 0));
                self.accumulate(grads, *x, dx);
            }
        }
    }
}

fn column_sums(g: &Matrix) -> Matrix {
    let mut acc = vec![0.0; g.cols()];
    for r in 0..g.rows() {
        for (a, v) in acc.iter_mut().zip(g.row(r)) {
            *a += v;
        }
    }
    Matrix::row_vector(acc)
}

/// Row-wise softmax with max subtraction.
pub fn softmax_rows(x: &Matrix) -> Matrix {
    let mut data = Vec::with_capacity(x.len());
    for r in 0..x.rows() {
        let row = x.row(r);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let start = data.len();
        data.extend(row.iter().map(|v| (v - max).exp()));
        let total: f64 = data[start..].iter().sum();
        data[start..].iter_mut().for_each(|v| *v /= total);
    }
    Matrix::from_raw(x.rows(), x.cols(), data)
}

/// Gradients from one [`Tape::backward`] call.
pub struct Gradients {
    grads: Vec<Option<Matrix>>,
    shapes: Vec<(usize, usize)>,
}

impl Gradients {
    /// Gradient of the root w.r.t. `v`; zeros when `v` did not contribute.
    pub fn get(&self, v: Var) -> Matrix {
        match &self.grads[v.0] {
            Some(g) => g.clone(),
            None => {
                let (r, c) = self.shapes[v.0];
                Matrix::zeros(r, c)
            }
        }
    }

    pub fn take(&mut self, v: Var) -> Matrix {
        match self.grads[v.0].take() {
            Some(g) => g,
            None => {
                let (r, c) = self.shapes[v.0];
                Matrix::zeros(r, c)
            }
        }
    }
}
