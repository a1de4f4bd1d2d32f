use crate::error::{Error, Result};
use crate::numerics::{invert, ColumnStats, Matrix};

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op {
    Constant,
    Parameter,
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    ScalarMul(Var, f64),
    Transpose(Var),
    Relu(Var),
    /// Output is `(x - mean) / std` with `std = sqrt(var + eps)`.
    BatchNorm { input: Var, std: Vec<f64> },
    /// Output value holds the inverse itself.
    Inverse(Var),
    UpperTriangular(Var),
    SliceColumns { input: Var, start: usize },
    FrobeniusSq(Var),
    AddRow(Var, Var),
    MulRow(Var, Var),
}

#[derive(Debug, Clone)]
struct Node {
    value: Matrix,
    op: Op,
    needs_grad: bool,
}

/// Records matrix operations in execution order for one reverse sweep.
#[derive(Debug, Default, Clone)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Result of [`Tape::backward`]: one optional gradient per recorded node.
#[derive(Debug, Clone)]
pub struct Gradients {
    grads: Vec<Option<Matrix>>,
    shapes: Vec<(usize, usize)>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&Matrix> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    /// Gradient of `v`, or an exact zero matrix if the loss does not depend on it.
    pub fn wrt(&self, v: Var) -> Matrix {
        match self.get(v) {
            Some(g) => g.clone(),
            None => {
                let (r, c) = self.shapes[v.0];
                Matrix::zeros(r, c)
            }
        }
    }
}

impl Tape {
    pub fn new() -> Tape {
        Tape::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Matrix {
        &self.nodes[v.0].value
    }

    fn push(&mut self, value: Matrix, op: Op, needs_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    pub fn constant(&mut self, value: Matrix) -> Var {
        self.push(value, Op::Constant, false)
    }

    pub fn parameter(&mut self, value: Matrix) -> Var {
        self.push(value, Op::Parameter, true)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).matmul(self.value(b))?;
        let ng = self.needs(a) || self.needs(b);
        Ok(self.push(value, Op::MatMul(a, b), ng))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).add(self.value(b))?;
        let ng = self.needs(a) || self.needs(b);
        Ok(self.push(value, Op::Add(a, b), ng))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).sub(self.value(b))?;
        let ng = self.needs(a) || self.needs(b);
        Ok(self.push(value, Op::Sub(a, b), ng))
    }

    pub fn scalar_mul(&mut self, a: Var, c: f64) -> Var {
        let value = self.value(a).scale(c);
        let ng = self.needs(a);
        self.push(value, Op::ScalarMul(a, c), ng)
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let value = self.value(a).transpose();
        let ng = self.needs(a);
        self.push(value, Op::Transpose(a), ng)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let value = self.value(a).map(|v| if v > 0.0 { v } else { 0.0 });
        let ng = self.needs(a);
        self.push(value, Op::Relu(a), ng)
    }

    /// Batch normalization with the affine parameters fixed at γ = 1, β = 0.
    ///
    /// Returns the normalized batch and the statistics it used, so callers can
    /// freeze them for inference. The returned `std` already includes `eps`.
    pub fn batch_norm_fixed(&mut self, a: Var, eps: f64) -> Result<(Var, ColumnStats)> {
        let x = self.value(a);
        if x.rows() < 2 {
            return Err(Error::InvalidShape(format!(
                "batch norm needs at least 2 rows, got {}",
                x.rows()
            )));
        }
        let raw = ColumnStats::of(x);
        let std: Vec<f64> = raw.std.iter().map(|s| (s * s + eps).sqrt()).collect();
        let stats = ColumnStats {
            mean: raw.mean,
            std,
        };
        let mut value = x.clone();
        for i in 0..x.rows() {
            stats.apply_row(x.row(i), value.row_mut(i));
        }
        let ng = self.needs(a);
        let var = self.push(
            value,
            Op::BatchNorm {
                input: a,
                std: stats.std.clone(),
            },
            ng,
        );
        Ok((var, stats))
    }

    pub fn matrix_inverse(&mut self, a: Var) -> Result<Var> {
        let value = invert(self.value(a))?;
        let ng = self.needs(a);
        Ok(self.push(value, Op::Inverse(a), ng))
    }

    /// Upper triangle including the diagonal; everything below is zeroed.
    pub fn upper_triangular(&mut self, a: Var) -> Var {
        let value = upper_mask(self.value(a));
        let ng = self.needs(a);
        self.push(value, Op::UpperTriangular(a), ng)
    }

    pub fn slice_columns(&mut self, a: Var, start: usize, end: usize) -> Result<Var> {
        let value = self.value(a).columns(start, end)?;
        let ng = self.needs(a);
        Ok(self.push(value, Op::SliceColumns { input: a, start }, ng))
    }

    /// Squared Frobenius norm as a 1x1 node.
    pub fn frobenius_sq(&mut self, a: Var) -> Var {
        let value = Matrix::scalar(self.value(a).frobenius_sq());
        let ng = self.needs(a);
        self.push(value, Op::FrobeniusSq(a), ng)
    }

    /// `x + 1·b` where `b` is a single row.
    pub fn add_row(&mut self, x: Var, b: Var) -> Result<Var> {
        let row = self.value(b);
        if row.rows() != 1 {
            return Err(Error::InvalidShape(format!(
                "broadcast operand must be one row, got {}x{}",
                row.rows(),
                row.cols()
            )));
        }
        let value = self.value(x).add_row_broadcast(row.as_slice())?;
        let ng = self.needs(x) || self.needs(b);
        Ok(self.push(value, Op::AddRow(x, b), ng))
    }

    /// Scales each column of `x` by the matching entry of the single row `s`.
    pub fn mul_row(&mut self, x: Var, s: Var) -> Result<Var> {
        let (xv, sv) = (self.value(x), self.value(s));
        if sv.rows() != 1 || sv.cols() != xv.cols() {
            return Err(Error::InvalidShape(format!(
                "cannot scale {}x{} columns by {}x{}",
                xv.rows(),
                xv.cols(),
                sv.rows(),
                sv.cols()
            )));
        }
        let mut value = xv.clone();
        for i in 0..value.rows() {
            for (v, &c) in value.row_mut(i).iter_mut().zip(sv.as_slice()) {
                *v *= c;
            }
        }
        let ng = self.needs(x) || self.needs(s);
        Ok(self.push(value, Op::MulRow(x, s), ng))
    }

    /// Reverse sweep from a scalar `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let shape = self.value(loss).shape();
        if shape != (1, 1) {
            return Err(Error::InvalidShape(format!(
                "loss must be 1x1, got {}x{}",
                shape.0, shape.1
            )));
        }
        let mut grads: Vec<Option<Matrix>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(Matrix::scalar(1.0));

        for idx in (0..=loss.0).rev() {
            let node = &self.nodes[idx];
            if !node.needs_grad {
                continue;
            }
            let Some(g) = grads[idx].take() else {
                continue;
            };
            self.propagate(node, &g, &mut grads)?;
            grads[idx] = Some(g);
        }

        grads.resize(self.nodes.len(), None);
        for (g, node) in grads.iter_mut().zip(&self.nodes) {
            if !node.needs_grad {
                *g = None;
            }
        }
        Ok(Gradients {
            grads,
            shapes: self.nodes.iter().map(|n| n.value.shape()).collect(),
        })
    }

    fn propagate(&self, node: &Node, g: &Matrix, grads: &mut [Option<Matrix>]) -> Result<()> {
        let mut send = |v: Var, contribution: Matrix| -> Result<()> {
            if !self.nodes[v.0].needs_grad {
                return Ok(());
            }
            match &mut grads[v.0] {
                Some(acc) => acc.add_assign(&contribution),
                slot @ None => {
                    *slot = Some(contribution);
                    Ok(())
                }
            }
        };

        match &node.op {
            Op::Constant | Op::Parameter => {}
            Op::MatMul(a, b) => {
                if self.needs(*a) {
                    send(*a, g.matmul_t(self.value(*b))?)?;
                }
                if self.needs(*b) {
                    send(*b, self.value(*a).t_matmul(g)?)?;
                }
            }
            Op::Add(a, b) => {
                send(*a, g.clone())?;
                send(*b, g.clone())?;
            }
            Op::Sub(a, b) => {
                send(*a, g.clone())?;
                send(*b, g.scale(-1.0))?;
            }
            Op::ScalarMul(a, c) => send(*a, g.scale(*c))?,
            Op::Transpose(a) => send(*a, g.transpose())?,
            Op::Relu(a) => {
                let x = self.value(*a);
                let mut out = g.clone();
                for (o, &xv) in out.as_mut_slice().iter_mut().zip(x.as_slice()) {
                    if xv <= 0.0 {
                        *o = 0.0;
                    }
                }
                send(*a, out)?;
            }
            Op::BatchNorm { input, std } => {
                // dx = (g - mean(g) - y * mean(g * y)) / std, column-wise
                let y = &node.value;
                let n = y.rows() as f64;
                let cols = y.cols();
                let mut mean_g = vec![0.0; cols];
                let mut mean_gy = vec![0.0; cols];
                for i in 0..y.rows() {
                    for j in 0..cols {
                        mean_g[j] += g[(i, j)];
                        mean_gy[j] += g[(i, j)] * y[(i, j)];
                    }
                }
                mean_g.iter_mut().for_each(|v| *v /= n);
                mean_gy.iter_mut().for_each(|v| *v /= n);
                let dx = Matrix::from_fn(y.rows(), cols, |i, j| {
                    (g[(i, j)] - mean_g[j] - y[(i, j)] * mean_gy[j]) / std[j]
                });
                send(*input, dx)?;
            }
            Op::Inverse(a) => {
                // d(A⁻¹) = -A⁻¹ dA A⁻¹  =>  Ā = -A⁻ᵀ Ḡ A⁻ᵀ
                let inv_t = node.value.transpose();
                let da = inv_t.matmul(g)?.matmul(&inv_t)?.scale(-1.0);
                send(*a, da)?;
            }
            Op::UpperTriangular(a) => send(*a, upper_mask(g))?,
            Op::SliceColumns { input, start } => {
                let (rows, cols) = self.value(*input).shape();
                let mut full = Matrix::zeros(rows, cols);
                for i in 0..rows {
                    full.row_mut(i)[*start..*start + g.cols()].copy_from_slice(g.row(i));
                }
                send(*input, full)?;
            }
            Op::FrobeniusSq(a) => {
                let s = g.to_scalar()?;
                send(*a, self.value(*a).scale(2.0 * s))?;
            }
            Op::AddRow(x, b) => {
                if self.needs(*b) {
                    send(*b, Matrix::row_vector(&column_sums(g)))?;
                }
                send(*x, g.clone())?;
            }
            Op::MulRow(x, s) => {
                let sv = self.value(*s);
                if self.needs(*x) {
                    let mut dx = g.clone();
                    for i in 0..dx.rows() {
                        for (v, &c) in dx.row_mut(i).iter_mut().zip(sv.as_slice()) {
                            *v *= c;
                        }
                    }
                    send(*x, dx)?;
                }
                if self.needs(*s) {
                    send(*s, Matrix::row_vector(&column_sums(&g.hadamard(self.value(*x))?)))?;
                }
            }
        }
        Ok(())
    }
}

fn upper_mask(m: &Matrix) -> Matrix {
    Matrix::from_fn(m.rows(), m.cols(), |i, j| if j >= i { m[(i, j)] } else { 0.0 })
}

fn column_sums(m: &Matrix) -> Vec<f64> {
    let mut sums = vec![0.0; m.cols()];
    for i in 0..m.rows() {
        for (s, &v) in sums.iter_mut().zip(m.row(i)) {
            *s += v;
        }
    }
    sums
}
