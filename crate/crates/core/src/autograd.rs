//! Reverse-mode automatic differentiation over dense `f64` matrices.
//!
//! A [`Graph`] records every operation as it is evaluated. Calling
//! [`Graph::backward`] on a scalar node walks the tape in reverse and
//! returns the gradient of every node.

use ndarray::{s, Array2, Axis, Zip};

/// Handle to a node of a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2 / pi)
const GELU_A: f64 = 0.044_715;
const LN_EPS: f64 = 1e-5;

enum Op {
    Input,
    MatMul(Var, Var),
    Transpose(Var),
    Add(Var, Var),
    AddRow(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Gelu(Var),
    SoftmaxRows(Var),
    LayerNorm {
        x: Var,
        gain: Var,
        bias: Var,
        xhat: Array2<f64>,
        inv_std: Vec<f64>,
    },
    GatherRows(Var, Vec<usize>),
    SliceRows(Var, usize),
    SliceCols(Var, usize),
    ConcatRows(Vec<Var>),
    ConcatCols(Vec<Var>),
    RelGather(Var, usize),
    RelScatter(Var, usize),
    MaskMul(Var, Array2<f64>),
    SumCols(Var),
    BceWithLogits(Var, Vec<f64>),
    GroupedCrossEntropy {
        logits: Var,
        groups: Vec<Vec<usize>>,
        gold: Vec<usize>,
    },
}

struct Node {
    value: Array2<f64>,
    op: Op,
}

/// Evaluation tape.
#[derive(Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

/// Index into a relative-position table of width `2k + 1` for query `i`
/// and key `j`.
#[inline]
pub fn relative_index(i: usize, j: usize, k: usize) -> usize {
    let d = (j as i64 - i as i64).clamp(-(k as i64), k as i64);
    (d + k as i64) as usize
}

fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + (GELU_C * (x + GELU_A * x * x * x)).tanh())
}

fn gelu_grad(x: f64) -> f64 {
    let t = (GELU_C * (x + GELU_A * x * x * x)).tanh();
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * GELU_C * (1.0 + 3.0 * GELU_A * x * x)
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn scalar(v: f64) -> Array2<f64> {
    Array2::from_elem((1, 1), v)
}

impl Graph {
    pub fn new() -> Self {
        Graph::default()
    }

    fn push(&mut self, value: Array2<f64>, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Array2<f64> {
        &self.nodes[v.0].value
    }

    pub fn scalar(&self, v: Var) -> f64 {
        self.nodes[v.0].value[[0, 0]]
    }

    pub fn input(&mut self, value: Array2<f64>) -> Var {
        self.push(value, Op::Input)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a).dot(self.value(b));
        self.push(value, Op::MatMul(a, b))
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let value = self.value(a).t().to_owned();
        self.push(value, Op::Transpose(a))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a) + self.value(b);
        self.push(value, Op::Add(a, b))
    }

    /// `a` (n × m) plus the single row `b` (1 × m) broadcast over rows.
    pub fn add_row(&mut self, a: Var, b: Var) -> Var {
        assert_eq!(self.value(b).nrows(), 1, "add_row expects a 1 × m bias");
        let value = self.value(a) + self.value(b);
        self.push(value, Op::AddRow(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a) * self.value(b);
        self.push(value, Op::Mul(a, b))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let value = self.value(a) * c;
        self.push(value, Op::Scale(a, c))
    }

    /// GeLU, tanh approximation.
    pub fn gelu(&mut self, a: Var) -> Var {
        let value = self.value(a).mapv(gelu);
        self.push(value, Op::Gelu(a))
    }

    pub fn softmax_rows(&mut self, a: Var) -> Var {
        let mut value = self.value(a).clone();
        for mut row in value.rows_mut() {
            let max = row.fold(f64::NEG_INFINITY, |m, &x| m.max(x));
            row.mapv_inplace(|x| (x - max).exp());
            let sum = row.sum();
            row /= sum;
        }
        self.push(value, Op::SoftmaxRows(a))
    }

    /// Row-wise layer normalisation with a learned gain and bias (both 1 × m).
    pub fn layer_norm(&mut self, x: Var, gain: Var, bias: Var) -> Var {
        let xv = self.value(x);
        let m = xv.ncols() as f64;
        let mut xhat = xv.clone();
        let mut inv_std = Vec::with_capacity(xv.nrows());
        for mut row in xhat.rows_mut() {
            let mean = row.sum() / m;
            row.mapv_inplace(|v| v - mean);
            let var = row.fold(0.0, |acc, &v| acc + v * v) / m;
            let inv = 1.0 / (var + LN_EPS).sqrt();
            row *= inv;
            inv_std.push(inv);
        }
        let value = &xhat * self.value(gain) + self.value(bias);
        self.push(
            value,
            Op::LayerNorm {
                x,
                gain,
                bias,
                xhat,
                inv_std,
            },
        )
    }

    pub fn gather_rows(&mut self, a: Var, rows: Vec<usize>) -> Var {
        let value = self.value(a).select(Axis(0), &rows);
        self.push(value, Op::GatherRows(a, rows))
    }

    pub fn slice_rows(&mut self, a: Var, start: usize, len: usize) -> Var {
        let value = self.value(a).slice(s![start..start + len, ..]).to_owned();
        self.push(value, Op::SliceRows(a, start))
    }

    pub fn slice_cols(&mut self, a: Var, start: usize, len: usize) -> Var {
        let value = self.value(a).slice(s![.., start..start + len]).to_owned();
        self.push(value, Op::SliceCols(a, start))
    }

    pub fn concat_rows(&mut self, parts: Vec<Var>) -> Var {
        let views: Vec<_> = parts.iter().map(|&p| self.value(p).view()).collect();
        let value = ndarray::concatenate(Axis(0), &views).expect("column counts differ");
        self.push(value, Op::ConcatRows(parts))
    }

    pub fn concat_cols(&mut self, parts: Vec<Var>) -> Var {
        let views: Vec<_> = parts.iter().map(|&p| self.value(p).view()).collect();
        let value = ndarray::concatenate(Axis(1), &views).expect("row counts differ");
        self.push(value, Op::ConcatCols(parts))
    }

    /// `out[i][j] = a[i][relative_index(i, j, k)]` for a `n × (2k+1)` input.
    pub fn rel_gather(&mut self, a: Var, k: usize) -> Var {
        let av = self.value(a);
        let n = av.nrows();
        assert_eq!(av.ncols(), 2 * k + 1);
        let value = Array2::from_shape_fn((n, n), |(i, j)| av[[i, relative_index(i, j, k)]]);
        self.push(value, Op::RelGather(a, k))
    }

    /// Adjoint of [`rel_gather`](Self::rel_gather): sums an `n × n` input
    /// into `n × (2k+1)` relative-distance buckets.
    pub fn rel_scatter(&mut self, a: Var, k: usize) -> Var {
        let av = self.value(a);
        let n = av.nrows();
        let mut value = Array2::zeros((n, 2 * k + 1));
        for i in 0..n {
            for j in 0..n {
                value[[i, relative_index(i, j, k)]] += av[[i, j]];
            }
        }
        self.push(value, Op::RelScatter(a, k))
    }

    /// Elementwise product with a constant (e.g. a dropout mask).
    pub fn mask_mul(&mut self, a: Var, mask: Array2<f64>) -> Var {
        let value = self.value(a) * &mask;
        self.push(value, Op::MaskMul(a, mask))
    }

    pub fn sum_cols(&mut self, a: Var) -> Var {
        let value = self.value(a).sum_axis(Axis(1)).insert_axis(Axis(1));
        self.push(value, Op::SumCols(a))
    }

    /// Mean binary cross-entropy of a column of logits against 0/1 targets.
    pub fn bce_with_logits(&mut self, logits: Var, targets: Vec<f64>) -> Var {
        let z = self.value(logits);
        assert_eq!(z.len(), targets.len());
        let total: f64 = z
            .iter()
            .zip(&targets)
            .map(|(&z, &y)| softplus(z) - z * y)
            .sum();
        let value = scalar(total / targets.len().max(1) as f64);
        self.push(value, Op::BceWithLogits(logits, targets))
    }

    /// Mean over groups of `-log softmax(logits[group])[gold]`.
    ///
    /// `groups[g]` lists entries of the logit column competing in group `g`;
    /// `gold[g]` is the correct entry and must belong to that group.
    pub fn grouped_cross_entropy(
        &mut self,
        logits: Var,
        groups: Vec<Vec<usize>>,
        gold: Vec<usize>,
    ) -> Var {
        let z = self.value(logits);
        let mut total = 0.0;
        for (group, &g) in groups.iter().zip(&gold) {
            let max = group.iter().fold(f64::NEG_INFINITY, |m, &e| m.max(z[[e, 0]]));
            let lse = max + group.iter().map(|&e| (z[[e, 0]] - max).exp()).sum::<f64>().ln();
            total += lse - z[[g, 0]];
        }
        let value = scalar(total / groups.len().max(1) as f64);
        self.push(
            value,
            Op::GroupedCrossEntropy {
                logits,
                groups,
                gold,
            },
        )
    }

    /// Gradients of the scalar node `loss` with respect to every node.
    pub fn backward(&self, loss: Var) -> Gradients {
        assert_eq!(self.value(loss).dim(), (1, 1), "loss must be a scalar");
        let mut grads: Vec<Option<Array2<f64>>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(scalar(1.0));

        for idx in (0..=loss.0).rev() {
            // leaf gradients are kept, intermediate ones freed
            if matches!(self.nodes[idx].op, Op::Input) {
                continue;
            }
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            let mut acc = |v: Var, d: Array2<f64>| match &mut grads[v.0] {
                Some(existing) => *existing += &d,
                slot @ None => *slot = Some(d),
            };
            match &node.op {
                Op::Input => {}
                Op::MatMul(a, b) => {
                    acc(*a, g.dot(&self.value(*b).t()));
                    acc(*b, self.value(*a).t().dot(&g));
                }
                Op::Transpose(a) => acc(*a, g.t().to_owned()),
                Op::Add(a, b) => {
                    acc(*a, g.clone());
                    acc(*b, g);
                }
                Op::AddRow(a, b) => {
                    acc(*b, g.sum_axis(Axis(0)).insert_axis(Axis(0)));
                    acc(*a, g);
                }
                Op::Mul(a, b) => {
                    acc(*a, &g * self.value(*b));
                    acc(*b, &g * self.value(*a));
                }
                Op::Scale(a, c) => acc(*a, g * *c),
                Op::Gelu(a) => {
                    let mut d = self.value(*a).mapv(gelu_grad);
                    d *= &g;
                    acc(*a, d);
                }
                Op::SoftmaxRows(a) => {
                    let y = &node.value;
                    let mut d = &g * y;
                    for (mut row, yrow) in d.rows_mut().into_iter().zip(y.rows()) {
                        let dot = row.sum();
                        Zip::from(&mut row).and(&yrow).for_each(|r, &y| *r -= y * dot);
                    }
                    acc(*a, d);
                }
                Op::LayerNorm {
                    x,
                    gain,
                    bias,
                    xhat,
                    inv_std,
                } => {
                    acc(*bias, g.sum_axis(Axis(0)).insert_axis(Axis(0)));
                    acc(*gain, (&g * xhat).sum_axis(Axis(0)).insert_axis(Axis(0)));
                    let dxhat = &g * self.value(*gain);
                    let m = xhat.ncols() as f64;
                    let mut dx = Array2::zeros(xhat.raw_dim());
                    for i in 0..xhat.nrows() {
                        let dr = dxhat.row(i);
                        let xr = xhat.row(i);
                        let sum_d = dr.sum();
                        let sum_dx = dr.dot(&xr);
                        let mut out = dx.row_mut(i);
                        Zip::from(&mut out).and(&dr).and(&xr).for_each(|o, &d, &xh| {
                            *o = inv_std[i] / m * (m * d - sum_d - xh * sum_dx);
                        });
                    }
                    acc(*x, dx);
                }
                Op::GatherRows(a, rows) => {
                    let mut d = Array2::zeros(self.value(*a).raw_dim());
                    for (k, &r) in rows.iter().enumerate() {
                        let mut dst = d.row_mut(r);
                        dst += &g.row(k);
                    }
                    acc(*a, d);
                }
                Op::SliceRows(a, start) => {
                    let mut d = Array2::zeros(self.value(*a).raw_dim());
                    d.slice_mut(s![*start..*start + g.nrows(), ..]).assign(&g);
                    acc(*a, d);
                }
                Op::SliceCols(a, start) => {
                    let mut d = Array2::zeros(self.value(*a).raw_dim());
                    d.slice_mut(s![.., *start..*start + g.ncols()]).assign(&g);
                    acc(*a, d);
                }
                Op::ConcatRows(parts) => {
                    let mut offset = 0;
                    for &p in parts {
                        let n = self.value(p).nrows();
                        acc(p, g.slice(s![offset..offset + n, ..]).to_owned());
                        offset += n;
                    }
                }
                Op::ConcatCols(parts) => {
                    let mut offset = 0;
                    for &p in parts {
                        let n = self.value(p).ncols();
                        acc(p, g.slice(s![.., offset..offset + n]).to_owned());
                        offset += n;
                    }
                }
                Op::RelGather(a, k) => {
                    let n = g.nrows();
                    let mut d = Array2::zeros((n, 2 * k + 1));
                    for i in 0..n {
                        for j in 0..n {
                            d[[i, relative_index(i, j, *k)]] += g[[i, j]];
                        }
                    }
                    acc(*a, d);
                }
                Op::RelScatter(a, k) => {
                    let n = g.nrows();
                    let d = Array2::from_shape_fn((n, n), |(i, j)| g[[i, relative_index(i, j, *k)]]);
                    acc(*a, d);
                }
                Op::MaskMul(a, mask) => acc(*a, g * mask),
                Op::SumCols(a) => {
                    let cols = self.value(*a).ncols();
                    let d = Array2::from_shape_fn((g.nrows(), cols), |(i, _)| g[[i, 0]]);
                    acc(*a, d);
                }
                Op::BceWithLogits(logits, targets) => {
                    let z = self.value(*logits);
                    let n = targets.len().max(1) as f64;
                    let scale = g[[0, 0]] / n;
                    let mut d = Array2::zeros(z.raw_dim());
                    for (e, &y) in targets.iter().enumerate() {
                        d[[e, 0]] = (sigmoid(z[[e, 0]]) - y) * scale;
                    }
                    acc(*logits, d);
                }
                Op::GroupedCrossEntropy {
                    logits,
                    groups,
                    gold,
                } => {
                    let z = self.value(*logits);
                    let scale = g[[0, 0]] / groups.len().max(1) as f64;
                    let mut d = Array2::zeros(z.raw_dim());
                    for (group, &gl) in groups.iter().zip(gold) {
                        let max = group.iter().fold(f64::NEG_INFINITY, |m, &e| m.max(z[[e, 0]]));
                        let sum: f64 = group.iter().map(|&e| (z[[e, 0]] - max).exp()).sum();
                        for &e in group {
                            d[[e, 0]] += (z[[e, 0]] - max).exp() / sum * scale;
                        }
                        d[[gl, 0]] -= scale;
                    }
                    acc(*logits, d);
                }
            }
        }
        Gradients { grads }
    }
}

/// Result of [`Graph::backward`].
pub struct Gradients {
    grads: Vec<Option<Array2<f64>>>,
}

impl Gradients {
    /// Gradient of `v`, or `None` if the loss does not depend on it.
    pub fn get(&self, v: Var) -> Option<&Array2<f64>> {
        self.grads.get(v.0).and_then(|g| g.as_ref())
    }

    pub fn take(&mut self, v: Var) -> Option<Array2<f64>> {
        self.grads.get_mut(v.0).and_then(|g| g.take())
    }
}
