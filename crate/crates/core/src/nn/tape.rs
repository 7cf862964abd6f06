use std::borrow::Cow;

use ndarray::{s, Array2, Axis, Zip};

use super::{softmax_rows, Gradients, Mat, ParamId, ParamStore};

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

enum Op {
    Param(ParamId),
    Const,
    MatMul(Var, Var),
    Add(Var, Var),
    Mul(Var, Var),
    AddRow(Var, Var),
    Scale(Var, f64),
    Transpose(Var),
    Relu(Var),
    SoftmaxRows(Var),
    LayerNorm { x: Var, gain: Var, bias: Var, xhat: Mat, inv_std: Vec<f64> },
    Gather { table: Var, ids: Vec<usize> },
    SliceRows(Var, usize),
    SliceCols(Var, usize),
    ConcatCols(Vec<Var>),
    Biaffine { q: Var, k: Var, u: Var, proj: Vec<Mat> },
    SoftmaxXent { logits: Var, targets: Vec<usize>, weights: Vec<f64>, probs: Mat },
    SumAll(Var),
}

struct Node<'a> {
    value: Cow<'a, Mat>,
    op: Op,
}

/// Records a forward computation so gradients can be pulled back to the
/// parameters it read.
pub struct Tape<'a> {
    params: &'a ParamStore,
    nodes: Vec<Node<'a>>,
}

const LN_EPS: f64 = 1e-5;

impl<'a> Tape<'a> {
    pub fn new(params: &'a ParamStore) -> Self {
        Tape { params, nodes: Vec::with_capacity(256) }
    }

    fn push(&mut self, value: Cow<'a, Mat>, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    fn owned(&mut self, value: Mat, op: Op) -> Var {
        self.push(Cow::Owned(value), op)
    }

    pub fn value(&self, v: Var) -> &Mat {
        &self.nodes[v.0].value
    }

    pub fn scalar(&self, v: Var) -> f64 {
        self.value(v)[[0, 0]]
    }

    pub fn param(&mut self, id: ParamId) -> Var {
        let params = self.params;
        self.push(Cow::Borrowed(params.get(id)), Op::Param(id))
    }

    pub fn constant(&mut self, value: Mat) -> Var {
        self.owned(value, Op::Const)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).dot(self.value(b));
        self.owned(v, Op::MatMul(a, b))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a) + self.value(b);
        self.owned(v, Op::Add(a, b))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a) * self.value(b);
        self.owned(v, Op::Mul(a, b))
    }

    /// Adds a `1 x d` row to every row of `a`.
    pub fn add_row(&mut self, a: Var, row: Var) -> Var {
        debug_assert_eq!(self.value(row).nrows(), 1);
        let v = self.value(a) + self.value(row);
        self.owned(v, Op::AddRow(a, row))
    }

    pub fn scale(&mut self, a: Var, factor: f64) -> Var {
        let v = self.value(a) * factor;
        self.owned(v, Op::Scale(a, factor))
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let v = self.value(a).t().to_owned();
        self.owned(v, Op::Transpose(a))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let v = self.value(a).mapv(|x| x.max(0.0));
        self.owned(v, Op::Relu(a))
    }

    pub fn softmax_rows(&mut self, a: Var) -> Var {
        let v = softmax_rows(self.value(a));
        self.owned(v, Op::SoftmaxRows(a))
    }

    /// Row-wise layer normalization with a learned `1 x d` gain and bias.
    pub fn layer_norm(&mut self, x: Var, gain: Var, bias: Var) -> Var {
        let xv = self.value(x);
        let d = xv.ncols() as f64;
        let mut xhat = xv.clone();
        let mut inv_std = Vec::with_capacity(xv.nrows());
        for mut row in xhat.axis_iter_mut(Axis(0)) {
            let mean = row.sum() / d;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d;
            let inv = 1.0 / (var + LN_EPS).sqrt();
            row.mapv_inplace(|v| (v - mean) * inv);
            inv_std.push(inv);
        }
        let out = &xhat * self.value(gain) + self.value(bias);
        self.owned(out, Op::LayerNorm { x, gain, bias, xhat, inv_std })
    }

    /// Selects rows of `table` (embedding lookup).
    pub fn gather(&mut self, table: Var, ids: &[usize]) -> Var {
        let t = self.value(table);
        let mut out = Array2::zeros((ids.len(), t.ncols()));
        for (r, &id) in ids.iter().enumerate() {
            out.row_mut(r).assign(&t.row(id));
        }
        self.owned(out, Op::Gather { table, ids: ids.to_vec() })
    }

    pub fn slice_rows(&mut self, a: Var, start: usize, end: usize) -> Var {
        let v = self.value(a).slice(s![start..end, ..]).to_owned();
        self.owned(v, Op::SliceRows(a, start))
    }

    pub fn slice_cols(&mut self, a: Var, start: usize, end: usize) -> Var {
        let v = self.value(a).slice(s![.., start..end]).to_owned();
        self.owned(v, Op::SliceCols(a, start))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Var {
        let views: Vec<_> = parts.iter().map(|&p| self.value(p).view()).collect();
        let v = ndarray::concatenate(Axis(1), &views).expect("row counts agree");
        self.owned(v, Op::ConcatCols(parts.to_vec()))
    }

    /// Bilinear scores for every (key row, query row) pair and label.
    ///
    /// `q` is `n x h`, `k` is `m x h`, and `u` stacks `L` blocks of `h x h`
    /// vertically. Output row `i * n + j`, column `l` holds
    /// `q_j^T U_l k_i`.
    pub fn biaffine(&mut self, q: Var, k: Var, u: Var) -> Var {
        let (qv, kv, uv) = (self.value(q), self.value(k), self.value(u));
        let h = qv.ncols();
        assert_eq!(kv.ncols(), h, "query/key width");
        assert_eq!(uv.ncols(), h, "bilinear block width");
        assert_eq!(uv.nrows() % h, 0, "bilinear tensor rows");
        let labels = uv.nrows() / h;
        let (n, m) = (qv.nrows(), kv.nrows());
        let mut out = Array2::zeros((m * n, labels));
        let mut proj = Vec::with_capacity(labels);
        for l in 0..labels {
            let ul = uv.slice(s![l * h..(l + 1) * h, ..]);
            let p = qv.dot(&ul);
            let scores = kv.dot(&p.t());
            for i in 0..m {
                for j in 0..n {
                    out[[i * n + j, l]] = scores[[i, j]];
                }
            }
            proj.push(p);
        }
        self.owned(out, Op::Biaffine { q, k, u, proj })
    }

    /// Weighted sum over rows of `-log softmax(logits)[target]`, as a
    /// `1 x 1` value.
    pub fn softmax_cross_entropy(&mut self, logits: Var, targets: &[usize], weights: &[f64]) -> Var {
        let lv = self.value(logits);
        assert_eq!(lv.nrows(), targets.len(), "one target per row");
        assert_eq!(targets.len(), weights.len(), "one weight per row");
        let probs = softmax_rows(lv);
        let mut loss = 0.0;
        for (r, (&t, &w)) in targets.iter().zip(weights).enumerate() {
            if w != 0.0 {
                let row = lv.row(r);
                let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
                loss += w * (lse - row[t]);
            }
        }
        self.owned(
            Array2::from_elem((1, 1), loss),
            Op::SoftmaxXent { logits, targets: targets.to_vec(), weights: weights.to_vec(), probs },
        )
    }

    pub fn sum_all(&mut self, a: Var) -> Var {
        let v = Array2::from_elem((1, 1), self.value(a).sum());
        self.owned(v, Op::SumAll(a))
    }

    /// Gradients of the scalar `loss` with respect to every parameter read
    /// on this tape.
    pub fn backward(&self, loss: Var) -> Gradients {
        assert_eq!(self.value(loss).dim(), (1, 1), "loss must be a scalar");
        let mut grads: Vec<Option<Mat>> = (0..=loss.0).map(|_| None).collect();
        grads[loss.0] = Some(Array2::ones((1, 1)));
        let mut out = Gradients::empty(self.params.len());

        fn acc(grads: &mut [Option<Mat>], v: Var, g: Mat) {
            match &mut grads[v.0] {
                Some(existing) => *existing += &g,
                slot @ None => *slot = Some(g),
            }
        }

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            match &node.op {
                Op::Param(id) => out.accumulate(*id, &g),
                Op::Const => {}
                Op::MatMul(a, b) => {
                    let ga = g.dot(&self.value(*b).t());
                    let gb = self.value(*a).t().dot(&g);
                    acc(&mut grads, *a, ga);
                    acc(&mut grads, *b, gb);
                }
                Op::Add(a, b) => {
                    acc(&mut grads, *b, g.clone());
                    acc(&mut grads, *a, g);
                }
                Op::Mul(a, b) => {
                    let ga = &g * self.value(*b);
                    let gb = &g * self.value(*a);
                    acc(&mut grads, *a, ga);
                    acc(&mut grads, *b, gb);
                }
                Op::AddRow(a, row) => {
                    let gr = g.sum_axis(Axis(0)).insert_axis(Axis(0));
                    acc(&mut grads, *row, gr);
                    acc(&mut grads, *a, g);
                }
                Op::Scale(a, f) => acc(&mut grads, *a, g * *f),
                Op::Transpose(a) => acc(&mut grads, *a, g.t().to_owned()),
                Op::Relu(a) => {
                    let mut ga = g;
                    Zip::from(&mut ga).and(self.value(*a)).for_each(|gi, &x| {
                        if x <= 0.0 {
                            *gi = 0.0;
                        }
                    });
                    acc(&mut grads, *a, ga);
                }
                Op::SoftmaxRows(a) => {
                    let y = &node.value;
                    let mut ga = &g * &**y;
                    for (mut row, yrow) in ga.axis_iter_mut(Axis(0)).zip(y.axis_iter(Axis(0))) {
                        let dot = row.sum();
                        Zip::from(&mut row).and(&yrow).for_each(|r, &yv| *r -= yv * dot);
                    }
                    acc(&mut grads, *a, ga);
                }
                Op::LayerNorm { x, gain, bias, xhat, inv_std } => {
                    let gv = self.value(*gain);
                    acc(&mut grads, *bias, g.sum_axis(Axis(0)).insert_axis(Axis(0)));
                    acc(&mut grads, *gain, (&g * xhat).sum_axis(Axis(0)).insert_axis(Axis(0)));
                    let dxhat = &g * gv;
                    let d = xhat.ncols() as f64;
                    let mut dx = Array2::zeros(xhat.raw_dim());
                    for r in 0..xhat.nrows() {
                        let dh = dxhat.row(r);
                        let xh = xhat.row(r);
                        let mean_dh = dh.sum() / d;
                        let mean_dh_xh = dh.dot(&xh) / d;
                        let inv = inv_std[r];
                        for c in 0..xhat.ncols() {
                            dx[[r, c]] = inv * (dh[c] - mean_dh - xh[c] * mean_dh_xh);
                        }
                    }
                    acc(&mut grads, *x, dx);
                }
                Op::Gather { table, ids } => {
                    let mut gt = Array2::zeros(self.value(*table).raw_dim());
                    for (r, &id) in ids.iter().enumerate() {
                        let mut dst = gt.row_mut(id);
                        dst += &g.row(r);
                    }
                    acc(&mut grads, *table, gt);
                }
                Op::SliceRows(a, start) => {
                    let mut ga = Array2::zeros(self.value(*a).raw_dim());
                    ga.slice_mut(s![*start..*start + g.nrows(), ..]).assign(&g);
                    acc(&mut grads, *a, ga);
                }
                Op::SliceCols(a, start) => {
                    let mut ga = Array2::zeros(self.value(*a).raw_dim());
                    ga.slice_mut(s![.., *start..*start + g.ncols()]).assign(&g);
                    acc(&mut grads, *a, ga);
                }
                Op::ConcatCols(parts) => {
                    let mut offset = 0;
                    for &p in parts {
                        let w = self.value(p).ncols();
                        acc(&mut grads, p, g.slice(s![.., offset..offset + w]).to_owned());
                        offset += w;
                    }
                }
                Op::Biaffine { q, k, u, proj } => {
                    let (qv, kv, uv) = (self.value(*q), self.value(*k), self.value(*u));
                    let h = qv.ncols();
                    let (n, m) = (qv.nrows(), kv.nrows());
                    let mut gq = Array2::zeros(qv.raw_dim());
                    let mut gk = Array2::zeros(kv.raw_dim());
                    let mut gu = Array2::zeros(uv.raw_dim());
                    for (l, p) in proj.iter().enumerate() {
                        let mut ds = Array2::zeros((m, n));
                        for i in 0..m {
                            for j in 0..n {
                                ds[[i, j]] = g[[i * n + j, l]];
                            }
                        }
                        gk += &ds.dot(p);
                        let dp = ds.t().dot(kv);
                        let ul = uv.slice(s![l * h..(l + 1) * h, ..]);
                        gq += &dp.dot(&ul.t());
                        gu.slice_mut(s![l * h..(l + 1) * h, ..]).assign(&qv.t().dot(&dp));
                    }
                    acc(&mut grads, *q, gq);
                    acc(&mut grads, *k, gk);
                    acc(&mut grads, *u, gu);
                }
                Op::SoftmaxXent { logits, targets, weights, probs } => {
                    let scale = g[[0, 0]];
                    let mut gl = probs.clone();
                    for (r, (&t, &w)) in targets.iter().zip(weights).enumerate() {
                        let mut row = gl.row_mut(r);
                        row[t] -= 1.0;
                        row *= w * scale;
                    }
                    acc(&mut grads, *logits, gl);
                }
                Op::SumAll(a) => {
                    let ga = Array2::from_elem(self.value(*a).raw_dim(), g[[0, 0]]);
                    acc(&mut grads, *a, ga);
                }
            }
        }
        out
    }
}
