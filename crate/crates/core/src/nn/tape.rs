//! Define-by-run reverse-mode autodiff tape.
//!
//! Forward values are computed eagerly as nodes are appended; `backward`
//! walks the tape in reverse, accumulating gradients. The op set is
//! exactly what the transformer models here need.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use super::tensor::{matmul_acc, matmul_transa_acc, matmul_transb_acc, Scalar, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(pub usize);

enum Op<T> {
    Input,
    Param { id: usize },
    MatMul { a: usize, b: usize },
    /// `A · Bᵀ` with `B` stored row-major `(m, k)`.
    MatMulTransB { a: usize, b: usize },
    Add { a: usize, b: usize },
    /// Broadcast row-vector add: `(n,m) + (1,m)`.
    AddRow { a: usize, v: usize },
    Scale { a: usize, c: T },
    /// Multiply by a learnable scalar `(1,1)` variable.
    ScaleVar { a: usize, s: usize },
    Gelu { a: usize },
    Sigmoid { a: usize },
    SoftmaxRows { a: usize },
    LayerNormRows { x: usize, gamma: usize, beta: usize },
    Dropout { a: usize },
    SliceCols { a: usize, start: usize },
    SliceRows { a: usize, start: usize },
    ConcatRows { parts: Vec<usize> },
    ConcatCols { parts: Vec<usize> },
    SumAll { a: usize },
    /// Binary cross-entropy with logits against fixed targets, summed.
    BceSum { logits: usize },
    /// Row-wise softmax cross-entropy against fixed target rows, summed.
    CeSumRows { logits: usize },
}

struct Node<T: Scalar> {
    op: Op<T>,
    value: Tensor<T>,
    /// Saved per-op context for the backward pass (masks, normalized
    /// activations, targets).
    aux: Vec<Tensor<T>>,
}

pub struct Tape<T: Scalar> {
    nodes: Vec<Node<T>>,
    rng: ChaCha12Rng,
    train: bool,
}

/// Gradients by tape node, with parameter gradients extractable by id.
pub struct Gradients<T: Scalar> {
    by_node: Vec<Option<Tensor<T>>>,
    param_nodes: Vec<(usize, usize)>, // (param id, node index)
}

impl<T: Scalar> Gradients<T> {
    /// Sum of gradients for a parameter id (parameters may be registered
    /// once per forward pass).
    pub fn for_param(&self, id: usize) -> Option<Tensor<T>> {
        let mut acc: Option<Tensor<T>> = None;
        for &(pid, node) in &self.param_nodes {
            if pid != id {
                continue;
            }
            if let Some(g) = &self.by_node[node] {
                match &mut acc {
                    None => acc = Some(g.clone()),
                    Some(a) => {
                        for (av, gv) in a.data.iter_mut().zip(&g.data) {
                            *av += *gv;
                        }
                    }
                }
            }
        }
        acc
    }

    pub fn of(&self, v: Var) -> Option<&Tensor<T>> {
        self.by_node[v.0].as_ref()
    }
}

impl<T: Scalar> Tape<T> {
    /// `seed` drives dropout masks; `train` enables dropout.
    pub fn new(seed: u64, train: bool) -> Self {
        Self { nodes: Vec::with_capacity(256), rng: ChaCha12Rng::seed_from_u64(seed), train }
    }

    pub fn is_train(&self) -> bool {
        self.train
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    fn push(&mut self, op: Op<T>, value: Tensor<T>, aux: Vec<Tensor<T>>) -> Var {
        self.nodes.push(Node { op, value, aux });
        Var(self.nodes.len() - 1)
    }

    pub fn input(&mut self, t: Tensor<T>) -> Var {
        self.push(Op::Input, t, vec![])
    }

    pub fn param(&mut self, id: usize, t: &Tensor<T>) -> Var {
        self.push(Op::Param { id }, t.clone(), vec![])
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let (av, bv) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        let (n, k) = (av.rows(), av.cols());
        let (k2, m) = (bv.rows(), bv.cols());
        assert_eq!(k, k2, "matmul inner dims {k} vs {k2}");
        let mut out = Tensor::zeros(&[n, m]);
        matmul_acc(&av.data, &bv.data, &mut out.data, n, k, m);
        self.push(Op::MatMul { a: a.0, b: b.0 }, out, vec![])
    }

    pub fn matmul_transb(&mut self, a: Var, b: Var) -> Var {
        let (av, bv) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        let (n, k) = (av.rows(), av.cols());
        let (m, k2) = (bv.rows(), bv.cols());
        assert_eq!(k, k2, "matmul_transb inner dims {k} vs {k2}");
        let mut out = Tensor::zeros(&[n, m]);
        matmul_transb_acc(&av.data, &bv.data, &mut out.data, n, k, m);
        self.push(Op::MatMulTransB { a: a.0, b: b.0 }, out, vec![])
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let (av, bv) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        assert_eq!(av.shape, bv.shape, "add shape mismatch");
        let data = av.data.iter().zip(&bv.data).map(|(&x, &y)| x + y).collect();
        let out = Tensor::from_vec(&av.shape, data);
        self.push(Op::Add { a: a.0, b: b.0 }, out, vec![])
    }

    pub fn add_row(&mut self, a: Var, v: Var) -> Var {
        let (av, vv) = (&self.nodes[a.0].value, &self.nodes[v.0].value);
        let (n, m) = (av.rows(), av.cols());
        assert_eq!(vv.len(), m, "bias length mismatch");
        let mut out = av.clone();
        for i in 0..n {
            for j in 0..m {
                out.data[i * m + j] += vv.data[j];
            }
        }
        self.push(Op::AddRow { a: a.0, v: v.0 }, out, vec![])
    }

    pub fn scale(&mut self, a: Var, c: T) -> Var {
        let av = &self.nodes[a.0].value;
        let data = av.data.iter().map(|&x| x * c).collect();
        let out = Tensor::from_vec(&av.shape, data);
        self.push(Op::Scale { a: a.0, c }, out, vec![])
    }

    pub fn scale_var(&mut self, a: Var, s: Var) -> Var {
        let sv = self.nodes[s.0].value.item();
        let av = &self.nodes[a.0].value;
        let data = av.data.iter().map(|&x| x * sv).collect();
        let out = Tensor::from_vec(&av.shape, data);
        self.push(Op::ScaleVar { a: a.0, s: s.0 }, out, vec![])
    }

    pub fn gelu(&mut self, a: Var) -> Var {
        let av = &self.nodes[a.0].value;
        let half = T::from_f64(0.5);
        let inv_sqrt2 = T::from_f64(std::f64::consts::FRAC_1_SQRT_2);
        let data = av
            .data
            .iter()
            .map(|&x| x * half * (T::ONE + (x * inv_sqrt2).erf()))
            .collect();
        let out = Tensor::from_vec(&av.shape, data);
        self.push(Op::Gelu { a: a.0 }, out, vec![])
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let av = &self.nodes[a.0].value;
        let data = av.data.iter().map(|&x| T::ONE / (T::ONE + (-x).exp())).collect();
        let out = Tensor::from_vec(&av.shape, data);
        self.push(Op::Sigmoid { a: a.0 }, out, vec![])
    }

    pub fn softmax_rows(&mut self, a: Var) -> Var {
        let av = &self.nodes[a.0].value;
        let (n, m) = (av.rows(), av.cols());
        let mut out = Tensor::zeros(&[n, m]);
        for i in 0..n {
            let row = av.row(i);
            let mut mx = row[0];
            for &v in row {
                mx = mx.max_s(v);
            }
            let mut sum = T::ZERO;
            for j in 0..m {
                let e = (row[j] - mx).exp();
                out.data[i * m + j] = e;
                sum += e;
            }
            for j in 0..m {
                out.data[i * m + j] = out.data[i * m + j] / sum;
            }
        }
        self.push(Op::SoftmaxRows { a: a.0 }, out, vec![])
    }

    /// Row-wise layer normalization with affine parameters, eps = 1e-5.
    pub fn layernorm_rows(&mut self, x: Var, gamma: Var, beta: Var) -> Var {
        let eps = T::from_f64(1e-5);
        let xv = &self.nodes[x.0].value;
        let gv = &self.nodes[gamma.0].value;
        let bv = &self.nodes[beta.0].value;
        let (n, m) = (xv.rows(), xv.cols());
        assert_eq!(gv.len(), m);
        assert_eq!(bv.len(), m);
        let inv_m = T::from_f64(1.0 / m as f64);
        let mut out = Tensor::zeros(&[n, m]);
        let mut xhat = Tensor::zeros(&[n, m]);
        let mut rstd = Tensor::zeros(&[n, 1]);
        for i in 0..n {
            let row = xv.row(i);
            let mut mean = T::ZERO;
            for &v in row {
                mean += v;
            }
            mean *= inv_m;
            let mut var = T::ZERO;
            for &v in row {
                let d = v - mean;
                var += d * d;
            }
            var *= inv_m;
            let r = T::ONE / (var + eps).sqrt();
            rstd.data[i] = r;
            for j in 0..m {
                let h = (row[j] - mean) * r;
                xhat.data[i * m + j] = h;
                out.data[i * m + j] = h * gv.data[j] + bv.data[j];
            }
        }
        self.push(
            Op::LayerNormRows { x: x.0, gamma: gamma.0, beta: beta.0 },
            out,
            vec![xhat, rstd],
        )
    }

    /// Inverted dropout; identity at inference.
    pub fn dropout(&mut self, a: Var, p: f64) -> Var {
        if !self.train || p <= 0.0 {
            let av = self.nodes[a.0].value.clone();
            return self.push(Op::Scale { a: a.0, c: T::ONE }, av, vec![]);
        }
        let keep = 1.0 - p;
        let scale = T::from_f64(1.0 / keep);
        let shape = self.nodes[a.0].value.shape.clone();
        let count = self.nodes[a.0].value.len();
        let mask_data: Vec<T> = (0..count)
            .map(|_| if self.rng.random::<f64>() < keep { scale } else { T::ZERO })
            .collect();
        let mask = Tensor::from_vec(&shape, mask_data);
        let av = &self.nodes[a.0].value;
        let data = av.data.iter().zip(&mask.data).map(|(&x, &m)| x * m).collect();
        let out = Tensor::from_vec(&shape, data);
        self.push(Op::Dropout { a: a.0 }, out, vec![mask])
    }

    pub fn slice_cols(&mut self, a: Var, start: usize, len: usize) -> Var {
        let av = &self.nodes[a.0].value;
        let (n, m) = (av.rows(), av.cols());
        assert!(start + len <= m);
        let mut out = Tensor::zeros(&[n, len]);
        for i in 0..n {
            out.data[i * len..(i + 1) * len]
                .copy_from_slice(&av.data[i * m + start..i * m + start + len]);
        }
        self.push(Op::SliceCols { a: a.0, start }, out, vec![])
    }

    pub fn slice_rows(&mut self, a: Var, start: usize, len: usize) -> Var {
        let av = &self.nodes[a.0].value;
        let (n, m) = (av.rows(), av.cols());
        assert!(start + len <= n);
        let out = Tensor::from_vec(&[len, m], av.data[start * m..(start + len) * m].to_vec());
        self.push(Op::SliceRows { a: a.0, start }, out, vec![])
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Var {
        assert!(!parts.is_empty());
        let m = self.nodes[parts[0].0].value.cols();
        let mut data = Vec::new();
        let mut n = 0;
        for p in parts {
            let pv = &self.nodes[p.0].value;
            assert_eq!(pv.cols(), m);
            n += pv.rows();
            data.extend_from_slice(&pv.data);
        }
        let out = Tensor::from_vec(&[n, m], data);
        self.push(Op::ConcatRows { parts: parts.iter().map(|v| v.0).collect() }, out, vec![])
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Var {
        assert!(!parts.is_empty());
        let n = self.nodes[parts[0].0].value.rows();
        let widths: Vec<usize> = parts.iter().map(|p| self.nodes[p.0].value.cols()).collect();
        let m: usize = widths.iter().sum();
        let mut out = Tensor::zeros(&[n, m]);
        for i in 0..n {
            let mut off = 0;
            for (p, &w) in parts.iter().zip(&widths) {
                let pv = &self.nodes[p.0].value;
                assert_eq!(pv.rows(), n);
                out.data[i * m + off..i * m + off + w].copy_from_slice(&pv.row(i));
                off += w;
            }
        }
        self.push(Op::ConcatCols { parts: parts.iter().map(|v| v.0).collect() }, out, vec![])
    }

    pub fn sum_all(&mut self, a: Var) -> Var {
        let av = &self.nodes[a.0].value;
        let mut s = T::ZERO;
        for &v in &av.data {
            s += v;
        }
        self.push(Op::SumAll { a: a.0 }, Tensor::scalar(s), vec![])
    }

    /// Σ softplus(z) − t·z over all elements (BCE with logits).
    pub fn bce_with_logits_sum(&mut self, logits: Var, targets: &Tensor<T>) -> Var {
        let lv = &self.nodes[logits.0].value;
        assert_eq!(lv.shape, targets.shape, "target shape mismatch");
        let mut loss = T::ZERO;
        for (&z, &t) in lv.data.iter().zip(&targets.data) {
            // softplus(z) = max(z,0) + ln(1+exp(-|z|)) for stability.
            let zabs = if z.to_f64() >= 0.0 { z } else { -z };
            let softplus = z.max_s(T::ZERO) + (T::ONE + (-zabs).exp()).ln();
            loss += softplus - t * z;
        }
        self.push(Op::BceSum { logits: logits.0 }, Tensor::scalar(loss), vec![targets.clone()])
    }

    /// Row-wise cross entropy −Σ t·log softmax(z), summed over rows.
    pub fn ce_with_logits_sum(&mut self, logits: Var, target_rows: &Tensor<T>) -> Var {
        let lv = &self.nodes[logits.0].value;
        assert_eq!(lv.shape, target_rows.shape, "target shape mismatch");
        let (n, m) = (lv.rows(), lv.cols());
        let mut loss = T::ZERO;
        let mut probs = Tensor::zeros(&[n, m]);
        for i in 0..n {
            let row = lv.row(i);
            let mut mx = row[0];
            for &v in row {
                mx = mx.max_s(v);
            }
            let mut sum = T::ZERO;
            for j in 0..m {
                let e = (row[j] - mx).exp();
                probs.data[i * m + j] = e;
                sum += e;
            }
            let log_z = sum.ln() + mx;
            for j in 0..m {
                probs.data[i * m + j] = probs.data[i * m + j] / sum;
                loss += target_rows.data[i * m + j] * (log_z - row[j]);
            }
        }
        self.push(
            Op::CeSumRows { logits: logits.0 },
            Tensor::scalar(loss),
            vec![target_rows.clone(), probs],
        )
    }

    /// Reverse pass from a scalar loss node.
    pub fn backward(&self, loss: Var) -> Gradients<T> {
        let mut grads: Vec<Option<Tensor<T>>> = vec![None; self.nodes.len()];
        assert_eq!(self.nodes[loss.0].value.len(), 1, "backward needs a scalar loss");
        grads[loss.0] = Some(Tensor::scalar(T::ONE));
        let mut param_nodes = Vec::new();

        for idx in (0..=loss.0).rev() {
            let g = match grads[idx].take() {
                Some(g) => g,
                None => continue,
            };
            let node = &self.nodes[idx];
            match &node.op {
                Op::Input => {}
                Op::Param { id } => {
                    param_nodes.push((*id, idx));
                    grads[idx] = Some(g);
                    continue;
                }
                Op::MatMul { a, b } => {
                    let av = &self.nodes[*a].value;
                    let bv = &self.nodes[*b].value;
                    let (n, k) = (av.rows(), av.cols());
                    let m = bv.cols();
                    {
                        let ga = ensure(&mut grads, *a, &av.shape);
                        matmul_transb_acc(&g.data, &bv.data, &mut ga.data, n, m, k);
                    }
                    {
                        let gb = ensure(&mut grads, *b, &bv.shape);
                        matmul_transa_acc(&av.data, &g.data, &mut gb.data, n, k, m);
                    }
                }
                Op::MatMulTransB { a, b } => {
                    // out = A·Bᵀ ; dA = g·B ; dB = gᵀ·A
                    let av = &self.nodes[*a].value;
                    let bv = &self.nodes[*b].value;
                    let (n, k) = (av.rows(), av.cols());
                    let m = bv.rows();
                    {
                        let ga = ensure(&mut grads, *a, &av.shape);
                        matmul_acc(&g.data, &bv.data, &mut ga.data, n, m, k);
                    }
                    {
                        let gb = ensure(&mut grads, *b, &bv.shape);
                        matmul_transa_acc(&g.data, &av.data, &mut gb.data, n, m, k);
                    }
                }
                Op::Add { a, b } => {
                    accumulate(&mut grads, *a, &g);
                    accumulate(&mut grads, *b, &g);
                }
                Op::AddRow { a, v } => {
                    accumulate(&mut grads, *a, &g);
                    let m = self.nodes[*v].value.len();
                    let shape = self.nodes[*v].value.shape.clone();
                    let gv = ensure(&mut grads, *v, &shape);
                    for i in 0..g.rows() {
                        for j in 0..m {
                            gv.data[j] += g.data[i * m + j];
                        }
                    }
                }
                Op::Scale { a, c } => {
                    let av_shape = self.nodes[*a].value.shape.clone();
                    let ga = ensure(&mut grads, *a, &av_shape);
                    for (gav, &gv) in ga.data.iter_mut().zip(&g.data) {
                        *gav += gv * *c;
                    }
                }
                Op::ScaleVar { a, s } => {
                    let sval = self.nodes[*s].value.item();
                    let av = &self.nodes[*a].value;
                    {
                        let ga = ensure(&mut grads, *a, &av.shape.clone());
                        for (gav, &gv) in ga.data.iter_mut().zip(&g.data) {
                            *gav += gv * sval;
                        }
                    }
                    {
                        let mut ds = T::ZERO;
                        for (&gv, &avv) in g.data.iter().zip(&av.data) {
                            ds += gv * avv;
                        }
                        let gs = ensure(&mut grads, *s, &[1, 1]);
                        gs.data[0] += ds;
                    }
                }
                Op::Gelu { a } => {
                    let av = &self.nodes[*a].value;
                    let shape = av.shape.clone();
                    let inv_sqrt2 = T::from_f64(std::f64::consts::FRAC_1_SQRT_2);
                    let inv_sqrt_2pi = T::from_f64(1.0 / (std::f64::consts::TAU).sqrt());
                    let half = T::from_f64(0.5);
                    let ga = ensure(&mut grads, *a, &shape);
                    for ((gav, &x), &gv) in ga.data.iter_mut().zip(&av.data).zip(&g.data) {
                        let cdf = half * (T::ONE + (x * inv_sqrt2).erf());
                        let pdf = (-(x * x) * half).exp() * inv_sqrt_2pi;
                        *gav += gv * (cdf + x * pdf);
                    }
                }
                Op::Sigmoid { a } => {
                    let yv = &node.value;
                    let shape = yv.shape.clone();
                    let ga = ensure(&mut grads, *a, &shape);
                    for ((gav, &y), &gv) in ga.data.iter_mut().zip(&yv.data).zip(&g.data) {
                        *gav += gv * y * (T::ONE - y);
                    }
                }
                Op::SoftmaxRows { a } => {
                    let yv = &node.value;
                    let (n, m) = (yv.rows(), yv.cols());
                    let ga = ensure(&mut grads, *a, &yv.shape.clone());
                    for i in 0..n {
                        let mut dot = T::ZERO;
                        for j in 0..m {
                            dot += g.data[i * m + j] * yv.data[i * m + j];
                        }
                        for j in 0..m {
                            ga.data[i * m + j] +=
                                yv.data[i * m + j] * (g.data[i * m + j] - dot);
                        }
                    }
                }
                Op::LayerNormRows { x, gamma, beta } => {
                    let xhat = &node.aux[0];
                    let rstd = &node.aux[1];
                    let gv = &self.nodes[*gamma].value;
                    let (n, m) = (xhat.rows(), xhat.cols());
                    let inv_m = T::from_f64(1.0 / m as f64);
                    // dγ, dβ
                    {
                        let ggam = ensure(&mut grads, *gamma, &gv.shape.clone());
                        for i in 0..n {
                            for j in 0..m {
                                ggam.data[j] += g.data[i * m + j] * xhat.data[i * m + j];
                            }
                        }
                    }
                    {
                        let beta_shape = self.nodes[*beta].value.shape.clone();
                        let gbeta = ensure(&mut grads, *beta, &beta_shape);
                        for i in 0..n {
                            for j in 0..m {
                                gbeta.data[j] += g.data[i * m + j];
                            }
                        }
                    }
                    // dx
                    {
                        let x_shape = self.nodes[*x].value.shape.clone();
                        let gx = ensure(&mut grads, *x, &x_shape);
                        for i in 0..n {
                            let r = rstd.data[i];
                            let mut sum_dh = T::ZERO;
                            let mut sum_dh_h = T::ZERO;
                            for j in 0..m {
                                let dh = g.data[i * m + j] * gv.data[j];
                                sum_dh += dh;
                                sum_dh_h += dh * xhat.data[i * m + j];
                            }
                            for j in 0..m {
                                let dh = g.data[i * m + j] * gv.data[j];
                                gx.data[i * m + j] += r
                                    * (dh
                                        - inv_m * sum_dh
                                        - xhat.data[i * m + j] * inv_m * sum_dh_h);
                            }
                        }
                    }
                }
                Op::Dropout { a } => {
                    let mask = &node.aux[0];
                    let shape = mask.shape.clone();
                    let ga = ensure(&mut grads, *a, &shape);
                    for ((gav, &mv), &gv) in ga.data.iter_mut().zip(&mask.data).zip(&g.data) {
                        *gav += gv * mv;
                    }
                }
                Op::SliceCols { a, start } => {
                    let av = &self.nodes[*a].value;
                    let (n, m) = (av.rows(), av.cols());
                    let w = g.cols();
                    let ga = ensure(&mut grads, *a, &av.shape.clone());
                    for i in 0..n {
                        for j in 0..w {
                            ga.data[i * m + start + j] += g.data[i * w + j];
                        }
                    }
                }
                Op::SliceRows { a, start } => {
                    let av = &self.nodes[*a].value;
                    let m = av.cols();
                    let ga = ensure(&mut grads, *a, &av.shape.clone());
                    for i in 0..g.rows() {
                        for j in 0..m {
                            ga.data[(start + i) * m + j] += g.data[i * m + j];
                        }
                    }
                }
                Op::ConcatRows { parts } => {
                    let m = g.cols();
                    let mut row_off = 0;
                    for &p in parts {
                        let rows = self.nodes[p].value.rows();
                        let shape = self.nodes[p].value.shape.clone();
                        let gp = ensure(&mut grads, p, &shape);
                        for i in 0..rows {
                            for j in 0..m {
                                gp.data[i * m + j] += g.data[(row_off + i) * m + j];
                            }
                        }
                        row_off += rows;
                    }
                }
                Op::ConcatCols { parts } => {
                    let n = g.rows();
                    let m = g.cols();
                    let mut col_off = 0;
                    for &p in parts {
                        let w = self.nodes[p].value.cols();
                        let shape = self.nodes[p].value.shape.clone();
                        let gp = ensure(&mut grads, p, &shape);
                        for i in 0..n {
                            for j in 0..w {
                                gp.data[i * w + j] += g.data[i * m + col_off + j];
                            }
                        }
                        col_off += w;
                    }
                }
                Op::SumAll { a } => {
                    let shape = self.nodes[*a].value.shape.clone();
                    let ga = ensure(&mut grads, *a, &shape);
                    let gv = g.data[0];
                    for v in ga.data.iter_mut() {
                        *v += gv;
                    }
                }
                Op::BceSum { logits } => {
                    let targets = &node.aux[0];
                    let lv = &self.nodes[*logits].value;
                    let shape = lv.shape.clone();
                    let gl = ensure(&mut grads, *logits, &shape);
                    let gv = g.data[0];
                    for ((glv, &z), &t) in gl.data.iter_mut().zip(&lv.data).zip(&targets.data) {
                        let sig = T::ONE / (T::ONE + (-z).exp());
                        *glv += gv * (sig - t);
                    }
                }
                Op::CeSumRows { logits } => {
                    let targets = &node.aux[0];
                    let probs = &node.aux[1];
                    let shape = self.nodes[*logits].value.shape.clone();
                    let gl = ensure(&mut grads, *logits, &shape);
                    let gv = g.data[0];
                    for ((glv, &p), &t) in gl.data.iter_mut().zip(&probs.data).zip(&targets.data)
                    {
                        *glv += gv * (p - t);
                    }
                }
            }
            grads[idx] = Some(g);
        }
        Gradients { by_node: grads, param_nodes }
    }
}

fn ensure<'a, T: Scalar>(
    grads: &'a mut [Option<Tensor<T>>],
    idx: usize,
    shape: &[usize],
) -> &'a mut Tensor<T> {
    if grads[idx].is_none() {
        grads[idx] = Some(Tensor::zeros(shape));
    }
    grads[idx].as_mut().unwrap()
}

fn accumulate<T: Scalar>(grads: &mut [Option<Tensor<T>>], idx: usize, g: &Tensor<T>) {
    let acc = ensure(grads, idx, &g.shape);
    for (a, &v) in acc.data.iter_mut().zip(&g.data) {
        *a += v;
    }
}
