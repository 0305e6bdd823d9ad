//! Parameter containers and graph builders for the transformer layers.
//!
//! Residual blocks are pre-norm (layer normalization ahead of each
//! sub-block) with a final normalization at stack output; dropout lives
//! only where the architecture calls for it (embedding MLP and classifier
//! heads).

use rand::Rng;

use super::tape::{Tape, Var};
use super::tensor::{Scalar, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamId(pub usize);

/// Ordered, named parameter store. Layer structs hold ids into it.
#[derive(Debug, Clone)]
pub struct ParamSet<T> {
    pub names: Vec<String>,
    pub tensors: Vec<Tensor<T>>,
}

impl<T: Scalar> ParamSet<T> {
    pub fn new() -> Self {
        Self { names: Vec::new(), tensors: Vec::new() }
    }

    pub fn alloc(&mut self, name: &str, t: Tensor<T>) -> ParamId {
        assert!(!self.names.iter().any(|n| n == name), "duplicate parameter {name}");
        self.names.push(name.to_string());
        self.tensors.push(t);
        ParamId(self.tensors.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &Tensor<T> {
        &self.tensors[id.0]
    }

    pub fn scalar_count(&self) -> usize {
        self.tensors.iter().map(|t| t.len()).sum()
    }

    pub fn map_to<U: Scalar>(&self) -> ParamSet<U> {
        ParamSet {
            names: self.names.clone(),
            tensors: self.tensors.iter().map(|t| t.map_to()).collect(),
        }
    }
}

impl<T: Scalar> Default for ParamSet<T> {
    fn default() -> Self {
        Self::new()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Linear {
    pub w: ParamId,
    pub b: ParamId,
}

impl Linear {
    pub fn init<T: Scalar>(
        params: &mut ParamSet<T>,
        name: &str,
        d_in: usize,
        d_out: usize,
        rng: &mut impl Rng,
    ) -> Self {
        let std = 1.0 / (d_in as f64).sqrt();
        Self {
            w: params.alloc(&format!("{name}.w"), Tensor::randn(&[d_in, d_out], std, rng)),
            b: params.alloc(&format!("{name}.b"), Tensor::zeros(&[1, d_out])),
        }
    }

    pub fn forward<T: Scalar>(&self, tape: &mut Tape<T>, params: &ParamSet<T>, x: Var) -> Var {
        let w = tape.param(self.w.0, params.get(self.w));
        let b = tape.param(self.b.0, params.get(self.b));
        let xw = tape.matmul(x, w);
        tape.add_row(xw, b)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LayerNorm {
    pub gamma: ParamId,
    pub beta: ParamId,
}

impl LayerNorm {
    pub fn init<T: Scalar>(params: &mut ParamSet<T>, name: &str, d: usize) -> Self {
        let ones = Tensor::from_vec(&[1, d], vec![T::ONE; d]);
        Self {
            gamma: params.alloc(&format!("{name}.gamma"), ones),
            beta: params.alloc(&format!("{name}.beta"), Tensor::zeros(&[1, d])),
        }
    }

    pub fn forward<T: Scalar>(&self, tape: &mut Tape<T>, params: &ParamSet<T>, x: Var) -> Var {
        let g = tape.param(self.gamma.0, params.get(self.gamma));
        let b = tape.param(self.beta.0, params.get(self.beta));
        tape.layernorm_rows(x, g, b)
    }
}

/// Multi-head attention (self- or cross-) with output projection.
#[derive(Debug, Clone, Copy)]
pub struct Mha {
    pub wq: Linear,
    pub wk: Linear,
    pub wv: Linear,
    pub wo: Linear,
    pub heads: usize,
    pub d_model: usize,
}

impl Mha {
    pub fn init<T: Scalar>(
        params: &mut ParamSet<T>,
        name: &str,
        d_model: usize,
        heads: usize,
        rng: &mut impl Rng,
    ) -> Self {
        assert_eq!(d_model % heads, 0, "d_model must divide by heads");
        Self {
            wq: Linear::init(params, &format!("{name}.q"), d_model, d_model, rng),
            wk: Linear::init(params, &format!("{name}.k"), d_model, d_model, rng),
            wv: Linear::init(params, &format!("{name}.v"), d_model, d_model, rng),
            wo: Linear::init(params, &format!("{name}.o"), d_model, d_model, rng),
            heads,
            d_model,
        }
    }

    /// Returns the block output; attention matrices (one per head) are
    /// also returned for inspection.
    pub fn forward_detail<T: Scalar>(
        &self,
        tape: &mut Tape<T>,
        params: &ParamSet<T>,
        queries: Var,
        memory: Var,
    ) -> (Var, Vec<Var>) {
        let dh = self.d_model / self.heads;
        let q = self.wq.forward(tape, params, queries);
        let k = self.wk.forward(tape, params, memory);
        let v = self.wv.forward(tape, params, memory);
        let scale = T::from_f64(1.0 / (dh as f64).sqrt());
        let mut ctx_heads = Vec::with_capacity(self.heads);
        let mut attns = Vec::with_capacity(self.heads);
        for h in 0..self.heads {
            let qh = tape.slice_cols(q, h * dh, dh);
            let kh = tape.slice_cols(k, h * dh, dh);
            let vh = tape.slice_cols(v, h * dh, dh);
            let scores_raw = tape.matmul_transb(qh, kh);
            let scores = tape.scale(scores_raw, scale);
            let attn = tape.softmax_rows(scores);
            attns.push(attn);
            ctx_heads.push(tape.matmul(attn, vh));
        }
        let ctx = tape.concat_cols(&ctx_heads);
        (self.wo.forward(tape, params, ctx), attns)
    }

    pub fn forward<T: Scalar>(
        &self,
        tape: &mut Tape<T>,
        params: &ParamSet<T>,
        queries: Var,
        memory: Var,
    ) -> Var {
        self.forward_detail(tape, params, queries, memory).0
    }
}

/// Pre-norm self-attention encoder layer with a GELU feed-forward block.
#[derive(Debug, Clone, Copy)]
pub struct EncoderLayer {
    pub ln1: LayerNorm,
    pub attn: Mha,
    pub ln2: LayerNorm,
    pub ff1: Linear,
    pub ff2: Linear,
}

impl EncoderLayer {
    pub fn init<T: Scalar>(
        params: &mut ParamSet<T>,
        name: &str,
        d_model: usize,
        heads: usize,
        ff_dim: usize,
        rng: &mut impl Rng,
    ) -> Self {
        Self {
            ln1: LayerNorm::init(params, &format!("{name}.ln1"), d_model),
            attn: Mha::init(params, &format!("{name}.attn"), d_model, heads, rng),
            ln2: LayerNorm::init(params, &format!("{name}.ln2"), d_model),
            ff1: Linear::init(params, &format!("{name}.ff1"), d_model, ff_dim, rng),
            ff2: Linear::init(params, &format!("{name}.ff2"), ff_dim, d_model, rng),
        }
    }

    pub fn forward<T: Scalar>(&self, tape: &mut Tape<T>, params: &ParamSet<T>, x: Var) -> Var {
        let a = self.ln1.forward(tape, params, x);
        let attn = self.attn.forward(tape, params, a, a);
        let x = tape.add(x, attn);
        let b = self.ln2.forward(tape, params, x);
        let h = self.ff1.forward(tape, params, b);
        let h = tape.gelu(h);
        let h = self.ff2.forward(tape, params, h);
        tape.add(x, h)
    }
}

/// Pre-norm decoder layer: query self-attention, cross-attention over the
/// memory, then feed-forward.
#[derive(Debug, Clone, Copy)]
pub struct DecoderLayer {
    pub ln_self: LayerNorm,
    pub self_attn: Mha,
    pub ln_cross: LayerNorm,
    pub cross_attn: Mha,
    pub ln_ff: LayerNorm,
    pub ff1: Linear,
    pub ff2: Linear,
}

impl DecoderLayer {
    pub fn init<T: Scalar>(
        params: &mut ParamSet<T>,
        name: &str,
        d_model: usize,
        heads: usize,
        ff_dim: usize,
        rng: &mut impl Rng,
    ) -> Self {
        Self {
            ln_self: LayerNorm::init(params, &format!("{name}.ln_self"), d_model),
            self_attn: Mha::init(params, &format!("{name}.self"), d_model, heads, rng),
            ln_cross: LayerNorm::init(params, &format!("{name}.ln_cross"), d_model),
            cross_attn: Mha::init(params, &format!("{name}.cross"), d_model, heads, rng),
            ln_ff: LayerNorm::init(params, &format!("{name}.ln_ff"), d_model),
            ff1: Linear::init(params, &format!("{name}.ff1"), d_model, ff_dim, rng),
            ff2: Linear::init(params, &format!("{name}.ff2"), ff_dim, d_model, rng),
        }
    }

    pub fn forward<T: Scalar>(
        &self,
        tape: &mut Tape<T>,
        params: &ParamSet<T>,
        queries: Var,
        memory: Var,
    ) -> Var {
        let a = self.ln_self.forward(tape, params, queries);
        let sa = self.self_attn.forward(tape, params, a, a);
        let q = tape.add(queries, sa);
        let c = self.ln_cross.forward(tape, params, q);
        let ca = self.cross_attn.forward(tape, params, c, memory);
        let q = tape.add(q, ca);
        let f = self.ln_ff.forward(tape, params, q);
        let h = self.ff1.forward(tape, params, f);
        let h = tape.gelu(h);
        let h = self.ff2.forward(tape, params, h);
        tape.add(q, h)
    }
}

/// IQ-sample embedding: fold into patches, three linear layers (output
/// sizes 2·d, 2·d, d) with GELU and dropout after the first two, layer
/// normalization on each, learned positional embeddings added at the end.
#[derive(Debug, Clone, Copy)]
pub struct EmbedMlp {
    pub l1: Linear,
    pub n1: LayerNorm,
    pub l2: Linear,
    pub n2: LayerNorm,
    pub l3: Linear,
    pub n3: LayerNorm,
    pub pos: ParamId,
    pub p_drop: f64,
    pub n_tokens: usize,
    pub d_model: usize,
}

impl EmbedMlp {
    pub fn init<T: Scalar>(
        params: &mut ParamSet<T>,
        name: &str,
        in_dim: usize,
        d_model: usize,
        n_tokens: usize,
        p_drop: f64,
        rng: &mut impl Rng,
    ) -> Self {
        Self {
            l1: Linear::init(params, &format!("{name}.l1"), in_dim, 2 * d_model, rng),
            n1: LayerNorm::init(params, &format!("{name}.n1"), 2 * d_model),
            l2: Linear::init(params, &format!("{name}.l2"), 2 * d_model, 2 * d_model, rng),
            n2: LayerNorm::init(params, &format!("{name}.n2"), 2 * d_model),
            l3: Linear::init(params, &format!("{name}.l3"), 2 * d_model, d_model, rng),
            n3: LayerNorm::init(params, &format!("{name}.n3"), d_model),
            pos: params.alloc(
                &format!("{name}.pos"),
                Tensor::randn(&[n_tokens, d_model], 0.02, rng),
            ),
            p_drop,
            n_tokens,
            d_model,
        }
    }

    pub fn forward<T: Scalar>(&self, tape: &mut Tape<T>, params: &ParamSet<T>, z: Var) -> Var {
        assert_eq!(tape.value(z).rows(), self.n_tokens, "token count mismatch");
        let h = self.l1.forward(tape, params, z);
        let h = tape.gelu(h);
        let h = tape.dropout(h, self.p_drop);
        let h = self.n1.forward(tape, params, h);
        let h = self.l2.forward(tape, params, h);
        let h = tape.gelu(h);
        let h = tape.dropout(h, self.p_drop);
        let h = self.n2.forward(tape, params, h);
        let h = self.l3.forward(tape, params, h);
        let h = self.n3.forward(tape, params, h);
        let pos = tape.param(self.pos.0, params.get(self.pos));
        tape.add(h, pos)
    }
}

/// Fold interleaved IQ rows `(N, 2P)` into patch tokens `(N/F, 2PF)`.
/// Plain data movement; the result feeds [`EmbedMlp`].
pub fn fold_iq<T: Scalar>(iq: &[T], n: usize, two_p: usize, f: usize) -> Tensor<T> {
    assert_eq!(iq.len(), n * two_p);
    assert_eq!(n % f, 0, "N must divide by the folding factor");
    Tensor::from_vec(&[n / f, two_p * f], iq.to_vec())
}

/// Label smoothing for per-bit sigmoid heads: bit targets move to
/// `s/2` and `1 - s/2`.
pub fn smooth_binary_targets<T: Scalar>(bits: &[u8], smoothing: f64) -> Tensor<T> {
    let lo = T::from_f64(smoothing / 2.0);
    let hi = T::from_f64(1.0 - smoothing / 2.0);
    Tensor::from_vec(
        &[bits.len(), 1],
        bits.iter().map(|&b| if b == 1 { hi } else { lo }).collect(),
    )
}

/// Label smoothing for a categorical target: `(1-s)·onehot + s/K`.
pub fn smooth_onehot<T: Scalar>(class: usize, num_classes: usize, smoothing: f64) -> Tensor<T> {
    let base = T::from_f64(smoothing / num_classes as f64);
    let mut data = vec![base; num_classes];
    data[class] = T::from_f64(1.0 - smoothing + smoothing / num_classes as f64);
    Tensor::from_vec(&[1, num_classes], data)
}
