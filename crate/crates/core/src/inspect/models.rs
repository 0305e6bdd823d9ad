//! Neural model definitions and inference entry points.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::coset::CosetSampleSet;
use crate::dsp::ComplexSignal;
use crate::nn::{
    load_params, save_params, DecoderLayer, EmbedMlp, EncoderLayer, LayerNorm, Linear, ParamId,
    ParamSet, Scalar, Tape, Tensor, Var,
};
use crate::recovery::SupportEstimate;

use super::InspectError;

/// Interleave coset streams into the (N, 2P) real layout and normalize by
/// the global RMS.
pub fn preprocess_coset<T: Scalar>(y: &CosetSampleSet) -> Tensor<T> {
    let p = y.pattern.p();
    let n = y.n();
    let mut data = vec![T::ZERO; n * 2 * p];
    let mut power = 0.0f64;
    for (pi, stream) in y.y.iter().enumerate() {
        for (ni, &v) in stream.iter().enumerate() {
            data[ni * 2 * p + 2 * pi] = T::from_f64(v.re);
            data[ni * 2 * p + 2 * pi + 1] = T::from_f64(v.im);
            power += v.norm_sqr();
        }
    }
    normalize_rms(&mut data, power, n * p);
    Tensor::from_vec(&[n, 2 * p], data)
}

/// A recovered sub-band baseband treated as a single-coset input (P = 1).
pub fn preprocess_subband<T: Scalar>(x_bb: &ComplexSignal) -> Tensor<T> {
    let n = x_bb.len();
    let mut data = vec![T::ZERO; n * 2];
    let mut power = 0.0f64;
    for (ni, &v) in x_bb.samples.iter().enumerate() {
        data[ni * 2] = T::from_f64(v.re);
        data[ni * 2 + 1] = T::from_f64(v.im);
        power += v.norm_sqr();
    }
    normalize_rms(&mut data, power, n);
    Tensor::from_vec(&[n, 2], data)
}

fn normalize_rms<T: Scalar>(data: &mut [T], power: f64, count: usize) {
    let rms = (power / count.max(1) as f64).sqrt();
    if rms > 0.0 {
        let s = T::from_f64(1.0 / rms);
        for v in data.iter_mut() {
            *v *= s;
        }
    }
}

/// Same folding the embedding performs, done on a raw interleaved buffer
/// (training-path input from dataset records).
pub fn fold_tokens<T: Scalar>(iq: Tensor<T>, fold: usize) -> Tensor<T> {
    let n = iq.rows();
    let w = iq.cols();
    assert_eq!(n % fold, 0, "N not divisible by folding factor");
    Tensor::from_vec(&[n / fold, w * fold], iq.data)
}

// ---------------------------------------------------------------------
// Spectrum sensor
// ---------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorArch {
    pub p: usize,
    pub l: usize,
    pub n: usize,
    pub fold: usize,
    pub d_model: usize,
    pub heads: usize,
    pub ff_dim: usize,
    pub layers: usize,
    pub p_drop: f64,
}

impl SensorArch {
    pub fn standard(p: usize, l: usize, n: usize) -> Self {
        Self { p, l, n, fold: 16, d_model: 128, heads: 4, ff_dim: 512, layers: 2, p_drop: 0.1 }
    }

    pub fn tokens(&self) -> usize {
        self.n / self.fold
    }
}

/// Multi-label occupancy classifier: embedding MLP, a learnable [CLS]
/// token, encoder layers, and a sigmoid head of width L.
pub struct SpectrumSensorModel<T> {
    pub arch: SensorArch,
    pub params: ParamSet<T>,
    embed: EmbedMlp,
    encoders: Vec<EncoderLayer>,
    final_ln: LayerNorm,
    cls: ParamId,
    head: Linear,
}

impl<T: Scalar> SpectrumSensorModel<T> {
    pub fn init(arch: SensorArch, seed: u64) -> Self {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let mut params = ParamSet::new();
        let embed = EmbedMlp::init(
            &mut params,
            "embed",
            2 * arch.p * arch.fold,
            arch.d_model,
            arch.tokens(),
            arch.p_drop,
            &mut rng,
        );
        let encoders = (0..arch.layers)
            .map(|i| {
                EncoderLayer::init(
                    &mut params,
                    &format!("enc{i}"),
                    arch.d_model,
                    arch.heads,
                    arch.ff_dim,
                    &mut rng,
                )
            })
            .collect();
        let final_ln = LayerNorm::init(&mut params, "final_ln", arch.d_model);
        let cls = params.alloc("cls", Tensor::randn(&[1, arch.d_model], 1.0, &mut rng));
        let head = Linear::init(&mut params, "head", arch.d_model, arch.l, &mut rng);
        Self { arch, params, embed, encoders, final_ln, cls, head }
    }

    /// Occupancy logits (1, L) for a preprocessed (N, 2P) input.
    pub fn logits(&self, tape: &mut Tape<T>, input: Tensor<T>) -> Var {
        assert_eq!(input.rows(), self.arch.n, "N mismatch");
        assert_eq!(input.cols(), 2 * self.arch.p, "P mismatch");
        let folded = fold_tokens(input, self.arch.fold);
        let x = tape.input(folded);
        let tok = self.embed.forward(tape, &self.params, x);
        let cls = tape.param(self.cls.0, self.params.get(self.cls));
        let mut seq = tape.concat_rows(&[cls, tok]);
        for enc in &self.encoders {
            seq = enc.forward(tape, &self.params, seq);
        }
        let seq = self.final_ln.forward(tape, &self.params, seq);
        let pooled = tape.slice_rows(seq, 0, 1);
        self.head.forward(tape, &self.params, pooled)
    }

    /// Inference: per-sub-band occupancy probabilities.
    pub fn sense(&self, y: &CosetSampleSet) -> Result<SupportEstimate, InspectError> {
        if y.pattern.p() != self.arch.p || y.n() != self.arch.n {
            return Err(InspectError::ShapeMismatch(format!(
                "input ({}, {}) vs trained ({}, {})",
                y.pattern.p(),
                y.n(),
                self.arch.p,
                self.arch.n
            )));
        }
        let input = preprocess_coset::<T>(y);
        let mut tape = Tape::new(0, false);
        let logits = self.logits(&mut tape, input);
        let probs_var = tape.sigmoid(logits);
        let probs = tape.value(probs_var).data.iter().map(|v| v.to_f64()).collect();
        Ok(SupportEstimate::new(probs, 0.5))
    }

    pub fn save(&self, path: &std::path::Path) -> Result<(), InspectError> {
        let arch = serde_json::to_string(&SensorStamp { kind: "sensor", arch: &self.arch })
            .expect("arch serializes");
        save_params(path, &arch, &self.params, false)?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self, InspectError> {
        let file = load_params::<T>(path)?;
        let stamp: SensorStampOwned =
            serde_json::from_str(&file.arch).map_err(|e| InspectError::WrongArch {
                expected: "sensor",
                detail: e.to_string(),
            })?;
        if stamp.kind != "sensor" {
            return Err(InspectError::WrongArch { expected: "sensor", detail: stamp.kind });
        }
        let mut model = Self::init(stamp.arch, 0);
        if model.params.names != file.params.names {
            return Err(InspectError::WrongArch {
                expected: "sensor",
                detail: "parameter names differ".into(),
            });
        }
        model.params = file.params;
        Ok(model)
    }
}

#[derive(Serialize)]
struct SensorStamp<'a> {
    kind: &'static str,
    arch: &'a SensorArch,
}

#[derive(Deserialize)]
struct SensorStampOwned {
    kind: String,
    arch: SensorArch,
}

// ---------------------------------------------------------------------
// Protocol identifier
// ---------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentifierArch {
    pub n: usize,
    pub fold: usize,
    pub d_model: usize,
    pub heads: usize,
    pub ff_dim: usize,
    pub enc_layers: usize,
    pub dec_layers: usize,
    pub classes: usize,
    pub p_drop: f64,
}

impl IdentifierArch {
    pub fn standard(n: usize) -> Self {
        Self {
            n,
            fold: 32,
            d_model: 128,
            heads: 4,
            ff_dim: 384,
            enc_layers: 2,
            dec_layers: 1,
            classes: 4,
            p_drop: 0.1,
        }
    }

    pub fn tokens(&self) -> usize {
        self.n / self.fold
    }
}

/// Encoder/decoder classifier over {dvbs2, wifi_nonht, wifi_ht,
/// no_header}; the encoder output doubles as the feature extractor for
/// header decoding.
pub struct ProtocolIdentifierModel<T> {
    pub arch: IdentifierArch,
    pub params: ParamSet<T>,
    embed: EmbedMlp,
    encoders: Vec<EncoderLayer>,
    enc_ln: LayerNorm,
    query: ParamId,
    decoders: Vec<DecoderLayer>,
    dec_ln: LayerNorm,
    head1: Linear,
    head1_ln: LayerNorm,
    head2: Linear,
}

impl<T: Scalar> ProtocolIdentifierModel<T> {
    pub fn init(arch: IdentifierArch, seed: u64) -> Self {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let mut params = ParamSet::new();
        let embed = EmbedMlp::init(
            &mut params,
            "embed",
            2 * arch.fold,
            arch.d_model,
            arch.tokens(),
            arch.p_drop,
            &mut rng,
        );
        let encoders = (0..arch.enc_layers)
            .map(|i| {
                EncoderLayer::init(
                    &mut params,
                    &format!("enc{i}"),
                    arch.d_model,
                    arch.heads,
                    arch.ff_dim,
                    &mut rng,
                )
            })
            .collect();
        let enc_ln = LayerNorm::init(&mut params, "enc_ln", arch.d_model);
        let query = params.alloc("query", Tensor::randn(&[1, arch.d_model], 1.0, &mut rng));
        let decoders = (0..arch.dec_layers)
            .map(|i| {
                DecoderLayer::init(
                    &mut params,
                    &format!("dec{i}"),
                    arch.d_model,
                    arch.heads,
                    arch.ff_dim,
                    &mut rng,
                )
            })
            .collect();
        let dec_ln = LayerNorm::init(&mut params, "dec_ln", arch.d_model);
        let head1 = Linear::init(&mut params, "head1", arch.d_model, arch.d_model, &mut rng);
        let head1_ln = LayerNorm::init(&mut params, "head1_ln", arch.d_model);
        let head2 = Linear::init(&mut params, "head2", arch.d_model, arch.classes, &mut rng);
        Self {
            arch,
            params,
            embed,
            encoders,
            enc_ln,
            query,
            decoders,
            dec_ln,
            head1,
            head1_ln,
            head2,
        }
    }

    /// Class logits (1, 4) and the encoder feature sequence var.
    pub fn logits(&self, tape: &mut Tape<T>, input: Tensor<T>) -> (Var, Var) {
        assert_eq!(input.rows(), self.arch.n, "N mismatch");
        assert_eq!(input.cols(), 2, "identifier expects P = 1 input");
        let folded = fold_tokens(input, self.arch.fold);
        let x = tape.input(folded);
        let tok = self.embed.forward(tape, &self.params, x);
        let mut seq = tok;
        for enc in &self.encoders {
            seq = enc.forward(tape, &self.params, seq);
        }
        let features = self.enc_ln.forward(tape, &self.params, seq);
        let q = tape.param(self.query.0, self.params.get(self.query));
        let mut h = q;
        for dec in &self.decoders {
            h = dec.forward(tape, &self.params, h, features);
        }
        let h = self.dec_ln.forward(tape, &self.params, h);
        let h = self.head1.forward(tape, &self.params, h);
        let h = tape.gelu(h);
        let h = self.head1_ln.forward(tape, &self.params, h);
        let h = tape.dropout(h, self.arch.p_drop);
        (self.head2.forward(tape, &self.params, h), features)
    }

    /// Inference: class distribution plus encoder features for fusion.
    pub fn identify(
        &self,
        x_bb: &ComplexSignal,
    ) -> Result<(Vec<f64>, Tensor<T>), InspectError> {
        if x_bb.len() != self.arch.n {
            return Err(InspectError::ShapeMismatch(format!(
                "input length {} vs trained {}",
                x_bb.len(),
                self.arch.n
            )));
        }
        let input = preprocess_subband::<T>(x_bb);
        let mut tape = Tape::new(0, false);
        let (logits, features) = self.logits(&mut tape, input);
        let probs_var = tape.softmax_rows(logits);
        let probs = tape.value(probs_var).data.iter().map(|v| v.to_f64()).collect();
        Ok((probs, tape.value(features).clone()))
    }

    pub fn save(&self, path: &std::path::Path) -> Result<(), InspectError> {
        let arch =
            serde_json::to_string(&IdentifierStamp { kind: "identifier", arch: &self.arch })
                .expect("arch serializes");
        save_params(path, &arch, &self.params, false)?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self, InspectError> {
        let file = load_params::<T>(path)?;
        let stamp: IdentifierStampOwned =
            serde_json::from_str(&file.arch).map_err(|e| InspectError::WrongArch {
                expected: "identifier",
                detail: e.to_string(),
            })?;
        if stamp.kind != "identifier" {
            return Err(InspectError::WrongArch { expected: "identifier", detail: stamp.kind });
        }
        let mut model = Self::init(stamp.arch, 0);
        if model.params.names != file.params.names {
            return Err(InspectError::WrongArch {
                expected: "identifier",
                detail: "parameter names differ".into(),
            });
        }
        model.params = file.params;
        Ok(model)
    }
}

#[derive(Serialize)]
struct IdentifierStamp<'a> {
    kind: &'static str,
    arch: &'a IdentifierArch,
}

#[derive(Deserialize)]
struct IdentifierStampOwned {
    kind: String,
    arch: IdentifierArch,
}

// ---------------------------------------------------------------------
// Header decoder
// ---------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecoderArch {
    pub n: usize,
    pub fold: usize,
    pub d_model: usize,
    pub heads: usize,
    pub ff_dim: usize,
    pub dec_layers: usize,
    /// Query token count = unencoded bit count (7 / 24 / 48).
    pub queries: usize,
    /// Feature dimension of the identifier encoder output.
    pub feature_dim: usize,
    pub p_drop: f64,
}

impl DecoderArch {
    pub fn standard(n: usize, queries: usize) -> Self {
        Self {
            n,
            fold: 32,
            d_model: 384,
            heads: 8,
            ff_dim: 1536,
            dec_layers: 3,
            queries,
            feature_dim: 128,
            p_drop: 0.1,
        }
    }

    pub fn tokens(&self) -> usize {
        self.n / self.fold
    }
}

/// Decoding model: feature fusion (embedding + α·adapted identifier
/// features) feeding a decoder-only stack with one query token per bit.
pub struct HeaderDecoderModel<T> {
    pub arch: DecoderArch,
    pub params: ParamSet<T>,
    embed: EmbedMlp,
    adapter: Linear,
    adapter_ln: LayerNorm,
    alpha: ParamId,
    queries: ParamId,
    decoders: Vec<DecoderLayer>,
    final_ln: LayerNorm,
    bit_head: Linear,
}

impl<T: Scalar> HeaderDecoderModel<T> {
    pub fn init(arch: DecoderArch, seed: u64) -> Self {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let mut params = ParamSet::new();
        let embed = EmbedMlp::init(
            &mut params,
            "embed",
            2 * arch.fold,
            arch.d_model,
            arch.tokens(),
            arch.p_drop,
            &mut rng,
        );
        let adapter = Linear::init(&mut params, "adapter", arch.feature_dim, arch.d_model, &mut rng);
        let adapter_ln = LayerNorm::init(&mut params, "adapter_ln", arch.d_model);
        let alpha = params.alloc("alpha", Tensor::scalar(T::ONE));
        let queries =
            params.alloc("queries", Tensor::randn(&[arch.queries, arch.d_model], 1.0, &mut rng));
        let decoders = (0..arch.dec_layers)
            .map(|i| {
                DecoderLayer::init(
                    &mut params,
                    &format!("dec{i}"),
                    arch.d_model,
                    arch.heads,
                    arch.ff_dim,
                    &mut rng,
                )
            })
            .collect();
        let final_ln = LayerNorm::init(&mut params, "final_ln", arch.d_model);
        let bit_head = Linear::init(&mut params, "bit_head", arch.d_model, 1, &mut rng);
        Self {
            arch,
            params,
            embed,
            adapter,
            adapter_ln,
            alpha,
            queries,
            decoders,
            final_ln,
            bit_head,
        }
    }

    /// Per-bit logits (queries, 1). `features` come from the identifier's
    /// encoder on the same sub-band; no gradient flows back into the
    /// identifier (they enter as a constant input).
    pub fn logits(&self, tape: &mut Tape<T>, input: Tensor<T>, features: &Tensor<T>) -> Var {
        assert_eq!(input.rows(), self.arch.n, "N mismatch");
        assert_eq!(
            features.cols(),
            self.arch.feature_dim,
            "feature dim mismatch with adapter"
        );
        assert_eq!(features.rows(), self.arch.tokens(), "feature token count mismatch");
        let folded = fold_tokens(input, self.arch.fold);
        let x = tape.input(folded);
        let emb = self.embed.forward(tape, &self.params, x);
        let feat = tape.input(features.clone());
        let adapted = self.adapter.forward(tape, &self.params, feat);
        let adapted = tape.gelu(adapted);
        let adapted = self.adapter_ln.forward(tape, &self.params, adapted);
        let alpha = tape.param(self.alpha.0, self.params.get(self.alpha));
        let scaled = tape.scale_var(adapted, alpha);
        let fused = tape.add(emb, scaled);
        let q = tape.param(self.queries.0, self.params.get(self.queries));
        let mut h = q;
        for dec in &self.decoders {
            h = dec.forward(tape, &self.params, h, fused);
        }
        let h = self.final_ln.forward(tape, &self.params, h);
        self.bit_head.forward(tape, &self.params, h)
    }

    /// Inference: per-bit probabilities.
    pub fn decode_bits(
        &self,
        x_bb: &ComplexSignal,
        features: &Tensor<T>,
    ) -> Result<Vec<f64>, InspectError> {
        if x_bb.len() != self.arch.n {
            return Err(InspectError::ShapeMismatch(format!(
                "input length {} vs trained {}",
                x_bb.len(),
                self.arch.n
            )));
        }
        let input = preprocess_subband::<T>(x_bb);
        let mut tape = Tape::new(0, false);
        let logits = self.logits(&mut tape, input, features);
        let probs_var = tape.sigmoid(logits);
        Ok(tape.value(probs_var).data.iter().map(|v| v.to_f64()).collect())
    }

    pub fn save(&self, path: &std::path::Path) -> Result<(), InspectError> {
        let arch = serde_json::to_string(&DecoderStamp { kind: "decoder", arch: &self.arch })
            .expect("arch serializes");
        save_params(path, &arch, &self.params, false)?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self, InspectError> {
        let file = load_params::<T>(path)?;
        let stamp: DecoderStampOwned =
            serde_json::from_str(&file.arch).map_err(|e| InspectError::WrongArch {
                expected: "decoder",
                detail: e.to_string(),
            })?;
        if stamp.kind != "decoder" {
            return Err(InspectError::WrongArch { expected: "decoder", detail: stamp.kind });
        }
        let mut model = Self::init(stamp.arch, 0);
        if model.params.names != file.params.names {
            return Err(InspectError::WrongArch {
                expected: "decoder",
                detail: "parameter names differ".into(),
            });
        }
        model.params = file.params;
        Ok(model)
    }
}

#[derive(Serialize)]
struct DecoderStamp<'a> {
    kind: &'static str,
    arch: &'a DecoderArch,
}

#[derive(Deserialize)]
struct DecoderStampOwned {
    kind: String,
    arch: DecoderArch,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coset::{coset_sample, CosetPattern};
    use crate::scene::{compose_scene, ScenarioSpec};

    fn sample_frame() -> (ScenarioSpec, CosetSampleSet) {
        let spec = ScenarioSpec::default();
        let frame = compose_scene(&spec, 77).unwrap();
        let pattern = CosetPattern::low_coherence(40, 8, &spec.carrier_universe());
        (spec.clone(), coset_sample(&frame.nyquist, &pattern).unwrap())
    }

    #[test]
    fn untrained_sensor_outputs_probabilities() {
        let (_, y) = sample_frame();
        let model: SpectrumSensorModel<f32> =
            SpectrumSensorModel::init(SensorArch::standard(8, 40, 2400), 1);
        let est = model.sense(&y).unwrap();
        assert_eq!(est.probs.len(), 40);
        assert!(est.probs.iter().all(|&p| p > 0.0 && p < 1.0 && p.is_finite()));
        // Deterministic inference.
        let est2 = model.sense(&y).unwrap();
        assert_eq!(est.probs, est2.probs);
    }

    #[test]
    fn sensor_shape_mismatch_rejected() {
        let (_, y) = sample_frame();
        let model: SpectrumSensorModel<f32> =
            SpectrumSensorModel::init(SensorArch::standard(5, 40, 2400), 1);
        assert!(matches!(model.sense(&y), Err(InspectError::ShapeMismatch(_))));
    }

    #[test]
    fn identifier_distribution_and_feature_shape() {
        let x_bb = ComplexSignal {
            samples: (0..2400)
                .map(|i| num_complex::Complex64::new((i as f64 * 0.01).sin(), 0.3))
                .collect(),
            rate_hz: 50e6,
        };
        let model: ProtocolIdentifierModel<f32> =
            ProtocolIdentifierModel::init(IdentifierArch::standard(2400), 2);
        let (probs, features) = model.identify(&x_bb).unwrap();
        assert_eq!(probs.len(), 4);
        let sum: f64 = probs.iter().sum();
        assert!((sum - 1.0).abs() < 1e-6, "probabilities sum to {sum}");
        // Sequence length 75 at F = 32, d_model 128.
        assert_eq!(features.shape, vec![75, 128]);
    }

    #[test]
    fn decoder_bit_counts_and_alpha_ablation() {
        let x_bb = ComplexSignal {
            samples: (0..2400)
                .map(|i| num_complex::Complex64::new((i as f64 * 0.02).cos(), -0.1))
                .collect(),
            rate_hz: 50e6,
        };
        let ident: ProtocolIdentifierModel<f32> =
            ProtocolIdentifierModel::init(IdentifierArch::standard(2400), 3);
        let (_, features) = ident.identify(&x_bb).unwrap();
        for queries in [7usize, 24, 48] {
            let mut model: HeaderDecoderModel<f32> =
                HeaderDecoderModel::init(DecoderArch::standard(2400, queries), 4);
            let probs = model.decode_bits(&x_bb, &features).unwrap();
            assert_eq!(probs.len(), queries);
            assert!(probs.iter().all(|&p| p > 0.0 && p < 1.0));
            if queries == 7 {
                // α = 0 makes the output independent of the features.
                model.params.tensors[model.alpha.0].data[0] = 0.0;
                let p1 = model.decode_bits(&x_bb, &features).unwrap();
                let mut other = features.clone();
                for v in other.data.iter_mut() {
                    *v += 1.5;
                }
                let p2 = model.decode_bits(&x_bb, &other).unwrap();
                assert_eq!(p1, p2, "α = 0 must decouple the encoder features");
                // And with α = 1 the fusion is sensitive to the features.
                model.params.tensors[model.alpha.0].data[0] = 1.0;
                let p3 = model.decode_bits(&x_bb, &features).unwrap();
                let p4 = model.decode_bits(&x_bb, &other).unwrap();
                assert!(p3.iter().zip(&p4).any(|(a, b)| (a - b).abs() > 1e-9));
            }
        }
    }

    #[test]
    fn model_save_load_preserves_inference() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sensor.nnwt");
        let (_, y) = sample_frame();
        let model: SpectrumSensorModel<f32> =
            SpectrumSensorModel::init(SensorArch::standard(8, 40, 2400), 5);
        let before = model.sense(&y).unwrap();
        model.save(&path).unwrap();
        let loaded: SpectrumSensorModel<f32> = SpectrumSensorModel::load(&path).unwrap();
        let after = loaded.sense(&y).unwrap();
        assert_eq!(before.probs, after.probs);
        // Wrong-kind load is rejected.
        assert!(ProtocolIdentifierModel::<f32>::load(&path).is_err());
    }
}
