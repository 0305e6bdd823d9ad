//! Toy-scale training with the published schedules: plateau decay for the
//! spectrum sensor, linear warmup with square-root decay for the
//! identifier (1k steps) and decoder (10k steps). Checkpoints keep the
//! best validation loss.

use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::codec::Protocol;
use crate::coset::{to_measurement_domain, CosetPattern, CosetSampleSet};
use crate::inspect::{
    preprocess_subband, DecoderArch, HeaderDecoderModel, IdentifierArch, ProtocolClass,
    ProtocolIdentifierModel, SensorArch, SpectrumSensorModel,
};
use crate::nn::{smooth_binary_targets, smooth_onehot, AdamW, ParamSet, Tape, Tensor};
use crate::recovery::{algorithm1_recover, reconstruct_subband, SupportEstimate};
use crate::scene::{DatasetReader, FrameMeta};

use super::config::ExperimentConfig;
use super::csvio::CsvWriter;
use super::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrainTask {
    Sensor,
    Identifier,
    Decoder,
}

impl std::str::FromStr for TrainTask {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sensor" => Ok(TrainTask::Sensor),
            "identifier" => Ok(TrainTask::Identifier),
            "decoder" => Ok(TrainTask::Decoder),
            other => Err(format!("unknown task {other}")),
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model_path: PathBuf,
    pub curve_path: PathBuf,
    pub epochs_run: usize,
    pub best_val_loss: f64,
    pub final_fa: Option<f64>,
    pub final_md: Option<f64>,
}

enum Schedule {
    Plateau { lr: f64, factor: f64, patience: usize, floor: f64, best: f64, stale: usize },
    Warmup { base: f64, warmup: f64 },
}

impl Schedule {
    fn lr_at(&self, step: u64) -> f64 {
        match self {
            Schedule::Plateau { lr, .. } => *lr,
            Schedule::Warmup { base, warmup } => {
                let s = (step.max(1)) as f64;
                if s <= *warmup {
                    base * s / warmup
                } else {
                    base * (warmup / s).sqrt()
                }
            }
        }
    }

    fn end_epoch(&mut self, train_loss: f64) {
        if let Schedule::Plateau { lr, factor, patience, floor, best, stale } = self {
            if train_loss < *best - 1e-6 {
                *best = train_loss;
                *stale = 0;
            } else {
                *stale += 1;
                if *stale >= *patience {
                    *lr = (*lr * *factor).max(*floor);
                    *stale = 0;
                }
            }
        }
    }
}

/// Deterministic shuffled index order per epoch.
fn epoch_order(n: usize, seed: u64, epoch: usize) -> Vec<usize> {
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(
        seed ^ (epoch as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15),
    );
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    order
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Convert a stored coset record (stream-major f32 pairs) to the
/// (N, 2P) RMS-normalized input layout.
pub fn coset_record_to_input(rec: &[f32], p: usize, n: usize) -> Tensor<f32> {
    assert_eq!(rec.len(), p * n * 2);
    let mut data = vec![0f32; n * 2 * p];
    let mut power = 0.0f64;
    for pi in 0..p {
        let base = pi * n * 2;
        for ni in 0..n {
            let re = rec[base + 2 * ni];
            let im = rec[base + 2 * ni + 1];
            data[ni * 2 * p + 2 * pi] = re;
            data[ni * 2 * p + 2 * pi + 1] = im;
            power += (re as f64) * (re as f64) + (im as f64) * (im as f64);
        }
    }
    let rms = (power / (n * p) as f64).sqrt();
    if rms > 0.0 {
        let s = (1.0 / rms) as f32;
        for v in &mut data {
            *v *= s;
        }
    }
    Tensor::from_vec(&[n, 2 * p], data)
}

fn occupancy_targets(meta: &FrameMeta, l: usize) -> Tensor<f32> {
    let mut t = vec![0f32; l];
    for &b in &meta.occupancy {
        t[b] = 1.0;
    }
    Tensor::from_vec(&[1, l], t)
}

/// Sum per-sample gradients into `acc` (fixed order).
fn accumulate_grads(acc: &mut [Option<Tensor<f32>>], grads: Vec<Option<Tensor<f32>>>) {
    for (a, g) in acc.iter_mut().zip(grads) {
        if let Some(g) = g {
            match a {
                None => *a = Some(g),
                Some(t) => {
                    for (tv, gv) in t.data.iter_mut().zip(&g.data) {
                        *tv += gv;
                    }
                }
            }
        }
    }
}

/// A batch step: forward/backward each sample in parallel chunks, reduce
/// in fixed chunk order, return (mean loss, summed grads).
fn batch_grads<S: Sync>(
    samples: &[S],
    param_count: usize,
    run: impl Fn(&S, u64) -> (f64, Vec<Option<Tensor<f32>>>) + Sync,
    step_seed: u64,
) -> (f64, Vec<Option<Tensor<f32>>>) {
    let n_chunks = rayon::current_num_threads().max(1) * 2;
    let chunk = samples.len().div_ceil(n_chunks).max(1);
    let partials: Vec<(f64, Vec<Option<Tensor<f32>>>)> = samples
        .par_chunks(chunk)
        .enumerate()
        .map(|(ci, items)| {
            let mut loss = 0.0;
            let mut grads: Vec<Option<Tensor<f32>>> = vec![None; param_count];
            for (k, s) in items.iter().enumerate() {
                let sample_seed = splitmix(step_seed ^ ((ci * chunk + k) as u64));
                let (l, g) = run(s, sample_seed);
                loss += l;
                accumulate_grads(&mut grads, g);
            }
            (loss, grads)
        })
        .collect();
    let mut loss = 0.0;
    let mut grads: Vec<Option<Tensor<f32>>> = vec![None; param_count];
    for (l, g) in partials {
        loss += l;
        accumulate_grads(&mut grads, g);
    }
    (loss / samples.len() as f64, grads)
}

fn collect_param_grads(
    params: &ParamSet<f32>,
    grads: &crate::nn::Gradients<f32>,
) -> Vec<Option<Tensor<f32>>> {
    (0..params.len()).map(|i| grads.for_param(i)).collect()
}

pub fn cmd_train(
    config: &ExperimentConfig,
    task: TrainTask,
    data_dir: &Path,
    out_dir: &Path,
) -> Result<TrainOutcome, HarnessError> {
    std::fs::create_dir_all(out_dir)?;
    match task {
        TrainTask::Sensor => train_sensor(config, data_dir, out_dir),
        TrainTask::Identifier => train_identifier(config, data_dir, out_dir),
        TrainTask::Decoder => train_decoder(config, data_dir, out_dir),
    }
}

// ---------------------------------------------------------------------
// Sensor
// ---------------------------------------------------------------------

struct SensorSample {
    input: Tensor<f32>,
    targets: Tensor<f32>,
}

fn load_sensor_split(path: &Path, cap: usize) -> Result<Vec<SensorSample>, HarnessError> {
    let mut reader = DatasetReader::open(path)?;
    let p = reader.header.p;
    let n = reader.header.n;
    let l = reader.header.l;
    let count = reader.len().min(if cap == 0 { usize::MAX } else { cap });
    let mut out = Vec::with_capacity(count);
    for i in 0..count {
        let rec = reader.read_coset_f32(i)?;
        let meta = reader.meta[i].clone();
        out.push(SensorSample {
            input: coset_record_to_input(&rec, p, n),
            targets: occupancy_targets(&meta, l),
        });
    }
    Ok(out)
}

fn sensor_fa_md(model: &SpectrumSensorModel<f32>, samples: &[SensorSample]) -> (f64, f64) {
    let results: Vec<(usize, usize, usize, usize)> = samples
        .par_iter()
        .map(|s| {
            let mut tape: Tape<f32> = Tape::new(0, false);
            let logits = model.logits(&mut tape, s.input.clone());
            let probs = tape.sigmoid(logits);
            let p = tape.value(probs);
            let mut fa = 0;
            let mut md = 0;
            let mut occ = 0;
            let mut emp = 0;
            for (j, &t) in s.targets.data.iter().enumerate() {
                let pred = p.data[j] > 0.5;
                if t > 0.5 {
                    occ += 1;
                    if !pred {
                        md += 1;
                    }
                } else {
                    emp += 1;
                    if pred {
                        fa += 1;
                    }
                }
            }
            (fa, emp, md, occ)
        })
        .collect();
    let (mut fa, mut emp, mut md, mut occ) = (0usize, 0usize, 0usize, 0usize);
    for (a, b, c, d) in results {
        fa += a;
        emp += b;
        md += c;
        occ += d;
    }
    (fa as f64 / emp.max(1) as f64, md as f64 / occ.max(1) as f64)
}

fn sensor_val_loss(model: &SpectrumSensorModel<f32>, samples: &[SensorSample]) -> f64 {
    let total: f64 = samples
        .par_iter()
        .map(|s| {
            let mut tape: Tape<f32> = Tape::new(0, false);
            let logits = model.logits(&mut tape, s.input.clone());
            let loss = tape.bce_with_logits_sum(logits, &s.targets);
            tape.value(loss).item() as f64
        })
        .sum();
    total / samples.len() as f64
}

fn train_sensor(
    config: &ExperimentConfig,
    data_dir: &Path,
    out_dir: &Path,
) -> Result<TrainOutcome, HarnessError> {
    let train = load_sensor_split(&data_dir.join("train.mcds"), 0)?;
    let val = load_sensor_split(&data_dir.join("val.mcds"), 0)?;
    if train.is_empty() || val.is_empty() {
        return Err(HarnessError::MissingArtifact("train/val datasets".into()));
    }
    let p = train[0].input.cols() / 2;
    let n = train[0].input.rows();
    let l = train[0].targets.cols();
    let mut model: SpectrumSensorModel<f32> =
        SpectrumSensorModel::init(SensorArch::standard(p, l, n), config.train.model_seed);
    let mut opt = AdamW::standard(&model.params);
    // Initial learning rate 1e-3, reduced 10x after 3 stale epochs, floor 1e-6.
    let mut sched = Schedule::Plateau {
        lr: config.train.learning_rate.unwrap_or(1e-3),
        factor: 0.1,
        patience: 3,
        floor: 1e-6,
        best: f64::INFINITY,
        stale: 0,
    };

    let model_path = out_dir.join("sensor.nnwt");
    let curve_path = out_dir.join("sensor_curve.csv");
    let mut curve = CsvWriter::create(
        &curve_path,
        &["epoch", "train_loss", "val_loss", "lr", "val_fa", "val_md", "config", "seed"],
    )?;
    let cfg_hash = config.hash();

    let mut best_val = f64::INFINITY;
    let mut step: u64 = 0;
    let mut epochs_run = 0;
    let mut last_fa_md = (1.0, 1.0);
    for epoch in 0..config.train.epochs {
        let order = epoch_order(train.len(), config.seed, epoch);
        let mut train_loss_acc = 0.0;
        let mut batches = 0usize;
        for batch_idx in order.chunks(config.train.batch_size) {
            let batch: Vec<&SensorSample> = batch_idx.iter().map(|&i| &train[i]).collect();
            step += 1;
            let lr = sched.lr_at(step);
            let (loss, grads) = batch_grads(
                &batch,
                model.params.len(),
                |s, seed| {
                    let mut tape: Tape<f32> = Tape::new(seed, true);
                    let logits = model.logits(&mut tape, s.input.clone());
                    let loss = tape.bce_with_logits_sum(logits, &s.targets);
                    let l = tape.value(loss).item() as f64;
                    let g = tape.backward(loss);
                    (l, collect_param_grads(&model.params, &g))
                },
                config.seed ^ step,
            );
            if !loss.is_finite() {
                return Err(HarnessError::Diverged { epoch, step, loss });
            }
            // Batch-mean gradients (loss summed across sub-bands, averaged
            // over the batch).
            let inv = 1.0 / batch.len() as f32;
            let grads: Vec<Option<Tensor<f32>>> = grads
                .into_iter()
                .map(|g| {
                    g.map(|mut t| {
                        for v in t.data.iter_mut() {
                            *v *= inv;
                        }
                        t
                    })
                })
                .collect();
            opt.step(&mut model.params, &grads, lr)?;
            train_loss_acc += loss;
            batches += 1;
        }
        let train_loss = train_loss_acc / batches.max(1) as f64;
        let val_loss = sensor_val_loss(&model, &val);
        let (fa, md) = sensor_fa_md(&model, &val);
        last_fa_md = (fa, md);
        epochs_run = epoch + 1;
        curve.row(&[
            epoch.to_string(),
            format!("{train_loss}"),
            format!("{val_loss}"),
            format!("{}", sched.lr_at(step)),
            format!("{fa}"),
            format!("{md}"),
            cfg_hash.clone(),
            config.seed.to_string(),
        ])?;
        if val_loss < best_val {
            best_val = val_loss;
            model.save(&model_path)?;
        }
        sched.end_epoch(train_loss);
        if let Some(target) = config.train.target_fa_md {
            if fa < target && md < target {
                break;
            }
        }
    }
    curve.finish()?;
    Ok(TrainOutcome {
        model_path,
        curve_path,
        epochs_run,
        best_val_loss: best_val,
        final_fa: Some(last_fa_md.0),
        final_md: Some(last_fa_md.1),
    })
}

// ---------------------------------------------------------------------
// Sub-band sample extraction shared by identifier/decoder training
// ---------------------------------------------------------------------

pub struct SubbandSample {
    pub input: Tensor<f32>,
    pub class: ProtocolClass,
    pub header_bits: Vec<u8>,
}

/// Oracle-sensed recovery of every occupied sub-band of a stored frame,
/// labeled from its metadata.
pub fn subband_samples_of_record(
    rec: &[f32],
    meta: &FrameMeta,
    pattern: &CosetPattern,
    nyquist_rate_hz: f64,
) -> Vec<SubbandSample> {
    let p = pattern.p();
    let n = rec.len() / (2 * p);
    let mut y = Vec::with_capacity(p);
    for pi in 0..p {
        let base = pi * n * 2;
        let stream: Vec<num_complex::Complex64> = (0..n)
            .map(|ni| {
                num_complex::Complex64::new(
                    rec[base + 2 * ni] as f64,
                    rec[base + 2 * ni + 1] as f64,
                )
            })
            .collect();
        y.push(stream);
    }
    let samples = CosetSampleSet {
        y,
        pattern: pattern.clone(),
        rate_hz: nyquist_rate_hz / pattern.l as f64,
    };
    let ym = to_measurement_domain(&samples);
    let a = pattern.measurement_matrix();
    let mut occupancy = vec![false; pattern.l];
    for &b in &meta.occupancy {
        occupancy[b] = true;
    }
    let est = SupportEstimate::oracle(&occupancy);
    let Ok(rec_res) = algorithm1_recover(&ym, &a, &est, nyquist_rate_hz) else {
        return Vec::new();
    };
    let mut out = Vec::new();
    for em in &meta.emissions {
        let Ok(x_bb) = reconstruct_subband(&rec_res, em.carrier_index) else { continue };
        let class = if em.header_in_window {
            ProtocolClass::from_protocol(em.protocol)
        } else {
            ProtocolClass::NoHeader
        };
        out.push(SubbandSample {
            input: preprocess_subband::<f32>(&x_bb),
            class,
            header_bits: em.header_bits.clone(),
        });
    }
    out
}

fn load_subband_split(
    path: &Path,
    pattern: &CosetPattern,
    nyquist_rate_hz: f64,
    cap: usize,
) -> Result<Vec<SubbandSample>, HarnessError> {
    let mut reader = DatasetReader::open(path)?;
    let mut out = Vec::new();
    for i in 0..reader.len() {
        if cap > 0 && out.len() >= cap {
            break;
        }
        let rec = reader.read_coset_f32(i)?;
        let meta = reader.meta[i].clone();
        out.extend(subband_samples_of_record(&rec, &meta, pattern, nyquist_rate_hz));
    }
    if cap > 0 {
        out.truncate(cap);
    }
    Ok(out)
}

// ---------------------------------------------------------------------
// Identifier
// ---------------------------------------------------------------------

fn train_identifier(
    config: &ExperimentConfig,
    data_dir: &Path,
    out_dir: &Path,
) -> Result<TrainOutcome, HarnessError> {
    let pattern = read_pattern(data_dir)?;
    let cap = config.train.max_samples_per_epoch;
    let nyq = config.scenario.nyquist_rate_hz;
    let train = load_subband_split(&data_dir.join("train.mcds"), &pattern, nyq, cap)?;
    let val_cap = if cap == 0 { 0 } else { (cap / 4).max(200) };
    let val = load_subband_split(&data_dir.join("val.mcds"), &pattern, nyq, val_cap)?;
    if train.is_empty() || val.is_empty() {
        return Err(HarnessError::MissingArtifact("train/val datasets".into()));
    }
    let n = train[0].input.rows();
    let mut model: ProtocolIdentifierModel<f32> =
        ProtocolIdentifierModel::init(IdentifierArch::standard(n), config.train.model_seed);
    let mut opt = AdamW::standard(&model.params);
    // 2e-3 with 1k-step linear warmup, then inverse-square-root decay.
    let sched =
        Schedule::Warmup { base: config.train.learning_rate.unwrap_or(2e-3), warmup: 1000.0 };

    let model_path = out_dir.join("identifier.nnwt");
    let curve_path = out_dir.join("identifier_curve.csv");
    let mut curve = CsvWriter::create(
        &curve_path,
        &["epoch", "train_loss", "val_loss", "val_acc", "lr", "config", "seed"],
    )?;
    let cfg_hash = config.hash();
    let mut best_val = f64::INFINITY;
    let mut step = 0u64;
    let mut epochs_run = 0;
    for epoch in 0..config.train.epochs {
        let order = epoch_order(train.len(), config.seed ^ 0x1d, epoch);
        let mut loss_acc = 0.0;
        let mut batches = 0usize;
        for batch_idx in order.chunks(config.train.batch_size) {
            let batch: Vec<&SubbandSample> = batch_idx.iter().map(|&i| &train[i]).collect();
            step += 1;
            let lr = sched.lr_at(step);
            let (loss, grads) = batch_grads(
                &batch,
                model.params.len(),
                |s, seed| {
                    let mut tape: Tape<f32> = Tape::new(seed, true);
                    let (logits, _) = model.logits(&mut tape, s.input.clone());
                    let target = smooth_onehot::<f32>(s.class.index(), 4, 0.1);
                    let loss = tape.ce_with_logits_sum(logits, &target);
                    let l = tape.value(loss).item() as f64;
                    let g = tape.backward(loss);
                    (l, collect_param_grads(&model.params, &g))
                },
                config.seed ^ step ^ 0xabcd,
            );
            if !loss.is_finite() {
                return Err(HarnessError::Diverged { epoch, step, loss });
            }
            let inv = 1.0 / batch.len() as f32;
            let grads: Vec<Option<Tensor<f32>>> = grads
                .into_iter()
                .map(|g| {
                    g.map(|mut t| {
                        for v in t.data.iter_mut() {
                            *v *= inv;
                        }
                        t
                    })
                })
                .collect();
            opt.step(&mut model.params, &grads, lr)?;
            loss_acc += loss;
            batches += 1;
        }
        // Validation loss and accuracy.
        let stats: Vec<(f64, bool)> = val
            .par_iter()
            .map(|s| {
                let mut tape: Tape<f32> = Tape::new(0, false);
                let (logits, _) = model.logits(&mut tape, s.input.clone());
                let target = smooth_onehot::<f32>(s.class.index(), 4, 0.1);
                let loss = tape.ce_with_logits_sum(logits, &target);
                let lv = tape.value(logits);
                let pred = (0..4)
                    .max_by(|&a, &b| lv.data[a].partial_cmp(&lv.data[b]).unwrap())
                    .unwrap();
                (tape.value(loss).item() as f64, pred == s.class.index())
            })
            .collect();
        let val_loss = stats.iter().map(|s| s.0).sum::<f64>() / stats.len() as f64;
        let val_acc = stats.iter().filter(|s| s.1).count() as f64 / stats.len() as f64;
        let train_loss = loss_acc / batches.max(1) as f64;
        epochs_run = epoch + 1;
        curve.row(&[
            epoch.to_string(),
            format!("{train_loss}"),
            format!("{val_loss}"),
            format!("{val_acc}"),
            format!("{}", sched.lr_at(step)),
            cfg_hash.clone(),
            config.seed.to_string(),
        ])?;
        if val_loss < best_val {
            best_val = val_loss;
            model.save(&model_path)?;
        }
    }
    curve.finish()?;
    Ok(TrainOutcome {
        model_path,
        curve_path,
        epochs_run,
        best_val_loss: best_val,
        final_fa: None,
        final_md: None,
    })
}

// ---------------------------------------------------------------------
// Decoder
// ---------------------------------------------------------------------

fn train_decoder(
    config: &ExperimentConfig,
    data_dir: &Path,
    out_dir: &Path,
) -> Result<TrainOutcome, HarnessError> {
    let protocol = match config.train.decoder_protocol.as_deref() {
        Some("dvbs2") => Protocol::DvbS2,
        Some("wifi_nonht") => Protocol::WifiNonHt,
        Some("wifi_ht") => Protocol::WifiHt,
        other => {
            return Err(HarnessError::Config(format!(
                "decoder training needs decoder_protocol, got {other:?}"
            )))
        }
    };
    let ident_path = config
        .train
        .identifier_model
        .as_ref()
        .ok_or_else(|| HarnessError::Config("decoder training needs identifier_model".into()))?;
    let identifier: ProtocolIdentifierModel<f32> =
        ProtocolIdentifierModel::load(Path::new(ident_path))?;

    let pattern = read_pattern(data_dir)?;
    let cap = config.train.max_samples_per_epoch;
    let nyq = config.scenario.nyquist_rate_hz;
    let class = ProtocolClass::from_protocol(protocol);
    let filter = |v: Vec<SubbandSample>| -> Vec<SubbandSample> {
        v.into_iter().filter(|s| s.class == class).collect()
    };
    let train = filter(load_subband_split(&data_dir.join("train.mcds"), &pattern, nyq, cap)?);
    let val_cap = if cap == 0 { 0 } else { (cap / 4).max(100) };
    let val = filter(load_subband_split(&data_dir.join("val.mcds"), &pattern, nyq, val_cap)?);
    if train.is_empty() || val.is_empty() {
        return Err(HarnessError::MissingArtifact(
            "no matching sub-band samples for decoder training".into(),
        ));
    }
    let n = train[0].input.rows();
    let queries = protocol.header_bits();
    let mut model: HeaderDecoderModel<f32> =
        HeaderDecoderModel::init(DecoderArch::standard(n, queries), config.train.model_seed);
    let mut opt = AdamW::standard(&model.params);
    // 6.25e-4 with 10k-step warmup then inverse-square-root decay.
    let sched = Schedule::Warmup {
        base: config.train.learning_rate.unwrap_or(6.25e-4),
        warmup: 10_000.0,
    };

    // Identifier features are inputs here: the loss never backpropagates
    // into the identifier.
    let features_of = |s: &SubbandSample| -> Tensor<f32> {
        let mut tape: Tape<f32> = Tape::new(0, false);
        let (_, feats) = model_features(&identifier, &mut tape, &s.input);
        feats
    };

    let model_path = out_dir.join(format!(
        "decoder_{}.nnwt",
        config.train.decoder_protocol.as_deref().unwrap_or("x")
    ));
    let curve_path = out_dir.join("decoder_curve.csv");
    let mut curve = CsvWriter::create(
        &curve_path,
        &["epoch", "train_loss", "val_loss", "val_bit_acc", "lr", "config", "seed"],
    )?;
    let cfg_hash = config.hash();
    let mut best_val = f64::INFINITY;
    let mut step = 0u64;
    let mut epochs_run = 0;
    for epoch in 0..config.train.epochs {
        let order = epoch_order(train.len(), config.seed ^ 0x2e, epoch);
        let mut loss_acc = 0.0;
        let mut batches = 0usize;
        for batch_idx in order.chunks(config.train.batch_size) {
            let batch: Vec<&SubbandSample> = batch_idx.iter().map(|&i| &train[i]).collect();
            step += 1;
            let lr = sched.lr_at(step);
            let (loss, grads) = batch_grads(
                &batch,
                model.params.len(),
                |s, seed| {
                    let feats = features_of(s);
                    let mut tape: Tape<f32> = Tape::new(seed, true);
                    let logits = model.logits(&mut tape, s.input.clone(), &feats);
                    let targets = smooth_binary_targets::<f32>(&s.header_bits, 0.1);
                    let loss = tape.bce_with_logits_sum(logits, &targets);
                    let l = tape.value(loss).item() as f64 / queries as f64;
                    let g = tape.backward(loss);
                    (l, collect_param_grads(&model.params, &g))
                },
                config.seed ^ step ^ 0x77,
            );
            if !loss.is_finite() {
                return Err(HarnessError::Diverged { epoch, step, loss });
            }
            // Averaged over all bits in the batch.
            let inv = 1.0 / (batch.len() * queries) as f32;
            let grads: Vec<Option<Tensor<f32>>> = grads
                .into_iter()
                .map(|g| {
                    g.map(|mut t| {
                        for v in t.data.iter_mut() {
                            *v *= inv;
                        }
                        t
                    })
                })
                .collect();
            opt.step(&mut model.params, &grads, lr)?;
            loss_acc += loss;
            batches += 1;
        }
        let stats: Vec<(f64, usize, usize)> = val
            .par_iter()
            .map(|s| {
                let feats = features_of(s);
                let mut tape: Tape<f32> = Tape::new(0, false);
                let logits = model.logits(&mut tape, s.input.clone(), &feats);
                let targets = smooth_binary_targets::<f32>(&s.header_bits, 0.1);
                let loss_var = tape.bce_with_logits_sum(logits, &targets);
                let loss = tape.value(loss_var).item() as f64;
                let lv = tape.value(logits);
                let correct = s
                    .header_bits
                    .iter()
                    .enumerate()
                    .filter(|(i, &b)| (lv.data[*i] > 0.0) == (b == 1))
                    .count();
                (loss, correct, s.header_bits.len())
            })
            .collect();
        let val_loss =
            stats.iter().map(|s| s.0).sum::<f64>() / (stats.len() * queries) as f64;
        let bits_ok: usize = stats.iter().map(|s| s.1).sum();
        let bits_all: usize = stats.iter().map(|s| s.2).sum();
        let val_acc = bits_ok as f64 / bits_all.max(1) as f64;
        let train_loss = loss_acc / batches.max(1) as f64;
        epochs_run = epoch + 1;
        curve.row(&[
            epoch.to_string(),
            format!("{train_loss}"),
            format!("{val_loss}"),
            format!("{val_acc}"),
            format!("{}", sched.lr_at(step)),
            cfg_hash.clone(),
            config.seed.to_string(),
        ])?;
        if val_loss < best_val {
            best_val = val_loss;
            model.save(&model_path)?;
        }
    }
    curve.finish()?;
    Ok(TrainOutcome {
        model_path,
        curve_path,
        epochs_run,
        best_val_loss: best_val,
        final_fa: None,
        final_md: None,
    })
}

fn model_features(
    identifier: &ProtocolIdentifierModel<f32>,
    tape: &mut Tape<f32>,
    input: &Tensor<f32>,
) -> (crate::nn::Var, Tensor<f32>) {
    let (logits, feats) = identifier.logits(tape, input.clone());
    let f = tape.value(feats).clone();
    (logits, f)
}

pub fn read_pattern(data_dir: &Path) -> Result<CosetPattern, HarnessError> {
    let text = std::fs::read_to_string(data_dir.join("pattern.txt"))
        .map_err(|_| HarnessError::MissingArtifact("pattern.txt".into()))?;
    Ok(CosetPattern::from_text(text.trim())?)
}
