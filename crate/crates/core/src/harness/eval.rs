//! Desk-scale evaluations mirroring the experiment families: sensing
//! FA/MD vs SNR and ROC over the threshold sweep, recovery MSE across the
//! sampling-ratio grid, protocol-identification confusion matrices, and
//! header-decoding accuracy with field-error CDFs. Every row carries the
//! config hash and seed. Evaluation never mutates models or datasets.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;

use crate::codec::{decode_dvbs2_header, decode_wifi_header, DecodedHeader, DvbS2Profile,
    Protocol, WifiProfile};
use crate::coset::{coset_sample, ground_truth_spectrum, sampling_ratio, to_measurement_domain};
use crate::inspect::{identify_protocol_rules, ProtocolClass, RuleThresholds, SpectrumSensorModel};
use crate::recovery::{
    algorithm1_recover, reconstruct_subband, recovery_mse, somp, SupportEstimate,
};
use crate::scene::{compose_scene, MultibandFrame, ScenarioSpec};

use super::config::{ExperimentConfig, Split};
use super::csvio::CsvWriter;
use super::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalTask {
    Sensing,
    Recovery,
    Identify,
    Decode,
}

impl std::str::FromStr for EvalTask {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sensing" => Ok(EvalTask::Sensing),
            "recovery" => Ok(EvalTask::Recovery),
            "identify" => Ok(EvalTask::Identify),
            "decode" => Ok(EvalTask::Decode),
            other => Err(format!("unknown eval task {other}")),
        }
    }
}

pub struct EvalOutcome {
    pub files: Vec<PathBuf>,
}

pub fn cmd_eval(
    config: &ExperimentConfig,
    task: EvalTask,
    model_path: Option<&Path>,
    out_dir: &Path,
) -> Result<EvalOutcome, HarnessError> {
    std::fs::create_dir_all(out_dir)?;
    match task {
        EvalTask::Sensing => eval_sensing(config, model_path, out_dir),
        EvalTask::Recovery => eval_recovery(config, out_dir),
        EvalTask::Identify => eval_identify(config, out_dir),
        EvalTask::Decode => eval_decode(config, out_dir),
    }
}

fn eval_frames(config: &ExperimentConfig, scenario: &ScenarioSpec, count: usize) -> Vec<MultibandFrame> {
    (0..count)
        .into_par_iter()
        .map(|i| {
            compose_scene(scenario, config.split_seed(Split::Eval, i as u64))
                .expect("validated spec")
        })
        .collect()
}

/// FA/MD of a support estimate against ground truth occupancy at a given
/// threshold.
fn fa_md_at(probs: &[f64], occupancy: &[bool], theta: f64) -> (usize, usize, usize, usize) {
    let mut fa = 0;
    let mut emp = 0;
    let mut md = 0;
    let mut occ = 0;
    for (p, &o) in probs.iter().zip(occupancy) {
        let pred = *p > theta;
        if o {
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
}

fn eval_sensing(
    config: &ExperimentConfig,
    model_path: Option<&Path>,
    out_dir: &Path,
) -> Result<EvalOutcome, HarnessError> {
    let model_path =
        model_path.ok_or_else(|| HarnessError::MissingArtifact("sensor model".into()))?;
    let model: SpectrumSensorModel<f32> = SpectrumSensorModel::load(model_path)?;
    let pattern = config.pattern.build(&config.scenario);
    let cfg_hash = config.hash();

    // FA/MD per SNR at θ = 0.5.
    let famd_path = out_dir.join("sensing_fa_md.csv");
    let mut famd = CsvWriter::create(
        &famd_path,
        &["snr_db", "fa", "md", "frames", "config", "seed"],
    )?;
    for &snr in &config.eval.snr_grid_db {
        let scenario =
            ScenarioSpec { snr_range_db: Some((snr, snr)), ..config.scenario.clone() };
        let frames = eval_frames(config, &scenario, config.eval.frames);
        let counts: Vec<(usize, usize, usize, usize)> = frames
            .par_iter()
            .map(|f| {
                let y = coset_sample(&f.nyquist, &pattern).unwrap();
                let est = model.sense(&y).unwrap();
                fa_md_at(&est.probs, &f.occupancy, 0.5)
            })
            .collect();
        let (mut fa, mut emp, mut md, mut occ) = (0, 0, 0, 0);
        for (a, b, c, d) in counts {
            fa += a;
            emp += b;
            md += c;
            occ += d;
        }
        famd.row(&[
            format!("{snr}"),
            format!("{}", fa as f64 / emp.max(1) as f64),
            format!("{}", md as f64 / occ.max(1) as f64),
            config.eval.frames.to_string(),
            cfg_hash.clone(),
            config.seed.to_string(),
        ])?;
    }
    famd.finish()?;

    // ROC via θ sweep at the top SNR of the grid.
    let snr = config.eval.snr_grid_db.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let scenario = ScenarioSpec { snr_range_db: Some((snr, snr)), ..config.scenario.clone() };
    let frames = eval_frames(config, &scenario, config.eval.frames);
    let probs: Vec<(Vec<f64>, Vec<bool>)> = frames
        .par_iter()
        .map(|f| {
            let y = coset_sample(&f.nyquist, &pattern).unwrap();
            let est = model.sense(&y).unwrap();
            (est.probs, f.occupancy.clone())
        })
        .collect();
    let roc_path = out_dir.join("sensing_roc.csv");
    let mut roc = CsvWriter::create(
        &roc_path,
        &["theta", "fa", "md", "snr_db", "config", "seed"],
    )?;
    let mut points = Vec::new();
    for t in 0..config.eval.theta_points {
        let theta = (t as f64 + 1.0) / (config.eval.theta_points as f64 + 1.0);
        let (mut fa, mut emp, mut md, mut occ) = (0usize, 0usize, 0usize, 0usize);
        for (p, o) in &probs {
            let (a, b, c, d) = fa_md_at(p, o, theta);
            fa += a;
            emp += b;
            md += c;
            occ += d;
        }
        let fa_rate = fa as f64 / emp.max(1) as f64;
        let md_rate = md as f64 / occ.max(1) as f64;
        points.push((theta, fa_rate, md_rate));
        roc.row(&[
            format!("{theta}"),
            format!("{fa_rate}"),
            format!("{md_rate}"),
            format!("{snr}"),
            cfg_hash.clone(),
            config.seed.to_string(),
        ])?;
    }
    roc.finish()?;
    Ok(EvalOutcome { files: vec![famd_path, roc_path] })
}

/// Trapezoidal AUC of the detection-vs-false-alarm curve implied by ROC
/// sweep points (plus the (0,0)/(1,1) endpoints).
pub fn roc_auc(points: &[(f64, f64, f64)]) -> f64 {
    // points: (theta, fa, md) → curve of (fa, 1 - md).
    let mut curve: Vec<(f64, f64)> = points.iter().map(|&(_, fa, md)| (fa, 1.0 - md)).collect();
    curve.push((0.0, 0.0));
    curve.push((1.0, 1.0));
    curve.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut auc = 0.0;
    for w in curve.windows(2) {
        auc += (w[1].0 - w[0].0) * 0.5 * (w[0].1 + w[1].1);
    }
    auc
}

/// Sweep a trained (or untrained) sensor over frames and return ROC points.
pub fn sensing_roc_points(
    model: &SpectrumSensorModel<f32>,
    frames: &[MultibandFrame],
    pattern: &crate::coset::CosetPattern,
    theta_points: usize,
) -> Vec<(f64, f64, f64)> {
    let probs: Vec<(Vec<f64>, Vec<bool>)> = frames
        .par_iter()
        .map(|f| {
            let y = coset_sample(&f.nyquist, pattern).unwrap();
            let est = model.sense(&y).unwrap();
            (est.probs, f.occupancy.clone())
        })
        .collect();
    (0..theta_points)
        .map(|t| {
            let theta = (t as f64 + 1.0) / (theta_points as f64 + 1.0);
            let (mut fa, mut emp, mut md, mut occ) = (0usize, 0usize, 0usize, 0usize);
            for (p, o) in &probs {
                let (a, b, c, d) = fa_md_at(p, o, theta);
                fa += a;
                emp += b;
                md += c;
                occ += d;
            }
            (theta, fa as f64 / emp.max(1) as f64, md as f64 / occ.max(1) as f64)
        })
        .collect()
}

fn eval_recovery(config: &ExperimentConfig, out_dir: &Path) -> Result<EvalOutcome, HarnessError> {
    let cfg_hash = config.hash();
    let path = out_dir.join("recovery_mse.csv");
    let mut csv = CsvWriter::create(
        &path,
        &[
            "p",
            "r",
            "r_subband_width",
            "mean_mse",
            "mean_reference_mse",
            "gap_db",
            "failed_frames",
            "mean_cond",
            "somp_exact_rate",
            "frames",
            "config",
            "seed",
        ],
    )?;
    let scenario = ScenarioSpec {
        snr_range_db: Some((10.0, 10.0)),
        ..config.scenario.clone()
    };
    let frames = eval_frames(config, &scenario, config.eval.frames);
    let clean_frames: Vec<MultibandFrame> = (0..config.eval.frames)
        .into_par_iter()
        .map(|i| {
            compose_scene(
                &ScenarioSpec { snr_range_db: None, ..scenario.clone() },
                config.split_seed(Split::Eval, i as u64),
            )
            .unwrap()
        })
        .collect();
    for &p in &config.eval.p_grid {
        let pattern = config.pattern.build_p(&config.scenario, p);
        let a = pattern.measurement_matrix();
        let sigma = config.scenario.landau_sum_hz();
        let r = sampling_ratio(&pattern, config.scenario.nyquist_rate_hz, sigma)?;
        let r_alt = sampling_ratio(
            &pattern,
            config.scenario.nyquist_rate_hz,
            config.scenario.num_emissions as f64 * config.scenario.grid().width_hz(),
        )?;
        let stats: Vec<(Option<(f64, f64, f64)>, bool)> = frames
            .par_iter()
            .zip(&clean_frames)
            .map(|(frame, clean)| {
                let y = coset_sample(&frame.nyquist, &pattern).unwrap();
                let ym = to_measurement_domain(&y);
                let est = SupportEstimate::oracle(&frame.occupancy);
                let truth = ground_truth_spectrum(&frame.nyquist, pattern.l).unwrap();
                let clean_truth = ground_truth_spectrum(&clean.nyquist, pattern.l).unwrap();
                let rec = algorithm1_recover(&ym, &a, &est, frame.nyquist.rate_hz);
                let mse = rec.as_ref().ok().map(|rr| {
                    let m = recovery_mse(rr, &truth, &clean_truth);
                    (m.mse_rel, m.reference_mse, rr.cond_a_s)
                });
                // SOMP baseline support-recovery success.
                let k = frame.occupied_subbands().len().min(pattern.p());
                let somp_exact = if k > 0 {
                    let mut s = somp(&ym, &a, k);
                    s.sort_unstable();
                    s == frame.occupied_subbands()
                } else {
                    false
                };
                (mse, somp_exact)
            })
            .collect();
        let ok: Vec<&(f64, f64, f64)> =
            stats.iter().filter_map(|(m, _)| m.as_ref()).collect();
        let failed = stats.len() - ok.len();
        let mean_mse = ok.iter().map(|m| m.0).sum::<f64>() / ok.len().max(1) as f64;
        let mean_ref = ok.iter().map(|m| m.1).sum::<f64>() / ok.len().max(1) as f64;
        let mean_cond = ok.iter().map(|m| m.2).sum::<f64>() / ok.len().max(1) as f64;
        let gap_db = if ok.is_empty() || mean_ref <= 0.0 {
            f64::NAN
        } else {
            10.0 * (mean_mse / mean_ref).log10()
        };
        let somp_rate =
            stats.iter().filter(|(_, s)| *s).count() as f64 / stats.len() as f64;
        csv.row(&[
            p.to_string(),
            format!("{r}"),
            format!("{r_alt}"),
            format!("{mean_mse}"),
            format!("{mean_ref}"),
            format!("{gap_db}"),
            failed.to_string(),
            format!("{mean_cond}"),
            format!("{somp_rate}"),
            frames.len().to_string(),
            cfg_hash.clone(),
            config.seed.to_string(),
        ])?;
    }
    csv.finish()?;
    Ok(EvalOutcome { files: vec![path] })
}

/// Oracle-sensed sub-band recovery of one frame, yielding per-emission
/// basebands with their labels.
pub fn recovered_subbands(
    frame: &MultibandFrame,
    pattern: &crate::coset::CosetPattern,
) -> Vec<(crate::dsp::ComplexSignal, ProtocolClass, Vec<u8>, usize)> {
    let y = coset_sample(&frame.nyquist, pattern).unwrap();
    let ym = to_measurement_domain(&y);
    let a = pattern.measurement_matrix();
    let est = SupportEstimate::oracle(&frame.occupancy);
    let Ok(rec) = algorithm1_recover(&ym, &a, &est, frame.nyquist.rate_hz) else {
        return Vec::new();
    };
    frame
        .emissions
        .iter()
        .filter_map(|em| {
            let x_bb = reconstruct_subband(&rec, em.carrier_index).ok()?;
            let class = if em.header_in_window {
                ProtocolClass::from_protocol(em.protocol)
            } else {
                ProtocolClass::NoHeader
            };
            Some((x_bb, class, em.header_bits.clone(), em.carrier_index))
        })
        .collect()
}

fn eval_identify(config: &ExperimentConfig, out_dir: &Path) -> Result<EvalOutcome, HarnessError> {
    let cfg_hash = config.hash();
    let scenario = ScenarioSpec {
        snr_range_db: Some((10.0, 10.0)),
        // Mix in headerless emissions for the no-header row.
        header_in_window_prob: 0.75,
        ..config.scenario.clone()
    };
    let frames = eval_frames(config, &scenario, config.eval.frames);
    let pattern = config.pattern.build(&config.scenario);
    let th = RuleThresholds::default();
    let pairs: Vec<(usize, usize)> = frames
        .par_iter()
        .flat_map_iter(|frame| {
            recovered_subbands(frame, &pattern)
                .into_iter()
                .map(|(x_bb, class, _, _)| {
                    let id = identify_protocol_rules(&x_bb, &th);
                    (class.index(), id.class.index())
                })
                .collect::<Vec<_>>()
        })
        .collect();
    let mut confusion = [[0usize; 4]; 4];
    for (t, p) in pairs {
        confusion[t][p] += 1;
    }
    let path = out_dir.join("identify_confusion.csv");
    let mut csv = CsvWriter::create(
        &path,
        &[
            "truth",
            "pred_dvbs2",
            "pred_wifi_nonht",
            "pred_wifi_ht",
            "pred_no_header",
            "engine",
            "config",
            "seed",
        ],
    )?;
    for (t, row) in confusion.iter().enumerate() {
        let name = format!("{:?}", ProtocolClass::from_index(t));
        csv.row(&[
            name,
            row[0].to_string(),
            row[1].to_string(),
            row[2].to_string(),
            row[3].to_string(),
            "rules".into(),
            cfg_hash.clone(),
            config.seed.to_string(),
        ])?;
    }
    csv.finish()?;
    Ok(EvalOutcome { files: vec![path] })
}

fn eval_decode(config: &ExperimentConfig, out_dir: &Path) -> Result<EvalOutcome, HarnessError> {
    let cfg_hash = config.hash();
    let scenario = ScenarioSpec {
        snr_range_db: Some((10.0, 10.0)),
        ..config.scenario.clone()
    };
    let frames = eval_frames(config, &scenario, config.eval.frames);
    let pattern = config.pattern.build(&config.scenario);
    let th = RuleThresholds::default();

    struct DecodeStat {
        protocol: Protocol,
        bits_ok: usize,
        bits_all: usize,
        mcs_ok: bool,
        aux_field_ok: bool,
        length_err: Option<f64>,
        decode_seconds: f64,
    }

    let stats: Vec<DecodeStat> = frames
        .par_iter()
        .flat_map_iter(|frame| {
            let mut out = Vec::new();
            for (x_bb, class, bits, _) in recovered_subbands(frame, &pattern) {
                if class == ProtocolClass::NoHeader {
                    continue;
                }
                let t0 = Instant::now();
                let id = identify_protocol_rules(&x_bb, &th);
                let decoded: Option<DecodedHeader> = match id.class {
                    ProtocolClass::DvbS2 => {
                        decode_dvbs2_header(&x_bb, &DvbS2Profile::default_profile())
                            .ok()
                            .map(|r| r.header)
                    }
                    ProtocolClass::WifiNonHt => {
                        decode_wifi_header(&x_bb, &WifiProfile::non_ht()).ok().map(|r| r.header)
                    }
                    ProtocolClass::WifiHt => {
                        decode_wifi_header(&x_bb, &WifiProfile::ht()).ok().map(|r| r.header)
                    }
                    ProtocolClass::NoHeader => None,
                };
                let elapsed = t0.elapsed().as_secs_f64();
                let protocol = match class {
                    ProtocolClass::DvbS2 => Protocol::DvbS2,
                    ProtocolClass::WifiNonHt => Protocol::WifiNonHt,
                    ProtocolClass::WifiHt => Protocol::WifiHt,
                    ProtocolClass::NoHeader => unreachable!(),
                };
                let mut stat = DecodeStat {
                    protocol,
                    bits_ok: 0,
                    bits_all: bits.len(),
                    mcs_ok: false,
                    aux_field_ok: false,
                    length_err: None,
                    decode_seconds: elapsed,
                };
                if let Some(h) = decoded {
                    let got = HeaderBits(h).bits();
                    stat.bits_ok =
                        bits.iter().zip(&got).filter(|(a, b)| a == b).count();
                    match protocol {
                        Protocol::DvbS2 => {
                            stat.mcs_ok = bits[0..5] == got[0..5];
                            stat.aux_field_ok = bits[5] == got[5] && bits[6] == got[6];
                        }
                        Protocol::WifiNonHt => {
                            stat.mcs_ok = bits[0..4] == got[0..4];
                            let truth_len = field_u16(&bits[5..17]);
                            let got_len = field_u16(&got[5..17]);
                            stat.length_err =
                                Some((truth_len as f64 - got_len as f64).abs());
                            stat.aux_field_ok = truth_len == got_len;
                        }
                        Protocol::WifiHt => {
                            stat.mcs_ok = bits[24..31] == got[24..31];
                            let truth_len = field_u16(&bits[32..48]);
                            let got_len = field_u16(&got[32..48]);
                            stat.length_err =
                                Some((truth_len as f64 - got_len as f64).abs());
                            stat.aux_field_ok = bits[31] == got[31];
                        }
                    }
                }
                out.push(stat);
            }
            out
        })
        .collect();

    let acc_path = out_dir.join("decode_accuracy.csv");
    let mut csv = CsvWriter::create(
        &acc_path,
        &[
            "protocol",
            "headers",
            "avg_bit_acc",
            "mcs_acc",
            "aux_field_acc",
            "mean_length_err",
            "p95_length_err",
            "mean_decode_ms",
            "engine",
            "config",
            "seed",
        ],
    )?;
    for protocol in [Protocol::DvbS2, Protocol::WifiNonHt, Protocol::WifiHt] {
        let of: Vec<&DecodeStat> = stats.iter().filter(|s| s.protocol == protocol).collect();
        if of.is_empty() {
            continue;
        }
        let bits_ok: usize = of.iter().map(|s| s.bits_ok).sum();
        let bits_all: usize = of.iter().map(|s| s.bits_all).sum();
        let mut lens: Vec<f64> = of.iter().filter_map(|s| s.length_err).collect();
        lens.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let p95 = if lens.is_empty() {
            f64::NAN
        } else {
            lens[((lens.len() as f64 * 0.95) as usize).min(lens.len() - 1)]
        };
        let mean_len = if lens.is_empty() {
            f64::NAN
        } else {
            lens.iter().sum::<f64>() / lens.len() as f64
        };
        csv.row(&[
            format!("{protocol:?}"),
            of.len().to_string(),
            format!("{}", bits_ok as f64 / bits_all.max(1) as f64),
            format!("{}", of.iter().filter(|s| s.mcs_ok).count() as f64 / of.len() as f64),
            format!(
                "{}",
                of.iter().filter(|s| s.aux_field_ok).count() as f64 / of.len() as f64
            ),
            format!("{mean_len}"),
            format!("{p95}"),
            format!(
                "{}",
                of.iter().map(|s| s.decode_seconds).sum::<f64>() / of.len() as f64 * 1e3
            ),
            "rules".into(),
            cfg_hash.clone(),
            config.seed.to_string(),
        ])?;
    }
    csv.finish()?;

    // Length-error CDF points.
    let cdf_path = out_dir.join("decode_length_cdf.csv");
    let mut cdf = CsvWriter::create(
        &cdf_path,
        &["protocol", "length_err", "cdf", "config", "seed"],
    )?;
    for protocol in [Protocol::WifiNonHt, Protocol::WifiHt] {
        let mut lens: Vec<f64> = stats
            .iter()
            .filter(|s| s.protocol == protocol)
            .filter_map(|s| s.length_err)
            .collect();
        lens.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let n = lens.len();
        for (i, l) in lens.iter().enumerate() {
            cdf.row(&[
                format!("{protocol:?}"),
                format!("{l}"),
                format!("{}", (i + 1) as f64 / n as f64),
                cfg_hash.clone(),
                config.seed.to_string(),
            ])?;
        }
    }
    cdf.finish()?;
    Ok(EvalOutcome { files: vec![acc_path, cdf_path] })
}

struct HeaderBits(DecodedHeader);

impl HeaderBits {
    fn bits(&self) -> Vec<u8> {
        crate::codec::HeaderRecord {
            header: self.0.clone(),
            valid: true,
            timing_s: 0.0,
            cfo_hz: 0.0,
        }
        .bits()
    }
}

fn field_u16(bits: &[u8]) -> u32 {
    bits.iter().enumerate().fold(0u32, |acc, (i, &b)| acc | ((b as u32 & 1) << i))
}
