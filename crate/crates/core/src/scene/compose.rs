//! Frame composition: per-emission waveform synthesis, channel
//! impairment, spectral placement with hard sub-band confinement, and
//! frame-level AWGN.
//!
//! Emissions are placed in the frequency domain and truncated to their
//! allocated sub-band, so a noise-free frame is exactly band-limited to
//! its occupancy. This is what makes noise-free recovery exact.

use num_complex::Complex64;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::codec::dvbs2::{header_symbols, pi2_bpsk, shape_symbols};
use crate::codec::wifi::{encode_wifi_frame, payload_symbols, WifiHtSig1, WifiLsig};
use crate::codec::{DvbS2Profile, Protocol, WifiProfile};
use crate::dsp::{apply_channel, upconvert_spectrum, ChannelSpec, ComplexSignal, Fading};

use super::{ChannelFamily, EmissionMeta, MultibandFrame, ScenarioSpec, SceneError};

const WIFI_SYMBOL_S: f64 = 4e-6;
/// Idle gap inserted before a preamble, emulating inter-frame spacing.
const GUARD_S: f64 = 2e-6;

fn draw_protocol(spec: &ScenarioSpec, rng: &mut ChaCha12Rng) -> Protocol {
    let total: f64 = spec.protocol_weights.iter().sum();
    let mut x = rng.random::<f64>() * total;
    for (i, &w) in spec.protocol_weights.iter().enumerate() {
        if x < w {
            return [Protocol::DvbS2, Protocol::WifiNonHt, Protocol::WifiHt][i];
        }
        x -= w;
    }
    Protocol::WifiHt
}

struct EmissionWave {
    baseband: ComplexSignal,
    meta: EmissionMeta,
}

/// Build one emission's full-window baseband waveform at its native rate.
fn build_emission(
    spec: &ScenarioSpec,
    carrier_index: usize,
    protocol: Protocol,
    rng: &mut ChaCha12Rng,
) -> EmissionWave {
    let emission_seed: u64 = rng.random();
    let header_in_window = rng.random::<f64>() < spec.header_in_window_prob;
    let amplitude = spec.amplitude_range.0
        + rng.random::<f64>() * (spec.amplitude_range.1 - spec.amplitude_range.0);
    let cfo = (rng.random::<f64>() * 2.0 - 1.0) * spec.cfo_bound_hz;
    let duration = spec.frame_duration_s;
    let mut wave_rng = ChaCha12Rng::seed_from_u64(emission_seed);

    let (samples, rate, header_bits, header_offset_s, rolloff) = match protocol {
        Protocol::WifiNonHt | Protocol::WifiHt => {
            let ht = protocol == Protocol::WifiHt;
            let profile = if ht { WifiProfile::ht() } else { WifiProfile::non_ht() };
            let rate = profile.sample_rate_hz;
            let n_window = (duration * rate).round() as usize;
            let lsig = WifiLsig::new(
                wave_rng.random_range(0..16) as u8,
                wave_rng.random_range(0..4096) as u16,
            )
            .unwrap();
            let htsig = WifiHtSig1::new(
                wave_rng.random_range(0..128) as u8,
                wave_rng.random::<bool>(),
                wave_rng.random::<u16>(),
            )
            .unwrap();
            let mut bits = lsig.to_bits().to_vec();
            if ht {
                bits.extend_from_slice(&htsig.to_bits());
            }
            let mut buf = vec![Complex64::new(0.0, 0.0); n_window];
            let offset_s;
            if header_in_window {
                let header_s = if ht { 24e-6 } else { 20e-6 };
                let max_off = duration - header_s - GUARD_S - WIFI_SYMBOL_S;
                offset_s = GUARD_S + wave_rng.random::<f64>() * (max_off - GUARD_S);
                let off = (offset_s * rate).round() as usize;
                // Tail of a previous packet, then the guard gap.
                let gap = (GUARD_S * rate).round() as usize;
                if off > gap {
                    let prefix_len = off - gap;
                    let n_syms = prefix_len / ((WIFI_SYMBOL_S * rate) as usize) + 1;
                    let prefix = payload_symbols(n_syms, 7, &profile, &mut wave_rng);
                    buf[..prefix_len]
                        .copy_from_slice(&prefix[prefix.len() - prefix_len..]);
                }
                let n_fill =
                    ((n_window - off) as f64 / (WIFI_SYMBOL_S * rate)).ceil() as usize;
                let frame = encode_wifi_frame(
                    &lsig,
                    if ht { Some(&htsig) } else { None },
                    n_fill,
                    &profile,
                    &mut wave_rng,
                );
                let take = frame.len().min(n_window - off);
                buf[off..off + take].copy_from_slice(&frame.samples[..take]);
            } else {
                // Header before the window: payload only.
                offset_s = -1.0;
                let n_syms = (duration / WIFI_SYMBOL_S).ceil() as usize;
                let p = payload_symbols(n_syms, 3, &profile, &mut wave_rng);
                buf.copy_from_slice(&p[..n_window]);
            }
            (buf, rate, bits, offset_s, 0.0)
        }
        Protocol::DvbS2 => {
            let rolloff = *[0.2, 0.25, 0.35].choose(&mut wave_rng).unwrap();
            let profile = DvbS2Profile::with_rolloff(rolloff);
            let rate = profile.sample_rate_hz();
            let t_sym = 1.0 / profile.symbol_rate_hz;
            let n_window = (duration * rate).round() as usize;
            let total_syms = (duration / t_sym).round() as usize;
            let header = crate::codec::dvbs2::DvbS2Header::from_index(
                wave_rng.random_range(0..128) as u8,
            );
            let bits = header.to_bits().to_vec();
            let header_syms = header_symbols(&header, &profile);
            let n_head = header_syms.len();
            let mut symbols: Vec<Complex64> = Vec::with_capacity(total_syms);
            let offset_s;
            if header_in_window {
                let max_prefix = total_syms - n_head - 8;
                let prefix = wave_rng.random_range(0..max_prefix);
                offset_s = prefix as f64 * t_sym;
                for k in 0..prefix {
                    symbols.push(pi2_bpsk(wave_rng.random_range(0..2u8), k));
                }
                symbols.extend_from_slice(&header_syms);
                let mut k = symbols.len();
                while symbols.len() < total_syms {
                    symbols.push(pi2_bpsk(wave_rng.random_range(0..2u8), k));
                    k += 1;
                }
            } else {
                offset_s = -1.0;
                for k in 0..total_syms {
                    symbols.push(pi2_bpsk(wave_rng.random_range(0..2u8), k));
                }
            }
            let mut shaped = shape_symbols(&symbols, &profile);
            shaped.truncate(n_window);
            (shaped, rate, bits, offset_s, rolloff)
        }
    };

    // Channel impairment (fading + CFO at the emission level; noise is
    // frame-level).
    let fading = match spec.channel {
        ChannelFamily::Ideal => Fading::None,
        ChannelFamily::Multipath => match protocol {
            Protocol::DvbS2 => Fading::Rician { k_factor: 8.0 },
            _ => {
                if wave_rng.random::<bool>() {
                    Fading::Rician { k_factor: 8.0 }
                } else {
                    Fading::Rayleigh
                }
            }
        },
    };
    let chan = ChannelSpec { cfo_hz: cfo, ..ChannelSpec::multipath(fading, f64::INFINITY, cfo) };
    let raw = ComplexSignal { samples, rate_hz: rate };
    let mut impaired = if matches!(fading, Fading::None) && cfo == 0.0 {
        raw
    } else {
        apply_channel(&raw, &chan, emission_seed ^ 0x9e37_79b9_7f4a_7c15)
    };

    // Normalize to unit mean power, then apply the amplitude draw.
    let p = impaired.mean_power();
    if p > 0.0 {
        let s = amplitude / p.sqrt();
        for v in &mut impaired.samples {
            *v *= s;
        }
    }

    EmissionWave {
        baseband: impaired,
        meta: EmissionMeta {
            carrier_index,
            protocol,
            header_bits,
            header_offset_s,
            header_in_window,
            amplitude,
            cfo_hz: cfo,
            rolloff,
            seed: emission_seed,
        },
    }
}

/// Compose one multiband frame. Deterministic for a given `(spec, seed)`.
pub fn compose_scene(spec: &ScenarioSpec, seed: u64) -> Result<MultibandFrame, SceneError> {
    spec.validate()?;
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let n = spec.frame_len();
    let grid = spec.grid();

    // Distinct carriers from the grid.
    let mut universe = spec.carrier_universe();
    universe.shuffle(&mut rng);
    let mut carriers = universe[..spec.num_emissions].to_vec();
    carriers.sort_unstable();

    // Always consume one draw so the noise-free replay of a seed yields
    // identical emissions (the clean counterpart of a noisy frame).
    let snr_draw = rng.random::<f64>();
    let snr_db = spec.snr_range_db.map(|(lo, hi)| lo + snr_draw * (hi - lo));

    let mut spectrum = vec![Complex64::new(0.0, 0.0); n];
    let mut emissions = Vec::with_capacity(spec.num_emissions);
    for &l in &carriers {
        let protocol = draw_protocol(spec, &mut rng);
        let wave = build_emission(spec, l, protocol, &mut rng);
        let (em_spec, _) =
            upconvert_spectrum(&wave.baseband, grid.center_hz(l), spec.nyquist_rate_hz)
                .map_err(|e| SceneError::InvalidSpec(e.to_string()))?;
        // Hard sub-band confinement: the emission contributes only inside
        // its allocated slice.
        let range = grid.bin_range(l, n);
        for k in range {
            spectrum[k] += em_spec[k];
        }
        emissions.push(wave.meta);
    }

    let mut samples = crate::dsp::dft_slice(&spectrum, true);
    if let Some(snr) = snr_db {
        let sigma = spec.noise_variance(snr).sqrt() * std::f64::consts::FRAC_1_SQRT_2;
        for v in &mut samples {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            *v += Complex64::new(re * sigma, im * sigma);
        }
    }

    let mut occupancy = vec![false; spec.num_subbands];
    for &l in &carriers {
        occupancy[l] = true;
    }

    Ok(MultibandFrame {
        nyquist: ComplexSignal { samples, rate_hz: spec.nyquist_rate_hz },
        emissions,
        occupancy,
        snr_db,
        seed,
    })
}

/// Rebuild one emission's contribution to the frame spectrum (no noise,
/// other emissions absent). Used by labeling oracles and tests.
pub fn emission_signal(
    spec: &ScenarioSpec,
    frame: &MultibandFrame,
    emission_index: usize,
) -> Result<ComplexSignal, SceneError> {
    spec.validate()?;
    // Replay the frame seed noise-free, then isolate the sub-band.
    let replay = compose_scene(&ScenarioSpec { snr_range_db: None, ..spec.clone() }, frame.seed)?;
    let meta = &replay.emissions[emission_index];
    let n = spec.frame_len();
    let grid = spec.grid();
    let spec_full = crate::dsp::dft_slice(&replay.nyquist.samples, false);
    let mut only = vec![Complex64::new(0.0, 0.0); n];
    let range = grid.bin_range(meta.carrier_index, n);
    only[range.clone()].copy_from_slice(&spec_full[range]);
    Ok(ComplexSignal {
        samples: crate::dsp::dft_slice(&only, true),
        rate_hz: spec.nyquist_rate_hz,
    })
}
