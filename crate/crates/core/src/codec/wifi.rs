//! 802.11 non-HT / HT signaling-field waveforms and their rule-based
//! decoder.
//!
//! Encoding always produces the 20 MHz legacy structure: L-STF (8 µs),
//! L-LTF (8 µs), L-SIG (one BPSK OFDM symbol), then HT-SIG1 (one QBPSK
//! symbol) for HT frames, then BPSK payload symbols. The decoder is
//! rate-generic: any sample rate with an integer number of samples per
//! 0.8 µs (e.g. 20 MS/s natively or 50 MS/s after sub-band recovery)
//! demodulates on the same 312.5 kHz subcarrier grid.

use num_complex::Complex64;

use super::bits::{even_parity, pack_lsb, unpack_lsb, Scrambler};
use super::convcode::{conv_encode, viterbi_decode_soft};
use super::interleave::{deinterleave48_soft, interleave48};
use super::profile::WifiProfile;
use super::{CodecError, DecodedHeader, HeaderRecord};
use crate::dsp::{dft_slice, ComplexSignal};

pub const SUBCARRIER_SPACING_HZ: f64 = 312_500.0;
/// OFDM symbol period, cyclic prefix included.
pub const SYMBOL_S: f64 = 4e-6;
pub const FFT_S: f64 = 3.2e-6;
pub const CP_S: f64 = 0.8e-6;

const PILOT_IDX: [i32; 4] = [-21, -7, 7, 21];
const PILOT_VAL: [f64; 4] = [1.0, 1.0, 1.0, -1.0];

/// L-SIG contents (24 bits).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WifiLsig {
    pub rate_mcs: u8,
    pub reserved: u8,
    pub length_or_duration: u16,
    pub parity: u8,
}

impl WifiLsig {
    /// Build with the correct even parity over bits 0..17.
    pub fn new(rate_mcs: u8, length_or_duration: u16) -> Result<Self, CodecError> {
        if rate_mcs > 0xf {
            return Err(CodecError::FieldOverflow { value: rate_mcs as u32, bits: 4 });
        }
        if length_or_duration > 0xfff {
            return Err(CodecError::FieldOverflow { value: length_or_duration as u32, bits: 12 });
        }
        let mut h = Self { rate_mcs, reserved: 0, length_or_duration, parity: 0 };
        h.parity = even_parity(&h.to_bits()[0..17]);
        Ok(h)
    }

    /// 24 bits: rate (4, LSB first), reserved (1), length (12, LSB first),
    /// parity (1), tail (6 zeros).
    pub fn to_bits(&self) -> [u8; 24] {
        let mut bits = [0u8; 24];
        bits[0..4].copy_from_slice(&unpack_lsb(self.rate_mcs as u32, 4));
        bits[4] = self.reserved & 1;
        bits[5..17].copy_from_slice(&unpack_lsb(self.length_or_duration as u32, 12));
        bits[17] = self.parity & 1;
        bits
    }

    pub fn from_bits(bits: &[u8]) -> Self {
        Self {
            rate_mcs: pack_lsb(&bits[0..4]) as u8,
            reserved: bits[4],
            length_or_duration: pack_lsb(&bits[5..17]) as u16,
            parity: bits[17],
        }
    }

    pub fn parity_ok(&self) -> bool {
        even_parity(&self.to_bits()[0..17]) == self.parity
    }
}

/// HT-SIG1 contents (24 bits): MCS (7), bandwidth (1), packet length (16).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WifiHtSig1 {
    pub mcs: u8,
    pub bandwidth_40mhz: bool,
    pub packet_length: u16,
}

impl WifiHtSig1 {
    pub fn new(mcs: u8, bandwidth_40mhz: bool, packet_length: u16) -> Result<Self, CodecError> {
        if mcs > 0x7f {
            return Err(CodecError::FieldOverflow { value: mcs as u32, bits: 7 });
        }
        Ok(Self { mcs, bandwidth_40mhz, packet_length })
    }

    pub fn to_bits(&self) -> [u8; 24] {
        let mut bits = [0u8; 24];
        bits[0..7].copy_from_slice(&unpack_lsb(self.mcs as u32, 7));
        bits[7] = self.bandwidth_40mhz as u8;
        bits[8..24].copy_from_slice(&unpack_lsb(self.packet_length as u32, 16));
        bits
    }

    pub fn from_bits(bits: &[u8]) -> Self {
        Self {
            mcs: pack_lsb(&bits[0..7]) as u8,
            bandwidth_40mhz: bits[7] == 1,
            packet_length: pack_lsb(&bits[8..24]) as u16,
        }
    }
}

/// Indices of the 48 data subcarriers (pilots and DC excluded).
pub fn data_subcarriers() -> Vec<i32> {
    (-26..=26)
        .filter(|&k| k != 0 && !PILOT_IDX.contains(&k))
        .collect()
}

/// L-STF frequency-domain sequence: (index, ±1) pairs on multiples of 4,
/// modulating (1+j)/√2.
const STF_PATTERN: [(i32, f64); 12] = [
    (-24, 1.0),
    (-20, -1.0),
    (-16, 1.0),
    (-12, -1.0),
    (-8, -1.0),
    (-4, 1.0),
    (4, -1.0),
    (8, -1.0),
    (12, 1.0),
    (16, 1.0),
    (20, 1.0),
    (24, 1.0),
];

/// L-LTF frequency-domain sequence for k = -26..26 (DC at index 26).
const LTF_SEQ: [i8; 53] = [
    1, 1, -1, -1, 1, 1, -1, 1, -1, 1, 1, 1, 1, 1, 1, -1, -1, 1, 1, -1, 1, -1, 1, 1, 1, 1, 0, 1,
    -1, -1, 1, 1, -1, 1, -1, 1, -1, -1, -1, -1, -1, 1, 1, -1, -1, 1, -1, 1, -1, 1, 1, 1, 1,
];

fn ltf_value(k: i32) -> f64 {
    LTF_SEQ[(k + 26) as usize] as f64
}

/// Pilot polarity sequence: 127-periodic LFSR output mapped 0→+1, 1→-1,
/// indexed from the L-SIG symbol.
pub fn pilot_polarity(symbol_index: usize) -> f64 {
    let mut s = Scrambler::new(0x7f);
    let mut v = 1.0;
    for _ in 0..=(symbol_index % 127) {
        v = if s.next_bit() == 1 { -1.0 } else { 1.0 };
    }
    v
}

/// Evaluate the band-limited time waveform of a 64-bin OFDM spectrum at
/// sample rate `rate`: x(t) = Σ_k X_k e^{2πi k Δf t} / norm.
fn synth_grid(bins: &[(i32, Complex64)], rate: f64, n: usize, t0: f64) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); n];
    for (i, o) in out.iter_mut().enumerate() {
        let t = t0 + i as f64 / rate;
        for &(k, v) in bins {
            let ang = std::f64::consts::TAU * k as f64 * SUBCARRIER_SPACING_HZ * t;
            *o += v * Complex64::from_polar(1.0, ang);
        }
    }
    // Normalize to unit mean power.
    let p: f64 = out.iter().map(|v| v.norm_sqr()).sum::<f64>() / n as f64;
    if p > 0.0 {
        let s = 1.0 / p.sqrt();
        for o in &mut out {
            *o *= s;
        }
    }
    out
}

/// One OFDM symbol (CP + FFT period) carrying `data` on the 48 data
/// subcarriers and the standard pilots, at sample rate `rate`.
fn ofdm_symbol(data: &[Complex64; 48], symbol_index: usize, rate: f64) -> Vec<Complex64> {
    let polarity = pilot_polarity(symbol_index);
    let mut bins: Vec<(i32, Complex64)> = Vec::with_capacity(52);
    for (i, &k) in data_subcarriers().iter().enumerate() {
        bins.push((k, data[i]));
    }
    for (i, &k) in PILOT_IDX.iter().enumerate() {
        bins.push((k, Complex64::new(PILOT_VAL[i] * polarity, 0.0)));
    }
    let n_sym = (rate * SYMBOL_S).round() as usize;
    let n_cp = (rate * CP_S).round() as usize;
    // Synthesize starting at -CP so the FFT period occupies [0, 3.2 µs).
    synth_grid(&bins, rate, n_sym, -(n_cp as f64) / rate)
}

/// L-STF: ten repetitions of a 0.8 µs period (8 µs total).
pub fn stf_waveform(rate: f64) -> Vec<Complex64> {
    let bins: Vec<(i32, Complex64)> = STF_PATTERN
        .iter()
        .map(|&(k, v)| (k, Complex64::new(v, v) * std::f64::consts::FRAC_1_SQRT_2))
        .collect();
    let n = (rate * 8e-6).round() as usize;
    synth_grid(&bins, rate, n, 0.0)
}

/// L-LTF: 1.6 µs guard (two CP lengths) then two 3.2 µs training symbols.
pub fn ltf_waveform(rate: f64) -> Vec<Complex64> {
    let bins: Vec<(i32, Complex64)> = (-26..=26)
        .filter(|&k| k != 0)
        .map(|k| (k, Complex64::new(ltf_value(k), 0.0)))
        .collect();
    let n = (rate * 8e-6).round() as usize;
    // Guard is the tail of the symbol: synthesize starting at -1.6 µs.
    synth_grid(&bins, rate, n, -1.6e-6)
}

/// One clean LTF training symbol (3.2 µs), used as a matched-filter
/// template by the decoder.
pub fn ltf_symbol_template(rate: f64) -> Vec<Complex64> {
    let bins: Vec<(i32, Complex64)> = (-26..=26)
        .filter(|&k| k != 0)
        .map(|k| (k, Complex64::new(ltf_value(k), 0.0)))
        .collect();
    let n = (rate * FFT_S).round() as usize;
    synth_grid(&bins, rate, n, 0.0)
}

fn encode_sig_symbol(bits24: &[u8], symbol_index: usize, qbpsk: bool, rate: f64) -> Vec<Complex64> {
    let coded = conv_encode(bits24);
    let inter = interleave48(&coded).unwrap();
    let mut data = [Complex64::new(0.0, 0.0); 48];
    for (i, &b) in inter.iter().enumerate() {
        let v = if b == 1 { 1.0 } else { -1.0 };
        data[i] = if qbpsk { Complex64::new(0.0, v) } else { Complex64::new(v, 0.0) };
    }
    ofdm_symbol(&data, symbol_index, rate)
}

/// Scrambled random BPSK payload symbols (content is irrelevant to header
/// analysis; BPSK keeps the post-L-SIG constellation-axis test meaningful).
pub fn payload_symbols(
    n_symbols: usize,
    first_symbol_index: usize,
    profile: &WifiProfile,
    rng: &mut impl rand::Rng,
) -> Vec<Complex64> {
    let rate = profile.sample_rate_hz;
    let mut scr = Scrambler::new(profile.scrambler_seed);
    let mut out = Vec::new();
    for s in 0..n_symbols {
        let mut data = [Complex64::new(0.0, 0.0); 48];
        for d in data.iter_mut() {
            let bit = rng.random_range(0..2u8) ^ scr.next_bit();
            *d = Complex64::new(if bit == 1 { 1.0 } else { -1.0 }, 0.0);
        }
        out.extend(ofdm_symbol(&data, first_symbol_index + s, rate));
    }
    out
}

/// Full header waveform: preambles, L-SIG, optional HT-SIG1, payload.
pub fn encode_wifi_frame(
    lsig: &WifiLsig,
    htsig: Option<&WifiHtSig1>,
    payload_symbols_count: usize,
    profile: &WifiProfile,
    rng: &mut impl rand::Rng,
) -> ComplexSignal {
    let rate = profile.sample_rate_hz;
    let mut samples = stf_waveform(rate);
    samples.extend(ltf_waveform(rate));
    samples.extend(encode_sig_symbol(&lsig.to_bits(), 0, false, rate));
    let mut next_symbol = 1;
    if let Some(ht) = htsig {
        samples.extend(encode_sig_symbol(&ht.to_bits(), 1, true, rate));
        next_symbol = 2;
    }
    samples.extend(payload_symbols(payload_symbols_count, next_symbol, profile, rng));
    ComplexSignal { samples, rate_hz: rate }
}

/// Per-subcarrier demodulation of one symbol window.
pub(crate) struct SymbolDemod {
    /// Equalized values on the 48 data subcarriers.
    pub(crate) data: Vec<Complex64>,
    /// |H|² weights for soft decisions.
    pub(crate) weights: Vec<f64>,
}

pub(crate) fn demod_symbol(
    sig: &[Complex64],
    start: usize,
    n_fft: usize,
    h: &[Complex64; 53],
    symbol_index: usize,
) -> Option<SymbolDemod> {
    if start + n_fft > sig.len() {
        return None;
    }
    let spec = dft_slice(&sig[start..start + n_fft], false);
    let bin = |k: i32| -> Complex64 {
        let idx = if k >= 0 { k as usize } else { (n_fft as i32 + k) as usize };
        spec[idx]
    };
    // Common phase from pilots.
    let polarity = pilot_polarity(symbol_index);
    let mut pilot_acc = Complex64::new(0.0, 0.0);
    for (i, &k) in PILOT_IDX.iter().enumerate() {
        let hk = h[(k + 26) as usize];
        if hk.norm_sqr() > 0.0 {
            pilot_acc += bin(k) * (PILOT_VAL[i] * polarity) * hk.conj();
        }
    }
    let phase = if pilot_acc.norm() > 0.0 {
        pilot_acc / pilot_acc.norm()
    } else {
        Complex64::new(1.0, 0.0)
    };
    let mut data = Vec::with_capacity(48);
    let mut weights = Vec::with_capacity(48);
    for &k in &data_subcarriers() {
        let hk = h[(k + 26) as usize];
        let w = hk.norm_sqr();
        let eq = if w > 1e-12 { bin(k) * hk.conj() / w } else { Complex64::new(0.0, 0.0) };
        data.push(eq * phase.conj());
        weights.push(w);
    }
    Some(SymbolDemod { data, weights })
}

/// Intermediate synchronization result, shared with the rule-based
/// protocol identifier.
#[derive(Debug, Clone)]
pub struct WifiSync {
    /// Sample index of the first LTF training symbol.
    pub ltf_start: usize,
    pub cfo_hz: f64,
    /// Normalized L-STF autocorrelation peak.
    pub stf_metric: f64,
    /// Normalized LTF cross-correlation peak.
    pub ltf_metric: f64,
}

/// STF/LTF synchronization. Returns the sync point and the CFO estimate.
pub fn wifi_synchronize(signal: &ComplexSignal) -> Result<WifiSync, CodecError> {
    let rate = signal.rate_hz;
    let lag = (rate * CP_S).round() as usize;
    if (rate * CP_S - lag as f64).abs() > 1e-6 || lag == 0 {
        return Err(CodecError::IncompatibleRate { rate_hz: rate });
    }
    let n_fft = (rate * FFT_S).round() as usize;
    let x = &signal.samples;
    let need = 2 * n_fft + 4 * lag;
    if x.len() < need {
        return Err(CodecError::SignalTooShort { len: x.len(), need });
    }

    // Coarse: STF periodic autocorrelation over a 4-period window.
    let win = 4 * lag;
    let mut best_c = Complex64::new(0.0, 0.0);
    let mut best_m = 0.0;
    let mut acc = Complex64::new(0.0, 0.0);
    let mut energy = 0.0;
    for k in 0..win {
        acc += x[k] * x[k + lag].conj();
        energy += x[k + lag].norm_sqr();
    }
    let upper = x.len() - lag - win;
    for n in 0..upper {
        let m = acc.norm() / energy.max(1e-30);
        if m > best_m {
            best_m = m;
            best_c = acc;
        }
        acc -= x[n] * x[n + lag].conj();
        acc += x[n + win] * x[n + win + lag].conj();
        energy -= x[n + lag].norm_sqr();
        energy += x[n + win + lag].norm_sqr();
    }
    let stf_threshold = 0.4;
    if best_m < stf_threshold {
        return Err(CodecError::SyncNotFound { metric: best_m, threshold: stf_threshold });
    }
    let coarse_cfo = -best_c.arg() * rate / (std::f64::consts::TAU * lag as f64);

    // Fine: LTF cross-correlation after coarse CFO removal.
    let derot: Vec<Complex64> = x
        .iter()
        .enumerate()
        .map(|(n, &v)| {
            v * Complex64::from_polar(1.0, -std::f64::consts::TAU * coarse_cfo * n as f64 / rate)
        })
        .collect();
    let tmpl = ltf_symbol_template(rate);
    let t_energy: f64 = tmpl.iter().map(|v| v.norm_sqr()).sum();
    let mut corr: Vec<Complex64> = Vec::with_capacity(derot.len() - n_fft);
    for n in 0..(derot.len() - n_fft) {
        let mut c = Complex64::new(0.0, 0.0);
        for (k, &t) in tmpl.iter().enumerate() {
            c += derot[n + k] * t.conj();
        }
        corr.push(c);
    }
    // The two LTF symbols produce two peaks exactly one FFT period apart.
    let mut best = (0usize, 0.0f64);
    for n in 0..corr.len().saturating_sub(n_fft) {
        let v = corr[n].norm() + corr[n + n_fft].norm();
        if v > best.1 {
            best = (n, v);
        }
    }
    let ltf_start = best.0;
    let c1 = corr[ltf_start];
    let c2 = corr[ltf_start + n_fft];
    // Normalized metric against template and local signal energy.
    let local_energy: f64 =
        derot[ltf_start..ltf_start + n_fft].iter().map(|v| v.norm_sqr()).sum();
    let ltf_metric = c1.norm() / (t_energy * local_energy).sqrt().max(1e-30);
    let ltf_threshold = 0.35;
    if ltf_metric < ltf_threshold {
        return Err(CodecError::SyncNotFound { metric: ltf_metric, threshold: ltf_threshold });
    }
    let fine_cfo = (c2 * c1.conj()).arg() * rate / (std::f64::consts::TAU * n_fft as f64);
    Ok(WifiSync { ltf_start, cfo_hz: coarse_cfo + fine_cfo, stf_metric: best_m, ltf_metric })
}

/// Channel estimate over the 53-bin grid from the two LTF symbols.
pub fn wifi_channel_estimate(
    derot: &[Complex64],
    ltf_start: usize,
    n_fft: usize,
) -> [Complex64; 53] {
    let mut avg = vec![Complex64::new(0.0, 0.0); n_fft];
    for (i, a) in avg.iter_mut().enumerate() {
        *a = 0.5 * (derot[ltf_start + i] + derot[ltf_start + n_fft + i]);
    }
    let spec = dft_slice(&avg, false);
    let mut h = [Complex64::new(0.0, 0.0); 53];
    for k in -26..=26i32 {
        if k == 0 {
            continue;
        }
        let idx = if k >= 0 { k as usize } else { (n_fft as i32 + k) as usize };
        h[(k + 26) as usize] = spec[idx] * ltf_value(k);
    }
    h
}

/// Decode the L-SIG (and HT-SIG1 when the profile says HT) from a signal
/// containing the full preamble, tolerating timing uncertainty and CFO.
pub fn decode_wifi_header(
    signal: &ComplexSignal,
    profile: &WifiProfile,
) -> Result<HeaderRecord, CodecError> {
    let rate = signal.rate_hz;
    let sync = wifi_synchronize(signal)?;
    let n_fft = (rate * FFT_S).round() as usize;
    let n_cp = (rate * CP_S).round() as usize;
    let derot: Vec<Complex64> = signal
        .samples
        .iter()
        .enumerate()
        .map(|(n, &v)| {
            v * Complex64::from_polar(1.0, -std::f64::consts::TAU * sync.cfo_hz * n as f64 / rate)
        })
        .collect();
    let h = wifi_channel_estimate(&derot, sync.ltf_start, n_fft);

    let lsig_start = sync.ltf_start + 2 * n_fft + n_cp;
    let ls = demod_symbol(&derot, lsig_start, n_fft, &h, 0).ok_or(CodecError::SignalTooShort {
        len: signal.len(),
        need: lsig_start + n_fft,
    })?;
    let llr_inter: Vec<f64> = ls.data.iter().zip(&ls.weights).map(|(v, w)| v.re * w).collect();
    let llr = deinterleave48_soft(&llr_inter)?;
    let bits = viterbi_decode_soft(&llr, true)?;
    let lsig = WifiLsig::from_bits(&bits);
    let valid = lsig.parity_ok() && bits[18..24].iter().all(|&b| b == 0);

    let timing_s = (sync.ltf_start as f64 / rate) - 8e-6 - 1.6e-6;
    if !profile.ht {
        return Ok(HeaderRecord {
            header: DecodedHeader::WifiNonHt(lsig),
            valid,
            timing_s,
            cfo_hz: sync.cfo_hz,
        });
    }

    let ht_start = lsig_start + n_fft + n_cp;
    let hs = demod_symbol(&derot, ht_start, n_fft, &h, 1).ok_or(CodecError::SignalTooShort {
        len: signal.len(),
        need: ht_start + n_fft,
    })?;
    // QBPSK: information on the imaginary axis. HT-SIG1 carries 24
    // information bits with no tail, so the trellis is unterminated.
    let llr_inter: Vec<f64> = hs.data.iter().zip(&hs.weights).map(|(v, w)| v.im * w).collect();
    let llr = deinterleave48_soft(&llr_inter)?;
    let ht_bits = viterbi_decode_soft(&llr, false)?;
    let htsig = WifiHtSig1::from_bits(&ht_bits);
    Ok(HeaderRecord {
        header: DecodedHeader::WifiHt { lsig, htsig },
        valid,
        timing_s,
        cfo_hz: sync.cfo_hz,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn rng(seed: u64) -> rand_chacha::ChaCha12Rng {
        rand_chacha::ChaCha12Rng::seed_from_u64(seed)
    }

    fn random_lsig(r: &mut impl Rng) -> WifiLsig {
        WifiLsig::new(r.random_range(0..16) as u8, r.random_range(0..4096) as u16).unwrap()
    }

    fn random_htsig(r: &mut impl Rng) -> WifiHtSig1 {
        WifiHtSig1::new(r.random_range(0..128) as u8, r.random::<bool>(), r.random::<u16>())
            .unwrap()
    }

    #[test]
    fn non_ht_header_region_is_20_us() {
        let mut r = rng(1);
        let profile = WifiProfile::non_ht();
        let lsig = random_lsig(&mut r);
        let sig = encode_wifi_frame(&lsig, None, 0, &profile, &mut r);
        assert_eq!(sig.len(), 400); // 20 µs at 20 MS/s
    }

    #[test]
    fn parity_flips_with_any_single_field_bit() {
        let base = WifiLsig::new(5, 1234).unwrap();
        for i in 0..17 {
            let mut bits = base.to_bits();
            bits[i] ^= 1;
            let mutated = WifiLsig::from_bits(&bits);
            assert!(!mutated.parity_ok(), "bit {i} flip kept parity valid");
        }
    }

    #[test]
    fn htsig_symbol_is_imaginary_axis_lsig_real_axis() {
        // Constellation-energy measurement on the generated waveform.
        let mut r = rng(2);
        let profile = WifiProfile::ht();
        let lsig = random_lsig(&mut r);
        let ht = random_htsig(&mut r);
        let sig = encode_wifi_frame(&lsig, Some(&ht), 0, &profile, &mut r);
        let rate = profile.sample_rate_hz;
        let n_fft = (rate * FFT_S).round() as usize;
        let n_cp = (rate * CP_S).round() as usize;
        let ltf_start = (rate * 8e-6).round() as usize + 2 * n_cp;
        let h = wifi_channel_estimate(&sig.samples, ltf_start, n_fft);
        let axis_energy = |start: usize, idx: usize| -> (f64, f64) {
            let d = demod_symbol(&sig.samples, start, n_fft, &h, idx).unwrap();
            let re: f64 = d.data.iter().map(|v| v.re * v.re).sum();
            let im: f64 = d.data.iter().map(|v| v.im * v.im).sum();
            (re, im)
        };
        let lsig_start = ltf_start + 2 * n_fft + n_cp;
        let (re_l, im_l) = axis_energy(lsig_start, 0);
        assert!(re_l / (re_l + im_l) >= 0.9, "L-SIG real fraction {}", re_l / (re_l + im_l));
        let ht_start = lsig_start + n_fft + n_cp;
        let (re_h, im_h) = axis_energy(ht_start, 1);
        assert!(im_h / (re_h + im_h) >= 0.9, "HT-SIG1 imag fraction {}", im_h / (re_h + im_h));
    }

    #[test]
    fn clean_round_trip_many_headers() {
        let mut r = rng(3);
        for trial in 0..60 {
            let ht = trial % 2 == 1;
            let profile = if ht { WifiProfile::ht() } else { WifiProfile::non_ht() };
            let lsig = random_lsig(&mut r);
            let htsig = random_htsig(&mut r);
            let sig =
                encode_wifi_frame(&lsig, if ht { Some(&htsig) } else { None }, 2, &profile, &mut r);
            let rec = decode_wifi_header(&sig, &profile).unwrap();
            assert!(rec.valid);
            match rec.header {
                DecodedHeader::WifiNonHt(l) => {
                    assert!(!ht);
                    assert_eq!(l, lsig);
                }
                DecodedHeader::WifiHt { lsig: l, htsig: h } => {
                    assert!(ht);
                    assert_eq!(l, lsig);
                    assert_eq!(h, htsig);
                }
                _ => panic!("wrong protocol"),
            }
        }
    }

    #[test]
    fn truncated_preamble_is_sync_not_found() {
        let mut r = rng(4);
        let profile = WifiProfile::non_ht();
        let lsig = random_lsig(&mut r);
        let sig = encode_wifi_frame(&lsig, None, 0, &profile, &mut r);
        // Drop the STF and most of the LTF.
        let cut = ComplexSignal {
            samples: sig.samples[280..].to_vec(),
            rate_hz: sig.rate_hz,
        };
        match decode_wifi_header(&cut, &profile) {
            Err(CodecError::SyncNotFound { .. }) | Err(CodecError::SignalTooShort { .. }) => {}
            other => panic!("expected sync failure, got {other:?}"),
        }
    }

    #[test]
    fn impaired_round_trip_bit_accuracy() {
        // Monte-Carlo: 10 dB AWGN + CFO within ±200 kHz + 3-tap Rician.
        use crate::dsp::{apply_channel, ChannelSpec, Fading};
        let mut r = rng(5);
        let mut bits_wrong = 0usize;
        let mut bits_total = 0usize;
        let trials = 1000;
        for t in 0..trials {
            let ht = t % 2 == 1;
            let profile = if ht { WifiProfile::ht() } else { WifiProfile::non_ht() };
            let lsig = random_lsig(&mut r);
            let htsig = random_htsig(&mut r);
            let sig =
                encode_wifi_frame(&lsig, if ht { Some(&htsig) } else { None }, 3, &profile, &mut r);
            let cfo = (r.random::<f64>() * 2.0 - 1.0) * 200e3;
            let chan = ChannelSpec::multipath(Fading::Rician { k_factor: 8.0 }, 10.0, cfo);
            let noisy = apply_channel(&sig, &chan, 9000 + t as u64);
            let mut sent = lsig.to_bits().to_vec();
            if ht {
                sent.extend_from_slice(&htsig.to_bits());
            }
            match decode_wifi_header(&noisy, &profile) {
                Ok(rec) => {
                    let got = rec.bits();
                    bits_wrong +=
                        sent.iter().zip(&got).filter(|(a, b)| a != b).count();
                }
                Err(_) => bits_wrong += sent.len(),
            }
            bits_total += sent.len();
        }
        let acc = 1.0 - bits_wrong as f64 / bits_total as f64;
        assert!(acc >= 0.99, "header bit accuracy {acc}");
    }

    #[test]
    fn single_coded_bit_flip_corrects_or_flags() {
        // Any single coded-bit flip must either correct under Viterbi or
        // fail parity; silent wrong fields are not accepted.
        use super::super::convcode::{conv_encode, viterbi_decode};
        use super::super::interleave::{deinterleave48, interleave48};
        let mut r = rng(6);
        let mut silent_wrong = 0usize;
        let mut total = 0usize;
        for _ in 0..40 {
            let lsig = random_lsig(&mut r);
            let coded = interleave48(&conv_encode(&lsig.to_bits())).unwrap();
            for i in 0..48 {
                let mut c = coded.clone();
                c[i] ^= 1;
                let deint = deinterleave48(&c).unwrap();
                let bits = viterbi_decode(&deint, true).unwrap();
                let dec = WifiLsig::from_bits(&bits);
                total += 1;
                if dec != lsig && dec.parity_ok() {
                    silent_wrong += 1;
                }
            }
        }
        assert!(
            (silent_wrong as f64) / (total as f64) <= 0.01,
            "silent wrong fields {silent_wrong}/{total}"
        );
    }
}
