//! Rule-based protocol identification: preamble correlation chains used
//! as the labeling oracle for neural training and as a baseline.

use num_complex::Complex64;

use crate::codec::dvbs2::sof_template;
use crate::codec::wifi::{
    demod_symbol, wifi_channel_estimate, wifi_synchronize, CP_S, FFT_S,
};
use crate::codec::DvbS2Profile;
use crate::dsp::ComplexSignal;

use super::ProtocolClass;

#[derive(Debug, Clone, Copy)]
pub struct RuleThresholds {
    /// Normalized SOF correlation floor for a DVB-S2 call.
    pub sof: f64,
    /// Imaginary-axis energy ratio above which the post-L-SIG symbol is
    /// QBPSK, i.e. HT.
    pub axis: f64,
}

impl Default for RuleThresholds {
    fn default() -> Self {
        Self { sof: 0.5, axis: 0.5 }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RuleDiagnostics {
    pub stf_metric: f64,
    pub ltf_metric: f64,
    pub sof_metric: f64,
    pub axis_ratio: f64,
    pub lsig_parity_ok: bool,
}

#[derive(Debug, Clone)]
pub struct RuleIdentification {
    pub class: ProtocolClass,
    /// Estimated header start in seconds from signal start (preamble
    /// onset for Wi-Fi, SOF for DVB-S2); negative when nothing was found.
    pub timing_s: f64,
    pub diagnostics: RuleDiagnostics,
}

/// Normalized SOF cross-correlation peak over the whole signal.
fn sof_peak(x_bb: &ComplexSignal, profile: &DvbS2Profile) -> Option<(usize, f64)> {
    let tmpl = sof_template(profile, x_bb.rate_hz);
    let n_tmpl = tmpl.len();
    if x_bb.len() < n_tmpl + 1 {
        return None;
    }
    let t_energy: f64 = tmpl.iter().map(|v| v.norm_sqr()).sum();
    let x = &x_bb.samples;
    let mut local: f64 = x[0..n_tmpl].iter().map(|v| v.norm_sqr()).sum();
    let mut best = (0usize, 0.0f64);
    for n in 0..(x.len() - n_tmpl) {
        let mut c = Complex64::new(0.0, 0.0);
        for (k, &t) in tmpl.iter().enumerate() {
            c += x[n + k] * t.conj();
        }
        let m = c.norm() / (t_energy * local).sqrt().max(1e-30);
        if m > best.1 {
            best = (n, m);
        }
        local += x[n + n_tmpl].norm_sqr() - x[n].norm_sqr();
    }
    Some(best)
}

/// Identify the protocol in one recovered sub-band baseband.
///
/// Order of evidence: L-STF periodic autocorrelation and L-LTF
/// cross-correlation make a Wi-Fi candidate, the post-L-SIG
/// constellation-axis test resolves HT vs non-HT, and a DVB-S2 SOF
/// matched filter is tried when the Wi-Fi chain fails. Anything below
/// threshold is `no_header`.
pub fn identify_protocol_rules(
    x_bb: &ComplexSignal,
    thresholds: &RuleThresholds,
) -> RuleIdentification {
    let mut diag = RuleDiagnostics::default();
    let rate = x_bb.rate_hz;

    if let Ok(sync) = wifi_synchronize(x_bb) {
        diag.stf_metric = sync.stf_metric;
        diag.ltf_metric = sync.ltf_metric;
        let n_fft = (rate * FFT_S).round() as usize;
        let n_cp = (rate * CP_S).round() as usize;
        let derot: Vec<Complex64> = x_bb
            .samples
            .iter()
            .enumerate()
            .map(|(n, &v)| {
                v * Complex64::from_polar(
                    1.0,
                    -std::f64::consts::TAU * sync.cfo_hz * n as f64 / rate,
                )
            })
            .collect();
        let h = wifi_channel_estimate(&derot, sync.ltf_start, n_fft);
        let lsig_start = sync.ltf_start + 2 * n_fft + n_cp;
        let lsig_ok = demod_symbol(&derot, lsig_start, n_fft, &h, 0).map(|d| {
            let llr: Vec<f64> = d.data.iter().zip(&d.weights).map(|(v, w)| v.re * w).collect();
            let deint = crate::codec::interleave::deinterleave48_soft(&llr).unwrap();
            let bits = crate::codec::convcode::viterbi_decode_soft(&deint, true).unwrap();
            let lsig = crate::codec::WifiLsig::from_bits(&bits);
            lsig.parity_ok() && bits[18..24].iter().all(|&b| b == 0)
        });
        diag.lsig_parity_ok = lsig_ok.unwrap_or(false);
        if diag.lsig_parity_ok {
            // Constellation-axis test on the symbol after L-SIG.
            let next_start = lsig_start + n_fft + n_cp;
            if let Some(d) = demod_symbol(&derot, next_start, n_fft, &h, 1) {
                let re: f64 = d.data.iter().map(|v| v.re * v.re).sum();
                let im: f64 = d.data.iter().map(|v| v.im * v.im).sum();
                diag.axis_ratio = im / (re + im).max(1e-30);
            }
            let class = if diag.axis_ratio > thresholds.axis {
                ProtocolClass::WifiHt
            } else {
                ProtocolClass::WifiNonHt
            };
            let timing_s = sync.ltf_start as f64 / rate - 9.6e-6;
            return RuleIdentification { class, timing_s, diagnostics: diag };
        }
    }

    let profile = DvbS2Profile::default_profile();
    if let Some((pos, metric)) = sof_peak(x_bb, &profile) {
        diag.sof_metric = metric;
        if metric >= thresholds.sof {
            return RuleIdentification {
                class: ProtocolClass::DvbS2,
                timing_s: pos as f64 / rate,
                diagnostics: diag,
            };
        }
    }

    RuleIdentification { class: ProtocolClass::NoHeader, timing_s: -1.0, diagnostics: diag }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::dvbs2::{encode_dvbs2_frame, DvbS2Header};
    use crate::codec::wifi::{encode_wifi_frame, WifiHtSig1, WifiLsig};
    use crate::codec::WifiProfile;
    use rand::{Rng, SeedableRng};

    fn rng(seed: u64) -> rand_chacha::ChaCha12Rng {
        rand_chacha::ChaCha12Rng::seed_from_u64(seed)
    }

    #[test]
    fn clean_wifi_frames_identified_with_timing() {
        let mut r = rng(1);
        let th = RuleThresholds::default();
        for ht in [false, true] {
            let profile = if ht { WifiProfile::ht() } else { WifiProfile::non_ht() };
            let lsig = WifiLsig::new(5, 321).unwrap();
            let htsig = WifiHtSig1::new(17, false, 1500).unwrap();
            let frame =
                encode_wifi_frame(&lsig, if ht { Some(&htsig) } else { None }, 2, &profile, &mut r);
            // Prepend idle samples so timing is nontrivial.
            let lead = 60usize;
            let mut samples = vec![Complex64::new(0.0, 0.0); lead];
            samples.extend_from_slice(&frame.samples);
            let sig = ComplexSignal { samples, rate_hz: profile.sample_rate_hz };
            let id = identify_protocol_rules(&sig, &th);
            let expect = if ht { ProtocolClass::WifiHt } else { ProtocolClass::WifiNonHt };
            assert_eq!(id.class, expect, "ht={ht} diag {:?}", id.diagnostics);
            let err_samples =
                (id.timing_s * profile.sample_rate_hz - lead as f64).abs();
            assert!(err_samples <= 1.0, "timing error {err_samples} samples");
        }
    }

    #[test]
    fn clean_dvbs2_identified() {
        let mut r = rng(2);
        let profile = DvbS2Profile::default_profile();
        let h = DvbS2Header::from_index(99);
        let frame = encode_dvbs2_frame(&h, 60, &profile, &mut r);
        let id = identify_protocol_rules(&frame, &RuleThresholds::default());
        assert_eq!(id.class, ProtocolClass::DvbS2, "diag {:?}", id.diagnostics);
    }

    #[test]
    fn pure_noise_is_no_header() {
        let mut r = rng(3);
        let th = RuleThresholds::default();
        let mut wrong = 0usize;
        let trials = 1000;
        for _ in 0..trials {
            let samples: Vec<Complex64> = (0..2400)
                .map(|_| {
                    Complex64::new(r.random::<f64>() - 0.5, r.random::<f64>() - 0.5)
                })
                .collect();
            let sig = ComplexSignal { samples, rate_hz: 50e6 };
            if identify_protocol_rules(&sig, &th).class != ProtocolClass::NoHeader {
                wrong += 1;
            }
        }
        assert!(wrong <= trials / 100, "noise misidentified {wrong}/{trials}");
    }
}
