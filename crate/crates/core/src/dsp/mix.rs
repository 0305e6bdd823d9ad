//! Sub-band up-conversion and the sub-band indexing convention.
//!
//! Up-conversion works in the frequency domain: the narrowband spectrum is
//! embedded onto the dense output DFT grid at the carrier bin and
//! transformed back. This keeps interpolation images at numerical noise
//! and makes exact band confinement possible downstream.

use num_complex::Complex64;

use super::fft::dft_slice;
use super::{ComplexSignal, DspError};

/// Uniform division of a complex Nyquist band into `num_subbands` slices.
///
/// Sub-band `l` covers DFT frequencies `[l·W, (l+1)·W)` with `W = B/L`,
/// i.e. DFT-bin ordering: indices above `L/2` wrap to negative frequencies.
/// Scenario carriers `{(k + 1/2)·W}` sit at sub-band centers.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SubbandGrid {
    pub nyquist_rate_hz: f64,
    pub num_subbands: usize,
}

impl SubbandGrid {
    pub fn new(nyquist_rate_hz: f64, num_subbands: usize) -> Self {
        assert!(num_subbands > 0 && nyquist_rate_hz > 0.0);
        Self { nyquist_rate_hz, num_subbands }
    }

    pub fn width_hz(&self) -> f64 {
        self.nyquist_rate_hz / self.num_subbands as f64
    }

    /// Center frequency of sub-band `l`, in the signed baseband range
    /// `[-B/2, B/2)`.
    pub fn center_hz(&self, l: usize) -> f64 {
        assert!(l < self.num_subbands);
        let f = (l as f64 + 0.5) * self.width_hz();
        if f >= self.nyquist_rate_hz / 2.0 {
            f - self.nyquist_rate_hz
        } else {
            f
        }
    }

    /// Sub-band index containing frequency `f` (signed or DFT-ordered).
    pub fn subband_of(&self, f_hz: f64) -> usize {
        let b = self.nyquist_rate_hz;
        let wrapped = f_hz.rem_euclid(b);
        ((wrapped / self.width_hz()) as usize).min(self.num_subbands - 1)
    }

    /// DFT bin range of sub-band `l` for a length-`n` spectrum.
    pub fn bin_range(&self, l: usize, n: usize) -> std::ops::Range<usize> {
        assert!(n % self.num_subbands == 0, "spectrum length not divisible by L");
        let per = n / self.num_subbands;
        l * per..(l + 1) * per
    }
}

/// Compute the length-`n_out` spectrum of `narrowband` translated to be
/// centered at `carrier_hz` on the output grid. Energy is scaled so mean
/// power is preserved under the unitary DFT convention.
pub fn upconvert_spectrum(
    narrowband: &ComplexSignal,
    carrier_hz: f64,
    out_rate_hz: f64,
) -> Result<(Vec<Complex64>, f64), DspError> {
    if narrowband.is_empty() {
        return Err(DspError::EmptyInput);
    }
    if out_rate_hz < narrowband.rate_hz {
        return Err(DspError::RateTooLow { in_hz: narrowband.rate_hz, out_hz: out_rate_hz });
    }
    if carrier_hz.abs() > out_rate_hz / 2.0 {
        return Err(DspError::CarrierOutOfBand { carrier_hz, rate_hz: out_rate_hz });
    }
    let ratio = out_rate_hz / narrowband.rate_hz;
    let factor = ratio.round() as usize;
    if factor == 0 || (ratio - factor as f64).abs() > 1e-9 {
        return Err(DspError::NonIntegerResample { in_hz: narrowband.rate_hz, out_hz: out_rate_hz });
    }
    let n_in = narrowband.len();
    let n_out = n_in * factor;
    let spec_in = dft_slice(&narrowband.samples, false);
    let scale = (factor as f64).sqrt();
    // Carrier quantized to the nearest output bin.
    let k_c = (carrier_hz / out_rate_hz * n_out as f64).round() as i64;
    let mut spec_out = vec![Complex64::new(0.0, 0.0); n_out];
    let half = n_in as i64 / 2;
    for (k, &v) in spec_in.iter().enumerate() {
        let ks = if (k as i64) < (n_in as i64 - half) { k as i64 } else { k as i64 - n_in as i64 };
        let out_idx = (ks + k_c).rem_euclid(n_out as i64) as usize;
        spec_out[out_idx] = v * scale;
    }
    Ok((spec_out, out_rate_hz))
}

/// Translate a narrowband signal to `carrier_hz` on a dense output grid.
///
/// The output rate must be an integer multiple of the input rate and the
/// carrier must lie within the output band.
pub fn upconvert(
    narrowband: &ComplexSignal,
    carrier_hz: f64,
    out_rate_hz: f64,
) -> Result<ComplexSignal, DspError> {
    let (spec, rate) = upconvert_spectrum(narrowband, carrier_hz, out_rate_hz)?;
    Ok(ComplexSignal { samples: dft_slice(&spec, true), rate_hz: rate })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::apply_channel;
    use rand::{Rng, SeedableRng};

    fn rand_signal(rng: &mut impl Rng, n: usize, rate: f64) -> ComplexSignal {
        let samples =
            (0..n).map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)).collect();
        ComplexSignal { samples, rate_hz: rate }
    }

    #[test]
    fn dc_tone_lands_at_carrier_bin() {
        let x = ComplexSignal { samples: vec![Complex64::new(1.0, 0.0); 200], rate_hz: 20e6 };
        let y = upconvert(&x, 125e6, 2e9).unwrap();
        let spec = dft_slice(&y.samples, false);
        let peak = spec
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.norm().partial_cmp(&b.1.norm()).unwrap())
            .unwrap()
            .0;
        let expected = (125e6 / 2e9 * spec.len() as f64).round() as usize;
        assert!((peak as i64 - expected as i64).abs() <= 1, "peak {peak} expected {expected}");
    }

    #[test]
    fn emissions_land_in_labeled_subbands() {
        let grid = SubbandGrid::new(2e9, 40);
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(11);
        let x = rand_signal(&mut rng, 960, 20e6);
        for (carrier, subband) in [(25e6, 0usize), (75e6, 1usize)] {
            let y = upconvert(&x, carrier, 2e9).unwrap();
            let spec = dft_slice(&y.samples, false);
            let total: f64 = spec.iter().map(|v| v.norm_sqr()).sum();
            let band: f64 =
                spec[grid.bin_range(subband, spec.len())].iter().map(|v| v.norm_sqr()).sum();
            assert!(band / total > 0.95, "band fraction {}", band / total);
            assert_eq!(grid.subband_of(carrier), subband);
        }
    }

    #[test]
    fn round_trip_against_time_domain_oracle() {
        // Independent oracle: time-domain mix-down, boxcar-windowed-sinc
        // low-pass, and decimation.
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(5);
        let n_in = 480;
        let rate_in = 20e6;
        let x_raw = rand_signal(&mut rng, n_in, rate_in);
        // Band-limit the test input away from the band edge first so the
        // oracle's own filter transition band cannot dominate the error.
        let x = {
            let mut spec = dft_slice(&x_raw.samples, false);
            let cut = n_in / 3;
            for k in cut..(n_in - cut) {
                spec[k] = Complex64::new(0.0, 0.0);
            }
            ComplexSignal { samples: dft_slice(&spec, true), rate_hz: rate_in }
        };
        let carrier = 125e6;
        let out_rate = 2e9;
        let up = upconvert(&x, carrier, out_rate).unwrap();
        // Oracle down-conversion.
        let factor = (out_rate / rate_in) as usize;
        let mixed: Vec<Complex64> = up
            .samples
            .iter()
            .enumerate()
            .map(|(n, &v)| {
                v * Complex64::from_polar(1.0, -std::f64::consts::TAU * carrier * n as f64 / out_rate)
            })
            .collect();
        // Windowed-sinc low-pass at the input Nyquist edge.
        let half = 8 * factor;
        let mut taps = Vec::with_capacity(2 * half + 1);
        for i in 0..(2 * half + 1) {
            let t = i as f64 - half as f64;
            let sinc = if t == 0.0 {
                1.0 / factor as f64
            } else {
                (std::f64::consts::PI * t / factor as f64).sin() / (std::f64::consts::PI * t)
            };
            let w = 0.54 - 0.46 * (std::f64::consts::TAU * i as f64 / (2 * half) as f64).cos();
            taps.push(sinc * w);
        }
        let mut down = Vec::with_capacity(n_in);
        for out_i in 0..n_in {
            let center = out_i * factor;
            let mut acc = Complex64::new(0.0, 0.0);
            for (ti, &h) in taps.iter().enumerate() {
                let idx = center as i64 + ti as i64 - half as i64;
                if idx >= 0 && (idx as usize) < mixed.len() {
                    acc += mixed[idx as usize] * h;
                }
            }
            down.push(acc * factor as f64);
        }
        // Correlation, ignoring filter edge transients.
        let m = n_in - 32;
        let mut num = Complex64::new(0.0, 0.0);
        let (mut ex, mut ey) = (0.0, 0.0);
        for i in 16..16 + m {
            num += down[i] * x.samples[i].conj();
            ex += x.samples[i].norm_sqr();
            ey += down[i].norm_sqr();
        }
        let corr = num.norm() / (ex * ey).sqrt();
        assert!(corr >= 0.999, "round-trip correlation {corr}");
    }

    #[test]
    fn upconvert_is_linear() {
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(8);
        let x = rand_signal(&mut rng, 240, 50e6);
        let y = rand_signal(&mut rng, 240, 50e6);
        let (a, b) = (Complex64::new(1.3, -0.4), Complex64::new(-0.7, 2.1));
        let combo = ComplexSignal {
            samples: x.samples.iter().zip(&y.samples).map(|(u, v)| a * u + b * v).collect(),
            rate_hz: 50e6,
        };
        let up_combo = upconvert(&combo, 275e6, 2e9).unwrap();
        let up_x = upconvert(&x, 275e6, 2e9).unwrap();
        let up_y = upconvert(&y, 275e6, 2e9).unwrap();
        for i in 0..up_combo.len() {
            let expect = a * up_x.samples[i] + b * up_y.samples[i];
            assert!((up_combo.samples[i] - expect).norm() < 1e-10);
        }
    }

    #[test]
    fn carrier_outside_band_rejected() {
        let x = ComplexSignal { samples: vec![Complex64::new(1.0, 0.0); 16], rate_hz: 20e6 };
        assert!(matches!(
            upconvert(&x, 1.5e9, 2e9),
            Err(DspError::CarrierOutOfBand { .. })
        ));
    }

    #[test]
    fn identity_when_rates_match_and_dc() {
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(13);
        let x = rand_signal(&mut rng, 64, 1e6);
        let y = upconvert(&x, 0.0, 1e6).unwrap();
        for (a, b) in x.samples.iter().zip(&y.samples) {
            assert!((a - b).norm() < 1e-12);
        }
        let _ = apply_channel(&x, &crate::dsp::ChannelSpec::identity(), 0);
    }
}
