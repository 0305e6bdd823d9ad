//! Unitary DFT wrappers.
//!
//! Both directions are scaled by `1/sqrt(n)` so that Parseval holds exactly
//! and the measurement model `Y = A·X` keeps clean scaling. Plans are cached
//! per thread; arbitrary lengths (mixed-radix or Bluestein) are supported.

use std::cell::RefCell;

use num_complex::Complex64;
use rustfft::FftPlanner;

use super::{ComplexSignal, DspError};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// Unitary DFT of a raw slice. Panics on empty input; the public entry
/// point [`dft`] reports that case as an error instead.
pub fn dft_slice(x: &[Complex64], inverse: bool) -> Vec<Complex64> {
    assert!(!x.is_empty(), "dft of empty slice");
    let mut buf = x.to_vec();
    PLANNER.with(|p| {
        let mut planner = p.borrow_mut();
        let plan = if inverse {
            planner.plan_fft_inverse(buf.len())
        } else {
            planner.plan_fft_forward(buf.len())
        };
        plan.process(&mut buf);
    });
    let scale = 1.0 / (buf.len() as f64).sqrt();
    for v in &mut buf {
        *v *= scale;
    }
    buf
}

/// Unitary DFT (or inverse DFT) of a signal. The sampling rate is carried
/// through unchanged.
pub fn dft(signal: &ComplexSignal, inverse: bool) -> Result<ComplexSignal, DspError> {
    if signal.is_empty() {
        return Err(DspError::EmptyInput);
    }
    Ok(ComplexSignal {
        samples: dft_slice(&signal.samples, inverse),
        rate_hz: signal.rate_hz,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    /// Direct O(n²) DFT used as an independent oracle on short lengths.
    fn dft_direct(x: &[Complex64], inverse: bool) -> Vec<Complex64> {
        let n = x.len();
        let sign = if inverse { 1.0 } else { -1.0 };
        let scale = 1.0 / (n as f64).sqrt();
        (0..n)
            .map(|k| {
                let mut acc = Complex64::new(0.0, 0.0);
                for (m, &v) in x.iter().enumerate() {
                    let ang = sign * std::f64::consts::TAU * (k * m) as f64 / n as f64;
                    acc += v * Complex64::from_polar(1.0, ang);
                }
                acc * scale
            })
            .collect()
    }

    fn rand_vec(rng: &mut impl Rng, n: usize) -> Vec<Complex64> {
        (0..n).map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)).collect()
    }

    #[test]
    fn impulse_gives_constant_spectrum() {
        let mut x = vec![Complex64::new(0.0, 0.0); 4];
        x[0] = Complex64::new(1.0, 0.0);
        let y = dft_slice(&x, false);
        for v in y {
            assert!((v - Complex64::new(0.5, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn round_trip_identity_mixed_radix_length() {
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(1);
        // 96000 = 2^8 · 3 · 5^3 exercises the mixed-radix path.
        let x = rand_vec(&mut rng, 96000);
        let y = dft_slice(&dft_slice(&x, false), true);
        let num: f64 = x.iter().zip(&y).map(|(a, b)| (a - b).norm_sqr()).sum();
        let den: f64 = x.iter().map(|a| a.norm_sqr()).sum();
        assert!((num / den).sqrt() < 1e-12);
    }

    #[test]
    fn matches_direct_summation_oracle_and_parseval() {
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(2);
        for trial in 0..1000 {
            let n = 1 + (trial % 64);
            let x = rand_vec(&mut rng, n);
            let fast = dft_slice(&x, false);
            let slow = dft_direct(&x, false);
            for (a, b) in fast.iter().zip(&slow) {
                assert!((a - b).norm() < 1e-9, "n={n}");
            }
            let ex: f64 = x.iter().map(|v| v.norm_sqr()).sum();
            let ey: f64 = fast.iter().map(|v| v.norm_sqr()).sum();
            assert!((ex.sqrt() - ey.sqrt()).abs() < 1e-12 * ex.sqrt().max(1.0), "n={n}");
        }
    }

    #[test]
    fn empty_input_rejected() {
        let s = ComplexSignal { samples: vec![], rate_hz: 1.0 };
        assert!(matches!(dft(&s, false), Err(DspError::EmptyInput)));
    }
}
