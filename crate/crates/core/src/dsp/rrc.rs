//! Square-root raised-cosine pulse shaping.

use super::DspError;

/// Square-root raised-cosine filter parameters.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct RrcSpec {
    pub rolloff: f64,
    pub span_symbols: usize,
    pub samples_per_symbol: usize,
}

impl RrcSpec {
    pub fn new(rolloff: f64, span_symbols: usize, samples_per_symbol: usize) -> Self {
        Self { rolloff, span_symbols, samples_per_symbol }
    }
}

/// RRC impulse response at time `t` in symbol units, unit symbol period.
///
/// The t = 0 and t = ±1/(4β) singular points are evaluated by their
/// analytic limits.
pub fn rrc_continuous(t: f64, rolloff: f64) -> f64 {
    let b = rolloff;
    if t.abs() < 1e-10 {
        return 1.0 - b + 4.0 * b / std::f64::consts::PI;
    }
    let sing = 1.0 / (4.0 * b);
    if (t.abs() - sing).abs() < 1e-9 {
        let a = std::f64::consts::PI / (4.0 * b);
        return (b / 2f64.sqrt())
            * ((1.0 + 2.0 / std::f64::consts::PI) * a.sin()
                + (1.0 - 2.0 / std::f64::consts::PI) * a.cos());
    }
    let pi_t = std::f64::consts::PI * t;
    let num = (pi_t * (1.0 - b)).sin() + 4.0 * b * t * (pi_t * (1.0 + b)).cos();
    let den = pi_t * (1.0 - (4.0 * b * t).powi(2));
    num / den
}

/// Generate unit-energy RRC taps. Tap count is `span·sps + 1` (odd), taps
/// are even-symmetric.
pub fn rrc_taps(spec: &RrcSpec) -> Result<Vec<f64>, DspError> {
    if spec.rolloff <= 0.0 || spec.rolloff >= 1.0 {
        return Err(DspError::InvalidRolloff(spec.rolloff));
    }
    if spec.span_symbols < 4 || spec.samples_per_symbol < 2 {
        return Err(DspError::InvalidRrcSize {
            span: spec.span_symbols,
            sps: spec.samples_per_symbol,
        });
    }
    let n = spec.span_symbols * spec.samples_per_symbol + 1;
    let mid = (n - 1) as f64 / 2.0;
    let mut taps: Vec<f64> = (0..n)
        .map(|k| {
            let t = (k as f64 - mid) / spec.samples_per_symbol as f64;
            rrc_continuous(t, spec.rolloff)
        })
        .collect();
    // Force exact even symmetry against rounding asymmetries, then
    // normalize to unit energy.
    for k in 0..n / 2 {
        let avg = 0.5 * (taps[k] + taps[n - 1 - k]);
        taps[k] = avg;
        taps[n - 1 - k] = avg;
    }
    let energy: f64 = taps.iter().map(|h| h * h).sum();
    let scale = 1.0 / energy.sqrt();
    for h in &mut taps {
        *h *= scale;
    }
    Ok(taps)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn taps_even_symmetric_and_unit_energy() {
        let taps = rrc_taps(&RrcSpec::new(0.25, 8, 4)).unwrap();
        assert_eq!(taps.len(), 33);
        for k in 0..taps.len() {
            assert_eq!(taps[k], taps[taps.len() - 1 - k]);
        }
        let e: f64 = taps.iter().map(|h| h * h).sum();
        assert!((e - 1.0).abs() < 1e-12);
    }

    #[test]
    fn matched_pair_satisfies_nyquist_isi_criterion() {
        // Numeric convolution oracle: cascade of two identical RRC filters
        // sampled at symbol instants must have negligible ISI.
        for &rolloff in &[0.2, 0.25, 0.35] {
            let sps = 4;
            let taps = rrc_taps(&RrcSpec::new(rolloff, 32, sps)).unwrap();
            let n = taps.len();
            let mut rc = vec![0.0f64; 2 * n - 1];
            for i in 0..n {
                for j in 0..n {
                    rc[i + j] += taps[i] * taps[j];
                }
            }
            let peak_idx = n - 1;
            let peak = rc[peak_idx];
            let mut k = 1;
            while peak_idx + k * sps < rc.len() {
                let v = rc[peak_idx + k * sps].abs();
                assert!(v < 1e-3 * peak, "rolloff {rolloff} ISI at {k}: {}", v / peak);
                k += 1;
            }
        }
    }

    #[test]
    fn rolloff_out_of_range_rejected() {
        assert!(rrc_taps(&RrcSpec::new(0.0, 8, 4)).is_err());
        assert!(rrc_taps(&RrcSpec::new(1.0, 8, 4)).is_err());
        assert!(rrc_taps(&RrcSpec::new(0.25, 2, 4)).is_err());
    }

    #[test]
    fn singular_points_finite() {
        // t = 1/(4β) hits the denominator zero; must use the analytic limit.
        let spec = RrcSpec::new(0.25, 8, 4);
        let taps = rrc_taps(&spec).unwrap();
        assert!(taps.iter().all(|h| h.is_finite()));
        let v = rrc_continuous(1.0 / (4.0 * 0.25), 0.25);
        assert!(v.is_finite());
        // Check the limit against a nearby evaluation.
        let v_near = rrc_continuous(1.0 / (4.0 * 0.25) + 1e-6, 0.25);
        assert!((v - v_near).abs() < 1e-4);
    }
}
