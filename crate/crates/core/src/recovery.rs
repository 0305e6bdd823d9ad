//! Support-conditioned least-squares recovery, the SOMP baseline,
//! sub-band reconstruction and recovery metrics.
//!
//! The recovery step solves `min ‖Y − A_S·X̃‖` once per frame via a QR
//! factorization of the selected columns; with `|S| ≤ P`, full-rank `A_S`
//! and the true support contained in `S`, noise-free recovery is exact.

use num_complex::Complex64;
use thiserror::Error;

use crate::coset::SpectrumMatrix;
use crate::dsp::{dft_slice, ComplexSignal};
use crate::linalg::{cond, CMat, Lstsq};

#[derive(Debug, Error)]
pub enum RecoveryError {
    #[error("support of size {s} exceeds the {p} measurements")]
    SupportTooLarge { s: usize, p: usize },
    #[error("A_S is rank-deficient (cond = {cond:.3e})")]
    RankDeficient { cond: f64 },
    #[error("sub-band {0} is not in the recovered support")]
    SubbandNotInSupport(usize),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

/// Per-sub-band occupancy probabilities and the decision threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct SupportEstimate {
    pub probs: Vec<f64>,
    pub theta: f64,
}

impl SupportEstimate {
    pub fn new(probs: Vec<f64>, theta: f64) -> Self {
        assert!(theta > 0.0 && theta < 1.0, "theta must lie in (0,1)");
        Self { probs, theta }
    }

    /// Oracle estimate built from ground-truth occupancy: probabilities
    /// pinned to 0.99 / 0.01 for pipeline testing.
    pub fn oracle(occupancy: &[bool]) -> Self {
        Self {
            probs: occupancy.iter().map(|&o| if o { 0.99 } else { 0.01 }).collect(),
            theta: 0.5,
        }
    }

    /// Thresholded support `S = {j : probs_j > theta}`.
    pub fn support(&self) -> Vec<usize> {
        self.probs
            .iter()
            .enumerate()
            .filter_map(|(j, &p)| if p > self.theta { Some(j) } else { None })
            .collect()
    }
}

/// Output of the support-conditioned least-squares recovery.
#[derive(Debug, Clone)]
pub struct RecoveryResult {
    /// Recovered rows, one per support index (|S| × N).
    pub x_s: CMat,
    pub support: Vec<usize>,
    pub cond_a_s: f64,
    /// Frobenius residual ‖Y − A_S·X_S‖.
    pub residual: f64,
    /// Total sub-band count of the scenario.
    pub num_subbands: usize,
    pub nyquist_rate_hz: f64,
}

impl RecoveryResult {
    pub fn row_of(&self, subband: usize) -> Option<&[Complex64]> {
        self.support.iter().position(|&l| l == subband).map(|i| self.x_s.row(i))
    }

    /// Expand to a full L×N spectrum matrix with zeros off the support.
    pub fn to_spectrum(&self) -> SpectrumMatrix {
        let n = self.x_s.cols;
        let mut x = CMat::zeros(self.num_subbands, n);
        for (i, &l) in self.support.iter().enumerate() {
            for k in 0..n {
                x.set(l, k, self.x_s.at(i, k));
            }
        }
        SpectrumMatrix { x, nyquist_rate_hz: self.nyquist_rate_hz }
    }
}

/// Threshold the support estimate, select the corresponding columns of
/// `A`, and solve the least-squares recovery.
pub fn algorithm1_recover(
    y: &CMat,
    a: &CMat,
    estimate: &SupportEstimate,
    nyquist_rate_hz: f64,
) -> Result<RecoveryResult, RecoveryError> {
    let p = a.rows;
    if y.rows != p {
        return Err(RecoveryError::DimensionMismatch(format!(
            "Y has {} rows, A has {p}",
            y.rows
        )));
    }
    if estimate.probs.len() != a.cols {
        return Err(RecoveryError::DimensionMismatch(format!(
            "estimate length {} vs L = {}",
            estimate.probs.len(),
            a.cols
        )));
    }
    let support = estimate.support();
    if support.len() > p {
        return Err(RecoveryError::SupportTooLarge { s: support.len(), p });
    }
    if support.is_empty() {
        return Ok(RecoveryResult {
            x_s: CMat::zeros(0, y.cols),
            support,
            cond_a_s: 1.0,
            residual: y.frobenius_norm(),
            num_subbands: a.cols,
            nyquist_rate_hz,
        });
    }
    let a_s = a.select_cols(&support);
    let c = cond(&a_s);
    if !c.is_finite() || c > 1e12 {
        return Err(RecoveryError::RankDeficient { cond: c });
    }
    let x_s = Lstsq::new(&a_s).solve_mat(y);
    let ax = a_s.matmul(&x_s);
    let mut resid = 0.0;
    for i in 0..y.rows {
        for k in 0..y.cols {
            resid += (y.at(i, k) - ax.at(i, k)).norm_sqr();
        }
    }
    Ok(RecoveryResult {
        x_s,
        support,
        cond_a_s: c,
        residual: resid.sqrt(),
        num_subbands: a.cols,
        nyquist_rate_hz,
    })
}

/// Simultaneous orthogonal matching pursuit: greedily pick the column with
/// the largest aggregate residual correlation, re-project, repeat.
pub fn somp(y: &CMat, a: &CMat, k_max: usize) -> Vec<usize> {
    let p = a.rows;
    let l = a.cols;
    assert!(k_max >= 1 && k_max <= p, "k_max must lie in 1..=P");
    let y_norm = y.frobenius_norm();
    if y_norm == 0.0 {
        return Vec::new();
    }
    let mut support: Vec<usize> = Vec::new();
    let mut residual = y.clone();
    for _ in 0..k_max {
        let mut best: Option<(f64, usize)> = None;
        for col in 0..l {
            if support.contains(&col) {
                continue;
            }
            // ‖a_colᴴ R‖ (column norms of A are all equal).
            let mut score = 0.0;
            for k in 0..residual.cols {
                let mut dot = Complex64::new(0.0, 0.0);
                for i in 0..p {
                    dot += a.at(i, col).conj() * residual.at(i, k);
                }
                score += dot.norm_sqr();
            }
            if best.map_or(true, |(s, _)| score > s) {
                best = Some((score, col));
            }
        }
        let (_, col) = best.expect("at least one unselected column");
        support.push(col);
        support.sort_unstable();
        let a_s = a.select_cols(&support);
        let x = Lstsq::new(&a_s).solve_mat(y);
        let ax = a_s.matmul(&x);
        for i in 0..p {
            for k in 0..y.cols {
                residual.set(i, k, y.at(i, k) - ax.at(i, k));
            }
        }
        if residual.frobenius_norm() < 1e-12 * y_norm {
            break;
        }
    }
    support
}

/// Shift one spectrum row to baseband: bin `m` of the output takes row bin
/// `(m + N/2) mod N`, putting the sub-band center at DC.
fn row_to_baseband(row: &[Complex64], scale: f64) -> Vec<Complex64> {
    let n = row.len();
    let shifted: Vec<Complex64> =
        (0..n).map(|m| row[(m + n / 2) % n] * scale).collect();
    dft_slice(&shifted, true)
}

/// Reconstruct the complex baseband time series of one recovered sub-band
/// at rate `B/L`, centered on the sub-band carrier.
pub fn reconstruct_subband(
    result: &RecoveryResult,
    subband: usize,
) -> Result<ComplexSignal, RecoveryError> {
    let row = result.row_of(subband).ok_or(RecoveryError::SubbandNotInSupport(subband))?;
    let scale = 1.0 / (result.num_subbands as f64).sqrt();
    Ok(ComplexSignal {
        samples: row_to_baseband(row, scale),
        rate_hz: result.nyquist_rate_hz / result.num_subbands as f64,
    })
}

/// Same baseband shift applied to a ground-truth spectrum row (labeling
/// oracle and test helper).
pub fn subband_time_series(x: &SpectrumMatrix, subband: usize) -> Vec<Complex64> {
    let scale = 1.0 / (x.num_subbands() as f64).sqrt();
    row_to_baseband(x.x.row(subband), scale)
}

/// Relative recovery MSE against the sampled (noisy) truth, and the
/// reference MSE between noisy and clean truth. Both are computed over
/// the union of the recovered support and the clean signal's support;
/// missed rows count their full energy as error.
#[derive(Debug, Clone, Copy)]
pub struct RecoveryMse {
    pub mse_rel: f64,
    pub reference_mse: f64,
}

pub fn recovery_mse(
    result: &RecoveryResult,
    truth: &SpectrumMatrix,
    clean_truth: &SpectrumMatrix,
) -> RecoveryMse {
    let l = truth.num_subbands();
    let n = truth.n();
    let clean_total: f64 = (0..l).map(|r| clean_truth.row_energy(r)).sum();
    let row_active =
        |r: usize| -> bool { clean_truth.row_energy(r) > 1e-9 * clean_total.max(1e-300) };
    let mut union: Vec<usize> = (0..l)
        .filter(|&r| row_active(r) || result.support.contains(&r))
        .collect();
    if union.is_empty() {
        union = (0..l).collect();
    }
    let mut err = 0.0;
    let mut truth_energy = 0.0;
    let mut ref_err = 0.0;
    let mut clean_energy = 0.0;
    for &r in &union {
        let t_row = truth.x.row(r);
        let c_row = clean_truth.x.row(r);
        let rec_row = result.row_of(r);
        for k in 0..n {
            let rec = rec_row.map_or(Complex64::new(0.0, 0.0), |row| row[k]);
            err += (rec - t_row[k]).norm_sqr();
            truth_energy += t_row[k].norm_sqr();
            ref_err += (t_row[k] - c_row[k]).norm_sqr();
            clean_energy += c_row[k].norm_sqr();
        }
    }
    RecoveryMse {
        mse_rel: err / truth_energy.max(1e-300),
        reference_mse: ref_err / clean_energy.max(1e-300),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coset::{
        coset_sample, ground_truth_spectrum, to_measurement_domain, CosetPattern,
    };
    use crate::scene::{compose_scene, ScenarioSpec};

    #[test]
    fn one_column_least_squares_example() {
        // L=4, P=2, c=[0,1], S={2}: A_S = (1/4)·[1, -1]ᵀ.
        let pattern = CosetPattern::new(4, vec![0, 1]).unwrap();
        let a = pattern.measurement_matrix();
        assert!((a.at(0, 2) - Complex64::new(0.25, 0.0)).norm() < 1e-15);
        assert!((a.at(1, 2) - Complex64::new(-0.25, 0.0)).norm() < 1e-12);
        let n = 3;
        let mut y = CMat::zeros(2, n);
        for k in 0..n {
            y.set(0, k, Complex64::new(0.25, 0.0));
            y.set(1, k, Complex64::new(-0.25, 0.0));
        }
        let probs = vec![0.0, 0.0, 0.9, 0.0];
        let est = SupportEstimate::new(probs, 0.5);
        let rec = algorithm1_recover(&y, &a, &est, 4.0).unwrap();
        assert_eq!(rec.support, vec![2]);
        for k in 0..n {
            assert!((rec.x_s.at(0, k) - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        }
        assert!(rec.residual < 1e-12);
    }

    #[test]
    fn support_too_large_rejected() {
        let pattern = CosetPattern::new(8, vec![0, 3]).unwrap();
        let a = pattern.measurement_matrix();
        let y = CMat::zeros(2, 4);
        // θ = 0.5 keeps |S| = 3 > P = 2.
        let est = SupportEstimate::new(vec![0.9, 0.8, 0.7, 0.1, 0.0, 0.0, 0.0, 0.0], 0.5);
        assert!(matches!(
            algorithm1_recover(&y, &a, &est, 8.0),
            Err(RecoveryError::SupportTooLarge { s: 3, p: 2 })
        ));
    }

    fn oracle_recover_frame(
        spec: &ScenarioSpec,
        seed: u64,
        p: usize,
    ) -> (RecoveryResult, SpectrumMatrix) {
        let frame = compose_scene(spec, seed).unwrap();
        let pattern = CosetPattern::low_coherence(spec.num_subbands, p, &spec.carrier_universe());
        let y = coset_sample(&frame.nyquist, &pattern).unwrap();
        let ym = to_measurement_domain(&y);
        let a = pattern.measurement_matrix();
        let est = SupportEstimate::oracle(&frame.occupancy);
        let rec = algorithm1_recover(&ym, &a, &est, spec.nyquist_rate_hz).unwrap();
        let truth = ground_truth_spectrum(&frame.nyquist, spec.num_subbands).unwrap();
        (rec, truth)
    }

    #[test]
    fn noise_free_oracle_recovery_is_exact() {
        let spec = ScenarioSpec { snr_range_db: None, ..Default::default() };
        for seed in [3u64, 17, 31] {
            let (rec, truth) = oracle_recover_frame(&spec, seed, 8);
            let mse = recovery_mse(&rec, &truth, &truth);
            assert!(mse.mse_rel < 1e-18, "seed {seed}: mse {}", mse.mse_rel);
            assert_eq!(rec.support.len(), 6);
        }
    }

    #[test]
    fn monotonicity_enlarging_support_never_hurts() {
        let spec = ScenarioSpec { snr_range_db: None, ..Default::default() };
        let frame = compose_scene(&spec, 11).unwrap();
        let pattern = CosetPattern::low_coherence(40, 8, &spec.carrier_universe());
        let y = coset_sample(&frame.nyquist, &pattern).unwrap();
        let ym = to_measurement_domain(&y);
        let a = pattern.measurement_matrix();
        let mut probs: Vec<f64> =
            frame.occupancy.iter().map(|&o| if o { 0.99 } else { 0.01 }).collect();
        let rec6 = algorithm1_recover(
            &ym,
            &a,
            &SupportEstimate::new(probs.clone(), 0.5),
            spec.nyquist_rate_hz,
        )
        .unwrap();
        // Add two supersets rows.
        let mut added = 0;
        for j in 0..40 {
            if probs[j] < 0.5 && added < 2 {
                probs[j] = 0.99;
                added += 1;
            }
        }
        let rec8 = algorithm1_recover(
            &ym,
            &a,
            &SupportEstimate::new(probs, 0.5),
            spec.nyquist_rate_hz,
        )
        .unwrap();
        assert!(rec8.residual <= rec6.residual + 1e-9);
    }

    #[test]
    fn somp_single_active_row_exhaustive() {
        // Noise-free 1-sparse instances recover the right row for every
        // possible position.
        let pattern = CosetPattern::new(12, vec![0, 2, 5, 7]).unwrap();
        let a = pattern.measurement_matrix();
        let n = 16;
        for active in 0..12usize {
            let mut x = CMat::zeros(12, n);
            for k in 0..n {
                x.set(
                    active,
                    k,
                    Complex64::new(1.0 + k as f64, 0.5 * k as f64),
                );
            }
            let y = a.matmul(&x);
            let support = somp(&y, &a, 1);
            assert_eq!(support, vec![active]);
        }
    }

    #[test]
    fn somp_zero_input_empty_support() {
        let pattern = CosetPattern::new(8, vec![0, 1, 4]).unwrap();
        let a = pattern.measurement_matrix();
        let y = CMat::zeros(3, 5);
        assert!(somp(&y, &a, 3).is_empty());
    }

    #[test]
    fn somp_matches_best_subset_on_small_instances() {
        use rand::{Rng, SeedableRng};
        // L ≤ 8, P ≤ 4, 1-2 active rows, noise-free.
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(5);
        for trial in 0..30 {
            let l = 6 + (trial % 3);
            let pattern = CosetPattern::random(l, 4, trial as u64);
            let a = pattern.measurement_matrix();
            let k_active = 1 + (trial % 2);
            let mut rows: Vec<usize> = (0..l).collect();
            use rand::seq::SliceRandom;
            rows.shuffle(&mut rng);
            let active = &rows[..k_active];
            let n = 8;
            let mut x = CMat::zeros(l, n);
            for &r in active {
                for k in 0..n {
                    x.set(
                        r,
                        k,
                        Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5),
                    );
                }
            }
            let y = a.matmul(&x);
            let mut got = somp(&y, &a, k_active);
            got.sort_unstable();
            let mut want = active.to_vec();
            want.sort_unstable();
            // Exhaustive best-subset residual check: SOMP must match the
            // minimal-residual subset (which is the true support here).
            assert_eq!(got, want, "trial {trial}");
        }
    }

    #[test]
    fn landau_boundary_exact_at_s_equals_p() {
        let spec = ScenarioSpec { snr_range_db: None, ..Default::default() };
        let (rec, truth) = oracle_recover_frame(&spec, 23, 6);
        let mse = recovery_mse(&rec, &truth, &truth);
        assert!(mse.mse_rel < 1e-18, "mse at |S|=P: {}", mse.mse_rel);
        // At |S| > P the error path is taken.
        let frame = compose_scene(&spec, 23).unwrap();
        let pattern = CosetPattern::low_coherence(40, 5, &spec.carrier_universe());
        let y = coset_sample(&frame.nyquist, &pattern).unwrap();
        let ym = to_measurement_domain(&y);
        let a = pattern.measurement_matrix();
        let est = SupportEstimate::oracle(&frame.occupancy);
        assert!(matches!(
            algorithm1_recover(&ym, &a, &est, 2e9),
            Err(RecoveryError::SupportTooLarge { s: 6, p: 5 })
        ));
    }

    #[test]
    fn reconstruct_subband_errors_and_zero_row() {
        let rec = RecoveryResult {
            x_s: CMat::zeros(1, 8),
            support: vec![3],
            cond_a_s: 1.0,
            residual: 0.0,
            num_subbands: 8,
            nyquist_rate_hz: 8.0,
        };
        let sig = reconstruct_subband(&rec, 3).unwrap();
        assert!(sig.samples.iter().all(|v| v.norm() == 0.0));
        assert!((sig.rate_hz - 1.0).abs() < 1e-12);
        assert!(matches!(
            reconstruct_subband(&rec, 4),
            Err(RecoveryError::SubbandNotInSupport(4))
        ));
    }

    #[test]
    fn mse_definitions_at_extremes() {
        let spec = ScenarioSpec { snr_range_db: None, ..Default::default() };
        let (rec, truth) = oracle_recover_frame(&spec, 41, 8);
        // Perfect recovery → 0.
        let mse = recovery_mse(&rec, &truth, &truth);
        assert!(mse.mse_rel < 1e-18);
        // Empty support → 1 (all signal energy missed).
        let empty = RecoveryResult {
            x_s: CMat::zeros(0, truth.n()),
            support: vec![],
            cond_a_s: 1.0,
            residual: 0.0,
            num_subbands: truth.num_subbands(),
            nyquist_rate_hz: 2e9,
        };
        let mse = recovery_mse(&empty, &truth, &truth);
        assert!((mse.mse_rel - 1.0).abs() < 1e-12);
    }
}
