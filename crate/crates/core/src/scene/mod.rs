//! Multiband scene synthesis: Nyquist-rate frames with per-emission
//! metadata and occupancy labels, plus dataset persistence.

mod compose;
mod dataset;
mod gaussian;

pub use compose::{compose_scene, emission_signal};
pub use dataset::{DatasetHeader, DatasetReader, DatasetWriter, FrameMeta, PayloadKind};
pub use gaussian::gaussian_scene;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codec::Protocol;
use crate::coset::{coset_sample, CosetError, CosetPattern, CosetSampleSet};
use crate::dsp::{ComplexSignal, SubbandGrid};

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("{m} emissions exceed the {grid}-carrier grid")]
    TooManyEmissions { m: usize, grid: usize },
    #[error("frame length {n} not divisible by {l} sub-bands")]
    BadFrameLength { n: usize, l: usize },
    #[error("invalid scenario: {0}")]
    InvalidSpec(String),
    #[error("dataset i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("corrupt dataset: {0}")]
    Corrupt(String),
    #[error(transparent)]
    Coset(#[from] CosetError),
    #[error("serialization: {0}")]
    Serde(String),
}

/// Channel family drawn per emission.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelFamily {
    /// No fading (CFO and noise still apply).
    Ideal,
    /// 3-path fading: Rician for DVB-S2 emissions (satellite links are
    /// line-of-sight), an even Rician/Rayleigh draw for Wi-Fi.
    Multipath,
}

/// Scenario parameters for scene synthesis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub nyquist_rate_hz: f64,
    pub num_subbands: usize,
    pub frame_duration_s: f64,
    pub num_emissions: usize,
    /// Relative draw weights for (DVB-S2, non-HT Wi-Fi, HT Wi-Fi).
    pub protocol_weights: [f64; 3],
    pub amplitude_range: (f64, f64),
    pub cfo_bound_hz: f64,
    /// SNR drawn uniformly from this range; `None` means noise-free.
    pub snr_range_db: Option<(f64, f64)>,
    pub channel: ChannelFamily,
    /// Probability that an emission's header region lies fully inside the
    /// frame window; otherwise only payload is visible (no-header class).
    pub header_in_window_prob: f64,
    /// Carriers are drawn without replacement from sub-band centers
    /// `{(k+1/2)·B/L | 0 ≤ k < carrier_grid_size}`.
    pub carrier_grid_size: usize,
    /// Nominal per-emission bandwidth used for Landau-rate accounting.
    pub nominal_emission_bw_hz: f64,
}

impl Default for ScenarioSpec {
    fn default() -> Self {
        Self {
            nyquist_rate_hz: 2e9,
            num_subbands: 40,
            frame_duration_s: 48e-6,
            num_emissions: 6,
            protocol_weights: [1.0, 1.0, 1.0],
            amplitude_range: (0.5, 1.0),
            cfo_bound_hz: 200e3,
            snr_range_db: Some((0.0, 10.0)),
            channel: ChannelFamily::Multipath,
            header_in_window_prob: 1.0,
            carrier_grid_size: 16,
            nominal_emission_bw_hz: 40e6,
        }
    }
}

impl ScenarioSpec {
    pub fn validate(&self) -> Result<(), SceneError> {
        if self.num_emissions > self.carrier_grid_size {
            return Err(SceneError::TooManyEmissions {
                m: self.num_emissions,
                grid: self.carrier_grid_size,
            });
        }
        if self.carrier_grid_size > self.num_subbands {
            return Err(SceneError::InvalidSpec("carrier grid exceeds sub-band count".into()));
        }
        let n = self.frame_len();
        if n % self.num_subbands != 0 {
            return Err(SceneError::BadFrameLength { n, l: self.num_subbands });
        }
        if self.amplitude_range.0 > self.amplitude_range.1 || self.amplitude_range.0 <= 0.0 {
            return Err(SceneError::InvalidSpec("bad amplitude range".into()));
        }
        if !(0.0..=1.0).contains(&self.header_in_window_prob) {
            return Err(SceneError::InvalidSpec("header_in_window_prob outside [0,1]".into()));
        }
        if self.protocol_weights.iter().sum::<f64>() <= 0.0 {
            return Err(SceneError::InvalidSpec("protocol weights sum to zero".into()));
        }
        Ok(())
    }

    pub fn frame_len(&self) -> usize {
        (self.nyquist_rate_hz * self.frame_duration_s).round() as usize
    }

    /// Measurement columns per coset stream.
    pub fn n_per_coset(&self) -> usize {
        self.frame_len() / self.num_subbands
    }

    pub fn grid(&self) -> SubbandGrid {
        SubbandGrid::new(self.nyquist_rate_hz, self.num_subbands)
    }

    /// Landau sum Σ = M × nominal bandwidth (the sum of actual signal
    /// bandwidths; the sub-band-width alternative `M·B/L` is reported
    /// separately by the harness).
    pub fn landau_sum_hz(&self) -> f64 {
        self.num_emissions as f64 * self.nominal_emission_bw_hz
    }

    /// Noise variance per Nyquist sample for the drawn SNR: the in-band
    /// noise power of one sub-band equals `10^(-snr/10)` relative to a
    /// unit-power emission.
    pub fn noise_variance(&self, snr_db: f64) -> f64 {
        self.num_subbands as f64 * 10f64.powf(-snr_db / 10.0)
    }

    /// The universe of sub-band indices carriers may occupy.
    pub fn carrier_universe(&self) -> Vec<usize> {
        (0..self.carrier_grid_size).collect()
    }
}

/// One emission's ground-truth metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmissionMeta {
    pub carrier_index: usize,
    pub protocol: Protocol,
    /// Unencoded header bits (7 / 24 / 48), LSB-first per field.
    pub header_bits: Vec<u8>,
    /// Start of the header region within the frame, seconds.
    pub header_offset_s: f64,
    pub header_in_window: bool,
    pub amplitude: f64,
    pub cfo_hz: f64,
    /// RRC roll-off for DVB-S2 emissions, 0 otherwise.
    pub rolloff: f64,
    /// Sub-seed used for this emission's channel and payload draws.
    pub seed: u64,
}

/// A synthesized Nyquist-rate frame with labels.
#[derive(Debug, Clone)]
pub struct MultibandFrame {
    pub nyquist: ComplexSignal,
    pub emissions: Vec<EmissionMeta>,
    pub occupancy: Vec<bool>,
    pub snr_db: Option<f64>,
    pub seed: u64,
}

impl MultibandFrame {
    pub fn coset_sample(&self, pattern: &CosetPattern) -> Result<CosetSampleSet, CosetError> {
        coset_sample(&self.nyquist, pattern)
    }

    pub fn occupied_subbands(&self) -> Vec<usize> {
        self.occupancy
            .iter()
            .enumerate()
            .filter_map(|(i, &o)| if o { Some(i) } else { None })
            .collect()
    }

    pub fn meta(&self, index: u64) -> FrameMeta {
        FrameMeta {
            index,
            seed: self.seed,
            snr_db: self.snr_db,
            occupancy: self.occupied_subbands(),
            emissions: self.emissions.clone(),
        }
    }
}
