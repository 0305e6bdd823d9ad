//! Complex-baseband signal primitives shared by every other module.

mod channel;
mod fft;
mod mix;
mod rrc;

pub use channel::{apply_channel, ChannelSpec, Fading};
pub use fft::{dft, dft_slice};
pub use mix::{upconvert, upconvert_spectrum, SubbandGrid};
pub use rrc::{rrc_continuous, rrc_taps, RrcSpec};

use num_complex::Complex64;
use thiserror::Error;

/// Complex baseband samples at a fixed sampling rate.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSignal {
    pub samples: Vec<Complex64>,
    pub rate_hz: f64,
}

impl ComplexSignal {
    pub fn new(samples: Vec<Complex64>, rate_hz: f64) -> Self {
        assert!(rate_hz > 0.0, "sampling rate must be positive");
        Self { samples, rate_hz }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.rate_hz
    }

    /// Mean squared magnitude over all samples.
    pub fn mean_power(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        self.samples.iter().map(|s| s.norm_sqr()).sum::<f64>() / self.samples.len() as f64
    }

    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|s| s.norm_sqr()).sum::<f64>()
    }
}

#[derive(Debug, Error)]
pub enum DspError {
    #[error("zero-length input")]
    EmptyInput,
    #[error("roll-off factor {0} outside (0, 1)")]
    InvalidRolloff(f64),
    #[error("RRC span {span} symbols / {sps} samples-per-symbol below minimum (4, 2)")]
    InvalidRrcSize { span: usize, sps: usize },
    #[error("carrier {carrier_hz} Hz outside [-{half} , {half}] Hz", half = rate_hz / 2.0)]
    CarrierOutOfBand { carrier_hz: f64, rate_hz: f64 },
    #[error("output rate {out_hz} Hz is not an integer multiple of input rate {in_hz} Hz")]
    NonIntegerResample { in_hz: f64, out_hz: f64 },
    #[error("output rate {out_hz} Hz below input rate {in_hz} Hz")]
    RateTooLow { in_hz: f64, out_hz: f64 },
}
