//! Bit-exact encoders and rule-based decoders for DVB-S2 PL headers and
//! Wi-Fi non-HT/HT signaling fields. These generate scene content and act
//! as the ground-truth oracle that neural decoding is judged against.

pub mod bits;
pub mod convcode;
pub mod dvbs2;
pub mod interleave;
pub mod profile;
pub mod wifi;

pub use convcode::{conv_encode, viterbi_decode};
pub use dvbs2::{decode_dvbs2_header, encode_dvbs2_frame, pls_codeword, DvbS2Header};
pub use interleave::{deinterleave48, interleave48};
pub use profile::{DvbS2Profile, Protocol, ProtocolProfile, WifiProfile};
pub use wifi::{decode_wifi_header, encode_wifi_frame, WifiHtSig1, WifiLsig};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CodecError {
    #[error("field value {value} exceeds {bits}-bit width")]
    FieldOverflow { value: u32, bits: u32 },
    #[error("interleaver requires exactly 48 bits, got {0}")]
    BadInterleaveLength(usize),
    #[error("coded bit vector must have even length, got {0}")]
    OddCodedLength(usize),
    #[error("synchronization not found (peak metric {metric:.3} below threshold {threshold:.3})")]
    SyncNotFound { metric: f64, threshold: f64 },
    #[error("signal too short: {len} samples, need at least {need}")]
    SignalTooShort { len: usize, need: usize },
    #[error("sample rate {rate_hz} Hz incompatible with the OFDM grid")]
    IncompatibleRate { rate_hz: f64 },
}

/// A decoded header with its protocol tag and validity flags.
#[derive(Debug, Clone, PartialEq)]
pub struct HeaderRecord {
    pub header: DecodedHeader,
    /// Parity/consistency checks passed (always true for protocols without
    /// an embedded check; sync failures are reported as errors instead).
    pub valid: bool,
    /// Estimated start of the header region, in seconds from signal start.
    pub timing_s: f64,
    /// Estimated carrier frequency offset in Hz.
    pub cfo_hz: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum DecodedHeader {
    DvbS2(DvbS2Header),
    WifiNonHt(WifiLsig),
    WifiHt { lsig: WifiLsig, htsig: WifiHtSig1 },
}

impl HeaderRecord {
    /// The unencoded header bits this record carries (7 / 24 / 48).
    pub fn bits(&self) -> Vec<u8> {
        match &self.header {
            DecodedHeader::DvbS2(h) => h.to_bits().to_vec(),
            DecodedHeader::WifiNonHt(l) => l.to_bits().to_vec(),
            DecodedHeader::WifiHt { lsig, htsig } => {
                let mut v = lsig.to_bits().to_vec();
                v.extend_from_slice(&htsig.to_bits());
                v
            }
        }
    }
}
