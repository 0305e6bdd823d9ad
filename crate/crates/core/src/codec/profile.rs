//! Protocol profiles: the deterministic parameters an encoder/decoder pair
//! must agree on. Profiles serialize as structured text so captures can be
//! reproduced from config alone.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Protocol {
    DvbS2,
    WifiNonHt,
    WifiHt,
}

impl Protocol {
    /// Number of unencoded header bits carried by this protocol.
    pub fn header_bits(&self) -> usize {
        match self {
            Protocol::DvbS2 => 7,
            Protocol::WifiNonHt => 24,
            Protocol::WifiHt => 48,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WifiProfile {
    /// Baseband sample rate of the generated waveform.
    pub sample_rate_hz: f64,
    /// Seed of the payload scrambler (7-bit LFSR state).
    pub scrambler_seed: u8,
    pub ht: bool,
}

impl WifiProfile {
    pub fn non_ht() -> Self {
        Self { sample_rate_hz: 20e6, scrambler_seed: 0x5d, ht: false }
    }

    pub fn ht() -> Self {
        Self { ht: true, ..Self::non_ht() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DvbS2Profile {
    pub symbol_rate_hz: f64,
    pub samples_per_symbol: usize,
    pub rolloff: f64,
    /// RRC span in symbols used by the pulse-shaping filter.
    pub rrc_span: usize,
    /// 64-bit PLS scrambling sequence, MSB applied to the first codeword
    /// bit. Interop with real captures is out of scope; the default is a
    /// fixed documented constant.
    pub pls_scramble: u64,
}

pub const DEFAULT_PLS_SCRAMBLE: u64 = 0x719d_83c9_5342_2dfa;

impl DvbS2Profile {
    pub fn default_profile() -> Self {
        Self {
            symbol_rate_hz: 20e6,
            samples_per_symbol: 2,
            rolloff: 0.25,
            rrc_span: 16,
            pls_scramble: DEFAULT_PLS_SCRAMBLE,
        }
    }

    pub fn with_rolloff(rolloff: f64) -> Self {
        Self { rolloff, ..Self::default_profile() }
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.symbol_rate_hz * self.samples_per_symbol as f64
    }

    /// Scramble bit for PLS codeword position `i` (0..64).
    pub fn scramble_bit(&self, i: usize) -> u8 {
        ((self.pls_scramble >> (63 - i)) & 1) as u8
    }
}

/// A complete per-emission profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "protocol")]
pub enum ProtocolProfile {
    DvbS2(DvbS2Profile),
    WifiNonHt(WifiProfile),
    WifiHt(WifiProfile),
}

impl ProtocolProfile {
    pub fn protocol(&self) -> Protocol {
        match self {
            ProtocolProfile::DvbS2(_) => Protocol::DvbS2,
            ProtocolProfile::WifiNonHt(_) => Protocol::WifiNonHt,
            ProtocolProfile::WifiHt(_) => Protocol::WifiHt,
        }
    }

    pub fn sample_rate_hz(&self) -> f64 {
        match self {
            ProtocolProfile::DvbS2(p) => p.sample_rate_hz(),
            ProtocolProfile::WifiNonHt(p) | ProtocolProfile::WifiHt(p) => p.sample_rate_hz,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn profiles_round_trip_through_toml() {
        let profiles = vec![
            ProtocolProfile::DvbS2(DvbS2Profile::default_profile()),
            ProtocolProfile::WifiNonHt(WifiProfile::non_ht()),
            ProtocolProfile::WifiHt(WifiProfile::ht()),
        ];
        for p in profiles {
            let text = toml::to_string(&p).unwrap();
            let back: ProtocolProfile = toml::from_str(&text).unwrap();
            assert_eq!(p, back);
        }
    }
}
