//! The three inference model families (spectrum sensor, protocol
//! identifier, header decoder) plus rule-based protocol identification
//! used as the labeling oracle and fallback.

mod models;
mod rules;

pub use models::{
    preprocess_coset, preprocess_subband, DecoderArch, HeaderDecoderModel, IdentifierArch,
    ProtocolIdentifierModel, SensorArch, SpectrumSensorModel,
};
pub use rules::{identify_protocol_rules, RuleDiagnostics, RuleIdentification, RuleThresholds};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codec::Protocol;

/// Closed classification set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProtocolClass {
    DvbS2,
    WifiNonHt,
    WifiHt,
    NoHeader,
}

impl ProtocolClass {
    pub const ALL: [ProtocolClass; 4] = [
        ProtocolClass::DvbS2,
        ProtocolClass::WifiNonHt,
        ProtocolClass::WifiHt,
        ProtocolClass::NoHeader,
    ];

    pub fn index(self) -> usize {
        Self::ALL.iter().position(|&c| c == self).unwrap()
    }

    pub fn from_index(i: usize) -> Self {
        Self::ALL[i]
    }

    pub fn from_protocol(p: Protocol) -> Self {
        match p {
            Protocol::DvbS2 => ProtocolClass::DvbS2,
            Protocol::WifiNonHt => ProtocolClass::WifiNonHt,
            Protocol::WifiHt => ProtocolClass::WifiHt,
        }
    }
}

#[derive(Debug, Error)]
pub enum InspectError {
    #[error("input shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error(transparent)]
    Nn(#[from] crate::nn::NnError),
    #[error("architecture stamp does not describe a {expected} model: {detail}")]
    WrongArch { expected: &'static str, detail: String },
}
