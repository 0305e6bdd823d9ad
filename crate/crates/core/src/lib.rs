//! Sniffing wide, non-sparse multiband radio spectra from sub-Nyquist
//! multi-coset samples.
//!
//! The crate is organized around the processing pipeline:
//!
//! - [`dsp`]: complex-baseband primitives (transforms, pulse shaping,
//!   channel impairments, sub-band up/down conversion).
//! - [`codec`]: bit-exact encoders and rule-based decoders for DVB-S2 PL
//!   headers and Wi-Fi non-HT/HT signaling fields.
//! - [`scene`]: synthesis of Nyquist-rate multiband frames with occupancy
//!   labels, plus dataset persistence.
//! - [`coset`]: multi-coset sub-Nyquist sampling and the exact
//!   measurement-domain model `Y = A·X`.
//! - [`recovery`]: support-conditioned least-squares recovery, the SOMP
//!   baseline, sub-band reconstruction and recovery metrics.
//! - [`nn`]: a minimal reverse-mode autodiff stack (dense real tensors),
//!   the transformer layers used by the inference models, and AdamW.
//! - [`inspect`]: the spectrum sensor, protocol identifier and header
//!   decoder models, plus rule-based identification used as oracle.
//! - [`harness`]: CLI orchestration (dataset generation, training,
//!   evaluation, reporting).

pub mod codec;
pub mod coset;
pub mod dsp;
pub mod harness;
pub mod inspect;
pub mod linalg;
pub mod nn;
pub mod recovery;
pub mod scene;

pub use num_complex::Complex64;
