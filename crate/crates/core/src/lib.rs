//! Software model of an ADS1299-based EEG acquisition board.
//!
//! The crate follows the signal from a synthetic subject to the host:
//!
//! ```text
//! synth ─► electrode divider ─► bias loop ─► lead-off excitation ─► RC ─► PGA/ADC ─► frames
//!                                                                                   │
//!                       sensors (I2C board) ──────────────────────────────► wire (TCP, sessions)
//! ```
//!
//! Host-side processing (filters, spectra, detectors) lives in [`dsp`] and
//! electrode-skin impedance estimation in [`impedance`].

// `!(x > 0.0)` checks reject NaN along with out-of-range values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod ads1299;
pub mod afe;
pub mod config;
pub mod dsp;
pub mod impedance;
mod rate;
pub mod sensors;
pub mod synth;
pub mod wire;

pub use rate::{InvalidRate, SampleRate, CONVERTER_MAX_SPS};
