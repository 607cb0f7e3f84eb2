//! Phase-matching quantum key distribution (PM-QKD) analysis.
//!
//! The crate covers the whole numerical pipeline for a PM-QKD link:
//!
//! * [`model`]: closed-form channel and detection formulas (yields, gains,
//!   per-phase-group bit error rates, discrete phase randomization).
//! * [`decoy`]: single-photon and phase-error estimation, both asymptotic
//!   and with finite-size Chernoff bounds, plus the [`decoy::TallyTable`]
//!   that carries observed counts.
//! * [`rates`]: key rates for PM-QKD (asymptotic and finite), the MDI-QKD
//!   baseline and the PLOB repeaterless bound, with distance scans.
//! * [`montecarlo`]: a round-level simulator of the practical protocol that
//!   produces tally tables for the estimator.
//!
//! All probabilities are plain `f64`. Intensities are always the total
//! intensity sent by both parties, each arm carrying half.

// `!(x > 0.0)` is used on purpose: it rejects NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod decoy;
pub mod error;
pub mod format;
pub mod math;
pub mod model;
pub mod montecarlo;
pub mod params;
pub mod rates;

pub use error::{Error, Result};
pub use params::{ChannelParams, IntensitySetting, ProtocolParams, SettingProbabilities};
