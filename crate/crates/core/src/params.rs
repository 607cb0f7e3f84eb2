//! Channel and protocol parameters.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Default fiber loss in dB/km.
pub const DEFAULT_ATTENUATION_DB_PER_KM: f64 = 0.2;

/// The honest channel between each party and the untrusted midpoint.
///
/// The distance is the full Alice-Bob separation; the interfering station sits
/// in the middle, so each arm sees half of it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelParams {
    pub distance_km: f64,
    #[serde(default = "default_attenuation")]
    pub attenuation_db_per_km: f64,
    pub detector_efficiency: f64,
    /// Dark-count probability per pulse per detector.
    pub dark_count_rate: f64,
    /// System misalignment error rate.
    pub misalignment: f64,
}

fn default_attenuation() -> f64 {
    DEFAULT_ATTENUATION_DB_PER_KM
}

impl ChannelParams {
    /// Table I channel at the given distance and misalignment.
    pub fn table1(distance_km: f64, misalignment: f64) -> Self {
        ChannelParams {
            distance_km,
            attenuation_db_per_km: DEFAULT_ATTENUATION_DB_PER_KM,
            detector_efficiency: 0.2,
            dark_count_rate: 1e-8,
            misalignment,
        }
    }

    /// A zero-length channel whose per-arm transmittance is exactly `eta`.
    pub fn from_transmittance(eta: f64, dark_count_rate: f64, misalignment: f64) -> Self {
        ChannelParams {
            distance_km: 0.0,
            attenuation_db_per_km: DEFAULT_ATTENUATION_DB_PER_KM,
            detector_efficiency: eta,
            dark_count_rate,
            misalignment,
        }
    }

    pub fn at_distance(mut self, distance_km: f64) -> Self {
        self.distance_km = distance_km;
        self
    }

    /// Transmittance from one party to the midpoint, detector efficiency included.
    pub fn eta(&self) -> f64 {
        let arm_loss_db = self.attenuation_db_per_km * self.distance_km / 2.0;
        self.detector_efficiency * 10f64.powf(-arm_loss_db / 10.0)
    }

    /// Alice-to-Bob transmittance over the full distance.
    pub fn end_to_end_eta(&self, include_detector: bool) -> f64 {
        let loss = 10f64.powf(-self.attenuation_db_per_km * self.distance_km / 10.0);
        if include_detector {
            self.detector_efficiency * loss
        } else {
            loss
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.distance_km >= 0.0 && self.distance_km.is_finite()) {
            return Err(Error::invalid("distance_km", "must be a finite value >= 0"));
        }
        if !(self.attenuation_db_per_km > 0.0 && self.attenuation_db_per_km.is_finite()) {
            return Err(Error::invalid("attenuation_db_per_km", "must be > 0"));
        }
        if !(self.detector_efficiency > 0.0 && self.detector_efficiency <= 1.0) {
            return Err(Error::invalid("detector_efficiency", "must lie in (0, 1]"));
        }
        if !(0.0..0.5).contains(&self.dark_count_rate) {
            return Err(Error::invalid("dark_count_rate", "must lie in [0, 0.5)"));
        }
        if !(0.0..=0.5).contains(&self.misalignment) {
            return Err(Error::invalid("misalignment", "must lie in [0, 0.5]"));
        }
        if self.eta() <= 0.0 {
            return Err(Error::invalid(
                "distance_km",
                "transmittance underflows to zero",
            ));
        }
        Ok(())
    }
}

/// Decoy intensity setting chosen independently by each party.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IntensitySetting {
    Vac,
    W,
    S,
}

impl IntensitySetting {
    pub const ALL: [IntensitySetting; 3] = [
        IntensitySetting::Vac,
        IntensitySetting::W,
        IntensitySetting::S,
    ];

    pub fn index(self) -> usize {
        match self {
            IntensitySetting::Vac => 0,
            IntensitySetting::W => 1,
            IntensitySetting::S => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            IntensitySetting::Vac => "vac",
            IntensitySetting::W => "w",
            IntensitySetting::S => "s",
        }
    }
}

impl fmt::Display for IntensitySetting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for IntensitySetting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "vac" => Ok(IntensitySetting::Vac),
            "w" => Ok(IntensitySetting::W),
            "s" => Ok(IntensitySetting::S),
            other => Err(Error::Parse(format!("unknown intensity setting `{other}`"))),
        }
    }
}

/// Per-party probabilities of choosing each intensity setting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SettingProbabilities {
    pub vac: f64,
    pub w: f64,
    pub s: f64,
}

impl SettingProbabilities {
    pub fn get(&self, setting: IntensitySetting) -> f64 {
        match setting {
            IntensitySetting::Vac => self.vac,
            IntensitySetting::W => self.w,
            IntensitySetting::S => self.s,
        }
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.vac, self.w, self.s]
    }
}

impl Default for SettingProbabilities {
    fn default() -> Self {
        SettingProbabilities {
            vac: 0.1,
            w: 0.2,
            s: 0.7,
        }
    }
}

/// Failure-probability allocation for the finite-size estimator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
#[derive(Default)]
pub enum NAlpha {
    /// Smallest preset that keeps the total failure probability within `epsilon`.
    #[default]
    Auto,
    Fixed(f64),
}

/// Source and post-processing parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolParams {
    /// Total signal intensity; each arm sends `mu / 2`.
    pub mu: f64,
    /// Total weak-decoy intensity.
    pub nu: f64,
    pub phase_slices: u32,
    pub ec_efficiency: f64,
    pub rounds: f64,
    pub epsilon: f64,
    #[serde(default)]
    pub intensity_probabilities: SettingProbabilities,
    #[serde(default)]
    pub n_alpha: NAlpha,
}

impl ProtocolParams {
    /// Table I protocol parameters with `rounds` sent pulses.
    pub fn table1(rounds: f64) -> Self {
        ProtocolParams {
            mu: 0.1,
            nu: 0.02,
            phase_slices: 16,
            ec_efficiency: 1.1,
            rounds,
            epsilon: 1.7e-10,
            intensity_probabilities: SettingProbabilities::default(),
            n_alpha: NAlpha::Auto,
        }
    }

    pub fn groups(&self) -> usize {
        self.phase_slices as usize / 2
    }

    /// Total intensity of a setting.
    pub fn intensity(&self, setting: IntensitySetting) -> f64 {
        match setting {
            IntensitySetting::Vac => 0.0,
            IntensitySetting::W => self.nu,
            IntensitySetting::S => self.mu,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return Err(Error::invalid("mu", "must be > 0"));
        }
        if !(self.nu > 0.0 && self.nu < self.mu) {
            return Err(Error::invalid("nu", "must lie in (0, mu)"));
        }
        if self.phase_slices < 2 || !self.phase_slices.is_multiple_of(2) {
            return Err(Error::invalid(
                "phase_slices",
                "must be an even integer >= 2",
            ));
        }
        if !(self.ec_efficiency >= 1.0 && self.ec_efficiency.is_finite()) {
            return Err(Error::invalid("ec_efficiency", "must be >= 1"));
        }
        if !(self.rounds > 0.0 && self.rounds.is_finite()) {
            return Err(Error::invalid("rounds", "must be > 0"));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::invalid("epsilon", "must lie in (0, 1)"));
        }
        let p = self.intensity_probabilities.as_array();
        if p.iter().any(|&x| !(0.0..=1.0).contains(&x))
            || (p.iter().sum::<f64>() - 1.0).abs() > 1e-9
        {
            return Err(Error::invalid(
                "intensity_probabilities",
                "must be three probabilities summing to 1",
            ));
        }
        if let NAlpha::Fixed(n) = self.n_alpha {
            if !(n > 0.0 && n.is_finite()) {
                return Err(Error::invalid("n_alpha", "must be > 0"));
            }
        }
        Ok(())
    }
}
