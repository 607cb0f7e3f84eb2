//! Monte Carlo simulation of the practical PM-QKD protocol.
//!
//! Each round both parties pick an intensity setting, a phase slice and a key
//! bit; the pulses interfere at an honest midpoint with fiber loss, dark
//! counts, misalignment and an optional phase drift. Rounds with matched
//! settings are sifted into phase groups and counted in a [`TallyTable`].
//!
//! Two engines produce the same distribution of tallies. The round engine
//! draws every round and is the reference. The cell engine draws the counts
//! of each (setting, phase difference, parity) cell directly from their
//! multinomial law, which costs the same for any number of rounds.
//!
//! The emitted photon number of every clicked round is recorded in a
//! separate [`GroundTruth`] so estimates can be checked against it; it never
//! enters the tally table.

mod cell;
mod physics;
mod round;
mod sift;

pub use physics::{
    detector_click_probs, left_fraction, misalignment_flip_probability, outcome_classes,
    output_intensities, ClickProbs, OutcomeClasses, PortClasses,
};
pub use sift::{group_of, is_bit_error, phase_difference, sift_round, Click, RoundRecord, Sifted};

use rand::distr::Distribution;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::time::Instant;

use crate::decoy::TallyTable;
use crate::error::{Error, Result};
use crate::params::{ChannelParams, IntensitySetting, ProtocolParams};

/// Default number of rounds per batch (one RNG stream each).
pub const DEFAULT_BATCH_SIZE: u64 = 1 << 20;

/// Largest round count accepted; keeps `rounds` exactly representable as `f64`.
pub const MAX_ROUNDS: f64 = 9_007_199_254_740_992.0;

/// Phase drift on Bob's pulse relative to Alice's.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DriftModel {
    #[default]
    None,
    /// Constant offset in radians.
    FixedOffset { phi: f64 },
    /// Gaussian random walk with standard deviation `sigma` radians per round,
    /// starting at zero.
    RandomWalk { sigma: f64 },
}

/// Default random-walk step. No drift rate is given for the setup being
/// modelled; this value is a placeholder.
pub const DEFAULT_RANDOM_WALK_SIGMA: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Engine {
    /// Draws every round.
    #[default]
    Round,
    /// Draws cell counts from their multinomial law; no random-walk drift.
    Cell,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub channel: ChannelParams,
    /// `protocol.rounds` is the number of simulated rounds and must be an integer.
    pub protocol: ProtocolParams,
    pub seed: u64,
    #[serde(default)]
    pub drift: DriftModel,
    #[serde(default = "default_batch_size")]
    pub batch_size: u64,
    #[serde(default)]
    pub engine: Engine,
}

fn default_batch_size() -> u64 {
    DEFAULT_BATCH_SIZE
}

impl SimConfig {
    pub fn new(channel: ChannelParams, protocol: ProtocolParams, seed: u64) -> Self {
        SimConfig {
            channel,
            protocol,
            seed,
            drift: DriftModel::None,
            batch_size: DEFAULT_BATCH_SIZE,
            engine: Engine::Round,
        }
    }

    pub fn rounds(&self) -> u64 {
        self.protocol.rounds as u64
    }

    pub fn validate(&self) -> Result<()> {
        self.channel.validate()?;
        self.protocol.validate()?;
        let n = self.protocol.rounds;
        if !((1.0..=MAX_ROUNDS).contains(&n) && n.fract() == 0.0) {
            return Err(Error::invalid(
                "rounds",
                "must be an integer in [1, 2^53] for simulation",
            ));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch_size", "must be >= 1"));
        }
        match self.drift {
            DriftModel::None => {}
            DriftModel::FixedOffset { phi } => {
                if !phi.is_finite() {
                    return Err(Error::invalid("drift", "offset must be finite"));
                }
            }
            DriftModel::RandomWalk { sigma } => {
                if !(sigma >= 0.0 && sigma.is_finite()) {
                    return Err(Error::invalid("drift", "sigma must be a finite value >= 0"));
                }
                if self.engine == Engine::Cell {
                    return Err(Error::invalid(
                        "engine",
                        "the cell engine does not support random-walk drift",
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Phase-slice index nearest to a drift phase, used as `j_delta`.
pub fn compensation_index(phi: f64, slices: u32) -> u32 {
    let d = slices as f64;
    ((phi * d / (2.0 * PI)).round().rem_euclid(d) as u32) % slices
}

/// Clicked rounds by emitted photon number.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhotonCounts {
    pub single_photon: u64,
    /// Odd photon numbers of three or more.
    pub odd_multi: u64,
    /// Even photon numbers, zero included.
    pub even: u64,
}

impl PhotonCounts {
    pub fn total(&self) -> u64 {
        self.single_photon + self.odd_multi + self.even
    }

    fn add(&mut self, other: &PhotonCounts) {
        self.single_photon += other.single_photon;
        self.odd_multi += other.odd_multi;
        self.even += other.even;
    }

    fn record(&mut self, k: u64) {
        match k {
            1 => self.single_photon += 1,
            k if k % 2 == 1 => self.odd_multi += 1,
            _ => self.even += 1,
        }
    }
}

/// Photon-number tags of the sifted clicks, per setting and phase group.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruth {
    cells: [Vec<PhotonCounts>; 3],
}

impl GroundTruth {
    pub fn new(groups: usize) -> Self {
        GroundTruth {
            cells: std::array::from_fn(|_| vec![PhotonCounts::default(); groups]),
        }
    }

    pub fn groups(&self) -> usize {
        self.cells[0].len()
    }

    pub fn cell(&self, setting: IntensitySetting, group: usize) -> &PhotonCounts {
        &self.cells[setting.index()][group]
    }

    fn cell_mut(&mut self, setting: IntensitySetting, group: usize) -> &mut PhotonCounts {
        &mut self.cells[setting.index()][group]
    }

    /// Sum over the listed groups of one setting.
    pub fn sum(&self, setting: IntensitySetting, groups: &[usize]) -> PhotonCounts {
        let mut total = PhotonCounts::default();
        for &g in groups {
            if let Some(c) = self.cells[setting.index()].get(g) {
                total.add(c);
            }
        }
        total
    }

    /// Fraction of clicks from even photon numbers, or `None` without clicks.
    pub fn even_fraction(&self, setting: IntensitySetting, groups: &[usize]) -> Option<f64> {
        let c = self.sum(setting, groups);
        (c.total() > 0).then(|| c.even as f64 / c.total() as f64)
    }

    /// Fraction of clicks not from exactly one photon, or `None` without clicks.
    pub fn non_single_fraction(&self, setting: IntensitySetting, groups: &[usize]) -> Option<f64> {
        let c = self.sum(setting, groups);
        (c.total() > 0).then(|| 1.0 - c.single_photon as f64 / c.total() as f64)
    }

    pub fn merge(&mut self, other: &GroundTruth) -> Result<()> {
        if other.groups() != self.groups() {
            return Err(Error::invalid(
                "groups",
                "cannot merge ground truth with different group counts",
            ));
        }
        for (mine, theirs) in self.cells.iter_mut().zip(&other.cells) {
            for (a, b) in mine.iter_mut().zip(theirs) {
                a.add(b);
            }
        }
        Ok(())
    }
}

/// Round counts outside the tally table.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimStats {
    pub rounds: u64,
    /// Rounds where the two settings differ; never tallied.
    pub mismatched: u64,
    /// Matched rounds where both detectors clicked.
    pub double_clicks: u64,
}

impl SimStats {
    fn add(&mut self, other: &SimStats) {
        self.rounds += other.rounds;
        self.mismatched += other.mismatched;
        self.double_clicks += other.double_clicks;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimOutput {
    pub tallies: TallyTable,
    pub truth: GroundTruth,
    pub stats: SimStats,
}

impl SimOutput {
    fn empty(slices: u32) -> Self {
        let tallies = TallyTable::new(slices);
        let truth = GroundTruth::new(tallies.groups());
        SimOutput {
            tallies,
            truth,
            stats: SimStats::default(),
        }
    }

    fn merge(&mut self, other: &SimOutput) -> Result<()> {
        self.tallies.merge(&other.tallies)?;
        self.truth.merge(&other.truth)?;
        self.stats.add(&other.stats);
        Ok(())
    }
}

/// Runs the simulation described by `config`.
pub fn simulate(config: &SimConfig) -> Result<SimOutput> {
    config.validate()?;
    let out = match config.engine {
        Engine::Round => round::run(config)?,
        Engine::Cell => cell::run(config)?,
    };
    log::debug!(
        "simulated {} rounds: {} mismatched, {} double clicks",
        out.stats.rounds,
        out.stats.mismatched,
        out.stats.double_clicks
    );
    Ok(out)
}

/// Contents of the JSON file written next to a simulated tally table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimMetadata {
    pub version: String,
    pub seed: u64,
    pub config: SimConfig,
    pub runtime_seconds: f64,
    pub stats: SimStats,
    pub ground_truth: GroundTruth,
}

impl SimMetadata {
    pub fn from_json(text: &str) -> Result<Self> {
        let meta: SimMetadata =
            serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        meta.config.validate()?;
        if meta
            .ground_truth
            .cells
            .iter()
            .any(|c| c.len() != meta.config.protocol.groups())
        {
            return Err(Error::Parse(
                "ground truth group count does not match phase_slices".into(),
            ));
        }
        Ok(meta)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Parse(e.to_string()))
    }
}

/// Runs `config` and returns the output with its metadata record.
pub fn simulate_with_metadata(config: &SimConfig) -> Result<(SimOutput, SimMetadata)> {
    let start = Instant::now();
    let out = simulate(config)?;
    let meta = SimMetadata {
        version: env!("CARGO_PKG_VERSION").to_string(),
        seed: config.seed,
        config: *config,
        runtime_seconds: start.elapsed().as_secs_f64(),
        stats: out.stats,
        ground_truth: out.truth.clone(),
    };
    Ok((out, meta))
}

/// Draws a setting index from cumulative probabilities.
fn draw_setting<R: Rng>(rng: &mut R, cumulative: &[f64; 3]) -> IntensitySetting {
    let u: f64 = rng.random();
    if u < cumulative[0] {
        IntensitySetting::Vac
    } else if u < cumulative[1] {
        IntensitySetting::W
    } else {
        IntensitySetting::S
    }
}

fn cumulative(config: &SimConfig) -> [f64; 3] {
    let p = config.protocol.intensity_probabilities;
    [p.vac, p.vac + p.w, 1.0]
}

/// Poisson draw; inversion for the small means that occur per round.
fn poisson<R: Rng>(rng: &mut R, mean: f64) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    if mean > 30.0 {
        let d = rand_distr::Poisson::new(mean).expect("finite positive mean");
        return d.sample(rng) as u64;
    }
    let u: f64 = rng.random();
    let mut p = (-mean).exp();
    let mut cdf = p;
    let mut k = 0u64;
    while u > cdf && p > 0.0 {
        k += 1;
        p *= mean / k as f64;
        cdf += p;
    }
    k
}
