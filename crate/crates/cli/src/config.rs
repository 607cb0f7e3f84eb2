//! Layered configuration: defaults, then a preset, then the TOML file, then
//! flags. Every file key has a long flag of the same name.

use clap::{ArgAction, Args, ValueEnum};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use pmqkd::montecarlo::{DriftModel, Engine, SimConfig, DEFAULT_RANDOM_WALK_SIGMA};
use pmqkd::params::NAlpha;
use pmqkd::rates::{GroupSelection, PhaseErrorBound, PlobConvention, Protocol, ScanOptions};
use pmqkd::{ChannelParams, ProtocolParams};
use pmqkd_fock::VerifyOptions;

use crate::error::CliError;

/// Misalignment used when neither the file nor the flags set one.
pub const DEFAULT_MISALIGNMENT: f64 = 0.03;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
pub enum Preset {
    /// Table I with N = 1e12.
    #[serde(rename = "table1")]
    #[value(name = "table1")]
    Table1,
    /// Table I with N = 1e13.
    #[serde(rename = "table1-n13")]
    #[value(name = "table1-n13")]
    Table1N13,
}

impl Preset {
    /// Applies exactly the preset's values, leaving other fields alone.
    fn apply(self, channel: &mut ChannelParams, protocol: &mut ProtocolParams) {
        let table = ChannelParams::table1(0.0, 0.0);
        channel.dark_count_rate = table.dark_count_rate;
        channel.detector_efficiency = table.detector_efficiency;
        let rounds = match self {
            Preset::Table1 => 1e12,
            Preset::Table1N13 => 1e13,
        };
        let table = ProtocolParams::table1(rounds);
        protocol.ec_efficiency = table.ec_efficiency;
        protocol.phase_slices = table.phase_slices;
        protocol.epsilon = table.epsilon;
        protocol.rounds = rounds;
    }
}

/// `auto` or a fixed deviation preset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NAlphaArg {
    Fixed(f64),
    Named(NAlphaName),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NAlphaName {
    Auto,
}

impl FromStr for NAlphaArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s == "auto" {
            return Ok(NAlphaArg::Named(NAlphaName::Auto));
        }
        s.parse()
            .map(NAlphaArg::Fixed)
            .map_err(|_| format!("expected `auto` or a number, got `{s}`"))
    }
}

impl From<NAlphaArg> for NAlpha {
    fn from(a: NAlphaArg) -> Self {
        match a {
            NAlphaArg::Fixed(n) => NAlpha::Fixed(n),
            NAlphaArg::Named(NAlphaName::Auto) => NAlpha::Auto,
        }
    }
}

/// Phase groups used for the key: all of them, the positive-key ones, or a list.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GroupsArg {
    List(Vec<usize>),
    Named(GroupsName),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupsName {
    All,
    Auto,
}

impl FromStr for GroupsArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "all" => Ok(GroupsArg::Named(GroupsName::All)),
            "auto" => Ok(GroupsArg::Named(GroupsName::Auto)),
            _ => s
                .split(',')
                .map(|g| g.trim().parse::<usize>())
                .collect::<Result<Vec<_>, _>>()
                .map(GroupsArg::List)
                .map_err(|_| {
                    format!("expected `all`, `auto` or a comma-separated list of groups, got `{s}`")
                }),
        }
    }
}

impl fmt::Display for GroupsArg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GroupsArg::Named(GroupsName::All) => f.write_str("all"),
            GroupsArg::Named(GroupsName::Auto) => f.write_str("auto"),
            GroupsArg::List(l) => {
                let s: Vec<String> = l.iter().map(|g| g.to_string()).collect();
                f.write_str(&s.join(","))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum DriftKind {
    None,
    #[value(name = "fixed_offset")]
    FixedOffset,
    #[value(name = "random_walk")]
    RandomWalk,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum EngineArg {
    Round,
    Cell,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum BoundArg {
    #[value(name = "even_parity")]
    EvenParity,
    #[value(name = "single_photon")]
    SinglePhoton,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum PlobArg {
    #[value(name = "end_to_end")]
    EndToEnd,
    #[value(name = "channel_only")]
    ChannelOnly,
}

macro_rules! overlay {
    ($self:ident, $other:ident; $($field:ident),+) => {
        $(if $other.$field.is_some() {
            $self.$field = $other.$field.clone();
        })+
    };
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize, Args)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelSection {
    /// Alice-Bob distance in km.
    #[arg(long, alias = "distance_km")]
    pub distance_km: Option<f64>,
    /// Fiber loss in dB/km.
    #[arg(long, alias = "attenuation_db_per_km")]
    pub attenuation_db_per_km: Option<f64>,
    /// Detector efficiency eta_d
    #[arg(long, alias = "detector_efficiency")]
    pub detector_efficiency: Option<f64>,
    /// Dark-count probability per pulse per detector.
    #[arg(long, alias = "dark_count_rate")]
    pub dark_count_rate: Option<f64>,
    /// System misalignment error rate.
    #[arg(long, visible_alias = "e0")]
    pub misalignment: Option<f64>,
}

impl ChannelSection {
    fn overlay(&mut self, o: &Self) {
        overlay!(self, o; distance_km, attenuation_db_per_km, detector_efficiency, dark_count_rate, misalignment);
    }

    fn apply(&self, c: &mut ChannelParams) {
        c.distance_km = self.distance_km.unwrap_or(c.distance_km);
        c.attenuation_db_per_km = self
            .attenuation_db_per_km
            .unwrap_or(c.attenuation_db_per_km);
        c.detector_efficiency = self.detector_efficiency.unwrap_or(c.detector_efficiency);
        c.dark_count_rate = self.dark_count_rate.unwrap_or(c.dark_count_rate);
        c.misalignment = self.misalignment.unwrap_or(c.misalignment);
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize, Args)]
#[serde(default, deny_unknown_fields)]
pub struct ProtocolSection {
    /// Total signal intensity.
    #[arg(long)]
    pub mu: Option<f64>,
    /// Total weak-decoy intensity.
    #[arg(long)]
    pub nu: Option<f64>,
    /// Number of phase slices D; half of them are phase groups
    #[arg(long, alias = "phase_slices")]
    pub phase_slices: Option<u32>,
    /// Error-correction efficiency f.
    #[arg(long, alias = "ec_efficiency")]
    pub ec_efficiency: Option<f64>,
    /// Number of sent pulses N.
    #[arg(long)]
    pub rounds: Option<f64>,
    /// Total failure probability.
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Probability of choosing the vacuum setting.
    #[arg(long, alias = "p_vac")]
    pub p_vac: Option<f64>,
    /// Probability of choosing the weak-decoy setting
    #[arg(long, alias = "p_w")]
    pub p_w: Option<f64>,
    /// Probability of choosing the signal setting
    #[arg(long, alias = "p_s")]
    pub p_s: Option<f64>,
    /// Chernoff deviation preset: `auto` or a number.
    #[arg(long, alias = "n_alpha")]
    pub n_alpha: Option<NAlphaArg>,
}

impl ProtocolSection {
    fn overlay(&mut self, o: &Self) {
        overlay!(self, o; mu, nu, phase_slices, ec_efficiency, rounds, epsilon, p_vac, p_w, p_s, n_alpha);
    }

    fn apply(&self, p: &mut ProtocolParams) {
        p.mu = self.mu.unwrap_or(p.mu);
        p.nu = self.nu.unwrap_or(p.nu);
        p.phase_slices = self.phase_slices.unwrap_or(p.phase_slices);
        p.ec_efficiency = self.ec_efficiency.unwrap_or(p.ec_efficiency);
        p.rounds = self.rounds.unwrap_or(p.rounds);
        p.epsilon = self.epsilon.unwrap_or(p.epsilon);
        let q = &mut p.intensity_probabilities;
        q.vac = self.p_vac.unwrap_or(q.vac);
        q.w = self.p_w.unwrap_or(q.w);
        q.s = self.p_s.unwrap_or(q.s);
        if let Some(n) = self.n_alpha {
            p.n_alpha = n.into();
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize, Args)]
#[serde(default, deny_unknown_fields)]
pub struct SimSection {
    /// RNG seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Phase drift model between the two lasers
    #[arg(long, value_enum)]
    pub drift: Option<DriftKind>,
    /// Fixed drift offset in radians.
    #[arg(long, alias = "drift_phi")]
    pub drift_phi: Option<f64>,
    /// Random-walk step in radians per round.
    #[arg(long, alias = "drift_sigma")]
    pub drift_sigma: Option<f64>,
    /// Rounds per batch of the round engine.
    #[arg(long, alias = "batch_size")]
    pub batch_size: Option<u64>,
    /// Round-by-round sampling or per-cell multinomial sampling
    #[arg(long, value_enum)]
    pub engine: Option<EngineArg>,
}

impl SimSection {
    fn overlay(&mut self, o: &Self) {
        overlay!(self, o; seed, drift, drift_phi, drift_sigma, batch_size, engine);
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize, Args)]
#[serde(default, deny_unknown_fields)]
pub struct ScanSection {
    /// Comma-separated protocols: pm-asym, pm-finite, mdi, plob.
    #[arg(long, value_delimiter = ',')]
    pub protocols: Option<Vec<Protocol>>,
    /// Optimize intensities per distance.
    #[arg(long, action = ArgAction::Set)]
    pub optimize: Option<bool>,
    /// Phase groups: `all`, `auto` or a comma-separated list.
    #[arg(long)]
    pub groups: Option<GroupsArg>,
    /// Phase-error bound of the asymptotic PM rate
    #[arg(long, alias = "phase_error_bound", value_enum)]
    pub phase_error_bound: Option<BoundArg>,
    /// Transmittance entering the PLOB bound
    #[arg(long, value_enum)]
    pub plob: Option<PlobArg>,
    /// Locate PLOB crossings between grid points by bisection
    #[arg(long, alias = "refine_crossings", action = ArgAction::Set)]
    pub refine_crossings: Option<bool>,
    /// First distance of the grid in km
    #[arg(long, alias = "distance_start")]
    pub distance_start: Option<f64>,
    /// Last distance of the grid in km
    #[arg(long, alias = "distance_stop")]
    pub distance_stop: Option<f64>,
    /// Grid spacing in km
    #[arg(long, alias = "distance_step")]
    pub distance_step: Option<f64>,
}

impl ScanSection {
    fn overlay(&mut self, o: &Self) {
        overlay!(self, o; protocols, optimize, groups, phase_error_bound, plob, refine_crossings,
            distance_start, distance_stop, distance_step);
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize, Args)]
#[serde(default, deny_unknown_fields)]
pub struct VerifySection {
    /// Truncation for state vectors.
    #[arg(long, alias = "k_max")]
    pub k_max: Option<usize>,
    /// Truncation for dense density matrices.
    #[arg(long, alias = "dense_k_max")]
    pub dense_k_max: Option<usize>,
    /// Comma-separated intensities for the discrete-randomization checks.
    #[arg(long, value_delimiter = ',')]
    pub intensities: Option<Vec<f64>>,
    /// Comma-separated phase-slice counts.
    #[arg(long, value_delimiter = ',')]
    pub slices: Option<Vec<u32>>,
    /// Random states for the parity-eigenvector and mixture checks
    #[arg(long, alias = "random_states")]
    pub random_states: Option<usize>,
}

impl VerifySection {
    fn overlay(&mut self, o: &Self) {
        overlay!(self, o; k_max, dense_k_max, intensities, slices, random_states);
    }
}

/// Contents of a configuration file. Sections are named after the types they fill.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigFile {
    pub preset: Option<Preset>,
    #[serde(rename = "ChannelParams")]
    pub channel: ChannelSection,
    #[serde(rename = "ProtocolParams")]
    pub protocol: ProtocolSection,
    #[serde(rename = "SimConfig")]
    pub sim: SimSection,
    #[serde(rename = "ScanOptions")]
    pub scan: ScanSection,
    #[serde(rename = "VerifyOptions")]
    pub verify: VerifySection,
}

impl ConfigFile {
    /// Overwrites every field that `other` sets.
    pub fn overlay(&mut self, other: &ConfigFile) {
        overlay!(self, other; preset);
        self.channel.overlay(&other.channel);
        self.protocol.overlay(&other.protocol);
        self.sim.overlay(&other.sim);
        self.scan.overlay(&other.scan);
        self.verify.overlay(&other.verify);
    }
}

/// Parses configuration text. Unknown sections or keys are errors.
pub fn parse_config(text: &str) -> Result<ConfigFile, CliError> {
    toml::from_str(text).map_err(|e| CliError::Config(format!("config: {}", e.message())))
}

pub fn read_config(path: &Path) -> Result<ConfigFile, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
    parse_config(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

/// Distance grid of a scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistanceGrid {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl DistanceGrid {
    pub fn points(&self) -> Vec<f64> {
        let n = ((self.stop - self.start) / self.step + 1e-9).floor() as usize;
        (0..=n).map(|i| self.start + i as f64 * self.step).collect()
    }

    fn validate(&self) -> Result<(), CliError> {
        if !(self.start >= 0.0 && self.start.is_finite()) {
            return Err(CliError::invalid(
                "distance_start",
                "must be a finite value >= 0",
            ));
        }
        if !(self.stop >= self.start && self.stop.is_finite()) {
            return Err(CliError::invalid(
                "distance_stop",
                "must be finite and >= distance_start",
            ));
        }
        if !(self.step > 0.0 && (self.stop - self.start) / self.step <= 1e6) {
            return Err(CliError::invalid(
                "distance_step",
                "must be > 0 and give at most 1e6 points",
            ));
        }
        Ok(())
    }
}

/// The effective configuration after all layers are merged.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub preset: Option<Preset>,
    /// Channel, protocol and simulator settings.
    pub sim: SimConfig,
    pub scan: ScanOptions,
    pub distances: DistanceGrid,
    /// Groups as configured; scans default to `auto`, estimates to `all`.
    pub groups: Option<GroupsArg>,
    pub verify: VerifyOptions,
}

impl RunConfig {
    /// Merges `layers` (later wins) over the defaults, or over `base` when
    /// given. Nothing is validated here; see the `validate_*` methods.
    pub fn resolve(layers: &ConfigFile, base: Option<SimConfig>) -> Result<Self, CliError> {
        let mut sim = base.unwrap_or_else(|| {
            SimConfig::new(
                ChannelParams::table1(0.0, DEFAULT_MISALIGNMENT),
                ProtocolParams::table1(1e12),
                0,
            )
        });
        if let Some(p) = layers.preset {
            p.apply(&mut sim.channel, &mut sim.protocol);
        }
        layers.channel.apply(&mut sim.channel);
        layers.protocol.apply(&mut sim.protocol);

        let s = &layers.sim;
        sim.seed = s.seed.unwrap_or(sim.seed);
        sim.batch_size = s.batch_size.unwrap_or(sim.batch_size);
        if let Some(e) = s.engine {
            sim.engine = match e {
                EngineArg::Round => Engine::Round,
                EngineArg::Cell => Engine::Cell,
            };
        }
        let kind = s.drift.unwrap_or(match sim.drift {
            DriftModel::None => DriftKind::None,
            DriftModel::FixedOffset { .. } => DriftKind::FixedOffset,
            DriftModel::RandomWalk { .. } => DriftKind::RandomWalk,
        });
        sim.drift = match kind {
            DriftKind::None => DriftModel::None,
            DriftKind::FixedOffset => {
                let phi = match (s.drift_phi, sim.drift) {
                    (Some(phi), _) => phi,
                    (None, DriftModel::FixedOffset { phi }) => phi,
                    _ => {
                        return Err(CliError::invalid(
                            "drift_phi",
                            "is required for fixed_offset drift",
                        ))
                    }
                };
                DriftModel::FixedOffset { phi }
            }
            DriftKind::RandomWalk => {
                let sigma = match (s.drift_sigma, sim.drift) {
                    (Some(sigma), _) => sigma,
                    (None, DriftModel::RandomWalk { sigma }) => sigma,
                    _ => DEFAULT_RANDOM_WALK_SIGMA,
                };
                DriftModel::RandomWalk { sigma }
            }
        };

        let c = &layers.scan;
        let mut scan = ScanOptions::default();
        if let Some(p) = &c.protocols {
            scan.protocols = p.clone();
        }
        scan.optimize = c.optimize.unwrap_or(scan.optimize);
        scan.refine_crossings = c.refine_crossings.unwrap_or(scan.refine_crossings);
        if let Some(b) = c.phase_error_bound {
            scan.phase_error_bound = match b {
                BoundArg::EvenParity => PhaseErrorBound::EvenParity,
                BoundArg::SinglePhoton => PhaseErrorBound::SinglePhoton,
            };
        }
        if let Some(p) = c.plob {
            scan.plob = match p {
                PlobArg::EndToEnd => PlobConvention::EndToEnd,
                PlobArg::ChannelOnly => PlobConvention::ChannelOnly,
            };
        }
        let groups = c.groups.clone();
        scan.selection = match groups
            .as_ref()
            .unwrap_or(&GroupsArg::Named(GroupsName::Auto))
        {
            GroupsArg::Named(GroupsName::Auto) => GroupSelection::AutoPositive,
            GroupsArg::Named(GroupsName::All) => {
                GroupSelection::Explicit((0..sim.protocol.groups()).collect())
            }
            GroupsArg::List(l) => GroupSelection::Explicit(l.clone()),
        };
        let distances = DistanceGrid {
            start: c.distance_start.unwrap_or(0.0),
            stop: c.distance_stop.unwrap_or(500.0),
            step: c.distance_step.unwrap_or(5.0),
        };

        let v = &layers.verify;
        let mut verify = VerifyOptions {
            seed: sim.seed,
            ..VerifyOptions::default()
        };
        verify.k_max = v.k_max.unwrap_or(verify.k_max);
        verify.dense_k_max = v.dense_k_max.unwrap_or(verify.dense_k_max);
        if let Some(i) = &v.intensities {
            verify.intensities = i.clone();
        }
        if let Some(d) = &v.slices {
            verify.slices = d.clone();
        }
        verify.random_states = v.random_states.unwrap_or(verify.random_states);

        Ok(RunConfig {
            preset: layers.preset,
            sim,
            scan,
            distances,
            groups,
            verify,
        })
    }

    pub fn channel(&self) -> &ChannelParams {
        &self.sim.channel
    }

    pub fn protocol(&self) -> &ProtocolParams {
        &self.sim.protocol
    }

    pub fn validate_scan(&self) -> Result<(), CliError> {
        self.sim.channel.validate()?;
        self.sim.protocol.validate()?;
        self.distances.validate()?;
        if self.scan.protocols.is_empty() {
            return Err(CliError::invalid(
                "protocols",
                "must name at least one protocol",
            ));
        }
        self.validate_groups()
    }

    pub fn validate_simulation(&self) -> Result<(), CliError> {
        self.sim.validate()?;
        Ok(())
    }

    pub fn validate_estimate(&self) -> Result<(), CliError> {
        self.sim.protocol.validate()?;
        self.validate_groups()
    }

    pub fn validate_verify(&self) -> Result<(), CliError> {
        let v = &self.verify;
        if v.k_max < 2 || v.k_max > 120 {
            return Err(CliError::invalid("k_max", "must lie in [2, 120]"));
        }
        if v.dense_k_max < 2 || v.dense_k_max > 40 {
            return Err(CliError::invalid("dense_k_max", "must lie in [2, 40]"));
        }
        if v.intensities.is_empty() || v.intensities.iter().any(|&m| !(m > 0.0 && m <= 2.0)) {
            return Err(CliError::invalid(
                "intensities",
                "must be a non-empty list of values in (0, 2]",
            ));
        }
        if v.slices.is_empty() || v.slices.iter().any(|&d| d < 2 || d as usize > v.k_max) {
            return Err(CliError::invalid(
                "slices",
                "must be a non-empty list of values in [2, k_max]",
            ));
        }
        Ok(())
    }

    fn validate_groups(&self) -> Result<(), CliError> {
        if let Some(GroupsArg::List(l)) = &self.groups {
            let g = self.sim.protocol.groups();
            if l.is_empty() || l.iter().any(|&j| j >= g) {
                return Err(CliError::invalid(
                    "groups",
                    format!("must be a non-empty list of groups below {g}"),
                ));
            }
        }
        Ok(())
    }
}
