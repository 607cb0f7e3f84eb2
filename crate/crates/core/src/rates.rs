//! Key rates: PM-QKD (asymptotic and finite-size), the MDI-QKD baseline and
//! the PLOB repeaterless bound, plus rate-distance scans.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use crate::decoy::{
    asymptotic_estimate, asymptotic_q_parity, estimate_from_inputs, DecoyInputs, EstimateMethod,
    TallyTable,
};
use crate::error::{Error, Result};
use crate::format::sig12;
use crate::math::{bessel_i0m1, entropy_of_bound, logistic, maximize_1d, nelder_mead};
use crate::model::{bit_error_rate, gain_mu};
use crate::params::{ChannelParams, IntensitySetting, ProtocolParams, SettingProbabilities};

/// Upper end of the intensity search range.
pub const MAX_INTENSITY: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Protocol {
    #[serde(rename = "pm-asym")]
    PmAsymptotic,
    #[serde(rename = "pm-finite")]
    PmFinite,
    #[serde(rename = "mdi")]
    Mdi,
    #[serde(rename = "plob")]
    Plob,
}

impl Protocol {
    pub const ALL: [Protocol; 4] = [
        Protocol::PmAsymptotic,
        Protocol::PmFinite,
        Protocol::Mdi,
        Protocol::Plob,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Protocol::PmAsymptotic => "pm-asym",
            Protocol::PmFinite => "pm-finite",
            Protocol::Mdi => "mdi",
            Protocol::Plob => "plob",
        }
    }

    pub fn is_pm(self) -> bool {
        matches!(self, Protocol::PmAsymptotic | Protocol::PmFinite)
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Protocol {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Protocol::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| {
                Error::Parse(format!(
                    "unknown protocol `{s}` (expected pm-asym, pm-finite, mdi or plob)"
                ))
            })
    }
}

/// Which phase groups contribute key.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupSelection {
    /// Keep exactly the groups whose key term is positive.
    #[default]
    AutoPositive,
    Explicit(Vec<usize>),
}

/// Phase-error bound used by the asymptotic rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseErrorBound {
    /// `q_even`, one minus the odd-photon click fraction.
    #[default]
    EvenParity,
    /// `1 - q_1`, what a decoy estimate of the single-photon fraction can certify.
    SinglePhoton,
}

/// Transmittance fed to the PLOB bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlobConvention {
    /// Full Alice-Bob fiber times detector efficiency.
    #[default]
    EndToEnd,
    /// Fiber loss only.
    ChannelOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupContribution {
    pub j_s: usize,
    /// Bit error rate of the group.
    pub error_rate: f64,
    /// `1 - H(E^ph) - f H(E_j)`.
    pub contribution: f64,
    pub kept: bool,
}

/// Key rate of one protocol at one distance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolRate {
    pub protocol: Protocol,
    /// Key bits per sent pulse, never negative.
    pub rate: f64,
    pub eph: Option<f64>,
    pub per_group: Vec<GroupContribution>,
    pub method: Option<EstimateMethod>,
    /// Signal and weak-decoy intensities behind the rate, if any.
    pub mu: Option<f64>,
    pub nu: Option<f64>,
    pub probabilities: Option<SettingProbabilities>,
}

impl ProtocolRate {
    fn bare(protocol: Protocol, rate: f64) -> Self {
        ProtocolRate {
            protocol,
            rate,
            eph: None,
            per_group: Vec::new(),
            method: None,
            mu: None,
            nu: None,
            probabilities: None,
        }
    }

    pub fn groups_kept(&self) -> Vec<usize> {
        self.per_group
            .iter()
            .filter(|g| g.kept)
            .map(|g| g.j_s)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatePoint {
    pub distance_km: f64,
    pub rates: Vec<ProtocolRate>,
}

impl RatePoint {
    pub fn get(&self, protocol: Protocol) -> Option<&ProtocolRate> {
        self.rates.iter().find(|r| r.protocol == protocol)
    }

    pub fn rate(&self, protocol: Protocol) -> Option<f64> {
        self.get(protocol).map(|r| r.rate)
    }
}

fn key_terms(eph: f64, errors: &[f64], f: f64) -> Vec<f64> {
    let privacy = 1.0 - entropy_of_bound(eph);
    errors
        .iter()
        .map(|&e| privacy - f * entropy_of_bound(e))
        .collect()
}

fn contributions(
    errors: &[f64],
    terms: &[f64],
    kept: impl Fn(usize) -> bool,
) -> Vec<GroupContribution> {
    errors
        .iter()
        .zip(terms)
        .enumerate()
        .map(|(j, (&e, &t))| GroupContribution {
            j_s: j,
            error_rate: e,
            contribution: t,
            kept: kept(j),
        })
        .collect()
}

fn check_selection(selection: &GroupSelection, groups: usize) -> Result<()> {
    if let GroupSelection::Explicit(list) = selection {
        if list.is_empty() {
            return Err(Error::invalid("groups", "explicit group list is empty"));
        }
        if let Some(j) = list.iter().find(|&&j| j >= groups) {
            return Err(Error::invalid(
                "groups",
                format!("phase group {j} is out of range"),
            ));
        }
    }
    Ok(())
}

/// Signal-state bit error rate of every merged phase group.
pub fn group_error_rates(channel: &ChannelParams, params: &ProtocolParams) -> Result<Vec<f64>> {
    (0..params.groups() as u32)
        .map(|j| bit_error_rate(channel, params.mu, j, params.phase_slices))
        .collect()
}

/// Asymptotic PM-QKD rate at the intensities in `params`.
pub fn pm_rate_asymptotic(
    channel: &ChannelParams,
    params: &ProtocolParams,
    selection: &GroupSelection,
    bound: PhaseErrorBound,
) -> Result<ProtocolRate> {
    check_selection(selection, params.groups())?;
    let q = gain_mu(channel, params.mu);
    let eph = match bound {
        PhaseErrorBound::EvenParity => asymptotic_q_parity(channel, params.mu)?.1,
        PhaseErrorBound::SinglePhoton => asymptotic_estimate(channel, params)?.eph_upper,
    };
    let errors = group_error_rates(channel, params)?;
    let terms = key_terms(eph, &errors, params.ec_efficiency);
    let per_group = match selection {
        GroupSelection::AutoPositive => contributions(&errors, &terms, |j| terms[j] > 0.0),
        GroupSelection::Explicit(list) => contributions(&errors, &terms, |j| list.contains(&j)),
    };
    let sum: f64 = per_group
        .iter()
        .filter(|g| g.kept)
        .map(|g| g.contribution)
        .sum();
    let rate = (2.0 * q / params.phase_slices as f64 * sum).max(0.0);
    Ok(ProtocolRate {
        eph: Some(eph),
        per_group,
        method: Some(EstimateMethod::Asymptotic),
        mu: Some(params.mu),
        ..ProtocolRate::bare(Protocol::PmAsymptotic, rate)
    })
}

/// Finite-size PM-QKD rate from aggregated counts and per-group bit error rates.
///
/// With automatic selection the group set is iterated to a fixed point:
/// estimate the phase error for the current set, drop groups whose key term
/// is not positive, and repeat. When the data cannot support an estimate
/// (no signal clicks, or no `n_alpha` meets the budget) the rate is zero.
pub fn pm_rate_from_inputs(
    inputs: &DecoyInputs,
    errors: &[f64],
    params: &ProtocolParams,
    selection: &GroupSelection,
) -> Result<ProtocolRate> {
    let groups = inputs.groups();
    check_selection(selection, groups)?;
    let zero = |errors: &[f64]| ProtocolRate {
        eph: Some(1.0),
        per_group: contributions(
            errors,
            &key_terms(1.0, errors, params.ec_efficiency),
            |_| false,
        ),
        method: Some(EstimateMethod::FiniteChernoff),
        mu: Some(params.mu),
        nu: Some(params.nu),
        probabilities: Some(params.intensity_probabilities),
        ..ProtocolRate::bare(Protocol::PmFinite, 0.0)
    };
    let mut set: Vec<usize> = match selection {
        GroupSelection::AutoPositive => (0..groups).collect(),
        GroupSelection::Explicit(list) => list.clone(),
    };
    loop {
        let estimate = match estimate_from_inputs(inputs, params, &set) {
            Ok(e) => e,
            Err(Error::DegenerateData(_) | Error::BudgetExceeded { .. }) => {
                return Ok(zero(errors))
            }
            Err(e) => return Err(e),
        };
        let terms = key_terms(estimate.eph_upper, errors, params.ec_efficiency);
        let next: Vec<usize> = match selection {
            GroupSelection::AutoPositive => {
                set.iter().copied().filter(|&j| terms[j] > 0.0).collect()
            }
            GroupSelection::Explicit(_) => set.clone(),
        };
        if next.is_empty() {
            return Ok(zero(errors));
        }
        if next == set {
            let key: f64 = set
                .iter()
                .map(|&j| inputs.signal_clicked[j] * terms[j])
                .sum();
            return Ok(ProtocolRate {
                eph: Some(estimate.eph_upper),
                per_group: contributions(errors, &terms, |j| set.contains(&j)),
                method: Some(EstimateMethod::FiniteChernoff),
                mu: Some(params.mu),
                nu: Some(params.nu),
                probabilities: Some(params.intensity_probabilities),
                ..ProtocolRate::bare(Protocol::PmFinite, (key / params.rounds).max(0.0))
            });
        }
        set = next;
    }
}

/// Finite-size PM-QKD rate on noise-free expected counts for `params.rounds` rounds.
pub fn pm_rate_finite(
    channel: &ChannelParams,
    params: &ProtocolParams,
    selection: &GroupSelection,
) -> Result<ProtocolRate> {
    let errors = group_error_rates(channel, params)?;
    pm_rate_from_inputs(
        &DecoyInputs::expected(channel, params),
        &errors,
        params,
        selection,
    )
}

/// Finite-size PM-QKD rate from observed tallies; bit error rates are the observed signal QBERs.
pub fn pm_rate_from_tallies(
    tallies: &TallyTable,
    params: &ProtocolParams,
    selection: &GroupSelection,
) -> Result<ProtocolRate> {
    tallies.validate()?;
    if tallies.groups() != params.groups() {
        return Err(Error::invalid(
            "phase_slices",
            format!(
                "tallies have {} groups but phase_slices gives {}",
                tallies.groups(),
                params.groups()
            ),
        ));
    }
    let errors: Vec<f64> = tallies
        .cells(IntensitySetting::S)
        .iter()
        .map(|c| {
            if c.clicked == 0 {
                0.5
            } else {
                c.bit_errors as f64 / c.clicked as f64
            }
        })
        .collect();
    let mut params = *params;
    params.rounds = IntensitySetting::ALL
        .iter()
        .map(|&a| tallies.sent(a) as f64 / params.intensity_probabilities.get(a).powi(2))
        .find(|n| n.is_finite() && *n > 0.0)
        .unwrap_or(params.rounds);
    pm_rate_from_inputs(
        &DecoyInputs::from_tallies(tallies, &params),
        &errors,
        &params,
        selection,
    )
}

/// Intermediate quantities of the MDI-QKD rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MdiTerms {
    pub y11: f64,
    pub e11: f64,
    pub q11: f64,
    pub q_rect_c: f64,
    pub q_rect_e: f64,
    pub e_rect: f64,
    pub rate: f64,
}

/// MDI-QKD rectilinear-basis quantities with both parties at `mu / 2`.
///
/// The single-photon-pair error is normalized by `Y11`; the background
/// error rate is 1/2.
pub fn mdi_terms(channel: &ChannelParams, mu: f64, f: f64) -> MdiTerms {
    const E0: f64 = 0.5;
    let eta = channel.eta();
    let (ea, eb) = (eta, eta);
    let (ma, mb) = (mu / 2.0, mu / 2.0);
    let pd = channel.dark_count_rate;
    let ed = channel.misalignment;

    let y11 = (1.0 - pd).powi(2)
        * (ea * eb / 2.0
            + (2.0 * ea + 2.0 * eb - 3.0 * ea * eb) * pd
            + 4.0 * (1.0 - ea) * (1.0 - eb) * pd * pd);
    let e11 = if y11 > 0.0 {
        (E0 * y11 - (E0 - ed) * (1.0 - pd * pd) * ea * eb / 2.0) / y11
    } else {
        E0
    };
    let q11 = ma * mb * (-ma - mb).exp() * y11;

    let mu_prime = ea * ma + eb * mb;
    let x = 0.5 * (ea * ma * eb * mb).sqrt();
    let damp = (-mu_prime / 2.0).exp();
    // 1 - (1 - pd) e^{-m}: click probability of a detector seeing intensity m.
    let click = |m: f64| -(-m).exp_m1() + pd * (-m).exp();
    let q_rect_c = 2.0 * (1.0 - pd).powi(2) * damp * click(ea * ma / 2.0) * click(eb * mb / 2.0);
    // I0(2x) - (1 - pd) e^{-mu'/2}, with both near 1 for weak pulses.
    let excess = bessel_i0m1(2.0 * x) - (-mu_prime / 2.0).exp_m1() + pd * damp;
    let q_rect_e = 2.0 * pd * (1.0 - pd).powi(2) * damp * excess;
    let q_rect = q_rect_c + q_rect_e;
    let e_rect = if q_rect > 0.0 {
        (ed * q_rect_c + (1.0 - ed) * q_rect_e) / q_rect
    } else {
        0.5
    };
    let rate = 0.5 * (q11 * (1.0 - entropy_of_bound(e11)) - f * q_rect * entropy_of_bound(e_rect));
    MdiTerms {
        y11,
        e11,
        q11,
        q_rect_c,
        q_rect_e,
        e_rect,
        rate: rate.max(0.0),
    }
}

pub fn mdi_rate(channel: &ChannelParams, params: &ProtocolParams) -> ProtocolRate {
    let terms = mdi_terms(channel, params.mu, params.ec_efficiency);
    ProtocolRate {
        mu: Some(params.mu),
        ..ProtocolRate::bare(Protocol::Mdi, terms.rate)
    }
}

/// Repeaterless bound `-log2(1 - eta)` for end-to-end transmittance `eta_total`.
pub fn plob_bound(eta_total: f64) -> Result<f64> {
    if !(eta_total > 0.0 && eta_total < 1.0) {
        return Err(Error::Domain {
            what: "end-to-end transmittance",
            value: eta_total,
        });
    }
    Ok(-(-eta_total).ln_1p() / std::f64::consts::LN_2)
}

pub fn plob_rate(channel: &ChannelParams, convention: PlobConvention) -> Result<ProtocolRate> {
    let eta = channel.end_to_end_eta(convention == PlobConvention::EndToEnd);
    Ok(ProtocolRate::bare(Protocol::Plob, plob_bound(eta)?))
}

fn with_mu(params: &ProtocolParams, mu: f64) -> ProtocolParams {
    ProtocolParams { mu, ..*params }
}

/// Asymptotic PM-QKD rate maximized over the signal intensity in `(0, 2]`.
pub fn optimize_pm_asymptotic(
    channel: &ChannelParams,
    params: &ProtocolParams,
    selection: &GroupSelection,
    bound: PhaseErrorBound,
) -> Result<ProtocolRate> {
    check_selection(selection, params.groups())?;
    let objective = |mu: f64| {
        pm_rate_asymptotic(channel, &with_mu(params, mu), selection, bound)
            .map(|r| r.rate)
            .unwrap_or(0.0)
    };
    let (mu, _) = maximize_1d(objective, 0.0, MAX_INTENSITY, 40);
    pm_rate_asymptotic(channel, &with_mu(params, mu), selection, bound)
}

/// MDI-QKD rate maximized over the total intensity in `(0, 2]`.
pub fn optimize_mdi(channel: &ChannelParams, params: &ProtocolParams) -> ProtocolRate {
    let (mu, _) = maximize_1d(
        |mu| mdi_terms(channel, mu, params.ec_efficiency).rate,
        0.0,
        MAX_INTENSITY,
        40,
    );
    mdi_rate(channel, &with_mu(params, mu))
}

/// Decoy schedule in unconstrained coordinates: intensity and ratio through a
/// logistic map, setting probabilities through a softmax with vacuum as reference.
fn decode(params: &ProtocolParams, x: &[f64]) -> ProtocolParams {
    let mu = MAX_INTENSITY * logistic(x[0]);
    let nu = mu * logistic(x[1]);
    let (ew, es) = (x[2].exp(), x[3].exp());
    let z = 1.0 + ew + es;
    ProtocolParams {
        mu,
        nu,
        intensity_probabilities: SettingProbabilities {
            vac: 1.0 / z,
            w: ew / z,
            s: es / z,
        },
        ..*params
    }
}

fn encode(mu: f64, nu_ratio: f64, w: f64, s: f64, vac: f64) -> [f64; 4] {
    let logit = |p: f64| (p / (1.0 - p)).ln();
    [
        logit(mu / MAX_INTENSITY),
        logit(nu_ratio),
        (w / vac).ln(),
        (s / vac).ln(),
    ]
}

/// Finite-size PM-QKD rate maximized over the signal and weak intensities and
/// the setting probabilities: a coarse grid followed by Nelder-Mead.
pub fn optimize_pm_finite(
    channel: &ChannelParams,
    params: &ProtocolParams,
    selection: &GroupSelection,
) -> Result<ProtocolRate> {
    check_selection(selection, params.groups())?;
    let rate_at = |p: &ProtocolParams| {
        pm_rate_finite(channel, p, selection)
            .map(|r| r.rate)
            .unwrap_or(0.0)
    };

    let mut best = (f64::NEG_INFINITY, [0.0; 4]);
    for mu in [0.05, 0.1, 0.2, 0.3, 0.45, 0.6, 0.8, 1.0] {
        for ratio in [0.05, 0.15, 0.4] {
            for (s, w) in [(0.5, 0.3), (0.7, 0.2), (0.85, 0.1), (0.9, 0.07)] {
                let x = encode(mu, ratio, w, s, 1.0 - s - w);
                let r = rate_at(&decode(params, &x));
                if r > best.0 {
                    best = (r, x);
                }
            }
        }
    }
    let (x, _) = nelder_mead(|x| -rate_at(&decode(params, x)), &best.1, 0.3, 600, 1e-10);
    let tuned = decode(params, &x);
    let tuned_rate = pm_rate_finite(channel, &tuned, selection)?;
    if tuned_rate.rate >= best.0 {
        Ok(tuned_rate)
    } else {
        pm_rate_finite(channel, &decode(params, &best.1), selection)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanOptions {
    pub protocols: Vec<Protocol>,
    /// Optimize intensities (and, for finite size, the decoy schedule) per distance.
    pub optimize: bool,
    pub selection: GroupSelection,
    pub phase_error_bound: PhaseErrorBound,
    pub plob: PlobConvention,
    /// Refine each PLOB crossing by bisection between grid points.
    pub refine_crossings: bool,
}

impl Default for ScanOptions {
    fn default() -> Self {
        ScanOptions {
            protocols: vec![Protocol::PmAsymptotic, Protocol::Plob],
            optimize: true,
            selection: GroupSelection::AutoPositive,
            phase_error_bound: PhaseErrorBound::EvenParity,
            plob: PlobConvention::EndToEnd,
            refine_crossings: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Crossing {
    pub protocol: Protocol,
    /// Distance where the PM rate first exceeds the PLOB bound.
    pub distance_km: Option<f64>,
    /// Index of the first grid point past the crossing.
    pub grid_index: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scan {
    pub points: Vec<RatePoint>,
    pub crossings: Vec<Crossing>,
}

/// Rate of one protocol at one channel.
pub fn protocol_rate(
    channel: &ChannelParams,
    params: &ProtocolParams,
    protocol: Protocol,
    options: &ScanOptions,
) -> Result<ProtocolRate> {
    match (protocol, options.optimize) {
        (Protocol::PmAsymptotic, true) => optimize_pm_asymptotic(
            channel,
            params,
            &options.selection,
            options.phase_error_bound,
        ),
        (Protocol::PmAsymptotic, false) => pm_rate_asymptotic(
            channel,
            params,
            &options.selection,
            options.phase_error_bound,
        ),
        (Protocol::PmFinite, true) => optimize_pm_finite(channel, params, &options.selection),
        (Protocol::PmFinite, false) => pm_rate_finite(channel, params, &options.selection),
        (Protocol::Mdi, true) => Ok(optimize_mdi(channel, params)),
        (Protocol::Mdi, false) => Ok(mdi_rate(channel, params)),
        (Protocol::Plob, _) => plob_rate(channel, options.plob),
    }
}

pub fn rate_point(
    channel: &ChannelParams,
    params: &ProtocolParams,
    options: &ScanOptions,
) -> Result<RatePoint> {
    let rates = options
        .protocols
        .iter()
        .map(|&p| protocol_rate(channel, params, p, options))
        .collect::<Result<Vec<_>>>()?;
    Ok(RatePoint {
        distance_km: channel.distance_km,
        rates,
    })
}

/// Gap between a PM protocol and the PLOB bound at `distance_km`.
fn advantage(
    template: &ChannelParams,
    params: &ProtocolParams,
    protocol: Protocol,
    options: &ScanOptions,
    distance_km: f64,
) -> Result<f64> {
    let ch = template.at_distance(distance_km);
    Ok(protocol_rate(&ch, params, protocol, options)?.rate - plob_rate(&ch, options.plob)?.rate)
}

/// Rates for every protocol at every distance, plus the first PLOB crossing
/// of each PM protocol.
pub fn scan_distance(
    template: &ChannelParams,
    params: &ProtocolParams,
    options: &ScanOptions,
    distances: &[f64],
) -> Result<Scan> {
    if distances.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::invalid("distances", "must be strictly ascending"));
    }
    let points = distances
        .par_iter()
        .map(|&d| rate_point(&template.at_distance(d), params, options))
        .collect::<Result<Vec<_>>>()?;

    let mut crossings = Vec::new();
    for &protocol in options.protocols.iter().filter(|p| p.is_pm()) {
        let gaps = points
            .iter()
            .map(|pt| {
                let plob = plob_rate(&template.at_distance(pt.distance_km), options.plob)?.rate;
                Ok(pt.rate(protocol).unwrap_or(0.0) - plob)
            })
            .collect::<Result<Vec<f64>>>()?;
        let index = gaps.iter().position(|&g| g > 0.0);
        let distance_km = match index {
            None => None,
            Some(0) => Some(distances[0]),
            Some(i) if !options.refine_crossings => Some(distances[i]),
            Some(i) => {
                let (mut lo, mut hi) = (distances[i - 1], distances[i]);
                while hi - lo > 1e-3 {
                    let mid = 0.5 * (lo + hi);
                    if advantage(template, params, protocol, options, mid)? > 0.0 {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                Some(hi)
            }
        };
        crossings.push(Crossing {
            protocol,
            distance_km,
            grid_index: index,
        });
    }
    Ok(Scan { points, crossings })
}

pub const SCAN_HEADER: [&str; 6] = [
    "distance_km",
    "protocol",
    "rate",
    "eph",
    "groups_kept",
    "crossing_flag",
];

/// Writes a scan as CSV, one row per distance and protocol. Numbers carry 12
/// significant digits; `crossing_flag` marks the first grid row past each PM
/// protocol's PLOB crossing.
pub fn write_scan_csv<W: Write>(scan: &Scan, writer: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(writer);
    out.write_record(SCAN_HEADER)?;
    for (i, point) in scan.points.iter().enumerate() {
        for r in &point.rates {
            let flag = scan
                .crossings
                .iter()
                .any(|c| c.protocol == r.protocol && c.grid_index == Some(i));
            let groups = r
                .groups_kept()
                .iter()
                .map(|j| j.to_string())
                .collect::<Vec<_>>()
                .join(";");
            out.write_record([
                sig12(point.distance_km),
                r.protocol.name().to_string(),
                sig12(r.rate),
                r.eph.map(sig12).unwrap_or_default(),
                groups,
                u8::from(flag).to_string(),
            ])?;
        }
    }
    out.flush()?;
    Ok(())
}
