//! Single-photon and phase-error estimation.

use log::debug;
use serde::{Deserialize, Serialize};

use super::chernoff::{
    chernoff_direct, chernoff_inverse, chernoff_inverse_tail, solve_n_alpha, ChernoffInterval,
};
use super::tally::TallyTable;
use crate::error::{Error, Result};
use crate::model::{gain_mu, poisson_pmf, yield_k, DEFAULT_K_MAX};
use crate::params::{ChannelParams, IntensitySetting, NAlpha, ProtocolParams};

use IntensitySetting::{Vac, S, W};

/// Search range for an automatically chosen `n_alpha`.
const N_ALPHA_RANGE: (f64, f64) = (0.5, 60.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimateMethod {
    Asymptotic,
    FiniteChernoff,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecoyEstimate {
    pub y1_lower: f64,
    pub q1_lower: f64,
    /// Upper bound on the phase error rate, `1 - q1_lower`.
    pub eph_upper: f64,
    pub failure_probability: f64,
    pub method: EstimateMethod,
    /// Deviation presets of the vac, w, s and sampling intervals; empty for
    /// the asymptotic method.
    pub n_alpha: Vec<f64>,
    /// Phase groups whose signal clicks the estimate refers to.
    pub groups: Vec<usize>,
}

/// Lower and upper bound on an expected gain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GainBounds {
    pub lower: f64,
    pub upper: f64,
}

impl GainBounds {
    pub fn exact(value: f64) -> Self {
        GainBounds {
            lower: value,
            upper: value,
        }
    }
}

/// Click fractions `q_k = P(k) Y_k / Q` of the signal intensity, `k = 0..=k_max`.
pub fn photon_click_fractions(channel: &ChannelParams, mu: f64, k_max: usize) -> Result<Vec<f64>> {
    let q = gain_mu(channel, mu);
    if q <= 0.0 {
        return Err(Error::DegenerateChannel);
    }
    Ok((0..=k_max as u64)
        .map(|k| poisson_pmf(mu, k) * yield_k(channel, k) / q)
        .collect())
}

/// Odd- and even-photon click fractions of the signal state, `(q_odd, q_even)`.
///
/// `q_even` is computed as one minus the odd fractions so that dark counts
/// and the truncated tail are charged to the even side.
pub fn asymptotic_q_parity(channel: &ChannelParams, mu: f64) -> Result<(f64, f64)> {
    if !(mu > 0.0) {
        return Err(Error::Domain {
            what: "signal intensity",
            value: mu,
        });
    }
    let q = photon_click_fractions(channel, mu, DEFAULT_K_MAX)?;
    let q_odd: f64 = q.iter().skip(1).step_by(2).sum();
    let q_odd = q_odd.clamp(0.0, 1.0);
    Ok((q_odd, 1.0 - q_odd))
}

/// Exact single-photon quantities for the signal state, as reached with
/// infinitely many decoys.
pub fn asymptotic_estimate(
    channel: &ChannelParams,
    params: &ProtocolParams,
) -> Result<DecoyEstimate> {
    let q = gain_mu(channel, params.mu);
    if q <= 0.0 {
        return Err(Error::DegenerateChannel);
    }
    let y1 = yield_k(channel, 1);
    let q1 = (poisson_pmf(params.mu, 1) * y1 / q).clamp(0.0, 1.0);
    Ok(DecoyEstimate {
        y1_lower: y1,
        q1_lower: q1,
        eph_upper: 1.0 - q1,
        failure_probability: 0.0,
        method: EstimateMethod::Asymptotic,
        n_alpha: Vec::new(),
        groups: (0..params.groups()).collect(),
    })
}

/// Lower bound on the single-photon yield from signal, weak and vacuum gain bounds.
pub fn estimate_y1_two_intensity(
    q_s: GainBounds,
    q_w: GainBounds,
    q_vac: GainBounds,
    mu: f64,
    nu: f64,
) -> Result<f64> {
    if !(nu > 0.0 && mu > nu) {
        return Err(Error::invalid(
            "nu",
            "the two-intensity bound needs 0 < nu < mu",
        ));
    }
    let mu2 = mu * mu;
    let nu2 = nu * nu;
    let y1 = mu / (mu * nu - nu2)
        * (q_w.lower * nu.exp()
            - q_s.upper * mu.exp() * nu2 / mu2
            - (mu2 - nu2) / mu2 * q_vac.upper);
    if !(0.0..=1.0).contains(&y1) {
        debug!("single-photon yield bound {y1:e} clamped to [0, 1]");
    }
    Ok(if y1.is_nan() { 0.0 } else { y1.clamp(0.0, 1.0) })
}

/// Aggregated counts the finite-size estimator works on.
///
/// Counts are real numbers so that expected-value (noise-free) data can be fed
/// through the same path as observed tallies. Bit errors are deliberately
/// absent: privacy estimation never looks at them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecoyInputs {
    pub mu: f64,
    pub nu: f64,
    /// `N^a`, indexed by [`IntensitySetting::index`].
    pub sent: [f64; 3],
    /// `M^a`, indexed by [`IntensitySetting::index`].
    pub clicked: [f64; 3],
    /// Signal rounds sent per phase group.
    pub signal_sent: Vec<f64>,
    /// Signal clicks per phase group.
    pub signal_clicked: Vec<f64>,
}

impl DecoyInputs {
    pub fn from_tallies(tallies: &TallyTable, params: &ProtocolParams) -> Self {
        let by = |f: fn(&TallyTable, IntensitySetting) -> u64| {
            IntensitySetting::ALL.map(|a| f(tallies, a) as f64)
        };
        DecoyInputs {
            mu: params.mu,
            nu: params.nu,
            sent: by(TallyTable::sent),
            clicked: by(TallyTable::clicked),
            signal_sent: tallies.cells(S).iter().map(|c| c.sent as f64).collect(),
            signal_clicked: tallies.cells(S).iter().map(|c| c.clicked as f64).collect(),
        }
    }

    /// Expected counts for `params.rounds` rounds on `channel`.
    ///
    /// Both parties pick settings independently, so setting `a` is matched in
    /// `r_a^2 N` rounds; phase groups are equally likely and the gain does not
    /// depend on the group.
    pub fn expected(channel: &ChannelParams, params: &ProtocolParams) -> Self {
        let r = params.intensity_probabilities;
        let sent = IntensitySetting::ALL.map(|a| r.get(a).powi(2) * params.rounds);
        let clicked =
            IntensitySetting::ALL.map(|a| sent[a.index()] * gain_mu(channel, params.intensity(a)));
        let groups = params.groups();
        DecoyInputs {
            mu: params.mu,
            nu: params.nu,
            sent,
            clicked,
            signal_sent: vec![sent[S.index()] / groups as f64; groups],
            signal_clicked: vec![clicked[S.index()] / groups as f64; groups],
        }
    }

    pub fn groups(&self) -> usize {
        self.signal_sent.len()
    }
}

/// How the deviation presets of the four Chernoff intervals are chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Presets {
    /// The same `n_alpha` for every interval.
    Shared(f64),
    /// Each interval gets its own smallest `n_alpha` whose failure probability
    /// is at most the given share of the budget.
    Budget(f64),
}

fn preset_for(presets: Presets, failure: impl Fn(f64) -> Result<f64>) -> Result<f64> {
    match presets {
        Presets::Shared(n) => Ok(n),
        Presets::Budget(share) => {
            let (lo, hi) = N_ALPHA_RANGE;
            solve_n_alpha(&failure, share, lo, hi)?.ok_or_else(|| Error::BudgetExceeded {
                eps: failure(hi).unwrap_or(1.0),
                budget: share,
            })
        }
    }
}

/// Step I interval for an observed count.
///
/// Under a budget, a count too small for the preset form to meet its share
/// falls back to the one-sided tail form.
fn inverse_interval(chi: f64, presets: Presets) -> Result<ChernoffInterval> {
    match preset_for(presets, |n| {
        Ok(chernoff_inverse(chi, n)?.failure_probability())
    }) {
        Ok(n) => chernoff_inverse(chi, n),
        Err(Error::BudgetExceeded { .. }) if matches!(presets, Presets::Budget(_)) => {
            debug!("{chi} clicks are too few for the preset form; using the one-sided tail bound");
            let n = preset_for(presets, |n| {
                Ok(chernoff_inverse_tail(chi, n)?.failure_probability())
            })?;
            chernoff_inverse_tail(chi, n)
        }
        Err(e) => Err(e),
    }
}

/// Intermediate results of one evaluation of the two-step estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteBreakdown {
    /// Step I intervals on the expected clicks, indexed by [`IntensitySetting::index`].
    pub intervals: [ChernoffInterval; 3],
    pub y1_lower: f64,
    pub m1_lower: f64,
    /// Step II interval on the single-photon signal clicks in the group set.
    pub sampling: ChernoffInterval,
    pub q1_lower: f64,
    /// Presets used for vac, w, s and the sampling step.
    pub n_alpha: [f64; 4],
    pub failure_probability: f64,
}

/// Two-step finite-size estimate.
///
/// Step I bounds the expected clicks of every setting, turns them into gain
/// bounds and then into a lower bound on the single-photon clicks over all
/// settings and phase groups. Step II samples the signal rounds in `groups`
/// out of those single-photon clicks with the direct bound.
pub fn finite_breakdown(
    inputs: &DecoyInputs,
    groups: &[usize],
    presets: Presets,
) -> Result<FiniteBreakdown> {
    if IntensitySetting::ALL
        .iter()
        .any(|a| !(inputs.sent[a.index()] > 0.0))
    {
        return Err(Error::invalid(
            "intensity_probabilities",
            "the estimator needs rounds sent with all three settings",
        ));
    }
    if groups.is_empty() {
        return Err(Error::invalid("groups", "the phase group set is empty"));
    }
    if let Some(&j) = groups.iter().find(|&&j| j >= inputs.groups()) {
        return Err(Error::invalid(
            "groups",
            format!("phase group {j} is out of range"),
        ));
    }
    let m_s_j: f64 = groups.iter().map(|&j| inputs.signal_clicked[j]).sum();
    if !(m_s_j > 0.0) {
        return Err(Error::DegenerateData(
            "no signal clicks in the selected phase groups".into(),
        ));
    }

    let mut intervals = Vec::with_capacity(3);
    for a in IntensitySetting::ALL {
        let chi = inputs.clicked[a.index()];
        intervals.push(inverse_interval(chi, presets)?);
    }
    let [vac, w, s]: [ChernoffInterval; 3] = intervals.try_into().expect("three settings");
    let gain = |iv: &ChernoffInterval, a: IntensitySetting| GainBounds {
        lower: iv.lower / inputs.sent[a.index()],
        upper: iv.upper / inputs.sent[a.index()],
    };
    let y1_lower = estimate_y1_two_intensity(
        gain(&s, S),
        gain(&w, W),
        gain(&vac, Vac),
        inputs.mu,
        inputs.nu,
    )?;

    let p1 = |a: IntensitySetting| match a {
        Vac => 0.0,
        W => poisson_pmf(inputs.nu, 1),
        S => poisson_pmf(inputs.mu, 1),
    };
    let n1: f64 = IntensitySetting::ALL
        .iter()
        .map(|&a| p1(a) * inputs.sent[a.index()])
        .sum();
    let m1_lower = y1_lower * n1;

    let n_s_j: f64 = groups.iter().map(|&j| inputs.signal_sent[j]).sum();
    let expected = p1(S) * n_s_j / n1 * m1_lower;
    let n2 = preset_for(presets, |n| {
        Ok(chernoff_direct(expected, n)?.failure_probability())
    })?;
    let sampling = chernoff_direct(expected, n2)?;
    let q1_lower = (sampling.lower / m_s_j).clamp(0.0, 1.0);

    let failure_probability = vac.failure_probability()
        + w.failure_probability()
        + s.failure_probability()
        + sampling.failure_probability();
    let n_alpha = [vac.n_alpha, w.n_alpha, s.n_alpha, n2];
    Ok(FiniteBreakdown {
        intervals: [vac, w, s],
        y1_lower,
        m1_lower,
        sampling,
        q1_lower,
        n_alpha,
        failure_probability,
    })
}

/// Finite-size estimate from aggregated counts.
///
/// With `n_alpha = auto` the budget `params.epsilon` is split equally over
/// the three Step I intervals and the Step II interval, and each interval
/// uses the smallest preset that meets its share. A fixed preset applies to
/// all four intervals and must meet the whole budget.
pub fn estimate_from_inputs(
    inputs: &DecoyInputs,
    params: &ProtocolParams,
    groups: &[usize],
) -> Result<DecoyEstimate> {
    let presets = match params.n_alpha {
        NAlpha::Fixed(n) => Presets::Shared(n),
        NAlpha::Auto => Presets::Budget(params.epsilon / 4.0),
    };
    let b = finite_breakdown(inputs, groups, presets)?;
    // Bisection lands on the budget up to rounding; allow for it.
    if b.failure_probability > params.epsilon * (1.0 + 1e-9) {
        return Err(Error::BudgetExceeded {
            eps: b.failure_probability,
            budget: params.epsilon,
        });
    }
    Ok(DecoyEstimate {
        y1_lower: b.y1_lower,
        q1_lower: b.q1_lower,
        eph_upper: 1.0 - b.q1_lower,
        failure_probability: b.failure_probability,
        method: EstimateMethod::FiniteChernoff,
        n_alpha: b.n_alpha.to_vec(),
        groups: groups.to_vec(),
    })
}

/// Finite-size estimate from a tally table for the phase groups in `groups`.
pub fn finite_size_estimate(
    tallies: &TallyTable,
    params: &ProtocolParams,
    groups: &[usize],
) -> Result<DecoyEstimate> {
    tallies.validate()?;
    estimate_from_inputs(&DecoyInputs::from_tallies(tallies, params), params, groups)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parity_fractions_normalize() {
        let ch = ChannelParams::table1(100.0, 0.0);
        let q = photon_click_fractions(&ch, 0.5, 60).unwrap();
        assert!((q.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        let (odd, even) = asymptotic_q_parity(&ch, 0.5).unwrap();
        assert!((odd + even - 1.0).abs() < 1e-15);
    }

    #[test]
    fn q_even_vanishes_for_weak_pulses() {
        let ch = ChannelParams::from_transmittance(0.3, 0.0, 0.0);
        let (_, even) = asymptotic_q_parity(&ch, 1e-6).unwrap();
        assert!(even < 1e-6);
    }

    #[test]
    fn q_even_lossless_example() {
        // mpmath: 1 - e^-mu sinh(mu) / (1 - e^-mu) at mu = 0.5
        let ch = ChannelParams::from_transmittance(1.0, 0.0, 0.0);
        let (_, even) = asymptotic_q_parity(&ch, 0.5).unwrap();
        assert!((even - 0.196_734_670_143_683_3).abs() < 1e-14);
    }

    #[test]
    fn no_gain_is_degenerate() {
        let ch = ChannelParams::from_transmittance(0.3, 0.0, 0.0);
        assert!(matches!(
            asymptotic_q_parity(&ch, 0.0),
            Err(Error::Domain { .. })
        ));
        let mut ch = ch;
        ch.detector_efficiency = 0.0;
        assert!(matches!(
            asymptotic_q_parity(&ch, 0.5),
            Err(Error::DegenerateChannel)
        ));
    }

    #[test]
    fn y1_two_intensity_example() {
        // mpmath with exact gains at eta = 0.1, p_d = 0, mu = 0.5, nu = 0.1
        let ch = ChannelParams::from_transmittance(0.1, 0.0, 0.0);
        let y1 = estimate_y1_two_intensity(
            GainBounds::exact(gain_mu(&ch, 0.5)),
            GainBounds::exact(gain_mu(&ch, 0.1)),
            GainBounds::exact(0.0),
            0.5,
            0.1,
        )
        .unwrap();
        assert!((y1 - 0.097_253_387_025_486_17).abs() < 1e-14);
        assert!(y1 <= 0.1);
    }

    #[test]
    fn y1_zero_gains_clamp() {
        let z = GainBounds::exact(0.0);
        assert_eq!(estimate_y1_two_intensity(z, z, z, 0.5, 0.1).unwrap(), 0.0);
        assert!(estimate_y1_two_intensity(z, z, z, 0.1, 0.1).is_err());
    }

    #[test]
    fn asymptotic_estimate_is_one_minus_q1() {
        let ch = ChannelParams::table1(50.0, 0.02);
        let p = ProtocolParams::table1(1e12);
        let est = asymptotic_estimate(&ch, &p).unwrap();
        assert_eq!(est.eph_upper, 1.0 - est.q1_lower);
        assert_eq!(est.method, EstimateMethod::Asymptotic);
    }

    #[test]
    fn requires_all_three_settings() {
        let ch = ChannelParams::table1(50.0, 0.02);
        let p = ProtocolParams::table1(1e12);
        let mut inputs = DecoyInputs::expected(&ch, &p);
        inputs.sent[W.index()] = 0.0;
        inputs.sent[Vac.index()] = 0.0;
        let err = estimate_from_inputs(&inputs, &p, &[0]).unwrap_err();
        assert!(matches!(err, Error::InvalidParameter { .. }));
    }

    #[test]
    fn no_signal_clicks_is_degenerate() {
        let p = ProtocolParams::table1(1e6);
        let mut t = TallyTable::new(16);
        for a in IntensitySetting::ALL {
            t.cell_mut(a, 0).sent = 1000;
        }
        assert!(matches!(
            finite_size_estimate(&t, &p, &[0]),
            Err(Error::DegenerateData(_))
        ));
    }

    #[test]
    fn fixed_n_alpha_over_budget_is_reported() {
        let ch = ChannelParams::table1(50.0, 0.02);
        let mut p = ProtocolParams::table1(1e12);
        p.n_alpha = NAlpha::Fixed(6.2);
        let inputs = DecoyInputs::expected(&ch, &p);
        assert!(matches!(
            estimate_from_inputs(&inputs, &p, &[0, 1]),
            Err(Error::BudgetExceeded { .. })
        ));
    }

    #[test]
    fn auto_n_alpha_meets_budget() {
        let ch = ChannelParams::table1(100.0, 0.02);
        let p = ProtocolParams::table1(1e12);
        let est = estimate_from_inputs(&DecoyInputs::expected(&ch, &p), &p, &[0, 1, 2]).unwrap();
        assert!(est.failure_probability <= p.epsilon);
        assert!(est.failure_probability > 0.5 * p.epsilon);
        assert!(est.eph_upper >= asymptotic_estimate(&ch, &p).unwrap().eph_upper);
    }

    #[test]
    fn a_few_vacuum_clicks_still_meet_the_budget() {
        let ch = ChannelParams::table1(100.0, 0.03);
        let p = ProtocolParams::table1(1e8);
        let mut inputs = DecoyInputs::expected(&ch, &p);
        let groups: Vec<usize> = (0..8).collect();
        let mut previous = 0.0;
        for chi in [0.0, 1.0, 5.0, 50.0] {
            inputs.clicked[Vac.index()] = chi;
            let est = estimate_from_inputs(&inputs, &p, &groups).unwrap();
            assert!(est.failure_probability <= p.epsilon * (1.0 + 1e-9));
            // More vacuum clicks never make the phase-error bound tighter.
            assert!(est.eph_upper >= previous);
            previous = est.eph_upper;
        }
    }
}
