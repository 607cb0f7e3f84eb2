//! Closed-form channel and detection model.
//!
//! The untrusted station interferes both pulses on a 50:50 beam splitter and
//! reports which of its two threshold detectors clicked. Everything here is
//! pure and cheap; the estimator, the rate code and the simulator's test
//! oracles all build on these formulas.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::math::ln_factorial;
use crate::params::ChannelParams;

/// Photon-number sums stop once the remaining Poisson tail is below this.
pub const TAIL_MASS: f64 = 1e-15;

/// Largest photon number used by series that must be truncated.
pub const DEFAULT_K_MAX: usize = 60;

/// Poisson probability of `k` photons at total intensity `mu_t`.
pub fn poisson_pmf(mu_t: f64, k: u64) -> f64 {
    if mu_t == 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    (-mu_t + k as f64 * mu_t.ln() - ln_factorial(k)).exp()
}

/// Photon-number probability of a coherent state whose phase is drawn from
/// `slices` equally spaced values: the Poisson mass folded modulo `slices`.
pub fn discrete_randomized_pmf(mu: f64, slices: u32, k: u32) -> Result<f64> {
    if slices == 0 || k >= slices {
        return Err(Error::Domain {
            what: "discrete randomization index",
            value: k as f64,
        });
    }
    if mu == 0.0 {
        return Ok(if k == 0 { 1.0 } else { 0.0 });
    }
    let mut sum = 0.0;
    let mut n = k as u64;
    loop {
        let term = poisson_pmf(mu, n);
        sum += term;
        // Terms decrease once n exceeds mu, so stop on the first negligible one past the mode.
        if (n as f64) > mu && term <= sum * 1e-18 {
            break;
        }
        n += slices as u64;
        if n > 10_000 {
            break;
        }
    }
    Ok(sum)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "slices")]
pub enum DistributionKind {
    Poisson,
    DiscreteRandomized(u32),
}

/// A photon-number distribution truncated at `k_max`.
///
/// For the Poisson kind the tail beyond `k_max` is folded into the last entry
/// so the table always sums to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhotonDistribution {
    pub kind: DistributionKind,
    pub intensity: f64,
    pub pmf: Vec<f64>,
}

impl PhotonDistribution {
    pub fn poisson(mu_t: f64, k_max: usize) -> Self {
        let mut pmf: Vec<f64> = (0..=k_max as u64).map(|k| poisson_pmf(mu_t, k)).collect();
        let head: f64 = pmf.iter().sum();
        let tail = (1.0 - head).max(0.0);
        *pmf.last_mut().expect("k_max + 1 entries") += tail;
        PhotonDistribution {
            kind: DistributionKind::Poisson,
            intensity: mu_t,
            pmf,
        }
    }

    pub fn discrete_randomized(mu: f64, slices: u32) -> Result<Self> {
        let pmf = (0..slices)
            .map(|k| discrete_randomized_pmf(mu, slices, k))
            .collect::<Result<Vec<_>>>()?;
        Ok(PhotonDistribution {
            kind: DistributionKind::DiscreteRandomized(slices),
            intensity: mu,
            pmf,
        })
    }

    pub fn k_max(&self) -> usize {
        self.pmf.len() - 1
    }

    pub fn total(&self) -> f64 {
        self.pmf.iter().sum()
    }
}

/// Smallest `k_max` whose Poisson tail mass is below [`TAIL_MASS`], capped at [`DEFAULT_K_MAX`].
pub fn photon_cutoff(mu_t: f64) -> usize {
    let mut cdf = 0.0;
    for k in 0..=DEFAULT_K_MAX {
        cdf += poisson_pmf(mu_t, k as u64);
        if 1.0 - cdf < TAIL_MASS {
            return k;
        }
    }
    DEFAULT_K_MAX
}

/// Yield of a `k`-photon state for per-arm transmittance `eta`.
pub fn yield_from_eta(eta: f64, dark_count_rate: f64, k: u64) -> f64 {
    // 1 - (1 - 2 p_d) t with t = (1 - eta)^k, arranged to avoid cancellation.
    // Vacuum is handled apart: 0 * ln(0) would give NaN at eta = 1.
    if k == 0 {
        return 2.0 * dark_count_rate;
    }
    let ln_t = k as f64 * (-eta).ln_1p();
    -ln_t.exp_m1() + 2.0 * dark_count_rate * ln_t.exp()
}

/// Gain of a coherent pair with total intensity `mu` for per-arm transmittance `eta`.
pub fn gain_from_eta(eta: f64, dark_count_rate: f64, mu: f64) -> f64 {
    -(-eta * mu).exp_m1() + 2.0 * dark_count_rate * (-eta * mu).exp()
}

pub fn yield_k(channel: &ChannelParams, k: u64) -> f64 {
    yield_from_eta(channel.eta(), channel.dark_count_rate, k)
}

pub fn gain_mu(channel: &ChannelParams, mu: f64) -> f64 {
    gain_from_eta(channel.eta(), channel.dark_count_rate, mu)
}

/// Intrinsic bit error of merged phase group `group` out of `slices / 2`.
pub fn mismatch_error(group: u32, slices: u32) -> Result<f64> {
    if slices < 2 || !slices.is_multiple_of(2) || group >= slices / 2 {
        return Err(Error::Domain {
            what: "phase group index",
            value: group as f64,
        });
    }
    let (j, d) = (group as f64, slices as f64);
    Ok(if 4 * group <= slices {
        (PI * j / d).sin().powi(2)
    } else {
        (PI / 2.0 - PI * j / d).sin().powi(2)
    })
}

/// Bit error rate of signal-intensity rounds in phase group `group`.
pub fn bit_error_rate_from_eta(
    eta: f64,
    dark_count_rate: f64,
    misalignment: f64,
    mu: f64,
    group: u32,
    slices: u32,
) -> Result<f64> {
    let mismatch = mismatch_error(group, slices)?;
    let gain = gain_from_eta(eta, dark_count_rate, mu);
    if gain <= 0.0 {
        return Ok(0.5);
    }
    let e = (dark_count_rate + eta * mu * (mismatch + misalignment)) * (-eta * mu).exp() / gain;
    Ok(e.min(0.5))
}

pub fn bit_error_rate(channel: &ChannelParams, mu: f64, group: u32, slices: u32) -> Result<f64> {
    bit_error_rate_from_eta(
        channel.eta(),
        channel.dark_count_rate,
        channel.misalignment,
        mu,
        group,
        slices,
    )
}

/// Upper bound on the single-photon yield shift caused by using `slices`
/// discrete phases instead of continuous randomization.
pub fn discrete_randomization_deviation(mu: f64, slices: u32) -> Result<f64> {
    if mu < 0.0 || slices < 2 {
        return Err(Error::Domain {
            what: "discrete randomization intensity",
            value: mu,
        });
    }
    if mu == 0.0 {
        return Ok(0.0);
    }
    let p1 = discrete_randomized_pmf(mu, slices, 1)?;
    let log_ratio = slices as f64 * mu.ln() - ln_factorial(slices as u64 + 1);
    Ok(p1 * (0.5 * log_ratio).exp())
}
