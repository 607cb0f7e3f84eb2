//! Chernoff-type confidence intervals for sums of independent Bernoulli
//! trials.
//!
//! Two directions are needed. The inverse bound turns an observed count into
//! an interval for its expectation; the direct bound turns a known expectation
//! into an interval for the count that will be observed. In both cases the
//! width is preset through `n_alpha` (a number of standard deviations under a
//! Gaussian approximation) and the failure probability is then evaluated from
//! the exact exponential tail formulas.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `g2(x) = ln(1 + x) - x / (1 + x)`, the exponent of the multiplicative tail bound.
pub fn g2(x: f64) -> f64 {
    x.ln_1p() - x / (1.0 + x)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChernoffInterval {
    /// Observed count (inverse bound) or expectation (direct bound).
    pub chi: f64,
    /// Deviation preset the interval was built with.
    pub n_alpha: f64,
    pub lower: f64,
    pub upper: f64,
    pub delta_lower: f64,
    pub delta_upper: f64,
    /// Failure probability of the lower side.
    pub eps_lower: f64,
    /// Failure probability of the upper side.
    pub eps_upper: f64,
}

impl ChernoffInterval {
    pub fn failure_probability(&self) -> f64 {
        self.eps_lower + self.eps_upper
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lower <= x && x <= self.upper
    }
}

fn check(value: f64, what: &'static str) -> Result<()> {
    if value >= 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain { what, value })
    }
}

/// Interval for the expectation of a sum of Bernoulli trials given the observed sum `chi`.
///
/// The bounds are preset to `chi -/+ n_alpha * sqrt(chi)` and the deviations
/// solve `E = chi / (1 +/- delta)`. A lower bound that would be negative is
/// clamped to zero and carries no failure probability. With nothing observed
/// only the one-sided bound remains: `P[chi = 0] <= exp(-E)`, so the upper
/// bound is `n_alpha^2 / 2` with failure probability `exp(-n_alpha^2 / 2)`.
pub fn chernoff_inverse(chi: f64, n_alpha: f64) -> Result<ChernoffInterval> {
    check(chi, "observed count")?;
    check(n_alpha, "n_alpha")?;
    if chi == 0.0 {
        let upper = n_alpha * n_alpha / 2.0;
        return Ok(ChernoffInterval {
            chi,
            n_alpha,
            lower: 0.0,
            upper,
            delta_lower: 0.0,
            delta_upper: 1.0,
            eps_lower: 0.0,
            eps_upper: (-upper).exp(),
        });
    }
    let width = n_alpha * chi.sqrt();
    let upper = chi + width;
    let delta_upper = width / upper;
    let eps_upper = (-chi * g2(delta_upper)).exp();
    let (lower, delta_lower, eps_lower) = if chi > width {
        let lower = chi - width;
        let delta = width / lower;
        (lower, delta, (-chi * g2(delta)).exp())
    } else {
        (0.0, f64::INFINITY, 0.0)
    };
    Ok(ChernoffInterval {
        chi,
        n_alpha,
        lower,
        upper,
        delta_lower,
        delta_upper,
        eps_lower,
        eps_upper,
    })
}

/// One-sided upper bound on the expectation for small observed counts.
///
/// The preset form above cannot reach a small failure probability when `chi`
/// is small: `chi * g2(delta)` stays below `chi * (ln 2 - 1/2)` for any width.
/// This form uses the lower tail `P[X <= (1 - d) E] <= exp(-d^2 E / 2)` in
/// terms of the expectation instead, so the upper bound solves
/// `(E - chi)^2 = n_alpha^2 E` and fails with probability `exp(-n_alpha^2 / 2)`.
/// The lower bound is zero and never fails.
pub fn chernoff_inverse_tail(chi: f64, n_alpha: f64) -> Result<ChernoffInterval> {
    check(chi, "observed count")?;
    check(n_alpha, "n_alpha")?;
    let half = n_alpha * n_alpha / 2.0;
    let upper = chi + half + n_alpha * (chi + half / 2.0).sqrt();
    Ok(ChernoffInterval {
        chi,
        n_alpha,
        lower: 0.0,
        upper,
        delta_lower: f64::INFINITY,
        delta_upper: 1.0 - chi / upper,
        eps_lower: 0.0,
        eps_upper: (-half).exp(),
    })
}

/// Interval for the sum of Bernoulli trials whose expectation is `expected`.
///
/// The relative deviation is preset to `n_alpha / sqrt(expected)` in both
/// directions; each side fails with probability at most
/// `exp(-delta^2 E / (2 + delta))`. A lower bound below zero is clamped and
/// its failure term dropped.
pub fn chernoff_direct(expected: f64, n_alpha: f64) -> Result<ChernoffInterval> {
    check(expected, "expected count")?;
    check(n_alpha, "n_alpha")?;
    if expected == 0.0 {
        return Ok(ChernoffInterval {
            chi: 0.0,
            n_alpha,
            lower: 0.0,
            upper: 0.0,
            delta_lower: 0.0,
            delta_upper: 0.0,
            eps_lower: 0.0,
            eps_upper: 0.0,
        });
    }
    let delta = n_alpha / expected.sqrt();
    let eps = (-delta * delta * expected / (2.0 + delta)).exp();
    let (lower, eps_lower) = if delta < 1.0 {
        ((1.0 - delta) * expected, eps)
    } else {
        (0.0, 0.0)
    };
    Ok(ChernoffInterval {
        chi: expected,
        n_alpha,
        lower,
        upper: (1.0 + delta) * expected,
        delta_lower: delta,
        delta_upper: delta,
        eps_lower,
        eps_upper: eps,
    })
}

/// Smallest `n_alpha` in `[lo, hi]` with `failure(n_alpha) <= budget`, by bisection.
///
/// `failure` must be nonincreasing in `n_alpha`. Returns `None` if even `hi`
/// misses the budget.
pub fn solve_n_alpha<F>(mut failure: F, budget: f64, lo: f64, hi: f64) -> Result<Option<f64>>
where
    F: FnMut(f64) -> Result<f64>,
{
    if failure(hi)? > budget {
        return Ok(None);
    }
    if failure(lo)? <= budget {
        return Ok(Some(lo));
    }
    let (mut a, mut b) = (lo, hi);
    while b - a > 1e-9 * b {
        let mid = 0.5 * (a + b);
        if failure(mid)? <= budget {
            b = mid;
        } else {
            a = mid;
        }
    }
    Ok(Some(b))
}
