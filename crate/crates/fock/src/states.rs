//! Coherent pairs, photon-number components and phase-randomized mixtures.

use num_complex::Complex64;
use std::f64::consts::PI;

use pmqkd::math::ln_binomial;
use pmqkd::model::{discrete_randomized_pmf, poisson_pmf};

use crate::error::{FockError, Result};
use crate::space::{DensityMatrix, FockOperator, FockVector};

/// Leakage above which constructors log a warning.
pub const LEAKAGE_WARNING: f64 = 1e-10;

/// Default truncation; the Poisson tail beyond 40 photons is below 1e-30 for `mu <= 1`.
pub const DEFAULT_K_MAX: usize = 40;

/// Truncated amplitudes `e^{-|a|^2/2} a^n / sqrt(n!)` of a coherent state.
fn coherent_amplitudes(alpha: Complex64, k_max: usize) -> Vec<Complex64> {
    let mut c = Vec::with_capacity(k_max + 1);
    c.push(Complex64::new((-alpha.norm_sqr() / 2.0).exp(), 0.0));
    for n in 1..=k_max {
        let next = c[n - 1] * alpha / (n as f64).sqrt();
        c.push(next);
    }
    c
}

/// `|alpha_a>_A (x) |alpha_b>_B` truncated to `m + n <= k_max`.
pub fn coherent_pair(alpha_a: Complex64, alpha_b: Complex64, k_max: usize) -> FockVector {
    let a = coherent_amplitudes(alpha_a, k_max);
    let b = coherent_amplitudes(alpha_b, k_max);
    let mut v = FockVector::zeros(k_max);
    for (m, am) in a.iter().enumerate() {
        for (n, bn) in b.iter().take(k_max - m + 1).enumerate() {
            v.set(m, n, am * bn);
        }
    }
    v
}

/// Odd and even projections of a state.
#[derive(Debug, Clone, PartialEq)]
pub struct ParityParts {
    /// Normalized odd projection, or zero when it vanishes.
    pub odd: FockVector,
    /// Normalized even projection, or zero when it vanishes.
    pub even: FockVector,
    pub p_odd: f64,
    pub p_even: f64,
}

pub fn parity_decompose(state: &FockVector) -> Result<ParityParts> {
    let k = state.k_max();
    let odd = FockOperator::parity_odd(k).apply(state)?;
    let even = FockOperator::parity_even(k).apply(state)?;
    Ok(ParityParts {
        p_odd: odd.norm_sqr(),
        p_even: even.norm_sqr(),
        odd: odd.normalized(),
        even: even.normalized(),
    })
}

/// `(a^dagger + e^{i delta} b^dagger)^k |00> / sqrt(2^k k!)`.
pub fn k_photon_component(delta: f64, k: usize, k_max: usize) -> Result<FockVector> {
    if k > k_max {
        return Err(FockError::Truncation { photons: k, k_max });
    }
    let mut v = FockVector::zeros(k_max);
    add_k_photon(&mut v, delta, k, Complex64::new(1.0, 0.0));
    Ok(v)
}

/// Adds `weight |k^delta>` to `v`.
fn add_k_photon(v: &mut FockVector, delta: f64, k: usize, weight: Complex64) {
    for m in 0..=k {
        let magnitude =
            (0.5 * (ln_binomial(k as u64, m as u64) - k as f64 * std::f64::consts::LN_2)).exp();
        let phase = Complex64::from_polar(1.0, delta * (k - m) as f64);
        let current = v.amplitude(m, k - m);
        v.set(m, k - m, current + weight * magnitude * phase);
    }
}

/// Pseudo-Fock state of a coherent pair whose common phase takes `slices`
/// equally spaced values: the normalized sum of the `|(lD + k)^delta>`
/// components, weighted as in the coherent state.
///
/// Normalization uses the exact folded Poisson mass, so truncation shows up
/// as leakage.
pub fn discrete_pseudo_fock(
    mu: f64,
    slices: u32,
    k: u32,
    delta: f64,
    k_max: usize,
) -> Result<FockVector> {
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(FockError::Domain {
            what: "intensity",
            value: mu,
        });
    }
    if slices == 0 || k >= slices {
        return Err(FockError::Domain {
            what: "pseudo-Fock index",
            value: k as f64,
        });
    }
    let folded = discrete_randomized_pmf(mu, slices, k)?;
    let mut v = FockVector::zeros(k_max);
    let mut n = k as usize;
    while n <= k_max {
        let weight = (poisson_pmf(mu, n as u64) / folded).sqrt();
        add_k_photon(&mut v, delta, n, Complex64::new(weight, 0.0));
        n += slices as usize;
    }
    let leakage = v.leakage();
    if leakage > LEAKAGE_WARNING {
        log::warn!("pseudo-Fock state mu = {mu}, D = {slices}, k = {k} loses {leakage:e} to truncation at k_max = {k_max}");
    }
    Ok(v)
}

/// `|psi_o^delta>` or `|psi_e^delta>` for a pair at `mu / 2` each, normalized
/// by the exact parity probability `e^{-mu} sinh(mu)` or `e^{-mu} cosh(mu)`.
pub fn parity_state(mu: f64, delta: f64, odd: bool, k_max: usize) -> Result<FockVector> {
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(FockError::Domain {
            what: "intensity",
            value: mu,
        });
    }
    let amp = (mu / 2.0).sqrt();
    let pair = coherent_pair(
        Complex64::new(amp, 0.0),
        Complex64::from_polar(amp, delta),
        k_max,
    );
    let (projector, p) = if odd {
        (FockOperator::parity_odd(k_max), (-mu).exp() * mu.sinh())
    } else {
        (FockOperator::parity_even(k_max), (-mu).exp() * mu.cosh())
    };
    Ok(projector
        .apply(&pair)?
        .scaled(Complex64::new(1.0 / p.sqrt(), 0.0)))
}

/// `rho_o` (or `rho_e`) for total intensity `mu`: the equal mixture of the
/// parity states at relative phases 0 and pi.
pub fn parity_mixture(mu: f64, odd: bool, k_max: usize) -> Result<DensityMatrix> {
    let a = parity_state(mu, 0.0, odd, k_max)?;
    let b = parity_state(mu, PI, odd, k_max)?;
    DensityMatrix::mixture(k_max, &[(0.5, &a), (0.5, &b)])
}

/// `(|k^delta><k^delta| + |k^{delta+pi}><k^{delta+pi}|) / 2`, the k-photon
/// state after mixing the key phases 0 and pi.
pub fn key_mixed_k_photon(delta: f64, k: usize, k_max: usize) -> Result<DensityMatrix> {
    let a = k_photon_component(delta, k, k_max)?;
    let b = k_photon_component(delta + PI, k, k_max)?;
    DensityMatrix::mixture(k_max, &[(0.5, &a), (0.5, &b)])
}

/// Average of the pair `|sqrt(mu/2) e^{i phi}> |sqrt(mu/2) e^{i(phi + delta)}>`
/// over `points` equally spaced common phases.
pub fn phase_averaged_pair(
    mu: f64,
    delta: f64,
    points: usize,
    k_max: usize,
) -> Result<DensityMatrix> {
    if points == 0 {
        return Err(FockError::Domain {
            what: "phase points",
            value: 0.0,
        });
    }
    let amp = (mu / 2.0).sqrt();
    let mut rho = DensityMatrix::zeros(k_max);
    for j in 0..points {
        let phi = 2.0 * PI * j as f64 / points as f64;
        let pair = coherent_pair(
            Complex64::from_polar(amp, phi),
            Complex64::from_polar(amp, phi + delta),
            k_max,
        );
        rho.add_scaled(1.0 / points as f64, &pair.projector())?;
    }
    Ok(rho)
}

/// `sum_k P_mu(k) |k^delta><k^delta|` up to `k_max`.
pub fn fock_mixture(mu: f64, delta: f64, k_max: usize) -> Result<DensityMatrix> {
    let mut rho = DensityMatrix::zeros(k_max);
    for k in 0..=k_max {
        rho.add_scaled(
            poisson_pmf(mu, k as u64),
            &k_photon_component(delta, k, k_max)?.projector(),
        )?;
    }
    Ok(rho)
}

/// `sum_k P_D(k) |lambda_k^delta><lambda_k^delta|` over `k < slices`.
pub fn pseudo_fock_mixture(
    mu: f64,
    slices: u32,
    delta: f64,
    k_max: usize,
) -> Result<DensityMatrix> {
    let mut rho = DensityMatrix::zeros(k_max);
    for k in 0..slices {
        let p = discrete_randomized_pmf(mu, slices, k)?;
        if p > 0.0 {
            rho.add_scaled(
                p,
                &discrete_pseudo_fock(mu, slices, k, delta, k_max)?.projector(),
            )?;
        }
    }
    Ok(rho)
}
