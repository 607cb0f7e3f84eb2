//! The table printed by `verify-symmetry`: each row compares an exact value
//! against the bound or reference it must satisfy.

use nalgebra::DVector;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_PI_2;
use std::io::Write;

use pmqkd::format::sig12;
use pmqkd::math::ln_factorial;
use pmqkd::model::{discrete_randomization_deviation, discrete_randomized_pmf, poisson_pmf};

use crate::error::Result;
use crate::fidelity::{fidelity, pure_infidelity};
use crate::space::{DensityMatrix, FockOperator, FockVector};
use crate::states::{
    discrete_pseudo_fock, fock_mixture, k_photon_component, key_mixed_k_photon, parity_mixture,
    phase_averaged_pair, DEFAULT_K_MAX,
};

/// Tolerance for operator identities on the truncated space.
pub const PROJECTOR_TOLERANCE: f64 = 1e-12;
/// Tolerance for parity invariance residuals.
pub const PARITY_TOLERANCE: f64 = 1e-10;
/// Tolerance for the single-photon phase independence.
pub const SINGLE_PHOTON_TOLERANCE: f64 = 1e-12;
/// Tolerance for the sampled phase average against the Fock mixture.
pub const RANDOMIZATION_TOLERANCE: f64 = 1e-8;
/// Tolerance for the odd-state fidelity against its closed form.
pub const ODD_FIDELITY_TOLERANCE: f64 = 1e-10;

/// Points used to sample a continuous phase average.
pub const PHASE_POINTS: usize = 1 << 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyOptions {
    /// Truncation for state vectors.
    pub k_max: usize,
    /// Truncation for checks that build dense density matrices.
    pub dense_k_max: usize,
    pub intensities: Vec<f64>,
    pub slices: Vec<u32>,
    pub random_states: usize,
    pub seed: u64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            k_max: DEFAULT_K_MAX,
            dense_k_max: 16,
            intensities: (1..=10).map(|i| i as f64 / 10.0).collect(),
            slices: vec![8, 16],
            random_states: 100,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckRow {
    pub check: &'static str,
    pub mu: Option<f64>,
    pub nu: Option<f64>,
    pub slices: Option<u32>,
    pub delta: Option<f64>,
    pub value: f64,
    pub bound: f64,
    /// Truncation leakage of the states behind `value`.
    pub leakage: f64,
    pub pass: bool,
}

impl CheckRow {
    fn new(check: &'static str, value: f64, bound: f64, pass: bool) -> Self {
        CheckRow {
            check,
            mu: None,
            nu: None,
            slices: None,
            delta: None,
            value,
            bound,
            leakage: 0.0,
            pass,
        }
    }

    /// A residual that must stay at or below `bound`.
    fn below(check: &'static str, value: f64, bound: f64) -> Self {
        Self::new(check, value, bound, value <= bound)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SymmetryReport {
    pub rows: Vec<CheckRow>,
}

impl SymmetryReport {
    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    pub fn rows_for<'a>(&'a self, check: &'a str) -> impl Iterator<Item = &'a CheckRow> + 'a {
        self.rows.iter().filter(move |r| r.check == check)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(writer);
        out.write_record(REPORT_HEADER)?;
        let opt = |x: Option<f64>| x.map(sig12).unwrap_or_default();
        for r in &self.rows {
            out.write_record([
                r.check.to_string(),
                opt(r.mu),
                opt(r.nu),
                r.slices.map(|d| d.to_string()).unwrap_or_default(),
                opt(r.delta),
                sig12(r.value),
                sig12(r.bound),
                sig12(r.leakage),
                u8::from(r.pass).to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

pub const REPORT_HEADER: [&str; 9] = [
    "check", "mu", "nu", "slices", "delta", "value", "bound", "leakage", "pass",
];

/// Runs every check and collects the rows.
pub fn verify_symmetry(opts: &VerifyOptions) -> Result<SymmetryReport> {
    let mut rows = Vec::new();
    discrete_randomization_rows(opts, &mut rows)?;
    operator_rows(opts, &mut rows)?;
    random_state_rows(opts, &mut rows)?;
    single_photon_rows(opts, &mut rows)?;
    continuous_randomization_rows(opts, &mut rows)?;
    odd_state_rows(opts, &mut rows)?;
    Ok(SymmetryReport { rows })
}

/// Single-photon pseudo-Fock state against the true single-photon state:
/// `1 - F^2 <= mu^D / (D + 1)!`, and the yield shift it permits against `xi_D`.
fn discrete_randomization_rows(opts: &VerifyOptions, rows: &mut Vec<CheckRow>) -> Result<()> {
    for &d in &opts.slices {
        for &mu in &opts.intensities {
            let lambda = discrete_pseudo_fock(mu, d, 1, 0.0, opts.k_max)?;
            let single = k_photon_component(0.0, 1, opts.k_max)?;
            let infidelity = pure_infidelity(&lambda, &single)?;
            let bound = (d as f64 * mu.ln() - ln_factorial(d as u64 + 1)).exp();
            let leakage = lambda.leakage().max(0.0);
            let mut row = CheckRow::below("discrete_infidelity", infidelity, bound * (1.0 + 1e-9));
            row.bound = bound;
            row.mu = Some(mu);
            row.slices = Some(d);
            row.leakage = leakage;
            rows.push(row);

            let shift = discrete_randomized_pmf(mu, d, 1)? * infidelity.sqrt();
            let xi = discrete_randomization_deviation(mu, d)?;
            let mut row = CheckRow::below("yield_deviation", shift, xi * (1.0 + 1e-9));
            row.bound = xi;
            row.mu = Some(mu);
            row.slices = Some(d);
            row.leakage = leakage;
            rows.push(row);
        }
    }
    Ok(())
}

fn operator_rows(opts: &VerifyOptions, rows: &mut Vec<CheckRow>) -> Result<()> {
    let k = opts.dense_k_max;
    let (odd, even, u) = (
        FockOperator::parity_odd(k),
        FockOperator::parity_even(k),
        FockOperator::encoding_u(k),
    );
    let idempotent = odd
        .compose(&odd)?
        .distance(&odd)?
        .max(even.compose(&even)?.distance(&even)?);
    rows.push(CheckRow::below(
        "projector_idempotent",
        idempotent,
        PROJECTOR_TOLERANCE,
    ));
    let sum = FockOperator::custom(k, odd.matrix() + even.matrix())?;
    rows.push(CheckRow::below(
        "projector_complete",
        sum.distance(&FockOperator::identity(k))?,
        PROJECTOR_TOLERANCE,
    ));
    let commutes = odd.commutator_norm(&u)?.max(even.commutator_norm(&u)?);
    rows.push(CheckRow::below(
        "projector_commutes_u",
        commutes,
        PARITY_TOLERANCE,
    ));
    Ok(())
}

/// A random state with amplitudes uniform in the unit square, normalized.
fn random_state<R: Rng>(rng: &mut R, k_max: usize) -> FockVector {
    let d = crate::space::dimension(k_max);
    let amps = DVector::from_fn(d, |_, _| {
        Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    });
    FockVector::from_amplitudes(k_max, amps)
        .expect("dimension matches")
        .normalized()
}

/// Parity eigenvalues on random states, invariance of random parity
/// mixtures, and detection of cross-parity coherence.
fn random_state_rows(opts: &VerifyOptions, rows: &mut Vec<CheckRow>) -> Result<()> {
    let k = opts.dense_k_max;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let (odd, even, u) = (
        FockOperator::parity_odd(k),
        FockOperator::parity_even(k),
        FockOperator::encoding_u(k),
    );
    let (mut odd_residual, mut even_residual) = (0.0f64, 0.0f64);
    let mut parity_states = Vec::with_capacity(opts.random_states);
    for i in 0..opts.random_states {
        let psi = random_state(&mut rng, k);
        let o = odd.apply(&psi)?;
        let e = even.apply(&psi)?;
        odd_residual = odd_residual.max(u.apply(&o)?.add(&o)?.norm_sqr().sqrt());
        even_residual = even_residual.max(u.apply(&e)?.sub(&e)?.norm_sqr().sqrt());
        parity_states.push(if i % 2 == 0 {
            o.normalized()
        } else {
            e.normalized()
        });
    }
    rows.push(CheckRow::below(
        "parity_eigen_odd",
        odd_residual,
        PARITY_TOLERANCE,
    ));
    rows.push(CheckRow::below(
        "parity_eigen_even",
        even_residual,
        PARITY_TOLERANCE,
    ));

    // Mixtures of a few parity states each, with random weights.
    let mut invariance = 0.0f64;
    for chunk in parity_states.chunks(4) {
        let weights: Vec<f64> = chunk.iter().map(|_| rng.random_range(0.0..1.0)).collect();
        let total: f64 = weights.iter().sum();
        let terms: Vec<(f64, &FockVector)> = weights.iter().map(|w| w / total).zip(chunk).collect();
        let rho = DensityMatrix::mixture(k, &terms)?;
        invariance = invariance.max(u.conjugate(&rho)?.distance(&rho)?);
    }
    rows.push(CheckRow::below(
        "mixture_invariance",
        invariance,
        PARITY_TOLERANCE,
    ));

    let s = std::f64::consts::FRAC_1_SQRT_2;
    let coherent = FockVector::basis(0, 0, k)?
        .scaled(Complex64::new(s, 0.0))
        .add(&FockVector::basis(0, 1, k)?.scaled(Complex64::new(s, 0.0)))?
        .projector();
    let residual = u.conjugate(&coherent)?.distance(&coherent)?;
    rows.push(CheckRow::new(
        "coherence_detected",
        residual,
        0.0,
        residual > 0.0,
    ));
    Ok(())
}

/// The 0/pi-mixed single photon is `(|01><01| + |10><10|) / 2` whatever the
/// misaligned phase.
fn single_photon_rows(opts: &VerifyOptions, rows: &mut Vec<CheckRow>) -> Result<()> {
    let k = opts.dense_k_max;
    let target = DensityMatrix::mixture(
        k,
        &[
            (0.5, &FockVector::basis(1, 0, k)?),
            (0.5, &FockVector::basis(0, 1, k)?),
        ],
    )?;
    for delta in [0.0, 0.3, FRAC_PI_2] {
        let rho = key_mixed_k_photon(delta, 1, k)?;
        let mut row = CheckRow::below(
            "single_photon_delta",
            rho.distance(&target)?,
            SINGLE_PHOTON_TOLERANCE,
        );
        row.delta = Some(delta);
        rows.push(row);
    }
    Ok(())
}

/// Averaging the common phase over `PHASE_POINTS` values reproduces the
/// Poisson mixture of `|k^delta>` states.
fn continuous_randomization_rows(opts: &VerifyOptions, rows: &mut Vec<CheckRow>) -> Result<()> {
    let k = opts.dense_k_max;
    let delta = 0.3;
    for &mu in [opts.intensities.first(), opts.intensities.last()]
        .into_iter()
        .flatten()
    {
        let sampled = phase_averaged_pair(mu, delta, PHASE_POINTS, k)?;
        let exact = fock_mixture(mu, delta, k)?;
        let mut row = CheckRow::below(
            "continuous_randomization",
            sampled.distance(&exact)?,
            RANDOMIZATION_TOLERANCE,
        );
        row.mu = Some(mu);
        row.delta = Some(delta);
        row.leakage = 1.0 - sampled.trace();
        rows.push(row);
    }
    Ok(())
}

/// Closed form of the fidelity between the odd states at intensities `mu`
/// and `nu`: both are equal mixtures of two orthogonal states with matching
/// photon-number components.
pub fn odd_state_fidelity_closed_form(mu: f64, nu: f64) -> f64 {
    let p_mu = (-mu).exp() * mu.sinh();
    let p_nu = (-nu).exp() * nu.sinh();
    let mut sum = 0.0;
    for k in (1..1000u64).step_by(2) {
        let term = (poisson_pmf(mu, k) * poisson_pmf(nu, k)).sqrt();
        sum += term;
        if k as f64 > mu.max(nu) && term <= sum * 1e-18 {
            break;
        }
    }
    sum / (p_mu * p_nu).sqrt()
}

fn odd_state_rows(opts: &VerifyOptions, rows: &mut Vec<CheckRow>) -> Result<()> {
    let (mu, nu) = (0.5, 0.1);
    let k = opts.dense_k_max;
    let a = parity_mixture(mu, true, k)?;
    let b = parity_mixture(nu, true, k)?;
    let f = fidelity(&a, &b)?;
    let closed = odd_state_fidelity_closed_form(mu, nu);
    let mut row = CheckRow::new(
        "odd_state_fidelity",
        f,
        closed,
        (f - closed).abs() <= ODD_FIDELITY_TOLERANCE,
    );
    row.mu = Some(mu);
    row.nu = Some(nu);
    row.leakage = 1.0 - a.trace().min(b.trace());
    rows.push(row);
    Ok(())
}
