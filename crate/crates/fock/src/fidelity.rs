//! Fidelity between truncated states and the yield-deviation bound it implies.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{FockError, Result};
use crate::space::{DensityMatrix, FockVector};

/// Eigenvalues below this are treated as evidence of a non-positive input.
pub const PSD_TOLERANCE: f64 = 1e-9;

/// Relative eigenvalue cut used to restrict `rho` to its support.
const SUPPORT_CUT: f64 = 1e-15;

/// `|<a|b>|` for states normalized first, so truncation leakage does not
/// bias the result.
pub fn fidelity_pure(a: &FockVector, b: &FockVector) -> Result<f64> {
    let (na, nb) = (a.norm_sqr(), b.norm_sqr());
    if na == 0.0 || nb == 0.0 {
        return Err(FockError::NotPositive(0.0));
    }
    Ok((a.inner(b)?.norm() / (na * nb).sqrt()).min(1.0))
}

/// `1 - |<a|b>|^2` for the normalized states, from Lagrange's identity
/// `|a|^2 |b|^2 - |<a|b>|^2 = sum_{i<j} |a_i b_j - a_j b_i|^2`. No term
/// subtracts two nearly equal states, so tiny infidelities keep their
/// relative precision.
pub fn pure_infidelity(a: &FockVector, b: &FockVector) -> Result<f64> {
    // Rejects vectors from different spaces.
    a.inner(b)?;
    let (na, nb) = (a.norm_sqr(), b.norm_sqr());
    if na == 0.0 || nb == 0.0 {
        return Err(FockError::NotPositive(0.0));
    }
    let support: Vec<usize> = (0..a.amplitudes().len())
        .filter(|&i| a.amplitudes()[i] != Complex64::ZERO || b.amplitudes()[i] != Complex64::ZERO)
        .collect();
    let (x, y) = (a.amplitudes(), b.amplitudes());
    let mut sum = 0.0;
    for (n, &i) in support.iter().enumerate() {
        for &j in &support[n + 1..] {
            sum += (x[i] * y[j] - x[j] * y[i]).norm_sqr();
        }
    }
    Ok((sum / (na * nb)).min(1.0))
}

/// Uhlmann fidelity `Tr sqrt(sqrt(rho) sigma sqrt(rho))`.
///
/// `rho` is diagonalized once and `sqrt(rho) sigma sqrt(rho)` is formed on its
/// support, which is usually a handful of dimensions.
pub fn fidelity(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    if rho.k_max() != sigma.k_max() {
        return Err(FockError::Dimension {
            expected: rho.matrix().nrows(),
            found: sigma.matrix().nrows(),
        });
    }
    check_positive(&sigma.hermitian_part())?;
    let eig = SymmetricEigen::new(rho.hermitian_part());
    let min = eig.eigenvalues.min();
    if min < -PSD_TOLERANCE {
        return Err(FockError::NotPositive(min));
    }
    let top = eig.eigenvalues.max();
    if top <= 0.0 {
        return Ok(0.0);
    }
    let support: Vec<usize> = (0..eig.eigenvalues.len())
        .filter(|&i| eig.eigenvalues[i] > top * SUPPORT_CUT)
        .collect();
    let v = eig.eigenvectors.select_columns(&support);
    let roots: Vec<f64> = support.iter().map(|&i| eig.eigenvalues[i].sqrt()).collect();
    let mut inner = v.adjoint() * sigma.hermitian_part() * &v;
    for i in 0..support.len() {
        for j in 0..support.len() {
            inner[(i, j)] *= roots[i] * roots[j];
        }
    }
    let inner = (&inner + inner.adjoint()).map(|x| x * 0.5);
    let eig = SymmetricEigen::new(inner);
    let min = eig.eigenvalues.min();
    if min < -PSD_TOLERANCE {
        return Err(FockError::NotPositive(min));
    }
    Ok(eig
        .eigenvalues
        .iter()
        .map(|&l| l.max(0.0).sqrt())
        .sum::<f64>()
        .min(1.0))
}

fn check_positive(m: &DMatrix<Complex64>) -> Result<()> {
    let min = m.symmetric_eigenvalues().min();
    if min < -PSD_TOLERANCE {
        return Err(FockError::NotPositive(min));
    }
    Ok(())
}

/// `sqrt(1 - F^2)`, the largest yield difference two states of fidelity `F`
/// can show under any measurement.
pub fn yield_deviation_bound(fidelity: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&fidelity) {
        return Err(FockError::Domain {
            what: "fidelity",
            value: fidelity,
        });
    }
    Ok((1.0 - fidelity * fidelity).max(0.0).sqrt())
}
