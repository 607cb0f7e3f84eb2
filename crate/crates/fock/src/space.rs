//! Truncated two-mode Fock space: vectors, operators and density matrices.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{FockError, Result};

/// Number of basis states `|m, n>` with `m + n <= k_max`.
pub fn dimension(k_max: usize) -> usize {
    (k_max + 1) * (k_max + 2) / 2
}

/// Position of `|m, n>` in the basis, ordered by total photon number and then by `n`.
pub fn index(m: usize, n: usize) -> usize {
    let total = m + n;
    total * (total + 1) / 2 + n
}

/// Photon numbers `(m, n)` of a basis position.
pub fn photon_numbers(index: usize) -> (usize, usize) {
    let mut total = 0;
    while (total + 1) * (total + 2) / 2 <= index {
        total += 1;
    }
    let n = index - total * (total + 1) / 2;
    (total - n, n)
}

/// A state vector over the truncated basis. It need not be normalized; the
/// missing norm is the weight lost to truncation.
#[derive(Debug, Clone, PartialEq)]
pub struct FockVector {
    k_max: usize,
    amplitudes: DVector<Complex64>,
}

impl FockVector {
    pub fn zeros(k_max: usize) -> Self {
        FockVector {
            k_max,
            amplitudes: DVector::zeros(dimension(k_max)),
        }
    }

    /// The basis state `|m, n>`.
    pub fn basis(m: usize, n: usize, k_max: usize) -> Result<Self> {
        if m + n > k_max {
            return Err(FockError::Truncation {
                photons: m + n,
                k_max,
            });
        }
        let mut v = Self::zeros(k_max);
        v.amplitudes[index(m, n)] = Complex64::new(1.0, 0.0);
        Ok(v)
    }

    pub fn from_amplitudes(k_max: usize, amplitudes: DVector<Complex64>) -> Result<Self> {
        if amplitudes.len() != dimension(k_max) {
            return Err(FockError::Dimension {
                expected: dimension(k_max),
                found: amplitudes.len(),
            });
        }
        Ok(FockVector { k_max, amplitudes })
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }

    pub fn amplitudes(&self) -> &DVector<Complex64> {
        &self.amplitudes
    }

    pub fn amplitude(&self, m: usize, n: usize) -> Complex64 {
        if m + n > self.k_max {
            Complex64::new(0.0, 0.0)
        } else {
            self.amplitudes[index(m, n)]
        }
    }

    pub(crate) fn set(&mut self, m: usize, n: usize, value: Complex64) {
        self.amplitudes[index(m, n)] = value;
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.norm_squared()
    }

    /// `1 - |psi|^2`, clamped at zero.
    pub fn leakage(&self) -> f64 {
        (1.0 - self.norm_sqr()).max(0.0)
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &FockVector) -> Result<Complex64> {
        self.same_space(other.k_max)?;
        Ok(self.amplitudes.dotc(&other.amplitudes))
    }

    /// The vector scaled to unit norm; the zero vector stays zero.
    pub fn normalized(&self) -> Self {
        let norm = self.norm_sqr().sqrt();
        if norm == 0.0 {
            return self.clone();
        }
        FockVector {
            k_max: self.k_max,
            amplitudes: self.amplitudes.unscale(norm),
        }
    }

    /// Probability of each total photon number `0..=k_max`.
    pub fn photon_number_distribution(&self) -> Vec<f64> {
        let mut p = vec![0.0; self.k_max + 1];
        for (i, a) in self.amplitudes.iter().enumerate() {
            let (m, n) = photon_numbers(i);
            p[m + n] += a.norm_sqr();
        }
        p
    }

    pub fn scaled(&self, factor: Complex64) -> Self {
        FockVector {
            k_max: self.k_max,
            amplitudes: self.amplitudes.map(|a| a * factor),
        }
    }

    pub fn add(&self, other: &FockVector) -> Result<Self> {
        self.same_space(other.k_max)?;
        Ok(FockVector {
            k_max: self.k_max,
            amplitudes: &self.amplitudes + &other.amplitudes,
        })
    }

    pub fn sub(&self, other: &FockVector) -> Result<Self> {
        self.same_space(other.k_max)?;
        Ok(FockVector {
            k_max: self.k_max,
            amplitudes: &self.amplitudes - &other.amplitudes,
        })
    }

    /// `|self><self|`.
    pub fn projector(&self) -> DensityMatrix {
        DensityMatrix {
            k_max: self.k_max,
            matrix: &self.amplitudes * self.amplitudes.adjoint(),
        }
    }

    fn same_space(&self, k_max: usize) -> Result<()> {
        if self.k_max == k_max {
            Ok(())
        } else {
            Err(FockError::Dimension {
                expected: dimension(self.k_max),
                found: dimension(k_max),
            })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatorLabel {
    ParityProjectorOdd,
    ParityProjectorEven,
    /// `U_A (x) U_B` with `U = exp(i pi a^dagger a)`, the joint encoding operator.
    EncodingU,
    Custom,
}

/// A dense operator over the truncated basis.
#[derive(Debug, Clone, PartialEq)]
pub struct FockOperator {
    pub label: OperatorLabel,
    k_max: usize,
    matrix: DMatrix<Complex64>,
}

impl FockOperator {
    fn diagonal(label: OperatorLabel, k_max: usize, entry: impl Fn(usize) -> f64) -> Self {
        let d = dimension(k_max);
        let diag = DVector::from_fn(d, |i, _| {
            let (m, n) = photon_numbers(i);
            Complex64::new(entry(m + n), 0.0)
        });
        FockOperator {
            label,
            k_max,
            matrix: DMatrix::from_diagonal(&diag),
        }
    }

    /// Projector onto odd total photon number.
    pub fn parity_odd(k_max: usize) -> Self {
        Self::diagonal(OperatorLabel::ParityProjectorOdd, k_max, |k| (k % 2) as f64)
    }

    /// Projector onto even total photon number.
    pub fn parity_even(k_max: usize) -> Self {
        Self::diagonal(OperatorLabel::ParityProjectorEven, k_max, |k| {
            ((k + 1) % 2) as f64
        })
    }

    /// `(-1)^(m + n)` on `|m, n>`.
    pub fn encoding_u(k_max: usize) -> Self {
        Self::diagonal(OperatorLabel::EncodingU, k_max, |k| {
            if k % 2 == 0 {
                1.0
            } else {
                -1.0
            }
        })
    }

    pub fn identity(k_max: usize) -> Self {
        Self::diagonal(OperatorLabel::Custom, k_max, |_| 1.0)
    }

    pub fn custom(k_max: usize, matrix: DMatrix<Complex64>) -> Result<Self> {
        let d = dimension(k_max);
        if matrix.nrows() != d || matrix.ncols() != d {
            return Err(FockError::Dimension {
                expected: d,
                found: matrix.nrows(),
            });
        }
        Ok(FockOperator {
            label: OperatorLabel::Custom,
            k_max,
            matrix,
        })
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn apply(&self, v: &FockVector) -> Result<FockVector> {
        v.same_space(self.k_max)?;
        Ok(FockVector {
            k_max: self.k_max,
            amplitudes: &self.matrix * &v.amplitudes,
        })
    }

    pub fn compose(&self, other: &FockOperator) -> Result<FockOperator> {
        self.check(other.k_max)?;
        Ok(FockOperator {
            label: OperatorLabel::Custom,
            k_max: self.k_max,
            matrix: &self.matrix * &other.matrix,
        })
    }

    /// Frobenius norm of `self - other`.
    pub fn distance(&self, other: &FockOperator) -> Result<f64> {
        self.check(other.k_max)?;
        Ok((&self.matrix - &other.matrix).norm())
    }

    /// Frobenius norm of `self other - other self`.
    pub fn commutator_norm(&self, other: &FockOperator) -> Result<f64> {
        self.check(other.k_max)?;
        Ok((&self.matrix * &other.matrix - &other.matrix * &self.matrix).norm())
    }

    /// `self rho self^dagger`.
    pub fn conjugate(&self, rho: &DensityMatrix) -> Result<DensityMatrix> {
        self.check(rho.k_max)?;
        Ok(DensityMatrix {
            k_max: self.k_max,
            matrix: &self.matrix * &rho.matrix * self.matrix.adjoint(),
        })
    }

    fn check(&self, k_max: usize) -> Result<()> {
        if self.k_max == k_max {
            Ok(())
        } else {
            Err(FockError::Dimension {
                expected: dimension(self.k_max),
                found: dimension(k_max),
            })
        }
    }
}

/// A (possibly sub-normalized) density operator over the truncated basis.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    k_max: usize,
    matrix: DMatrix<Complex64>,
}

impl DensityMatrix {
    pub fn zeros(k_max: usize) -> Self {
        let d = dimension(k_max);
        DensityMatrix {
            k_max,
            matrix: DMatrix::zeros(d, d),
        }
    }

    pub fn from_matrix(k_max: usize, matrix: DMatrix<Complex64>) -> Result<Self> {
        let d = dimension(k_max);
        if matrix.nrows() != d || matrix.ncols() != d {
            return Err(FockError::Dimension {
                expected: d,
                found: matrix.nrows(),
            });
        }
        Ok(DensityMatrix { k_max, matrix })
    }

    /// `sum_i w_i |psi_i><psi_i|`.
    pub fn mixture(k_max: usize, terms: &[(f64, &FockVector)]) -> Result<Self> {
        let mut rho = Self::zeros(k_max);
        for &(w, psi) in terms {
            rho.add_scaled(w, &psi.projector())?;
        }
        Ok(rho)
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace().re
    }

    pub fn add_scaled(&mut self, weight: f64, other: &DensityMatrix) -> Result<()> {
        if other.k_max != self.k_max {
            return Err(FockError::Dimension {
                expected: dimension(self.k_max),
                found: dimension(other.k_max),
            });
        }
        self.matrix += other.matrix.map(|x| x * weight);
        Ok(())
    }

    pub fn scaled(&self, weight: f64) -> Self {
        DensityMatrix {
            k_max: self.k_max,
            matrix: self.matrix.map(|x| x * weight),
        }
    }

    /// Frobenius norm of `self - other`.
    pub fn distance(&self, other: &DensityMatrix) -> Result<f64> {
        if other.k_max != self.k_max {
            return Err(FockError::Dimension {
                expected: dimension(self.k_max),
                found: dimension(other.k_max),
            });
        }
        Ok((&self.matrix - &other.matrix).norm())
    }

    /// `(rho + rho^dagger) / 2`, absorbing rounding drift before eigen-decomposition.
    pub fn hermitian_part(&self) -> DMatrix<Complex64> {
        (&self.matrix + self.matrix.adjoint()).map(|x| x * 0.5)
    }

    /// Average of `rho` and `U rho U^dagger`, which removes odd/even coherence.
    pub fn twirl(&self) -> Result<DensityMatrix> {
        let u = FockOperator::encoding_u(self.k_max);
        let mut out = u.conjugate(self)?;
        out.add_scaled(1.0, self)?;
        Ok(out.scaled(0.5))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_round_trips() {
        let k = 7;
        for i in 0..dimension(k) {
            let (m, n) = photon_numbers(i);
            assert!(m + n <= k);
            assert_eq!(index(m, n), i);
        }
        assert_eq!(dimension(40), 861);
    }

    #[test]
    fn projectors_are_idempotent_and_complementary() {
        let k = 6;
        let (o, e) = (FockOperator::parity_odd(k), FockOperator::parity_even(k));
        assert!(o.compose(&o).unwrap().distance(&o).unwrap() < 1e-12);
        let mut sum = o.matrix().clone();
        sum += e.matrix();
        assert!((sum - FockOperator::identity(k).matrix()).norm() < 1e-12);
    }

    #[test]
    fn mismatched_spaces_are_rejected() {
        let a = FockVector::zeros(3);
        let b = FockVector::zeros(4);
        assert!(a.inner(&b).is_err());
        assert!(FockVector::basis(3, 2, 4).is_err());
    }
}
