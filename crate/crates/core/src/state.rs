//! Density matrices, qubit Bloch vectors and entropy.

use crate::error::{Error, Result};
use crate::linalg::{eigh, pauli_x, pauli_y, pauli_z, Matrix, NEG_CLAMP};

/// Positive, unit-trace Hermitian matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix(Matrix);

impl DensityMatrix {
    pub fn new(m: Matrix) -> Result<Self> {
        m.check_hermitian()?;
        let t = m.trace_re();
        if (t - 1.0).abs() > 1e-10 {
            return Err(Error::Trace(t));
        }
        let e = eigh(&m)?;
        if e.min() < -NEG_CLAMP {
            return Err(Error::NotPositive(e.min()));
        }
        Ok(DensityMatrix(m.hermitize()))
    }

    /// Normalizes a positive matrix to unit trace first.
    pub fn from_unnormalized(m: Matrix) -> Result<Self> {
        let t = m.trace_re();
        if !(t > 0.0) {
            return Err(Error::Trace(t));
        }
        DensityMatrix::new(m.scale(1.0 / t))
    }

    pub fn maximally_mixed(d: usize) -> Self {
        DensityMatrix(Matrix::identity(d).scale(1.0 / d as f64))
    }

    /// `|ψ⟩⟨ψ|/⟨ψ|ψ⟩`.
    pub fn pure(psi: &[crate::C64]) -> Result<Self> {
        let n: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
        if psi.is_empty() || !(n > 0.0) {
            return Err(Error::InvalidArgument("state vector must be nonzero"));
        }
        Ok(DensityMatrix(Matrix::outer(psi, psi).scale(1.0 / n)))
    }

    pub(crate) fn from_matrix_unchecked(m: Matrix) -> Self {
        DensityMatrix(m)
    }

    pub fn dim(&self) -> usize {
        self.0.rows()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn into_matrix(self) -> Matrix {
        self.0
    }

    pub fn purity(&self) -> f64 {
        crate::linalg::trace_prod(&self.0, &self.0).re
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BlochVector {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl BlochVector {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        BlochVector { x, y, z }
    }

    pub fn norm(&self) -> f64 {
        libm::sqrt(self.x * self.x + self.y * self.y + self.z * self.z)
    }
}

/// `ρ = (1 + s·σ)/2`.
pub fn bloch_to_rho(s: BlochVector) -> Result<DensityMatrix> {
    if s.norm() > 1.0 + 1e-10 {
        return Err(Error::InvalidArgument("Bloch vector longer than one"));
    }
    let m = &(&(&Matrix::identity(2) + &pauli_x().scale(s.x)) + &pauli_y().scale(s.y)) + &pauli_z().scale(s.z);
    Ok(DensityMatrix(m.scale(0.5)))
}

/// Bloch vector of a qubit state (`s_a = tr{ρσ_a}`).
pub fn rho_to_bloch(rho: &DensityMatrix) -> Result<BlochVector> {
    if rho.dim() != 2 {
        return Err(Error::Dimension("Bloch vectors need a qubit state"));
    }
    let m = rho.matrix();
    Ok(BlochVector { x: 2.0 * m[(0, 1)].re, y: -2.0 * m[(0, 1)].im, z: (m[(0, 0)] - m[(1, 1)]).re })
}

/// `S = −Σ λ ln λ` with `0 ln 0 = 0`.
pub fn von_neumann_entropy(rho: &DensityMatrix) -> f64 {
    match eigh(rho.matrix()) {
        Ok(e) => entropy_of_spectrum(&e.values),
        Err(_) => f64::NAN,
    }
}

pub(crate) fn entropy_of_spectrum(values: &[f64]) -> f64 {
    values.iter().filter(|&&x| x > 0.0).map(|&x| -x * libm::log(x)).sum()
}

/// Leading `d_rec × d_rec` block, not renormalized.
pub fn truncate_state(m: &Matrix, d_rec: usize) -> Result<Matrix> {
    if !m.is_square() || d_rec == 0 || d_rec > m.rows() {
        return Err(Error::Dimension("truncation dimension exceeds matrix dimension"));
    }
    Ok(Matrix::from_fn(d_rec, d_rec, |i, j| m[(i, j)]))
}
