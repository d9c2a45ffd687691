//! Dense complex matrices with the tensor, partial-trace and spectral
//! helpers the estimators rely on.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub, SubAssign};

use nalgebra::{DMatrix, SymmetricEigen};
pub use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

/// Eigenvalues below this are treated as round-off and clamped to zero.
pub const NEG_CLAMP: f64 = 1e-10;
/// Eigenvalues below this signal a broken positivity invariant.
pub const NEG_ERROR: f64 = 1e-6;

/// Row-major dense complex matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

/// Which tensor factor of `H ⊗ K` to trace out.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Subsystem {
    H,
    K,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        if rows == 0 || cols == 0 || data.len() != rows * cols {
            return Err(Error::Dimension("entry count does not match shape"));
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![C64::new(0.0, 0.0); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = C64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Matrix { rows, cols, data }
    }

    pub fn from_real_diag(d: &[f64]) -> Self {
        let mut m = Matrix::zeros(d.len(), d.len());
        for (i, &x) in d.iter().enumerate() {
            m[(i, i)] = C64::new(x, 0.0);
        }
        m
    }

    /// Builds a matrix from real rows; all rows must have equal length.
    pub fn from_real_rows(rows: &[&[f64]]) -> Self {
        let c = rows[0].len();
        Matrix::from_fn(rows.len(), c, |i, j| C64::new(rows[i][j], 0.0))
    }

    /// `|u⟩⟨v|`.
    pub fn outer(u: &[C64], v: &[C64]) -> Self {
        Matrix::from_fn(u.len(), v.len(), |i, j| u[i] * v[j].conj())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    /// Row-major entries.
    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn adjoint(&self) -> Self {
        Matrix::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn transpose(&self) -> Self {
        Matrix::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn conj(&self) -> Self {
        Matrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(|z| z.conj()).collect() }
    }

    pub fn scale(&self, s: f64) -> Self {
        Matrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(|z| z * s).collect() }
    }

    pub fn scale_c(&self, s: C64) -> Self {
        Matrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(|z| z * s).collect() }
    }

    pub fn trace(&self) -> C64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn trace_re(&self) -> f64 {
        self.trace().re
    }

    pub fn frobenius_norm(&self) -> f64 {
        libm::sqrt(self.data.iter().map(|z| z.norm_sqr()).sum())
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// `(M + M†)/2`.
    pub fn hermitize(&self) -> Self {
        Matrix::from_fn(self.rows, self.cols, |i, j| (self[(i, j)] + self[(j, i)].conj()) * 0.5)
    }

    pub fn hermiticity_defect(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let mut d: f64 = 0.0;
        for i in 0..self.rows {
            for j in i..self.cols {
                d = d.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        d
    }

    /// `‖M − M†‖_max ≤ tol·max(1, ‖M‖_max)`.
    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.is_square() && self.hermiticity_defect() <= tol * self.max_abs().max(1.0)
    }

    pub(crate) fn check_hermitian(&self) -> Result<()> {
        if !self.is_square() {
            return Err(Error::Dimension("matrix is not square"));
        }
        if !self.is_hermitian(1e-12) {
            return Err(Error::NotHermitian(self.hermiticity_defect()));
        }
        Ok(())
    }

    pub fn try_mul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::Dimension("inner dimensions differ"));
        }
        Ok(self * other)
    }

    fn assert_same_shape(&self, other: &Matrix) {
        assert!(
            self.rows == other.rows && self.cols == other.cols,
            "matrix shapes differ: {}x{} vs {}x{}",
            self.rows,
            self.cols,
            other.rows,
            other.cols
        );
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = C64;
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i * self.cols + j]
    }
}

impl Mul for &Matrix {
    type Output = Matrix;
    fn mul(self, rhs: &Matrix) -> Matrix {
        assert_eq!(self.cols, rhs.rows, "inner dimensions differ");
        let mut out = Matrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a.re == 0.0 && a.im == 0.0 {
                    continue;
                }
                let row = &rhs.data[k * rhs.cols..(k + 1) * rhs.cols];
                let dst = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
                for (d, b) in dst.iter_mut().zip(row) {
                    *d += a * b;
                }
            }
        }
        out
    }
}

impl Add for &Matrix {
    type Output = Matrix;
    fn add(self, rhs: &Matrix) -> Matrix {
        self.assert_same_shape(rhs);
        Matrix { rows: self.rows, cols: self.cols, data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect() }
    }
}

impl Sub for &Matrix {
    type Output = Matrix;
    fn sub(self, rhs: &Matrix) -> Matrix {
        self.assert_same_shape(rhs);
        Matrix { rows: self.rows, cols: self.cols, data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect() }
    }
}

impl Neg for &Matrix {
    type Output = Matrix;
    fn neg(self) -> Matrix {
        self.scale(-1.0)
    }
}

impl AddAssign<&Matrix> for Matrix {
    fn add_assign(&mut self, rhs: &Matrix) {
        self.assert_same_shape(rhs);
        for (a, b) in self.data.iter_mut().zip(&rhs.data) {
            *a += b;
        }
    }
}

impl SubAssign<&Matrix> for Matrix {
    fn sub_assign(&mut self, rhs: &Matrix) {
        self.assert_same_shape(rhs);
        for (a, b) in self.data.iter_mut().zip(&rhs.data) {
            *a -= b;
        }
    }
}

/// Tensor product `a ⊗ b`.
pub fn kron(a: &Matrix, b: &Matrix) -> Matrix {
    Matrix::from_fn(a.rows * b.rows, a.cols * b.cols, |i, j| a[(i / b.rows, j / b.cols)] * b[(i % b.rows, j % b.cols)])
}

/// Traces out one factor of a square operator on `H ⊗ K`, with `H` the
/// left (slow) index.
pub fn partial_trace(m: &Matrix, dim_h: usize, dim_k: usize, traced: Subsystem) -> Result<Matrix> {
    if !m.is_square() || dim_h == 0 || dim_k == 0 || m.rows != dim_h * dim_k {
        return Err(Error::Dimension("partial trace factor dims do not match"));
    }
    Ok(match traced {
        Subsystem::K => {
            Matrix::from_fn(dim_h, dim_h, |j, k| (0..dim_k).map(|a| m[(j * dim_k + a, k * dim_k + a)]).sum())
        }
        Subsystem::H => {
            Matrix::from_fn(dim_k, dim_k, |a, b| (0..dim_h).map(|j| m[(j * dim_k + a, j * dim_k + b)]).sum())
        }
    })
}

/// `Re tr{a b}`.
pub fn trace_inner(a: &Matrix, b: &Matrix) -> Result<f64> {
    if a.rows != b.cols || a.cols != b.rows {
        return Err(Error::Dimension("trace inner product needs matching dims"));
    }
    Ok(trace_prod(a, b).re)
}

/// `tr{a b}` without forming the product.
pub(crate) fn trace_prod(a: &Matrix, b: &Matrix) -> C64 {
    let mut s = C64::new(0.0, 0.0);
    for i in 0..a.rows {
        for k in 0..a.cols {
            s += a[(i, k)] * b[(k, i)];
        }
    }
    s
}

/// Spectral decomposition `M = V diag(λ) V†`, eigenvalues ascending.
#[derive(Clone, Debug)]
pub struct Eigh {
    pub values: Vec<f64>,
    pub vectors: Matrix,
}

impl Eigh {
    /// `V diag(f(λ)) V†`.
    pub fn map(&self, mut f: impl FnMut(f64) -> f64) -> Matrix {
        let n = self.values.len();
        let fv: Vec<f64> = self.values.iter().map(|&x| f(x)).collect();
        let v = &self.vectors;
        let mut out = Matrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let mut s = C64::new(0.0, 0.0);
                for k in 0..n {
                    s += v[(i, k)] * v[(j, k)].conj() * fv[k];
                }
                out[(i, j)] = s;
                out[(j, i)] = s.conj();
            }
        }
        out
    }

    pub fn min(&self) -> f64 {
        self.values[0]
    }

    pub fn max(&self) -> f64 {
        *self.values.last().unwrap()
    }
}

/// Hermitian eigendecomposition; rejects non-Hermitian input.
pub fn eigh(m: &Matrix) -> Result<Eigh> {
    m.check_hermitian()?;
    eigh_unchecked(&m.hermitize())
}

pub(crate) fn eigh_unchecked(m: &Matrix) -> Result<Eigh> {
    let n = m.rows;
    let dm = DMatrix::from_row_slice(n, n, &m.data);
    let se = SymmetricEigen::try_new(dm, f64::EPSILON, 10_000).ok_or(Error::EigenFailure)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| se.eigenvalues[a].total_cmp(&se.eigenvalues[b]));
    let values: Vec<f64> = order.iter().map(|&k| se.eigenvalues[k]).collect();
    if values.iter().any(|x| !x.is_finite()) {
        return Err(Error::EigenFailure);
    }
    let vectors = Matrix::from_fn(n, n, |i, j| se.eigenvectors[(i, order[j])]);
    Ok(Eigh { values, vectors })
}

fn check_psd(e: &Eigh) -> Result<()> {
    if e.min() < -NEG_ERROR {
        return Err(Error::NotPositive(e.min()));
    }
    Ok(())
}

/// Principal square root of a positive semidefinite matrix.
pub fn matrix_sqrt_psd(m: &Matrix) -> Result<Matrix> {
    let e = eigh(m)?;
    check_psd(&e)?;
    Ok(e.map(|x| libm::sqrt(x.max(0.0))))
}

/// Matrix logarithm with eigenvalues clamped to at least `floor` (absolute).
pub fn matrix_log_floored(m: &Matrix, floor: f64) -> Result<Matrix> {
    if !(floor > 0.0) {
        return Err(Error::InvalidArgument("log floor must be positive"));
    }
    let e = eigh(m)?;
    check_psd(&e)?;
    Ok(e.map(|x| libm::log(x.max(floor))))
}

pub fn pauli_x() -> Matrix {
    Matrix::from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]])
}

pub fn pauli_y() -> Matrix {
    let i = C64::new(0.0, 1.0);
    Matrix::new(2, 2, vec![C64::new(0.0, 0.0), -i, i, C64::new(0.0, 0.0)]).unwrap()
}

pub fn pauli_z() -> Matrix {
    Matrix::from_real_diag(&[1.0, -1.0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::{random_hermitian, random_psd};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn close(a: &Matrix, b: &Matrix, tol: f64) -> bool {
        (a - b).max_abs() <= tol
    }

    #[test]
    fn kron_examples() {
        assert_eq!(kron(&Matrix::identity(2), &Matrix::identity(2)), Matrix::identity(4));
        let k = kron(&pauli_x(), &pauli_z());
        let want = Matrix::from_real_rows(&[
            &[0.0, 0.0, 1.0, 0.0],
            &[0.0, 0.0, 0.0, -1.0],
            &[1.0, 0.0, 0.0, 0.0],
            &[0.0, -1.0, 0.0, 0.0],
        ]);
        assert_eq!(k, want);
        let two = Matrix::from_real_diag(&[2.0]);
        let m = pauli_y();
        assert_eq!(kron(&two, &m), m.scale(2.0));
    }

    #[test]
    fn partial_trace_examples() {
        let pt = partial_trace(&Matrix::identity(4), 2, 2, Subsystem::K).unwrap();
        assert_eq!(pt, Matrix::identity(2).scale(2.0));

        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let rho = random_psd(&mut rng, 2);
        let sigma = random_psd(&mut rng, 3);
        let pt = partial_trace(&kron(&rho, &sigma), 2, 3, Subsystem::K).unwrap();
        assert!(close(&pt, &rho.scale_c(sigma.trace()), 1e-12));
        let pt = partial_trace(&kron(&rho, &sigma), 2, 3, Subsystem::H).unwrap();
        assert!(close(&pt, &sigma.scale_c(rho.trace()), 1e-12));

        // identity channel: E = Σ_jk |j⟩⟨k| ⊗ |j⟩⟨k| = 2|Ψ+⟩⟨Ψ+|
        let e = Matrix::from_fn(4, 4, |r, c| {
            let (j, a, k, b) = (r / 2, r % 2, c / 2, c % 2);
            C64::new(if j == a && k == b { 1.0 } else { 0.0 }, 0.0)
        });
        assert_eq!(partial_trace(&e, 2, 2, Subsystem::K).unwrap(), Matrix::identity(2));
        assert!(partial_trace(&e, 3, 2, Subsystem::K).is_err());
    }

    #[test]
    fn eigh_examples() {
        let e = eigh(&pauli_z()).unwrap();
        assert!((e.values[0] + 1.0).abs() < 1e-14 && (e.values[1] - 1.0).abs() < 1e-14);
        let e = eigh(&Matrix::identity(3)).unwrap();
        assert!(e.values.iter().all(|x| (x - 1.0).abs() < 1e-14));
        let m = (&Matrix::identity(2) + &pauli_x()).scale(0.5);
        let e = eigh(&m).unwrap();
        assert!(e.values[0].abs() < 1e-14 && (e.values[1] - 1.0).abs() < 1e-14);
        assert!(eigh(&Matrix::from_real_rows(&[&[0.0, 1.0], &[0.0, 0.0]])).is_err());
    }

    #[test]
    fn eigh_reconstructs_random_hermitian() {
        let mut rng = ChaCha20Rng::seed_from_u64(11);
        for n in 1..=9 {
            let m = random_hermitian(&mut rng, n);
            let e = eigh(&m).unwrap();
            assert!(e.values.windows(2).all(|w| w[0] <= w[1]));
            let v = &e.vectors;
            assert!(close(&(&v.adjoint() * v), &Matrix::identity(n), 1e-10));
            assert!(close(&e.map(|x| x), &m, 1e-10));
        }
    }

    #[test]
    fn sqrt_examples() {
        assert!(close(&matrix_sqrt_psd(&Matrix::identity(3)).unwrap(), &Matrix::identity(3), 1e-14));
        let s = matrix_sqrt_psd(&Matrix::identity(2).scale(4.0)).unwrap();
        assert!(close(&s, &Matrix::identity(2).scale(2.0), 1e-14));
        let s = matrix_sqrt_psd(&Matrix::from_real_diag(&[9.0, 1.0])).unwrap();
        assert!(close(&s, &Matrix::from_real_diag(&[3.0, 1.0]), 1e-14));
        assert!(matches!(matrix_sqrt_psd(&Matrix::from_real_diag(&[1.0, -1e-3])), Err(Error::NotPositive(_))));
        assert!(matrix_sqrt_psd(&Matrix::from_real_diag(&[1.0, -1e-11])).is_ok());
    }

    #[test]
    fn log_examples() {
        let l = matrix_log_floored(&Matrix::identity(3), 1e-12).unwrap();
        assert!(l.max_abs() < 1e-14);
        let e1 = core::f64::consts::E;
        let l = matrix_log_floored(&Matrix::from_real_diag(&[e1, e1]), 1e-12).unwrap();
        assert!(close(&l, &Matrix::identity(2), 1e-14));
        let l = matrix_log_floored(&Matrix::from_real_diag(&[1.0, 0.0]), 1e-12).unwrap();
        assert!(close(&l, &Matrix::from_real_diag(&[0.0, libm::log(1e-12)]), 1e-12));
    }

    #[test]
    fn trace_inner_examples() {
        let r = core::f64::consts::FRAC_1_SQRT_2;
        let (x, y, one) = (pauli_x().scale(r), pauli_y().scale(r), Matrix::identity(2).scale(r));
        assert!((trace_inner(&x, &x).unwrap() - 1.0).abs() < 1e-15);
        assert!(trace_inner(&x, &y).unwrap().abs() < 1e-15);
        assert!((trace_inner(&one, &one).unwrap() - 1.0).abs() < 1e-15);
        assert!(trace_inner(&x, &Matrix::identity(3)).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn sqrt_squares_back(seed in any::<u64>(), n in 1usize..7) {
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            let m = random_psd(&mut rng, n);
            let s = matrix_sqrt_psd(&m).unwrap();
            prop_assert!((&(&s * &s) - &m).frobenius_norm() <= 1e-9 * (1.0 + m.frobenius_norm()));
        }

        #[test]
        fn partial_trace_is_linear(seed in any::<u64>(), dh in 1usize..4, dk in 1usize..4,
                                   alpha in -3.0f64..3.0, beta in -3.0f64..3.0) {
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            let a = random_hermitian(&mut rng, dh * dk);
            let b = random_hermitian(&mut rng, dh * dk);
            for t in [Subsystem::H, Subsystem::K] {
                let lhs = partial_trace(&(&a.scale(alpha) + &b.scale(beta)), dh, dk, t).unwrap();
                let rhs = &partial_trace(&a, dh, dk, t).unwrap().scale(alpha)
                    + &partial_trace(&b, dh, dk, t).unwrap().scale(beta);
                prop_assert!(close(&lhs, &rhs, 1e-12));
                prop_assert!((lhs.trace() - (&a.scale(alpha) + &b.scale(beta)).trace()).norm() < 1e-12);
            }
        }

        #[test]
        fn bac_identity(seed in any::<u64>(), dh in 1usize..4, dk in 1usize..4) {
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            let prod = |rng: &mut ChaCha20Rng| kron(&random_hermitian(rng, dh), &random_hermitian(rng, dk));
            let (a, b, c) = (prod(&mut rng), prod(&mut rng), prod(&mut rng));
            let ik = Matrix::identity(dk);
            let tb = partial_trace(&b, dh, dk, Subsystem::K).unwrap();
            let ta = partial_trace(&a, dh, dk, Subsystem::K).unwrap();
            let tc = partial_trace(&c, dh, dk, Subsystem::K).unwrap();
            let lhs = partial_trace(&(&(&kron(&tb, &ik) * &a) * &kron(&tc, &ik)), dh, dk, Subsystem::K).unwrap();
            let rhs = &(&tb * &ta) * &tc;
            prop_assert!(close(&lhs, &rhs, 1e-10 * (1.0 + rhs.max_abs())));
        }

        #[test]
        fn kron_associative_and_trace_multiplicative(seed in any::<u64>(), n1 in 1usize..4, n2 in 1usize..4, n3 in 1usize..3) {
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            let a = random_hermitian(&mut rng, n1);
            let b = random_hermitian(&mut rng, n2);
            let c = random_hermitian(&mut rng, n3);
            prop_assert!(close(&kron(&kron(&a, &b), &c), &kron(&a, &kron(&b, &c)), 1e-12));
            prop_assert!((kron(&a, &b).trace() - a.trace() * b.trace()).norm() <= 1e-12 * (1.0 + a.max_abs() * b.max_abs()));
        }
    }
}
