//! Seeded random operators: states, unitaries, Kraus sets.

use alloc::vec::Vec;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::linalg::{Matrix, C64};

pub fn gaussian_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| {
        C64::new(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal))
    })
}

pub fn random_hermitian<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Matrix {
    gaussian_matrix(rng, n, n).hermitize()
}

/// `A A†` with Gaussian `A` (full rank with probability one).
pub fn random_psd<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Matrix {
    let a = gaussian_matrix(rng, n, n);
    (&a * &a.adjoint()).hermitize()
}

/// Hilbert-Schmidt distributed density matrix of the given rank.
pub fn random_density_matrix<R: Rng + ?Sized>(rng: &mut R, n: usize, rank: usize) -> Matrix {
    let a = gaussian_matrix(rng, n, rank.max(1));
    let m = (&a * &a.adjoint()).hermitize();
    let t = m.trace_re();
    m.scale(1.0 / t)
}

/// Orthonormalizes the columns of `a` (rows ≥ cols) by modified
/// Gram-Schmidt with one re-orthogonalization pass.
pub fn orthonormal_columns(a: &Matrix) -> Matrix {
    let (n, k) = (a.rows(), a.cols());
    let mut cols: Vec<Vec<C64>> = Vec::with_capacity(k);
    for j in 0..k {
        let mut v: Vec<C64> = (0..n).map(|i| a[(i, j)]).collect();
        for _ in 0..2 {
            for q in &cols {
                let proj: C64 = q.iter().zip(&v).map(|(x, y)| x.conj() * y).sum();
                for (vi, qi) in v.iter_mut().zip(q) {
                    *vi -= proj * qi;
                }
            }
        }
        let norm = libm::sqrt(v.iter().map(|z| z.norm_sqr()).sum());
        for vi in v.iter_mut() {
            *vi /= norm;
        }
        cols.push(v);
    }
    Matrix::from_fn(n, k, |i, j| cols[j][i])
}

pub fn random_unitary<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Matrix {
    orthonormal_columns(&gaussian_matrix(rng, n, n))
}

/// `m` Kraus operators `D_o × D_i` with `Σ K†K = 1`, cut from a random
/// isometry. Needs `m·D_o ≥ D_i`.
pub fn random_kraus<R: Rng + ?Sized>(rng: &mut R, d_in: usize, d_out: usize, m: usize) -> Vec<Matrix> {
    assert!(m * d_out >= d_in, "too few Kraus operators for an isometry");
    let v = orthonormal_columns(&gaussian_matrix(rng, d_out * m, d_in));
    (0..m).map(|k| Matrix::from_fn(d_out, d_in, |a, j| v[(k * d_out + a, j)])).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn kraus_sets_are_trace_preserving() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let ks = random_kraus(&mut rng, 3, 2, 4);
        let mut s = Matrix::zeros(3, 3);
        for k in &ks {
            s += &(&k.adjoint() * k);
        }
        assert!((&s - &Matrix::identity(3)).max_abs() < 1e-12);
    }

    #[test]
    fn unitaries_are_unitary() {
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let u = random_unitary(&mut rng, 5);
        assert!((&(&u * &u.adjoint()) - &Matrix::identity(5)).max_abs() < 1e-12);
    }
}
