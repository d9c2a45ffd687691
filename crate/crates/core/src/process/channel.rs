//! Kraus, Choi and chi representations of quantum processes.
//!
//! Choi operators live on `H ⊗ K` with `H` a copy of the input space and
//! `K` the output space; the composite index `(j, a)` is `j·D_o + a`.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{
    eigh, eigh_unchecked, partial_trace, pauli_x, pauli_y, pauli_z, Matrix, Subsystem, C64, NEG_CLAMP,
};
use crate::state::{entropy_of_spectrum, DensityMatrix};

/// Tolerance on `‖tr_K E − 1‖_F` for trace preservation.
pub const TP_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct ChoiOperator {
    dim_in: usize,
    dim_out: usize,
    matrix: Matrix,
    trace_preserving: bool,
}

impl ChoiOperator {
    pub fn new(matrix: Matrix, dim_in: usize, dim_out: usize) -> Result<Self> {
        if dim_in == 0 || dim_out == 0 || !matrix.is_square() || matrix.rows() != dim_in * dim_out {
            return Err(Error::Dimension("Choi matrix must be (D_i·D_o)-square"));
        }
        matrix.check_hermitian()?;
        let e = eigh(&matrix)?;
        if e.min() < -NEG_CLAMP {
            return Err(Error::NotPositive(e.min()));
        }
        Ok(Self::from_parts(matrix.hermitize(), dim_in, dim_out))
    }

    pub(crate) fn from_parts(matrix: Matrix, dim_in: usize, dim_out: usize) -> Self {
        let dev = tp_deviation(&matrix, dim_in, dim_out);
        ChoiOperator { dim_in, dim_out, matrix, trace_preserving: dev <= TP_TOL }
    }

    /// `1_{H⊗K}/D_o`, the completely depolarizing channel.
    pub fn maximally_mixed(dim_in: usize, dim_out: usize) -> Self {
        Self::from_parts(Matrix::identity(dim_in * dim_out).scale(1.0 / dim_out as f64), dim_in, dim_out)
    }

    pub fn dim_in(&self) -> usize {
        self.dim_in
    }

    pub fn dim_out(&self) -> usize {
        self.dim_out
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn is_trace_preserving(&self) -> bool {
        self.trace_preserving
    }

    /// `‖tr_K E − 1_H‖_F`.
    pub fn tp_deviation(&self) -> f64 {
        tp_deviation(&self.matrix, self.dim_in, self.dim_out)
    }
}

pub(crate) fn tp_deviation(e: &Matrix, dim_in: usize, dim_out: usize) -> f64 {
    let t = partial_trace(e, dim_in, dim_out, Subsystem::K).expect("dims checked");
    (&t - &Matrix::identity(dim_in)).frobenius_norm()
}

#[derive(Clone, Debug, PartialEq)]
pub struct KrausSet {
    dim_in: usize,
    dim_out: usize,
    operators: Vec<Matrix>,
}

impl KrausSet {
    /// Each operator is `D_o × D_i`; requires `Σ K†K ≤ 1`.
    pub fn new(operators: Vec<Matrix>) -> Result<Self> {
        let first = operators.first().ok_or(Error::InvalidArgument("empty Kraus set"))?;
        let (dim_out, dim_in) = (first.rows(), first.cols());
        if operators.iter().any(|k| k.rows() != dim_out || k.cols() != dim_in) {
            return Err(Error::Dimension("Kraus operators must share one shape"));
        }
        let mut s = Matrix::zeros(dim_in, dim_in);
        for k in &operators {
            s += &(&k.adjoint() * k);
        }
        let top = eigh_unchecked(&s.hermitize())?.max();
        if top > 1.0 + 1e-10 {
            return Err(Error::InvalidArgument("Kraus operators sum above the identity"));
        }
        Ok(KrausSet { dim_in, dim_out, operators })
    }

    pub fn operators(&self) -> &[Matrix] {
        &self.operators
    }

    pub fn dim_in(&self) -> usize {
        self.dim_in
    }

    pub fn dim_out(&self) -> usize {
        self.dim_out
    }

    /// `Σ K ρ K†`.
    pub fn apply(&self, rho: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(self.dim_out, self.dim_out);
        for k in &self.operators {
            out += &(&(k * rho) * &k.adjoint());
        }
        out
    }
}

/// `E = Σ_m |ψ_m⟩⟨ψ_m|`, `|ψ_m⟩ = Σ_j |j⟩ ⊗ K_m|j⟩`.
pub fn kraus_to_choi(k: &KrausSet) -> ChoiOperator {
    let (di, d_o) = (k.dim_in, k.dim_out);
    let n = di * d_o;
    let mut e = Matrix::zeros(n, n);
    for km in &k.operators {
        let psi: Vec<C64> = (0..n).map(|r| km[(r % d_o, r / d_o)]).collect();
        e += &Matrix::outer(&psi, &psi);
    }
    ChoiOperator::from_parts(e.hermitize(), di, d_o)
}

/// `ρ_o = tr_H{E(ρᵀ ⊗ 1_K)}`.
pub fn choi_apply(e: &ChoiOperator, rho_in: &DensityMatrix) -> Result<DensityMatrix> {
    Ok(DensityMatrix::from_matrix_unchecked(choi_apply_matrix(e, rho_in.matrix())?))
}

pub(crate) fn choi_apply_matrix(e: &ChoiOperator, rho: &Matrix) -> Result<Matrix> {
    if rho.rows() != e.dim_in || !rho.is_square() {
        return Err(Error::Dimension("input state dimension differs from D_i"));
    }
    let (di, d_o) = (e.dim_in, e.dim_out);
    let m = &e.matrix;
    let out = Matrix::from_fn(d_o, d_o, |a, b| {
        let mut s = C64::new(0.0, 0.0);
        for j in 0..di {
            for k in 0..di {
                s += m[(j * d_o + a, k * d_o + b)] * rho[(j, k)];
            }
        }
        s
    });
    Ok(out.hermitize())
}

pub fn identity_channel(d: usize) -> ChoiOperator {
    kraus_to_choi(&KrausSet::new(alloc::vec![Matrix::identity(d)]).expect("identity is a channel"))
}

pub fn unitary_channel(u: &Matrix) -> Result<ChoiOperator> {
    Ok(kraus_to_choi(&KrausSet::new(alloc::vec![u.clone()])?))
}

/// Kraus set `{√(1−Σp)·1, √p₁σ_x, √p₂σ_y, √p₃σ_z}`.
pub fn pauli_channel_kraus(p: [f64; 3]) -> Result<KrausSet> {
    let p0 = 1.0 - p.iter().sum::<f64>();
    if p.iter().any(|&x| !(x >= 0.0)) || p0 < -1e-15 {
        return Err(Error::InvalidArgument("Pauli channel weights must be a subprobability"));
    }
    let ops = [Matrix::identity(2), pauli_x(), pauli_y(), pauli_z()]
        .iter()
        .zip([p0.max(0.0), p[0], p[1], p[2]])
        .map(|(s, w)| s.scale(libm::sqrt(w)))
        .collect();
    KrausSet::new(ops)
}

/// Trace-orthonormal operator basis `{1, σ_x, σ_y, σ_z}/√2`.
pub fn pauli_operator_basis() -> Vec<Matrix> {
    let r = core::f64::consts::FRAC_1_SQRT_2;
    [Matrix::identity(2), pauli_x(), pauli_y(), pauli_z()].iter().map(|s| s.scale(r)).collect()
}

/// Matrix units `|a⟩⟨j|` (`D_o × D_i`), ordered `j·D_o + a`.
pub fn matrix_unit_basis(dim_in: usize, dim_out: usize) -> Vec<Matrix> {
    let mut out = Vec::with_capacity(dim_in * dim_out);
    for j in 0..dim_in {
        for a in 0..dim_out {
            let mut m = Matrix::zeros(dim_out, dim_in);
            m[(a, j)] = C64::new(1.0, 0.0);
            out.push(m);
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChiMatrix {
    pub basis: Vec<Matrix>,
    pub matrix: Matrix,
}

/// `U = Σ_j |e_j⟩⟨ẽ_j|` with `|e_j⟩ = Σ_l |l⟩ ⊗ B_j|l⟩`.
fn basis_unitary(basis: &[Matrix], dim_in: usize, dim_out: usize) -> Result<Matrix> {
    let n = dim_in * dim_out;
    if basis.len() != n {
        return Err(Error::InvalidArgument("operator basis must have D_i·D_o elements"));
    }
    if basis.iter().any(|b| b.rows() != dim_out || b.cols() != dim_in) {
        return Err(Error::Dimension("basis operators must be D_o × D_i"));
    }
    let u = Matrix::from_fn(n, n, |r, j| basis[j][(r % dim_out, r / dim_out)]);
    if (&(&u.adjoint() * &u) - &Matrix::identity(n)).max_abs() > 1e-10 {
        return Err(Error::InvalidArgument("operator basis is not trace-orthonormal"));
    }
    Ok(u)
}

/// `χ = (U† E U)ᵀ`, so that `E = U χᵀ U†`.
pub fn choi_to_chi(e: &ChoiOperator, basis: &[Matrix]) -> Result<ChiMatrix> {
    let u = basis_unitary(basis, e.dim_in, e.dim_out)?;
    let chi = (&(&u.adjoint() * &e.matrix) * &u).transpose().hermitize();
    Ok(ChiMatrix { basis: basis.to_vec(), matrix: chi })
}

pub fn chi_to_choi(chi: &ChiMatrix, dim_in: usize, dim_out: usize) -> Result<ChoiOperator> {
    let u = basis_unitary(&chi.basis, dim_in, dim_out)?;
    let e = (&(&u * &chi.matrix.transpose()) * &u.adjoint()).hermitize();
    ChoiOperator::new(e, dim_in, dim_out)
}

/// `S(E) = −tr{(E/D_i) ln(E/D_i)}`.
pub fn process_entropy(e: &ChoiOperator) -> f64 {
    match eigh_unchecked(&e.matrix) {
        Ok(eig) => {
            let q: Vec<f64> = eig.values.iter().map(|x| x / e.dim_in as f64).collect();
            entropy_of_spectrum(&q)
        }
        Err(_) => f64::NAN,
    }
}

/// `(1/2D_i) tr{(E₁ − E₂)²}`.
pub fn hs_process_error(e1: &ChoiOperator, e2: &ChoiOperator) -> Result<f64> {
    if e1.dim_in != e2.dim_in || e1.dim_out != e2.dim_out {
        return Err(Error::Dimension("Choi operators differ in shape"));
    }
    let d = (&e1.matrix - &e2.matrix).frobenius_norm();
    Ok(d * d / (2.0 * e1.dim_in as f64))
}

/// True when the last two estimates differ by at most `threshold`.
pub fn sequential_stopping(estimates: &[ChoiOperator], threshold: f64) -> Result<bool> {
    if estimates.len() < 2 {
        return Err(Error::InvalidArgument("need at least two estimates"));
    }
    let n = estimates.len();
    Ok(hs_process_error(&estimates[n - 2], &estimates[n - 1])? <= threshold)
}

/// True when the estimate lies within `threshold` of a supplied target.
pub fn target_stopping(estimate: &ChoiOperator, target: &ChoiOperator, threshold: f64) -> Result<bool> {
    Ok(hs_process_error(estimate, target)? <= threshold)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::{gaussian_matrix, orthonormal_columns, random_density_matrix, random_kraus};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn close(a: &Matrix, b: &Matrix, tol: f64) -> bool {
        (a - b).max_abs() <= tol
    }

    fn depolarizing() -> ChoiOperator {
        kraus_to_choi(&pauli_channel_kraus([0.25, 0.25, 0.25]).unwrap())
    }

    fn pauli_e_by_hand(p: [f64; 3]) -> Matrix {
        let [p1, p2, p3] = p;
        let a = 1.0 - p1 - p2;
        let d = 1.0 - p1 - p2 - 2.0 * p3;
        Matrix::from_real_rows(&[
            &[a, 0.0, 0.0, d],
            &[0.0, p1 + p2, p1 - p2, 0.0],
            &[0.0, p1 - p2, p1 + p2, 0.0],
            &[d, 0.0, 0.0, a],
        ])
    }

    #[test]
    fn identity_choi_is_rank_one() {
        let e = identity_channel(2);
        let want = Matrix::from_real_rows(&[
            &[1.0, 0.0, 0.0, 1.0],
            &[0.0, 0.0, 0.0, 0.0],
            &[0.0, 0.0, 0.0, 0.0],
            &[1.0, 0.0, 0.0, 1.0],
        ]);
        assert_eq!(e.matrix(), &want);
        let ev = eigh(e.matrix()).unwrap().values;
        assert_eq!(ev.iter().filter(|&&x| x > 1e-12).count(), 1);
        assert!(e.is_trace_preserving());
    }

    #[test]
    fn pauli_channel_choi_matches_printed_matrix() {
        let p = [0.1, 0.05, 0.2];
        let e = kraus_to_choi(&pauli_channel_kraus(p).unwrap());
        assert!(close(e.matrix(), &pauli_e_by_hand(p), 1e-12));
    }

    #[test]
    fn apply_examples() {
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        let rho = DensityMatrix::new(random_density_matrix(&mut rng, 2, 2)).unwrap();
        let out = choi_apply(&identity_channel(2), &rho).unwrap();
        assert!(close(out.matrix(), rho.matrix(), 1e-15));
        let out = choi_apply(&depolarizing(), &rho).unwrap();
        let oracle = pauli_channel_kraus([0.25, 0.25, 0.25]).unwrap().apply(rho.matrix());
        assert!(close(out.matrix(), &oracle, 1e-15));
        assert!(close(out.matrix(), &Matrix::identity(2).scale(0.5), 1e-15));
        let up = DensityMatrix::new(Matrix::from_real_diag(&[1.0, 0.0])).unwrap();
        let out = choi_apply(&unitary_channel(&pauli_x()).unwrap(), &up).unwrap();
        assert_eq!(out.matrix(), &Matrix::from_real_diag(&[0.0, 1.0]));
    }

    #[test]
    fn chi_examples() {
        let p = [0.1, 0.05, 0.2];
        let e = kraus_to_choi(&pauli_channel_kraus(p).unwrap());
        let chi = choi_to_chi(&e, &pauli_operator_basis()).unwrap();
        let want = Matrix::from_real_diag(&[2.0 * (1.0 - 0.35), 0.2, 0.1, 0.4]);
        assert!(close(&chi.matrix, &want, 1e-12));
        let mut ev = eigh(e.matrix()).unwrap().values;
        ev.sort_by(f64::total_cmp);
        let mut want_ev = [0.2, 0.1, 0.4, 1.3];
        want_ev.sort_by(f64::total_cmp);
        for (a, b) in ev.iter().zip(want_ev) {
            assert!((a - b).abs() < 1e-10);
        }
        let chi = choi_to_chi(&identity_channel(2), &pauli_operator_basis()).unwrap();
        assert!(close(&chi.matrix, &Matrix::from_real_diag(&[2.0, 0.0, 0.0, 0.0]), 1e-12));
        let back = chi_to_choi(&chi, 2, 2).unwrap();
        assert!(close(back.matrix(), identity_channel(2).matrix(), 1e-12));
        assert!(choi_to_chi(&e, &pauli_operator_basis()[..3]).is_err());
    }

    #[test]
    fn entropy_examples() {
        assert!(process_entropy(&identity_channel(2)).abs() < 1e-10);
        assert!((process_entropy(&depolarizing()) - libm::log(4.0)).abs() < 1e-12);
        let e = kraus_to_choi(&pauli_channel_kraus([0.125, 0.125, 0.125]).unwrap());
        let q = [0.625, 0.125, 0.125, 0.125];
        let want: f64 = q.iter().map(|x| -x * libm::log(*x)).sum();
        assert!((process_entropy(&e) - want).abs() < 1e-12);
    }

    #[test]
    fn hs_examples() {
        let id = identity_channel(2);
        let x = unitary_channel(&pauli_x()).unwrap();
        assert_eq!(hs_process_error(&id, &id).unwrap(), 0.0);
        assert!((hs_process_error(&id, &x).unwrap() - 2.0).abs() < 1e-14);
        assert!((hs_process_error(&id, &depolarizing()).unwrap() - 0.75).abs() < 1e-14);
        assert!(hs_process_error(&id, &identity_channel(3)).is_err());
    }

    #[test]
    fn stopping_rules() {
        let id = identity_channel(2);
        let x = unitary_channel(&pauli_x()).unwrap();
        assert!(sequential_stopping(&[x.clone(), id.clone(), id.clone()], 1e-300).unwrap());
        assert!(!sequential_stopping(&[id.clone(), x.clone()], 0.0).unwrap());
        assert!(sequential_stopping(core::slice::from_ref(&id), 1.0).is_err());
        assert!(target_stopping(&id, &depolarizing(), 0.8).unwrap());
    }

    #[test]
    fn choi_validation() {
        assert!(ChoiOperator::new(Matrix::identity(4), 2, 3).is_err());
        assert!(ChoiOperator::new(Matrix::from_real_diag(&[1.0, -0.5, 0.0, 0.0]), 2, 2).is_err());
        let e = ChoiOperator::new(Matrix::identity(4).scale(0.3), 2, 2).unwrap();
        assert!(!e.is_trace_preserving());
        assert!(ChoiOperator::maximally_mixed(3, 2).is_trace_preserving());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(50))]

        #[test]
        fn coisometry_invariance(seed in any::<u64>(), di in 2usize..4, d_o in 2usize..4, m in 2usize..5, extra in 0usize..3) {
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            let ks = random_kraus(&mut rng, di, d_o, m);
            // 𝒰 is m × (m+extra) with orthonormal rows
            let u = orthonormal_columns(&gaussian_matrix(&mut rng, m + extra, m)).adjoint();
            let transformed: Vec<Matrix> = (0..m + extra)
                .map(|mm| {
                    let mut k = Matrix::zeros(d_o, di);
                    for (mp, kmp) in ks.iter().enumerate() {
                        k += &kmp.scale_c(u[(mp, mm)]);
                    }
                    k
                })
                .collect();
            let e1 = kraus_to_choi(&KrausSet::new(ks).unwrap());
            let e2 = kraus_to_choi(&KrausSet::new(transformed).unwrap());
            prop_assert!(close(e1.matrix(), e2.matrix(), 1e-12));
        }

        #[test]
        fn chi_round_trip_and_spectrum(seed in any::<u64>(), di in 2usize..4, d_o in 2usize..4, m in 2usize..5) {
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            let e = kraus_to_choi(&KrausSet::new(random_kraus(&mut rng, di, d_o, m)).unwrap());
            let bases = [matrix_unit_basis(di, d_o), {
                // a random trace-orthonormal basis: rotate matrix units by a unitary
                let w = crate::random::random_unitary(&mut rng, di * d_o);
                let units = matrix_unit_basis(di, d_o);
                (0..di * d_o).map(|j| {
                    let mut b = Matrix::zeros(d_o, di);
                    for (k, uk) in units.iter().enumerate() {
                        b += &uk.scale_c(w[(k, j)]);
                    }
                    b
                }).collect()
            }];
            for basis in bases.iter() {
                let chi = choi_to_chi(&e, basis).unwrap();
                let back = chi_to_choi(&chi, di, d_o).unwrap();
                prop_assert!(close(back.matrix(), e.matrix(), 1e-10));
                let a = eigh(e.matrix()).unwrap().values;
                let b = eigh(&chi.matrix).unwrap().values;
                for (x, y) in a.iter().zip(&b) {
                    prop_assert!((x - y).abs() <= 1e-10);
                }
            }
        }

        #[test]
        fn apply_matches_kraus_and_is_linear(seed in any::<u64>(), di in 2usize..4, d_o in 2usize..4, w in 0.0f64..1.0) {
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            let ks = KrausSet::new(random_kraus(&mut rng, di, d_o, 3)).unwrap();
            let e = kraus_to_choi(&ks);
            let r1 = DensityMatrix::new(random_density_matrix(&mut rng, di, di)).unwrap();
            let r2 = DensityMatrix::new(random_density_matrix(&mut rng, di, 1)).unwrap();
            let o1 = choi_apply(&e, &r1).unwrap();
            prop_assert!(close(o1.matrix(), &ks.apply(r1.matrix()), 1e-12));
            prop_assert!((o1.matrix().trace_re() - 1.0).abs() <= 1e-10);
            let mix = DensityMatrix::new(&r1.matrix().scale(w) + &r2.matrix().scale(1.0 - w)).unwrap();
            let lhs = choi_apply(&e, &mix).unwrap();
            let rhs = &o1.matrix().scale(w) + &choi_apply(&e, &r2).unwrap().matrix().scale(1.0 - w);
            prop_assert!(close(lhs.matrix(), &rhs, 1e-12));
        }
    }
}
