//! Probability operator measurements: builders, Gram analysis, the
//! measured/unmeasured operator subspaces and detector efficiencies.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::error::{Error, Result};
use crate::linalg::{eigh, eigh_unchecked, pauli_x, pauli_y, pauli_z, trace_prod, Matrix, C64, NEG_CLAMP};
use crate::random::random_psd;
use crate::state::DensityMatrix;

/// Relative threshold for counting Gram eigenvalues as positive.
pub const GRAM_RANK_TOL: f64 = 1e-10;
/// Gram-Schmidt candidates with a smaller relative residual are dependent.
pub const GS_DROP_TOL: f64 = 1e-10;
const PERFECT_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct Pom {
    dim: usize,
    outcomes: Vec<Matrix>,
    labels: Option<Vec<String>>,
    efficiencies: Option<Vec<Vec<f64>>>,
}

impl Pom {
    /// Validates outcome positivity and `Σ Π_j ≤ 1`.
    pub fn new(outcomes: Vec<Matrix>, labels: Option<Vec<String>>) -> Result<Self> {
        let first = outcomes.first().ok_or(Error::InvalidPom("no outcomes"))?;
        let dim = first.rows();
        if let Some(l) = &labels {
            if l.len() != outcomes.len() {
                return Err(Error::InvalidPom("label count differs from outcome count"));
            }
        }
        let mut outcomes = outcomes;
        for o in outcomes.iter_mut() {
            if !o.is_square() || o.rows() != dim {
                return Err(Error::Dimension("outcomes must share one square dimension"));
            }
            o.check_hermitian()?;
            *o = o.hermitize();
            let e = eigh(o)?;
            if e.min() < -NEG_CLAMP {
                return Err(Error::NotPositive(e.min()));
            }
        }
        let g = sum(&outcomes, dim);
        let gmax = eigh_unchecked(&g)?.max();
        if gmax > 1.0 + 1e-10 {
            return Err(Error::PomExceedsIdentity(gmax));
        }
        Ok(Pom { dim, outcomes, labels, efficiencies: None })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.outcomes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outcomes.is_empty()
    }

    pub fn outcomes(&self) -> &[Matrix] {
        &self.outcomes
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    /// The `η_jk` matrix this POM was derived with, if any.
    pub fn efficiencies(&self) -> Option<&[Vec<f64>]> {
        self.efficiencies.as_deref()
    }

    /// `G = Σ_j Π_j`.
    pub fn sum(&self) -> Matrix {
        sum(&self.outcomes, self.dim)
    }

    /// `‖G − 1‖_max ≤ 1e-10`.
    pub fn is_perfect(&self) -> bool {
        (&self.sum() - &Matrix::identity(self.dim)).max_abs() <= PERFECT_TOL
    }

    /// Every outcome multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Result<Pom> {
        let n = self.len();
        let eta: Vec<Vec<f64>> = (0..n).map(|j| (0..n).map(|k| if j == k { c } else { 0.0 }).collect()).collect();
        apply_efficiencies(self, &eta)
    }
}

fn sum(outcomes: &[Matrix], dim: usize) -> Matrix {
    let mut g = Matrix::zeros(dim, dim);
    for o in outcomes {
        g += o;
    }
    g
}

/// Rank-one projectors onto the columns of `basis`.
pub fn make_von_neumann(basis: &Matrix) -> Result<Pom> {
    let d = basis.rows();
    if !basis.is_square() {
        return Err(Error::Dimension("basis must be square"));
    }
    if (&(&basis.adjoint() * basis) - &Matrix::identity(d)).max_abs() > 1e-10 {
        return Err(Error::InvalidPom("basis columns are not orthonormal"));
    }
    let outcomes = (0..d)
        .map(|k| {
            let col: Vec<C64> = (0..d).map(|i| basis[(i, k)]).collect();
            Matrix::outer(&col, &col)
        })
        .collect();
    Pom::new(outcomes, None)
}

/// Symmetric three-outcome qubit measurement.
pub fn make_trine() -> Pom {
    let one = Matrix::identity(2);
    let h = libm::sqrt(3.0) / 2.0;
    let outcomes = [(0.0, 1.0), (h, -0.5), (-h, -0.5)]
        .iter()
        .map(|&(x, z)| (&(&one + &pauli_x().scale(x)) + &pauli_z().scale(z)).scale(1.0 / 3.0))
        .collect();
    Pom::new(outcomes, None).expect("trine is a valid POM")
}

/// `(1 ± σ_a)/6` for `a = x, y, z`.
pub fn make_six() -> Pom {
    let one = Matrix::identity(2);
    let mut outcomes = Vec::with_capacity(6);
    for s in [pauli_x(), pauli_y(), pauli_z()] {
        outcomes.push((&one + &s).scale(1.0 / 6.0));
        outcomes.push((&one - &s).scale(1.0 / 6.0));
    }
    let labels = ["+x", "-x", "+y", "-y", "+z", "-z"].iter().map(|s| String::from(*s)).collect();
    Pom::new(outcomes, Some(labels)).expect("six-outcome POM is valid")
}

/// Two commuting qutrit outcomes whose ML estimator set can be non-unique.
pub fn make_qutrit_two_outcome() -> Pom {
    Pom::new(
        alloc::vec![Matrix::from_real_diag(&[0.5, 0.5, 1.0 / 3.0]), Matrix::from_real_diag(&[0.5, 0.5, 2.0 / 3.0]),],
        None,
    )
    .expect("qutrit POM is valid")
}

/// Orthonormal Hermite functions `ψ_0(x) … ψ_{n−1}(x)`.
pub fn hermite_functions(x: f64, n: usize) -> Vec<f64> {
    let mut psi = Vec::with_capacity(n);
    if n == 0 {
        return psi;
    }
    psi.push(libm::pow(core::f64::consts::PI, -0.25) * libm::exp(-0.5 * x * x));
    if n > 1 {
        psi.push(libm::sqrt(2.0) * x * psi[0]);
    }
    for k in 1..n.saturating_sub(1) {
        let kf = k as f64;
        let next = x * libm::sqrt(2.0 / (kf + 1.0)) * psi[k] - libm::sqrt(kf / (kf + 1.0)) * psi[k - 1];
        psi.push(next);
    }
    psi
}

fn grid_spacing(x_grid: &[f64]) -> Result<f64> {
    if x_grid.len() < 2 {
        return Err(Error::InvalidArgument("quadrature grid needs at least two points"));
    }
    let dx = x_grid[1] - x_grid[0];
    if !(dx > 0.0) {
        return Err(Error::InvalidArgument("grid spacing must be positive"));
    }
    for w in x_grid.windows(2) {
        if ((w[1] - w[0]) - dx).abs() > 1e-9 * dx.max(1.0) {
            return Err(Error::InvalidArgument("quadrature grid must be uniform"));
        }
    }
    Ok(dx)
}

/// Binned quadrature outcomes `Δx |x_θ⟩⟨x_θ| / n_θ` in the first `d_rec`
/// Fock levels, one per (θ, x) pair, θ-major.
///
/// The `1/n_θ` weight keeps the total bounded by the identity when several
/// phases are combined.
pub fn make_quadrature_pom(thetas: &[f64], x_grid: &[f64], d_rec: usize) -> Result<Pom> {
    if d_rec == 0 || thetas.is_empty() {
        return Err(Error::InvalidArgument("need d_rec ≥ 1 and at least one phase"));
    }
    let dx = grid_spacing(x_grid)?;
    let w = dx / thetas.len() as f64;
    let mut outcomes = Vec::with_capacity(thetas.len() * x_grid.len());
    for &theta in thetas {
        for &x in x_grid {
            let psi = hermite_functions(x, d_rec);
            if psi.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite);
            }
            let ket: Vec<C64> = psi.iter().enumerate().map(|(n, &p)| C64::from_polar(p, n as f64 * theta)).collect();
            outcomes.push(Matrix::outer(&ket, &ket).scale(w));
        }
    }
    Pom::new(outcomes, None)
}

/// Phase-averaged quadrature outcomes `Δx Σ_n ψ_n(x)² |n⟩⟨n|`.
pub fn make_phase_randomized_fock_mixture(x_grid: &[f64], d_rec: usize) -> Result<Pom> {
    if d_rec == 0 {
        return Err(Error::InvalidArgument("need d_rec ≥ 1"));
    }
    let dx = grid_spacing(x_grid)?;
    let outcomes = x_grid
        .iter()
        .map(|&x| {
            let d: Vec<f64> = hermite_functions(x, d_rec).iter().map(|p| dx * p * p).collect();
            Matrix::from_real_diag(&d)
        })
        .collect();
    Pom::new(outcomes, None)
}

/// Trine-type POM realized by a partially polarizing beam splitter with
/// H reflection amplitude `mu`, a half-wave plate at π/8 and a PBS.
pub fn optical_trine_outcomes(mu: f64) -> Result<Pom> {
    if !(mu.abs() <= 1.0) {
        return Err(Error::InvalidArgument("reflection amplitude must satisfy |mu| ≤ 1"));
    }
    let ppbs = Matrix::from_real_diag(&[mu, 1.0]);
    let c = core::f64::consts::FRAC_1_SQRT_2;
    let hwp = Matrix::from_real_rows(&[&[c, c], &[c, -c]]);
    let path = &ppbs * &hwp;
    let transmitted = Matrix::from_real_diag(&[1.0 - mu * mu, 0.0]);
    let mut outcomes = alloc::vec![transmitted];
    for k in 0..2 {
        let phi: Vec<C64> = (0..2).map(|i| path[(i, k)]).collect();
        outcomes.push(Matrix::outer(&phi, &phi));
    }
    Pom::new(outcomes, None)
}

/// Reweights outcomes: `Π̃_j = Σ_k η_jk Π_k`.
pub fn apply_efficiencies(pom: &Pom, eta: &[Vec<f64>]) -> Result<Pom> {
    if eta.is_empty() || eta.iter().any(|row| row.len() != pom.len()) {
        return Err(Error::Dimension("efficiency matrix needs one column per outcome"));
    }
    if eta.iter().flatten().any(|&x| !(x >= 0.0) || !x.is_finite()) {
        return Err(Error::InvalidArgument("efficiencies must be finite and nonnegative"));
    }
    for k in 0..pom.len() {
        let col: f64 = eta.iter().map(|row| row[k]).sum();
        if col > 1.0 + 1e-12 {
            return Err(Error::InvalidArgument("efficiency column sum exceeds one"));
        }
    }
    let outcomes = eta
        .iter()
        .map(|row| {
            let mut m = Matrix::zeros(pom.dim, pom.dim);
            for (w, o) in row.iter().zip(&pom.outcomes) {
                if *w != 0.0 {
                    m += &o.scale(*w);
                }
            }
            m
        })
        .collect();
    let labels = if eta.len() == pom.len() { pom.labels.clone() } else { None };
    let mut out = Pom::new(outcomes, labels)?;
    out.efficiencies = Some(eta.to_vec());
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PomClass {
    PerfectComplete,
    ImperfectComplete,
    PerfectIncomplete,
    ImperfectIncomplete,
}

impl PomClass {
    pub fn as_str(&self) -> &'static str {
        match self {
            PomClass::PerfectComplete => "perfect-complete",
            PomClass::ImperfectComplete => "imperfect-complete",
            PomClass::PerfectIncomplete => "perfect-incomplete",
            PomClass::ImperfectIncomplete => "imperfect-incomplete",
        }
    }
}

impl fmt::Display for PomClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            PomClass::PerfectComplete => "perfect informationally complete",
            PomClass::ImperfectComplete => "imperfect informationally complete",
            PomClass::PerfectIncomplete => "perfect informationally incomplete",
            PomClass::ImperfectIncomplete => "imperfect informationally incomplete",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GramReport {
    pub dim: usize,
    /// Gram eigenvalues, descending.
    pub eigenvalues: Vec<f64>,
    pub n_positive: usize,
    pub perfect: bool,
    pub classification: PomClass,
}

/// Eigen-analysis of `𝒢_jk = tr{Π_j Π_k}`.
pub fn gram_report(pom: &Pom) -> GramReport {
    let n = pom.len();
    let mut g = Matrix::zeros(n, n);
    for j in 0..n {
        for k in j..n {
            let v = C64::new(trace_prod(&pom.outcomes[j], &pom.outcomes[k]).re, 0.0);
            g[(j, k)] = v;
            g[(k, j)] = v;
        }
    }
    let mut eigenvalues = eigh_unchecked(&g).map(|e| e.values).unwrap_or_default();
    eigenvalues.reverse();
    let top = eigenvalues.first().copied().unwrap_or(0.0);
    let n_positive = eigenvalues.iter().filter(|&&x| x > GRAM_RANK_TOL * top).count().min(pom.dim * pom.dim);
    let perfect = pom.is_perfect();
    let complete = n_positive == pom.dim * pom.dim;
    let classification = match (perfect, complete) {
        (true, true) => PomClass::PerfectComplete,
        (false, true) => PomClass::ImperfectComplete,
        (true, false) => PomClass::PerfectIncomplete,
        (false, false) => PomClass::ImperfectIncomplete,
    };
    GramReport { dim: pom.dim, eigenvalues, n_positive, perfect, classification }
}

/// Trace-orthonormal Hermitian operator basis split into the span of the
/// POM outcomes and a complement.
#[derive(Clone, Debug, PartialEq)]
pub struct OperatorBasis {
    pub dim: usize,
    pub meas: Vec<Matrix>,
    pub unmeas: Vec<Matrix>,
}

impl OperatorBasis {
    pub fn is_complete(&self) -> bool {
        self.meas.len() + self.unmeas.len() == self.dim * self.dim
    }
}

/// Orthonormalizes `cand` against `basis`; `None` if dependent.
fn gs_step(basis: &[&Matrix], cand: &Matrix) -> Option<Matrix> {
    let norm0 = cand.frobenius_norm();
    if norm0 == 0.0 {
        return None;
    }
    let mut v = cand.clone();
    for _ in 0..2 {
        for b in basis {
            let c = trace_prod(b, &v).re;
            v -= &b.scale(c);
        }
    }
    let r = v.frobenius_norm();
    if r < GS_DROP_TOL * norm0 {
        return None;
    }
    Some(v.hermitize().scale(1.0 / r))
}

/// Gram-Schmidt on the outcomes, then completion to `D²` elements with
/// seeded random positive operators.
pub fn gram_schmidt_operator_basis(pom: &Pom, rng_seed: u64) -> OperatorBasis {
    let d = pom.dim;
    let mut meas: Vec<Matrix> = Vec::new();
    for o in &pom.outcomes {
        let refs: Vec<&Matrix> = meas.iter().collect();
        if let Some(g) = gs_step(&refs, o) {
            meas.push(g);
        }
        if meas.len() == d * d {
            break;
        }
    }
    let mut rng = ChaCha20Rng::seed_from_u64(rng_seed);
    let mut unmeas: Vec<Matrix> = Vec::new();
    while meas.len() + unmeas.len() < d * d {
        let cand = random_psd(&mut rng, d);
        let refs: Vec<&Matrix> = meas.iter().chain(unmeas.iter()).collect();
        if let Some(g) = gs_step(&refs, &cand) {
            unmeas.push(g);
        }
    }
    OperatorBasis { dim: d, meas, unmeas }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SubspaceDecomposition {
    pub gamma_meas: Vec<Matrix>,
    pub gamma_unmeas: Vec<Matrix>,
    pub rho_meas: Matrix,
    pub rho_unmeas: Matrix,
}

/// `ρ = ρ_meas + ρ_unmeas` by projection onto the two basis parts.
pub fn decompose_state(rho: &DensityMatrix, basis: &OperatorBasis) -> Result<SubspaceDecomposition> {
    if rho.dim() != basis.dim {
        return Err(Error::Dimension("state and basis dimensions differ"));
    }
    if !basis.is_complete() {
        return Err(Error::InvalidArgument("operator basis is incomplete"));
    }
    let project = |set: &[Matrix]| {
        let mut acc = Matrix::zeros(basis.dim, basis.dim);
        for g in set {
            acc += &g.scale(trace_prod(g, rho.matrix()).re);
        }
        acc
    };
    Ok(SubspaceDecomposition {
        gamma_meas: basis.meas.clone(),
        gamma_unmeas: basis.unmeas.clone(),
        rho_meas: project(&basis.meas),
        rho_unmeas: project(&basis.unmeas),
    })
}
