//! Closed-form estimators for the von Neumann, trine and qutrit
//! two-outcome measurements.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{Matrix, C64};
use crate::sim::CountsRecord;
use crate::state::{bloch_to_rho, BlochVector, DensityMatrix};

fn frequencies(counts: &CountsRecord, len: usize) -> Result<Vec<f64>> {
    if counts.counts.len() != len {
        return Err(Error::Dimension("wrong number of counts"));
    }
    if counts.total() == 0 {
        return Err(Error::InvalidData("no counts"));
    }
    Ok(counts.frequencies())
}

/// `ρ̂ = Σ_k |b_k⟩ ν_k ⟨b_k|` for the basis columns `b_k`.
pub fn closed_form_von_neumann_mlme(counts: &CountsRecord, basis: &Matrix) -> Result<DensityMatrix> {
    let d = basis.rows();
    if !basis.is_square() {
        return Err(Error::Dimension("basis must be square"));
    }
    let nu = frequencies(counts, d)?;
    let mut rho = Matrix::zeros(d, d);
    for (k, &w) in nu.iter().enumerate() {
        let col: Vec<C64> = (0..d).map(|i| basis[(i, k)]).collect();
        rho += &Matrix::outer(&col, &col).scale(w);
    }
    DensityMatrix::new(rho.hermitize())
}

#[derive(Clone, Debug, PartialEq)]
pub enum TrineClosedForm {
    State(DensityMatrix),
    /// The formula leaves the Bloch ball; the estimator lies on the
    /// boundary and must be found iteratively.
    BoundaryDeferral {
        bloch: BlochVector,
    },
}

/// `ρ = (1 + √3(ν₂−ν₃)σ_x + (3ν₁−1)σ_z)/2` when that is a state.
pub fn closed_form_trine_mlme(counts: &CountsRecord) -> Result<TrineClosedForm> {
    let nu = frequencies(counts, 3)?;
    Ok(closed_form_trine_mlme_frequencies([nu[0], nu[1], nu[2]]))
}

pub fn closed_form_trine_mlme_frequencies(nu: [f64; 3]) -> TrineClosedForm {
    let s = BlochVector::new(libm::sqrt(3.0) * (nu[1] - nu[2]), 0.0, 3.0 * nu[0] - 1.0);
    match bloch_to_rho(s) {
        Ok(rho) => TrineClosedForm::State(rho),
        Err(_) => TrineClosedForm::BoundaryDeferral { bloch: s },
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrineUniqueness {
    pub unique: bool,
    pub estimator: Option<DensityMatrix>,
}

/// Tests `3(ν₂−ν₃)² + (3ν₁−1)² = 1`, under which the trine ML estimator is
/// the unique pure state `(1 + √3(ν₂−ν₃)σ_x + (2−3ν₂−3ν₃)σ_z)/2`.
pub fn trine_uniqueness_check(counts: &CountsRecord) -> Result<TrineUniqueness> {
    let nu = frequencies(counts, 3)?;
    Ok(trine_uniqueness_check_frequencies([nu[0], nu[1], nu[2]]))
}

pub fn trine_uniqueness_check_frequencies(nu: [f64; 3]) -> TrineUniqueness {
    let a = nu[1] - nu[2];
    let lhs = 3.0 * a * a + (3.0 * nu[0] - 1.0) * (3.0 * nu[0] - 1.0);
    if (lhs - 1.0).abs() > 1e-9 {
        return TrineUniqueness { unique: false, estimator: None };
    }
    let s = BlochVector::new(libm::sqrt(3.0) * a, 0.0, 2.0 - 3.0 * nu[1] - 3.0 * nu[2]);
    let norm = s.norm();
    let s = BlochVector::new(s.x / norm, 0.0, s.z / norm);
    TrineUniqueness { unique: true, estimator: bloch_to_rho(s).ok() }
}

/// ML estimators for the qutrit two-outcome POM, which constrain only
/// `ρ₃₃`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QutritMlSet {
    pub rho33: f64,
    /// The unconstrained solution was negative and has been clamped to
    /// zero; every rank-two state with `ρ₃₃ = 0` is then an ML estimator.
    pub non_unique: bool,
}

pub fn qutrit_exception_ml(counts: &CountsRecord) -> Result<QutritMlSet> {
    let _ = frequencies(counts, 2)?;
    let (n1, n2) = (counts.counts[0] as f64, counts.counts[1] as f64);
    let raw = 3.0 * (n2 - n1) / (n2 + n1);
    Ok(QutritMlSet { rho33: raw.clamp(0.0, 1.0), non_unique: raw <= 0.0 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::rho_to_bloch;

    fn c(v: &[u64]) -> CountsRecord {
        CountsRecord::new(v.to_vec())
    }

    #[test]
    fn von_neumann_examples() {
        let id = Matrix::identity(2);
        assert_eq!(
            closed_form_von_neumann_mlme(&c(&[1, 0]), &id).unwrap().matrix(),
            &Matrix::from_real_diag(&[1.0, 0.0])
        );
        assert_eq!(closed_form_von_neumann_mlme(&c(&[50, 50]), &id).unwrap(), DensityMatrix::maximally_mixed(2));
        assert_eq!(
            closed_form_von_neumann_mlme(&c(&[70, 30]), &id).unwrap().matrix(),
            &Matrix::from_real_diag(&[0.7, 0.3])
        );
        assert!(closed_form_von_neumann_mlme(&c(&[1, 2, 3]), &id).is_err());
    }

    #[test]
    fn trine_examples() {
        let third = 1.0 / 3.0;
        match closed_form_trine_mlme_frequencies([third, third, third]) {
            TrineClosedForm::State(r) => {
                assert!((r.matrix() - DensityMatrix::maximally_mixed(2).matrix()).max_abs() < 1e-15)
            }
            _ => panic!("expected a state"),
        }
        match closed_form_trine_mlme_frequencies([0.4, 0.35, 0.25]) {
            TrineClosedForm::State(r) => {
                let s = rho_to_bloch(&r).unwrap();
                assert!((s.x - libm::sqrt(3.0) * 0.1).abs() < 1e-15 && s.y == 0.0 && (s.z - 0.2).abs() < 1e-15);
            }
            _ => panic!("expected a state"),
        }
        match closed_form_trine_mlme(&c(&[6, 2, 0])).unwrap() {
            TrineClosedForm::BoundaryDeferral { bloch } => assert!((bloch.z - 1.25).abs() < 1e-15),
            _ => panic!("expected a deferral"),
        }
    }

    #[test]
    fn trine_uniqueness_examples() {
        let u = trine_uniqueness_check(&c(&[4, 1, 1])).unwrap();
        assert!(u.unique);
        assert!((u.estimator.unwrap().matrix() - &Matrix::from_real_diag(&[1.0, 0.0])).max_abs() < 1e-15);
        assert!(!trine_uniqueness_check(&c(&[1, 1, 1])).unwrap().unique);
        let u = trine_uniqueness_check_frequencies([0.0, 0.5, 0.5]);
        assert!(u.unique);
        assert!((u.estimator.unwrap().matrix() - &Matrix::from_real_diag(&[0.0, 1.0])).max_abs() < 1e-15);
        // ν₁ = 0 already saturates the condition, so ν₂ ≠ ν₃ overshoots (LHS = 2)
        let r = 1.0 / (2.0 * libm::sqrt(3.0));
        assert!(!trine_uniqueness_check_frequencies([0.0, 0.5 + r, 0.5 - r]).unique);
        let t = 0.3f64;
        let nu1 = (1.0 + libm::cos(t)) / 3.0;
        let a = libm::sin(t) / libm::sqrt(3.0);
        let nu2 = (1.0 - nu1 + a) / 2.0;
        let u = trine_uniqueness_check_frequencies([nu1, nu2, nu2 - a]);
        assert!(u.unique);
        let s = rho_to_bloch(&u.estimator.unwrap()).unwrap();
        assert!((s.x - libm::sin(t)).abs() < 1e-12 && (s.z - libm::cos(t)).abs() < 1e-12);
    }

    #[test]
    fn qutrit_examples() {
        assert_eq!(qutrit_exception_ml(&c(&[10, 10])).unwrap(), QutritMlSet { rho33: 0.0, non_unique: true });
        let q = qutrit_exception_ml(&c(&[1, 2])).unwrap();
        assert!((q.rho33 - 1.0).abs() < 1e-15 && !q.non_unique);
        assert_eq!(qutrit_exception_ml(&c(&[2, 1])).unwrap(), QutritMlSet { rho33: 0.0, non_unique: true });
        let q = qutrit_exception_ml(&c(&[5, 6])).unwrap();
        assert!((q.rho33 - 3.0 / 11.0).abs() < 1e-15 && !q.non_unique);
    }
}
