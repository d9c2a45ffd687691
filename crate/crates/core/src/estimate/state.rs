use alloc::vec::Vec;

use super::ascent::{self, entropy_remainder, log_likelihood_of, log_likelihood_remainder, Problem, Proposal};
use super::{EstimationConfig, EstimationReport};
use crate::error::{Error, Result};
use crate::linalg::{eigh_unchecked, trace_prod, Eigh, Matrix};
use crate::pom::Pom;
use crate::sim::CountsRecord;
use crate::state::{entropy_of_spectrum, von_neumann_entropy, DensityMatrix};

const REGULARIZE_MIX: f64 = 1e-9;
const R_FLOOR: f64 = 1e-14;

fn probabilities(rho: &Matrix, outcomes: &[Matrix]) -> Vec<f64> {
    outcomes.iter().map(|o| trace_prod(rho, o).re).collect()
}

fn counts_f64(counts: &CountsRecord, pom: &Pom) -> Result<Vec<f64>> {
    if counts.counts.len() != pom.len() {
        return Err(Error::Dimension("counts do not align with POM outcomes"));
    }
    if counts.total() == 0 {
        return Err(Error::InvalidData("no counts"));
    }
    Ok(counts.counts.iter().map(|&c| c as f64).collect())
}

/// `Σ n_j ln p_j`; `−∞` when an observed outcome has `p_j ≤ 0`.
pub fn log_likelihood(counts: &CountsRecord, rho: &DensityMatrix, pom: &Pom) -> Result<f64> {
    if rho.dim() != pom.dim() || counts.counts.len() != pom.len() {
        return Err(Error::Dimension("counts, state and POM do not align"));
    }
    let n: Vec<f64> = counts.counts.iter().map(|&c| c as f64).collect();
    Ok(log_likelihood_of(&n, &probabilities(rho.matrix(), pom.outcomes())))
}

/// `Σ n_j ln(p̃_j/η)` with `η = Σ_j p̃_j`.
pub fn extended_log_likelihood(counts: &CountsRecord, rho: &DensityMatrix, pom: &Pom) -> Result<f64> {
    let ll = log_likelihood(counts, rho, pom)?;
    let eta: f64 = probabilities(rho.matrix(), pom.outcomes()).iter().sum();
    Ok(ll - counts.total() as f64 * libm::log(eta))
}

/// `R(ρ) = Σ_j (ν_j/p_j) Π_j`, skipping outcomes without counts.
pub fn r_operator(counts: &CountsRecord, rho: &DensityMatrix, pom: &Pom) -> Result<Matrix> {
    if rho.dim() != pom.dim() {
        return Err(Error::Dimension("state and POM dimensions differ"));
    }
    let n = counts_f64(counts, pom)?;
    let p = probabilities(rho.matrix(), pom.outcomes());
    if n.iter().zip(&p).any(|(&nj, &pj)| nj > 0.0 && pj <= R_FLOOR) {
        return Err(Error::InvalidData("observed outcome has vanishing probability"));
    }
    Ok(r_sum(&n, &p, pom.outcomes(), counts.total() as f64))
}

fn r_sum(n: &[f64], p: &[f64], outcomes: &[Matrix], total: f64) -> Matrix {
    let d = outcomes[0].rows();
    let mut r = Matrix::zeros(d, d);
    for ((&nj, &pj), o) in n.iter().zip(p).zip(outcomes) {
        if nj > 0.0 {
            r += &o.scale(nj / total / pj);
        }
    }
    r
}

struct StateProblem<'a> {
    n: Vec<f64>,
    total: f64,
    outcomes: &'a [Matrix],
    g: Matrix,
    extended: bool,
    lambda: f64,
    log_floor: f64,
}

struct StateDir {
    t: Matrix,
    p: Vec<f64>,
    eta: f64,
    eig: Option<Eigh>,
}

impl StateProblem<'_> {
    fn dim(&self) -> usize {
        self.g.rows()
    }
}

impl Problem for StateProblem<'_> {
    type Dir = StateDir;

    fn objective(&self, x: &Matrix) -> f64 {
        let p = probabilities(x, self.outcomes);
        let mut f = log_likelihood_of(&self.n, &p);
        if self.extended {
            f -= self.total * libm::log(p.iter().sum::<f64>());
        }
        if self.lambda > 0.0 {
            let s = eigh_unchecked(x).map(|e| entropy_of_spectrum(&e.values)).unwrap_or(f64::NAN);
            f += self.total * self.lambda * s;
        }
        f
    }

    fn direction(&self, x: &Matrix) -> Result<StateDir> {
        let p = probabilities(x, self.outcomes);
        let eta = if self.extended { p.iter().sum() } else { 1.0 };
        let mut t = r_sum(&self.n, &p, self.outcomes, self.total);
        if self.extended {
            t -= &self.g.scale(1.0 / eta);
        } else {
            t -= &Matrix::identity(self.dim());
        }
        let eig = if self.lambda > 0.0 {
            let e = eigh_unchecked(x)?;
            let floor = e.max() * self.log_floor;
            let log_rho = e.map(|v| libm::log(v.max(floor)));
            let tr_rho_log: f64 = e.values.iter().map(|&v| v.max(0.0) * libm::log(v.max(floor))).sum();
            t -= &(&log_rho - &Matrix::identity(self.dim()).scale(tr_rho_log)).scale(self.lambda);
            Some(e)
        } else {
            None
        };
        Ok(StateDir { t: t.hermitize(), p, eta, eig })
    }

    fn defect(&self, x: &Matrix, dir: &StateDir) -> Result<f64> {
        Ok((&dir.t * x).frobenius_norm())
    }

    fn propose(&self, x: &Matrix, dir: &StateDir, eps: f64) -> Result<Proposal> {
        let t = &dir.t;
        let tx = t * x;
        let xt = tx.adjoint();
        let txt = &tx * t;
        let xi = &(&tx + &xt).scale(eps) + &txt.scale(eps * eps);
        let tr = x.trace_re() + xi.trace_re();
        let m = &Matrix::identity(self.dim()) + &t.scale(eps);
        let next = (&(&m * x) * &m).hermitize().scale(1.0 / tr);
        let delta = (&xi - &x.scale(tr - 1.0)).scale(1.0 / tr).hermitize();
        Ok(Proposal { next, delta, floor_hit: false })
    }

    // N·tr{δT} is the exact first-order change for a traceless δ; the
    // remainders are evaluated separately so that nothing cancels.
    fn increment(&self, _x: &Matrix, dir: &StateDir, p: &Proposal) -> f64 {
        let dp = probabilities(&p.delta, self.outcomes);
        let mut inc = log_likelihood_remainder(&self.n, &dir.p, &dp);
        if !inc.is_finite() {
            return f64::NEG_INFINITY;
        }
        inc += self.total * trace_prod(&p.delta, &dir.t).re;
        if self.extended {
            let y = dp.iter().sum::<f64>() / dir.eta;
            inc -= self.total * (libm::log1p(y) - y);
        }
        if let Some(eig) = &dir.eig {
            let floor = eig.max() * self.log_floor;
            let rem = entropy_remainder(eig, floor, &p.delta, || eigh_unchecked(&p.next).map(|e| e.values));
            inc += self.total * self.lambda * rem;
        }
        if inc.is_nan() {
            f64::NEG_INFINITY
        } else {
            inc
        }
    }

    fn constraint_deviation(&self, x: &Matrix) -> f64 {
        (x.trace_re() - 1.0).abs()
    }
}

#[derive(Clone, Copy)]
struct Kind {
    extended: bool,
    lambda: f64,
}

fn estimate(
    counts: &CountsRecord,
    pom: &Pom,
    cfg: &EstimationConfig,
    rho0: Option<&DensityMatrix>,
    kind: Kind,
) -> Result<EstimationReport> {
    cfg.validate()?;
    let n = counts_f64(counts, pom)?;
    if !kind.extended && !pom.is_perfect() {
        return Err(Error::ImperfectPom);
    }
    let d = pom.dim();
    let mut x0 = match rho0 {
        Some(r) if r.dim() != d => return Err(Error::Dimension("initial state dimension differs from POM")),
        Some(r) => r.matrix().clone(),
        None => Matrix::identity(d).scale(1.0 / d as f64),
    };
    let p0 = probabilities(&x0, pom.outcomes());
    let regularized = n.iter().zip(&p0).any(|(&nj, &pj)| nj > 0.0 && pj < cfg.p_floor);
    if regularized {
        x0 = &x0.scale(1.0 - REGULARIZE_MIX) + &Matrix::identity(d).scale(REGULARIZE_MIX / d as f64);
    }
    let problem = StateProblem {
        n,
        total: counts.total() as f64,
        outcomes: pom.outcomes(),
        g: pom.sum(),
        extended: kind.extended,
        lambda: kind.lambda,
        log_floor: cfg.log_floor,
    };
    let out = ascent::run(&problem, x0, cfg)?;
    let estimator = DensityMatrix::from_matrix_unchecked(out.point);
    let p = probabilities(estimator.matrix(), pom.outcomes());
    let eta: f64 = p.iter().sum();
    let mut log_likelihood = log_likelihood_of(&problem.n, &p);
    if kind.extended {
        log_likelihood -= problem.total * libm::log(eta);
    }
    Ok(EstimationReport {
        entropy: von_neumann_entropy(&estimator),
        estimator,
        log_likelihood,
        iterations: out.iterations,
        converged: out.converged,
        residual: out.residual,
        likelihood_trace: out.trace,
        estimated_copies: kind.extended.then(|| problem.total / eta),
        final_step: out.final_step,
        stalled: out.stalled,
        regularized,
    })
}

/// Maximum-likelihood estimate for a perfect POM, iterated from `1/D`.
pub fn ml_estimate(counts: &CountsRecord, pom: &Pom, config: &EstimationConfig) -> Result<EstimationReport> {
    estimate(counts, pom, config, None, Kind { extended: false, lambda: 0.0 })
}

pub fn ml_estimate_from(
    counts: &CountsRecord,
    pom: &Pom,
    config: &EstimationConfig,
    rho0: &DensityMatrix,
) -> Result<EstimationReport> {
    estimate(counts, pom, config, Some(rho0), Kind { extended: false, lambda: 0.0 })
}

/// Maximum-likelihood maximum-entropy estimate with multiplier
/// `config.lambda`.
pub fn mlme_estimate(counts: &CountsRecord, pom: &Pom, config: &EstimationConfig) -> Result<EstimationReport> {
    estimate(counts, pom, config, None, Kind { extended: false, lambda: config.lambda })
}

pub fn mlme_estimate_from(
    counts: &CountsRecord,
    pom: &Pom,
    config: &EstimationConfig,
    rho0: &DensityMatrix,
) -> Result<EstimationReport> {
    estimate(counts, pom, config, Some(rho0), Kind { extended: false, lambda: config.lambda })
}

/// ML estimate maximizing the likelihood of the relative probabilities
/// `p̃_j/η`; works for POMs that do not sum to the identity.
pub fn extended_ml_estimate(counts: &CountsRecord, pom: &Pom, config: &EstimationConfig) -> Result<EstimationReport> {
    estimate(counts, pom, config, None, Kind { extended: true, lambda: 0.0 })
}

pub fn extended_ml_estimate_from(
    counts: &CountsRecord,
    pom: &Pom,
    config: &EstimationConfig,
    rho0: &DensityMatrix,
) -> Result<EstimationReport> {
    estimate(counts, pom, config, Some(rho0), Kind { extended: true, lambda: 0.0 })
}

pub fn extended_mlme_estimate(counts: &CountsRecord, pom: &Pom, config: &EstimationConfig) -> Result<EstimationReport> {
    estimate(counts, pom, config, None, Kind { extended: true, lambda: config.lambda })
}

pub fn extended_mlme_estimate_from(
    counts: &CountsRecord,
    pom: &Pom,
    config: &EstimationConfig,
    rho0: &DensityMatrix,
) -> Result<EstimationReport> {
    estimate(counts, pom, config, Some(rho0), Kind { extended: true, lambda: config.lambda })
}
