//! Guarded steepest ascent shared by state and process estimation.
//!
//! A step is accepted when the objective increment, evaluated from the
//! exact matrix increment rather than as a difference of two large
//! numbers, is nonnegative. Rejected steps halve ε.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{Eigh, Matrix};

use super::EstimationConfig;

pub(crate) struct Proposal {
    pub next: Matrix,
    pub delta: Matrix,
    pub floor_hit: bool,
}

pub(crate) trait Problem {
    type Dir;
    fn objective(&self, x: &Matrix) -> f64;
    fn direction(&self, x: &Matrix) -> Result<Self::Dir>;
    fn defect(&self, x: &Matrix, dir: &Self::Dir) -> Result<f64>;
    fn propose(&self, x: &Matrix, dir: &Self::Dir, eps: f64) -> Result<Proposal>;
    fn increment(&self, x: &Matrix, dir: &Self::Dir, p: &Proposal) -> f64;
    /// Deviation from the linear constraint (trace or trace preservation).
    fn constraint_deviation(&self, x: &Matrix) -> f64;
}

pub(crate) struct Outcome {
    pub point: Matrix,
    pub iterations: usize,
    pub converged: bool,
    pub stalled: bool,
    pub residual: f64,
    pub trace: Vec<f64>,
    pub final_step: f64,
    pub max_constraint_deviation: f64,
    pub floor_hit: bool,
}

pub(crate) fn run<P: Problem>(problem: &P, x0: Matrix, cfg: &EstimationConfig) -> Result<Outcome> {
    let mut x = x0;
    let mut objective = problem.objective(&x);
    if !objective.is_finite() {
        return Err(Error::ZeroLikelihood);
    }
    let cap = cfg.epsilon_cap();
    let mut eps = cfg.epsilon0;
    let mut streak = 0usize;
    let mut trace = alloc::vec![objective];
    let mut iterations = 0usize;
    let mut stalled = false;
    let mut floor_hit = false;
    let mut max_dev = problem.constraint_deviation(&x);
    let mut residual;
    loop {
        let dir = problem.direction(&x)?;
        residual = problem.defect(&x, &dir)?;
        if residual <= cfg.grad_tol || iterations >= cfg.max_iters {
            break;
        }
        let accepted = loop {
            let p = problem.propose(&x, &dir, eps)?;
            let inc = problem.increment(&x, &dir, &p);
            if inc >= 0.0 {
                break Some((p, inc));
            }
            eps *= cfg.step_shrink;
            streak = 0;
            if eps < cfg.epsilon_min {
                break None;
            }
        };
        let Some((p, inc)) = accepted else {
            stalled = true;
            break;
        };
        floor_hit |= p.floor_hit;
        x = p.next;
        objective += inc;
        trace.push(objective);
        iterations += 1;
        max_dev = max_dev.max(problem.constraint_deviation(&x));
        streak += 1;
        if streak >= cfg.growth_after {
            eps = (eps * cfg.step_growth).min(cap);
            streak = 0;
        }
        if iterations.is_multiple_of(1000) {
            log::trace!("iteration {iterations}: defect {residual:.3e}, step {eps:.3e}");
        }
    }
    let converged = residual <= cfg.grad_tol;
    log::debug!("ascent finished after {iterations} steps, defect {residual:.3e}, converged {converged}");
    Ok(Outcome {
        point: x,
        iterations,
        converged,
        stalled,
        residual,
        trace,
        final_step: eps,
        max_constraint_deviation: max_dev,
        floor_hit,
    })
}

fn rel_entropy_kernel(a: f64, b: f64) -> f64 {
    // (ln a − ln b)/(a − b), continuous at a = b
    let d = a - b;
    if d.abs() <= 1e-8 * a.max(b) {
        2.0 / (a + b)
    } else {
        (libm::log(a) - libm::log(b)) / d
    }
}

/// Nonlinear part of the entropy change, `ΔS + tr{δ(ln σ − tr σ ln σ)}`,
/// for a unit-trace positive `σ` with spectral decomposition `eig` and a
/// traceless increment `delta`. The logarithm is floored at `floor` like
/// the one in the ascent direction. Equals `−D(σ+δ‖σ)` up to flooring.
pub(crate) fn entropy_remainder(
    eig: &Eigh,
    floor: f64,
    delta: &Matrix,
    next_spectrum: impl FnOnce() -> Result<Vec<f64>>,
) -> f64 {
    let v = &eig.vectors;
    let dt = &(&v.adjoint() * delta) * v;
    let lam_min = eig.min();
    let n = eig.values.len();
    if lam_min > 0.0 && dt.max_abs() <= 1e-4 * lam_min {
        let mut second = 0.0;
        for i in 0..n {
            for j in 0..n {
                second += dt[(i, j)].norm_sqr() * rel_entropy_kernel(eig.values[i], eig.values[j]);
            }
        }
        -0.5 * second
    } else {
        let logs: Vec<f64> = eig.values.iter().map(|&x| libm::log(x.max(floor))).collect();
        let c: f64 = eig.values.iter().zip(&logs).map(|(&x, &l)| x.max(0.0) * l).sum();
        let linear: f64 = -(0..n).map(|i| dt[(i, i)].re * (logs[i] - c)).sum::<f64>();
        match next_spectrum() {
            Ok(vals) => {
                crate::state::entropy_of_spectrum(&vals) - crate::state::entropy_of_spectrum(&eig.values) - linear
            }
            Err(_) => f64::NEG_INFINITY,
        }
    }
}

/// Second- and higher-order part of `Σ n_j ln(1 + δp_j/p_j)`; `−∞` if an
/// observed outcome would become impossible. The first-order part is
/// carried by the ascent direction.
pub(crate) fn log_likelihood_remainder(counts: &[f64], p: &[f64], dp: &[f64]) -> f64 {
    let mut s = 0.0;
    for ((&n, &pj), &dpj) in counts.iter().zip(p).zip(dp) {
        if n > 0.0 {
            if pj + dpj <= 0.0 {
                return f64::NEG_INFINITY;
            }
            let x = dpj / pj;
            s += n * (libm::log1p(x) - x);
        }
    }
    s
}

/// `Σ n_j ln p_j` with `0·ln 0 = 0`.
pub(crate) fn log_likelihood_of(counts: &[f64], p: &[f64]) -> f64 {
    let mut s = 0.0;
    for (&n, &pj) in counts.iter().zip(p) {
        if n > 0.0 {
            if pj <= 0.0 {
                return f64::NEG_INFINITY;
            }
            s += n * libm::log(pj);
        }
    }
    s
}
