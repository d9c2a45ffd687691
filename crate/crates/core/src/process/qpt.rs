//! ML and MLME process estimation on trace-preserving Choi operators.
//!
//! Each step `E → Y(1+δA)E(1+δA)Y` with `Y = (tr_K{(1+δA)E(1+δA)})^{-1/2} ⊗ 1`
//! keeps `tr_K E = 1_H` to machine precision. POMs that do not sum to the
//! identity are handled with the extended likelihood, i.e. `W − W₀`.

use alloc::vec::Vec;

use super::channel::{process_entropy, tp_deviation, ChoiOperator};
use crate::error::{Error, Result};
use crate::estimate::ascent::{
    self, entropy_remainder, log_likelihood_of, log_likelihood_remainder, Problem, Proposal,
};
use crate::estimate::EstimationConfig;
use crate::linalg::{eigh_unchecked, kron, matrix_sqrt_psd, partial_trace, trace_prod, Eigh, Matrix, Subsystem};
use crate::sim::ProcessDataset;

/// Eigenvalue floor for the inverse square root of the renormalizer.
pub const INV_SQRT_FLOOR: f64 = 1e-12;

/// Result of an iterative process estimation.
#[derive(Clone, Debug, PartialEq)]
pub struct ProcessReport {
    pub estimator: ChoiOperator,
    /// `Σ n_lm ln p_lm` with `p_lm = tr{E(ρ_lᵀ⊗Π_m)}/L`, or its extended
    /// form `Σ n_lm ln(p_lm/η)` for imperfect POMs.
    pub log_likelihood: f64,
    /// Process entropy of the estimator.
    pub entropy: f64,
    pub iterations: usize,
    pub converged: bool,
    /// `‖(C − Λ)Ê‖_F` with `Λ = ½tr_K{CÊ + ÊC} ⊗ 1`.
    pub residual: f64,
    /// Objective after each accepted step; includes `N λ S(E)` for MLME.
    pub likelihood_trace: Vec<f64>,
    pub final_step: f64,
    pub stalled: bool,
    /// Largest `‖tr_K E_k − 1_H‖_F` over all iterates.
    pub max_tp_deviation: f64,
    /// The renormalizer's eigenvalue floor engaged at some step.
    pub inv_sqrt_floor_hit: bool,
    /// `‖Λ_H² − tr_K{CÊC}‖_F` for the Lagrange operator `Λ = Λ_H ⊗ 1`.
    pub lagrange_defect: f64,
    /// `N/η̂` for imperfect POMs.
    pub estimated_copies: Option<f64>,
}

struct QptProblem {
    d_in: usize,
    d_out: usize,
    l: f64,
    n: Vec<f64>,
    total: f64,
    /// `ρ_lᵀ ⊗ Π_m`, row-major in `(l, m)`.
    f: Vec<Matrix>,
    /// `(1/L) Σ_l ρ_lᵀ ⊗ G`.
    w0: Matrix,
    lambda: f64,
    log_floor: f64,
}

struct QptDir {
    /// `C − Λ_H ⊗ 1`.
    g: Matrix,
    lambda_h: Matrix,
    c: Matrix,
    q: Vec<f64>,
    eta: f64,
    eig: Option<Eigh>,
}

impl QptProblem {
    fn new(dataset: &ProcessDataset, lambda: f64, log_floor: f64) -> Self {
        let pom = dataset.pom();
        let mut f = Vec::new();
        let mut n = Vec::new();
        for (rho, row) in dataset.inputs().iter().zip(dataset.counts()) {
            let rt = rho.matrix().transpose();
            for (o, &c) in pom.outcomes().iter().zip(row) {
                f.push(kron(&rt, o));
                n.push(c as f64);
            }
        }
        let l = dataset.inputs().len() as f64;
        let sum_t = dataset
            .inputs()
            .iter()
            .fold(Matrix::zeros(dataset.dim_in(), dataset.dim_in()), |acc, r| &acc + &r.matrix().transpose());
        QptProblem {
            d_in: dataset.dim_in(),
            d_out: dataset.dim_out(),
            l,
            total: n.iter().sum(),
            n,
            f,
            w0: kron(&sum_t, &pom.sum()).scale(1.0 / l),
            lambda,
            log_floor,
        }
    }

    fn dim(&self) -> usize {
        self.d_in * self.d_out
    }

    /// `tr{E (ρ_lᵀ ⊗ Π_m)}`, the output probability for input `l`.
    fn q(&self, e: &Matrix) -> Vec<f64> {
        self.f.iter().map(|f| trace_prod(e, f).re).collect()
    }

    fn w(&self, q: &[f64]) -> Matrix {
        let mut w = Matrix::zeros(self.dim(), self.dim());
        for ((&n, &qj), f) in self.n.iter().zip(q).zip(&self.f) {
            if n > 0.0 {
                w += &f.scale(n / self.total / qj);
            }
        }
        w
    }

    fn eta(&self, q: &[f64]) -> f64 {
        q.iter().sum::<f64>() / self.l
    }

    fn log_likelihood(&self, q: &[f64]) -> f64 {
        let p: Vec<f64> = q.iter().map(|x| x / self.l).collect();
        log_likelihood_of(&self.n, &p) - self.total * libm::log(self.eta(q))
    }

    fn sigma(&self, e: &Matrix) -> Matrix {
        e.scale(1.0 / self.d_in as f64)
    }

    fn tr_k(&self, m: &Matrix) -> Matrix {
        partial_trace(m, self.d_in, self.d_out, Subsystem::K).expect("dims fixed at construction")
    }

    fn lift(&self, h: &Matrix) -> Matrix {
        kron(h, &Matrix::identity(self.d_out))
    }
}

impl Problem for QptProblem {
    type Dir = QptDir;

    fn objective(&self, x: &Matrix) -> f64 {
        let mut f = self.log_likelihood(&self.q(x));
        if self.lambda > 0.0 {
            let s = eigh_unchecked(&self.sigma(x))
                .map(|e| crate::state::entropy_of_spectrum(&e.values))
                .unwrap_or(f64::NAN);
            f += self.total * self.lambda * s;
        }
        f
    }

    fn direction(&self, x: &Matrix) -> Result<QptDir> {
        let q = self.q(x);
        let eta = self.eta(&q);
        let mut c = &self.w(&q) - &self.w0.scale(1.0 / eta);
        let eig = if self.lambda > 0.0 {
            let e = eigh_unchecked(&self.sigma(x))?;
            let floor = e.max() * self.log_floor;
            let one_plus_log = e.map(|v| 1.0 + libm::log(v.max(floor)));
            c -= &one_plus_log.scale(self.lambda / self.d_in as f64);
            Some(e)
        } else {
            None
        };
        let c = c.hermitize();
        let ce = &c * x;
        let lambda_h = self.tr_k(&(&ce + &ce.adjoint())).scale(0.5).hermitize();
        let g = (&c - &self.lift(&lambda_h)).hermitize();
        Ok(QptDir { g, lambda_h, c, q, eta, eig })
    }

    fn defect(&self, x: &Matrix, dir: &QptDir) -> Result<f64> {
        Ok((&dir.g * x).frobenius_norm())
    }

    fn propose(&self, x: &Matrix, dir: &QptDir, eps: f64) -> Result<Proposal> {
        let da = dir.g.scale(0.5 * eps);
        let dax = &da * x;
        let xi = (&(&dax + &dax.adjoint()) + &(&dax * &da)).hermitize();
        let big_x = x + &xi;
        let drift = &self.tr_k(x) - &Matrix::identity(self.d_in);
        let phi = (&drift + &self.tr_k(&xi)).hermitize();
        // (1+μ)^{-1/2} − 1 without cancellation
        let eig = eigh_unchecked(&phi)?;
        let floor_hit = eig.values.iter().any(|&m| 1.0 + m < INV_SQRT_FLOOR);
        let y = self.lift(&eig.map(|m| {
            if 1.0 + m < INV_SQRT_FLOOR {
                1.0 / libm::sqrt(INV_SQRT_FLOOR) - 1.0
            } else {
                let s = libm::sqrt(1.0 + m);
                -m / (s * (1.0 + s))
            }
        }));
        let yx = &y * &big_x;
        let delta = (&(&(&xi + &yx) + &yx.adjoint()) + &(&yx * &y)).hermitize();
        let next = (x + &delta).hermitize();
        Ok(Proposal { next, delta, floor_hit })
    }

    fn increment(&self, _x: &Matrix, dir: &QptDir, p: &Proposal) -> f64 {
        let dq: Vec<f64> = self.q(&p.delta);
        let mut inc = log_likelihood_remainder(&self.n, &dir.q, &dq);
        if !inc.is_finite() {
            return f64::NEG_INFINITY;
        }
        let y = dq.iter().sum::<f64>() / self.l / dir.eta;
        inc -= self.total * (libm::log1p(y) - y);
        inc += self.total * trace_prod(&p.delta, &dir.g).re;
        if let Some(eig) = &dir.eig {
            let floor = eig.max() * self.log_floor;
            let rem = entropy_remainder(eig, floor, &self.sigma(&p.delta), || {
                eigh_unchecked(&self.sigma(&p.next)).map(|e| e.values)
            });
            inc += self.total * self.lambda * rem;
        }
        if inc.is_nan() {
            f64::NEG_INFINITY
        } else {
            inc
        }
    }

    fn constraint_deviation(&self, x: &Matrix) -> f64 {
        tp_deviation(x, self.d_in, self.d_out)
    }
}

fn check_start(dataset: &ProcessDataset, e0: &ChoiOperator) -> Result<()> {
    if e0.dim_in() != dataset.dim_in() || e0.dim_out() != dataset.dim_out() {
        return Err(Error::Dimension("initial Choi operator does not match dataset"));
    }
    if !e0.is_trace_preserving() {
        return Err(Error::InvalidArgument("initial Choi operator is not trace preserving"));
    }
    Ok(())
}

fn estimate(
    dataset: &ProcessDataset,
    cfg: &EstimationConfig,
    e0: Option<&ChoiOperator>,
    lambda: f64,
) -> Result<ProcessReport> {
    cfg.validate()?;
    let (d_in, d_out) = (dataset.dim_in(), dataset.dim_out());
    let x0 = match e0 {
        Some(e) => {
            check_start(dataset, e)?;
            e.matrix().clone()
        }
        None => ChoiOperator::maximally_mixed(d_in, d_out).matrix().clone(),
    };
    let problem = QptProblem::new(dataset, lambda, cfg.log_floor);
    let out = ascent::run(&problem, x0, cfg)?;
    let dir = problem.direction(&out.point)?;
    let ce = &dir.c * &out.point;
    let cec = &ce * &dir.c;
    let lagrange_defect = (&(&dir.lambda_h * &dir.lambda_h) - &problem.tr_k(&cec)).frobenius_norm();
    let q = problem.q(&out.point);
    let log_likelihood = problem.log_likelihood(&q);
    let eta = problem.eta(&q);
    let estimator = ChoiOperator::from_parts(out.point, d_in, d_out);
    Ok(ProcessReport {
        entropy: process_entropy(&estimator),
        estimator,
        log_likelihood,
        iterations: out.iterations,
        converged: out.converged,
        residual: out.residual,
        likelihood_trace: out.trace,
        final_step: out.final_step,
        stalled: out.stalled,
        max_tp_deviation: out.max_constraint_deviation,
        inv_sqrt_floor_hit: out.floor_hit,
        lagrange_defect,
        estimated_copies: (!dataset.pom().is_perfect()).then(|| problem.total / eta),
    })
}

/// `W_ML(E) = (1/L) Σ_lm (ν_lm/p_lm) ρ_lᵀ ⊗ Π_m` with `ν_lm = n_lm/Σn`.
pub fn w_ml_operator(dataset: &ProcessDataset, e: &ChoiOperator) -> Result<Matrix> {
    let problem = check_operator(dataset, e)?;
    Ok(problem.w(&problem.q(e.matrix())))
}

/// `W − W₀` with `W₀ = (1/(L Σ_l p'_l)) Σ_l ρ_lᵀ ⊗ G`, the gradient of the
/// extended likelihood when the POM sums to `G ≠ 1`.
pub fn qpt_imperfect_correction(dataset: &ProcessDataset, e: &ChoiOperator) -> Result<Matrix> {
    let problem = check_operator(dataset, e)?;
    let q = problem.q(e.matrix());
    Ok(&problem.w(&q) - &problem.w0.scale(1.0 / problem.eta(&q)))
}

fn check_operator(dataset: &ProcessDataset, e: &ChoiOperator) -> Result<QptProblem> {
    if e.dim_in() != dataset.dim_in() || e.dim_out() != dataset.dim_out() {
        return Err(Error::Dimension("Choi operator does not match dataset"));
    }
    let problem = QptProblem::new(dataset, 0.0, 1e-12);
    let q = problem.q(e.matrix());
    if problem.n.iter().zip(&q).any(|(&n, &qj)| n > 0.0 && qj / problem.l <= 1e-14) {
        return Err(Error::InvalidData("observed outcome has vanishing probability"));
    }
    Ok(problem)
}

/// ML process estimate from `E₀ = 1/D_o`.
pub fn qpt_ml_estimate(dataset: &ProcessDataset, config: &EstimationConfig) -> Result<ProcessReport> {
    estimate(dataset, config, None, 0.0)
}

pub fn qpt_ml_estimate_from(
    dataset: &ProcessDataset,
    config: &EstimationConfig,
    e0: &ChoiOperator,
) -> Result<ProcessReport> {
    estimate(dataset, config, Some(e0), 0.0)
}

/// MLME process estimate with `W → W − (λ/D_i)(1 + ln(E/D_i))`.
pub fn qpt_mlme_estimate(dataset: &ProcessDataset, config: &EstimationConfig) -> Result<ProcessReport> {
    estimate(dataset, config, None, config.lambda)
}

pub fn qpt_mlme_estimate_from(
    dataset: &ProcessDataset,
    config: &EstimationConfig,
    e0: &ChoiOperator,
) -> Result<ProcessReport> {
    estimate(dataset, config, Some(e0), config.lambda)
}

/// `Λ_H = sqrt(tr_K{W E W})`, the input-side Lagrange operator implied by
/// the extremal equations.
pub fn lagrange_operator(dataset: &ProcessDataset, e: &ChoiOperator) -> Result<Matrix> {
    let w = w_ml_operator(dataset, e)?;
    let wew = &(&w * e.matrix()) * &w;
    matrix_sqrt_psd(&partial_trace(&wew, e.dim_in(), e.dim_out(), Subsystem::K)?.hermitize())
}
