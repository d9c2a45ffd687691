//! ML and MLME state estimation.

pub(crate) mod ascent;
mod closed_form;
mod state;

use alloc::vec::Vec;

pub use closed_form::*;
pub use state::*;

use crate::error::{Error, Result};
use crate::state::DensityMatrix;

/// Step-size and stopping parameters shared by all iterative estimators.
#[derive(Clone, Debug, PartialEq)]
pub struct EstimationConfig {
    /// Initial step size ε.
    pub epsilon0: f64,
    /// Entropy multiplier λ (MLME only).
    pub lambda: f64,
    pub max_iters: usize,
    /// Convergence threshold on the extremal-equation defect.
    pub grad_tol: f64,
    /// Factor applied to ε after a rejected step.
    pub step_shrink: f64,
    /// Relative eigenvalue floor for matrix logarithms.
    pub log_floor: f64,
    /// Probability floor for outcomes with counts.
    pub p_floor: f64,
    pub step_growth: f64,
    /// Consecutive accepted steps before ε grows.
    pub growth_after: usize,
    /// Upper bound for ε growth, never below `epsilon0`; `None` caps at
    /// `epsilon0`.
    pub epsilon_max: Option<f64>,
    /// The run stops as stalled once ε falls below this.
    pub epsilon_min: f64,
}

impl Default for EstimationConfig {
    fn default() -> Self {
        EstimationConfig {
            epsilon0: 0.1,
            lambda: 1e-4,
            max_iters: 20_000,
            grad_tol: 1e-10,
            step_shrink: 0.5,
            log_floor: 1e-12,
            p_floor: 1e-14,
            step_growth: 1.2,
            growth_after: 5,
            epsilon_max: Some(10.0),
            epsilon_min: 1e-14,
        }
    }
}

impl EstimationConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.epsilon0 > 0.0
            && self.lambda >= 0.0
            && self.grad_tol > 0.0
            && self.step_shrink > 0.0
            && self.step_shrink < 1.0
            && self.log_floor > 0.0
            && self.p_floor >= 0.0
            && self.step_growth >= 1.0
            && self.epsilon_min > 0.0
            && self.epsilon_max.is_none_or(|m| m > 0.0)
            && [self.epsilon0, self.lambda, self.grad_tol, self.log_floor, self.step_growth]
                .iter()
                .all(|x| x.is_finite());
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument("invalid estimation configuration"))
        }
    }

    pub(crate) fn epsilon_cap(&self) -> f64 {
        self.epsilon_max.map_or(self.epsilon0, |m| m.max(self.epsilon0))
    }
}

/// Result of an iterative state estimation.
#[derive(Clone, Debug, PartialEq)]
pub struct EstimationReport {
    pub estimator: DensityMatrix,
    /// `Σ n_j ln p_j`, or `Σ n_j ln(p_j/η)` for the extended estimators.
    pub log_likelihood: f64,
    /// von Neumann entropy of the estimator.
    pub entropy: f64,
    /// Accepted steps.
    pub iterations: usize,
    pub converged: bool,
    /// Extremal-equation defect at the returned estimator.
    pub residual: f64,
    /// Objective after each accepted step, starting with the initial
    /// point. For MLME runs this is `ln L + NλS`.
    pub likelihood_trace: Vec<f64>,
    /// `Ñ = N/η̂` for the extended estimators.
    pub estimated_copies: Option<f64>,
    /// ε when the run ended.
    pub final_step: f64,
    /// ε underflowed before the defect criterion was met.
    pub stalled: bool,
    /// The start point was mixed toward `1/D` to lift vanishing
    /// probabilities.
    pub regularized: bool,
}
