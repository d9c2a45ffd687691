//! Estimation settings: command-line flag, then config file, then default.

use std::path::Path;

use serde::{Deserialize, Serialize};

use qtomo_core::estimate::EstimationConfig;

use crate::error::{CliError, CliResult};
use crate::io::read_json;

/// Every field of [`EstimationConfig`], all optional. Used for config
/// files and for the values echoed into reports.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iters: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grad_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step_shrink: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub log_floor: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_floor: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step_growth: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub growth_after: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon_min: Option<f64>,
}

/// The configuration a run actually used.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EffectiveConfig {
    pub epsilon0: f64,
    pub lambda: f64,
    pub max_iters: usize,
    pub grad_tol: f64,
    pub step_shrink: f64,
    pub log_floor: f64,
    pub p_floor: f64,
    pub step_growth: f64,
    pub growth_after: usize,
    pub epsilon_max: Option<f64>,
    pub epsilon_min: f64,
}

impl From<&EstimationConfig> for EffectiveConfig {
    fn from(c: &EstimationConfig) -> Self {
        EffectiveConfig {
            epsilon0: c.epsilon0,
            lambda: c.lambda,
            max_iters: c.max_iters,
            grad_tol: c.grad_tol,
            step_shrink: c.step_shrink,
            log_floor: c.log_floor,
            p_floor: c.p_floor,
            step_growth: c.step_growth,
            growth_after: c.growth_after,
            epsilon_max: c.epsilon_max,
            epsilon_min: c.epsilon_min,
        }
    }
}

/// Overrides taken from the command line.
#[derive(Clone, Debug, Default)]
pub struct FlagOverrides {
    pub lambda: Option<f64>,
    pub eps: Option<f64>,
    pub max_iters: Option<usize>,
    pub tol: Option<f64>,
}

impl ConfigFile {
    fn apply(&self, c: &mut EstimationConfig) {
        macro_rules! set {
            ($($f:ident),*) => { $( if let Some(v) = self.$f { c.$f = v; } )* };
        }
        set!(
            epsilon0,
            lambda,
            max_iters,
            grad_tol,
            step_shrink,
            log_floor,
            p_floor,
            step_growth,
            growth_after,
            epsilon_min
        );
        if self.epsilon_max.is_some() {
            c.epsilon_max = self.epsilon_max;
        }
    }
}

pub fn resolve_config(file: Option<&Path>, flags: &FlagOverrides) -> CliResult<EstimationConfig> {
    let mut c = EstimationConfig::default();
    if let Some(path) = file {
        read_json::<ConfigFile>(path, "config")?.apply(&mut c);
    }
    if let Some(v) = flags.lambda {
        c.lambda = v;
    }
    if let Some(v) = flags.eps {
        c.epsilon0 = v;
    }
    if let Some(v) = flags.max_iters {
        c.max_iters = v;
    }
    if let Some(v) = flags.tol {
        c.grad_tol = v;
    }
    c.validate().map_err(|e| CliError::Validation(e.to_string()))?;
    Ok(c)
}
