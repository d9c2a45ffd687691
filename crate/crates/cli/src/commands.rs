//! The four `qtomo` subcommands. Each returns a human summary; JSON goes
//! only to the requested output path.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use qtomo_core::estimate::{
    closed_form_trine_mlme, closed_form_von_neumann_mlme, extended_log_likelihood, extended_ml_estimate,
    extended_mlme_estimate, log_likelihood, ml_estimate, mlme_estimate, qutrit_exception_ml, EstimationConfig,
    EstimationReport, TrineClosedForm,
};
use qtomo_core::linalg::eigh;
use qtomo_core::pom::{gram_report, make_qutrit_two_outcome, make_trine, Pom};
use qtomo_core::process::{qpt_ml_estimate, qpt_mlme_estimate, ProcessReport};
use qtomo_core::sim::{sample_counts, simulate_process_dataset, CountsRecord};
use qtomo_core::state::{rho_to_bloch, von_neumann_entropy, DensityMatrix};
use qtomo_core::{Matrix, C64};

use crate::config::{resolve_config, EffectiveConfig, FlagOverrides};
use crate::error::{CliError, CliResult};
use crate::io::{
    load_pom, matrix_to_json, read_json, states_from_json, write_json, ChannelFile, CountsFile, DatasetFile,
    GramReportFile, InputsFile, MatrixJson, StateFile,
};

pub struct CommandOutput {
    pub summary: String,
    /// `(defect, iterations)` for an iterative run that stopped before
    /// meeting the tolerance.
    pub not_converged: Option<(f64, usize)>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StateMethod {
    Ml,
    Mlme,
    ClosedForm,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProcessMethod {
    Ml,
    Mlme,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateReportFile {
    pub method: String,
    pub estimator_kind: String,
    pub dim: usize,
    pub estimator: MatrixJson,
    pub bloch: Option<[f64; 3]>,
    pub log_likelihood: f64,
    pub entropy: f64,
    pub iterations: usize,
    pub converged: bool,
    pub residual: Option<f64>,
    pub likelihood_trace: Vec<f64>,
    pub estimated_copies: Option<f64>,
    pub final_step: Option<f64>,
    pub stalled: bool,
    pub regularized: bool,
    /// Set for closed-form runs whose ML set is not a single state.
    pub non_unique: Option<bool>,
    pub config: EffectiveConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProcessReportFile {
    pub method: String,
    pub dim_in: usize,
    pub dim_out: usize,
    pub estimator: MatrixJson,
    pub log_likelihood: f64,
    pub entropy: f64,
    pub iterations: usize,
    pub converged: bool,
    pub residual: f64,
    pub likelihood_trace: Vec<f64>,
    pub final_step: f64,
    pub stalled: bool,
    pub max_tp_deviation: f64,
    pub inv_sqrt_floor_hit: bool,
    pub lagrange_defect: f64,
    pub estimated_copies: Option<f64>,
    pub config: EffectiveConfig,
}

/// Refuses to write over one of the command's inputs.
fn check_out(out: Option<&Path>, inputs: &[&Path]) -> CliResult<()> {
    let Some(out) = out else { return Ok(()) };
    let canon = |p: &Path| std::fs::canonicalize(p).ok();
    if let Some(o) = canon(out) {
        if inputs.iter().any(|i| canon(i).as_ref() == Some(&o)) {
            return Err(CliError::Validation(format!("output {} would overwrite an input", out.display())));
        }
    }
    Ok(())
}

fn fmt_list(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.6}")).collect::<Vec<_>>().join(", ")
}

pub fn analyze_pom(pom_ref: &str, out: Option<&Path>) -> CliResult<CommandOutput> {
    check_out(out, &[Path::new(pom_ref)])?;
    let pom = load_pom(pom_ref, None)?;
    let g = gram_report(&pom);
    log::info!("analyzed POM with {} outcomes in dimension {}", pom.len(), pom.dim());
    let mut s = String::new();
    writeln!(s, "dimension {}, {} outcomes", g.dim, pom.len()).unwrap();
    writeln!(s, "Gram eigenvalues: {}", fmt_list(&g.eigenvalues)).unwrap();
    writeln!(s, "{}, n>0 = {}", g.classification, g.n_positive).unwrap();
    if let Some(path) = out {
        write_json(path, &GramReportFile::from(&g))?;
    }
    Ok(CommandOutput { summary: s, not_converged: None })
}

pub struct SimulateArgs<'a> {
    pub state: Option<&'a Path>,
    pub channel: Option<&'a Path>,
    pub inputs: Option<&'a Path>,
    pub pom_ref: &'a str,
    pub copies: u64,
    pub seed: u64,
    pub out: Option<&'a Path>,
}

pub fn simulate(a: &SimulateArgs) -> CliResult<CommandOutput> {
    let sources: Vec<&Path> =
        [a.state, a.channel, a.inputs, Some(Path::new(a.pom_ref))].into_iter().flatten().collect();
    check_out(a.out, &sources)?;
    let pom = load_pom(a.pom_ref, None)?;
    let mut s = String::new();
    match (a.state, a.channel, a.inputs) {
        (Some(state), None, None) => {
            let rho = read_json::<StateFile>(state, "state")?.to_state()?;
            if rho.dim() != pom.dim() {
                return Err(CliError::Validation(format!(
                    "state dimension {} differs from POM dimension {}",
                    rho.dim(),
                    pom.dim()
                )));
            }
            let c = sample_counts(&rho, &pom, a.copies, a.seed)?;
            writeln!(s, "{} copies, seed {}", a.copies, a.seed).unwrap();
            writeln!(s, "counts: {:?}", c.counts).unwrap();
            if let Some(u) = c.n_undetected {
                writeln!(s, "undetected: {u}").unwrap();
            }
            if let Some(path) = a.out {
                write_json(path, &CountsFile::from_record(a.pom_ref, &c))?;
            }
        }
        (None, Some(channel), Some(inputs)) => {
            let e = read_json::<ChannelFile>(channel, "channel")?.to_choi()?;
            let states = states_from_json(&read_json::<InputsFile>(inputs, "inputs")?.inputs)?;
            if states.iter().any(|r| r.dim() != e.dim_in()) || pom.dim() != e.dim_out() {
                return Err(CliError::Validation("inputs, channel and POM dimensions do not match".into()));
            }
            let ds = simulate_process_dataset(&e, &states, &pom, a.copies, a.seed)?;
            writeln!(s, "{} inputs × {} copies, seed {}", states.len(), a.copies, a.seed).unwrap();
            for (l, row) in ds.counts().iter().enumerate() {
                writeln!(s, "input {l}: {row:?}").unwrap();
            }
            if let Some(path) = a.out {
                write_json(path, &DatasetFile::from_dataset(a.pom_ref, &ds, Some(a.seed)))?;
            }
        }
        _ => return Err(CliError::parse("arguments", "give either --state, or --channel with --inputs")),
    }
    Ok(CommandOutput { summary: s, not_converged: None })
}

pub struct EstimateArgs<'a> {
    pub config_file: Option<&'a Path>,
    pub flags: FlagOverrides,
    pub out: Option<&'a Path>,
}

fn same_outcomes(a: &Pom, b: &Pom) -> bool {
    a.dim() == b.dim()
        && a.len() == b.len()
        && a.outcomes().iter().zip(b.outcomes()).all(|(x, y)| (x - y).max_abs() < 1e-9)
}

/// Orthonormal basis of a von Neumann POM, or `None`.
fn von_neumann_basis(pom: &Pom) -> Option<Matrix> {
    let d = pom.dim();
    if pom.len() != d || !pom.is_perfect() {
        return None;
    }
    let mut cols: Vec<Vec<C64>> = Vec::with_capacity(d);
    for o in pom.outcomes() {
        let e = eigh(o).ok()?;
        if (e.max() - 1.0).abs() > 1e-9 || e.values[..d - 1].iter().any(|v| v.abs() > 1e-9) {
            return None;
        }
        cols.push((0..d).map(|i| e.vectors[(i, d - 1)]).collect());
    }
    Some(Matrix::from_fn(d, d, |i, k| cols[k][i]))
}

fn state_report(
    method: &str,
    kind: &str,
    rho: &DensityMatrix,
    counts: &CountsRecord,
    pom: &Pom,
    r: Option<&EstimationReport>,
    cfg: &EstimationConfig,
) -> CliResult<StateReportFile> {
    let ll = match r {
        Some(r) => r.log_likelihood,
        None if pom.is_perfect() => log_likelihood(counts, rho, pom)?,
        None => extended_log_likelihood(counts, rho, pom)?,
    };
    Ok(StateReportFile {
        method: method.into(),
        estimator_kind: kind.into(),
        dim: rho.dim(),
        estimator: matrix_to_json(rho.matrix()),
        bloch: (rho.dim() == 2).then(|| rho_to_bloch(rho).map(|b| [b.x, b.y, b.z])).transpose()?,
        log_likelihood: ll,
        entropy: von_neumann_entropy(rho),
        iterations: r.map_or(0, |r| r.iterations),
        converged: r.is_none_or(|r| r.converged),
        residual: r.map(|r| r.residual),
        likelihood_trace: r.map_or_else(Vec::new, |r| r.likelihood_trace.clone()),
        estimated_copies: r.and_then(|r| r.estimated_copies),
        final_step: r.map(|r| r.final_step),
        stalled: r.is_some_and(|r| r.stalled),
        regularized: r.is_some_and(|r| r.regularized),
        non_unique: None,
        config: cfg.into(),
    })
}

fn iterative_state(
    method: StateMethod,
    counts: &CountsRecord,
    pom: &Pom,
    cfg: &EstimationConfig,
) -> CliResult<(EstimationReport, &'static str)> {
    Ok(match (method, pom.is_perfect()) {
        (StateMethod::Ml, true) => (ml_estimate(counts, pom, cfg)?, "ml"),
        (StateMethod::Ml, false) => (extended_ml_estimate(counts, pom, cfg)?, "extended-ml"),
        (_, true) => (mlme_estimate(counts, pom, cfg)?, "mlme"),
        (_, false) => (extended_mlme_estimate(counts, pom, cfg)?, "extended-mlme"),
    })
}

fn closed_form_state(counts: &CountsRecord, pom: &Pom, cfg: &EstimationConfig) -> CliResult<StateReportFile> {
    let method = "closed-form";
    if same_outcomes(pom, &make_trine()) {
        return match closed_form_trine_mlme(counts)? {
            TrineClosedForm::State(rho) => state_report(method, "trine", &rho, counts, pom, None, cfg),
            TrineClosedForm::BoundaryDeferral { .. } => {
                log::info!("trine formula leaves the Bloch ball; falling back to iterative MLME");
                let r = mlme_estimate(counts, pom, cfg)?;
                state_report(method, "trine-boundary-mlme", &r.estimator, counts, pom, Some(&r), cfg)
            }
        };
    }
    if same_outcomes(pom, &make_qutrit_two_outcome()) {
        let set = qutrit_exception_ml(counts)?;
        let a = (1.0 - set.rho33) / 2.0;
        let rho = DensityMatrix::new(Matrix::from_real_diag(&[a, a, set.rho33]))?;
        let mut rep = state_report(method, "qutrit-two-outcome", &rho, counts, pom, None, cfg)?;
        rep.non_unique = Some(set.non_unique);
        return Ok(rep);
    }
    if let Some(basis) = von_neumann_basis(pom) {
        let rho = closed_form_von_neumann_mlme(counts, &basis)?;
        return state_report(method, "von-neumann", &rho, counts, pom, None, cfg);
    }
    Err(CliError::Validation("closed form is available only for von Neumann, trine and qutrit two-outcome POMs".into()))
}

fn state_summary(r: &StateReportFile) -> String {
    let mut s = String::new();
    writeln!(s, "method {} ({})", r.method, r.estimator_kind).unwrap();
    if let Some(res) = r.residual {
        let status = if r.converged { "converged" } else { "NOT converged" };
        writeln!(s, "{status} after {} iterations, defect {res:.3e}", r.iterations).unwrap();
    }
    writeln!(s, "log-likelihood {:.6}", r.log_likelihood).unwrap();
    writeln!(s, "entropy {:.6}", r.entropy).unwrap();
    if let Some([x, y, z]) = r.bloch {
        writeln!(s, "Bloch vector ({x:.5}, {y:.5}, {z:.5})").unwrap();
    } else {
        let diag: Vec<f64> = (0..r.dim).map(|i| r.estimator[i][i][0]).collect();
        writeln!(s, "diagonal {}", fmt_list(&diag)).unwrap();
    }
    if let Some(n) = r.estimated_copies {
        writeln!(s, "estimated copies {n:.1}").unwrap();
    }
    if r.non_unique == Some(true) {
        writeln!(s, "the ML estimator is not unique; reported state is the maximum-entropy member").unwrap();
    }
    s
}

pub fn estimate_state(
    counts_path: &Path,
    pom_ref: Option<&str>,
    method: StateMethod,
    a: &EstimateArgs,
) -> CliResult<CommandOutput> {
    let mut inputs = vec![counts_path];
    if let Some(p) = pom_ref {
        inputs.push(Path::new(p));
    }
    if let Some(c) = a.config_file {
        inputs.push(c);
    }
    check_out(a.out, &inputs)?;
    let cfg = resolve_config(a.config_file, &a.flags)?;
    let cf: CountsFile = read_json(counts_path, "counts")?;
    let pom = load_pom(pom_ref.unwrap_or(&cf.pom_ref), pom_ref.is_none().then(|| counts_path.parent()).flatten())?;
    let counts = cf.to_record()?;
    if counts.counts.len() != pom.len() {
        return Err(CliError::Validation(format!(
            "{} counts for a POM with {} outcomes",
            counts.counts.len(),
            pom.len()
        )));
    }
    let rep = match method {
        StateMethod::ClosedForm => closed_form_state(&counts, &pom, &cfg)?,
        _ => {
            let (r, kind) = iterative_state(method, &counts, &pom, &cfg)?;
            let name = if method == StateMethod::Ml { "ml" } else { "mlme" };
            state_report(name, kind, &r.estimator, &counts, &pom, Some(&r), &cfg)?
        }
    };
    log::info!("state estimate finished: converged {}", rep.converged);
    if let Some(path) = a.out {
        write_json(path, &rep)?;
    }
    let nc = (!rep.converged).then(|| (rep.residual.unwrap_or(f64::NAN), rep.iterations));
    Ok(CommandOutput { summary: state_summary(&rep), not_converged: nc })
}

fn process_report(method: &str, r: &ProcessReport, cfg: &EstimationConfig) -> ProcessReportFile {
    ProcessReportFile {
        method: method.into(),
        dim_in: r.estimator.dim_in(),
        dim_out: r.estimator.dim_out(),
        estimator: matrix_to_json(r.estimator.matrix()),
        log_likelihood: r.log_likelihood,
        entropy: r.entropy,
        iterations: r.iterations,
        converged: r.converged,
        residual: r.residual,
        likelihood_trace: r.likelihood_trace.clone(),
        final_step: r.final_step,
        stalled: r.stalled,
        max_tp_deviation: r.max_tp_deviation,
        inv_sqrt_floor_hit: r.inv_sqrt_floor_hit,
        lagrange_defect: r.lagrange_defect,
        estimated_copies: r.estimated_copies,
        config: cfg.into(),
    }
}

pub fn estimate_process(dataset_path: &Path, method: ProcessMethod, a: &EstimateArgs) -> CliResult<CommandOutput> {
    let mut inputs = vec![dataset_path];
    if let Some(c) = a.config_file {
        inputs.push(c);
    }
    check_out(a.out, &inputs)?;
    let cfg = resolve_config(a.config_file, &a.flags)?;
    let df: DatasetFile = read_json(dataset_path, "dataset")?;
    let pom = load_pom(&df.pom_ref, dataset_path.parent())?;
    let ds = df.to_dataset(pom)?;
    let (name, r) = match method {
        ProcessMethod::Ml => ("ml", qpt_ml_estimate(&ds, &cfg)?),
        ProcessMethod::Mlme => ("mlme", qpt_mlme_estimate(&ds, &cfg)?),
    };
    let rep = process_report(name, &r, &cfg);
    log::info!("process estimate finished: converged {}", rep.converged);
    let mut s = String::new();
    writeln!(s, "method {name}, {} inputs, D_i = {}, D_o = {}", ds.inputs().len(), rep.dim_in, rep.dim_out).unwrap();
    let status = if rep.converged { "converged" } else { "NOT converged" };
    writeln!(s, "{status} after {} iterations, defect {:.3e}", rep.iterations, rep.residual).unwrap();
    writeln!(s, "log-likelihood {:.6}", rep.log_likelihood).unwrap();
    writeln!(s, "process entropy {:.6}", rep.entropy).unwrap();
    writeln!(s, "max trace-preservation deviation {:.3e}", rep.max_tp_deviation).unwrap();
    if let Some(n) = rep.estimated_copies {
        writeln!(s, "estimated copies {n:.1}").unwrap();
    }
    if let Some(path) = a.out {
        write_json(path, &rep)?;
    }
    let nc = (!rep.converged).then_some((rep.residual, rep.iterations));
    Ok(CommandOutput { summary: s, not_converged: nc })
}
