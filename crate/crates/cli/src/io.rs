//! JSON file formats. Complex entries are `[re, im]` pairs and matrices
//! are lists of rows.

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use qtomo_core::pom::{make_qutrit_two_outcome, make_six, make_trine, make_von_neumann, GramReport, Pom};
use qtomo_core::process::{kraus_to_choi, ChoiOperator, KrausSet};
use qtomo_core::sim::{CountsRecord, ProcessDataset};
use qtomo_core::state::DensityMatrix;
use qtomo_core::{Matrix, C64};

use crate::error::{CliError, CliResult};

pub type MatrixJson = Vec<Vec<[f64; 2]>>;

pub fn matrix_to_json(m: &Matrix) -> MatrixJson {
    (0..m.rows()).map(|i| (0..m.cols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect()).collect()
}

pub fn matrix_from_json(j: &MatrixJson, what: &str) -> CliResult<Matrix> {
    let rows = j.len();
    let cols = j.first().map_or(0, Vec::len);
    if rows == 0 || cols == 0 || j.iter().any(|r| r.len() != cols) {
        return Err(CliError::parse(what, "matrix must be a non-empty list of equal-length rows"));
    }
    let data = j.iter().flatten().map(|&[re, im]| C64::new(re, im)).collect();
    Matrix::new(rows, cols, data).map_err(|e| CliError::parse(what, e))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PomFile {
    pub dim: usize,
    pub outcomes: Vec<MatrixJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
}

impl PomFile {
    pub fn from_pom(p: &Pom) -> Self {
        PomFile {
            dim: p.dim(),
            outcomes: p.outcomes().iter().map(matrix_to_json).collect(),
            labels: p.labels().map(<[String]>::to_vec),
        }
    }

    pub fn to_pom(&self) -> CliResult<Pom> {
        if self.outcomes.is_empty() {
            return Err(CliError::parse("POM", "outcome list is empty"));
        }
        let outcomes = self
            .outcomes
            .iter()
            .enumerate()
            .map(|(k, o)| matrix_from_json(o, &format!("POM outcome {k}")))
            .collect::<CliResult<Vec<_>>>()?;
        if outcomes.iter().any(|o| o.rows() != self.dim || o.cols() != self.dim) {
            return Err(CliError::Validation(format!("POM outcomes must be {0}×{0}", self.dim)));
        }
        Ok(Pom::new(outcomes, self.labels.clone())?)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateFile {
    pub dim: usize,
    pub matrix: MatrixJson,
}

impl StateFile {
    pub fn from_state(rho: &DensityMatrix) -> Self {
        StateFile { dim: rho.dim(), matrix: matrix_to_json(rho.matrix()) }
    }

    pub fn to_state(&self) -> CliResult<DensityMatrix> {
        let m = matrix_from_json(&self.matrix, "state")?;
        if m.rows() != self.dim || m.cols() != self.dim {
            return Err(CliError::Validation(format!("state matrix must be {0}×{0}", self.dim)));
        }
        Ok(DensityMatrix::new(m)?)
    }
}

/// A channel given either by its Choi matrix or by Kraus operators.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelFile {
    pub dim_in: usize,
    pub dim_out: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub choi: Option<MatrixJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kraus: Option<Vec<MatrixJson>>,
}

impl ChannelFile {
    pub fn to_choi(&self) -> CliResult<ChoiOperator> {
        let e = match (&self.choi, &self.kraus) {
            (Some(c), None) => ChoiOperator::new(matrix_from_json(c, "Choi matrix")?, self.dim_in, self.dim_out)?,
            (None, Some(ks)) => {
                let ops = ks
                    .iter()
                    .enumerate()
                    .map(|(k, m)| matrix_from_json(m, &format!("Kraus operator {k}")))
                    .collect::<CliResult<Vec<_>>>()?;
                if ops.iter().any(|k| k.rows() != self.dim_out || k.cols() != self.dim_in) {
                    return Err(CliError::Validation("Kraus operators must be dim_out × dim_in".into()));
                }
                kraus_to_choi(&KrausSet::new(ops)?)
            }
            _ => return Err(CliError::parse("channel", "give exactly one of \"choi\" or \"kraus\"")),
        };
        if e.dim_in() != self.dim_in || e.dim_out() != self.dim_out {
            return Err(CliError::Validation("channel dimensions disagree with its matrices".into()));
        }
        if !e.is_trace_preserving() {
            return Err(CliError::Validation(format!("channel is not trace preserving ({:.3e})", e.tp_deviation())));
        }
        Ok(e)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputsFile {
    pub inputs: Vec<MatrixJson>,
}

pub(crate) fn states_from_json(inputs: &[MatrixJson]) -> CliResult<Vec<DensityMatrix>> {
    if inputs.is_empty() {
        return Err(CliError::parse("inputs", "input list is empty"));
    }
    inputs
        .iter()
        .enumerate()
        .map(|(l, m)| Ok(DensityMatrix::new(matrix_from_json(m, &format!("input state {l}"))?)?))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CountsFile {
    pub pom_ref: String,
    pub counts: Vec<u64>,
    /// Detected copies, `Σ counts`.
    pub total: u64,
    pub n_undetected: Option<u64>,
    pub seed: Option<u64>,
}

impl CountsFile {
    pub fn from_record(pom_ref: &str, c: &CountsRecord) -> Self {
        CountsFile {
            pom_ref: pom_ref.to_string(),
            counts: c.counts.clone(),
            total: c.total(),
            n_undetected: c.n_undetected,
            seed: c.seed,
        }
    }

    pub fn to_record(&self) -> CliResult<CountsRecord> {
        let rec = CountsRecord { counts: self.counts.clone(), n_undetected: self.n_undetected, seed: self.seed };
        if rec.total() != self.total {
            return Err(CliError::Validation(format!(
                "total {} differs from the sum of counts {}",
                self.total,
                rec.total()
            )));
        }
        Ok(rec)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetFile {
    pub dim_in: usize,
    pub dim_out: usize,
    pub inputs: Vec<MatrixJson>,
    pub pom_ref: String,
    pub counts: Vec<Vec<u64>>,
    pub n_per_input: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_undetected: Option<Vec<u64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl DatasetFile {
    pub fn from_dataset(pom_ref: &str, d: &ProcessDataset, seed: Option<u64>) -> Self {
        DatasetFile {
            dim_in: d.dim_in(),
            dim_out: d.dim_out(),
            inputs: d.inputs().iter().map(|r| matrix_to_json(r.matrix())).collect(),
            pom_ref: pom_ref.to_string(),
            counts: d.counts().to_vec(),
            n_per_input: d.copies_per_input(),
            n_undetected: d.n_undetected().map(<[u64]>::to_vec),
            seed,
        }
    }

    pub fn to_dataset(&self, pom: Pom) -> CliResult<ProcessDataset> {
        let inputs = states_from_json(&self.inputs)?;
        if inputs[0].dim() != self.dim_in || pom.dim() != self.dim_out {
            return Err(CliError::Validation("dataset dimensions disagree with inputs or POM".into()));
        }
        Ok(ProcessDataset::new(inputs, pom, self.counts.clone(), self.n_per_input)?)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GramReportFile {
    pub dim: usize,
    pub eigenvalues: Vec<f64>,
    pub n_positive: usize,
    pub perfect: bool,
    pub classification: String,
}

impl From<&GramReport> for GramReportFile {
    fn from(g: &GramReport) -> Self {
        GramReportFile {
            dim: g.dim,
            eigenvalues: g.eigenvalues.clone(),
            n_positive: g.n_positive,
            perfect: g.perfect,
            classification: g.classification.as_str().to_string(),
        }
    }
}

/// Names accepted in place of a POM file.
pub const BUILTIN_POMS: [&str; 4] = ["builtin:trine", "builtin:six", "builtin:z", "builtin:qutrit-two-outcome"];

fn builtin_pom(name: &str) -> Option<Pom> {
    match name {
        "builtin:trine" => Some(make_trine()),
        "builtin:six" => Some(make_six()),
        "builtin:z" => Some(make_von_neumann(&Matrix::identity(2)).expect("identity basis")),
        "builtin:qutrit-two-outcome" => Some(make_qutrit_two_outcome()),
        _ => None,
    }
}

pub fn read_json<T: DeserializeOwned>(path: &Path, what: &str) -> CliResult<T> {
    let text = fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })?;
    serde_json::from_str(&text).map_err(|e| CliError::parse(format!("{what} file {}", path.display()), e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).expect("report types serialize");
    fs::write(path, text + "\n").map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

/// Loads a POM from a builtin name or a file path. Relative paths are
/// tried against `base` (the directory of the referencing file) first.
pub fn load_pom(pom_ref: &str, base: Option<&Path>) -> CliResult<Pom> {
    if let Some(p) = builtin_pom(pom_ref) {
        return Ok(p);
    }
    if pom_ref.starts_with("builtin:") {
        return Err(CliError::parse(
            "POM reference",
            format!("unknown builtin {pom_ref:?}; known: {}", BUILTIN_POMS.join(", ")),
        ));
    }
    let path = resolve(pom_ref, base);
    read_json::<PomFile>(&path, "POM")?.to_pom()
}

fn resolve(r: &str, base: Option<&Path>) -> PathBuf {
    let p = PathBuf::from(r);
    match base {
        Some(b) if p.is_relative() && b.join(&p).exists() => b.join(p),
        _ => p,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn ragged_and_empty_matrices_are_parse_errors() {
        assert_eq!(matrix_from_json(&vec![], "m").unwrap_err().exit_code(), 2);
        let ragged = vec![vec![[1.0, 0.0], [0.0, 0.0]], vec![[0.0, 0.0]]];
        assert_eq!(matrix_from_json(&ragged, "m").unwrap_err().exit_code(), 2);
    }

    #[test]
    fn pom_file_round_trip_and_validation() {
        let six = make_six();
        let back = PomFile::from_pom(&six).to_pom().unwrap();
        assert_eq!(back.outcomes(), six.outcomes());
        let mut f = PomFile::from_pom(&six);
        f.dim = 3;
        assert_eq!(f.to_pom().unwrap_err().exit_code(), 3);
        let empty = PomFile { dim: 2, outcomes: vec![], labels: None };
        assert_eq!(empty.to_pom().unwrap_err().exit_code(), 2);
    }

    #[test]
    fn channel_file_needs_exactly_one_form_and_tp() {
        let id = vec![vec![[1.0, 0.0], [0.0, 0.0]], vec![[0.0, 0.0], [1.0, 0.0]]];
        let ok = ChannelFile { dim_in: 2, dim_out: 2, choi: None, kraus: Some(vec![id.clone()]) };
        assert!(ok.to_choi().is_ok());
        let both = ChannelFile { choi: Some(id.clone()), ..ok.clone() };
        assert_eq!(both.to_choi().unwrap_err().exit_code(), 2);
        let half = vec![vec![[0.5, 0.0], [0.0, 0.0]], vec![[0.0, 0.0], [0.5, 0.0]]];
        let non_tp = ChannelFile { kraus: Some(vec![half]), ..ok };
        assert_eq!(non_tp.to_choi().unwrap_err().exit_code(), 3);
    }

    #[test]
    fn unknown_fields_rejected() {
        let e = serde_json::from_str::<CountsFile>(
            r#"{"pom_ref":"x","counts":[1],"total":1,"n_undetected":null,"seed":null,"extra":1}"#,
        );
        assert!(e.is_err());
    }

    proptest! {
        #[test]
        fn matrix_json_round_trips(d in 1usize..4, vals in proptest::collection::vec(-1e6..1e6f64, 32)) {
            let m = Matrix::from_fn(d, d, |i, j| C64::new(vals[2 * (i * d + j)], vals[2 * (i * d + j) + 1]));
            let j = matrix_to_json(&m);
            let text = serde_json::to_string(&j).unwrap();
            let back = matrix_from_json(&serde_json::from_str(&text).unwrap(), "m").unwrap();
            prop_assert_eq!(back, m);
        }

        #[test]
        fn counts_file_round_trips(counts in proptest::collection::vec(0u64..1_000_000, 1..8), u in proptest::option::of(0u64..1000), seed in proptest::option::of(any::<u64>())) {
            let rec = CountsRecord { counts, n_undetected: u, seed };
            let f = CountsFile::from_record("builtin:six", &rec);
            let back: CountsFile = serde_json::from_str(&serde_json::to_string(&f).unwrap()).unwrap();
            prop_assert_eq!(back.to_record().unwrap(), rec);
        }
    }
}
