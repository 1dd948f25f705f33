//! JSON documents: measurement records and result reports.
//!
//! A record looks like
//!
//! ```json
//! {
//!   "dim": 2,
//!   "operators": "pol4",
//!   "counts": [9990, 2, 4995, 4994],
//!   "normalization": 10000
//! }
//! ```
//!
//! `operators` is either a preset name or a list of `{"label", "matrix"}` or
//! `{"label", "ket"}` entries, complex numbers written as `[re, im]`.
//! `normalization` is a number or `"per-basis-group"`; the latter takes its
//! groups from `basis_groups` or, for presets, from the preset itself.

use std::fs;
use std::io::Write;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hermitian::{eig_hermitian, purity, CMatrix, HermitianMatrix};
use crate::measurement::{preset_basis_groups, preset_povm, MeasurementOperator, MeasurementRecord, Normalization, POVM_PRESETS};
use crate::optim::{OptimizationResult, StopReason};
use crate::verify::MultistartReport;

pub const PER_BASIS_GROUP: &str = "per-basis-group";

/// Complex number as `[re, im]`.
pub type ComplexPair = [f64; 2];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OperatorSpec {
    Preset(String),
    Explicit(Vec<OperatorEntry>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorEntry {
    pub label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<Vec<Vec<ComplexPair>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ket: Option<Vec<ComplexPair>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NormalizationSpec {
    Constant(f64),
    Policy(String),
}

/// On-disk form of a [`MeasurementRecord`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecordFile {
    pub dim: usize,
    pub operators: OperatorSpec,
    pub counts: Vec<u64>,
    pub normalization: NormalizationSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub basis_groups: Option<Vec<Vec<usize>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Provenance of the run that produced the file; not interpreted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manifest: Option<serde_json::Value>,
}

fn schema(msg: impl Into<String>) -> Error {
    Error::Schema(msg.into())
}

pub fn matrix_to_pairs(m: &CMatrix) -> Vec<Vec<ComplexPair>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
        .collect()
}

pub fn pairs_to_matrix(rows: &[Vec<ComplexPair>]) -> Result<CMatrix> {
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(schema("matrix must be square and nonempty"));
    }
    Ok(CMatrix::from_fn(n, n, |i, j| Complex64::new(rows[i][j][0], rows[i][j][1])))
}

impl RecordFile {
    pub fn into_record(self) -> Result<MeasurementRecord> {
        let (operators, preset) = match self.operators {
            OperatorSpec::Preset(name) => {
                let ops = preset_povm(&name).map_err(|_| {
                    schema(format!("unknown operator preset {name:?} (known: {})", POVM_PRESETS.join(", ")))
                })?;
                (ops, Some(name))
            }
            OperatorSpec::Explicit(entries) => {
                let ops = entries
                    .into_iter()
                    .map(OperatorEntry::into_operator)
                    .collect::<Result<Vec<_>>>()?;
                (ops, None)
            }
        };
        if let Some(bad) = operators.iter().find(|o| o.dim() != self.dim) {
            return Err(schema(format!(
                "operator {:?} has dimension {}, record declares {}",
                bad.label(),
                bad.dim(),
                self.dim
            )));
        }
        if operators.len() != self.counts.len() {
            return Err(schema(format!(
                "{} operators but {} counts",
                operators.len(),
                self.counts.len()
            )));
        }
        let normalization = match self.normalization {
            NormalizationSpec::Constant(n) => Normalization::Constant(n),
            NormalizationSpec::Policy(p) if p == PER_BASIS_GROUP => {
                let groups = match (self.basis_groups, &preset) {
                    (Some(g), _) => g,
                    (None, Some(name)) => preset_basis_groups(name)?,
                    (None, None) => {
                        return Err(schema("per-basis-group normalization needs basis_groups"));
                    }
                };
                Normalization::PerBasisGroup(groups)
            }
            NormalizationSpec::Policy(p) => {
                return Err(schema(format!("unknown normalization policy {p:?}")));
            }
        };
        let mut record = MeasurementRecord::new(operators, self.counts, normalization).map_err(|e| match e {
            Error::InvalidArgument(m) | Error::Schema(m) => schema(m),
            other => other,
        })?;
        record.seed = self.seed;
        Ok(record)
    }

    /// File form of `record`, naming a preset when the operators match one.
    pub fn from_record(record: &MeasurementRecord) -> Self {
        let preset = POVM_PRESETS
            .iter()
            .find(|name| preset_povm(name).is_ok_and(|ops| ops == record.operators))
            .map(|s| s.to_string());
        let (normalization, basis_groups) = match &record.normalization {
            Normalization::Constant(n) => (NormalizationSpec::Constant(*n), None),
            Normalization::PerBasisGroup(g) => {
                let implied = preset
                    .as_deref()
                    .and_then(|p| preset_basis_groups(p).ok())
                    .is_some_and(|pg| &pg == g);
                (
                    NormalizationSpec::Policy(PER_BASIS_GROUP.into()),
                    (!implied).then(|| g.clone()),
                )
            }
        };
        let operators = match preset {
            Some(name) => OperatorSpec::Preset(name),
            None => OperatorSpec::Explicit(
                record
                    .operators
                    .iter()
                    .map(|o| OperatorEntry {
                        label: o.label().to_string(),
                        matrix: Some(matrix_to_pairs(o.matrix())),
                        ket: None,
                    })
                    .collect(),
            ),
        };
        Self {
            dim: record.dim(),
            operators,
            counts: record.counts.clone(),
            normalization,
            basis_groups,
            seed: record.seed,
            manifest: None,
        }
    }
}

impl OperatorEntry {
    fn into_operator(self) -> Result<MeasurementOperator> {
        match (self.matrix, self.ket) {
            (Some(rows), None) => {
                let m = pairs_to_matrix(&rows)?;
                let h = HermitianMatrix::new(m).map_err(|e| schema(format!("operator {:?}: {e}", self.label)))?;
                MeasurementOperator::new(self.label.clone(), h).map_err(|e| schema(format!("operator {:?}: {e}", self.label)))
            }
            (None, Some(ket)) => {
                let ket: Vec<Complex64> = ket.iter().map(|p| Complex64::new(p[0], p[1])).collect();
                MeasurementOperator::projector(self.label.clone(), &ket).map_err(|e| schema(format!("operator {:?}: {e}", self.label)))
            }
            _ => Err(schema(format!(
                "operator {:?} needs exactly one of \"matrix\" or \"ket\"",
                self.label
            ))),
        }
    }
}

/// Operators from a preset name or an explicit entry list, as in the
/// `operators` field of a record.
pub fn parse_operators(text: &str) -> Result<Vec<MeasurementOperator>> {
    match serde_json::from_str(text).map_err(|e| schema(e.to_string()))? {
        OperatorSpec::Preset(name) => preset_povm(&name).map_err(|e| schema(e.to_string())),
        OperatorSpec::Explicit(entries) => entries.into_iter().map(OperatorEntry::into_operator).collect(),
    }
}

pub fn parse_record(text: &str) -> Result<MeasurementRecord> {
    let file: RecordFile = serde_json::from_str(text).map_err(|e| schema(e.to_string()))?;
    file.into_record()
}

pub fn read_record(path: &Path) -> Result<MeasurementRecord> {
    parse_record(&fs::read_to_string(path)?)
}

pub fn record_to_string(record: &MeasurementRecord) -> Result<String> {
    Ok(serde_json::to_string_pretty(&RecordFile::from_record(record))? + "\n")
}

/// Writes through a temporary file in the same directory and renames it into
/// place, so a failed write never leaves a partial file behind.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let name = path
        .file_name()
        .ok_or_else(|| Error::InvalidArgument(format!("{} is not a file path", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents.as_bytes())?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    Ok(result?)
}

/// Rows of `m` with entries rounded to four decimals.
pub fn render_matrix(m: &CMatrix) -> Vec<String> {
    (0..m.nrows())
        .map(|i| {
            (0..m.ncols())
                .map(|j| {
                    let z = m[(i, j)];
                    let re = if z.re.abs() < 5e-5 { 0.0 } else { z.re };
                    let im = if z.im.abs() < 5e-5 { 0.0 } else { z.im };
                    if im == 0.0 {
                        format!("{re:.4}")
                    } else {
                        format!("{re:.4}{}{:.4}i", if im < 0.0 { '-' } else { '+' }, im.abs())
                    }
                })
                .collect::<Vec<_>>()
                .join("  ")
        })
        .collect()
}

/// Serializable summary of one optimization run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultDoc {
    pub reason: StopReason,
    pub f_final: f64,
    pub grad_norm: f64,
    pub iters: usize,
    pub fevals: usize,
    pub t_final: Vec<f64>,
    pub t_norm_inf: f64,
    pub purity: f64,
    pub min_eigenvalue: f64,
    pub rho: Vec<Vec<ComplexPair>>,
    pub rho_display: Vec<String>,
}

impl ResultDoc {
    pub fn new(res: &OptimizationResult) -> Result<Self> {
        let m = res.rho_final.matrix();
        Ok(Self {
            reason: res.reason,
            f_final: res.f_final,
            grad_norm: res.grad_norm,
            iters: res.iters,
            fevals: res.fevals,
            t_final: res.t_final.as_slice().to_vec(),
            t_norm_inf: res.t_norm_inf(),
            purity: purity(&res.rho_final),
            min_eigenvalue: eig_hermitian(&res.rho_final.as_hermitian())?[0],
            rho: matrix_to_pairs(m),
            rho_display: render_matrix(m),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultistartDoc {
    pub distinct_t_count: usize,
    pub retained_count: usize,
    pub discarded_count: usize,
    pub max_pairwise_rho_distance: f64,
    pub max_f_spread: f64,
    pub reasons: Vec<(StopReason, usize)>,
    pub solutions: Vec<ResultDoc>,
}

impl MultistartDoc {
    pub fn new(rep: &MultistartReport) -> Result<Self> {
        Ok(Self {
            distinct_t_count: rep.distinct_t_count,
            retained_count: rep.retained_count,
            discarded_count: rep.discarded_count,
            max_pairwise_rho_distance: rep.max_pairwise_rho_distance,
            max_f_spread: rep.max_f_spread,
            reasons: rep.reasons.iter().map(|(r, n)| (*r, *n)).collect(),
            solutions: rep.solutions.iter().map(ResultDoc::new).collect::<Result<_>>()?,
        })
    }
}
