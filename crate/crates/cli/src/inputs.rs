//! Resolution of command-line inputs: records, states, operator sets, starts.

use std::fs;
use std::path::Path;

use num_complex::Complex64;
use qst_core::io::{pairs_to_matrix, parse_operators, parse_record, ComplexPair};
use qst_core::measurement::{polarization_projector, preset_povm, POVM_PRESETS};
use qst_core::verify::start_point;
use qst_core::{DensityMatrix, MeasurementOperator, MeasurementRecord, ParamVector};

use crate::error::{CliError, CliResult};

/// Records shipped with the tool, addressable by name.
pub const BUNDLED_RECORDS: [(&str, &str); 3] = [
    ("example1", include_str!("../data/example1.rec")),
    ("example2", include_str!("../data/example2.rec")),
    ("example3", include_str!("../data/example3.rec")),
];

fn read(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))
}

/// A record from a file, or a bundled record when no such file exists.
pub fn load_record(arg: &str) -> CliResult<MeasurementRecord> {
    let path = Path::new(arg);
    let text = if path.exists() {
        read(path)?
    } else if let Some((_, text)) = BUNDLED_RECORDS.iter().find(|(name, _)| *name == arg) {
        text.to_string()
    } else {
        let names: Vec<_> = BUNDLED_RECORDS.iter().map(|(n, _)| *n).collect();
        return Err(CliError::Input(format!(
            "no record file {arg:?} and no bundled record of that name (bundled: {})",
            names.join(", ")
        )));
    };
    Ok(parse_record(&text)?)
}

pub fn load_povm(arg: &str) -> CliResult<Vec<MeasurementOperator>> {
    if POVM_PRESETS.contains(&arg) {
        return Ok(preset_povm(arg)?);
    }
    let path = Path::new(arg);
    if path.exists() {
        return Ok(parse_operators(&read(path)?)?);
    }
    Err(CliError::Input(format!(
        "unknown operator preset {arg:?} (known: {})",
        POVM_PRESETS.join(", ")
    )))
}

/// Named state for a system of dimension `dim`, or a matrix file.
pub fn load_state(arg: &str, dim: usize) -> CliResult<DensityMatrix> {
    let rho = match arg {
        "mixed" => DensityMatrix::maximally_mixed(dim),
        "bell" => {
            let r = std::f64::consts::FRAC_1_SQRT_2;
            let z = Complex64::new(0.0, 0.0);
            DensityMatrix::pure(&[Complex64::new(r, 0.0), z, z, Complex64::new(r, 0.0)])?
        }
        s if !s.is_empty() && s.chars().all(|c| "HVDARL".contains(c)) => {
            DensityMatrix::new(polarization_projector(s)?.matrix().clone())?
        }
        s if Path::new(s).exists() => {
            let rows: Vec<Vec<ComplexPair>> = serde_json::from_str(&read(Path::new(s))?)
                .map_err(|e| CliError::Input(format!("{s}: expected rows of [re, im] pairs: {e}")))?;
            DensityMatrix::new(pairs_to_matrix(&rows)?)?
        }
        s => {
            return Err(CliError::Input(format!(
                "unknown state preset {s:?} (use H, V, D, A, R, L or products such as HV, mixed, bell, or a matrix file)"
            )))
        }
    };
    if rho.dim() != dim {
        return Err(CliError::Input(format!(
            "state {arg:?} has dimension {}, the operators act on dimension {dim}",
            rho.dim()
        )));
    }
    Ok(rho)
}

pub fn parse_start(arg: &str, dim: usize, seed: u64) -> CliResult<ParamVector> {
    match arg {
        "mixed" => Ok(ParamVector::maximally_mixed(dim)),
        "random" => Ok(start_point(dim, seed, 0)),
        list => {
            let values = list
                .split(',')
                .map(|v| v.trim().parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| CliError::Input(format!("bad --start {list:?}: {e}")))?;
            if values.len() != dim * dim {
                return Err(CliError::Input(format!(
                    "--start has {} values, {} needed for dimension {dim}",
                    values.len(),
                    dim * dim
                )));
            }
            Ok(ParamVector::new(values)?)
        }
    }
}
