//! Measurement operators, Born-rule probabilities, count normalization and
//! synthetic data.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};

use crate::error::{Error, Result};
use crate::hermitian::{
    eig_hermitian, trace_product, CMatrix, DensityMatrix, HermitianMatrix, DEFAULT_MAX_QUBITS,
    PSD_TOL,
};

/// Labelled positive semidefinite measurement operator.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementOperator {
    label: String,
    matrix: HermitianMatrix,
}

impl MeasurementOperator {
    pub fn new(label: impl Into<String>, matrix: HermitianMatrix) -> Result<Self> {
        let min = eig_hermitian(&matrix)?[0];
        if min < -PSD_TOL {
            return Err(Error::InvalidArgument(format!(
                "measurement operator has negative eigenvalue {min:.3e}"
            )));
        }
        Ok(Self {
            label: label.into(),
            matrix,
        })
    }

    /// Rank-one projector onto the normalized `ket`.
    pub fn projector(label: impl Into<String>, ket: &[Complex64]) -> Result<Self> {
        let rho = DensityMatrix::pure(ket)?;
        Ok(Self {
            label: label.into(),
            matrix: rho.as_hermitian(),
        })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn matrix(&self) -> &CMatrix {
        self.matrix.matrix()
    }

    pub fn hermitian(&self) -> &HermitianMatrix {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }
}

/// Single-photon polarization kets. `R` is `(|H> + i|V>)/√2`, the convention
/// under which `<R|ρ(t)|R> = ½(1 − 2 t₁t₄/‖t‖²)`.
pub fn polarization_ket(label: char) -> Option<[Complex64; 2]> {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let re = |x: f64| Complex64::new(x, 0.0);
    let im = |x: f64| Complex64::new(0.0, x);
    Some(match label {
        'H' => [re(1.0), re(0.0)],
        'V' => [re(0.0), re(1.0)],
        'D' => [re(r), re(r)],
        'A' => [re(r), re(-r)],
        'R' => [re(r), im(r)],
        'L' => [re(r), im(-r)],
        _ => return None,
    })
}

/// Product projector for a label such as `"HV"`, one polarization letter per qubit.
pub fn polarization_projector(label: &str) -> Result<MeasurementOperator> {
    let mut ket = vec![Complex64::new(1.0, 0.0)];
    for c in label.chars() {
        let single = polarization_ket(c)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown polarization {c:?}")))?;
        ket = ket
            .iter()
            .flat_map(|a| single.iter().map(move |b| a * b))
            .collect();
    }
    if label.is_empty() {
        return Err(Error::InvalidArgument("empty projector label".into()));
    }
    MeasurementOperator::projector(label, &ket)
}

/// Projectors onto `|H>`, `|V>`, `|D>`, `|R>`, in that order.
pub fn polarization_projectors() -> Vec<MeasurementOperator> {
    "HVDR"
        .chars()
        .map(|c| polarization_projector(&c.to_string()).expect("known label"))
        .collect()
}

/// All Kronecker products of one operator from each set, lexicographic in the
/// set indices, with labels concatenated.
pub fn tensor_povm(sets: &[Vec<MeasurementOperator>]) -> Result<Vec<MeasurementOperator>> {
    tensor_povm_with_cap(sets, 1 << DEFAULT_MAX_QUBITS)
}

pub fn tensor_povm_with_cap(
    sets: &[Vec<MeasurementOperator>],
    max_dim: usize,
) -> Result<Vec<MeasurementOperator>> {
    if sets.is_empty() || sets.iter().any(Vec::is_empty) {
        return Err(Error::InvalidArgument("every operator set must be nonempty".into()));
    }
    let dim: usize = sets.iter().map(|s| s[0].dim()).product();
    if dim > max_dim {
        return Err(Error::Capacity {
            requested: dim,
            max: max_dim,
        });
    }
    let mut out = vec![MeasurementOperator {
        label: String::new(),
        matrix: HermitianMatrix::from_unchecked(CMatrix::identity(1, 1)),
    }];
    for set in sets {
        let mut next = Vec::with_capacity(out.len() * set.len());
        for a in &out {
            for b in set {
                next.push(MeasurementOperator {
                    label: format!("{}{}", a.label, b.label),
                    matrix: HermitianMatrix::from_unchecked(a.matrix().kronecker(b.matrix())),
                });
            }
        }
        out = next;
    }
    Ok(out)
}

/// `{H,V,D,R} ⊗ {H,V,D,R}` in lexicographic order.
pub fn pol4x4() -> Vec<MeasurementOperator> {
    let single = polarization_projectors();
    tensor_povm(&[single.clone(), single]).expect("two qubits are within capacity")
}

/// Label order of the conventional sixteen-setting two-photon polarization
/// tomography sequence.
pub const TOMO16_LABELS: [&str; 16] = [
    "HH", "HV", "VV", "VH", "RH", "RV", "DV", "DH", "DR", "DD", "RD", "HD", "VD", "VL", "HL", "RL",
];

pub fn tomo16() -> Vec<MeasurementOperator> {
    TOMO16_LABELS
        .iter()
        .map(|l| polarization_projector(l).expect("known labels"))
        .collect()
}

/// Names accepted by [`preset_povm`].
pub const POVM_PRESETS: [&str; 3] = ["pol4", "pol4x4", "tomo16"];

pub fn preset_povm(name: &str) -> Result<Vec<MeasurementOperator>> {
    match name {
        "pol4" => Ok(polarization_projectors()),
        "pol4x4" => Ok(pol4x4()),
        "tomo16" => Ok(tomo16()),
        other => Err(Error::InvalidArgument(format!("unknown POVM preset {other:?}"))),
    }
}

/// Complete projective bases contained in a preset, used by the per-basis-group
/// normalization policy.
pub fn preset_basis_groups(name: &str) -> Result<Vec<Vec<usize>>> {
    match name {
        "pol4" => Ok(vec![vec![0, 1]]),
        "pol4x4" => Ok(vec![vec![0, 1, 4, 5]]),
        "tomo16" => Ok(vec![vec![0, 1, 2, 3]]),
        other => Err(Error::InvalidArgument(format!("unknown POVM preset {other:?}"))),
    }
}

/// `tr(O ρ)`.
pub fn born_probability(op: &MeasurementOperator, rho: &DensityMatrix) -> Result<f64> {
    if op.dim() != rho.dim() {
        return Err(Error::Dimension {
            expected: rho.dim(),
            actual: op.dim(),
        });
    }
    let p = trace_product(op.matrix(), rho.matrix());
    if p.im.abs() >= 1e-10 {
        return Err(Error::Numerical(format!(
            "Born probability has imaginary part {:.3e}",
            p.im
        )));
    }
    Ok(p.re)
}

/// How raw counts are turned into frequencies.
#[derive(Debug, Clone, PartialEq)]
pub enum Normalization {
    /// One constant `N` for every outcome.
    Constant(f64),
    /// Each listed group is a complete projective basis whose count total
    /// estimates `N` for its members; outcomes outside every group use the
    /// mean of the group totals.
    PerBasisGroup(Vec<Vec<usize>>),
}

/// Operators paired with their raw counts.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementRecord {
    pub operators: Vec<MeasurementOperator>,
    pub counts: Vec<u64>,
    pub normalization: Normalization,
    pub seed: Option<u64>,
}

impl MeasurementRecord {
    pub fn new(
        operators: Vec<MeasurementOperator>,
        counts: Vec<u64>,
        normalization: Normalization,
    ) -> Result<Self> {
        if operators.is_empty() {
            return Err(Error::InvalidArgument("record has no operators".into()));
        }
        if operators.len() != counts.len() {
            return Err(Error::Dimension {
                expected: operators.len(),
                actual: counts.len(),
            });
        }
        let d = operators[0].dim();
        if let Some(bad) = operators.iter().find(|o| o.dim() != d) {
            return Err(Error::Dimension {
                expected: d,
                actual: bad.dim(),
            });
        }
        match &normalization {
            Normalization::Constant(n) => {
                if !(n.is_finite() && *n > 0.0) {
                    return Err(Error::InvalidArgument(format!(
                        "normalization must be positive, got {n}"
                    )));
                }
            }
            Normalization::PerBasisGroup(groups) => {
                validate_groups(&operators, &counts, groups)?;
            }
        }
        Ok(Self {
            operators,
            counts,
            normalization,
            seed: None,
        })
    }

    pub fn dim(&self) -> usize {
        self.operators[0].dim()
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// Normalization constant applied to each outcome.
    pub fn normalizers(&self) -> Vec<f64> {
        match &self.normalization {
            Normalization::Constant(n) => vec![*n; self.counts.len()],
            Normalization::PerBasisGroup(groups) => {
                let totals: Vec<f64> = groups
                    .iter()
                    .map(|g| g.iter().map(|&i| self.counts[i] as f64).sum())
                    .collect();
                let mean = totals.iter().sum::<f64>() / totals.len() as f64;
                let mut out = vec![mean; self.counts.len()];
                for (g, total) in groups.iter().zip(&totals) {
                    for &i in g {
                        out[i] = *total;
                    }
                }
                out
            }
        }
    }
}

fn validate_groups(
    operators: &[MeasurementOperator],
    counts: &[u64],
    groups: &[Vec<usize>],
) -> Result<()> {
    if groups.is_empty() {
        return Err(Error::InvalidArgument(
            "per-basis-group normalization needs at least one group".into(),
        ));
    }
    let d = operators[0].dim();
    let mut seen = vec![false; operators.len()];
    for g in groups {
        let mut sum = CMatrix::zeros(d, d);
        let mut total = 0u64;
        for &i in g {
            if i >= operators.len() || seen[i] {
                return Err(Error::InvalidArgument(format!(
                    "basis group index {i} is out of range or repeated"
                )));
            }
            seen[i] = true;
            sum += operators[i].matrix();
            total += counts[i];
        }
        let defect = (sum - CMatrix::identity(d, d)).norm();
        if defect > 1e-10 {
            return Err(Error::InvalidArgument(format!(
                "basis group {g:?} does not sum to the identity (defect {defect:.3e})"
            )));
        }
        if total == 0 {
            return Err(Error::InvalidArgument(format!(
                "basis group {g:?} has zero total counts"
            )));
        }
    }
    Ok(())
}

/// Normalized frequencies `f_μ = n_μ / N`.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyVector(pub Vec<f64>);

impl FrequencyVector {
    pub fn new(freqs: Vec<f64>) -> Result<Self> {
        if let Some(bad) = freqs.iter().find(|f| !(f.is_finite() && **f >= 0.0)) {
            return Err(Error::InvalidArgument(format!("frequency {bad} is negative or not finite")));
        }
        Ok(Self(freqs))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

pub fn normalize(record: &MeasurementRecord) -> FrequencyVector {
    FrequencyVector(
        record
            .counts
            .iter()
            .zip(record.normalizers())
            .map(|(&n, norm)| n as f64 / norm)
            .collect(),
    )
}

/// Noise model for [`simulate_counts`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Noise {
    /// `n_μ = round(N p_μ)`.
    None,
    /// `n_μ = max(0, round(Normal(N p_μ, √(N p_μ))))`.
    Gaussian,
    /// `n_μ ~ Poisson(N p_μ)`.
    Poisson,
}

impl std::str::FromStr for Noise {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Noise::None),
            "gaussian" => Ok(Noise::Gaussian),
            "poisson" => Ok(Noise::Poisson),
            other => Err(Error::InvalidArgument(format!("unknown noise model {other:?}"))),
        }
    }
}

/// Synthetic counts with `n_per_setting` trials per operator. Deterministic
/// in `seed`.
pub fn simulate_counts(
    rho: &DensityMatrix,
    povm: &[MeasurementOperator],
    n_per_setting: u64,
    noise: Noise,
    seed: u64,
) -> Result<MeasurementRecord> {
    if n_per_setting == 0 {
        return Err(Error::InvalidArgument("n_per_setting must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = n_per_setting as f64;
    let mut counts = Vec::with_capacity(povm.len());
    for op in povm {
        let mean = n * born_probability(op, rho)?.max(0.0);
        let draw = match noise {
            Noise::None => mean.round(),
            Noise::Gaussian if mean > 0.0 => Normal::new(mean, mean.sqrt())
                .map_err(|e| Error::Numerical(e.to_string()))?
                .sample(&mut rng)
                .round()
                .max(0.0),
            Noise::Poisson if mean > 0.0 => Poisson::new(mean)
                .map_err(|e| Error::Numerical(e.to_string()))?
                .sample(&mut rng),
            _ => 0.0,
        };
        counts.push(draw as u64);
    }
    let mut record = MeasurementRecord::new(povm.to_vec(), counts, Normalization::Constant(n))?;
    record.seed = Some(seed);
    Ok(record)
}
