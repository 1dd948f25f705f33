//! Linear-inversion reconstruction: equate Born probabilities with observed
//! frequencies and solve for the Stokes coefficients.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::hermitian::{eig_hermitian, stokes_reconstruct, trace_product, HermitianMatrix, StokesVector, PSD_TOL};
use crate::measurement::{FrequencyVector, MeasurementOperator};

/// Singular values below this fraction of the largest count as zero.
pub const RANK_RTOL: f64 = 1e-10;
/// Allowed deviation of the recovered trace from one for a physical result.
pub const TRACE_TOL: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct InversionReport {
    pub matrix: HermitianMatrix,
    pub stokes: StokesVector,
    pub is_physical: bool,
    pub min_eigenvalue: f64,
    pub trace: f64,
    pub condition_estimate: f64,
}

/// `B[ν][μ] = tr(O_μ Γ_ν)`, shape `d² × m`.
pub fn build_b_matrix(povm: &[MeasurementOperator], basis: &[HermitianMatrix]) -> Result<DMatrix<f64>> {
    let ops: Vec<&HermitianMatrix> = povm.iter().map(MeasurementOperator::hermitian).collect();
    build_b_matrix_from(&ops, basis)
}

/// [`build_b_matrix`] for arbitrary Hermitian operators (not necessarily PSD).
pub fn build_b_matrix_from(ops: &[&HermitianMatrix], basis: &[HermitianMatrix]) -> Result<DMatrix<f64>> {
    let d = basis.first().map(HermitianMatrix::dim).unwrap_or(0);
    let mut b = DMatrix::zeros(basis.len(), ops.len());
    for (mu, op) in ops.iter().enumerate() {
        if op.dim() != d {
            return Err(Error::Dimension {
                expected: d,
                actual: op.dim(),
            });
        }
        for (nu, g) in basis.iter().enumerate() {
            if g.dim() != d {
                return Err(Error::Dimension {
                    expected: d,
                    actual: g.dim(),
                });
            }
            let v = trace_product(op.matrix(), g.matrix());
            if v.im.abs() >= 1e-10 {
                return Err(Error::Numerical(format!(
                    "tr(O_{mu} G_{nu}) has imaginary part {:.3e}",
                    v.im
                )));
            }
            b[(nu, mu)] = v.re;
        }
    }
    Ok(b)
}

/// Numerical rank with the [`RANK_RTOL`] threshold.
pub fn numerical_rank(m: &DMatrix<f64>) -> usize {
    let sv = m.clone().singular_values();
    let max = sv.iter().fold(0.0f64, |a, &b| a.max(b));
    sv.iter().filter(|&&s| s > RANK_RTOL * max).count()
}

/// Solves `Σ_ν S_ν tr(O_μ Γ_ν) = f_μ` (exactly when the system is square,
/// in the least-squares sense when over-determined).
pub fn linear_invert(
    freqs: &FrequencyVector,
    povm: &[MeasurementOperator],
    basis: &[HermitianMatrix],
) -> Result<InversionReport> {
    if freqs.len() != povm.len() {
        return Err(Error::Dimension {
            expected: povm.len(),
            actual: freqs.len(),
        });
    }
    let b = build_b_matrix(povm, basis)?;
    let required = basis.len();
    // rows indexed by outcome μ, columns by basis element ν
    let system = b.transpose();
    let svd = system.svd(true, true);
    let sv = &svd.singular_values;
    let max = sv.iter().fold(0.0f64, |a, &s| a.max(s));
    let rank = sv.iter().filter(|&&s| s > RANK_RTOL * max).count();
    if rank < required {
        return Err(Error::NotInformationallyComplete { rank, required });
    }
    let u = svd.u.as_ref().expect("requested U");
    let v_t = svd.v_t.as_ref().expect("requested Vᵀ");
    let f = DVector::from_column_slice(freqs.as_slice());
    let ut_f = u.transpose() * f;
    let scaled = DVector::from_iterator(sv.len(), ut_f.iter().zip(sv.iter()).map(|(x, s)| x / s));
    let s = v_t.transpose() * scaled;
    let min_sv = sv.iter().fold(f64::INFINITY, |a, &s| a.min(s));

    let stokes = StokesVector(s.iter().copied().collect());
    let matrix = stokes_reconstruct(&stokes, basis)?;
    let min_eigenvalue = eig_hermitian(&matrix)?[0];
    let trace = matrix.trace();
    Ok(InversionReport {
        is_physical: min_eigenvalue >= -PSD_TOL && (trace - 1.0).abs() <= TRACE_TOL,
        matrix,
        stokes,
        min_eigenvalue,
        trace,
        condition_estimate: max / min_sv,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hermitian::{frobenius_distance, max_asymmetry, pauli_basis, DensityMatrix};
    use crate::measurement::polarization_projectors;
    use crate::param::random_state;
    use crate::measurement::born_probability;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn polarization_set_is_complete() {
        let b = build_b_matrix(&polarization_projectors(), &pauli_basis(1).unwrap()).unwrap();
        assert_eq!(b.shape(), (4, 4));
        assert_eq!(numerical_rank(&b), 4);
    }

    #[test]
    fn measuring_the_basis_gives_identity() {
        let basis = pauli_basis(2).unwrap();
        let ops: Vec<&HermitianMatrix> = basis.iter().collect();
        let b = build_b_matrix_from(&ops, &basis).unwrap();
        assert!((b - DMatrix::<f64>::identity(16, 16)).norm() < 1e-14);
    }

    #[test]
    fn duplicate_operators_are_rank_deficient() {
        let mut povm = polarization_projectors();
        povm[3] = povm[2].clone();
        let basis = pauli_basis(1).unwrap();
        let b = build_b_matrix(&povm, &basis).unwrap();
        assert!(numerical_rank(&b) < 4);
        let err = linear_invert(&FrequencyVector(vec![0.25; 4]), &povm, &basis).unwrap_err();
        assert!(matches!(err, Error::NotInformationallyComplete { rank: 3, required: 4 }));
    }

    #[test]
    fn exact_data_inverts_exactly() {
        let basis = pauli_basis(1).unwrap();
        let rep = linear_invert(&FrequencyVector(vec![1.0, 0.0, 0.5, 0.5]), &polarization_projectors(), &basis).unwrap();
        let h = DensityMatrix::diagonal(&[1.0, 0.0]).unwrap();
        assert!(frobenius_distance(rep.matrix.matrix(), h.matrix()) < 1e-12);
        assert!(rep.is_physical);
    }

    #[test]
    fn noisy_single_qubit_frequencies_are_flagged() {
        let basis = pauli_basis(1).unwrap();
        let f = FrequencyVector(vec![0.9990, 0.0002, 0.4995, 0.4994]);
        let rep = linear_invert(&f, &polarization_projectors(), &basis).unwrap();
        assert_abs_diff_eq!(rep.trace, 0.9992, epsilon = 1e-12);
        assert!(!rep.is_physical);
        assert!(max_asymmetry(rep.matrix.matrix()) < 1e-12);
        // the independent closed form for this set
        let m = rep.matrix.matrix();
        assert_abs_diff_eq!(m[(0, 0)].re, 0.9990, epsilon = 1e-12);
        assert_abs_diff_eq!(m[(0, 1)].re, 0.4995 - 0.9992 / 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(m[(0, 1)].im, -(0.4994 - 0.9992 / 2.0), epsilon = 1e-12);
    }

    #[test]
    fn noiseless_roundtrip_random_states() {
        let basis = pauli_basis(1).unwrap();
        let povm = polarization_projectors();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            let rho = random_state(2, &mut rng);
            let f: Vec<f64> = povm.iter().map(|o| born_probability(o, &rho).unwrap()).collect();
            let rep = linear_invert(&FrequencyVector(f), &povm, &basis).unwrap();
            assert!(frobenius_distance(rep.matrix.matrix(), rho.matrix()) < 1e-10);
        }
    }

    #[test]
    fn frequency_length_mismatch() {
        let basis = pauli_basis(1).unwrap();
        assert!(matches!(
            linear_invert(&FrequencyVector(vec![0.5; 3]), &polarization_projectors(), &basis),
            Err(Error::Dimension { .. })
        ));
    }
}
