//! Fixed problems shared by the benchmarks.

use qst_core::measurement::{normalize, pol4x4, polarization_projectors, simulate_counts, tomo16};
use qst_core::param::random_state;
use qst_core::{FrequencyVector, MeasurementRecord, Noise, Normalization, ObjectiveModel, ParamVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const EXAMPLE1_START: [f64; 4] = [-0.0001, 0.999, 0.001, 0.999];

/// Single-qubit record with one nearly unobserved outcome.
pub fn example1() -> ObjectiveModel {
    ObjectiveModel::gaussian(polarization_projectors(), FrequencyVector(vec![0.9990, 0.0002, 0.4995, 0.4994]))
        .expect("valid model")
}

/// Two-qubit record over the 16 tomography projectors.
pub fn example2() -> ObjectiveModel {
    let counts = vec![3043, 32, 2159, 19, 1546, 1283, 938, 1595, 1556, 122, 1271, 1621, 1070, 1048, 1611, 114];
    let record = MeasurementRecord::new(tomo16(), counts, Normalization::PerBasisGroup(vec![vec![0, 1, 2, 3]]))
        .expect("valid record");
    ObjectiveModel::gaussian(record.operators.clone(), normalize(&record)).expect("valid model")
}

/// Noisy two-qubit data for a random state.
pub fn random_two_qubit(seed: u64) -> ObjectiveModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let povm = pol4x4();
    let rec = simulate_counts(&random_state(4, &mut rng), &povm, 10_000, Noise::Gaussian, seed).expect("simulation");
    ObjectiveModel::gaussian(povm, normalize(&rec)).expect("valid model")
}

pub fn example1_start() -> ParamVector {
    ParamVector::new(EXAMPLE1_START.to_vec()).expect("valid start")
}
