//! End-to-end acceptance checks. Runs as a plain binary so every criterion
//! prints exactly one PASS/FAIL line regardless of capture settings.

use std::panic::{self, AssertUnwindSafe};
use std::time::{Duration, Instant};

use num_complex::Complex64;
use qst_core::hermitian::{eig_hermitian, frobenius_distance, pauli_basis, purity, CMatrix, DensityMatrix, PSD_TOL};
use qst_core::inversion::linear_invert;
use qst_core::likelihood::{value_and_gradient, LikelihoodKind, ObjectiveModel};
use qst_core::measurement::{
    normalize, pol4x4, polarization_projectors, simulate_counts, tomo16, FrequencyVector, MeasurementOperator,
    MeasurementRecord, Noise, Normalization,
};
use qst_core::optim::{levenberg_marquardt, nelder_mead, Solver, StopConfig, StopReason};
use qst_core::param::{inverse_param, random_state, rho_of_t, sample_interior, ParamVector, SignPattern};
use qst_core::verify::{equivalence_check, gradient_check, multistart, MultistartConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const EXAMPLE1_FREQS: [f64; 4] = [0.9990, 0.0002, 0.4995, 0.4994];
const EXAMPLE1_START: [f64; 4] = [-0.0001, 0.999, 0.001, 0.999];
const EXAMPLE2_COUNTS: [u64; 16] = [3043, 32, 2159, 19, 1546, 1283, 938, 1595, 1556, 122, 1271, 1621, 1070, 1048, 1611, 114];
/// Published four-decimal magnitude of the nonzero parameters in each sector.
#[allow(clippy::approx_constant)]
const SECTOR_MAGNITUDE: f64 = 0.7071;
const EXAMPLE3_FREQS: [f64; 4] = [0.5, 0.5, 0.5, 1.0];

type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn pv(t: &[f64]) -> ParamVector {
    ParamVector::new(t.to_vec()).unwrap()
}

fn gaussian(povm: Vec<MeasurementOperator>, f: &[f64]) -> ObjectiveModel {
    ObjectiveModel::gaussian(povm, FrequencyVector(f.to_vec())).unwrap()
}

fn example1() -> ObjectiveModel {
    gaussian(polarization_projectors(), &EXAMPLE1_FREQS)
}

fn max_entry_distance(a: &CMatrix, b: &CMatrix) -> f64 {
    (a - b).iter().fold(0.0, |m, z| m.max(z.norm()))
}

fn c1_example1_reconstruction() -> Outcome {
    let start = Instant::now();
    let res = levenberg_marquardt(&example1(), &pv(&EXAMPLE1_START), &StopConfig::for_params(4)).unwrap();
    let elapsed = start.elapsed();
    let expected = CMatrix::from_row_slice(
        2,
        2,
        &[
            Complex64::new(0.9998, 0.0),
            Complex64::new(-0.0005, 0.0006),
            Complex64::new(-0.0005, -0.0006),
            Complex64::new(0.0002, 0.0),
        ],
    );
    let dev = max_entry_distance(res.rho_final.matrix(), &expected);
    let pass = dev < 2e-3 && res.f_final <= 1e-6 && res.grad_norm < 1e-6 && elapsed < Duration::from_secs(1);
    outcome(
        pass,
        format!(
            "max entry deviation {dev:.2e}, F = {:.3e}, grad = {:.3e}, {:?}, {} ms",
            res.f_final,
            res.grad_norm,
            res.reason,
            elapsed.as_millis()
        ),
    )
}

fn c2_sign_gauge_equivalence() -> Outcome {
    let start = Instant::now();
    let model = example1();
    let cfg = StopConfig::for_params(4);
    let a = levenberg_marquardt(&model, &pv(&[1.0, 0.001, 0.0, 0.0]), &cfg).unwrap();
    let b = levenberg_marquardt(&model, &pv(&[-1.0, -0.001, 0.0, 0.0]), &cfg).unwrap();
    let elapsed = start.elapsed();
    let dt = a.t_final.distance(&b.t_final);
    let drho = frobenius_distance(a.rho_final.matrix(), b.rho_final.matrix());
    outcome(
        dt > 1e-2 && drho < 1e-3 && elapsed < Duration::from_secs(1),
        format!("|t - t'| = {dt:.3}, rho distance {drho:.2e}, {} ms", elapsed.as_millis()),
    )
}

fn c3_stagnation_contrast() -> Outcome {
    let model = example1();
    let t0 = pv(&EXAMPLE1_START);
    let mut nm_cfg = StopConfig::for_params(4);
    nm_cfg.step_tol = 1e-8;
    nm_cfg.fun_tol = 1e-8;
    let nm = nelder_mead(&model, &t0, &nm_cfg).unwrap();
    let lm = levenberg_marquardt(&model, &t0, &StopConfig::for_params(4)).unwrap();
    let nm_ok = matches!(nm.reason, StopReason::StepStagnation | StopReason::MaxFunctionEvals) && nm.grad_norm > 1e-4;
    outcome(
        nm_ok && lm.grad_norm < 1e-6,
        format!(
            "NM {:?} after {} evals, F = {:.4}, grad = {:.2e}; LM grad = {:.2e}",
            nm.reason, nm.fevals, nm.f_final, nm.grad_norm, lm.grad_norm
        ),
    )
}

fn c4_example2_contrast() -> Outcome {
    let record = MeasurementRecord::new(
        tomo16(),
        EXAMPLE2_COUNTS.to_vec(),
        Normalization::PerBasisGroup(vec![vec![0, 1, 2, 3]]),
    )
    .unwrap();
    let model = ObjectiveModel::gaussian(record.operators.clone(), normalize(&record)).unwrap();
    let t0 = ParamVector::maximally_mixed(4);
    let cfg = StopConfig::for_params(16);
    let lm = levenberg_marquardt(&model, &t0, &cfg).unwrap();
    let nm = nelder_mead(&model, &t0, &cfg).unwrap();
    let (p_lm, p_nm) = (purity(&lm.rho_final), purity(&nm.rho_final));
    let pass = (0.85..=0.95).contains(&p_lm)
        && p_lm - p_nm > 0.2
        && nm.reason == StopReason::MaxFunctionEvals
        && nm.fevals == 6400;
    outcome(
        pass,
        format!(
            "purity LM {p_lm:.4} ({:?}), NM {p_nm:.4} ({:?} at {} evals)",
            lm.reason, nm.reason, nm.fevals
        ),
    )
}

fn c5_table_one() -> Outcome {
    let model = gaussian(polarization_projectors(), &EXAMPLE3_FREQS);
    let mut stop = StopConfig::with_grad_tol(4, 1e-9);
    stop.step_tol = 1e-12;
    stop.fun_tol = 1e-12;
    let mut pass = true;
    let mut finals = Vec::new();
    let mut notes = Vec::new();
    for (k, pattern) in SignPattern::all(2).into_iter().enumerate() {
        let cfg = MultistartConfig::new(23, 1000 + k as u64, Solver::ConstrainedSign(pattern.clone()), stop.clone())
            .with_screen_tol(1e-6);
        let rep = match multistart(&model, &cfg) {
            Ok(r) => r,
            Err(e) => return outcome(false, format!("pattern {}: {e}", pattern.label())),
        };
        let sol = &rep.solutions[0];
        let t = sol.t_final.as_slice();
        let (s1, s2) = (pattern.sign(0), pattern.sign(1));
        let layout = t[0].signum() == s1 && t[1].signum() == s2 && t[3].signum() == -s1;
        let values = (t[0].abs() - SECTOR_MAGNITUDE).abs() < 5e-3
            && (t[3].abs() - SECTOR_MAGNITUDE).abs() < 5e-3
            && t[1].abs() < 5e-3
            && t[2].abs() < 5e-3;
        pass &= rep.distinct_t_count == 1 && layout && values;
        notes.push(format!(
            "{}: {} list member(s), t = ({:.4}, {:.4}, {:.4}, {:.4})",
            pattern.label(),
            rep.distinct_t_count,
            t[0],
            t[1],
            t[2],
            t[3]
        ));
        finals.push(sol.clone());
    }
    let eq = equivalence_check(&finals, 1e-3, f64::INFINITY);
    pass &= eq.equivalent;
    outcome(pass, format!("{}; max rho distance {:.2e}", notes.join("; "), eq.max_rho_distance))
}

fn corollary_suite(dim: usize, povm: &[MeasurementOperator], targets: usize, seed: u64) -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut worst_rho, mut worst_f) = (0.0f64, 0.0f64);
    let (mut retained, mut total) = (0, 0);
    for k in 0..targets {
        let rho = random_state(dim, &mut rng);
        let rec = simulate_counts(&rho, povm, 100_000, Noise::Gaussian, seed * 1000 + k as u64).unwrap();
        let model = ObjectiveModel::gaussian(povm.to_vec(), normalize(&rec)).unwrap();
        let cfg = MultistartConfig::new(50, seed + 7 * k as u64, Solver::LevenbergMarquardt, StopConfig::for_params(dim * dim));
        let rep = match multistart(&model, &cfg) {
            Ok(r) => r,
            Err(e) => return (false, format!("d={dim} target {k}: {e}")),
        };
        worst_rho = worst_rho.max(rep.max_pairwise_rho_distance);
        worst_f = worst_f.max(rep.max_f_spread);
        retained += rep.retained_count;
        total += rep.retained_count + rep.discarded_count;
    }
    (
        worst_rho <= 1e-4 && worst_f <= 1e-8,
        format!("d={dim}: {retained}/{total} runs retained, max rho distance {worst_rho:.2e}, max F spread {worst_f:.2e}"),
    )
}

fn c6_corollary_suite() -> Outcome {
    let start = Instant::now();
    let (p2, n2) = corollary_suite(2, &polarization_projectors(), 20, 61);
    let (p4, n4) = corollary_suite(4, &pol4x4(), 5, 67);
    let elapsed = start.elapsed();
    outcome(
        p2 && p4 && elapsed < Duration::from_secs(300),
        format!("{n2}; {n4}; {:.1} s", elapsed.as_secs_f64()),
    )
}

fn noisy_model(kind: LikelihoodKind, dim: usize, povm: Vec<MeasurementOperator>, seed: u64) -> ObjectiveModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rho = random_state(dim, &mut rng);
    let rec = simulate_counts(&rho, &povm, 1000, Noise::Gaussian, seed).unwrap();
    ObjectiveModel::new(kind, povm, normalize(&rec)).unwrap()
}

fn c7_gradient_correctness() -> Outcome {
    let mut pass = true;
    let mut notes = Vec::new();
    for (dim, povm) in [(2, polarization_projectors()), (4, pol4x4())] {
        for kind in [LikelihoodKind::Gaussian, LikelihoodKind::Multinomial] {
            let model = noisy_model(kind, dim, povm.clone(), 70 + dim as u64);
            let err = gradient_check(&model, 100, 71).unwrap();
            pass &= err < 1e-6;
            notes.push(format!("d={dim} {kind:?} {err:.1e}"));
        }
    }
    outcome(pass, format!("worst relative error: {}", notes.join(", ")))
}

fn c8_homogeneity() -> Outcome {
    let mut worst_f = 0.0f64;
    let mut worst_g = 0.0f64;
    let mut rng = ChaCha8Rng::seed_from_u64(80);
    for (dim, povm) in [(2, polarization_projectors()), (4, pol4x4())] {
        for kind in [LikelihoodKind::Gaussian, LikelihoodKind::Multinomial] {
            let model = noisy_model(kind, dim, povm.clone(), 81);
            for _ in 0..50 {
                let t = sample_interior(dim, &mut rng);
                let base = value_and_gradient(&t, &model).unwrap();
                let g = base.grad_norm();
                for c in [-2.0, 0.5, 10.0] {
                    let scaled = value_and_gradient(&t.scaled(c).unwrap(), &model).unwrap();
                    worst_f = worst_f.max((scaled.value - base.value).abs());
                    worst_g = worst_g.max((scaled.grad_norm() * f64::abs(c) - g).abs() / g);
                }
            }
        }
    }
    outcome(
        worst_f <= 1e-12 && worst_g <= 1e-10,
        format!("max |F(ct) - F(t)| = {worst_f:.1e}, max relative gradient-scaling error = {worst_g:.1e}"),
    )
}

fn c9_parameterization() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(90);
    let (mut asym, mut trace_err, mut min_eig, mut roundtrip) = (0.0f64, 0.0f64, f64::INFINITY, 0.0f64);
    let (mut failures, mut boundary) = (0, 0);
    for dim in [2usize, 4] {
        let patterns = SignPattern::all(dim);
        for _ in 0..10_000 {
            let t: Vec<f64> = (0..dim * dim).map(|_| rng.random_range(-1.0..=1.0)).collect();
            let rho = rho_of_t(&pv(&t)).unwrap();
            let m = rho.matrix();
            asym = asym.max((m - m.adjoint()).iter().fold(0.0, |a, z| a.max(z.norm())));
            trace_err = trace_err.max((m.trace().re - 1.0).abs());
            let lowest = eig_hermitian(&rho.as_hermitian()).unwrap()[0];
            min_eig = min_eig.min(lowest);
            if lowest <= PSD_TOL {
                boundary += 1;
                continue;
            }
            for p in &patterns {
                match inverse_param(&rho, p, 1.0).and_then(|s| rho_of_t(&s)) {
                    Ok(back) => roundtrip = roundtrip.max(max_entry_distance(back.matrix(), m)),
                    Err(_) => failures += 1,
                }
            }
        }
    }
    outcome(
        asym <= 1e-12 && trace_err <= 1e-12 && min_eig >= -1e-10 && roundtrip <= 1e-10 && failures == 0,
        format!(
            "max asymmetry {asym:.1e}, max trace error {trace_err:.1e}, min eigenvalue {min_eig:.1e}, \
             signed-Cholesky roundtrip {roundtrip:.1e} ({failures} failures, {boundary} boundary draws skipped)"
        ),
    )
}

fn c10_linear_inversion() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(100);
    let n = 1000u64;
    let bound = 1.0 / (2.0 * n as f64) + 1e-10;
    let mut worst_per_entry = 0.0f64;
    let mut worst_elementwise = 0.0f64;
    for (dim, povm) in [(2usize, polarization_projectors()), (4, pol4x4())] {
        let basis = pauli_basis(dim.trailing_zeros() as usize).unwrap();
        for k in 0..100 {
            let rho = random_state(dim, &mut rng);
            let rec = simulate_counts(&rho, &povm, n, Noise::None, k).unwrap();
            let rep = linear_invert(&normalize(&rec), &povm, &basis).unwrap();
            let diff = rep.matrix.matrix() - rho.matrix();
            worst_per_entry = worst_per_entry.max(diff.norm() / (dim * dim) as f64);
            worst_elementwise = worst_elementwise.max(diff.iter().fold(0.0, |a, z| a.max(z.norm())));
        }
    }

    let ket = [Complex64::new(0.8, 0.0), Complex64::new(0.36, 0.48)];
    let pure = DensityMatrix::pure(&ket).unwrap();
    let povm = polarization_projectors();
    let basis = pauli_basis(1).unwrap();
    let unphysical = (0..1000u64)
        .filter(|&seed| {
            let rec = simulate_counts(&pure, &povm, 100, Noise::Gaussian, seed).unwrap();
            !linear_invert(&normalize(&rec), &povm, &basis).unwrap().is_physical
        })
        .count();
    outcome(
        worst_per_entry <= bound && unphysical >= 1,
        format!(
            "noiseless N={n}: Frobenius per entry {worst_per_entry:.2e} (bound {bound:.2e}), worst single entry {:.2} x 1/N; \
             {unphysical}/1000 unphysical inversions at N=100",
            worst_elementwise * n as f64
        ),
    )
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("single-qubit LM reconstruction", c1_example1_reconstruction),
        ("sign-gauge equivalence", c2_sign_gauge_equivalence),
        ("simplex stagnation vs LM stationarity", c3_stagnation_contrast),
        ("two-qubit purity contrast", c4_example2_contrast),
        ("one solution per sign sector", c5_table_one),
        ("all local minimizers agree", c6_corollary_suite),
        ("analytic gradients", c7_gradient_correctness),
        ("homogeneity of F", c8_homogeneity),
        ("parameterization invariants", c9_parameterization),
        ("linear inversion", c10_linear_inversion),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let result = panic::catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            outcome(false, format!("panicked: {msg}"))
        });
        if !result.pass {
            failed += 1;
        }
        println!(
            "criterion {:>2} [{}] {name}: {}",
            i + 1,
            if result.pass { "PASS" } else { "FAIL" },
            result.detail
        );
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
