//! Damped Levenberg–Marquardt on the residual/Jacobian pair.

use nalgebra::{DMatrix, DVector};

use super::sphere::{project_in_place, projected_gradient_norm, restrict_to_free};
use super::{all_finite, check_start, into_result, norm_inf, LeastSquares, Minimum, OptimizationResult, StopConfig, StopReason, TraceEntry};
use crate::error::{Error, Result};
use crate::likelihood::{LikelihoodKind, ObjectiveModel};
use crate::param::{ParamVector, SignPattern};

/// Initial damping relative to the largest diagonal entry of `JᵀJ`.
pub(crate) const LAMBDA_INIT: f64 = 1e-3;
const GOOD_RATIO: f64 = 0.75;
const ACCEPT_RATIO: f64 = 1e-4;
const LAMBDA_MAX: f64 = 1e300;
const LAMBDA_FLOOR: f64 = 1e-14;

/// Levenberg–Marquardt for the Gaussian objective.
pub fn levenberg_marquardt(model: &ObjectiveModel, t0: &ParamVector, cfg: &StopConfig) -> Result<OptimizationResult> {
    check_start(model, t0)?;
    if model.kind() != LikelihoodKind::Gaussian {
        return Err(Error::InvalidArgument(
            "Levenberg-Marquardt needs the Gaussian likelihood".into(),
        ));
    }
    let min = minimize(model, t0.as_slice(), cfg)?;
    into_result(model, min)
}

/// Levenberg–Marquardt for any least-squares problem.
pub fn minimize<P: LeastSquares + ?Sized>(problem: &P, x0: &[f64], cfg: &StopConfig) -> Result<Minimum> {
    lm_core(problem, x0.to_vec(), cfg, None)
}

struct State {
    x: Vec<f64>,
    j: DMatrix<f64>,
    f: f64,
    g: DVector<f64>,
}

impl State {
    fn eval<P: LeastSquares + ?Sized>(problem: &P, x: Vec<f64>) -> Result<Option<Self>> {
        let (r, j) = problem.residuals_and_jacobian(&x)?;
        if !all_finite(r.as_slice()) || !all_finite(j.as_slice()) {
            return Ok(None);
        }
        let f = 0.5 * r.norm_squared();
        let g = j.tr_mul(&r);
        Ok(Some(Self { x, j, f, g }))
    }
}

/// Shared iteration. With a sign pattern every trial point is mapped back to
/// the unit sphere inside that sector and stationarity is measured by the
/// projected gradient; otherwise the parameter bound is enforced.
pub(crate) fn lm_core<P: LeastSquares + ?Sized>(
    problem: &P,
    mut x0: Vec<f64>,
    cfg: &StopConfig,
    sector: Option<&SignPattern>,
) -> Result<Minimum> {
    if x0.len() != problem.n_vars() {
        return Err(Error::Dimension {
            expected: problem.n_vars(),
            actual: x0.len(),
        });
    }
    if let Some(p) = sector {
        project_in_place(&mut x0, p);
    }
    let n = x0.len();
    let mut trace = cfg.record_trace.then(Vec::new);
    let mut fevals = 1;
    let mut iters = 0;
    let fail = |x: Vec<f64>, iters, fevals, trace| Minimum {
        x,
        f: f64::NAN,
        grad_norm: None,
        iters,
        fevals,
        reason: StopReason::NumericalFailure,
        trace,
    };
    let Some(mut cur) = State::eval(problem, x0.clone())? else {
        return Ok(fail(x0, iters, fevals, trace));
    };
    let a0 = cur.j.tr_mul(&cur.j);
    let mut lambda = LAMBDA_INIT * a0.diagonal().amax().max(f64::MIN_POSITIVE);
    let mut last_step: Option<f64> = None;
    let mut last_decrease: Option<f64> = None;

    let reason = loop {
        let gn = match sector {
            Some(p) => projected_gradient_norm(&cur.x, cur.g.as_slice(), p),
            None => cur.g.norm(),
        };
        if sector.is_none() && norm_inf(&cur.x) > cfg.param_bound {
            break StopReason::ParamBoundHit;
        }
        if gn < cfg.grad_tol {
            break StopReason::GradientTolerance;
        }
        if last_step.is_some_and(|s| s <= cfg.step_tol * (cfg.step_tol + norm2(&cur.x))) {
            break StopReason::StepStagnation;
        }
        if last_decrease.is_some_and(|d| d <= cfg.fun_tol * (cfg.fun_tol + cur.f)) {
            break StopReason::FunctionStagnation;
        }
        if iters >= cfg.max_iters {
            break StopReason::MaxIterations;
        }
        if fevals >= cfg.max_fevals {
            break StopReason::MaxFunctionEvals;
        }

        let mut a = cur.j.tr_mul(&cur.j);
        let mut g = cur.g.clone();
        if let Some(p) = sector {
            restrict_to_free(&cur.x, &mut a, &mut g, p);
        }
        // JᵀJ is singular along t itself, so the damping never vanishes
        let mu = lambda.max(LAMBDA_FLOOR * a.diagonal().amax());
        let mut damped = a.clone();
        for i in 0..n {
            damped[(i, i)] += mu;
        }
        let Some(chol) = damped.cholesky() else {
            lambda *= 2.0;
            if lambda > LAMBDA_MAX {
                break StopReason::NumericalFailure;
            }
            continue;
        };
        let delta = -chol.solve(&g);
        let predicted = -(g.dot(&delta) + 0.5 * delta.dot(&(&a * &delta)));

        let mut x_new: Vec<f64> = cur.x.iter().zip(delta.iter()).map(|(x, d)| x + d).collect();
        if let Some(p) = sector {
            project_in_place(&mut x_new, p);
        }
        let step = cur.x.iter().zip(&x_new).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        fevals += 1;
        let Some(trial) = State::eval(problem, x_new)? else {
            break StopReason::NumericalFailure;
        };
        let actual = cur.f - trial.f;
        let ratio = if predicted > 0.0 { actual / predicted } else { -1.0 };
        if actual > 0.0 && ratio > ACCEPT_RATIO {
            iters += 1;
            if ratio > GOOD_RATIO {
                lambda *= 0.5;
            }
            cur = trial;
            last_step = Some(step);
            last_decrease = Some(actual);
            if let Some(tr) = trace.as_mut() {
                tr.push(TraceEntry {
                    iter: iters,
                    f: cur.f,
                    grad_norm: cur.g.norm(),
                    step,
                });
            }
            log::debug!("lm iter={iters} f={:.6e} lambda={lambda:.3e}", cur.f);
        } else {
            lambda *= 2.0;
            // a vanishing rejected step cannot make progress either
            if step <= cfg.step_tol * (cfg.step_tol + norm2(&cur.x)) {
                last_step = Some(step);
            }
            if lambda > LAMBDA_MAX {
                break StopReason::StepStagnation;
            }
        }
    };

    let grad_norm = match sector {
        Some(p) => projected_gradient_norm(&cur.x, cur.g.as_slice(), p),
        None => cur.g.norm(),
    };
    Ok(Minimum {
        x: cur.x,
        f: cur.f,
        grad_norm: Some(grad_norm),
        iters,
        fevals,
        reason,
        trace,
    })
}

fn norm2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hermitian::frobenius_distance;
    use crate::measurement::{born_probability, polarization_projectors, FrequencyVector};
    use crate::optim::testing::{example1, Quadratic};
    use crate::param::{inverse_param, random_state};
    use num_complex::Complex64;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn start() -> ParamVector {
        ParamVector::new(vec![-0.0001, 0.999, 0.001, 0.999]).unwrap()
    }

    #[test]
    fn example1_reconstruction() {
        let model = example1();
        let cfg = StopConfig::for_params(4);
        let res = levenberg_marquardt(&model, &start(), &cfg).unwrap();
        assert_eq!(res.reason, StopReason::GradientTolerance);
        assert!(res.grad_norm < 1e-6);
        assert!(res.f_final <= 1e-6, "f = {}", res.f_final);
        let expected = [
            [Complex64::new(0.9998, 0.0), Complex64::new(-0.0005, 0.0006)],
            [Complex64::new(-0.0005, -0.0006), Complex64::new(0.0002, 0.0)],
        ];
        let m = res.rho_final.matrix();
        for i in 0..2 {
            for j in 0..2 {
                assert!((m[(i, j)] - expected[i][j]).norm() < 2e-3, "entry ({i},{j}) = {}", m[(i, j)]);
            }
        }
        assert!(res.t_norm_inf() < cfg.param_bound);
    }

    #[test]
    fn perfect_fit_start_stops_immediately() {
        let povm = polarization_projectors();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let rho = random_state(2, &mut rng);
        let f: Vec<f64> = povm.iter().map(|o| born_probability(o, &rho).unwrap()).collect();
        let model = ObjectiveModel::gaussian(povm, FrequencyVector(f)).unwrap();
        let t0 = inverse_param(&rho, &SignPattern::positive(2), 1.0).unwrap();
        let res = levenberg_marquardt(&model, &t0, &StopConfig::for_params(4)).unwrap();
        assert_eq!(res.reason, StopReason::GradientTolerance);
        assert!(res.iters <= 1);
    }

    #[test]
    fn opposite_starts_give_the_same_state() {
        let model = example1();
        let cfg = StopConfig::for_params(4);
        let a = levenberg_marquardt(&model, &ParamVector::new(vec![1.0, 0.001, 0.0, 0.0]).unwrap(), &cfg).unwrap();
        let b = levenberg_marquardt(&model, &ParamVector::new(vec![-1.0, -0.001, 0.0, 0.0]).unwrap(), &cfg).unwrap();
        assert!(a.t_final.distance(&b.t_final) > 1e-2);
        assert!(frobenius_distance(a.rho_final.matrix(), b.rho_final.matrix()) < 1e-3);
    }

    #[test]
    fn accepted_steps_never_increase_f() {
        let mut cfg = StopConfig::for_params(4);
        cfg.record_trace = true;
        let res = levenberg_marquardt(&example1(), &ParamVector::new(vec![0.3, -0.8, 0.5, 0.1]).unwrap(), &cfg).unwrap();
        let trace = res.trace_log.unwrap();
        assert!(!trace.is_empty());
        assert!(trace.windows(2).all(|w| w[1].f <= w[0].f));
        assert_eq!(trace.len(), res.iters);
    }

    #[test]
    fn far_start_hits_the_bound() {
        let t0 = ParamVector::new(vec![1e6, 0.3, -0.2, 1e6]).unwrap();
        let res = levenberg_marquardt(&example1(), &t0, &StopConfig::for_params(4)).unwrap();
        assert_eq!(res.reason, StopReason::ParamBoundHit);
        assert!(res.t_norm_inf() > 1e3);
    }

    #[test]
    fn without_a_bound_a_far_start_looks_stationary() {
        let t0 = ParamVector::new(vec![1e9, 0.3, -0.2, 1e9]).unwrap();
        let mut cfg = StopConfig::for_params(4);
        cfg.param_bound = f64::INFINITY;
        let res = levenberg_marquardt(&example1(), &t0, &cfg).unwrap();
        assert_eq!(res.reason, StopReason::GradientTolerance);
        // the gradient is tiny only because ‖t‖ is huge
        assert!(res.f_final > 1e-3);
    }

    #[test]
    fn multinomial_is_rejected() {
        let model = ObjectiveModel::multinomial(polarization_projectors(), FrequencyVector(vec![0.5, 0.5, 0.5, 0.5])).unwrap();
        let err = levenberg_marquardt(&model, &ParamVector::maximally_mixed(2), &StopConfig::for_params(4)).unwrap_err();
        assert!(matches!(err, Error::InvalidArgument(_)));
    }

    #[test]
    fn quadratic_converges() {
        let q = Quadratic::four();
        let min = minimize(&q, &[0.0; 4], &StopConfig::for_params(4)).unwrap();
        assert_eq!(min.reason, StopReason::GradientTolerance);
        for (x, c) in min.x.iter().zip(&q.center) {
            assert!((x - c).abs() < 1e-6);
        }
    }
}
