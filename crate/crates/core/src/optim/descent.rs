//! Steepest descent with Armijo backtracking.

use nalgebra::DVector;

use super::{all_finite, check_start, into_result, norm_inf, Minimum, Objective, OptimizationResult, StopConfig, StopReason, TraceEntry};
use crate::error::{Error, Result};
use crate::likelihood::ObjectiveModel;
use crate::param::ParamVector;

const ARMIJO_C1: f64 = 1e-4;
const MAX_HALVINGS: usize = 60;

pub fn gradient_descent(model: &ObjectiveModel, t0: &ParamVector, cfg: &StopConfig) -> Result<OptimizationResult> {
    check_start(model, t0)?;
    let min = minimize(model, t0.as_slice(), cfg)?;
    into_result(model, min)
}

/// Steepest descent on any smooth objective. The first trial step length is
/// the Barzilai–Borwein estimate `sᵀs / sᵀy` from the previous step (twice the
/// previous length when curvature is not positive) and is halved until the
/// Armijo condition holds.
pub fn minimize<P: Objective + ?Sized>(problem: &P, x0: &[f64], cfg: &StopConfig) -> Result<Minimum> {
    if x0.len() != problem.n_vars() {
        return Err(Error::Dimension {
            expected: problem.n_vars(),
            actual: x0.len(),
        });
    }
    let mut x = x0.to_vec();
    let (mut f, mut g) = problem.value_and_gradient(&x)?;
    let mut fevals = 1;
    let mut iters = 0;
    let mut trace = cfg.record_trace.then(Vec::new);
    let mut alpha = 1.0;
    let mut last_step: Option<f64> = None;
    let mut last_decrease: Option<f64> = None;
    let mut bb_alpha: Option<f64> = None;

    let reason = 'outer: loop {
        if !f.is_finite() || !all_finite(g.as_slice()) {
            break StopReason::NumericalFailure;
        }
        let gn = g.norm();
        if norm_inf(&x) > cfg.param_bound {
            break StopReason::ParamBoundHit;
        }
        if gn < cfg.grad_tol {
            break StopReason::GradientTolerance;
        }
        let xn = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if last_step.is_some_and(|s| s <= cfg.step_tol * (cfg.step_tol + xn)) {
            break StopReason::StepStagnation;
        }
        if last_decrease.is_some_and(|d| d <= cfg.fun_tol * (cfg.fun_tol + f)) {
            break StopReason::FunctionStagnation;
        }
        if iters >= cfg.max_iters {
            break StopReason::MaxIterations;
        }

        let g2 = gn * gn;
        let mut trial_alpha = bb_alpha.take().unwrap_or(2.0 * alpha);
        let mut accepted: Option<(Vec<f64>, f64, DVector<f64>)> = None;
        for _ in 0..=MAX_HALVINGS {
            if fevals >= cfg.max_fevals {
                break 'outer StopReason::MaxFunctionEvals;
            }
            let xt: Vec<f64> = x.iter().zip(g.iter()).map(|(xi, gi)| xi - trial_alpha * gi).collect();
            let (ft, gt) = problem.value_and_gradient(&xt)?;
            fevals += 1;
            if ft.is_finite() && ft < f && ft <= f - ARMIJO_C1 * trial_alpha * g2 {
                accepted = Some((xt, ft, gt));
                break;
            }
            trial_alpha *= 0.5;
        }
        let Some((xt, ft, gt)) = accepted else {
            break StopReason::StepStagnation;
        };
        iters += 1;
        alpha = trial_alpha;
        let (mut ss, mut sy) = (0.0, 0.0);
        for k in 0..xt.len() {
            let (sk, yk) = (xt[k] - x[k], gt[k] - g[k]);
            ss += sk * sk;
            sy += sk * yk;
        }
        bb_alpha = (sy > 0.0 && (ss / sy).is_finite()).then(|| ss / sy);
        let step = trial_alpha * gn;
        last_step = Some(step);
        last_decrease = Some(f - ft);
        x = xt;
        f = ft;
        g = gt;
        log::debug!("gd iter={iters} f={f:.6e} alpha={trial_alpha:.3e}");
        if let Some(tr) = trace.as_mut() {
            tr.push(TraceEntry {
                iter: iters,
                f,
                grad_norm: g.norm(),
                step,
            });
        }
    };

    Ok(Minimum {
        grad_norm: Some(g.norm()),
        x,
        f,
        iters,
        fevals,
        reason,
        trace,
    })
}
