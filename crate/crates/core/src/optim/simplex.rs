//! Nelder–Mead downhill simplex in the style of `fminsearch`.

use super::{check_start, into_result, Minimum, Objective, OptimizationResult, StopConfig, StopReason, TraceEntry};
use crate::error::{Error, Result};
use crate::likelihood::ObjectiveModel;
use crate::param::ParamVector;

const REFLECT: f64 = 1.0;
const EXPAND: f64 = 2.0;
const CONTRACT: f64 = 0.5;
const SHRINK: f64 = 0.5;
const PERTURB: f64 = 0.05;
const ZERO_PERTURB: f64 = 0.00025;

/// Nelder–Mead on `F(ρ(t))`. The reported gradient norm is evaluated at the
/// final point after the run; it plays no part in stopping.
pub fn nelder_mead(model: &ObjectiveModel, t0: &ParamVector, cfg: &StopConfig) -> Result<OptimizationResult> {
    check_start(model, t0)?;
    let min = minimize(model, t0.as_slice(), cfg)?;
    into_result(model, min)
}

struct Budget<'a, P: ?Sized> {
    problem: &'a P,
    used: usize,
    cap: usize,
}

enum Eval {
    Value(f64),
    Exhausted,
    NonFinite,
}

impl<P: Objective + ?Sized> Budget<'_, P> {
    fn eval(&mut self, x: &[f64]) -> Result<Eval> {
        if self.used >= self.cap {
            return Ok(Eval::Exhausted);
        }
        self.used += 1;
        let f = self.problem.value(x)?;
        Ok(if f.is_finite() { Eval::Value(f) } else { Eval::NonFinite })
    }
}

macro_rules! eval_or_stop {
    ($budget:expr, $x:expr, $stop:lifetime) => {
        match $budget.eval($x)? {
            Eval::Value(f) => f,
            Eval::Exhausted => break $stop StopReason::MaxFunctionEvals,
            Eval::NonFinite => break $stop StopReason::NumericalFailure,
        }
    };
}

fn lerp(a: &[f64], b: &[f64], c: f64) -> Vec<f64> {
    // a + c (b - a)
    a.iter().zip(b).map(|(x, y)| x + c * (y - x)).collect()
}

/// Nelder–Mead on any objective. Stops when both the spread of function
/// values and the ∞-distance of every vertex to the best one fall within
/// the tolerances (reported as step stagnation), or at the evaluation cap.
pub fn minimize<P: Objective + ?Sized>(problem: &P, x0: &[f64], cfg: &StopConfig) -> Result<Minimum> {
    let n = problem.n_vars();
    if x0.len() != n {
        return Err(Error::Dimension {
            expected: n,
            actual: x0.len(),
        });
    }
    let mut budget = Budget {
        problem,
        used: 0,
        cap: cfg.max_fevals,
    };
    let mut trace = cfg.record_trace.then(Vec::new);
    let mut iters = 0;
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);

    let reason = 'run: {
        let f0 = eval_or_stop!(budget, x0, 'run);
        simplex.push((x0.to_vec(), f0));
        for i in 0..n {
            let mut v = x0.to_vec();
            v[i] = if v[i] != 0.0 { (1.0 + PERTURB) * v[i] } else { ZERO_PERTURB };
            let fv = eval_or_stop!(budget, &v, 'run);
            simplex.push((v, fv));
        }
        sort(&mut simplex);

        loop {
            let best = &simplex[0];
            let f_spread = simplex[1..].iter().fold(0.0f64, |m, (_, f)| m.max((f - best.1).abs()));
            let x_spread = simplex[1..].iter().fold(0.0f64, |m, (v, _)| {
                m.max(v.iter().zip(&best.0).fold(0.0f64, |a, (p, q)| a.max((p - q).abs())))
            });
            if f_spread <= cfg.fun_tol && x_spread <= cfg.step_tol {
                break 'run StopReason::StepStagnation;
            }
            if iters >= cfg.max_iters {
                break 'run StopReason::MaxIterations;
            }

            let mut centroid = vec![0.0; n];
            for (v, _) in &simplex[..n] {
                for (c, x) in centroid.iter_mut().zip(v) {
                    *c += x / n as f64;
                }
            }
            let (worst, f_worst) = simplex[n].clone();
            let f_best = simplex[0].1;
            let f_second = simplex[n - 1].1;

            let xr = lerp(&centroid, &worst, -REFLECT);
            let fr = eval_or_stop!(budget, &xr, 'run);
            let mut shrink = false;
            if fr < f_best {
                let xe = lerp(&centroid, &worst, -REFLECT * EXPAND);
                let fe = eval_or_stop!(budget, &xe, 'run);
                simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
            } else if fr < f_second {
                simplex[n] = (xr, fr);
            } else if fr < f_worst {
                let xc = lerp(&centroid, &worst, -REFLECT * CONTRACT);
                let fc = eval_or_stop!(budget, &xc, 'run);
                if fc <= fr {
                    simplex[n] = (xc, fc);
                } else {
                    shrink = true;
                }
            } else {
                let xcc = lerp(&centroid, &worst, CONTRACT);
                let fcc = eval_or_stop!(budget, &xcc, 'run);
                if fcc < f_worst {
                    simplex[n] = (xcc, fcc);
                } else {
                    shrink = true;
                }
            }
            if shrink {
                let anchor = simplex[0].0.clone();
                for vertex in simplex.iter_mut().skip(1) {
                    let v = lerp(&anchor, &vertex.0, SHRINK);
                    let fv = eval_or_stop!(budget, &v, 'run);
                    *vertex = (v, fv);
                }
            }
            sort(&mut simplex);
            iters += 1;
            log::debug!("nm iter={iters} f={:.6e} fevals={}", simplex[0].1, budget.used);
            if let Some(tr) = trace.as_mut() {
                tr.push(TraceEntry {
                    iter: iters,
                    f: simplex[0].1,
                    grad_norm: f64::NAN,
                    step: f64::NAN,
                });
            }
        }
    };

    let (x, f) = if simplex.is_empty() {
        (x0.to_vec(), f64::NAN)
    } else {
        sort(&mut simplex);
        simplex.swap_remove(0)
    };
    Ok(Minimum {
        x,
        f,
        grad_norm: None,
        iters,
        fevals: budget.used,
        reason,
        trace,
    })
}

/// Stable ascending sort, so ties keep their earlier position.
fn sort(simplex: &mut [(Vec<f64>, f64)]) {
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
}
