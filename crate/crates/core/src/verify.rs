//! Multistart runs and equivalence reporting: every stationary point found
//! should map to the same state.

use std::collections::BTreeMap;

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hermitian::frobenius_distance;
use crate::likelihood::{objective_value, value_and_gradient, ObjectiveModel};
use crate::optim::{OptimizationResult, Solver, StopConfig, StopReason};
use crate::param::{sample_interior, ParamVector};

/// Default distance in `t` below which two solutions count as one.
pub const DEFAULT_DEDUP_TOL: f64 = 1e-2;

#[derive(Debug, Clone)]
pub struct MultistartConfig {
    pub n_starts: usize,
    pub seed: u64,
    pub solver: Solver,
    pub stop: StopConfig,
    /// Runs with a gradient norm at or above this are discarded.
    pub screen_tol: f64,
    pub dedup_tol: f64,
}

impl MultistartConfig {
    /// Screens at the solver's own ε and deduplicates at [`DEFAULT_DEDUP_TOL`].
    pub fn new(n_starts: usize, seed: u64, solver: Solver, stop: StopConfig) -> Self {
        Self {
            n_starts,
            seed,
            solver,
            screen_tol: stop.grad_tol,
            stop,
            dedup_tol: DEFAULT_DEDUP_TOL,
        }
    }

    pub fn with_screen_tol(mut self, tol: f64) -> Self {
        self.screen_tol = tol;
        self
    }

    pub fn with_dedup_tol(mut self, tol: f64) -> Self {
        self.dedup_tol = tol;
        self
    }
}

#[derive(Debug, Clone)]
pub struct MultistartReport {
    /// Retained runs, deduplicated in `t`.
    pub solutions: Vec<OptimizationResult>,
    pub distinct_t_count: usize,
    /// Largest Frobenius distance between final states over all retained runs.
    pub max_pairwise_rho_distance: f64,
    /// Largest difference in final objective over all retained runs.
    pub max_f_spread: f64,
    pub retained_count: usize,
    pub discarded_count: usize,
    /// Stop reasons of every run, counted.
    pub reasons: BTreeMap<StopReason, usize>,
}

/// Initial point for start `index`: uniform in `[-1, 1]^{d²}`, diagonal
/// entries at least `1e-3` in magnitude.
pub fn start_point(dim: usize, seed: u64, index: usize) -> ParamVector {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(index as u64));
    sample_interior(dim, &mut rng)
}

fn retained(res: &OptimizationResult, screen_tol: f64) -> bool {
    res.grad_norm < screen_tol
        && !matches!(res.reason, StopReason::ParamBoundHit | StopReason::NumericalFailure)
}

/// Runs the solver from `n_starts` random points in parallel. Each start
/// draws from its own generator seeded with `seed + index`, so the report
/// does not depend on scheduling.
pub fn multistart(model: &ObjectiveModel, cfg: &MultistartConfig) -> Result<MultistartReport> {
    if cfg.n_starts == 0 {
        return Err(Error::InvalidArgument("at least one start is required".into()));
    }
    let runs: Vec<OptimizationResult> = (0..cfg.n_starts)
        .into_par_iter()
        .map(|i| cfg.solver.run(model, &start_point(model.dim(), cfg.seed, i), &cfg.stop))
        .collect::<Result<_>>()?;

    let mut reasons = BTreeMap::new();
    for r in &runs {
        *reasons.entry(r.reason).or_insert(0) += 1;
    }
    let total = runs.len();
    let best_grad_norm = runs.iter().map(|r| r.grad_norm).fold(f64::INFINITY, f64::min);
    let kept: Vec<OptimizationResult> = runs.into_iter().filter(|r| retained(r, cfg.screen_tol)).collect();
    if kept.is_empty() {
        let reasons = reasons
            .iter()
            .map(|(r, n)| format!("{r:?}: {n}"))
            .collect::<Vec<_>>()
            .join(", ");
        return Err(Error::AllRunsFailed {
            runs: total,
            best_grad_norm,
            reasons,
        });
    }

    let eq = equivalence_check(&kept, f64::INFINITY, f64::INFINITY);
    let retained_count = kept.len();
    let mut solutions: Vec<OptimizationResult> = Vec::new();
    for r in kept {
        if solutions.iter().all(|s| s.t_final.distance(&r.t_final) > cfg.dedup_tol) {
            solutions.push(r);
        }
    }
    Ok(MultistartReport {
        distinct_t_count: solutions.len(),
        solutions,
        max_pairwise_rho_distance: eq.max_rho_distance,
        max_f_spread: eq.max_f_spread,
        retained_count,
        discarded_count: total - retained_count,
        reasons,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceReport {
    pub equivalent: bool,
    pub max_rho_distance: f64,
    pub max_f_spread: f64,
    /// Indices of the pair with the largest state distance.
    pub worst_rho_pair: Option<(usize, usize)>,
    /// Indices of the pair with the largest objective difference.
    pub worst_f_pair: Option<(usize, usize)>,
}

/// Pairwise comparison of final states and objective values.
pub fn equivalence_check(results: &[OptimizationResult], rho_tol: f64, f_tol: f64) -> EquivalenceReport {
    let mut max_rho = 0.0;
    let mut max_f = 0.0;
    let mut worst_rho_pair = None;
    let mut worst_f_pair = None;
    for i in 0..results.len() {
        for j in i + 1..results.len() {
            let d = frobenius_distance(results[i].rho_final.matrix(), results[j].rho_final.matrix());
            if d > max_rho || worst_rho_pair.is_none() {
                max_rho = d;
                worst_rho_pair = Some((i, j));
            }
            let df = (results[i].f_final - results[j].f_final).abs();
            if df > max_f || worst_f_pair.is_none() {
                max_f = df;
                worst_f_pair = Some((i, j));
            }
        }
    }
    EquivalenceReport {
        equivalent: max_rho <= rho_tol && max_f <= f_tol,
        max_rho_distance: max_rho,
        max_f_spread: max_f,
        worst_rho_pair,
        worst_f_pair,
    }
}

/// Gradient denominators are floored here, so near a stationary point the
/// relative test degrades to an absolute one.
pub const GRADIENT_CHECK_FLOOR: f64 = 1e-4;

/// Worst disagreement between the analytic gradient and central differences
/// over `n_points` interior samples. The error at a point is
/// `max_k |g_k − g̃_k| / max(‖g̃‖∞, 1e-4)`.
pub fn gradient_check(model: &ObjectiveModel, n_points: usize, seed: u64) -> Result<f64> {
    gradient_check_with(model, n_points, seed, |t| Ok(value_and_gradient(t, model)?.gradient))
}

/// [`gradient_check`] against an arbitrary gradient routine.
pub fn gradient_check_with<G>(model: &ObjectiveModel, n_points: usize, seed: u64, gradient: G) -> Result<f64>
where
    G: Fn(&ParamVector) -> Result<DVector<f64>>,
{
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..n_points {
        let t = sample_interior(model.dim(), &mut rng);
        worst = worst.max(gradient_error_at(model, &t, &gradient)?);
    }
    Ok(worst)
}

/// Error of `gradient` against central differences at one point.
pub fn gradient_error_at<G>(model: &ObjectiveModel, t: &ParamVector, gradient: &G) -> Result<f64>
where
    G: Fn(&ParamVector) -> Result<DVector<f64>>,
{
    let g = gradient(t)?;
    let fd = central_difference(model, t)?;
    let scale = fd.amax().max(GRADIENT_CHECK_FLOOR);
    Ok((g - fd).amax() / scale)
}

/// Fourth-order central-difference gradient with step `h = 1e-6 · max(1, ‖t‖)`.
pub fn central_difference(model: &ObjectiveModel, t: &ParamVector) -> Result<DVector<f64>> {
    let h = 1e-6 * t.norm().max(1.0);
    let base = t.as_slice();
    let at = |k: usize, offset: f64| -> Result<f64> {
        let mut x = base.to_vec();
        x[k] += offset;
        objective_value(&ParamVector::new(x)?, model)
    };
    let mut out = DVector::zeros(base.len());
    for k in 0..base.len() {
        let near = at(k, h)? - at(k, -h)?;
        let far = at(k, 2.0 * h)? - at(k, -2.0 * h)?;
        out[k] = (8.0 * near - far) / (12.0 * h);
    }
    Ok(out)
}
