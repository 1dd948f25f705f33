//! Unconstrained minimizers over the parameter vector, sharing one stopping
//! discipline: prefer ε-stationarity, and report which criterion fired.

mod descent;
mod lm;
mod simplex;
mod sphere;

pub use descent::gradient_descent;
pub use lm::levenberg_marquardt;
pub use simplex::nelder_mead;
pub use sphere::{constrained_sign_solve, project_to_sector, SIGN_FLOOR};

use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hermitian::DensityMatrix;
use crate::likelihood::{objective_value, value_and_gradient, ObjectiveModel};
use crate::param::{rho_of_t, ParamVector, SignPattern};

/// Tolerances and budgets shared by all solvers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StopConfig {
    /// ε: stop when ‖∇F‖ < ε.
    pub grad_tol: f64,
    /// ε_x: stagnation threshold on the step length.
    pub step_tol: f64,
    /// ε_F: stagnation threshold on the decrease of F.
    pub fun_tol: f64,
    pub max_iters: usize,
    pub max_fevals: usize,
    /// Artificial bound on ‖t‖∞; gradient-based solvers stop when it is exceeded.
    pub param_bound: f64,
    #[serde(default)]
    pub record_trace: bool,
}

impl StopConfig {
    /// Defaults for `n` variables: ε = 1e-6, ε_x = ε_F = ε², budgets 2·200·n.
    pub fn for_params(n: usize) -> Self {
        Self::with_grad_tol(n, 1e-6)
    }

    /// ε as given, ε_x = ε_F = ε².
    pub fn with_grad_tol(n: usize, eps: f64) -> Self {
        Self {
            grad_tol: eps,
            step_tol: eps * eps,
            fun_tol: eps * eps,
            max_iters: 2 * 200 * n,
            max_fevals: 2 * 200 * n,
            param_bound: 1e3,
            record_trace: false,
        }
    }

    /// Warns when a stagnation tolerance is looser than ε; stagnation would
    /// then pre-empt the stationarity test.
    pub fn validate(&self) -> bool {
        let ok = self.step_tol <= self.grad_tol && self.fun_tol <= self.grad_tol;
        if !ok {
            log::warn!(
                "stagnation tolerances (step {:e}, fun {:e}) exceed the gradient tolerance {:e}",
                self.step_tol,
                self.fun_tol,
                self.grad_tol
            );
        }
        ok
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum StopReason {
    GradientTolerance,
    StepStagnation,
    FunctionStagnation,
    MaxIterations,
    MaxFunctionEvals,
    ParamBoundHit,
    NumericalFailure,
}

impl StopReason {
    pub fn is_stationary(self) -> bool {
        self == StopReason::GradientTolerance
    }
}

impl fmt::Display for StopReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            StopReason::GradientTolerance => "gradient norm below tolerance",
            StopReason::StepStagnation => "step length below tolerance",
            StopReason::FunctionStagnation => "objective change below tolerance",
            StopReason::MaxIterations => "iteration limit reached",
            StopReason::MaxFunctionEvals => "function evaluation limit reached",
            StopReason::ParamBoundHit => "parameter bound exceeded",
            StopReason::NumericalFailure => "non-finite objective or Jacobian",
        };
        f.write_str(s)
    }
}

/// One accepted iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub iter: usize,
    pub f: f64,
    pub grad_norm: f64,
    pub step: f64,
}

impl fmt::Display for TraceEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "iter={} f={:.12e} grad_norm={:.6e} step={:.6e}",
            self.iter, self.f, self.grad_norm, self.step
        )
    }
}

#[derive(Debug, Clone)]
pub struct OptimizationResult {
    pub t_final: ParamVector,
    pub rho_final: DensityMatrix,
    pub f_final: f64,
    pub grad_norm: f64,
    pub iters: usize,
    pub fevals: usize,
    pub reason: StopReason,
    pub trace_log: Option<Vec<TraceEntry>>,
}

impl OptimizationResult {
    pub fn t_norm_inf(&self) -> f64 {
        self.t_final.norm_inf()
    }
}

/// Which minimizer to run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Solver {
    LevenbergMarquardt,
    GradientDescent,
    NelderMead,
    /// Unit-sphere solve restricted to one diagonal sign sector.
    ConstrainedSign(SignPattern),
}

impl Solver {
    pub fn name(&self) -> String {
        match self {
            Solver::LevenbergMarquardt => "lm".into(),
            Solver::GradientDescent => "gradient-descent".into(),
            Solver::NelderMead => "nelder-mead".into(),
            Solver::ConstrainedSign(p) => format!("constrained-sign({})", p.label()),
        }
    }

    pub fn run(&self, model: &ObjectiveModel, t0: &ParamVector, cfg: &StopConfig) -> Result<OptimizationResult> {
        match self {
            Solver::LevenbergMarquardt => levenberg_marquardt(model, t0, cfg),
            Solver::GradientDescent => gradient_descent(model, t0, cfg),
            Solver::NelderMead => nelder_mead(model, t0, cfg),
            Solver::ConstrainedSign(p) => constrained_sign_solve(model, p, t0, cfg),
        }
    }
}

impl std::str::FromStr for Solver {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lm" | "levenberg-marquardt" => Ok(Solver::LevenbergMarquardt),
            "gd" | "gradient-descent" => Ok(Solver::GradientDescent),
            "nm" | "nelder-mead" => Ok(Solver::NelderMead),
            other => Err(Error::InvalidArgument(format!("unknown solver {other:?}"))),
        }
    }
}

/// A smooth objective over `R^n`.
pub trait Objective {
    fn n_vars(&self) -> usize;
    fn value(&self, x: &[f64]) -> Result<f64>;
    fn value_and_gradient(&self, x: &[f64]) -> Result<(f64, DVector<f64>)>;
}

/// An objective of the form `½‖r(x)‖²`.
pub trait LeastSquares: Objective {
    /// Residuals `r(x)` and Jacobian `∂r/∂x`.
    fn residuals_and_jacobian(&self, x: &[f64]) -> Result<(DVector<f64>, DMatrix<f64>)>;
}

impl Objective for ObjectiveModel {
    fn n_vars(&self) -> usize {
        self.n_params()
    }

    fn value(&self, x: &[f64]) -> Result<f64> {
        objective_value(&ParamVector::new(x.to_vec())?, self)
    }

    fn value_and_gradient(&self, x: &[f64]) -> Result<(f64, DVector<f64>)> {
        let eval = value_and_gradient(&ParamVector::new(x.to_vec())?, self)?;
        Ok((eval.value, eval.gradient))
    }
}

impl LeastSquares for ObjectiveModel {
    fn residuals_and_jacobian(&self, x: &[f64]) -> Result<(DVector<f64>, DMatrix<f64>)> {
        let eval = value_and_gradient(&ParamVector::new(x.to_vec())?, self)?;
        match (eval.residuals, eval.jacobian) {
            (Some(r), Some(j)) => Ok((r, j)),
            _ => Err(Error::InvalidArgument(
                "least-squares solvers need the Gaussian likelihood".into(),
            )),
        }
    }
}

/// Solver output in plain coordinates, before mapping back to a state.
#[derive(Debug, Clone)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub f: f64,
    /// Optimality measure at `x`; `None` for derivative-free runs.
    pub grad_norm: Option<f64>,
    pub iters: usize,
    pub fevals: usize,
    pub reason: StopReason,
    pub trace: Option<Vec<TraceEntry>>,
}

pub(crate) fn all_finite(xs: &[f64]) -> bool {
    xs.iter().all(|x| x.is_finite())
}

pub(crate) fn norm_inf(xs: &[f64]) -> f64 {
    xs.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Maps a [`Minimum`] back through `ρ(t)`. A missing optimality measure is
/// filled in with ‖∇F‖ at the final point.
pub(crate) fn into_result(model: &ObjectiveModel, min: Minimum) -> Result<OptimizationResult> {
    let t_final = ParamVector::new(min.x)?;
    let eval = value_and_gradient(&t_final, model)?;
    Ok(OptimizationResult {
        rho_final: rho_of_t(&t_final)?,
        f_final: eval.value,
        grad_norm: min.grad_norm.unwrap_or_else(|| eval.grad_norm()),
        t_final,
        iters: min.iters,
        fevals: min.fevals,
        reason: min.reason,
        trace_log: min.trace,
    })
}

pub(crate) fn check_start(model: &ObjectiveModel, t0: &ParamVector) -> Result<()> {
    if t0.dim() != model.dim() {
        return Err(Error::Dimension {
            expected: model.n_params(),
            actual: t0.len(),
        });
    }
    Ok(())
}
