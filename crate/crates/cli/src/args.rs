use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use qst_core::{LikelihoodKind, Noise, Solver, StopConfig};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(name = "qst", version, about = "Density-matrix reconstruction from measurement counts")]
pub struct Cli {
    /// Log solver progress to stderr.
    #[arg(short, long, global = true)]
    pub verbose: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate measurement counts for a known state.
    Simulate(SimulateArgs),
    /// Reconstruct a density matrix from a measurement record.
    Reconstruct(ReconstructArgs),
    /// Run a solver from many random starts and check that every stationary
    /// point gives the same density matrix.
    VerifyMinima(VerifyArgs),
    /// Run several solvers from the same start and tabulate the outcomes.
    Compare(CompareArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseArg {
    None,
    Gaussian,
    Poisson,
}

impl From<NoiseArg> for Noise {
    fn from(n: NoiseArg) -> Self {
        match n {
            NoiseArg::None => Noise::None,
            NoiseArg::Gaussian => Noise::Gaussian,
            NoiseArg::Poisson => Noise::Poisson,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Linear,
    Mle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverArg {
    #[value(name = "lm", alias = "levenberg-marquardt")]
    Lm,
    #[value(name = "gradient-descent", alias = "gd")]
    GradientDescent,
    #[value(name = "nelder-mead", alias = "nm")]
    NelderMead,
}

impl From<SolverArg> for Solver {
    fn from(s: SolverArg) -> Self {
        match s {
            SolverArg::Lm => Solver::LevenbergMarquardt,
            SolverArg::GradientDescent => Solver::GradientDescent,
            SolverArg::NelderMead => Solver::NelderMead,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum LikelihoodArg {
    Gaussian,
    Multinomial,
}

impl From<LikelihoodArg> for LikelihoodKind {
    fn from(k: LikelihoodArg) -> Self {
        match k {
            LikelihoodArg::Gaussian => LikelihoodKind::Gaussian,
            LikelihoodArg::Multinomial => LikelihoodKind::Multinomial,
        }
    }
}

/// Stopping tolerances. Unset values follow the library defaults for the
/// problem size: ε = 1e-6, ε_x = ε_F = ε², 400 evaluations per parameter.
#[derive(Debug, Clone, Args, Serialize)]
pub struct StopArgs {
    /// Gradient-norm tolerance ε.
    #[arg(long)]
    pub grad_tol: Option<f64>,
    /// Step-length stagnation tolerance ε_x (default ε²).
    #[arg(long)]
    pub step_tol: Option<f64>,
    /// Objective-change stagnation tolerance ε_F (default ε²).
    #[arg(long)]
    pub fun_tol: Option<f64>,
    #[arg(long)]
    pub max_fevals: Option<usize>,
    #[arg(long)]
    pub max_iters: Option<usize>,
}

impl StopArgs {
    /// Configuration for `n` parameters with `grad_tol` as the fallback ε.
    pub fn config(&self, n: usize, grad_tol: f64) -> StopConfig {
        let mut cfg = StopConfig::with_grad_tol(n, grad_tol);
        if let Some(v) = self.step_tol {
            cfg.step_tol = v;
        }
        if let Some(v) = self.fun_tol {
            cfg.fun_tol = v;
        }
        if let Some(v) = self.max_fevals {
            cfg.max_fevals = v;
        }
        if let Some(v) = self.max_iters {
            cfg.max_iters = v;
        }
        cfg
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SimulateArgs {
    /// Preset (H, V, D, A, R, L or a product such as HV; mixed; bell) or a
    /// JSON file holding a density matrix as rows of [re, im] pairs.
    #[arg(long)]
    pub state: String,
    /// Operator preset (pol4, pol4x4, tomo16) or a JSON file with an operator list.
    #[arg(long, default_value = "pol4")]
    pub povm: String,
    /// Trials per operator.
    #[arg(long, default_value_t = 1000)]
    pub shots: u64,
    #[arg(long, value_enum, default_value_t = NoiseArg::None)]
    pub noise: NoiseArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output file; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ReconstructArgs {
    /// Record file, or one of the bundled records example1, example2, example3.
    pub record: String,
    #[arg(long, value_enum, default_value_t = Method::Mle)]
    pub method: Method,
    #[arg(long, value_enum, default_value_t = SolverArg::Lm)]
    pub solver: SolverArg,
    #[arg(long, value_enum, default_value_t = LikelihoodArg::Gaussian)]
    pub likelihood: LikelihoodArg,
    /// Starting point: "mixed" (maximally mixed state), "random" (drawn from
    /// --seed) or comma-separated parameters.
    #[arg(long, default_value = "mixed", allow_hyphen_values = true)]
    pub start: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub stop: StopArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct VerifyArgs {
    /// Record file, or one of the bundled records example1, example2, example3.
    pub record: String,
    #[arg(long, default_value_t = 50)]
    pub starts: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = SolverArg::Lm)]
    pub solver: SolverArg,
    #[arg(long, value_enum, default_value_t = LikelihoodArg::Gaussian)]
    pub likelihood: LikelihoodArg,
    /// Solve on the unit sphere once per diagonal sign pattern.
    #[arg(long)]
    pub constrain_signs: bool,
    /// Runs count as stationary when their gradient norm is below --grad-tol;
    /// the solver itself runs to 1e-3·grad-tol so that survivors sit well
    /// inside the screen.
    #[command(flatten)]
    pub stop: StopArgs,
    /// Largest Frobenius distance allowed between reconstructed states.
    #[arg(long, default_value_t = 1e-4)]
    pub rho_tol: f64,
    /// Largest spread of objective values allowed.
    #[arg(long, default_value_t = 1e-8)]
    pub f_tol: f64,
    /// Parameter-space distance under which two solutions count as one.
    #[arg(long, default_value_t = qst_core::verify::DEFAULT_DEDUP_TOL)]
    pub dedup_tol: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CompareArgs {
    /// Record file, or one of the bundled records example1, example2, example3.
    pub record: String,
    #[arg(long, value_enum, value_delimiter = ',', default_values_t = [SolverArg::Lm, SolverArg::NelderMead])]
    pub solver: Vec<SolverArg>,
    #[arg(long, value_enum, default_value_t = LikelihoodArg::Gaussian)]
    pub likelihood: LikelihoodArg,
    #[arg(long, default_value = "mixed", allow_hyphen_values = true)]
    pub start: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub stop: StopArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}
