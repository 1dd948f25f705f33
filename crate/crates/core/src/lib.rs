//! Density-matrix reconstruction from measurement counts.
//!
//! States are parameterized as `ρ(t) = T(t)†T(t) / tr(T(t)†T(t))` with `T`
//! upper triangular, which turns the positivity- and trace-constrained
//! maximum-likelihood problem into an unconstrained one over `t ∈ R^{d²}`.
//! Every local minimizer of the resulting objective gives the same state; the
//! [`verify`] module checks that empirically.

pub mod error;
pub mod hermitian;
pub mod inversion;
pub mod io;
pub mod likelihood;
pub mod measurement;
pub mod optim;
pub mod param;
pub mod verify;

pub use error::{Error, Result};
pub use hermitian::{fidelity, pauli_basis, purity, DensityMatrix, HermitianMatrix, StokesVector};
pub use inversion::{linear_invert, InversionReport};
pub use likelihood::{value_and_gradient, LikelihoodKind, ObjectiveEvaluation, ObjectiveModel};
pub use measurement::{FrequencyVector, MeasurementOperator, MeasurementRecord, Noise, Normalization};
pub use optim::{OptimizationResult, Solver, StopConfig, StopReason};
pub use param::{inverse_param, rho_of_t, ParamVector, SignPattern};
pub use verify::{equivalence_check, gradient_check, multistart, EquivalenceReport, MultistartConfig, MultistartReport};
