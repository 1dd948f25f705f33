//! Negative log-likelihood objectives over the parameter space.
//!
//! Both kinds share one derivative engine for the outcome probabilities
//! `p_μ(t) = tr(O_μ T†T) / ‖t‖²`:
//!
//! ```text
//! ∂p_μ/∂t_k = [ 2 Re(e · (O_μ T†)_{j,i}) − 2 t_k p_μ ] / ‖t‖²
//! ```
//!
//! where `t_k` sits at entry `(i, j)` of `T` with unit `e ∈ {1, i}`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::hermitian::{trace_product, DensityMatrix};
use crate::measurement::{FrequencyVector, MeasurementOperator};
use crate::param::{build_t, offdiag_positions, ParamVector, DEGENERATE_NORM};

pub const DEFAULT_PROBABILITY_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LikelihoodKind {
    /// `F = Σ_μ (p_μ − f_μ)² / (2 p_μ)`
    Gaussian,
    /// `F = −Σ_μ f_μ log p_μ`
    Multinomial,
}

impl std::str::FromStr for LikelihoodKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(Self::Gaussian),
            "multinomial" => Ok(Self::Multinomial),
            other => Err(Error::InvalidArgument(format!("unknown likelihood {other:?}"))),
        }
    }
}

/// Observed data together with the likelihood it is scored under.
#[derive(Debug, Clone)]
pub struct ObjectiveModel {
    kind: LikelihoodKind,
    povm: Vec<MeasurementOperator>,
    freqs: FrequencyVector,
    probability_floor: f64,
}

impl ObjectiveModel {
    pub fn new(kind: LikelihoodKind, povm: Vec<MeasurementOperator>, freqs: FrequencyVector) -> Result<Self> {
        if povm.is_empty() {
            return Err(Error::InvalidArgument("objective needs at least one operator".into()));
        }
        if povm.len() != freqs.len() {
            return Err(Error::Dimension {
                expected: povm.len(),
                actual: freqs.len(),
            });
        }
        let d = povm[0].dim();
        if let Some(bad) = povm.iter().find(|o| o.dim() != d) {
            return Err(Error::Dimension {
                expected: d,
                actual: bad.dim(),
            });
        }
        Ok(Self {
            kind,
            povm,
            freqs,
            probability_floor: DEFAULT_PROBABILITY_FLOOR,
        })
    }

    pub fn gaussian(povm: Vec<MeasurementOperator>, freqs: FrequencyVector) -> Result<Self> {
        Self::new(LikelihoodKind::Gaussian, povm, freqs)
    }

    pub fn multinomial(povm: Vec<MeasurementOperator>, freqs: FrequencyVector) -> Result<Self> {
        Self::new(LikelihoodKind::Multinomial, povm, freqs)
    }

    pub fn with_probability_floor(mut self, floor: f64) -> Self {
        self.probability_floor = floor;
        self
    }

    pub fn kind(&self) -> LikelihoodKind {
        self.kind
    }

    pub fn povm(&self) -> &[MeasurementOperator] {
        &self.povm
    }

    pub fn freqs(&self) -> &FrequencyVector {
        &self.freqs
    }

    pub fn probability_floor(&self) -> f64 {
        self.probability_floor
    }

    /// Hilbert-space dimension `d`.
    pub fn dim(&self) -> usize {
        self.povm[0].dim()
    }

    /// Number of optimization variables, `d²`.
    pub fn n_params(&self) -> usize {
        self.dim() * self.dim()
    }

    pub fn n_outcomes(&self) -> usize {
        self.povm.len()
    }

    fn check(&self, t: &ParamVector) -> Result<f64> {
        if t.dim() != self.dim() {
            return Err(Error::Dimension {
                expected: self.n_params(),
                actual: t.len(),
            });
        }
        let norm2: f64 = t.as_slice().iter().map(|x| x * x).sum();
        if norm2.sqrt() < DEGENERATE_NORM {
            return Err(Error::DegenerateParameter(norm2.sqrt()));
        }
        Ok(norm2)
    }

    fn require_gaussian(&self) -> Result<()> {
        match self.kind {
            LikelihoodKind::Gaussian => Ok(()),
            LikelihoodKind::Multinomial => Err(Error::InvalidArgument(
                "residuals and Jacobian are only defined for the Gaussian likelihood".into(),
            )),
        }
    }
}

/// Objective value, gradient and (Gaussian kind) residuals and Jacobian at one point.
#[derive(Debug, Clone)]
pub struct ObjectiveEvaluation {
    pub value: f64,
    pub residuals: Option<DVector<f64>>,
    pub gradient: DVector<f64>,
    pub jacobian: Option<DMatrix<f64>>,
    /// Some probability fell below the floor.
    pub floor_active: bool,
}

impl ObjectiveEvaluation {
    pub fn grad_norm(&self) -> f64 {
        self.gradient.norm()
    }
}

/// Outcome probabilities and, on request, their derivatives (`m × d²`).
pub(crate) fn probabilities(
    t: &ParamVector,
    model: &ObjectiveModel,
    with_derivatives: bool,
) -> Result<(Vec<f64>, Option<DMatrix<f64>>)> {
    let norm2 = model.check(t)?;
    let d = t.dim();
    let tm = build_t(t);
    let gram = tm.ad_mul(&tm);
    let t_adj = tm.adjoint();
    let params = t.as_slice();
    let offdiag = offdiag_positions(d);

    let m = model.n_outcomes();
    let mut p = Vec::with_capacity(m);
    let mut dp = with_derivatives.then(|| DMatrix::zeros(m, d * d));
    for (mu, op) in model.povm.iter().enumerate() {
        let pm = trace_product(op.matrix(), &gram).re / norm2;
        p.push(pm);
        if let Some(dp) = dp.as_mut() {
            let ot = op.matrix() * &t_adj;
            for k in 0..d {
                dp[(mu, k)] = (2.0 * ot[(k, k)].re - 2.0 * params[k] * pm) / norm2;
            }
            for (q, &(i, j)) in offdiag.iter().enumerate() {
                let (kr, ki) = (d + 2 * q, d + 2 * q + 1);
                let z = ot[(j, i)];
                dp[(mu, kr)] = (2.0 * z.re - 2.0 * params[kr] * pm) / norm2;
                dp[(mu, ki)] = (-2.0 * z.im - 2.0 * params[ki] * pm) / norm2;
            }
        }
    }
    Ok((p, dp))
}

fn gaussian_terms(p: &[f64], f: &[f64], floor: f64) -> (DVector<f64>, Vec<f64>, bool) {
    let mut floor_active = false;
    let mut r = DVector::zeros(p.len());
    let mut dr_dp = vec![0.0; p.len()];
    for (mu, (&pm, &fm)) in p.iter().zip(f).enumerate() {
        if pm > floor {
            let s = pm.sqrt();
            r[mu] = (pm - fm) / s;
            dr_dp[mu] = (pm + fm) / (2.0 * pm * s);
        } else {
            floor_active = true;
            let s = floor.sqrt();
            r[mu] = (pm - fm) / s;
            dr_dp[mu] = 1.0 / s;
        }
    }
    (r, dr_dp, floor_active)
}

/// `r_μ = (p_μ − f_μ) / √max(p_μ, floor)`, so that `F = ½ Σ r_μ²`.
pub fn residuals_gaussian(t: &ParamVector, model: &ObjectiveModel) -> Result<DVector<f64>> {
    model.require_gaussian()?;
    let (p, _) = probabilities(t, model, false)?;
    Ok(gaussian_terms(&p, model.freqs.as_slice(), model.probability_floor).0)
}

/// Objective value alone.
pub fn objective_value(t: &ParamVector, model: &ObjectiveModel) -> Result<f64> {
    let (p, _) = probabilities(t, model, false)?;
    Ok(value_from_probabilities(&p, model))
}

fn value_from_probabilities(p: &[f64], model: &ObjectiveModel) -> f64 {
    let f = model.freqs.as_slice();
    let floor = model.probability_floor;
    match model.kind {
        LikelihoodKind::Gaussian => 0.5 * gaussian_terms(p, f, floor).0.norm_squared(),
        LikelihoodKind::Multinomial => -p
            .iter()
            .zip(f)
            .map(|(&pm, &fm)| if fm > 0.0 { fm * pm.max(floor).ln() } else { 0.0 })
            .sum::<f64>(),
    }
}

/// The objective evaluated directly on a state, with `tr(O_μ ρ)` in place of
/// `p_μ(t)`.
pub fn objective_on_state(rho: &DensityMatrix, model: &ObjectiveModel) -> Result<f64> {
    if rho.dim() != model.dim() {
        return Err(Error::Dimension {
            expected: model.dim(),
            actual: rho.dim(),
        });
    }
    let p: Vec<f64> = model
        .povm
        .iter()
        .map(|o| trace_product(o.matrix(), rho.matrix()).re)
        .collect();
    Ok(value_from_probabilities(&p, model))
}

/// Value and exact gradient; residuals and Jacobian are included for the
/// Gaussian kind.
pub fn value_and_gradient(t: &ParamVector, model: &ObjectiveModel) -> Result<ObjectiveEvaluation> {
    let (p, dp) = probabilities(t, model, true)?;
    let dp = dp.expect("derivatives requested");
    let f = model.freqs.as_slice();
    let floor = model.probability_floor;
    match model.kind {
        LikelihoodKind::Gaussian => {
            let (r, dr_dp, floor_active) = gaussian_terms(&p, f, floor);
            let mut jac = dp;
            for (mu, scale) in dr_dp.iter().enumerate() {
                jac.row_mut(mu).scale_mut(*scale);
            }
            let gradient = jac.tr_mul(&r);
            Ok(ObjectiveEvaluation {
                value: 0.5 * r.norm_squared(),
                residuals: Some(r),
                gradient,
                jacobian: Some(jac),
                floor_active,
            })
        }
        LikelihoodKind::Multinomial => {
            let mut floor_active = false;
            let mut weights = DVector::zeros(p.len());
            let mut value = 0.0;
            for (mu, (&pm, &fm)) in p.iter().zip(f).enumerate() {
                if pm <= floor {
                    floor_active = true;
                }
                if fm > 0.0 {
                    value -= fm * pm.max(floor).ln();
                    if pm > floor {
                        weights[mu] = -fm / pm;
                    }
                }
            }
            Ok(ObjectiveEvaluation {
                value,
                residuals: None,
                gradient: dp.tr_mul(&weights),
                jacobian: None,
                floor_active,
            })
        }
    }
}

/// Analytic Jacobian `J[μ][k] = ∂r_μ/∂t_k` of the Gaussian residuals.
pub fn jacobian_gaussian(t: &ParamVector, model: &ObjectiveModel) -> Result<DMatrix<f64>> {
    model.require_gaussian()?;
    Ok(value_and_gradient(t, model)?
        .jacobian
        .expect("Gaussian evaluation carries a Jacobian"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measurement::{born_probability, polarization_projectors};
    use crate::param::{inverse_param, random_state, rho_of_t, SignPattern};
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn example1() -> ObjectiveModel {
        ObjectiveModel::gaussian(
            polarization_projectors(),
            FrequencyVector(vec![0.9990, 0.0002, 0.4995, 0.4994]),
        )
        .unwrap()
    }

    fn pv(t: &[f64]) -> ParamVector {
        ParamVector::new(t.to_vec()).unwrap()
    }

    #[test]
    fn perfect_fit_has_zero_residuals() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let rho = random_state(2, &mut rng);
        let povm = polarization_projectors();
        let f = povm.iter().map(|o| born_probability(o, &rho).unwrap()).collect();
        let model = ObjectiveModel::gaussian(povm, FrequencyVector(f)).unwrap();
        let t = inverse_param(&rho, &SignPattern::positive(2), 1.0).unwrap();
        let eval = value_and_gradient(&t, &model).unwrap();
        assert!(eval.residuals.as_ref().unwrap().amax() < 1e-14);
        assert!(eval.value < 1e-28);
        assert!(eval.grad_norm() < 1e-14);
    }

    #[test]
    fn nelder_mead_stagnation_value() {
        // the stagnation state reported for the single-qubit example
        let rho = DensityMatrix::new(crate::hermitian::CMatrix::from_row_slice(
            2,
            2,
            &[
                num_complex::Complex64::new(0.2219, 0.0),
                num_complex::Complex64::new(-0.3634, 0.0002),
                num_complex::Complex64::new(-0.3634, -0.0002),
                num_complex::Complex64::new(0.7781, 0.0),
            ],
        ))
        .unwrap();
        let model = example1();
        let t = inverse_param(&rho, &SignPattern::positive(2), 1.0).unwrap();
        let f = objective_value(&t, &model).unwrap();
        assert_abs_diff_eq!(f, 2.2316, epsilon = 5e-4);
        assert_abs_diff_eq!(objective_on_state(&rho, &model).unwrap(), f, epsilon = 1e-12);
    }

    #[test]
    fn least_squares_solution_value() {
        let f = objective_value(&pv(&[0.999, 0.0141, -0.0005, 0.0006]), &example1()).unwrap();
        // four printed digits of t only pin F to this order of magnitude
        assert!(f < 1e-5, "F = {f}");
    }

    #[test]
    fn evaluation_invariants() {
        let model = example1();
        let t = pv(&[0.3, -0.8, 0.2, 0.5]);
        let eval = value_and_gradient(&t, &model).unwrap();
        let r = eval.residuals.as_ref().unwrap();
        let j = eval.jacobian.as_ref().unwrap();
        assert_abs_diff_eq!(eval.value, 0.5 * r.norm_squared(), epsilon = 1e-12);
        assert!((j.tr_mul(r) - &eval.gradient).amax() < 1e-10);
        assert_abs_diff_eq!(objective_value(&t, &model).unwrap(), eval.value, epsilon = 1e-15);
        assert!((residuals_gaussian(&t, &model).unwrap() - r).amax() < 1e-15);
        // degree-0 homogeneity: derivative along t vanishes
        let jt = j * DVector::from_column_slice(t.as_slice());
        assert!(jt.amax() < 1e-10);
    }

    #[test]
    fn gradient_scales_inversely() {
        let model = example1();
        let t = pv(&[0.3, -0.8, 0.2, 0.5]);
        let g = value_and_gradient(&t, &model).unwrap().grad_norm();
        let g10 = value_and_gradient(&t.scaled(10.0).unwrap(), &model).unwrap().grad_norm();
        assert_abs_diff_eq!(g10 * 10.0 / g, 1.0, epsilon = 1e-10);
    }

    #[test]
    fn multinomial_rejects_residual_calls() {
        let m = ObjectiveModel::multinomial(polarization_projectors(), FrequencyVector(vec![0.5; 4])).unwrap();
        let t = pv(&[1.0, 1.0, 0.0, 0.0]);
        assert!(residuals_gaussian(&t, &m).is_err());
        assert!(jacobian_gaussian(&t, &m).is_err());
        let eval = value_and_gradient(&t, &m).unwrap();
        assert!(eval.residuals.is_none());
        // p = (0.5, 0.5, 0.5, 0.5) → F = −4 · 0.5 · ln 0.5
        assert_abs_diff_eq!(eval.value, -2.0 * 0.5f64.ln(), epsilon = 1e-14);
    }

    #[test]
    fn floor_flag_on_boundary() {
        let model = example1();
        // |H><H| gives p_V = 0
        let eval = value_and_gradient(&pv(&[1.0, 0.0, 0.0, 0.0]), &model).unwrap();
        assert!(eval.floor_active);
        assert!(eval.value.is_finite());
        let rho = rho_of_t(&pv(&[1.0, 1.0, 0.0, 0.0])).unwrap();
        assert!(objective_on_state(&rho, &model).unwrap().is_finite());
    }

    #[test]
    fn model_validation() {
        assert!(ObjectiveModel::gaussian(polarization_projectors(), FrequencyVector(vec![0.5; 3])).is_err());
        let model = example1();
        assert!(matches!(
            value_and_gradient(&ParamVector::new(vec![1.0; 16]).unwrap(), &model),
            Err(Error::Dimension { .. })
        ));
    }
}
