//! Minimization on `‖t‖₂ = 1` restricted to one sign sector of the diagonal.

use nalgebra::{DMatrix, DVector};

use super::lm::lm_core;
use super::{check_start, into_result, OptimizationResult, StopConfig};
use crate::error::{Error, Result};
use crate::likelihood::{LikelihoodKind, ObjectiveModel};
use crate::param::{ParamVector, SignPattern};

/// Smallest magnitude a diagonal parameter may take inside a sector.
pub const SIGN_FLOOR: f64 = 1e-10;

/// Renormalizes to the unit sphere, then clamps each diagonal entry into its
/// sector with magnitude (about) at least [`SIGN_FLOOR`].
pub fn project_to_sector(t: &ParamVector, pattern: &SignPattern) -> Result<ParamVector> {
    if pattern.dim() != t.dim() {
        return Err(Error::Dimension {
            expected: t.dim(),
            actual: pattern.dim(),
        });
    }
    let mut x = t.as_slice().to_vec();
    project_in_place(&mut x, pattern);
    ParamVector::new(x)
}

pub(crate) fn project_in_place(x: &mut [f64], pattern: &SignPattern) {
    normalize(x);
    for (i, xi) in x.iter_mut().enumerate().take(pattern.dim()) {
        let s = pattern.sign(i);
        *xi = s * (s * *xi).max(SIGN_FLOOR);
    }
    // clamping a wrong-signed entry changes the norm; rescaling keeps signs
    normalize(x);
}

fn normalize(x: &mut [f64]) {
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        x.iter_mut().for_each(|v| *v /= norm);
    }
}

/// Diagonal entries sitting on the floor whose descent direction leaves the sector.
fn active_set<'a>(x: &'a [f64], g: &'a [f64], pattern: &'a SignPattern) -> impl Iterator<Item = usize> + 'a {
    (0..pattern.dim()).filter(move |&i| {
        let s = pattern.sign(i);
        s * x[i] <= 1.5 * SIGN_FLOOR && s * g[i] > 0.0
    })
}

/// Norm of the gradient with the radial component and blocked bound
/// components removed.
pub(crate) fn projected_gradient_norm(x: &[f64], g: &[f64], pattern: &SignPattern) -> f64 {
    let xx: f64 = x.iter().map(|v| v * v).sum();
    let gx: f64 = x.iter().zip(g).map(|(a, b)| a * b).sum();
    let mut p: Vec<f64> = g.iter().zip(x).map(|(gi, xi)| gi - gx / xx * xi).collect();
    for i in active_set(x, g, pattern).collect::<Vec<_>>() {
        p[i] = 0.0;
    }
    p.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Freezes the active bound variables in the normal equations.
pub(crate) fn restrict_to_free(x: &[f64], a: &mut DMatrix<f64>, g: &mut DVector<f64>, pattern: &SignPattern) {
    let active: Vec<usize> = active_set(x, g.as_slice(), pattern).collect();
    for i in active {
        a.row_mut(i).fill(0.0);
        a.column_mut(i).fill(0.0);
        a[(i, i)] = 1.0;
        g[i] = 0.0;
    }
}

/// Levenberg–Marquardt with every iterate projected onto the unit sphere in
/// the sector given by `pattern`.
pub fn constrained_sign_solve(
    model: &ObjectiveModel,
    pattern: &SignPattern,
    t0: &ParamVector,
    cfg: &StopConfig,
) -> Result<OptimizationResult> {
    check_start(model, t0)?;
    if pattern.dim() != model.dim() {
        return Err(Error::Dimension {
            expected: model.dim(),
            actual: pattern.dim(),
        });
    }
    if model.kind() != LikelihoodKind::Gaussian {
        return Err(Error::InvalidArgument(
            "the sign-constrained solver needs the Gaussian likelihood".into(),
        ));
    }
    let min = lm_core(model, t0.as_slice().to_vec(), cfg, Some(pattern))?;
    into_result(model, min)
}
