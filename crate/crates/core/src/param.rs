//! The map `t ↦ T(t) ↦ ρ(t) = T†T / tr(T†T)`, its signed-Cholesky inverse,
//! and membership tests for the parameter domains.
//!
//! Layout of `t` (length `d²`): the first `d` entries are the real diagonal of
//! the upper-triangular `T`. The remaining entries come in `(re, im)` pairs
//! that fill the strict upper triangle one diagonal at a time: the first
//! superdiagonal from top-left to bottom-right, then the second, and so on,
//! ending with the top-right corner. For `d = 2`, `t = (a, b, c, e)` gives
//! `T = [[a, c + ie], [0, b]]`.

use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};
use crate::hermitian::{eig_hermitian, CMatrix, DensityMatrix, HermitianMatrix, PSD_TOL};

/// Norms below this are treated as the zero vector.
pub const DEGENERATE_NORM: f64 = 1e-150;
/// Default tolerance of [`in_r_star_star`].
pub const R_STAR_STAR_TOL: f64 = 1e-8;
/// Draws with a diagonal entry smaller than this are rejected by [`sample_interior`].
pub const START_REJECT_TOL: f64 = 1e-3;

/// Real parameter vector of length `d²`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector {
    dim: usize,
    t: Vec<f64>,
}

impl ParamVector {
    /// Infers `d` from the length, which must be a perfect square.
    pub fn new(t: Vec<f64>) -> Result<Self> {
        let dim = (t.len() as f64).sqrt().round() as usize;
        if dim == 0 || dim * dim != t.len() {
            return Err(Error::InvalidArgument(format!(
                "parameter vector length {} is not a positive perfect square",
                t.len()
            )));
        }
        if let Some(bad) = t.iter().find(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument(format!("non-finite parameter {bad}")));
        }
        let largest = t.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        if largest == 0.0 {
            return Err(Error::DegenerateParameter(0.0));
        }
        Ok(Self { dim, t })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.t
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.t
    }

    pub fn norm(&self) -> f64 {
        self.t.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn norm_inf(&self) -> f64 {
        self.t.iter().fold(0.0f64, |m, x| m.max(x.abs()))
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(self.t.iter().map(|x| c * x).collect())
    }

    /// Euclidean distance; panics on a dimension mismatch.
    pub fn distance(&self, other: &Self) -> f64 {
        assert_eq!(self.t.len(), other.t.len());
        self.t
            .iter()
            .zip(&other.t)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    /// Starting point whose image is the maximally mixed state: `1/√d` on the
    /// diagonal, zero elsewhere.
    pub fn maximally_mixed(dim: usize) -> Self {
        let mut t = vec![0.0; dim * dim];
        for x in t.iter_mut().take(dim) {
            *x = 1.0 / (dim as f64).sqrt();
        }
        Self { dim, t }
    }
}

/// Signs of the diagonal of `T`, one of the `2^d` gauge sectors.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SignPattern(Vec<i8>);

impl SignPattern {
    pub fn new(signs: Vec<i8>) -> Result<Self> {
        if signs.is_empty() || signs.iter().any(|&s| s != 1 && s != -1) {
            return Err(Error::InvalidArgument(
                "sign pattern entries must be +1 or -1".into(),
            ));
        }
        Ok(Self(signs))
    }

    pub fn positive(dim: usize) -> Self {
        Self(vec![1; dim])
    }

    /// All `2^d` patterns, `+` before `-`, first diagonal entry most significant
    /// (for `d = 2`: `++`, `+-`, `-+`, `--`).
    pub fn all(dim: usize) -> Vec<Self> {
        (0..1usize << dim)
            .map(|code| {
                Self(
                    (0..dim)
                        .map(|i| if code >> (dim - 1 - i) & 1 == 1 { -1 } else { 1 })
                        .collect(),
                )
            })
            .collect()
    }

    pub fn signs(&self) -> &[i8] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn sign(&self, i: usize) -> f64 {
        f64::from(self.0[i])
    }

    /// Compact form such as `"+-"`.
    pub fn label(&self) -> String {
        self.0.iter().map(|&s| if s > 0 { '+' } else { '-' }).collect()
    }

    pub fn parse(s: &str) -> Result<Self> {
        let signs = s
            .chars()
            .map(|c| match c {
                '+' => Ok(1),
                '-' => Ok(-1),
                other => Err(Error::InvalidArgument(format!("bad sign character {other:?}"))),
            })
            .collect::<Result<Vec<i8>>>()?;
        Self::new(signs)
    }
}

/// Positions `(row, col)` of the strict upper triangle in parameter order.
pub fn offdiag_positions(dim: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(dim * (dim - 1) / 2);
    for offset in 1..dim {
        for i in 0..dim - offset {
            out.push((i, i + offset));
        }
    }
    out
}

/// Upper-triangular `T(t)`.
pub fn build_t(t: &ParamVector) -> CMatrix {
    let d = t.dim();
    let p = t.as_slice();
    let mut m = CMatrix::zeros(d, d);
    for i in 0..d {
        m[(i, i)] = Complex64::new(p[i], 0.0);
    }
    for (k, (i, j)) in offdiag_positions(d).into_iter().enumerate() {
        m[(i, j)] = Complex64::new(p[d + 2 * k], p[d + 2 * k + 1]);
    }
    m
}

/// Inverse of [`build_t`]: reads the diagonal real parts and the strict upper
/// triangle; anything below the diagonal is ignored.
pub fn flatten_t(m: &CMatrix) -> Vec<f64> {
    let d = m.nrows();
    let mut t = vec![0.0; d * d];
    for i in 0..d {
        t[i] = m[(i, i)].re;
    }
    for (k, (i, j)) in offdiag_positions(d).into_iter().enumerate() {
        t[d + 2 * k] = m[(i, j)].re;
        t[d + 2 * k + 1] = m[(i, j)].im;
    }
    t
}

/// `ρ(t) = T†T / tr(T†T)`.
pub fn rho_of_t(t: &ParamVector) -> Result<DensityMatrix> {
    let norm2: f64 = t.as_slice().iter().map(|x| x * x).sum();
    if norm2.sqrt() < DEGENERATE_NORM {
        return Err(Error::DegenerateParameter(norm2.sqrt()));
    }
    let tm = build_t(t);
    let gram = tm.ad_mul(&tm);
    let tr: f64 = gram.diagonal().iter().map(|z| z.re).sum();
    let h = HermitianMatrix::hermitize(&gram.unscale(tr));
    Ok(DensityMatrix::from_unchecked(h.into_inner()))
}

/// Upper-triangular `T` with positive diagonal such that `T†T = a`.
/// Fails with [`Error::BoundaryState`] on a non-positive pivot.
pub fn cholesky_upper(a: &CMatrix) -> Result<CMatrix> {
    let d = a.nrows();
    let mut t = CMatrix::zeros(d, d);
    for i in 0..d {
        let mut pivot = a[(i, i)].re;
        for k in 0..i {
            pivot -= t[(k, i)].norm_sqr();
        }
        if pivot.is_nan() || pivot <= 0.0 {
            return Err(Error::BoundaryState {
                min_eigenvalue: pivot,
            });
        }
        let diag = pivot.sqrt();
        t[(i, i)] = Complex64::new(diag, 0.0);
        for j in i + 1..d {
            let mut v = a[(i, j)];
            for k in 0..i {
                v -= t[(k, i)].conj() * t[(k, j)];
            }
            t[(i, j)] = v / diag;
        }
    }
    Ok(t)
}

/// Point of the gauge sector `(alpha, pattern)` mapping to `rho`: Cholesky
/// factor of `alpha·ρ` with row `i` multiplied by the `i`-th sign, so
/// `‖t‖² = alpha` and `rho_of_t(t) = rho`.
pub fn inverse_param(rho: &DensityMatrix, pattern: &SignPattern, alpha: f64) -> Result<ParamVector> {
    let d = rho.dim();
    if pattern.dim() != d {
        return Err(Error::Dimension {
            expected: d,
            actual: pattern.dim(),
        });
    }
    if alpha.is_nan() || alpha <= 0.0 {
        return Err(Error::InvalidArgument(format!("alpha must be positive, got {alpha}")));
    }
    let min = eig_hermitian(&rho.as_hermitian())?[0];
    if min <= PSD_TOL {
        return Err(Error::BoundaryState { min_eigenvalue: min });
    }
    let mut t = cholesky_upper(&rho.matrix().scale(alpha))?;
    for i in 0..d {
        if pattern.sign(i) < 0.0 {
            for j in i..d {
                t[(i, j)] = -t[(i, j)];
            }
        }
    }
    ParamVector::new(flatten_t(&t))
}

/// True iff every diagonal parameter exceeds `tol` in magnitude.
pub fn in_r_star_star(t: &ParamVector, tol: f64) -> bool {
    t.as_slice()[..t.dim()].iter().all(|x| x.abs() > tol)
}

/// Sign pattern of the diagonal of `T(t)`; zero counts as positive.
pub fn sign_pattern_of(t: &ParamVector) -> SignPattern {
    SignPattern(
        t.as_slice()[..t.dim()]
            .iter()
            .map(|&x| if x < 0.0 { -1 } else { 1 })
            .collect(),
    )
}

/// Representative of the gauge orbit of `t`: unit norm and non-negative
/// diagonal, obtained by flipping whole rows of `T`.
pub fn canonical_gauge(t: &ParamVector) -> ParamVector {
    let d = t.dim();
    let mut m = build_t(t);
    for i in 0..d {
        if m[(i, i)].re < 0.0 {
            for j in i..d {
                m[(i, j)] = -m[(i, j)];
            }
        }
    }
    let norm = t.norm();
    let flat = flatten_t(&m).into_iter().map(|x| x / norm).collect();
    ParamVector { dim: d, t: flat }
}

/// Uniform draw from `[-1, 1]^{d²}`, redrawn while any diagonal entry has
/// magnitude below [`START_REJECT_TOL`].
pub fn sample_interior<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> ParamVector {
    loop {
        let t: Vec<f64> = (0..dim * dim).map(|_| rng.random_range(-1.0..=1.0)).collect();
        if t[..dim].iter().all(|x| x.abs() >= START_REJECT_TOL) {
            return ParamVector { dim, t };
        }
    }
}

/// Random interior density matrix drawn through [`sample_interior`].
pub fn random_state<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> DensityMatrix {
    rho_of_t(&sample_interior(dim, rng)).expect("interior draw is nonzero")
}
