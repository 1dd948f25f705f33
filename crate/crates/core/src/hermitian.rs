//! Complex Hermitian matrix arithmetic, orthonormal operator bases, Stokes
//! decomposition and state metrics.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Dense complex matrix used throughout the crate.
pub type CMatrix = DMatrix<Complex64>;

/// Elementwise absolute tolerance for Hermiticity and unit trace.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Allowance on the smallest eigenvalue of a positive semidefinite matrix.
pub const PSD_TOL: f64 = 1e-10;
/// Default cap on the number of qubits for basis and POVM construction.
pub const DEFAULT_MAX_QUBITS: usize = 8;

const EIG_EPS: f64 = 1e-15;
const EIG_MAX_ITERS: usize = 10_000;

pub(crate) const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub(crate) const ONE: Complex64 = Complex64::new(1.0, 0.0);
pub(crate) const I: Complex64 = Complex64::new(0.0, 1.0);

/// A square complex matrix equal to its conjugate transpose.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix(CMatrix);

impl HermitianMatrix {
    /// Validates squareness and Hermiticity within [`HERMITIAN_TOL`].
    pub fn new(m: CMatrix) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::Dimension {
                expected: m.nrows(),
                actual: m.ncols(),
            });
        }
        let asym = max_asymmetry(&m);
        if asym > HERMITIAN_TOL {
            return Err(Error::NotHermitian(asym));
        }
        Ok(Self(m))
    }

    /// Averages `m` with its adjoint, so the result is exactly Hermitian.
    pub fn hermitize(m: &CMatrix) -> Self {
        Self((m + m.adjoint()).scale(0.5))
    }

    pub(crate) fn from_unchecked(m: CMatrix) -> Self {
        Self(m)
    }

    pub fn zeros(dim: usize) -> Self {
        Self(CMatrix::zeros(dim, dim))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_inner(self) -> CMatrix {
        self.0
    }

    pub fn trace(&self) -> f64 {
        self.0.diagonal().iter().map(|z| z.re).sum()
    }
}

/// Hermitian, unit-trace, positive semidefinite matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix(CMatrix);

impl DensityMatrix {
    /// Validates all three density-matrix invariants.
    pub fn new(m: CMatrix) -> Result<Self> {
        let h = HermitianMatrix::new(m)?;
        let tr = h.trace();
        if (tr - 1.0).abs() > HERMITIAN_TOL {
            return Err(Error::InvalidState(format!("trace is {tr}, expected 1")));
        }
        let min = eig_hermitian(&h)?[0];
        if min < -PSD_TOL {
            return Err(Error::InvalidState(format!(
                "smallest eigenvalue {min:.3e} is negative"
            )));
        }
        Ok(Self(h.0))
    }

    /// Trusts the caller that `m` already satisfies the invariants
    /// (e.g. a normalized Gram matrix).
    pub(crate) fn from_unchecked(m: CMatrix) -> Self {
        Self(m)
    }

    /// `|psi><psi|` for a (not necessarily normalized) ket.
    pub fn pure(ket: &[Complex64]) -> Result<Self> {
        let norm2: f64 = ket.iter().map(|z| z.norm_sqr()).sum();
        if norm2 <= 0.0 {
            return Err(Error::InvalidState("zero state vector".into()));
        }
        let v = DVector::from_column_slice(ket).unscale(norm2.sqrt());
        Ok(Self(&v * v.adjoint()))
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self(CMatrix::identity(dim, dim).unscale(dim as f64))
    }

    /// Diagonal state from real populations summing to one.
    pub fn diagonal(populations: &[f64]) -> Result<Self> {
        let d = populations.len();
        let m = CMatrix::from_fn(d, d, |i, j| {
            if i == j {
                Complex64::new(populations[i], 0.0)
            } else {
                ZERO
            }
        });
        Self::new(m)
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_inner(self) -> CMatrix {
        self.0
    }

    pub fn as_hermitian(&self) -> HermitianMatrix {
        HermitianMatrix(self.0.clone())
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        Ok(eig_hermitian(&self.as_hermitian())?[0])
    }
}

/// Real coefficients of a Hermitian matrix in an orthonormal operator basis.
#[derive(Debug, Clone, PartialEq)]
pub struct StokesVector(pub Vec<f64>);

impl StokesVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

pub(crate) fn max_asymmetry(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// `tr(A B)` without forming the product.
pub fn trace_product(a: &CMatrix, b: &CMatrix) -> Complex64 {
    let n = a.nrows();
    let mut acc = ZERO;
    for i in 0..n {
        for j in 0..n {
            acc += a[(i, j)] * b[(j, i)];
        }
    }
    acc
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

pub fn frobenius_distance(a: &CMatrix, b: &CMatrix) -> f64 {
    (a - b).norm()
}

fn pauli(index: usize) -> CMatrix {
    match index {
        0 => CMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, ONE]),
        1 => CMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO]),
        2 => CMatrix::from_row_slice(2, 2, &[ZERO, -I, I, ZERO]),
        3 => CMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE]),
        _ => unreachable!("Pauli index out of range"),
    }
}

/// Normalized Pauli tensor products `σ_{i1}⊗…⊗σ_{in} / √(2^n)`, ordered
/// lexicographically over the Pauli indices with the identity first.
pub fn pauli_basis(n_qubits: usize) -> Result<Vec<HermitianMatrix>> {
    pauli_basis_with_cap(n_qubits, DEFAULT_MAX_QUBITS)
}

pub fn pauli_basis_with_cap(n_qubits: usize, max_qubits: usize) -> Result<Vec<HermitianMatrix>> {
    if n_qubits == 0 {
        return Err(Error::InvalidArgument("n_qubits must be at least 1".into()));
    }
    if n_qubits > max_qubits {
        return Err(Error::Capacity {
            requested: n_qubits,
            max: max_qubits,
        });
    }
    let dim = 1usize << n_qubits;
    let scale = (dim as f64).sqrt();
    let paulis: Vec<CMatrix> = (0..4).map(pauli).collect();
    let mut out = Vec::with_capacity(dim * dim);
    for code in 0..dim * dim {
        // base-4 digits of `code`, most significant qubit first
        let mut m = CMatrix::identity(1, 1);
        for q in (0..n_qubits).rev() {
            let digit = (code >> (2 * q)) & 3;
            m = m.kronecker(&paulis[digit]);
        }
        out.push(HermitianMatrix(m.unscale(scale)));
    }
    Ok(out)
}

/// Checks `tr(G_i G_j) = δ_ij` within `tol` for all pairs.
pub fn check_orthonormal(basis: &[HermitianMatrix], tol: f64) -> Result<()> {
    for (i, gi) in basis.iter().enumerate() {
        for (j, gj) in basis.iter().enumerate().skip(i) {
            let v = trace_product(gi.matrix(), gj.matrix());
            let expected = if i == j { 1.0 } else { 0.0 };
            if (v.re - expected).abs() > tol || v.im.abs() > tol {
                return Err(Error::InvalidBasis { i, j, value: v.re });
            }
        }
    }
    Ok(())
}

/// Coefficients `S_ν = tr(Γ_ν ρ)`. With `validate` set, the basis is first
/// checked for orthonormality.
pub fn stokes_decompose(
    rho: &HermitianMatrix,
    basis: &[HermitianMatrix],
    validate: bool,
) -> Result<StokesVector> {
    let d = rho.dim();
    if basis.len() != d * d {
        return Err(Error::Dimension {
            expected: d * d,
            actual: basis.len(),
        });
    }
    if validate {
        check_orthonormal(basis, 1e-10)?;
    }
    let mut coeffs = Vec::with_capacity(basis.len());
    for g in basis {
        if g.dim() != d {
            return Err(Error::Dimension {
                expected: d,
                actual: g.dim(),
            });
        }
        let v = trace_product(g.matrix(), rho.matrix());
        if v.im.abs() >= 1e-10 {
            return Err(Error::Numerical(format!(
                "Stokes coefficient has imaginary part {:.3e}",
                v.im
            )));
        }
        coeffs.push(v.re);
    }
    Ok(StokesVector(coeffs))
}

/// `Σ_ν s_ν Γ_ν`. Hermitian by construction; neither positivity nor unit
/// trace is implied.
pub fn stokes_reconstruct(s: &StokesVector, basis: &[HermitianMatrix]) -> Result<HermitianMatrix> {
    if s.len() != basis.len() || basis.is_empty() {
        return Err(Error::Dimension {
            expected: basis.len(),
            actual: s.len(),
        });
    }
    let d = basis[0].dim();
    let mut acc = CMatrix::zeros(d, d);
    for (c, g) in s.0.iter().zip(basis) {
        if g.dim() != d {
            return Err(Error::Dimension {
                expected: d,
                actual: g.dim(),
            });
        }
        acc += g.matrix().scale(*c);
    }
    Ok(HermitianMatrix::hermitize(&acc))
}

/// `tr(ρ²)`, clamped to `[0, 1 + 1e-10]`.
pub fn purity(rho: &DensityMatrix) -> f64 {
    // tr(ρ²) = Σ |ρ_ij|² for Hermitian ρ
    let p: f64 = rho.matrix().iter().map(|z| z.norm_sqr()).sum();
    p.clamp(0.0, 1.0 + 1e-10)
}

/// Eigenvalues in ascending order.
pub fn eig_hermitian(h: &HermitianMatrix) -> Result<Vec<f64>> {
    let eig = SymmetricEigen::try_new(h.matrix().clone(), EIG_EPS, EIG_MAX_ITERS)
        .ok_or_else(|| Error::Numerical("Hermitian eigensolver did not converge".into()))?;
    let mut vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    vals.sort_by(|a, b| a.total_cmp(b));
    Ok(vals)
}

/// Eigenvalues (ascending) together with the matching eigenvectors as columns.
pub fn eigh(h: &HermitianMatrix) -> Result<(Vec<f64>, CMatrix)> {
    let eig = SymmetricEigen::try_new(h.matrix().clone(), EIG_EPS, EIG_MAX_ITERS)
        .ok_or_else(|| Error::Numerical("Hermitian eigensolver did not converge".into()))?;
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let vals = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vecs = CMatrix::from_fn(h.dim(), h.dim(), |i, j| eig.eigenvectors[(i, order[j])]);
    Ok((vals, vecs))
}

fn psd_sqrt(h: &HermitianMatrix) -> Result<CMatrix> {
    let (vals, vecs) = eigh(h)?;
    let d = h.dim();
    let root = CMatrix::from_fn(d, d, |i, j| {
        if i == j {
            Complex64::new(vals[i].max(0.0).sqrt(), 0.0)
        } else {
            ZERO
        }
    });
    Ok(&vecs * root * vecs.adjoint())
}

/// Uhlmann fidelity `(tr √(√ρ σ √ρ))²`, clamped to `[0, 1]`.
pub fn fidelity(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    if rho.dim() != sigma.dim() {
        return Err(Error::Dimension {
            expected: rho.dim(),
            actual: sigma.dim(),
        });
    }
    let root = psd_sqrt(&rho.as_hermitian())?;
    let inner = HermitianMatrix::hermitize(&(&root * sigma.matrix() * &root));
    let s: f64 = eig_hermitian(&inner)?.iter().map(|l| l.max(0.0).sqrt()).sum();
    Ok((s * s).clamp(0.0, 1.0))
}
