//! Hermitian matrix algebra: validated density matrices, spectral calculus,
//! Kronecker products, partial traces and the two-level Bloch parametrization.
//!
//! Every matrix function goes through an eigendecomposition. Fractional powers
//! such as `x^q` have no Taylor series at the origin, while spectral calculus
//! is exact on the spectrum for any `f`.

use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::deformation::DeformationFunction;
use crate::error::{NvneError, Result};

pub type CMatrix = DMatrix<Complex64>;

/// Maximum elementwise `|M - M^dag|` accepted as Hermitian.
pub const TOL_HERM: f64 = 1e-12;

/// Eigenvalues in `[-CLIP_TOL, 0)` are clipped to zero during validation.
pub const CLIP_TOL: f64 = 1e-12;

const EIGEN_EPS: f64 = f64::EPSILON;
const EIGEN_MAX_ITER: usize = 10_000;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);
pub const I: Complex64 = Complex64::new(0.0, 1.0);

/// Read access to the matrix behind a validated operator.
pub trait Operator {
    fn matrix(&self) -> &CMatrix;

    fn dim(&self) -> usize {
        self.matrix().nrows()
    }

    fn trace(&self) -> f64 {
        self.matrix().trace().re
    }
}

pub fn max_hermitian_deviation(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// `(M + M^dag) / 2`.
pub fn hermitize(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()) * Complex64::new(0.5, 0.0)
}

pub fn commutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b - b * a
}

fn ensure_square(m: &CMatrix) -> Result<()> {
    if m.nrows() != m.ncols() || m.nrows() == 0 {
        return Err(NvneError::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    Ok(())
}

fn real_diagonal(values: &[f64]) -> CMatrix {
    let n = values.len();
    CMatrix::from_fn(n, n, |i, j| {
        if i == j {
            Complex64::new(values[i], 0.0)
        } else {
            ZERO
        }
    })
}

/// A Hermitian operator: Hamiltonians, observables, generators.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianOperator {
    m: CMatrix,
}

impl HermitianOperator {
    /// Validates Hermiticity within [`TOL_HERM`] and stores the symmetrized matrix.
    pub fn new(m: CMatrix) -> Result<Self> {
        Self::with_tolerance(m, TOL_HERM)
    }

    pub fn with_tolerance(m: CMatrix, tol: f64) -> Result<Self> {
        ensure_square(&m)?;
        let deviation = max_hermitian_deviation(&m);
        if !(deviation <= tol) {
            return Err(NvneError::NotHermitian { deviation, tol });
        }
        Ok(Self { m: hermitize(&m) })
    }

    /// Symmetrizes without checking; for matrices Hermitian by construction.
    pub(crate) fn from_hermitian_unchecked(m: CMatrix) -> Self {
        Self { m: hermitize(&m) }
    }

    pub fn from_real_diagonal(values: &[f64]) -> Self {
        Self {
            m: real_diagonal(values),
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            m: CMatrix::identity(dim, dim),
        }
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            m: CMatrix::zeros(dim, dim),
        }
    }

    pub fn pauli_x() -> Self {
        Self {
            m: CMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO]),
        }
    }

    pub fn pauli_y() -> Self {
        Self {
            m: CMatrix::from_row_slice(2, 2, &[ZERO, -I, I, ZERO]),
        }
    }

    pub fn pauli_z() -> Self {
        Self::from_real_diagonal(&[1.0, -1.0])
    }

    /// `H = -mu sigma_z`, the spin in a field along z.
    pub fn spin_z(mu: f64) -> Self {
        Self::from_real_diagonal(&[-mu, mu])
    }

    pub fn into_matrix(self) -> CMatrix {
        self.m
    }

    pub fn scale(&self, c: f64) -> Self {
        Self {
            m: &self.m * Complex64::new(c, 0.0),
        }
    }

    pub fn add(&self, other: &HermitianOperator) -> Result<Self> {
        if self.dim() != other.dim() {
            return Err(NvneError::DimensionMismatch {
                expected: self.dim(),
                actual: other.dim(),
            });
        }
        Ok(Self {
            m: &self.m + &other.m,
        })
    }

    /// `Re Tr(self * other)`.
    pub fn trace_product(&self, other: &CMatrix) -> f64 {
        trace_product(&self.m, other)
    }

    pub fn tensor(&self, other: &HermitianOperator) -> HermitianOperator {
        HermitianOperator {
            m: tensor_product(self, other),
        }
    }
}

impl Operator for HermitianOperator {
    fn matrix(&self) -> &CMatrix {
        &self.m
    }
}

/// `Re Tr(A B)` without forming the product.
pub fn trace_product(a: &CMatrix, b: &CMatrix) -> f64 {
    let n = a.nrows();
    let mut acc = 0.0;
    for i in 0..n {
        for k in 0..n {
            acc += (a[(i, k)] * b[(k, i)]).re;
        }
    }
    acc
}

/// A quantum state: Hermitian, unit trace, positive semidefinite.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    m: CMatrix,
}

impl DensityMatrix {
    /// Validates with the default tolerance [`TOL_HERM`]. See [`validate_density`].
    pub fn new(m: CMatrix) -> Result<Self> {
        validate_density(&m, TOL_HERM)
    }

    /// For matrices produced by unitary conjugation, partial traces or convex
    /// combinations of valid states. Only symmetrizes.
    pub(crate) fn from_trusted(m: CMatrix) -> Self {
        let m = hermitize(&m);
        debug_assert!((m.trace().re - 1.0).abs() < 1e-8, "trace drifted: {}", m.trace());
        Self { m }
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self {
            m: CMatrix::identity(dim, dim) * Complex64::new(1.0 / dim as f64, 0.0),
        }
    }

    /// `diag(p)`; `p` must be a probability vector.
    pub fn diagonal(p: &[f64]) -> Result<Self> {
        validate_density(&real_diagonal(p), TOL_HERM)
    }

    /// `|ψ><ψ|` for a (not necessarily normalized) vector.
    pub fn pure(amplitudes: &[Complex64]) -> Result<Self> {
        let norm2: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        if amplitudes.is_empty() || norm2 < TOL_HERM {
            return Err(NvneError::ZeroTrace { trace: norm2 });
        }
        let n = amplitudes.len();
        let m = CMatrix::from_fn(n, n, |i, j| amplitudes[i] * amplitudes[j].conj() / norm2);
        Ok(Self::from_trusted(m))
    }

    pub fn into_matrix(self) -> CMatrix {
        self.m
    }

    pub fn as_operator(&self) -> HermitianOperator {
        HermitianOperator { m: self.m.clone() }
    }

    pub fn purity(&self) -> f64 {
        trace_product(&self.m, &self.m)
    }

    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        Ok(self.spectral()?.eigenvalues)
    }

    /// Ascending spectrum and eigenvectors, with eigenvalues below
    /// [`SPECTRAL_FLOOR`] in magnitude set to zero.
    pub fn spectral(&self) -> Result<SpectralDecomposition> {
        decompose_state(&self.m)
    }

    pub fn tensor(&self, other: &DensityMatrix) -> DensityMatrix {
        DensityMatrix {
            m: tensor_product(self, other),
        }
    }

    /// Bloch vector `(Tr ρσx, Tr ρσy, Tr ρσz)` of a two-level state.
    pub fn bloch_vector(&self) -> Result<[f64; 3]> {
        if self.dim() != 2 {
            return Err(NvneError::DimensionMismatch {
                expected: 2,
                actual: self.dim(),
            });
        }
        let m = &self.m;
        Ok([
            2.0 * m[(0, 1)].re,
            -2.0 * m[(0, 1)].im,
            (m[(0, 0)] - m[(1, 1)]).re,
        ])
    }
}

impl Operator for DensityMatrix {
    fn matrix(&self) -> &CMatrix {
        &self.m
    }
}

impl fmt::Display for DensityMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.m)
    }
}

/// Symmetrizes, clips eigenvalues in `[-tol, 0)`, renormalizes the trace.
pub fn validate_density(m: &CMatrix, tol: f64) -> Result<DensityMatrix> {
    if !(tol > 0.0) {
        return Err(NvneError::domain("validation tolerance must be positive"));
    }
    ensure_square(m)?;
    let deviation = max_hermitian_deviation(m);
    if !(deviation <= tol) {
        return Err(NvneError::NotHermitian { deviation, tol });
    }
    let h = hermitize(m);
    let trace = h.trace().re;
    if trace.abs() < tol {
        return Err(NvneError::ZeroTrace { trace });
    }
    let spectral = spectral_decompose(&HermitianOperator { m: h.clone() })?;
    let min = spectral.eigenvalues[0];
    if min < -tol {
        return Err(NvneError::NotPositive {
            eigenvalue: min,
            tol,
        });
    }
    let mut out = if min < 0.0 {
        let clipped: Vec<f64> = spectral.eigenvalues.iter().map(|&l| l.max(0.0)).collect();
        spectral.recompose_with(&clipped)
    } else {
        h
    };
    let t = out.trace().re;
    if t.abs() < tol {
        return Err(NvneError::ZeroTrace { trace: t });
    }
    out *= Complex64::new(1.0 / t, 0.0);
    Ok(DensityMatrix { m: hermitize(&out) })
}

/// Eigenvalues in ascending order with matching orthonormal eigenvector columns.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: CMatrix,
}

impl SpectralDecomposition {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// `V diag(values) V^dag` for real `values` indexed like the eigenvalues.
    pub fn recompose_with(&self, values: &[f64]) -> CMatrix {
        let v = &self.eigenvectors;
        let mut scaled = v.clone();
        for (j, &val) in values.iter().enumerate() {
            scaled.column_mut(j).scale_mut(val);
        }
        scaled * v.adjoint()
    }

    /// `V diag(values) V^dag` for complex `values`; used for unitaries.
    pub fn recompose_complex(&self, values: &[Complex64]) -> CMatrix {
        let v = &self.eigenvectors;
        let mut scaled = v.clone();
        for (j, &val) in values.iter().enumerate() {
            for i in 0..scaled.nrows() {
                scaled[(i, j)] *= val;
            }
        }
        scaled * v.adjoint()
    }

    pub fn reconstruct(&self) -> CMatrix {
        self.recompose_with(&self.eigenvalues)
    }

    /// `V^dag A V`: an operator expressed in this eigenbasis.
    pub fn to_eigenbasis(&self, a: &CMatrix) -> CMatrix {
        self.eigenvectors.adjoint() * a * &self.eigenvectors
    }

    /// `V A V^dag`: back from the eigenbasis.
    pub fn from_eigenbasis(&self, a: &CMatrix) -> CMatrix {
        &self.eigenvectors * a * self.eigenvectors.adjoint()
    }

    /// `exp(-i s A)` for the decomposed operator `A`.
    pub fn unitary(&self, s: f64) -> CMatrix {
        let phases: Vec<Complex64> = self
            .eigenvalues
            .iter()
            .map(|&l| Complex64::from_polar(1.0, -l * s))
            .collect();
        self.recompose_complex(&phases)
    }
}

pub fn spectral_decompose(a: &HermitianOperator) -> Result<SpectralDecomposition> {
    decompose_matrix(&a.m)
}

/// Eigenvalues of a state closer than this to zero are round-off and snap to
/// zero. Fractional powers would otherwise turn `1e-17` into `3e-9`, and
/// `f'` at such a value is huge. Larger than [`CLIP_TOL`] because a zero
/// eigenvalue wanders by about 1e-17 per step over long runs.
pub const SPECTRAL_FLOOR: f64 = 1e-10;

/// Decomposition of a state with round-off eigenvalues snapped to zero.
pub(crate) fn decompose_state(m: &CMatrix) -> Result<SpectralDecomposition> {
    let mut s = decompose_matrix(m)?;
    for l in &mut s.eigenvalues {
        if l.abs() < SPECTRAL_FLOOR {
            *l = 0.0;
        }
    }
    Ok(s)
}

pub(crate) fn decompose_matrix(m: &CMatrix) -> Result<SpectralDecomposition> {
    let n = m.nrows();
    if n == 1 {
        return Ok(SpectralDecomposition {
            eigenvalues: vec![m[(0, 0)].re],
            eigenvectors: CMatrix::identity(1, 1),
        });
    }
    let eig = SymmetricEigen::try_new(m.clone(), EIGEN_EPS, EIGEN_MAX_ITER)
        .ok_or_else(|| NvneError::NumericalFailure("eigensolver did not converge".into()))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let eigenvalues: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    if eigenvalues.iter().any(|l| !l.is_finite()) {
        return Err(NvneError::NumericalFailure("non-finite eigenvalue".into()));
    }
    let eigenvectors = CMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
    Ok(SpectralDecomposition {
        eigenvalues,
        eigenvectors,
    })
}

/// `f(A) = V diag(f(λ_i)) V^dag`.
pub fn matrix_function(s: &SpectralDecomposition, f: &DeformationFunction) -> Result<HermitianOperator> {
    let values = s
        .eigenvalues
        .iter()
        .map(|&l| f.eval(l))
        .collect::<Result<Vec<_>>>()?;
    Ok(HermitianOperator::from_hermitian_unchecked(s.recompose_with(&values)))
}

/// `Tr f(A) = Σ f(λ_i)`.
pub fn trace_function(s: &SpectralDecomposition, f: &DeformationFunction) -> Result<f64> {
    s.eigenvalues.iter().map(|&l| f.eval(l)).sum()
}

/// Kronecker product with the first factor on the slow (leftmost) index.
pub fn tensor_product(a: &impl Operator, b: &impl Operator) -> CMatrix {
    a.matrix().kronecker(b.matrix())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Subsystem {
    I,
    II,
}

/// Raw partial trace; `keep` names the factor that survives.
pub fn partial_trace_matrix(m: &CMatrix, dims: (usize, usize), keep: Subsystem) -> Result<CMatrix> {
    let (d1, d2) = dims;
    if m.nrows() != d1 * d2 || m.ncols() != d1 * d2 {
        return Err(NvneError::DimensionMismatch {
            expected: d1 * d2,
            actual: m.nrows(),
        });
    }
    Ok(match keep {
        Subsystem::I => CMatrix::from_fn(d1, d1, |i, j| {
            (0..d2).map(|k| m[(i * d2 + k, j * d2 + k)]).sum()
        }),
        Subsystem::II => CMatrix::from_fn(d2, d2, |k, l| {
            (0..d1).map(|i| m[(i * d2 + k, i * d2 + l)]).sum()
        }),
    })
}

pub fn partial_trace(rho: &DensityMatrix, dims: (usize, usize), keep: Subsystem) -> Result<DensityMatrix> {
    Ok(DensityMatrix::from_trusted(partial_trace_matrix(&rho.m, dims, keep)?))
}

/// Trace distance `½ Σ |eig(A - B)|`.
pub fn trace_distance(a: &impl Operator, b: &impl Operator) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(NvneError::DimensionMismatch {
            expected: a.dim(),
            actual: b.dim(),
        });
    }
    let diff = hermitize(&(a.matrix() - b.matrix()));
    let s = decompose_matrix(&diff)?;
    Ok(0.5 * s.eigenvalues.iter().map(|l| l.abs()).sum::<f64>())
}

/// Two-level state with eigenvalues `lam`, `1 - lam`; `phi` is the polar angle
/// of the Bloch direction measured from +z, `psi` the azimuth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlochParams {
    pub lam: f64,
    pub phi: f64,
    pub psi: f64,
}

impl BlochParams {
    pub fn new(lam: f64, phi: f64, psi: f64) -> Result<Self> {
        let p = Self { lam, phi, psi };
        p.check()?;
        Ok(p)
    }

    fn check(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.lam) {
            return Err(NvneError::OutOfDomain {
                param: "lam",
                value: self.lam,
                reason: "Bloch eigenvalue must lie in [0, 1]",
            });
        }
        if !(self.phi.is_finite() && self.psi.is_finite()) {
            return Err(NvneError::domain("Bloch angles must be finite"));
        }
        Ok(())
    }
}

/// `½𝟙 + ½(2λ-1)[cos φ σz - sin φ (cos ψ σx + sin ψ σy)]`.
pub fn bloch_state(p: BlochParams) -> Result<DensityMatrix> {
    p.check()?;
    Ok(DensityMatrix::from_trusted(bloch_matrix(p.lam, p.phi, p.psi)))
}

pub(crate) fn bloch_matrix(lam: f64, phi: f64, psi: f64) -> CMatrix {
    let r = 0.5 * (2.0 * lam - 1.0);
    let (sp, cp) = phi.sin_cos();
    let (ss, cs) = psi.sin_cos();
    let x = -r * sp * cs;
    let y = -r * sp * ss;
    let z = r * cp;
    CMatrix::from_row_slice(
        2,
        2,
        &[
            Complex64::new(0.5 + z, 0.0),
            Complex64::new(x, -y),
            Complex64::new(x, y),
            Complex64::new(0.5 - z, 0.0),
        ],
    )
}

/// Normalized Bell state `(|00> + |11>)/√2`.
pub fn bell_state() -> DensityMatrix {
    let a = Complex64::new(FRAC_1_SQRT_2, 0.0);
    DensityMatrix::pure(&[a, ZERO, ZERO, a]).expect("Bell vector is nonzero")
}
