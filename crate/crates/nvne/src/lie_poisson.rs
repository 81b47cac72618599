//! Hamiltonian structure of the nonlinear von Neumann equation.
//!
//! States live on the dual of `u(n)` with the Lie-Poisson bracket
//! `{A, B}(ρ) = -i Tr(ρ [∇A, ∇B])`, where `∇A` is the Hermitian gradient
//! defined by `dA = Tr(∇A dρ)`. With the 1-homogeneous Hamiltonian function
//! `<H>_f = (Tr ρ) Tr[f(ρ / Tr ρ) H]` the Hamiltonian flow is
//! `i dρ/dt = [Ĥ(ρ), ρ] = [H, f(ρ)]` on normalized states.
//!
//! All operators that act through a commutator with `ρ` are assembled in the
//! eigenbasis of `ρ` with first divided differences of `f`
//! (Daleckii-Krein), which also covers non-analytic `f` such as `x^q` with
//! non-integer `q`.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;

use crate::deformation::DeformationFunction;
use crate::error::{NvneError, Result};
use crate::hermitian::{
    commutator, decompose_matrix, decompose_state, hermitize, max_hermitian_deviation, trace_product,
    CMatrix, DensityMatrix, HermitianOperator, Operator, SpectralDecomposition, TOL_HERM,
};

/// Eigenvalue pairs closer than this use `f'` instead of a divided difference.
pub const DEGENERACY_TOL: f64 = 1e-10;

/// Central-difference step on matrix-element coordinates.
pub const FD_STEP: f64 = 1e-6;

/// Analytic gradients deviating from Hermitian by more than this are rejected.
pub const GRADIENT_HERM_TOL: f64 = 1e-6;

fn check_dims(rho: &impl Operator, h: &HermitianOperator) -> Result<()> {
    if rho.dim() != h.dim() {
        return Err(NvneError::DimensionMismatch {
            expected: rho.dim(),
            actual: h.dim(),
        });
    }
    Ok(())
}

/// `<H>_f = (Tr ρ) Tr[f(ρ / Tr ρ) H]` for any positive semidefinite `ρ`.
pub fn hamiltonian_function(
    rho: &impl Operator,
    h: &HermitianOperator,
    f: &DeformationFunction,
) -> Result<f64> {
    check_dims(rho, h)?;
    let t = rho.trace();
    if t.abs() < TOL_HERM {
        return Err(NvneError::ZeroTrace { trace: t });
    }
    let s = decompose_state(&hermitize(rho.matrix()))?;
    let scaled: Vec<f64> = s
        .eigenvalues
        .iter()
        .map(|&l| f.eval(l / t))
        .collect::<Result<_>>()?;
    Ok(t * trace_product(&s.recompose_with(&scaled), h.matrix()))
}

/// Divided-difference kernel `K_ij = H̃_ij Δ_ij` in the eigenbasis of `ρ`.
///
/// Non-degenerate pairs use `(f(λ_i) - f(λ_j)) / (λ_i - λ_j)`, degenerate pairs
/// (including the diagonal) `f'` at the common eigenvalue. `on_infinite`
/// decides what happens where `f'` diverges.
fn kernel_in_eigenbasis(
    s: &SpectralDecomposition,
    h: &CMatrix,
    f: &DeformationFunction,
    on_infinite: InfiniteDerivative,
) -> Result<CMatrix> {
    let h_tilde = s.to_eigenbasis(h);
    let lam = &s.eigenvalues;
    let n = lam.len();
    let fvals = lam.iter().map(|&l| f.eval(l)).collect::<Result<Vec<_>>>()?;
    let mut k = CMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let delta = if (lam[i] - lam[j]).abs() > DEGENERACY_TOL {
                (fvals[i] - fvals[j]) / (lam[i] - lam[j])
            } else {
                let d = f.derivative(0.5 * (lam[i] + lam[j]))?;
                if d.is_finite() {
                    d
                } else {
                    match on_infinite {
                        InfiniteDerivative::Zero => 0.0,
                        InfiniteDerivative::Fail => {
                            return Err(NvneError::domain(format!(
                                "f' diverges at eigenvalue {:e}; the effective Hamiltonian is undefined on the kernel of rho",
                                lam[i]
                            )))
                        }
                    }
                }
            };
            k[(i, j)] = h_tilde[(i, j)] * delta;
            if i != j {
                k[(j, i)] = h_tilde[(j, i)] * delta;
            }
        }
    }
    Ok(k)
}

#[derive(Clone, Copy)]
enum InfiniteDerivative {
    Zero,
    Fail,
}

/// The effective Hamiltonian `Ĥ(ρ) = δ<H>_f / δρ` at a normalized state.
///
/// Includes the scalar part `(Tr[f(ρ)H] - Tr[ρ f'(ρ) H]) 𝟙`, so that
/// `Tr[ρ Ĥ(ρ)] = <H>_f` holds exactly.
pub fn effective_hamiltonian(
    rho: &DensityMatrix,
    h: &HermitianOperator,
    f: &DeformationFunction,
) -> Result<HermitianOperator> {
    check_dims(rho, h)?;
    let s = rho.spectral()?;
    effective_from_spectrum(&s, h, f).map(HermitianOperator::from_hermitian_unchecked)
}

fn effective_from_spectrum(
    s: &SpectralDecomposition,
    h: &HermitianOperator,
    f: &DeformationFunction,
) -> Result<CMatrix> {
    let mut k = kernel_in_eigenbasis(s, h.matrix(), f, InfiniteDerivative::Fail)?;
    let n = s.dim();
    let mut f_h = 0.0;
    let mut rho_fp_h = 0.0;
    let h_tilde = s.to_eigenbasis(h.matrix());
    for i in 0..n {
        let l = s.eigenvalues[i];
        f_h += f.eval(l)? * h_tilde[(i, i)].re;
        rho_fp_h += l * f.derivative(l)? * h_tilde[(i, i)].re;
    }
    let shift = Complex64::new(f_h - rho_fp_h, 0.0);
    for i in 0..n {
        k[(i, i)] += shift;
    }
    Ok(s.from_eigenbasis(&k))
}

/// A generator `G` with `[G, ρ] = [H, f(ρ)]`.
///
/// Entries in the eigenbasis of `ρ` are `H̃_ij Δ_ij` with the divided
/// differences of `f`; where `f'` diverges on a degenerate block (`λ = 0`,
/// `q < 1`) the entry is set to zero, which leaves the commutator unchanged.
pub fn generator(rho: &DensityMatrix, h: &HermitianOperator, f: &DeformationFunction) -> Result<HermitianOperator> {
    check_dims(rho, h)?;
    let s = rho.spectral()?;
    generator_from_spectrum(&s, h.matrix(), f).map(HermitianOperator::from_hermitian_unchecked)
}

pub(crate) fn generator_from_spectrum(s: &SpectralDecomposition, h: &CMatrix, f: &DeformationFunction) -> Result<CMatrix> {
    let k = kernel_in_eigenbasis(s, h, f, InfiniteDerivative::Zero)?;
    Ok(hermitize(&s.from_eigenbasis(&k)))
}

/// `C_n = Tr ρ^n = Σ λ_i^n`.
pub fn casimir(rho: &DensityMatrix, n: u32) -> Result<f64> {
    if n == 0 {
        return Err(NvneError::domain("Casimir index must be at least 1"));
    }
    let ev = rho.eigenvalues()?;
    Ok(ev.iter().map(|l| l.powi(n as i32)).sum())
}

/// The q-average `<H>_q = Tr(ρ^q H)`.
pub fn q_average(rho: &DensityMatrix, h: &HermitianOperator, q: f64) -> Result<f64> {
    check_dims(rho, h)?;
    let f = DeformationFunction::power(q)?;
    let s = rho.spectral()?;
    let vals = s.eigenvalues.iter().map(|&l| f.eval(l)).collect::<Result<Vec<_>>>()?;
    Ok(trace_product(&s.recompose_with(&vals), h.matrix()))
}

type ValueFn = dyn Fn(&CMatrix) -> Result<f64> + Send + Sync;
type GradientFn = dyn Fn(&CMatrix) -> Result<CMatrix> + Send + Sync;

/// A real functional on Hermitian matrices together with its gradient.
///
/// Functionals are evaluated on arbitrary Hermitian matrices (finite
/// differencing leaves the unit-trace surface). The gradient is analytic when
/// one was supplied, else central differences with step [`FD_STEP`].
#[derive(Clone)]
pub struct ObservableFunctional {
    name: String,
    value: Arc<ValueFn>,
    gradient: Option<Arc<GradientFn>>,
}

impl fmt::Debug for ObservableFunctional {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ObservableFunctional")
            .field("name", &self.name)
            .field("analytic_gradient", &self.gradient.is_some())
            .finish()
    }
}

impl ObservableFunctional {
    pub fn from_fn(name: impl Into<String>, value: impl Fn(&CMatrix) -> Result<f64> + Send + Sync + 'static) -> Self {
        Self {
            name: name.into(),
            value: Arc::new(value),
            gradient: None,
        }
    }

    pub fn with_gradient(mut self, gradient: impl Fn(&CMatrix) -> Result<CMatrix> + Send + Sync + 'static) -> Self {
        self.gradient = Some(Arc::new(gradient));
        self
    }

    /// Drops the analytic gradient so that finite differences are used.
    pub fn numerical(mut self) -> Self {
        self.gradient = None;
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn has_analytic_gradient(&self) -> bool {
        self.gradient.is_some()
    }

    /// `Tr(ρ X)`.
    pub fn linear(x: &HermitianOperator) -> Self {
        let xv = x.matrix().clone();
        let xg = xv.clone();
        Self::from_fn("Tr(rho X)", move |m| Ok(trace_product(m, &xv))).with_gradient(move |_| Ok(xg.clone()))
    }

    /// `C_n = Tr ρ^n`, gradient `n ρ^(n-1)`.
    pub fn casimir(n: u32) -> Self {
        assert!(n >= 1, "Casimir index must be at least 1");
        Self::from_fn(format!("C_{n}"), move |m| Ok(matrix_power(m, n).trace().re)).with_gradient(move |m| {
            Ok(matrix_power(m, n - 1) * Complex64::new(n as f64, 0.0))
        })
    }

    /// `Tr(ρ^q H)` with the Daleckii-Krein gradient `V (H̃ ∘ Δ) V^dag`.
    pub fn power_average(h: &HermitianOperator, q: f64) -> Result<Self> {
        let f = DeformationFunction::power(q)?;
        let hv = h.matrix().clone();
        let hg = hv.clone();
        let fv = f.clone();
        let integer = q.fract() == 0.0;
        Ok(Self::from_fn(format!("<H>_{q}"), move |m| {
            if integer {
                Ok(trace_product(&matrix_power(m, q as u32), &hv))
            } else {
                let s = decompose_matrix(&hermitize(m))?;
                let vals = s.eigenvalues.iter().map(|&l| fv.eval(l)).collect::<Result<Vec<_>>>()?;
                Ok(trace_product(&s.recompose_with(&vals), &hv))
            }
        })
        .with_gradient(move |m| {
            let s = decompose_matrix(&hermitize(m))?;
            let k = kernel_in_eigenbasis(&s, &hg, &f, InfiniteDerivative::Fail)?;
            Ok(s.from_eigenbasis(&k))
        }))
    }

    /// The homogeneous Hamiltonian function `<H>_f`; its gradient is the
    /// effective Hamiltonian at `ρ / Tr ρ`.
    pub fn hamiltonian(h: &HermitianOperator, f: &DeformationFunction) -> Self {
        let hv = h.clone();
        let hg = h.clone();
        let fv = f.clone();
        let fg = f.clone();
        Self::from_fn("<H>_f", move |m| {
            hamiltonian_function(&HermitianOperator::from_hermitian_unchecked(m.clone()), &hv, &fv)
        })
        .with_gradient(move |m| {
            let t = m.trace().re;
            if t.abs() < TOL_HERM {
                return Err(NvneError::ZeroTrace { trace: t });
            }
            let s = decompose_matrix(&hermitize(&(m / Complex64::new(t, 0.0))))?;
            effective_from_spectrum(&s, &hg, &fg)
        })
    }

    /// Pointwise product `A B`; gradient by the Leibniz rule when both factors
    /// have analytic gradients.
    pub fn product(a: &ObservableFunctional, b: &ObservableFunctional) -> Self {
        let (av, bv) = (a.clone(), b.clone());
        let out = Self::from_fn(format!("({})*({})", a.name, b.name), move |m| Ok(av.evaluate(m)? * bv.evaluate(m)?));
        if a.has_analytic_gradient() && b.has_analytic_gradient() {
            let (ag, bg) = (a.clone(), b.clone());
            out.with_gradient(move |m| {
                let (va, vb) = (ag.evaluate(m)?, bg.evaluate(m)?);
                let (ga, gb) = (ag.gradient(m)?, bg.gradient(m)?);
                Ok(gb.matrix() * Complex64::new(va, 0.0) + ga.matrix() * Complex64::new(vb, 0.0))
            })
        } else {
            out
        }
    }

    pub fn evaluate(&self, rho: &CMatrix) -> Result<f64> {
        (self.value)(rho)
    }

    pub fn gradient(&self, rho: &CMatrix) -> Result<HermitianOperator> {
        match &self.gradient {
            Some(g) => {
                let m = g(rho)?;
                let deviation = max_hermitian_deviation(&m);
                if !(deviation <= GRADIENT_HERM_TOL) {
                    return Err(NvneError::GradientFailure(format!(
                        "gradient of {} is not Hermitian (deviation {deviation:e})",
                        self.name
                    )));
                }
                Ok(HermitianOperator::from_hermitian_unchecked(m))
            }
            None => self.finite_difference_gradient(rho),
        }
    }

    /// Central differences along the Hermitian coordinate directions
    /// `E_ii`, `E_ij + E_ji` and `i(E_ij - E_ji)`.
    pub fn finite_difference_gradient(&self, rho: &CMatrix) -> Result<HermitianOperator> {
        let n = rho.nrows();
        let h = FD_STEP;
        let mut grad = CMatrix::zeros(n, n);
        let probe = |dir: &CMatrix| -> Result<f64> {
            let plus = self.evaluate(&(rho + dir * Complex64::new(h, 0.0)))?;
            let minus = self.evaluate(&(rho - dir * Complex64::new(h, 0.0)))?;
            let d = (plus - minus) / (2.0 * h);
            if !d.is_finite() {
                return Err(NvneError::GradientFailure(format!(
                    "non-finite difference quotient for {}",
                    self.name
                )));
            }
            Ok(d)
        };
        for i in 0..n {
            let mut e = CMatrix::zeros(n, n);
            e[(i, i)] = Complex64::new(1.0, 0.0);
            grad[(i, i)] = Complex64::new(probe(&e)?, 0.0);
            for j in (i + 1)..n {
                let mut re = CMatrix::zeros(n, n);
                re[(i, j)] = Complex64::new(1.0, 0.0);
                re[(j, i)] = Complex64::new(1.0, 0.0);
                let mut im = CMatrix::zeros(n, n);
                im[(i, j)] = Complex64::new(0.0, 1.0);
                im[(j, i)] = Complex64::new(0.0, -1.0);
                let dr = probe(&re)?;
                let di = probe(&im)?;
                // dA along E_ij+E_ji is 2 Re G_ij, along i(E_ij-E_ji) it is 2 Im G_ij
                let g = Complex64::new(0.5 * dr, 0.5 * di);
                grad[(i, j)] = g;
                grad[(j, i)] = g.conj();
            }
        }
        let deviation = max_hermitian_deviation(&grad);
        if deviation > GRADIENT_HERM_TOL {
            return Err(NvneError::GradientFailure(format!(
                "finite-difference gradient of {} is not Hermitian (deviation {deviation:e})",
                self.name
            )));
        }
        Ok(HermitianOperator::from_hermitian_unchecked(grad))
    }
}

/// `{A, B}(ρ) = -i Tr(ρ [∇A, ∇B])`.
pub fn poisson_bracket(a: &ObservableFunctional, b: &ObservableFunctional, rho: &DensityMatrix) -> Result<f64> {
    let ga = a.gradient(rho.matrix())?;
    let gb = b.gradient(rho.matrix())?;
    Ok(bracket_of_gradients(rho.matrix(), ga.matrix(), gb.matrix()))
}

pub(crate) fn bracket_of_gradients(rho: &CMatrix, ga: &CMatrix, gb: &CMatrix) -> f64 {
    let c = commutator(ga, gb);
    // Tr(ρ[X,Y]) is purely imaginary for Hermitian arguments; -i z = Im z
    let mut z = Complex64::new(0.0, 0.0);
    let n = rho.nrows();
    for i in 0..n {
        for k in 0..n {
            z += rho[(i, k)] * c[(k, i)];
        }
    }
    z.im
}

pub(crate) fn matrix_power(m: &CMatrix, n: u32) -> CMatrix {
    let dim = m.nrows();
    let mut acc = CMatrix::identity(dim, dim);
    for _ in 0..n {
        acc = &acc * m;
    }
    acc
}
