//! Nonextensive thermodynamics: Tsallis entropy `S_q`, the q-internal energy
//! `U_q = Tr ρ^q H`, the free energy `F = U_q - T S_q`, and the spin-1/2
//! equilibrium with its stability. Units with `k_B = 1`.
//!
//! The free energy coincides with the energy-Casimir stability function
//! `h(ρ) + Φ(C_1, C_q)` with `Φ = -T (C_1 - C_q) / (q - 1)`, so its extrema are
//! the candidates for dynamically stable fixed points of the nonlinear flow.

use serde::{Deserialize, Serialize};

use crate::deformation::DeformationFunction;
use crate::dynamics::{evolve, IntegratorConfig};
use crate::error::{NvneError, Result};
use crate::hermitian::{
    bloch_state, spectral_decompose, trace_distance, trace_function, BlochParams, DensityMatrix, HermitianOperator,
    Operator,
};
use crate::lie_poisson::hamiltonian_function;

/// `|q - 1|` below which the Boltzmann-Gibbs limit formulas are used.
pub const Q_ONE_TOL: f64 = 1e-8;

/// Step of the central second difference of `F(λ)`.
pub const SECOND_DIFF_STEP: f64 = 1e-5;

/// Required `|∂F/∂λ|` at a solved equilibrium.
pub const STATIONARITY_TOL: f64 = 1e-8;

fn near_one(q: f64) -> bool {
    (q - 1.0).abs() < Q_ONE_TOL
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThermoParams {
    pub q: f64,
    /// Inverse temperature.
    pub beta: f64,
    /// Field strength in `H = -μσz`.
    pub mu: f64,
}

impl ThermoParams {
    pub fn new(q: f64, beta: f64, mu: f64) -> Result<Self> {
        let p = Self { q, beta, mu };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        for (param, value) in [("q", self.q), ("beta", self.beta), ("mu", self.mu)] {
            if !(value.is_finite() && value > 0.0) {
                return Err(NvneError::OutOfDomain {
                    param,
                    value,
                    reason: "must be positive and finite",
                });
            }
        }
        Ok(())
    }

    pub fn temperature(&self) -> f64 {
        1.0 / self.beta
    }

    /// `|q - 1| β μ`, which must lie in `[0, 1)` for the spin equilibrium to exist.
    pub fn coupling(&self) -> f64 {
        (self.q - 1.0).abs() * self.beta * self.mu
    }
}

/// `Σ_i [λ_i - λ_i^q] / (q - 1)` written with `expm1` so that it stays accurate
/// as `q → 1`; the `q = 1` branch is `-Σ λ ln λ`.
fn entropy_from_spectrum(eigenvalues: &[f64], q: f64) -> f64 {
    if near_one(q) {
        return -eigenvalues
            .iter()
            .filter(|&&l| l > 0.0)
            .map(|&l| l * l.ln())
            .sum::<f64>();
    }
    -eigenvalues
        .iter()
        .filter(|&&l| l > 0.0)
        .map(|&l| l * ((q - 1.0) * l.ln()).exp_m1())
        .sum::<f64>()
        / (q - 1.0)
}

/// `S_q(ρ) = (Tr ρ - Tr ρ^q) / (q - 1)`, von Neumann entropy at `q = 1`.
pub fn tsallis_entropy(rho: &DensityMatrix, q: f64) -> Result<f64> {
    DeformationFunction::power(q)?;
    let ev = rho.eigenvalues()?;
    Ok(entropy_from_spectrum(&ev, q))
}

/// `U_q = Tr(ρ^q H)`.
pub fn internal_energy(rho: &DensityMatrix, h: &HermitianOperator, q: f64) -> Result<f64> {
    crate::lie_poisson::q_average(rho, h, q)
}

/// `F = U_q - T S_q`.
pub fn free_energy(rho: &DensityMatrix, h: &HermitianOperator, p: &ThermoParams) -> Result<f64> {
    p.validate()?;
    Ok(internal_energy(rho, h, p.q)? - p.temperature() * tsallis_entropy(rho, p.q)?)
}

/// `X(ρ) = <H>_q + Φ(C_1, C_q)` assembled from the Hamiltonian function and
/// the trace functionals `C_1 = Tr ρ`, `C_q = Tr ρ^q`.
pub fn energy_casimir_function(rho: &DensityMatrix, h: &HermitianOperator, p: &ThermoParams) -> Result<f64> {
    p.validate()?;
    let f = DeformationFunction::power(p.q)?;
    let energy = hamiltonian_function(rho, h, &f)?;
    let t = p.temperature();
    let s = rho.spectral()?;
    let c1 = rho.trace();
    let phi = if near_one(p.q) {
        t * s.eigenvalues.iter().filter(|&&l| l > 0.0).map(|&l| l * l.ln()).sum::<f64>()
    } else {
        let cq = trace_function(&s, &f)?;
        -t * (c1 - cq) / (p.q - 1.0)
    };
    Ok(energy + phi)
}

/// `F(λ)` of the spin state `diag(λ, 1 - λ)` in `H = -μσz`.
pub fn spin_free_energy(p: &ThermoParams, lam: f64) -> f64 {
    let (q, mu, t) = (p.q, p.mu, p.temperature());
    let spectrum = [lam, 1.0 - lam];
    if near_one(q) {
        return -mu * (2.0 * lam - 1.0) - t * entropy_from_spectrum(&spectrum, 1.0);
    }
    -mu * (lam.powf(q) - (1.0 - lam).powf(q)) - t * entropy_from_spectrum(&spectrum, q)
}

/// Analytic `∂F/∂λ = -μq(a + b) + Tq(a - b)/(q - 1)` with `a = λ^(q-1)`,
/// `b = (1-λ)^(q-1)`.
pub fn spin_free_energy_derivative(p: &ThermoParams, lam: f64) -> f64 {
    let (q, mu, t) = (p.q, p.mu, p.temperature());
    let (ln_a, ln_b) = (lam.ln(), (1.0 - lam).ln());
    if near_one(q) {
        return -2.0 * mu + t * (ln_a - ln_b);
    }
    let x = (q - 1.0) * ln_a;
    let y = (q - 1.0) * ln_b;
    let (a, b) = (x.exp(), y.exp());
    let diff_over = b * (x - y).exp_m1() / (q - 1.0);
    q * (-mu * (a + b) + t * diff_over)
}

/// Central second difference of `F(λ)` with step [`SECOND_DIFF_STEP`].
///
/// Within one step of the boundary the stencil leaves `(0, 1)`; there the
/// closed form `Tq(a + b) - μq(q-1)(a - b)` with `a = λ^(q-2)`,
/// `b = (1-λ)^(q-2)` is returned instead.
pub fn stability_second_derivative(p: &ThermoParams, lam: f64) -> f64 {
    let h = SECOND_DIFF_STEP;
    if lam - h > 0.0 && lam + h < 1.0 {
        return (spin_free_energy(p, lam + h) - 2.0 * spin_free_energy(p, lam) + spin_free_energy(p, lam - h)) / (h * h);
    }
    let (q, mu, t) = (p.q, p.mu, p.temperature());
    if near_one(q) {
        return t * (1.0 / lam + 1.0 / (1.0 - lam));
    }
    let (a, b) = (lam.powf(q - 2.0), (1.0 - lam).powf(q - 2.0));
    t * q * (a + b) - mu * q * (q - 1.0) * (a - b)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumResult {
    pub lam: f64,
    pub free_energy: f64,
    pub first_derivative: f64,
    pub second_derivative: f64,
    /// `diag(λ, 1 - λ)` in the eigenbasis of `H = -μσz`.
    pub state: DensityMatrix,
}

/// Solves `∂F/∂λ = 0` on `(1/2, 1)` by bisection.
///
/// For `q = 1` the root is the Gibbs value `e^{βμ} / (2 cosh βμ)`; otherwise
/// it is the solution of `(λ/(1-λ))^(q-1) = (1 + (q-1)βμ) / (1 - (q-1)βμ)`,
/// which exists only for `|q - 1| β μ < 1`.
pub fn spin_equilibrium(p: &ThermoParams) -> Result<EquilibriumResult> {
    p.validate()?;
    if p.coupling() >= 1.0 {
        return Err(NvneError::OutOfDomain {
            param: "|q-1|*beta*mu",
            value: p.coupling(),
            reason: "the spin equilibrium requires |q-1| beta mu < 1",
        });
    }
    let lam = if near_one(p.q) {
        1.0 / (1.0 + (-2.0 * p.beta * p.mu).exp())
    } else {
        bisect_stationary(p)?
    };
    let first_derivative = spin_free_energy_derivative(p, lam);
    if !(first_derivative.abs() < STATIONARITY_TOL) {
        return Err(NvneError::NumericalFailure(format!(
            "dF/dlam = {first_derivative:e} at lam = {lam} is not stationary"
        )));
    }
    Ok(EquilibriumResult {
        lam,
        free_energy: spin_free_energy(p, lam),
        first_derivative,
        second_derivative: stability_second_derivative(p, lam),
        state: DensityMatrix::diagonal(&[lam, 1.0 - lam])?,
    })
}

fn bisect_stationary(p: &ThermoParams) -> Result<f64> {
    let mut lo = 0.5;
    let mut hi = 1.0 - f64::EPSILON;
    let f_lo = spin_free_energy_derivative(p, lo);
    let f_hi = spin_free_energy_derivative(p, hi);
    if !(f_lo < 0.0 && f_hi > 0.0) {
        return Err(NvneError::NumericalFailure(format!(
            "dF/dlam does not change sign on (0.5, 1): {f_lo:e}, {f_hi:e}"
        )));
    }
    // run to machine resolution; the interval halves until the midpoint repeats
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if spin_free_energy_derivative(p, mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (dl, dh) = (spin_free_energy_derivative(p, lo).abs(), spin_free_energy_derivative(p, hi).abs());
    Ok(if dl <= dh { lo } else { hi })
}

/// Numerical equilibrium in any dimension: minimizes `F` over states diagonal
/// in the eigenbasis of `H` by pairwise golden-section sweeps.
pub fn diagonal_equilibrium(h: &HermitianOperator, q: f64, beta: f64) -> Result<DensityMatrix> {
    DeformationFunction::power(q)?;
    if !(beta.is_finite() && beta > 0.0) {
        return Err(NvneError::OutOfDomain {
            param: "beta",
            value: beta,
            reason: "must be positive and finite",
        });
    }
    let s = spectral_decompose(h)?;
    let energies = &s.eigenvalues;
    let n = energies.len();
    let t = 1.0 / beta;
    let term = |p: f64, e: f64| -> f64 {
        if p <= 0.0 {
            return 0.0;
        }
        if near_one(q) {
            p * e + t * p * p.ln()
        } else {
            p.powf(q) * e + t * p * ((q - 1.0) * p.ln()).exp_m1() / (q - 1.0)
        }
    };
    let mut probs = vec![1.0 / n as f64; n];
    for _sweep in 0..500 {
        let mut moved = 0.0f64;
        for i in 0..n {
            for j in (i + 1)..n {
                let total = probs[i] + probs[j];
                if total <= 0.0 {
                    continue;
                }
                let (ei, ej) = (energies[i], energies[j]);
                let x = golden_section(0.0, total, |x| term(x, ei) + term(total - x, ej));
                moved = moved.max((x - probs[i]).abs());
                probs[i] = x;
                probs[j] = total - x;
            }
        }
        if moved < 1e-13 {
            break;
        }
    }
    let m = s.recompose_with(&probs);
    DensityMatrix::new(crate::hermitian::hermitize(&m))
}

fn golden_section(mut a: f64, mut b: f64, f: impl Fn(f64) -> f64) -> f64 {
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > 1e-15 * (1.0 + a.abs() + b.abs()) {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = f(d);
        }
        if b - a < 1e-300 {
            break;
        }
    }
    0.5 * (a + b)
}

/// Excursion of a tilted equilibrium under the nonlinear flow.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityRun {
    pub lam: f64,
    pub tilt: f64,
    pub initial_distance: f64,
    pub max_distance: f64,
}

/// Evolves `bloch_state(λ_eq, tilt, 0)` under `H = -μσz`, `f = x^q` and
/// records the largest trace distance from the equilibrium.
pub fn perturbed_equilibrium_run(p: &ThermoParams, tilt: f64, cfg: &IntegratorConfig) -> Result<StabilityRun> {
    let eq = spin_equilibrium(p)?;
    let start = bloch_state(BlochParams::new(eq.lam, tilt, 0.0)?)?;
    let traj = evolve(
        &start,
        &HermitianOperator::spin_z(p.mu),
        &DeformationFunction::power(p.q)?,
        cfg,
    )?;
    let initial_distance = trace_distance(&start, &eq.state)?;
    let mut max_distance = 0.0f64;
    for s in &traj.states {
        max_distance = max_distance.max(trace_distance(s, &eq.state)?);
    }
    Ok(StabilityRun {
        lam: eq.lam,
        tilt,
        initial_distance,
        max_distance,
    })
}
