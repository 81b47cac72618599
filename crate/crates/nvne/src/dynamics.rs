//! Isospectral time integration of `i dρ/dt = [H, f(ρ)]`.
//!
//! Each step conjugates the state with `exp(-i G dt)`, where `G` is the
//! commutator-equivalent generator of [`crate::lie_poisson::generator`].
//! Spectrum, trace, Hermiticity and positivity are therefore preserved up to
//! eigensolver round-off; the scheme only affects where on the isospectral
//! orbit the state ends up.

use serde::{Deserialize, Serialize};
use num_complex::Complex64;

use crate::deformation::DeformationFunction;
use crate::error::{NvneError, Result};
use crate::hermitian::{
    decompose_matrix, decompose_state, max_hermitian_deviation, trace_product, CMatrix, DensityMatrix, HermitianOperator, Operator,
};
use crate::lie_poisson::generator_from_spectrum;

/// Number of Casimirs `C_1..C_5` kept in the invariant log.
pub const LOGGED_CASIMIRS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Two-stage exponential midpoint, second order.
    #[default]
    UnitaryMidpoint,
    /// Single exponential with the generator at the start of the step, first order.
    UnitaryEuler,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorConfig {
    pub dt: f64,
    pub t_final: f64,
    #[serde(default)]
    pub scheme: Scheme,
    #[serde(default = "default_record_every")]
    pub record_every: usize,
}

fn default_record_every() -> usize {
    1
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            t_final: 1.0,
            scheme: Scheme::UnitaryMidpoint,
            record_every: 1,
        }
    }
}

impl IntegratorConfig {
    pub fn new(dt: f64, t_final: f64) -> Result<Self> {
        let cfg = Self {
            dt,
            t_final,
            ..Self::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_record_every(mut self, record_every: usize) -> Self {
        self.record_every = record_every;
        self
    }

    pub fn with_scheme(mut self, scheme: Scheme) -> Self {
        self.scheme = scheme;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(NvneError::config("integrator.dt", format!("must be > 0, got {}", self.dt)));
        }
        if !(self.t_final.is_finite() && self.t_final > 0.0) {
            return Err(NvneError::config(
                "integrator.t_final",
                format!("must be > 0, got {}", self.t_final),
            ));
        }
        if self.dt > self.t_final {
            return Err(NvneError::config(
                "integrator.dt",
                format!("dt = {} exceeds t_final = {}", self.dt, self.t_final),
            ));
        }
        if self.record_every == 0 {
            return Err(NvneError::config("integrator.record_every", "must be at least 1"));
        }
        Ok(())
    }

    /// `⌈t_final / dt⌉`, ignoring representation noise in the ratio.
    pub fn n_steps(&self) -> usize {
        let r = self.t_final / self.dt;
        let nearest = r.round();
        if (r - nearest).abs() <= 1e-9 * nearest.max(1.0) {
            nearest as usize
        } else {
            r.ceil() as usize
        }
    }
}

/// Conserved quantities recorded alongside each stored state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvariantSample {
    /// Ascending eigenvalues.
    pub spectrum: Vec<f64>,
    /// `C_1..C_5`.
    pub casimirs: [f64; LOGGED_CASIMIRS],
    /// The Hamiltonian function, `Tr f(ρ) H` for a single system.
    pub energy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<DensityMatrix>,
    pub invariants: Vec<InvariantSample>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> Option<&DensityMatrix> {
        self.states.last()
    }

    pub fn dim(&self) -> usize {
        self.states.first().map(|s| s.dim()).unwrap_or(0)
    }
}

/// One system's right-hand side, expressed through its step unitaries.
pub(crate) trait Flow {
    /// `exp(-i G(ρ) s)` for the generator at `ρ`.
    fn propagator(&self, rho: &CMatrix, s: f64) -> Result<CMatrix>;

    /// The conserved Hamiltonian function at `ρ`.
    fn energy(&self, rho: &CMatrix) -> Result<f64>;
}

pub(crate) struct SingleSystem<'a> {
    pub h: &'a HermitianOperator,
    pub f: &'a DeformationFunction,
}

impl Flow for SingleSystem<'_> {
    fn propagator(&self, rho: &CMatrix, s: f64) -> Result<CMatrix> {
        let spectral = decompose_state(rho)?;
        let g = generator_from_spectrum(&spectral, self.h.matrix(), self.f)?;
        Ok(decompose_matrix(&g)?.unitary(s))
    }

    fn energy(&self, rho: &CMatrix) -> Result<f64> {
        let spectral = decompose_state(rho)?;
        let vals = spectral
            .eigenvalues
            .iter()
            .map(|&l| self.f.eval(l))
            .collect::<Result<Vec<_>>>()?;
        Ok(trace_product(&spectral.recompose_with(&vals), self.h.matrix()))
    }
}

fn conjugate(u: &CMatrix, rho: &CMatrix) -> CMatrix {
    u * rho * u.adjoint()
}

pub(crate) fn advance(flow: &impl Flow, rho: &CMatrix, dt: f64, scheme: Scheme) -> Result<CMatrix> {
    let next = match scheme {
        Scheme::UnitaryMidpoint => {
            let half = conjugate(&flow.propagator(rho, 0.5 * dt)?, rho);
            conjugate(&flow.propagator(&half, dt)?, rho)
        }
        Scheme::UnitaryEuler => conjugate(&flow.propagator(rho, dt)?, rho),
    };
    // the exact flow keeps Tr ρ; remove the round-off the unitaries leak
    let t = next.trace().re;
    Ok(crate::hermitian::hermitize(&next) / Complex64::new(t, 0.0))
}

pub(crate) fn sample(flow: &impl Flow, rho: &CMatrix) -> Result<InvariantSample> {
    let spectrum = decompose_matrix(rho)?.eigenvalues;
    let mut casimirs = [0.0; LOGGED_CASIMIRS];
    for (n, c) in casimirs.iter_mut().enumerate() {
        *c = spectrum.iter().map(|l| l.powi(n as i32 + 1)).sum();
    }
    Ok(InvariantSample {
        energy: flow.energy(rho)?,
        spectrum,
        casimirs,
    })
}

pub(crate) fn integrate(flow: &impl Flow, rho0: &DensityMatrix, cfg: &IntegratorConfig) -> Result<Trajectory> {
    cfg.validate()?;
    let n = cfg.n_steps();
    let capacity = n / cfg.record_every + 2;
    let mut traj = Trajectory {
        times: Vec::with_capacity(capacity),
        states: Vec::with_capacity(capacity),
        invariants: Vec::with_capacity(capacity),
    };
    let mut rho = rho0.matrix().clone();
    let mut record = |k: usize, rho: &CMatrix| -> Result<()> {
        traj.times.push(k as f64 * cfg.dt);
        traj.invariants.push(sample(flow, rho)?);
        traj.states.push(DensityMatrix::from_trusted(rho.clone()));
        Ok(())
    };
    record(0, &rho)?;
    for k in 1..=n {
        rho = advance(flow, &rho, cfg.dt, cfg.scheme)?;
        if k % cfg.record_every == 0 || k == n {
            record(k, &rho)?;
        }
    }
    Ok(traj)
}

/// One unitary-midpoint step of length `dt`.
pub fn step(rho: &DensityMatrix, h: &HermitianOperator, f: &DeformationFunction, dt: f64) -> Result<DensityMatrix> {
    step_with_scheme(rho, h, f, dt, Scheme::UnitaryMidpoint)
}

pub fn step_with_scheme(
    rho: &DensityMatrix,
    h: &HermitianOperator,
    f: &DeformationFunction,
    dt: f64,
    scheme: Scheme,
) -> Result<DensityMatrix> {
    check_inputs(rho, h)?;
    if !(dt.is_finite() && dt > 0.0) {
        return Err(NvneError::domain(format!("step size must be positive, got {dt}")));
    }
    let next = advance(&SingleSystem { h, f }, rho.matrix(), dt, scheme)?;
    Ok(DensityMatrix::from_trusted(next))
}

fn check_inputs(rho: &DensityMatrix, h: &HermitianOperator) -> Result<()> {
    if rho.dim() != h.dim() {
        return Err(NvneError::DimensionMismatch {
            expected: rho.dim(),
            actual: h.dim(),
        });
    }
    Ok(())
}

/// Integrates `ceil(t_final / dt)` steps, recording every `record_every`-th
/// state plus the initial and final ones.
pub fn evolve(
    rho0: &DensityMatrix,
    h: &HermitianOperator,
    f: &DeformationFunction,
    cfg: &IntegratorConfig,
) -> Result<Trajectory> {
    check_inputs(rho0, h)?;
    integrate(&SingleSystem { h, f }, rho0, cfg)
}

/// Worst-case drift of the invariants over a trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvariantReport {
    /// Max absolute deviation of any sorted eigenvalue from its initial value.
    pub eigenvalue_drift: f64,
    /// Relative drift of `C_1..C_5`.
    pub casimir_drift: [f64; LOGGED_CASIMIRS],
    /// Relative drift of the Hamiltonian function.
    pub energy_drift: f64,
    /// Max `|ρ - ρ^dag|` entry over stored states.
    pub hermiticity_violation: f64,
    /// Max `-λ_min` over stored states (0 if all spectra are nonnegative).
    pub positivity_violation: f64,
}

impl InvariantReport {
    /// Largest drift among `C_n` for `n` in `range` (1-based).
    pub fn max_casimir_drift(&self, range: std::ops::RangeInclusive<usize>) -> f64 {
        range.map(|n| self.casimir_drift[n - 1]).fold(0.0, f64::max)
    }
}

/// `|x - x0| / |x0|`, falling back to the absolute change when `x0` vanishes.
pub fn relative_drift(x: f64, x0: f64) -> f64 {
    let d = (x - x0).abs();
    if x0.abs() > 1e-12 {
        d / x0.abs()
    } else {
        d
    }
}

pub fn invariant_report(traj: &Trajectory) -> Result<InvariantReport> {
    let first = traj
        .invariants
        .first()
        .ok_or_else(|| NvneError::domain("invariant report needs a non-empty trajectory"))?;
    let mut report = InvariantReport {
        eigenvalue_drift: 0.0,
        casimir_drift: [0.0; LOGGED_CASIMIRS],
        energy_drift: 0.0,
        hermiticity_violation: 0.0,
        positivity_violation: 0.0,
    };
    for (sample, state) in traj.invariants.iter().zip(&traj.states) {
        for (l, l0) in sample.spectrum.iter().zip(&first.spectrum) {
            report.eigenvalue_drift = report.eigenvalue_drift.max((l - l0).abs());
        }
        for n in 0..LOGGED_CASIMIRS {
            report.casimir_drift[n] = report.casimir_drift[n].max(relative_drift(sample.casimirs[n], first.casimirs[n]));
        }
        report.energy_drift = report.energy_drift.max(relative_drift(sample.energy, first.energy));
        report.hermiticity_violation = report.hermiticity_violation.max(max_hermitian_deviation(state.matrix()));
        report.positivity_violation = report.positivity_violation.max(-sample.spectrum[0]);
    }
    Ok(report)
}

/// Threshold on `|ρ_ij|` below which the phase is considered undefined.
pub const MIN_SIGNAL: f64 = 1e-6;

/// Angular frequency of `ρ_ij(t)` from a least-squares fit of its unwrapped phase.
pub fn precession_frequency(traj: &Trajectory, element: (usize, usize)) -> Result<f64> {
    let (row, col) = element;
    let dim = traj.dim();
    if row >= dim || col >= dim {
        return Err(NvneError::DimensionMismatch {
            expected: dim,
            actual: row.max(col) + 1,
        });
    }
    if traj.len() < 2 {
        return Err(NvneError::domain("frequency fit needs at least two samples"));
    }
    let mut phases = Vec::with_capacity(traj.len());
    let mut previous: Option<f64> = None;
    for (t, state) in traj.times.iter().zip(&traj.states) {
        let z = state.matrix()[(row, col)];
        if z.norm() < MIN_SIGNAL {
            return Err(NvneError::SignalTooWeak {
                row,
                col,
                magnitude: z.norm(),
                time: *t,
            });
        }
        let raw = z.arg();
        let phase = match previous {
            None => raw,
            Some(p) => {
                let two_pi = std::f64::consts::TAU;
                p + (raw - p + std::f64::consts::PI).rem_euclid(two_pi) - std::f64::consts::PI
            }
        };
        previous = Some(phase);
        phases.push(phase);
    }
    Ok(least_squares_slope(&traj.times, &phases).abs())
}

fn least_squares_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (xi, yi) in x.iter().zip(y) {
        sxy += (xi - mx) * (yi - my);
        sxx += (xi - mx) * (xi - mx);
    }
    sxy / sxx
}

/// Larmor frequency `2μ (f(λ1) - f(λ2)) / (λ1 - λ2)` of a spin in `H = -μσz`.
pub fn larmor_frequency(f: &DeformationFunction, mu: f64, lam: f64) -> Result<f64> {
    Ok(2.0 * mu * f.divided_difference(lam, 1.0 - lam, crate::lie_poisson::DEGENERACY_TOL)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hermitian::{bloch_state, trace_distance, BlochParams};
    use std::f64::consts::PI;

    fn power(q: f64) -> DeformationFunction {
        DeformationFunction::power(q).unwrap()
    }

    #[test]
    fn config_validation() {
        assert!(IntegratorConfig::new(1e-3, 1.0).is_ok());
        match IntegratorConfig::new(0.0, 1.0) {
            Err(NvneError::Config { key, .. }) => assert_eq!(key, "integrator.dt"),
            other => panic!("{other:?}"),
        }
        assert!(IntegratorConfig::new(2.0, 1.0).is_err());
        assert!(IntegratorConfig::new(1e-3, -1.0).is_err());
        let cfg = IntegratorConfig::new(1e-3, 1.0).unwrap().with_record_every(0);
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn step_count_is_ceiling() {
        assert_eq!(IntegratorConfig::new(1e-3, 10.0).unwrap().n_steps(), 10_000);
        assert_eq!(IntegratorConfig::new(0.3, 1.0).unwrap().n_steps(), 4);
        assert_eq!(IntegratorConfig::new(0.1, 0.3).unwrap().n_steps(), 3);
    }

    #[test]
    fn state_commuting_with_h_is_stationary() {
        let rho = DensityMatrix::diagonal(&[0.7, 0.2, 0.1]).unwrap();
        let h = HermitianOperator::from_real_diagonal(&[1.0, -0.5, 0.3]);
        let next = step(&rho, &h, &power(2.0), 0.01).unwrap();
        assert!(trace_distance(&next, &rho).unwrap() < 1e-15);
        let tilt0 = bloch_state(BlochParams::new(0.8, 0.0, 0.0).unwrap()).unwrap();
        let next = step(&tilt0, &HermitianOperator::spin_z(1.0), &power(3.0), 0.1).unwrap();
        assert!(trace_distance(&next, &tilt0).unwrap() < 1e-15);
    }

    #[test]
    fn pure_state_step_matches_linear_step() {
        let rho = crate::random::pure(&mut crate::random::seeded(4), 3);
        let h = crate::random::hermitian(&mut crate::random::seeded(5), 3);
        let dt = 1e-2;
        let lin = step(&rho, &h, &DeformationFunction::identity(), dt).unwrap();
        let nl = step(&rho, &h, &power(2.0), dt).unwrap();
        let d = trace_distance(&lin, &nl).unwrap();
        assert!(d < 10.0 * dt.powi(3), "{d:e}");
    }

    #[test]
    fn spin_step_advances_azimuth() {
        // ψ advances by -ω dt with ω = 2 (f(0.75) - f(0.25)) / 0.5 = 2 for q = 2
        let p = BlochParams::new(0.75, PI / 2.0, 0.0).unwrap();
        let rho = bloch_state(p).unwrap();
        let dt = 1e-3;
        let next = step(&rho, &HermitianOperator::spin_z(1.0), &power(2.0), dt).unwrap();
        let expected = bloch_state(BlochParams::new(0.75, PI / 2.0, -2.0 * dt).unwrap()).unwrap();
        assert!(trace_distance(&next, &expected).unwrap() < 1e-14);
    }

    #[test]
    fn maximally_mixed_trajectory_is_constant() {
        let rho = DensityMatrix::maximally_mixed(2);
        let h = HermitianOperator::pauli_x();
        let cfg = IntegratorConfig::new(1e-2, 10.0).unwrap().with_record_every(10);
        let traj = evolve(&rho, &h, &power(2.0), &cfg).unwrap();
        assert_eq!(traj.len(), 101);
        for s in &traj.states {
            let d = trace_distance(s, &rho).unwrap(); assert!(d < 1e-13, "{d:e} {s}");
        }
        let report = invariant_report(&traj).unwrap();
        assert!(report.eigenvalue_drift < 1e-13);
        assert!(report.energy_drift < 1e-13);
        assert!(report.casimir_drift.iter().all(|&d| d < 1e-13));
    }

    #[test]
    fn recorded_times_are_strictly_increasing_and_end_at_final_step() {
        let rho = bloch_state(BlochParams::new(0.9, 1.0, 0.0).unwrap()).unwrap();
        let cfg = IntegratorConfig::new(0.1, 1.05).unwrap().with_record_every(4);
        let traj = evolve(&rho, &HermitianOperator::spin_z(1.0), &power(2.0), &cfg).unwrap();
        assert!(traj.times.windows(2).all(|w| w[1] > w[0]));
        assert!((traj.times.last().unwrap() - 1.1).abs() < 1e-12);
        assert_eq!(traj.times.len(), 4);
    }

    #[test]
    fn linear_and_nonlinear_precession() {
        let rho = bloch_state(BlochParams::new(0.75, PI / 2.0, 0.0).unwrap()).unwrap();
        let h = HermitianOperator::spin_z(1.0);
        let cfg = IntegratorConfig::new(1e-3, 2.0).unwrap().with_record_every(10);
        for (q, expected) in [(1.0, 2.0), (2.0, 2.0)] {
            let traj = evolve(&rho, &h, &power(q), &cfg).unwrap();
            let w = precession_frequency(&traj, (0, 1)).unwrap();
            assert!((w - expected).abs() < 1e-6, "q={q}: {w}");
            let report = invariant_report(&traj).unwrap();
            assert!(report.eigenvalue_drift < 1e-12);
        }
        let rho = bloch_state(BlochParams::new(0.9, PI / 2.0, 0.0).unwrap()).unwrap();
        let traj = evolve(&rho, &h, &power(3.0), &cfg).unwrap();
        let w = precession_frequency(&traj, (0, 1)).unwrap();
        assert!((w - 1.82).abs() < 1e-4, "{w}");
    }

    #[test]
    fn weak_signal_is_reported() {
        let rho = DensityMatrix::diagonal(&[0.6, 0.4]).unwrap();
        let cfg = IntegratorConfig::new(0.1, 1.0).unwrap();
        let traj = evolve(&rho, &HermitianOperator::spin_z(1.0), &power(2.0), &cfg).unwrap();
        assert!(matches!(
            precession_frequency(&traj, (0, 1)),
            Err(NvneError::SignalTooWeak { .. })
        ));
    }

    #[test]
    fn euler_scheme_is_isospectral_too() {
        let mut rng = crate::random::seeded(12);
        let rho = crate::random::density(&mut rng, 3);
        let h = crate::random::hermitian(&mut rng, 3);
        let cfg = IntegratorConfig::new(1e-2, 5.0).unwrap().with_scheme(Scheme::UnitaryEuler);
        let traj = evolve(&rho, &h, &power(2.0), &cfg).unwrap();
        assert!(invariant_report(&traj).unwrap().eigenvalue_drift < 1e-12);
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let rho = DensityMatrix::maximally_mixed(3);
        assert!(matches!(
            step(&rho, &HermitianOperator::pauli_z(), &power(2.0), 0.1),
            Err(NvneError::DimensionMismatch { .. })
        ));
    }
}
