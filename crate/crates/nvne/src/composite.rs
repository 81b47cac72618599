//! Two noninteracting subsystems whose nonlinear terms see only their own
//! reduced states:
//!
//! `i dρ/dt = [Ĥ_I(ρ_I) ⊗ 1 + 1 ⊗ Ĥ_II(ρ_II), ρ]`, `ρ_I = Tr_II ρ`, `ρ_II = Tr_I ρ`.
//!
//! The reductions are recomputed from the joint state at every stage of every
//! step. Since `Ĥ` and the generator `G` share their kernel and differ by a
//! multiple of the identity, the step uses `G_I` and `G_II`, which stay
//! defined on rank-deficient reductions when `q < 1`.

use serde::{Deserialize, Serialize};

use crate::deformation::DeformationFunction;
use crate::dynamics::{evolve, integrate, relative_drift, Flow, IntegratorConfig, Trajectory};
use crate::error::{NvneError, Result};
use crate::hermitian::{
    decompose_matrix, decompose_state, partial_trace, partial_trace_matrix, trace_distance, trace_product, CMatrix,
    DensityMatrix, HermitianOperator, Operator, Subsystem,
};
use crate::lie_poisson::generator_from_spectrum;

#[derive(Debug, Clone, PartialEq)]
pub struct CompositeSystem {
    h_i: HermitianOperator,
    h_ii: HermitianOperator,
    f_i: DeformationFunction,
    f_ii: DeformationFunction,
}

impl CompositeSystem {
    pub fn new(
        h_i: HermitianOperator,
        h_ii: HermitianOperator,
        f_i: DeformationFunction,
        f_ii: DeformationFunction,
    ) -> Self {
        Self { h_i, h_ii, f_i, f_ii }
    }

    /// `f_I = x^q1`, `f_II = x^q2`.
    pub fn tsallis(h_i: HermitianOperator, h_ii: HermitianOperator, q1: f64, q2: f64) -> Result<Self> {
        Ok(Self::new(h_i, h_ii, DeformationFunction::power(q1)?, DeformationFunction::power(q2)?))
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.h_i.dim(), self.h_ii.dim())
    }

    pub fn dim(&self) -> usize {
        self.h_i.dim() * self.h_ii.dim()
    }

    pub fn hamiltonian(&self, part: Subsystem) -> &HermitianOperator {
        match part {
            Subsystem::I => &self.h_i,
            Subsystem::II => &self.h_ii,
        }
    }

    pub fn deformation(&self, part: Subsystem) -> &DeformationFunction {
        match part {
            Subsystem::I => &self.f_i,
            Subsystem::II => &self.f_ii,
        }
    }

    /// `<H_I>_{f_I}(ρ_I) + <H_II>_{f_II}(ρ_II)`, conserved by the joint flow.
    pub fn energy(&self, rho: &DensityMatrix) -> Result<f64> {
        self.check(rho)?;
        self.energy_of(rho.matrix())
    }

    fn check(&self, rho: &DensityMatrix) -> Result<()> {
        if rho.dim() != self.dim() {
            return Err(NvneError::DimensionMismatch {
                expected: self.dim(),
                actual: rho.dim(),
            });
        }
        Ok(())
    }

    fn energy_of(&self, rho: &CMatrix) -> Result<f64> {
        let mut total = 0.0;
        for part in [Subsystem::I, Subsystem::II] {
            let reduced = partial_trace_matrix(rho, self.dims(), part)?;
            let s = decompose_state(&reduced)?;
            let f = self.deformation(part);
            let vals = s.eigenvalues.iter().map(|&l| f.eval(l)).collect::<Result<Vec<_>>>()?;
            total += trace_product(&s.recompose_with(&vals), self.hamiltonian(part).matrix());
        }
        Ok(total)
    }

    fn local_propagator(&self, rho: &CMatrix, part: Subsystem, s: f64) -> Result<CMatrix> {
        let reduced = partial_trace_matrix(rho, self.dims(), part)?;
        let spectral = decompose_state(&reduced)?;
        let g = generator_from_spectrum(&spectral, self.hamiltonian(part).matrix(), self.deformation(part))?;
        Ok(decompose_matrix(&g)?.unitary(s))
    }
}

impl Flow for CompositeSystem {
    // exp(-i (G_I ⊗ 1 + 1 ⊗ G_II) s) = U_I ⊗ U_II
    fn propagator(&self, rho: &CMatrix, s: f64) -> Result<CMatrix> {
        let u_i = self.local_propagator(rho, Subsystem::I, s)?;
        let u_ii = self.local_propagator(rho, Subsystem::II, s)?;
        Ok(u_i.kronecker(&u_ii))
    }

    fn energy(&self, rho: &CMatrix) -> Result<f64> {
        self.energy_of(rho)
    }
}

/// Integrates the joint equation. The logged energy is the two-system
/// Hamiltonian function.
pub fn evolve_composite(rho0: &DensityMatrix, sys: &CompositeSystem, cfg: &IntegratorConfig) -> Result<Trajectory> {
    sys.check(rho0)?;
    integrate(sys, rho0, cfg)
}

/// Comparison of the joint trajectory's reductions with independent
/// single-system runs started from the initial reductions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReductionReport {
    /// `max_t ||Tr_II ρ(t) - ρ_I(t)||_tr`
    pub max_deviation_i: f64,
    pub max_deviation_ii: f64,
    /// Largest change of `Tr ρ_I²` along the joint trajectory.
    pub purity_drift_i: f64,
    pub purity_drift_ii: f64,
}

impl ReductionReport {
    pub fn max_deviation(&self) -> f64 {
        self.max_deviation_i.max(self.max_deviation_ii)
    }
}

pub fn reduction_consistency(
    traj: &Trajectory,
    sys: &CompositeSystem,
    cfg: &IntegratorConfig,
) -> Result<ReductionReport> {
    let first = traj
        .states
        .first()
        .ok_or_else(|| NvneError::domain("empty trajectory"))?;
    sys.check(first)?;
    let mut deviation = [0.0f64; 2];
    let mut purity = [0.0f64; 2];
    for (k, part) in [Subsystem::I, Subsystem::II].into_iter().enumerate() {
        let reduced0 = partial_trace(first, sys.dims(), part)?;
        let single = evolve(&reduced0, sys.hamiltonian(part), sys.deformation(part), cfg)?;
        if single.len() != traj.len() {
            return Err(NvneError::config(
                "integrator",
                format!("trajectory has {} records but the config yields {}", traj.len(), single.len()),
            ));
        }
        let p0 = reduced0.purity();
        for (joint, alone) in traj.states.iter().zip(&single.states) {
            let reduced = partial_trace(joint, sys.dims(), part)?;
            deviation[k] = deviation[k].max(trace_distance(&reduced, alone)?);
            purity[k] = purity[k].max(relative_drift(reduced.purity(), p0));
        }
    }
    Ok(ReductionReport {
        max_deviation_i: deviation[0],
        max_deviation_ii: deviation[1],
        purity_drift_i: purity[0],
        purity_drift_ii: purity[1],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::invariant_report;
    use crate::hermitian::{bell_state, tensor_product};
    use crate::random;

    fn cfg(t_final: f64) -> IntegratorConfig {
        IntegratorConfig::new(1e-3, t_final).unwrap().with_record_every(100)
    }

    #[test]
    fn commuting_product_state_is_constant() {
        let sys = CompositeSystem::tsallis(
            HermitianOperator::spin_z(1.0),
            HermitianOperator::pauli_z().scale(0.3),
            2.0,
            3.0,
        )
        .unwrap();
        let a = DensityMatrix::diagonal(&[0.7, 0.3]).unwrap();
        let b = DensityMatrix::diagonal(&[0.2, 0.8]).unwrap();
        let rho = a.tensor(&b);
        let traj = evolve_composite(&rho, &sys, &cfg(1.0)).unwrap();
        for s in &traj.states {
            assert!(trace_distance(s, &rho).unwrap() < 1e-12);
        }
    }

    #[test]
    fn product_state_stays_product() {
        let mut rng = random::seeded(5);
        let sys = CompositeSystem::tsallis(random::hermitian(&mut rng, 2), random::hermitian(&mut rng, 2), 1.5, 2.5)
            .unwrap();
        let a = random::density(&mut rng, 2);
        let b = random::density(&mut rng, 2);
        let c = cfg(2.0);
        let traj = evolve_composite(&a.tensor(&b), &sys, &c).unwrap();
        let ta = evolve(&a, sys.hamiltonian(Subsystem::I), sys.deformation(Subsystem::I), &c).unwrap();
        let tb = evolve(&b, sys.hamiltonian(Subsystem::II), sys.deformation(Subsystem::II), &c).unwrap();
        for ((joint, x), y) in traj.states.iter().zip(&ta.states).zip(&tb.states) {
            let product = DensityMatrix::new(tensor_product(x, y)).unwrap();
            assert!(trace_distance(joint, &product).unwrap() < 1e-7);
        }
    }

    #[test]
    fn bell_state_reduction_is_fixed() {
        let sys = CompositeSystem::tsallis(HermitianOperator::spin_z(1.0), HermitianOperator::zeros(2), 2.0, 2.0).unwrap();
        let traj = evolve_composite(&bell_state(), &sys, &cfg(2.0)).unwrap();
        let half = DensityMatrix::maximally_mixed(2);
        for s in &traj.states {
            let r = partial_trace(s, (2, 2), Subsystem::I).unwrap();
            assert!(trace_distance(&r, &half).unwrap() < 1e-12);
        }
    }

    #[test]
    fn entangled_reductions_close() {
        let mut rng = random::seeded(6);
        let sys = CompositeSystem::tsallis(random::hermitian(&mut rng, 2), random::hermitian(&mut rng, 2), 1.5, 2.5)
            .unwrap();
        let rho = random::density(&mut rng, 4);
        let c = cfg(2.0);
        let traj = evolve_composite(&rho, &sys, &c).unwrap();
        let report = reduction_consistency(&traj, &sys, &c).unwrap();
        assert!(report.max_deviation() < 1e-7, "{report:?}");
        assert!(report.purity_drift_i < 1e-8 && report.purity_drift_ii < 1e-8, "{report:?}");
        let inv = invariant_report(&traj).unwrap();
        assert!(inv.max_casimir_drift(1..=4) < 1e-8);
        assert!(inv.eigenvalue_drift < 1e-9);
    }

    #[test]
    fn maximally_mixed_joint_state_has_zero_deviation() {
        let mut rng = random::seeded(8);
        let sys = CompositeSystem::tsallis(random::hermitian(&mut rng, 2), random::hermitian(&mut rng, 3), 0.5, 3.0)
            .unwrap();
        let rho = DensityMatrix::maximally_mixed(6);
        let c = cfg(0.5);
        let traj = evolve_composite(&rho, &sys, &c).unwrap();
        let report = reduction_consistency(&traj, &sys, &c).unwrap();
        assert!(report.max_deviation() < 1e-13);
    }

    #[test]
    fn rejects_wrong_dimension() {
        let sys = CompositeSystem::tsallis(HermitianOperator::pauli_x(), HermitianOperator::pauli_z(), 2.0, 2.0).unwrap();
        let err = evolve_composite(&DensityMatrix::maximally_mixed(3), &sys, &cfg(0.1)).unwrap_err();
        assert!(matches!(err, NvneError::DimensionMismatch { expected: 4, actual: 3 }));
    }
}
