//! Property tests over random states, Hamiltonians and exponents.

use approx::assert_abs_diff_eq;
use num_complex::Complex64;
use proptest::prelude::*;

use nvne::composite::{evolve_composite, reduction_consistency, CompositeSystem};
use nvne::dynamics::{
    evolve, invariant_report, larmor_frequency, precession_frequency, IntegratorConfig,
};
use nvne::ensemble::mixture_series;
use nvne::hermitian::{
    bloch_state, commutator, matrix_function, partial_trace, spectral_decompose, trace_distance,
    trace_function,
};
use nvne::lie_poisson::{
    casimir, effective_hamiltonian, generator, hamiltonian_function, poisson_bracket, ObservableFunctional,
};
use nvne::thermo::{energy_casimir_function, free_energy, spin_equilibrium, tsallis_entropy, ThermoParams};
use nvne::{random, BlochParams, CMatrix, DeformationFunction, DensityMatrix, HermitianOperator, Operator, Subsystem};

fn frob(m: &CMatrix) -> f64 {
    m.norm()
}

fn op_norm(h: &HermitianOperator) -> f64 {
    spectral_decompose(h)
        .unwrap()
        .eigenvalues
        .iter()
        .fold(0.0f64, |a, l| a.max(l.abs()))
}

fn q_strategy() -> impl Strategy<Value = f64> {
    prop::sample::select(vec![0.5, 1.0, 1.5, 2.0, 3.0])
}

/// A state with a repeated eigenvalue in a random basis.
fn degenerate_state(seed: u64, dim: usize) -> DensityMatrix {
    let mut rng = random::seeded(seed);
    let mut p: Vec<f64> = (0..dim).map(|k| if k < 2 { 1.0 } else { 0.5 + k as f64 }).collect();
    let total: f64 = p.iter().sum();
    p.iter_mut().for_each(|x| *x /= total);
    let d = DensityMatrix::diagonal(&p).unwrap();
    let u = spectral_decompose(&random::hermitian(&mut rng, dim)).unwrap().unitary(1.0);
    DensityMatrix::new(&u * d.matrix() * u.adjoint()).unwrap()
}

fn assert_valid(rho: &DensityMatrix) {
    let m = rho.matrix();
    assert!((m - m.adjoint()).norm() < 1e-12);
    assert!((rho.trace() - 1.0).abs() < 1e-12);
    assert!(rho.eigenvalues().unwrap().iter().all(|&l| l >= -1e-12));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn random_states_are_valid(seed in any::<u64>(), dim in 1usize..=6) {
        let mut rng = random::seeded(seed);
        assert_valid(&random::density(&mut rng, dim));
        assert_valid(&random::pure(&mut rng, dim));
    }

    #[test]
    fn identity_function_reconstructs(seed in any::<u64>(), dim in 1usize..=6) {
        let h = random::hermitian(&mut random::seeded(seed), dim);
        let s = spectral_decompose(&h).unwrap();
        let back = matrix_function(&s, &DeformationFunction::identity()).unwrap();
        prop_assert!(frob(&(back.matrix() - h.matrix())) <= 1e-10 * frob(h.matrix()).max(1e-300));
    }

    #[test]
    fn trace_function_is_spectral_sum(seed in any::<u64>(), dim in 1usize..=5, q in q_strategy()) {
        let rho = random::density(&mut random::seeded(seed), dim);
        let f = DeformationFunction::power(q).unwrap();
        let s = rho.spectral().unwrap();
        let direct: f64 = s.eigenvalues.iter().map(|&l| f.eval(l).unwrap()).sum();
        assert_abs_diff_eq!(trace_function(&s, &f).unwrap(), direct, epsilon = 1e-14);
    }

    #[test]
    fn partial_trace_inverts_tensor(seed in any::<u64>(), da in 1usize..=4, db in 1usize..=4) {
        let mut rng = random::seeded(seed);
        let a = random::density(&mut rng, da);
        let b = random::density(&mut rng, db);
        let ab = a.tensor(&b);
        assert_valid(&ab);
        let back_a = partial_trace(&ab, (da, db), Subsystem::I).unwrap();
        let back_b = partial_trace(&ab, (da, db), Subsystem::II).unwrap();
        prop_assert!((back_a.matrix() - a.matrix()).norm() < 1e-12);
        prop_assert!((back_b.matrix() - b.matrix()).norm() < 1e-12);
    }

    #[test]
    fn bloch_spectrum(lam in 0.0f64..=1.0, phi in 0.0f64..std::f64::consts::PI, psi in 0.0f64..std::f64::consts::TAU) {
        let rho = bloch_state(BlochParams::new(lam, phi, psi).unwrap()).unwrap();
        assert_valid(&rho);
        let ev = rho.eigenvalues().unwrap();
        let (lo, hi) = (lam.min(1.0 - lam), lam.max(1.0 - lam));
        prop_assert!((ev[0] - lo).abs() < 1e-12 && (ev[1] - hi).abs() < 1e-12);
    }

    #[test]
    fn hamiltonian_function_is_homogeneous(seed in any::<u64>(), dim in 2usize..=4, q in q_strategy()) {
        let mut rng = random::seeded(seed);
        let rho = random::density(&mut rng, dim);
        let h = random::hermitian(&mut rng, dim);
        let f = DeformationFunction::power(q).unwrap();
        let base = hamiltonian_function(&rho, &h, &f).unwrap();
        for c in [0.5, 2.0, 3.0] {
            let scaled = HermitianOperator::new(rho.matrix() * Complex64::new(c, 0.0)).unwrap();
            let v = hamiltonian_function(&scaled, &h, &f).unwrap();
            prop_assert!((v - c * base).abs() < 1e-10 * (1.0 + base.abs()));
        }
    }

    #[test]
    fn effective_hamiltonian_reproduces_energy(seed in any::<u64>(), dim in 2usize..=4, q in q_strategy()) {
        let mut rng = random::seeded(seed);
        let rho = random::density(&mut rng, dim);
        let h = random::hermitian(&mut rng, dim);
        let f = DeformationFunction::power(q).unwrap();
        let hh = effective_hamiltonian(&rho, &h, &f).unwrap();
        let lhs = (rho.matrix() * hh.matrix()).trace().re;
        prop_assert!((lhs - hamiltonian_function(&rho, &h, &f).unwrap()).abs() < 1e-10);
    }

    #[test]
    fn generator_matches_commutator(seed in any::<u64>(), dim in 2usize..=4, q in q_strategy(), degenerate in any::<bool>()) {
        let mut rng = random::seeded(seed);
        let rho = if degenerate { degenerate_state(seed, dim) } else { random::density(&mut rng, dim) };
        let h = random::hermitian(&mut rng, dim);
        let f = DeformationFunction::power(q).unwrap();
        let g = generator(&rho, &h, &f).unwrap();
        let fr = matrix_function(&rho.spectral().unwrap(), &f).unwrap();
        let lhs = commutator(g.matrix(), rho.matrix());
        let rhs = commutator(h.matrix(), fr.matrix());
        prop_assert!((lhs - rhs).norm() < 1e-10, "q = {q}, degenerate = {degenerate}");
    }

    #[test]
    fn effective_hamiltonian_and_generator_agree_off_blocks(seed in any::<u64>(), dim in 2usize..=4, q in q_strategy(), degenerate in any::<bool>()) {
        let mut rng = random::seeded(seed);
        let rho = if degenerate { degenerate_state(seed, dim) } else { random::density(&mut rng, dim) };
        let h = random::hermitian(&mut rng, dim);
        let f = DeformationFunction::power(q).unwrap();
        let diff = effective_hamiltonian(&rho, &h, &f).unwrap().matrix() - generator(&rho, &h, &f).unwrap().matrix();
        prop_assert!(commutator(&diff, rho.matrix()).norm() < 1e-10);
    }
}

fn random_functional(seed: u64, dim: usize) -> ObservableFunctional {
    let mut rng = random::seeded(seed);
    let a = random::hermitian(&mut rng, dim).into_matrix();
    let b = random::hermitian(&mut rng, dim).into_matrix();
    ObservableFunctional::from_fn("F", move |m| {
        let ta = (&a * m).trace().re;
        let tb = (&b * m * m).trace().re;
        Ok(ta.sin() + tb * ta)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn bracket_antisymmetry(seed in any::<u64>(), dim in 2usize..=4) {
        let rho = random::density(&mut random::seeded(seed), dim);
        let a = random_functional(seed ^ 1, dim);
        let b = random_functional(seed ^ 2, dim);
        let ab = poisson_bracket(&a, &b, &rho).unwrap();
        let ba = poisson_bracket(&b, &a, &rho).unwrap();
        prop_assert!((ab + ba).abs() < 1e-8);
    }

    #[test]
    fn bracket_leibniz(seed in any::<u64>(), dim in 2usize..=4) {
        let mut rng = random::seeded(seed);
        let rho = random::density(&mut rng, dim);
        let a = ObservableFunctional::linear(&random::hermitian(&mut rng, dim));
        let b = ObservableFunctional::linear(&random::hermitian(&mut rng, dim));
        let c = random_functional(seed ^ 3, dim);
        let m = rho.matrix();
        let lhs = poisson_bracket(&ObservableFunctional::product(&a, &b), &c, &rho).unwrap();
        let rhs = a.evaluate(m).unwrap() * poisson_bracket(&b, &c, &rho).unwrap()
            + poisson_bracket(&a, &c, &rho).unwrap() * b.evaluate(m).unwrap();
        prop_assert!((lhs - rhs).abs() < 1e-6 * (1.0 + lhs.abs()));
    }

    #[test]
    fn casimirs_commute_with_everything(seed in any::<u64>(), dim in 2usize..=4, n in 1u32..=4) {
        let rho = random::density(&mut random::seeded(seed), dim);
        let c = ObservableFunctional::casimir(n);
        let f = random_functional(seed ^ 4, dim);
        prop_assert!(poisson_bracket(&c, &f, &rho).unwrap().abs() < 1e-6);
    }

    #[test]
    fn tsallis_entropy_nonnegative_and_zero_on_pure(seed in any::<u64>(), dim in 2usize..=5, q in prop::sample::select(vec![0.5, 2.0, 3.0])) {
        let mut rng = random::seeded(seed);
        let mixed = random::density(&mut rng, dim);
        let pure = random::pure(&mut rng, dim);
        prop_assert!(tsallis_entropy(&mixed, q).unwrap() > 0.0);
        prop_assert!(tsallis_entropy(&pure, q).unwrap().abs() < 1e-12);
    }

    #[test]
    fn tsallis_entropy_continuous_at_one(seed in any::<u64>(), dim in 2usize..=5) {
        let rho = random::density(&mut random::seeded(seed), dim);
        let s1 = tsallis_entropy(&rho, 1.0).unwrap();
        let mut previous = f64::INFINITY;
        for d in [1e-3, 1e-4] {
            let gap = (tsallis_entropy(&rho, 1.0 + d).unwrap() - s1)
                .abs()
                .max((tsallis_entropy(&rho, 1.0 - d).unwrap() - s1).abs());
            let k = gap / d;
            prop_assert!(k.is_finite() && k < 10.0);
            prop_assert!(gap < previous);
            previous = gap;
        }
    }

    #[test]
    fn free_energy_is_energy_casimir(seed in any::<u64>(), dim in 2usize..=4, q in prop::sample::select(vec![0.5, 1.5, 2.0, 3.0]), beta in 0.1f64..3.0) {
        let mut rng = random::seeded(seed);
        let rho = random::density(&mut rng, dim);
        let h = random::hermitian(&mut rng, dim);
        let p = ThermoParams::new(q, beta, 1.0).unwrap();
        let a = free_energy(&rho, &h, &p).unwrap();
        let b = energy_casimir_function(&rho, &h, &p).unwrap();
        prop_assert!((a - b).abs() < 1e-12 * (1.0 + a.abs()));
    }

    #[test]
    fn equilibrium_is_stationary_minimum(q in 0.3f64..3.5, x in 0.01f64..0.99) {
        prop_assume!((q - 1.0).abs() > 1e-3);
        let beta_mu = x / (q - 1.0).abs();
        let r = match spin_equilibrium(&ThermoParams::new(q, beta_mu, 1.0).unwrap()) {
            Ok(r) => r,
            Err(e) => {
                // only acceptable where 1 - λ is below what an f64 λ near 1 resolves
                let ratio = ((1.0 + (q - 1.0) * beta_mu) / (1.0 - (q - 1.0) * beta_mu)).powf(1.0 / (q - 1.0));
                prop_assert!(1.0 / (1.0 + ratio) < 1e-9, "{e}");
                return Ok(());
            }
        };
        prop_assert!(r.first_derivative.abs() < 1e-8);
        prop_assert!(r.second_derivative > 0.0);
        prop_assert!(r.lam > 0.5 && r.lam < 1.0);
    }

    #[test]
    fn mixture_average_is_linear(seed in any::<u64>(), w in 0.05f64..0.95) {
        let mut rng = random::seeded(seed);
        let a = random::density(&mut rng, 2);
        let b = random::density(&mut rng, 2);
        let h = random::hermitian(&mut rng, 2);
        let f = DeformationFunction::power(3.0).unwrap();
        let cfg = IntegratorConfig::new(1e-2, 2.0).unwrap();
        let times = [0.0, 1.0, 2.0];
        let mix = mixture_series(&[(a.clone(), w), (b.clone(), 1.0 - w)], &h, &f, &times, &cfg).unwrap();
        let ta = evolve(&a, &h, &f, &cfg).unwrap();
        let tb = evolve(&b, &h, &f, &cfg).unwrap();
        for (k, &t) in times.iter().enumerate() {
            let idx = ta.times.iter().position(|&s| (s - t).abs() < 1e-9).unwrap();
            let sum = ta.states[idx].matrix() * Complex64::new(w, 0.0) + tb.states[idx].matrix() * Complex64::new(1.0 - w, 0.0);
            prop_assert!((mix.averages[k].matrix() - sum).norm() < 1e-13);
        }
    }
}

proptest! {
    // long runs: few cases
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn isospectral_long_run(seed in any::<u64>(), dim in 2usize..=4, q in prop::sample::select(vec![0.5, 1.0, 2.0, 3.0])) {
        let mut rng = random::seeded(seed);
        let rho = random::density(&mut rng, dim);
        let h = random::hermitian(&mut rng, dim);
        let f = DeformationFunction::power(q).unwrap();
        let cfg = IntegratorConfig::new(1e-3, 10.0).unwrap().with_record_every(50);
        let traj = evolve(&rho, &h, &f, &cfg).unwrap();
        let r = invariant_report(&traj).unwrap();
        prop_assert!(r.eigenvalue_drift < 1e-9, "eigenvalues {:e}", r.eigenvalue_drift);
        prop_assert!(r.max_casimir_drift(2..=5) < 1e-8, "casimirs {:e}", r.max_casimir_drift(2..=5));
        // second-order truncation: |ΔE| ~ dt² t ‖H‖ × O(1e-3), so the bound is
        // relative to the energy scale rather than to E(0), which may vanish
        let e0 = traj.invariants[0].energy;
        let abs_drift = traj.invariants.iter().map(|s| (s.energy - e0).abs()).fold(0.0f64, f64::max);
        prop_assert!(abs_drift < 1e-7 * op_norm(&h), "energy {:e}", abs_drift);
        for s in &traj.states {
            prop_assert!((s.trace() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn pure_states_follow_the_linear_flow(seed in any::<u64>(), dim in 2usize..=4, q in prop::sample::select(vec![0.5, 2.0, 3.0])) {
        let mut rng = random::seeded(seed);
        let rho = random::pure(&mut rng, dim);
        let h = random::hermitian(&mut rng, dim);
        let (dt, t) = (1e-3, 1.0);
        let cfg = IntegratorConfig::new(dt, t).unwrap().with_record_every(100);
        let nonlinear = evolve(&rho, &h, &DeformationFunction::power(q).unwrap(), &cfg).unwrap();
        let linear = evolve(&rho, &h, &DeformationFunction::identity(), &cfg).unwrap();
        for ((s, a), b) in nonlinear.times.iter().zip(&nonlinear.states).zip(&linear.states) {
            let bound = 1e-8 * (s / dt).max(1.0);
            prop_assert!(trace_distance(a, b).unwrap() < bound);
        }
    }

    #[test]
    fn second_order_convergence(seed in any::<u64>(), q in prop::sample::select(vec![2.0, 3.0])) {
        let mut rng = random::seeded(seed);
        let rho = random::density(&mut rng, 2);
        let h = random::hermitian(&mut rng, 2);
        let f = DeformationFunction::power(q).unwrap();
        let t = 5.0;
        let end = |dt: f64| {
            let cfg = IntegratorConfig::new(dt, t).unwrap().with_record_every(usize::MAX);
            evolve(&rho, &h, &f, &cfg).unwrap().last().unwrap().clone()
        };
        let reference = end(1e-3);
        let errors: Vec<f64> = [0.04, 0.02, 0.01].iter().map(|&dt| trace_distance(&end(dt), &reference).unwrap()).collect();
        prop_assume!(errors[2] > 1e-11);
        for w in errors.windows(2) {
            let ratio = w[0] / w[1];
            prop_assert!((ratio / 4.0 - 1.0).abs() < 0.2, "ratio {ratio}");
        }
    }

    #[test]
    fn larmor_law(lam in 0.55f64..0.95, q in 1.5f64..3.0, phi in 0.3f64..2.8) {
        let f = DeformationFunction::power(q).unwrap();
        let rho = bloch_state(BlochParams::new(lam, phi, 0.0).unwrap()).unwrap();
        let cfg = IntegratorConfig::new(1e-3, 10.0).unwrap();
        let traj = evolve(&rho, &HermitianOperator::spin_z(1.0), &f, &cfg).unwrap();
        let measured = precession_frequency(&traj, (0, 1)).unwrap();
        let predicted = larmor_frequency(&f, 1.0, lam).unwrap().abs();
        prop_assert!((measured - predicted).abs() / predicted < 1e-5);
        let z0 = traj.states[0].bloch_vector().unwrap()[2];
        for s in &traj.states {
            prop_assert!((s.bloch_vector().unwrap()[2] - z0).abs() < 1e-9);
        }
    }

    #[test]
    fn composite_closure(seed in any::<u64>(), rank in 1usize..=2) {
        let mut rng = random::seeded(seed);
        let rho = random::density_with_rank(&mut rng, 4, rank);
        let sys = CompositeSystem::tsallis(random::hermitian(&mut rng, 2), random::hermitian(&mut rng, 2), 1.5, 2.5).unwrap();
        let cfg = IntegratorConfig::new(1e-3, 10.0).unwrap().with_record_every(100);
        let traj = evolve_composite(&rho, &sys, &cfg).unwrap();
        let closure = reduction_consistency(&traj, &sys, &cfg).unwrap();
        prop_assert!(closure.max_deviation() < 1e-7);
        prop_assert!(closure.purity_drift_i.max(closure.purity_drift_ii) < 1e-8);
        let r = invariant_report(&traj).unwrap();
        prop_assert!(r.eigenvalue_drift < 1e-9);
        prop_assert!(r.max_casimir_drift(1..=4) < 1e-8);
        for n in 1..=4 {
            let c0 = casimir(&traj.states[0], n).unwrap();
            let c1 = casimir(traj.last().unwrap(), n).unwrap();
            prop_assert!((c1 - c0).abs() < 1e-8 * c0.abs().max(1.0));
        }
    }
}
