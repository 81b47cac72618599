use std::collections::BTreeMap;
use std::time::Instant;

use rand::Rng;

use super::config::{BracketSpec, EnsembleConfig, EquilibriumAnalysis, EvolveAnalysis, ScenarioConfig, ScenarioKind};
use super::report::{Check, PlotData, RunReport, ScenarioRun};
use crate::composite::{evolve_composite, reduction_consistency, CompositeSystem};
use crate::deformation::DeformationFunction;
use crate::dynamics::{
    evolve, invariant_report, larmor_frequency, precession_frequency, IntegratorConfig, InvariantReport, Trajectory,
};
use crate::ensemble::{
    analytic_deviation, cross_check, decay_check, ensemble_series, EnsembleSpec, SIGNAL_FLOOR,
};
use crate::error::{NvneError, Result};
use crate::hermitian::{bloch_state, trace_distance, trace_product, BlochParams, DensityMatrix, HermitianOperator, Operator};
use crate::lie_poisson::{bracket_of_gradients, ObservableFunctional};
use crate::random;
use crate::thermo::{
    spin_equilibrium, spin_free_energy, spin_free_energy_derivative, ThermoParams,
};

/// Collects checks, headline numbers and notes for one run.
struct Builder<'a> {
    cfg: &'a ScenarioConfig,
    checks: Vec<Check>,
    headline: BTreeMap<String, f64>,
    notes: Vec<String>,
    invariants: Option<InvariantReport>,
}

impl<'a> Builder<'a> {
    fn new(cfg: &'a ScenarioConfig) -> Self {
        Self {
            cfg,
            checks: Vec::new(),
            headline: BTreeMap::new(),
            notes: Vec::new(),
            invariants: None,
        }
    }

    fn below(&mut self, name: &str, value: f64, default: f64) {
        let threshold = self.cfg.threshold(name, default);
        self.checks.push(Check::below(name, finite(value), threshold));
    }

    fn above(&mut self, name: &str, value: f64, default: f64) {
        let threshold = self.cfg.threshold(name, default);
        self.checks.push(Check::above(name, finite(value), threshold));
    }

    fn headline(&mut self, name: &str, value: f64) {
        self.headline.insert(name.to_string(), finite(value));
    }

    fn invariant_checks(&mut self, report: InvariantReport, casimirs: std::ops::RangeInclusive<usize>) {
        self.below("eigenvalue_drift", report.eigenvalue_drift, 1e-9);
        let label = format!("casimir_drift_{}_{}", casimirs.start(), casimirs.end());
        self.below(&label, report.max_casimir_drift(casimirs), 1e-8);
        self.invariants = Some(report);
    }

    fn finish(self, started: Instant) -> RunReport {
        RunReport {
            scenario_id: self.cfg.id.clone(),
            kind: self.cfg.kind,
            passed: self.checks.iter().all(|c| c.passed),
            checks: self.checks,
            headline: self.headline,
            invariants: self.invariants,
            notes: self.notes,
            wall_clock_seconds: started.elapsed().as_secs_f64(),
        }
    }
}

/// JSON has no infinities or NaN; report them as the largest finite value.
fn finite(x: f64) -> f64 {
    if x.is_nan() || x == f64::INFINITY {
        f64::MAX
    } else if x == f64::NEG_INFINITY {
        f64::MIN
    } else {
        x
    }
}

/// Validates the parts of the config the scenario kind needs, without
/// running anything expensive.
pub fn check_config(cfg: &ScenarioConfig) -> Result<()> {
    match cfg.kind {
        ScenarioKind::Evolve => {
            let h = single_hamiltonian(cfg)?;
            cfg.exponent("q", cfg.q)?;
            cfg.initial_state(h.dim())?;
            cfg.integrator()?;
        }
        ScenarioKind::Composite => {
            let sys = composite_system(cfg)?;
            cfg.initial_state(sys.dim())?;
            cfg.integrator()?;
        }
        ScenarioKind::Equilibrium => {
            thermo_params(cfg)?;
            if cfg.equilibrium.as_ref().is_some_and(|e| e.tilt.is_some()) {
                cfg.integrator()?;
            }
        }
        ScenarioKind::Ensemble => {
            ensemble_spec(cfg)?;
        }
        ScenarioKind::BracketCheck => {
            bracket_spec(cfg)?;
        }
    }
    for (name, value) in &cfg.thresholds {
        if !value.is_finite() {
            return Err(NvneError::config(format!("thresholds.{name}"), "must be finite"));
        }
    }
    Ok(())
}

/// Runs the scenario and returns the report together with its data.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<ScenarioRun> {
    check_config(cfg)?;
    let started = Instant::now();
    let mut b = Builder::new(cfg);
    let (trajectory, plot) = match cfg.kind {
        ScenarioKind::Evolve => run_evolve(cfg, &mut b)?,
        ScenarioKind::Composite => (Some(run_composite(cfg, &mut b)?), None),
        ScenarioKind::Equilibrium => run_equilibrium(cfg, &mut b)?,
        ScenarioKind::Ensemble => (None, run_ensemble(cfg, &mut b)?),
        ScenarioKind::BracketCheck => {
            run_brackets(cfg, &mut b)?;
            (None, None)
        }
    };
    Ok(ScenarioRun {
        report: b.finish(started),
        trajectory,
        plot,
    })
}

fn single_hamiltonian(cfg: &ScenarioConfig) -> Result<HermitianOperator> {
    let h = cfg.hamiltonian()?;
    let dim = cfg.system()?.dimension;
    if h.dim() != dim {
        return Err(NvneError::config(
            "system.dimension",
            format!("dimension {dim} does not match the Hamiltonian ({})", h.dim()),
        ));
    }
    Ok(h)
}

fn spin_field(cfg: &ScenarioConfig, what: &str) -> Result<f64> {
    cfg.system()?
        .hamiltonian
        .spin_field()
        .ok_or_else(|| NvneError::config("system.hamiltonian", format!("{what} needs the spin-z preset")))
}

fn run_evolve(cfg: &ScenarioConfig, b: &mut Builder) -> Result<(Option<Trajectory>, Option<PlotData>)> {
    let h = single_hamiltonian(cfg)?;
    let f = DeformationFunction::power(cfg.exponent("q", cfg.q)?)?;
    let rho0 = cfg.initial_state(h.dim())?;
    let icfg = cfg.integrator()?;
    let analysis = cfg.analysis.clone().unwrap_or_default();
    let traj = evolve(&rho0, &h, &f, &icfg)?;
    let inv = invariant_report(&traj)?;
    b.headline("energy_initial", traj.invariants[0].energy);
    if analysis.skip_invariants {
        b.invariants = Some(inv);
    } else {
        b.below("energy_drift", inv.energy_drift, 1e-8);
        b.invariant_checks(inv, 2..=5);
    }
    if let Some([i, j]) = analysis.precession_element {
        let mu = spin_field(cfg, "precession_element")?;
        let measured = precession_frequency(&traj, (i, j))?;
        let spectrum = rho0.eigenvalues()?;
        let predicted = larmor_frequency(&f, mu, spectrum[spectrum.len() - 1])?.abs();
        b.headline("omega_measured", measured);
        b.headline("omega_predicted", predicted);
        b.below("omega_relative_error", (measured - predicted).abs() / predicted, 1e-5);
        b.below("sigma_z_drift", sigma_z_drift(&traj)?, 1e-9);
    }
    let mut plot = None;
    if let Some(qs) = &analysis.compare_linear {
        plot = Some(compare_linear(&rho0, &h, qs, &icfg, b)?);
    }
    if let Some(study) = &analysis.convergence {
        plot = Some(convergence(&rho0, &h, &f, study, icfg.t_final, b)?);
    }
    if analysis.larmor_sweep.is_some() {
        plot = Some(larmor_sweep(cfg, &analysis, &icfg, b)?);
    }
    Ok((Some(traj), plot))
}

fn sigma_z_drift(traj: &Trajectory) -> Result<f64> {
    let z0 = traj.states[0].bloch_vector()?[2];
    let mut worst = 0.0f64;
    for s in &traj.states {
        worst = worst.max((s.bloch_vector()?[2] - z0).abs());
    }
    Ok(worst)
}

fn compare_linear(
    rho0: &DensityMatrix,
    h: &HermitianOperator,
    qs: &[f64],
    icfg: &IntegratorConfig,
    b: &mut Builder,
) -> Result<PlotData> {
    let linear = evolve(rho0, h, &DeformationFunction::identity(), icfg)?;
    let mut plot = PlotData::new("compare_linear", &["q", "final_distance", "max_distance"]);
    let mut worst_final = 0.0f64;
    for &q in qs {
        let traj = evolve(rho0, h, &DeformationFunction::power(q)?, icfg)?;
        let mut max_d = 0.0f64;
        for (a, l) in traj.states.iter().zip(&linear.states) {
            max_d = max_d.max(trace_distance(a, l)?);
        }
        let final_d = trace_distance(traj.last().expect("nonempty"), linear.last().expect("nonempty"))?;
        b.headline(&format!("linear_distance_q{q}"), final_d);
        worst_final = worst_final.max(final_d);
        plot.push(vec![q, final_d, max_d]);
    }
    b.below("linear_distance_final", worst_final, 1e-7);
    Ok(plot)
}

fn convergence(
    rho0: &DensityMatrix,
    h: &HermitianOperator,
    f: &DeformationFunction,
    study: &super::config::ConvergenceStudy,
    t_final: f64,
    b: &mut Builder,
) -> Result<PlotData> {
    if study.dts.len() < 2 || study.reference_divisor < 2 {
        return Err(NvneError::config(
            "analysis.convergence",
            "need at least two step sizes and a reference divisor of at least 2",
        ));
    }
    let final_state = |dt: f64| -> Result<DensityMatrix> {
        let c = IntegratorConfig::new(dt, t_final)?.with_record_every(usize::MAX);
        Ok(evolve(rho0, h, f, &c)?.last().expect("nonempty").clone())
    };
    let smallest = study.dts.iter().copied().fold(f64::INFINITY, f64::min);
    let reference = final_state(smallest / study.reference_divisor as f64)?;
    let mut plot = PlotData::new("convergence", &["dt", "error"]);
    let mut errors = Vec::new();
    for &dt in &study.dts {
        let e = trace_distance(&final_state(dt)?, &reference)?;
        errors.push(e);
        plot.push(vec![dt, e]);
    }
    let mut worst = 0.0f64;
    for (k, w) in errors.windows(2).enumerate() {
        let ratio = w[0] / w[1];
        b.headline(&format!("convergence_ratio_{k}"), ratio);
        worst = worst.max((ratio / 4.0 - 1.0).abs());
    }
    b.below("convergence_ratio_deviation", worst, 0.2);
    Ok(plot)
}

fn larmor_sweep(
    cfg: &ScenarioConfig,
    analysis: &EvolveAnalysis,
    icfg: &IntegratorConfig,
    b: &mut Builder,
) -> Result<PlotData> {
    let sweep = analysis.larmor_sweep.as_ref().expect("checked by caller");
    let mu = spin_field(cfg, "larmor_sweep")?;
    let h = HermitianOperator::spin_z(mu);
    let mut plot = PlotData::new(
        "larmor_sweep",
        &["q", "lam", "omega_measured", "omega_predicted", "relative_error", "sigma_z_drift"],
    );
    let mut worst_rel = 0.0f64;
    let mut worst_z = 0.0f64;
    for &q in &sweep.q {
        let f = DeformationFunction::power(q)?;
        for &lam in &sweep.lam {
            let params = BlochParams::new(lam, sweep.phi, 0.0).map_err(|e| NvneError::config("analysis.larmor_sweep.lam", e.to_string()))?;
            let traj = evolve(&bloch_state(params)?, &h, &f, icfg)?;
            let measured = precession_frequency(&traj, (0, 1))?;
            let predicted = larmor_frequency(&f, mu, lam)?.abs();
            let rel = (measured - predicted).abs() / predicted;
            let dz = sigma_z_drift(&traj)?;
            worst_rel = worst_rel.max(rel);
            worst_z = worst_z.max(dz);
            plot.push(vec![q, lam, measured, predicted, rel, dz]);
        }
    }
    b.below("larmor_relative_error", worst_rel, 1e-5);
    b.below("larmor_sigma_z_drift", worst_z, 1e-9);
    Ok(plot)
}

fn composite_system(cfg: &ScenarioConfig) -> Result<CompositeSystem> {
    let sys = cfg.system()?;
    let h_i = sys.hamiltonian.build("system.hamiltonian")?;
    let h_ii = cfg
        .require(&sys.hamiltonian_ii, "system.hamiltonian_ii")?
        .build("system.hamiltonian_ii")?;
    let q1 = cfg.exponent("q1", cfg.q1)?;
    let q2 = cfg.exponent("q2", cfg.q2)?;
    let composite = CompositeSystem::tsallis(h_i, h_ii, q1, q2)?;
    if composite.dim() != sys.dimension {
        return Err(NvneError::config(
            "system.dimension",
            format!("dimension {} does not match dim_I * dim_II = {}", sys.dimension, composite.dim()),
        ));
    }
    Ok(composite)
}

fn run_composite(cfg: &ScenarioConfig, b: &mut Builder) -> Result<Trajectory> {
    let sys = composite_system(cfg)?;
    let rho0 = cfg.initial_state(sys.dim())?;
    let icfg = cfg.integrator()?;
    let traj = evolve_composite(&rho0, &sys, &icfg)?;
    let closure = reduction_consistency(&traj, &sys, &icfg)?;
    let inv = invariant_report(&traj)?;
    let reduced = crate::hermitian::partial_trace(&rho0, sys.dims(), crate::hermitian::Subsystem::I)?;
    b.headline("initial_reduced_purity_i", reduced.purity());
    b.headline("closure_deviation_i", closure.max_deviation_i);
    b.headline("closure_deviation_ii", closure.max_deviation_ii);
    b.headline("energy_drift", inv.energy_drift);
    b.below("closure_deviation", closure.max_deviation(), 1e-7);
    b.below(
        "reduced_purity_drift",
        closure.purity_drift_i.max(closure.purity_drift_ii),
        1e-8,
    );
    b.invariant_checks(inv, 1..=4);
    Ok(traj)
}

fn thermo_params(cfg: &ScenarioConfig) -> Result<ThermoParams> {
    let t = cfg.require(&cfg.thermo, "thermo")?;
    let q = cfg.exponent("q", cfg.q)?;
    if !(t.beta.is_finite() && t.beta > 0.0) {
        return Err(NvneError::config("thermo.beta", format!("must be positive, got {}", t.beta)));
    }
    if !(t.mu.is_finite() && t.mu > 0.0) {
        return Err(NvneError::config("thermo.mu", format!("must be positive, got {}", t.mu)));
    }
    ThermoParams::new(q, t.beta, t.mu)
}

fn gibbs_lambda(beta_mu: f64) -> f64 {
    1.0 / (1.0 + (-2.0 * beta_mu).exp())
}

fn run_equilibrium(cfg: &ScenarioConfig, b: &mut Builder) -> Result<(Option<Trajectory>, Option<PlotData>)> {
    let p = thermo_params(cfg)?;
    let analysis: EquilibriumAnalysis = cfg.equilibrium.clone().unwrap_or_default();
    let eq = spin_equilibrium(&p)?;
    b.headline("lam_eq", eq.lam);
    b.headline("free_energy", eq.free_energy);
    b.headline("first_derivative", eq.first_derivative);
    b.headline("second_derivative", eq.second_derivative);
    b.below("stationarity", eq.first_derivative.abs(), 1e-8);
    b.above("second_derivative", eq.second_derivative, 0.0);
    if let Some(expected) = analysis.expected_lam {
        b.below("lam_eq_error", (eq.lam - expected).abs(), 1e-10);
    }
    if let Some(offsets) = &analysis.gibbs_limit {
        let target = gibbs_lambda(p.beta * p.mu);
        b.headline("lam_gibbs", target);
        let mut worst = 0.0f64;
        for &d in offsets {
            for q in [1.0 - d, 1.0 + d] {
                let near = spin_equilibrium(&ThermoParams::new(q, p.beta, p.mu)?)?;
                worst = worst.max((near.lam - target).abs());
            }
        }
        b.below("gibbs_limit_error", worst, 1e-6);
    }
    if let Some(grid) = &analysis.grid {
        let mut min_second = f64::INFINITY;
        let mut solved = 0usize;
        let mut skipped = 0usize;
        for &q in &grid.q {
            for &bm in &grid.beta_mu {
                let coupling = (q - 1.0).abs() * bm;
                if !(coupling > 0.0 && coupling < 1.0) {
                    skipped += 1;
                    continue;
                }
                let r = spin_equilibrium(&ThermoParams::new(q, bm / p.mu, p.mu)?)?;
                min_second = min_second.min(r.second_derivative);
                solved += 1;
            }
        }
        b.headline("grid_points_solved", solved as f64);
        b.headline("grid_points_outside_domain", skipped as f64);
        if solved == 0 {
            return Err(NvneError::config("equilibrium.grid", "no grid point lies inside 0 < |q-1| beta mu < 1"));
        }
        b.above("grid_min_second_derivative", min_second, 0.0);
    }
    let mut trajectory = None;
    if let Some(tilt) = analysis.tilt {
        let icfg = cfg.integrator()?;
        let start = bloch_state(BlochParams::new(eq.lam, tilt, 0.0)?)?;
        let traj = evolve(&start, &HermitianOperator::spin_z(p.mu), &DeformationFunction::power(p.q)?, &icfg)?;
        let initial = trace_distance(&start, &eq.state)?;
        let mut max_d = 0.0f64;
        for s in &traj.states {
            max_d = max_d.max(trace_distance(s, &eq.state)?);
        }
        b.headline("perturbation_initial_distance", initial);
        b.headline("perturbation_max_distance", max_d);
        b.below("perturbation_excursion_ratio", max_d / initial, 2.0);
        trajectory = Some(traj);
    }
    let mut plot = PlotData::new("free_energy", &["lam", "free_energy", "dF_dlam"]);
    for k in 1..200 {
        let lam = k as f64 / 200.0;
        plot.push(vec![lam, spin_free_energy(&p, lam), spin_free_energy_derivative(&p, lam)]);
    }
    Ok((trajectory, Some(plot)))
}

fn ensemble_spec(cfg: &ScenarioConfig) -> Result<(EnsembleSpec, &EnsembleConfig)> {
    let e = cfg.require(&cfg.ensemble, "ensemble")?;
    let h = single_hamiltonian(cfg)?;
    let f = DeformationFunction::power(cfg.exponent("q", cfg.q)?)?;
    let spec = EnsembleSpec::new(e.weight, e.counts(), f, h)?.with_propagation(e.propagation);
    Ok((spec, e))
}

fn run_ensemble(cfg: &ScenarioConfig, b: &mut Builder) -> Result<Option<PlotData>> {
    let (spec, e) = ensemble_spec(cfg)?;
    let icfg = cfg.integrator.unwrap_or_default();
    icfg.validate()?;
    b.below("weight_normalization_error", (spec.normalization()? - 1.0).abs(), 1e-8);
    let mut node_drift = 0.0f64;
    if !e.compare_times.is_empty() {
        let d = analytic_deviation(&spec, &e.compare_times, &icfg, e.analytic_n_lam)?;
        b.below("analytic_max_deviation", d, 1e-5);
        let series = ensemble_series(&spec, &e.compare_times, &icfg)?;
        node_drift = node_drift.max(series.max_node_eigenvalue_drift);
    }
    if let Some(decay) = &e.decay {
        let dc = decay_check(&spec, decay.window, decay.samples, decay.late_time, decay.threshold, &icfg)?;
        b.headline("offdiag_peak", dc.peak);
        b.headline("offdiag_peak_time", dc.peak_time);
        b.headline("offdiag_late", dc.late);
        b.above("offdiag_peak_above_floor", dc.peak, SIGNAL_FLOOR);
        let threshold = b.cfg.threshold("decay_ratio", decay.threshold);
        let ratio = dc.late / dc.peak.max(f64::MIN_POSITIVE);
        b.checks.push(Check::below("decay_ratio", finite(ratio), threshold).fail_unless(dc.ratio.is_some()));
        if dc.ratio.is_none() {
            b.notes.push(format!(
                "the averaged off-diagonal element never exceeds {SIGNAL_FLOOR:e} on [0, {}]: there is no coherence whose decay could be measured",
                decay.window
            ));
        }
    }
    if let Some(cc) = &e.cross_check {
        let r = cross_check(&spec, cc.lam_stride, &cc.integrator)?;
        b.headline("cross_check_nodes", r.nodes_checked as f64);
        b.below("cross_check_deviation", r.max_deviation, 1e-8);
        node_drift = node_drift.max(r.max_eigenvalue_drift);
    }
    if !e.compare_times.is_empty() || e.cross_check.is_some() {
        b.below("node_eigenvalue_drift", node_drift, 1e-9);
    }
    if !e.purity_times.is_empty() {
        let series = ensemble_series(&spec, &e.purity_times, &icfg)?;
        let p = series.purities();
        let rise = p.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max);
        b.headline("purity_max_increase", rise);
        for (t, v) in e.purity_times.iter().zip(&p) {
            b.headline(&format!("purity_t{t}"), *v);
        }
    }
    let Some((t_max, samples)) = e.plot else {
        return Ok(None);
    };
    if samples < 2 || !(t_max > 0.0) {
        return Err(NvneError::config("ensemble.plot", "need t_max > 0 and at least two samples"));
    }
    let times: Vec<f64> = (0..samples).map(|k| t_max * k as f64 / (samples - 1) as f64).collect();
    let series = ensemble_series(&spec, &times, &icfg)?;
    let mut plot = PlotData::new("dephasing", &["t", "offdiag_abs", "purity"]);
    for ((t, a), p) in times.iter().zip(series.offdiag_abs()).zip(series.purities()) {
        plot.push(vec![*t, a, p]);
    }
    Ok(Some(plot))
}

fn bracket_spec(cfg: &ScenarioConfig) -> Result<&BracketSpec> {
    let s = cfg.require(&cfg.bracket, "bracket")?;
    if s.dimension < 2 {
        return Err(NvneError::config("bracket.dimension", "must be at least 2"));
    }
    if s.states == 0 || s.max_casimir == 0 || s.max_average == 0 || s.functionals < 2 {
        return Err(NvneError::config(
            "bracket",
            "states, max_casimir and max_average must be positive and functionals at least 2",
        ));
    }
    Ok(s)
}

/// `F(ρ) = Tr Aρ + (Tr Bρ)² + sin Tr Cρ²` with random Hermitian `A, B, C`.
fn random_functional<R: Rng>(rng: &mut R, dim: usize, k: usize) -> ObservableFunctional {
    let a = random::hermitian(rng, dim).into_matrix();
    let bm = random::hermitian(rng, dim).into_matrix();
    let c = random::hermitian(rng, dim).into_matrix();
    ObservableFunctional::from_fn(format!("F{k}"), move |m| {
        let tb = trace_product(&bm, m);
        Ok(trace_product(&a, m) + tb * tb + trace_product(&c, &(m * m)).sin())
    })
}

fn relative_gap(a: &HermitianOperator, b: &HermitianOperator) -> f64 {
    (a.matrix() - b.matrix()).norm() / a.matrix().norm().max(1e-300)
}

fn run_brackets(cfg: &ScenarioConfig, b: &mut Builder) -> Result<()> {
    let s = bracket_spec(cfg)?;
    let mut rng = random::seeded(s.seed);
    let h = random::hermitian(&mut rng, s.dimension);
    let functionals: Vec<ObservableFunctional> =
        (0..s.functionals).map(|k| random_functional(&mut rng, s.dimension, k)).collect();
    let casimirs: Vec<ObservableFunctional> = (1..=s.max_casimir).map(ObservableFunctional::casimir).collect();
    let averages = (1..=s.max_average)
        .map(|n| ObservableFunctional::power_average(&h, n as f64))
        .collect::<Result<Vec<_>>>()?;
    let mut casimir_max = 0.0f64;
    let mut average_max = 0.0f64;
    let mut antisymmetry_max = 0.0f64;
    let mut gradient_gap = 0.0f64;
    let mut scale = 0.0f64;
    for _ in 0..s.states {
        let rho = random::density(&mut rng, s.dimension);
        let m = rho.matrix();
        let gf = functionals.iter().map(|f| f.gradient(m)).collect::<Result<Vec<_>>>()?;
        let gc = casimirs.iter().map(|f| f.gradient(m)).collect::<Result<Vec<_>>>()?;
        let ga = averages.iter().map(|f| f.gradient(m)).collect::<Result<Vec<_>>>()?;
        for (f, g) in casimirs.iter().zip(&gc).chain(averages.iter().zip(&ga)) {
            gradient_gap = gradient_gap.max(relative_gap(g, &f.finite_difference_gradient(m)?));
        }
        for c in &gc {
            for f in &gf {
                casimir_max = casimir_max.max(bracket_of_gradients(m, c.matrix(), f.matrix()).abs());
            }
        }
        for x in &ga {
            for y in &ga {
                average_max = average_max.max(bracket_of_gradients(m, x.matrix(), y.matrix()).abs());
            }
        }
        for pair in gf.windows(2) {
            let ab = bracket_of_gradients(m, pair[0].matrix(), pair[1].matrix());
            let ba = bracket_of_gradients(m, pair[1].matrix(), pair[0].matrix());
            antisymmetry_max = antisymmetry_max.max((ab + ba).abs());
            scale = scale.max(ab.abs());
        }
    }
    b.headline("typical_bracket_magnitude", scale);
    b.below("casimir_bracket_max", casimir_max, 1e-6);
    b.below("average_bracket_max", average_max, 1e-6);
    b.below("antisymmetry_max", antisymmetry_max, 1e-8);
    b.below("gradient_relative_gap", gradient_gap, 1e-5);
    Ok(())
}
