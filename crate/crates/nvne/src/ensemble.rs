//! Classical mixtures of spin-1/2 initial conditions.
//!
//! The weight `w(λ, φ, ψ)` lives on `[0,1] × [0,π] × [0,2π]` with measure
//! `dλ sinφ dφ dψ` and is integrated by a Gauss-Legendre product rule. Every
//! node evolves under the (nonlinear, state-dependent) dynamics and the
//! averages are accumulated afterwards, so the average itself obeys no closed
//! equation. For `H ∝ σ_z` the nodes precess rigidly, `ψ(t) = ψ₀ - ω(λ) t`,
//! and the closed form is used unless the integrator is requested.

use std::f64::consts::PI;
use std::num::NonZeroUsize;

use gauss_quad::legendre::GaussLegendre;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::deformation::DeformationFunction;
use crate::dynamics::{larmor_frequency, step_with_scheme, IntegratorConfig};
use crate::error::{NvneError, Result};
use crate::hermitian::{
    bloch_matrix, max_hermitian_deviation, trace_distance, BlochParams, CMatrix, DensityMatrix, HermitianOperator,
    Operator, ZERO,
};

/// Required accuracy of the quadrature normalization `∫ w = 1`.
pub const NORMALIZATION_TOL: f64 = 1e-8;

/// Off-diagonal magnitudes below this are treated as no signal when judging
/// decay.
pub const SIGNAL_FLOOR: f64 = 1e-10;

const MIN_ANALYTIC_NODES: usize = 16;

/// Normalized weight densities on the spin state space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightProfile {
    /// `w = sin(ψ/2) / 8`
    HalfAngle,
    /// `w = λ sin(ψ/2) / 4`, favoring states polarized along the Bloch direction.
    Biased,
    /// `w = 1 / 4π`
    Uniform,
}

impl WeightProfile {
    pub fn density(self, lam: f64, _phi: f64, psi: f64) -> f64 {
        match self {
            WeightProfile::HalfAngle => (0.5 * psi).sin() / 8.0,
            WeightProfile::Biased => lam * (0.5 * psi).sin() / 4.0,
            WeightProfile::Uniform => 0.25 / PI,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuadratureCounts {
    pub n_lam: usize,
    pub n_phi: usize,
    pub n_psi: usize,
}

impl QuadratureCounts {
    pub fn uniform(n: usize) -> Self {
        Self {
            n_lam: n,
            n_phi: n,
            n_psi: n,
        }
    }

    pub fn total(&self) -> usize {
        self.n_lam * self.n_phi * self.n_psi
    }
}

impl Default for QuadratureCounts {
    fn default() -> Self {
        Self::uniform(32)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Propagation {
    /// Closed-form precession when `H = c 1 - μ σ_z`, integrator otherwise.
    #[default]
    Auto,
    Integrator,
}

/// One quadrature node: the initial state and its total weight, including
/// the quadrature weights and the `sinφ` Jacobian.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Node {
    pub lam: f64,
    pub phi: f64,
    pub psi: f64,
    pub weight: f64,
}

impl Node {
    pub fn state(&self) -> Result<DensityMatrix> {
        crate::hermitian::bloch_state(BlochParams::new(self.lam, self.phi, self.psi)?)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleSpec {
    pub weight: WeightProfile,
    pub counts: QuadratureCounts,
    pub f: DeformationFunction,
    pub h: HermitianOperator,
    pub propagation: Propagation,
}

fn gauss_legendre(n: usize, a: f64, b: f64) -> Result<Vec<(f64, f64)>> {
    let degree = NonZeroUsize::new(n).ok_or_else(|| NvneError::config("ensemble.nodes", "node counts must be positive"))?;
    let rule = GaussLegendre::new(degree);
    let half = 0.5 * (b - a);
    let mid = 0.5 * (b + a);
    Ok(rule.iter().map(|(x, w)| (mid + half * x, half * w)).collect())
}

impl EnsembleSpec {
    pub fn new(weight: WeightProfile, counts: QuadratureCounts, f: DeformationFunction, h: HermitianOperator) -> Result<Self> {
        let spec = Self {
            weight,
            counts,
            f,
            h,
            propagation: Propagation::Auto,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// `w = sin(ψ/2)/8`, `f = x^q`, `H = -μ σ_z`, 32 nodes per axis.
    pub fn half_angle(q: f64, mu: f64) -> Result<Self> {
        Self::new(
            WeightProfile::HalfAngle,
            QuadratureCounts::default(),
            DeformationFunction::power(q)?,
            HermitianOperator::spin_z(mu),
        )
    }

    pub fn with_propagation(mut self, propagation: Propagation) -> Self {
        self.propagation = propagation;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.h.dim() != 2 {
            return Err(NvneError::config(
                "system.hamiltonian",
                format!("ensembles are defined on spin-1/2 states, got dimension {}", self.h.dim()),
            ));
        }
        let norm = self.normalization()?;
        if (norm - 1.0).abs() > NORMALIZATION_TOL {
            return Err(NvneError::config(
                "ensemble.nodes",
                format!("quadrature of the weight gives {norm}, not 1 within {NORMALIZATION_TOL:e}"),
            ));
        }
        Ok(())
    }

    /// Quadrature of the weight over the state space.
    pub fn normalization(&self) -> Result<f64> {
        Ok(self.nodes()?.iter().map(|n| n.weight).sum())
    }

    pub fn nodes(&self) -> Result<Vec<Node>> {
        let lam = gauss_legendre(self.counts.n_lam, 0.0, 1.0)?;
        let phi = gauss_legendre(self.counts.n_phi, 0.0, PI)?;
        let psi = gauss_legendre(self.counts.n_psi, 0.0, 2.0 * PI)?;
        let mut nodes = Vec::with_capacity(self.counts.total());
        for &(l, wl) in &lam {
            for &(p, wp) in &phi {
                for &(s, ws) in &psi {
                    nodes.push(Node {
                        lam: l,
                        phi: p,
                        psi: s,
                        weight: self.weight.density(l, p, s) * p.sin() * wl * wp * ws,
                    });
                }
            }
        }
        Ok(nodes)
    }

    /// `μ` if `H = c 1 - μ σ_z`.
    pub fn precession_field(&self) -> Option<f64> {
        let m = self.h.matrix();
        if m[(0, 1)].norm() > 0.0 {
            return None;
        }
        Some(0.5 * (m[(1, 1)].re - m[(0, 0)].re))
    }

    fn closed_form_field(&self) -> Option<f64> {
        match self.propagation {
            Propagation::Auto => self.precession_field(),
            Propagation::Integrator => None,
        }
    }
}

/// Averages at several times.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleSeries {
    pub times: Vec<f64>,
    pub averages: Vec<DensityMatrix>,
    /// Largest change of any node eigenvalue over the requested times.
    pub max_node_eigenvalue_drift: f64,
}

impl EnsembleSeries {
    /// `|ρ̄_01|` at each time.
    pub fn offdiag_abs(&self) -> Vec<f64> {
        self.averages.iter().map(offdiag_abs).collect()
    }

    pub fn purities(&self) -> Vec<f64> {
        self.averages.iter().map(DensityMatrix::purity).collect()
    }
}

pub fn offdiag_abs(rho: &DensityMatrix) -> f64 {
    rho.matrix()[(0, 1)].norm()
}

/// Ascending eigenvalues of a 2×2 Hermitian matrix.
fn spectrum_2x2(m: &CMatrix) -> [f64; 2] {
    let mean = 0.5 * (m[(0, 0)].re + m[(1, 1)].re);
    let half_gap = (0.25 * (m[(0, 0)].re - m[(1, 1)].re).powi(2) + m[(0, 1)].norm_sqr()).sqrt();
    [mean - half_gap, mean + half_gap]
}

fn spectrum_drift(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).abs().max((a[1] - b[1]).abs())
}

fn check_times(times: &[f64]) -> Result<()> {
    if times.is_empty() {
        return Err(NvneError::config("ensemble.times", "no output times"));
    }
    if let Some(&t) = times.iter().find(|t| !(t.is_finite() && **t >= 0.0)) {
        return Err(NvneError::config("ensemble.times", format!("times must be finite and nonnegative, got {t}")));
    }
    Ok(())
}

/// Step counts at which `times` are reached with step `dt`. Times must be
/// multiples of `dt`.
fn step_indices(times: &[f64], dt: f64) -> Result<Vec<usize>> {
    times
        .iter()
        .map(|&t| {
            let k = (t / dt).round();
            if (k * dt - t).abs() > 1e-9 * t.max(1.0) {
                Err(NvneError::config(
                    "integrator.dt",
                    format!("output time {t} is not a multiple of dt = {dt}"),
                ))
            } else {
                Ok(k as usize)
            }
        })
        .collect()
}

fn empty_sums(n: usize) -> Vec<CMatrix> {
    vec![CMatrix::from_element(2, 2, ZERO); n]
}

/// Per-chunk partial sums and drifts, added in chunk order so the result does
/// not depend on scheduling.
fn reduce(parts: Vec<(Vec<CMatrix>, f64)>, n_times: usize) -> (Vec<CMatrix>, f64) {
    let mut sums = empty_sums(n_times);
    let mut drift = 0.0f64;
    for (part, d) in parts {
        for (s, p) in sums.iter_mut().zip(part) {
            *s += p;
        }
        drift = drift.max(d);
    }
    (sums, drift)
}

fn closed_form_series(spec: &EnsembleSpec, mu: f64, times: &[f64]) -> Result<(Vec<CMatrix>, f64)> {
    let nodes = spec.nodes()?;
    let per_lam = spec.counts.n_phi * spec.counts.n_psi;
    let parts = nodes
        .par_chunks(per_lam)
        .map(|chunk| -> Result<(Vec<CMatrix>, f64)> {
            let omega = larmor_frequency(&spec.f, mu, chunk[0].lam)?;
            let mut sums = empty_sums(times.len());
            let mut drift = 0.0f64;
            for node in chunk {
                let initial = spectrum_2x2(&bloch_matrix(node.lam, node.phi, node.psi));
                let w = Complex64::new(node.weight, 0.0);
                for (sum, &t) in sums.iter_mut().zip(times) {
                    let m = bloch_matrix(node.lam, node.phi, node.psi - omega * t);
                    drift = drift.max(spectrum_drift(spectrum_2x2(&m), initial));
                    *sum += m * w;
                }
            }
            Ok((sums, drift))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(reduce(parts, times.len()))
}

/// Evolves one state and returns it at the requested step counts, plus its
/// largest eigenvalue drift.
fn integrate_node(
    rho0: &DensityMatrix,
    h: &HermitianOperator,
    f: &DeformationFunction,
    targets: &[usize],
    cfg: &IntegratorConfig,
) -> Result<(Vec<DensityMatrix>, f64)> {
    let last = targets.iter().copied().max().unwrap_or(0);
    let initial = rho0.eigenvalues()?;
    let mut at_step = vec![None; last + 1];
    for &k in targets {
        at_step[k] = Some(());
    }
    let mut rho = rho0.clone();
    let mut snapshots = std::collections::BTreeMap::new();
    let mut drift = 0.0f64;
    for (k, wanted) in at_step.iter().enumerate() {
        if k > 0 {
            rho = step_with_scheme(&rho, h, f, cfg.dt, cfg.scheme)?;
        }
        if wanted.is_some() {
            let ev = rho.eigenvalues()?;
            for (a, b) in ev.iter().zip(&initial) {
                drift = drift.max((a - b).abs());
            }
            snapshots.insert(k, rho.clone());
        }
    }
    Ok((targets.iter().map(|k| snapshots[k].clone()).collect(), drift))
}

fn integrated_series(spec: &EnsembleSpec, times: &[f64], cfg: &IntegratorConfig) -> Result<(Vec<CMatrix>, f64)> {
    let targets = step_indices(times, cfg.dt)?;
    let nodes = spec.nodes()?;
    let parts = nodes
        .par_iter()
        .map(|node| -> Result<(Vec<CMatrix>, f64)> {
            let (states, drift) = integrate_node(&node.state()?, &spec.h, &spec.f, &targets, cfg)?;
            let w = Complex64::new(node.weight, 0.0);
            Ok((states.iter().map(|s| s.matrix() * w).collect(), drift))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(reduce(parts, times.len()))
}

fn finish(sums: Vec<CMatrix>, times: &[f64], drift: f64) -> Result<EnsembleSeries> {
    let averages = sums
        .into_iter()
        .map(|m| DensityMatrix::new(crate::hermitian::hermitize(&m)))
        .collect::<Result<Vec<_>>>()?;
    Ok(EnsembleSeries {
        times: times.to_vec(),
        averages,
        max_node_eigenvalue_drift: drift,
    })
}

/// Ensemble averages at `times`. Only `dt` and `scheme` of `cfg` are used, and
/// only when nodes are integrated; then every time must be a multiple of `dt`.
pub fn ensemble_series(spec: &EnsembleSpec, times: &[f64], cfg: &IntegratorConfig) -> Result<EnsembleSeries> {
    spec.validate()?;
    check_times(times)?;
    let (sums, drift) = match spec.closed_form_field() {
        Some(mu) => closed_form_series(spec, mu, times)?,
        None => {
            cfg.validate()?;
            integrated_series(spec, times, cfg)?
        }
    };
    finish(sums, times, drift)
}

/// `Σ_nodes w_node ρ_node(t)`.
pub fn ensemble_average(spec: &EnsembleSpec, t: f64, cfg: &IntegratorConfig) -> Result<DensityMatrix> {
    let mut series = ensemble_series(spec, &[t], cfg)?;
    Ok(series.averages.remove(0))
}

/// Average of an explicit finite mixture, every member integrated. Weights
/// must be nonnegative and sum to 1.
pub fn mixture_series(
    members: &[(DensityMatrix, f64)],
    h: &HermitianOperator,
    f: &DeformationFunction,
    times: &[f64],
    cfg: &IntegratorConfig,
) -> Result<EnsembleSeries> {
    check_times(times)?;
    cfg.validate()?;
    let total: f64 = members.iter().map(|m| m.1).sum();
    if members.is_empty() || members.iter().any(|m| m.1 < 0.0) || (total - 1.0).abs() > NORMALIZATION_TOL {
        return Err(NvneError::config("ensemble.weights", "mixture weights must be nonnegative and sum to 1"));
    }
    let dim = h.dim();
    if let Some((m, _)) = members.iter().find(|m| m.0.dim() != dim) {
        return Err(NvneError::DimensionMismatch {
            expected: dim,
            actual: m.dim(),
        });
    }
    let targets = step_indices(times, cfg.dt)?;
    let parts = members
        .par_iter()
        .map(|(rho, w)| -> Result<(Vec<CMatrix>, f64)> {
            let (states, drift) = integrate_node(rho, h, f, &targets, cfg)?;
            let w = Complex64::new(*w, 0.0);
            Ok((states.iter().map(|s| s.matrix() * w).collect(), drift))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut sums = vec![CMatrix::zeros(dim, dim); times.len()];
    let mut drift = 0.0f64;
    for (part, d) in parts {
        for (s, p) in sums.iter_mut().zip(part) {
            *s += p;
        }
        drift = drift.max(d);
    }
    finish(sums, times, drift)
}

/// `½ 1 + (π/24) ∫₀¹ dλ (2λ-1) (cos(ω t) σ_x + sin(ω t) σ_y)` with
/// `ω(λ) = 2μ (f(λ) - f(1-λ)) / (2λ - 1)`, by `n_lam`-point Gauss-Legendre.
pub fn dephasing_analytic(t: f64, f: &DeformationFunction, mu: f64, n_lam: usize) -> Result<DensityMatrix> {
    if n_lam < MIN_ANALYTIC_NODES {
        return Err(NvneError::config(
            "ensemble.n_lam",
            format!("at least {MIN_ANALYTIC_NODES} nodes required, got {n_lam}"),
        ));
    }
    let mut x = 0.0;
    let mut y = 0.0;
    for (lam, w) in gauss_legendre(n_lam, 0.0, 1.0)? {
        let (s, c) = (larmor_frequency(f, mu, lam)? * t).sin_cos();
        let r = w * (2.0 * lam - 1.0);
        x += r * c;
        y += r * s;
    }
    let k = PI / 24.0;
    let (x, y) = (k * x, k * y);
    let m = CMatrix::from_row_slice(
        2,
        2,
        &[
            Complex64::new(0.5, 0.0),
            Complex64::new(x, -y),
            Complex64::new(x, y),
            Complex64::new(0.5, 0.0),
        ],
    );
    DensityMatrix::new(m)
}

/// `max_t ||ensemble(t) - analytic(t)||_max` over `times`.
pub fn analytic_deviation(spec: &EnsembleSpec, times: &[f64], cfg: &IntegratorConfig, n_lam: usize) -> Result<f64> {
    let mu = spec
        .precession_field()
        .ok_or_else(|| NvneError::config("system.hamiltonian", "the analytic formula needs H proportional to σ_z"))?;
    let series = ensemble_series(spec, times, cfg)?;
    let mut worst = 0.0f64;
    for (avg, &t) in series.averages.iter().zip(times) {
        let exact = dephasing_analytic(t, &spec.f, mu, n_lam)?;
        let diff = avg.matrix() - exact.matrix();
        worst = worst.max(diff.iter().map(|z| z.norm()).fold(0.0, f64::max));
    }
    Ok(worst)
}

/// Decay of `|ρ̄_01|`: its value at `late_time` against its maximum over
/// `[0, window]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayCheck {
    pub peak: f64,
    pub peak_time: f64,
    pub late: f64,
    pub late_time: f64,
    /// `late / peak`, absent when the peak is below [`SIGNAL_FLOOR`].
    pub ratio: Option<f64>,
    pub threshold: f64,
    pub passed: bool,
}

pub fn decay_check(
    spec: &EnsembleSpec,
    window: f64,
    samples: usize,
    late_time: f64,
    threshold: f64,
    cfg: &IntegratorConfig,
) -> Result<DecayCheck> {
    if samples < 2 {
        return Err(NvneError::config("ensemble.samples", "need at least two samples in the window"));
    }
    let mut times: Vec<f64> = (0..samples).map(|k| window * k as f64 / (samples - 1) as f64).collect();
    times.push(late_time);
    let series = ensemble_series(spec, &times, cfg)?;
    let abs = series.offdiag_abs();
    let (peak_idx, peak) = abs[..samples]
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, v)| if v > best.1 { (i, v) } else { best });
    let late = abs[samples];
    let ratio = (peak > SIGNAL_FLOOR).then(|| late / peak);
    Ok(DecayCheck {
        peak,
        peak_time: times[peak_idx],
        late,
        late_time,
        ratio,
        threshold,
        passed: ratio.is_some_and(|r| r < threshold),
    })
}

/// Closed-form node trajectories against the integrator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossCheck {
    pub nodes_checked: usize,
    /// Largest trace distance between the two propagations.
    pub max_deviation: f64,
    /// Largest eigenvalue drift of the integrated nodes.
    pub max_eigenvalue_drift: f64,
}

/// Integrates every `lam_stride`-th λ node (at the central φ and ψ nodes) to
/// `cfg.t_final`, comparing with the closed form at every recorded step.
pub fn cross_check(spec: &EnsembleSpec, lam_stride: usize, cfg: &IntegratorConfig) -> Result<CrossCheck> {
    spec.validate()?;
    cfg.validate()?;
    let mu = spec
        .precession_field()
        .ok_or_else(|| NvneError::config("system.hamiltonian", "no closed form unless H is proportional to σ_z"))?;
    let stride = lam_stride.max(1);
    let nodes = spec.nodes()?;
    let per_lam = spec.counts.n_phi * spec.counts.n_psi;
    let centre = (spec.counts.n_phi / 2) * spec.counts.n_psi + spec.counts.n_psi / 2;
    let picked: Vec<Node> = (0..spec.counts.n_lam)
        .step_by(stride)
        .map(|i| nodes[i * per_lam + centre])
        .collect();
    let n = cfg.n_steps();
    let targets: Vec<usize> = (0..=n).filter(|k| k % cfg.record_every == 0 || *k == n).collect();
    let results = picked
        .par_iter()
        .map(|node| -> Result<(f64, f64)> {
            let omega = larmor_frequency(&spec.f, mu, node.lam)?;
            let (states, drift) = integrate_node(&node.state()?, &spec.h, &spec.f, &targets, cfg)?;
            let mut worst = 0.0f64;
            for (state, &k) in states.iter().zip(&targets) {
                let t = k as f64 * cfg.dt;
                let exact = DensityMatrix::new(bloch_matrix(node.lam, node.phi, node.psi - omega * t))?;
                worst = worst.max(trace_distance(state, &exact)?);
                debug_assert!(max_hermitian_deviation(state.matrix()) < 1e-12);
            }
            Ok((worst, drift))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CrossCheck {
        nodes_checked: picked.len(),
        max_deviation: results.iter().map(|r| r.0).fold(0.0, f64::max),
        max_eigenvalue_drift: results.iter().map(|r| r.1).fold(0.0, f64::max),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hermitian::bloch_state;

    fn cfg() -> IntegratorConfig {
        IntegratorConfig::default()
    }

    fn small(weight: WeightProfile, q: f64, n: usize) -> EnsembleSpec {
        with_counts(weight, q, QuadratureCounts::uniform(n))
    }

    fn with_counts(weight: WeightProfile, q: f64, counts: QuadratureCounts) -> EnsembleSpec {
        EnsembleSpec::new(
            weight,
            counts,
            DeformationFunction::power(q).unwrap(),
            HermitianOperator::spin_z(1.0),
        )
        .unwrap()
    }

    #[test]
    fn weights_are_normalized() {
        for w in [WeightProfile::HalfAngle, WeightProfile::Biased, WeightProfile::Uniform] {
            let spec = small(w, 3.0, 32);
            assert!((spec.normalization().unwrap() - 1.0).abs() < 1e-12, "{w:?}");
        }
    }

    #[test]
    fn too_coarse_quadrature_is_rejected() {
        let err = EnsembleSpec::new(
            WeightProfile::HalfAngle,
            QuadratureCounts::uniform(2),
            DeformationFunction::power(3.0).unwrap(),
            HermitianOperator::spin_z(1.0),
        )
        .unwrap_err();
        assert!(matches!(err, NvneError::Config { ref key, .. } if key == "ensemble.nodes"), "{err}");
    }

    #[test]
    fn half_angle_weight_average_starts_maximally_mixed() {
        let spec = small(WeightProfile::HalfAngle, 3.0, 32);
        let avg = ensemble_average(&spec, 0.0, &cfg()).unwrap();
        assert!(trace_distance(&avg, &DensityMatrix::maximally_mixed(2)).unwrap() < 1e-6);
    }

    #[test]
    fn analytic_formula_limits() {
        let half = DensityMatrix::maximally_mixed(2);
        for q in [1.0, 2.0, 3.0] {
            let f = DeformationFunction::power(q).unwrap();
            for t in [0.0, 1.0, 50.0] {
                let rho = dephasing_analytic(t, &f, 1.0, 32).unwrap();
                assert!(trace_distance(&rho, &half).unwrap() < 1e-15);
            }
        }
        assert!(dephasing_analytic(0.0, &DeformationFunction::identity(), 1.0, 8).is_err());
    }

    #[test]
    fn quadrature_matches_analytic() {
        let spec = small(WeightProfile::HalfAngle, 3.0, 16);
        let d = analytic_deviation(&spec, &[0.0, 1.0, 5.0, 20.0], &cfg(), 32).unwrap();
        assert!(d < 1e-5, "{d:e}");
    }

    #[test]
    fn linear_average_rotates_rigidly() {
        let spec = small(WeightProfile::Biased, 1.0, 12);
        let series = ensemble_series(&spec, &[0.0, 1.0, 7.5, 30.0], &cfg()).unwrap();
        let abs = series.offdiag_abs();
        assert!(abs[0] > 1e-2);
        for a in &abs {
            assert!((a - abs[0]).abs() < 1e-8);
        }
    }

    #[test]
    fn biased_ensemble_dephases_for_cubic_deformation() {
        // late times need λ resolved finely: ω(λ) t sweeps ~100 rad at t = 200
        let counts = QuadratureCounts {
            n_lam: 256,
            n_phi: 12,
            n_psi: 12,
        };
        let spec = with_counts(WeightProfile::Biased, 3.0, counts);
        let check = decay_check(&spec, 20.0, 201, 200.0, 0.1, &cfg()).unwrap();
        assert!(check.passed, "{check:?}");
        let series = ensemble_series(&spec, &[0.0, 5.0, 10.0, 20.0, 50.0], &cfg()).unwrap();
        let p = series.purities();
        for w in p.windows(2) {
            assert!(w[1] <= w[0] + 1e-4, "{p:?}");
        }
        assert!(series.max_node_eigenvalue_drift < 1e-12);
    }

    #[test]
    fn quadratic_deformation_does_not_dephase() {
        let spec = small(WeightProfile::Biased, 2.0, 12);
        let series = ensemble_series(&spec, &[0.0, 200.0], &cfg()).unwrap();
        let abs = series.offdiag_abs();
        assert!((abs[1] - abs[0]).abs() < 1e-10);
    }

    #[test]
    fn half_angle_weight_has_no_signal_to_decay() {
        let spec = small(WeightProfile::HalfAngle, 3.0, 16);
        let check = decay_check(&spec, 20.0, 41, 200.0, 0.1, &cfg()).unwrap();
        assert!(check.peak < SIGNAL_FLOOR);
        assert!(check.ratio.is_none() && !check.passed);
    }

    #[test]
    fn closed_form_agrees_with_integrator() {
        let spec = small(WeightProfile::HalfAngle, 3.0, 10);
        let c = IntegratorConfig::new(1e-4, 2.0).unwrap().with_record_every(1000);
        let check = cross_check(&spec, 3, &c).unwrap();
        assert_eq!(check.nodes_checked, 4);
        assert!(check.max_deviation < 1e-8, "{check:?}");
        assert!(check.max_eigenvalue_drift < 1e-9, "{check:?}");
    }

    #[test]
    fn integrated_and_closed_form_averages_agree() {
        let counts = QuadratureCounts {
            n_lam: 3,
            n_phi: 10,
            n_psi: 10,
        };
        let spec = with_counts(WeightProfile::Biased, 3.0, counts);
        let c = IntegratorConfig::new(1e-3, 1.0).unwrap();
        let a = ensemble_series(&spec, &[0.0, 0.5], &c).unwrap();
        let b = ensemble_series(&spec.clone().with_propagation(Propagation::Integrator), &[0.0, 0.5], &c).unwrap();
        for (x, y) in a.averages.iter().zip(&b.averages) {
            assert!(trace_distance(x, y).unwrap() < 1e-6);
        }
    }

    #[test]
    fn mixture_average_is_linear() {
        let h = HermitianOperator::spin_z(1.0);
        let f = DeformationFunction::power(3.0).unwrap();
        let a = bloch_state(BlochParams::new(0.9, 1.0, 0.3).unwrap()).unwrap();
        let b = bloch_state(BlochParams::new(0.6, 2.0, 4.0).unwrap()).unwrap();
        let c = IntegratorConfig::new(1e-3, 1.0).unwrap();
        let mix = mixture_series(&[(a.clone(), 0.3), (b.clone(), 0.7)], &h, &f, &[1.0], &c).unwrap();
        let ta = mixture_series(&[(a, 1.0)], &h, &f, &[1.0], &c).unwrap();
        let tb = mixture_series(&[(b, 1.0)], &h, &f, &[1.0], &c).unwrap();
        let expected = ta.averages[0].matrix() * Complex64::new(0.3, 0.0) + tb.averages[0].matrix() * Complex64::new(0.7, 0.0);
        let d = (mix.averages[0].matrix() - expected).iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(d < 1e-15);
    }

    #[test]
    fn integrated_times_must_be_multiples_of_dt() {
        let spec = small(WeightProfile::Uniform, 3.0, 10).with_propagation(Propagation::Integrator);
        let c = IntegratorConfig::new(0.1, 1.0).unwrap();
        assert!(ensemble_series(&spec, &[0.05], &c).is_err());
    }
}
