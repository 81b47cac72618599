//! JSON scenario files.

use std::collections::BTreeMap;
use std::path::PathBuf;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dynamics::IntegratorConfig;
use crate::ensemble::{Propagation, QuadratureCounts, WeightProfile};
use crate::error::{NvneError, Result};
use crate::hermitian::{bell_state, bloch_state, BlochParams, CMatrix, DensityMatrix, HermitianOperator, Operator};
use crate::random;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioKind {
    Evolve,
    Composite,
    Equilibrium,
    Ensemble,
    BracketCheck,
}

/// A complex entry written as `[re, im]`.
pub type Entry = [f64; 2];

fn to_complex(e: &Entry) -> Complex64 {
    Complex64::new(e[0], e[1])
}

fn matrix_from_rows(key: &str, rows: &[Vec<Entry>]) -> Result<CMatrix> {
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(NvneError::config(key, "entries must form a nonempty square matrix"));
    }
    Ok(CMatrix::from_fn(n, n, |i, j| to_complex(&rows[i][j])))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum HamiltonianSpec {
    /// `H = -μ σ_z`
    SpinZ { mu: f64 },
    /// Row-major entries; Hermiticity is checked on load.
    Matrix { entries: Vec<Vec<Entry>> },
    /// GUE sample.
    Random { dim: usize, seed: u64 },
    Zero { dim: usize },
}

impl HamiltonianSpec {
    pub fn build(&self, key: &str) -> Result<HermitianOperator> {
        let wrap = |e: NvneError| NvneError::config(key, e.to_string());
        match self {
            HamiltonianSpec::SpinZ { mu } => {
                if !mu.is_finite() {
                    return Err(NvneError::config(format!("{key}.mu"), "must be finite"));
                }
                Ok(HermitianOperator::spin_z(*mu))
            }
            HamiltonianSpec::Matrix { entries } => HermitianOperator::new(matrix_from_rows(key, entries)?).map_err(wrap),
            HamiltonianSpec::Random { dim, seed } => {
                check_dim(key, *dim)?;
                Ok(random::hermitian(&mut random::seeded(*seed), *dim))
            }
            HamiltonianSpec::Zero { dim } => {
                check_dim(key, *dim)?;
                Ok(HermitianOperator::zeros(*dim))
            }
        }
    }

    /// The field `μ` of the spin-z preset.
    pub fn spin_field(&self) -> Option<f64> {
        match self {
            HamiltonianSpec::SpinZ { mu } => Some(*mu),
            _ => None,
        }
    }
}

fn check_dim(key: &str, dim: usize) -> Result<()> {
    if dim == 0 {
        return Err(NvneError::config(format!("{key}.dim"), "dimension must be positive"));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum StateSpec {
    Bloch {
        lam: f64,
        phi: f64,
        psi: f64,
    },
    /// Row-major entries, validated as a density matrix.
    Matrix {
        entries: Vec<Vec<Entry>>,
    },
    /// `|ψ><ψ|`, normalized on load.
    Pure {
        amplitudes: Vec<Entry>,
    },
    MaximallyMixed {
        dim: usize,
    },
    /// Ginibre sample of the given rank (full rank by default).
    Random {
        dim: usize,
        seed: u64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        rank: Option<usize>,
    },
    Bell,
    Product {
        first: Box<StateSpec>,
        second: Box<StateSpec>,
    },
}

impl StateSpec {
    pub fn build(&self, key: &str) -> Result<DensityMatrix> {
        let wrap = |e: NvneError| NvneError::config(key, e.to_string());
        match self {
            StateSpec::Bloch { lam, phi, psi } => bloch_state(BlochParams::new(*lam, *phi, *psi).map_err(wrap)?).map_err(wrap),
            StateSpec::Matrix { entries } => DensityMatrix::new(matrix_from_rows(key, entries)?).map_err(wrap),
            StateSpec::Pure { amplitudes } => {
                DensityMatrix::pure(&amplitudes.iter().map(to_complex).collect::<Vec<_>>()).map_err(wrap)
            }
            StateSpec::MaximallyMixed { dim } => {
                check_dim(key, *dim)?;
                Ok(DensityMatrix::maximally_mixed(*dim))
            }
            StateSpec::Random { dim, seed, rank } => {
                check_dim(key, *dim)?;
                let mut rng = random::seeded(*seed);
                match rank {
                    None => Ok(random::density(&mut rng, *dim)),
                    Some(r) if (1..=*dim).contains(r) => Ok(random::density_with_rank(&mut rng, *dim, *r)),
                    Some(r) => Err(NvneError::config(format!("{key}.rank"), format!("rank {r} outside 1..={dim}"))),
                }
            }
            StateSpec::Bell => Ok(bell_state()),
            StateSpec::Product { first, second } => {
                let a = first.build(&format!("{key}.first"))?;
                let b = second.build(&format!("{key}.second"))?;
                Ok(a.tensor(&b))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSpec {
    /// Dimension of the state space (the joint space for composites).
    pub dimension: usize,
    pub hamiltonian: HamiltonianSpec,
    /// Second subsystem of a composite.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hamiltonian_ii: Option<HamiltonianSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LarmorSweep {
    pub lam: Vec<f64>,
    pub q: Vec<f64>,
    #[serde(default = "half_pi")]
    pub phi: f64,
}

fn half_pi() -> f64 {
    std::f64::consts::FRAC_PI_2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergenceStudy {
    /// Step sizes, each half the previous one.
    pub dts: Vec<f64>,
    /// The reference uses the smallest step divided by this.
    #[serde(default = "default_reference_divisor")]
    pub reference_divisor: usize,
}

fn default_reference_divisor() -> usize {
    10
}

/// Extra analyses attached to an `evolve` scenario.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolveAnalysis {
    /// Fit the precession frequency of this element and compare with the
    /// spin prediction.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub precession_element: Option<[usize; 2]>,
    /// Run each exponent against the linear `q = 1` trajectory.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub compare_linear: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub larmor_sweep: Option<LarmorSweep>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub convergence: Option<ConvergenceStudy>,
    /// Skip the invariant checks (for pure sweeps).
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub skip_invariants: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThermoSpec {
    pub beta: f64,
    #[serde(default = "one")]
    pub mu: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StabilityGrid {
    pub q: Vec<f64>,
    pub beta_mu: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EquilibriumAnalysis {
    /// Expected `λ_eq`, checked within the `lam_eq` threshold.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected_lam: Option<f64>,
    /// Offsets `δ` at which `q = 1 ± δ` is compared with the Gibbs value.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gibbs_limit: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<StabilityGrid>,
    /// Bloch tilt of the perturbed equilibrium evolved with `integrator`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tilt: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecaySpec {
    pub window: f64,
    pub samples: usize,
    pub late_time: f64,
    #[serde(default = "default_decay_threshold")]
    pub threshold: f64,
}

fn default_decay_threshold() -> f64 {
    0.1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrossCheckSpec {
    pub lam_stride: usize,
    pub integrator: IntegratorConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleConfig {
    pub weight: WeightProfile,
    pub n_lam: usize,
    pub n_phi: usize,
    pub n_psi: usize,
    #[serde(default)]
    pub propagation: Propagation,
    /// Times at which the average is compared with the analytic λ-integral.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub compare_times: Vec<f64>,
    #[serde(default = "default_analytic_nodes")]
    pub analytic_n_lam: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decay: Option<DecaySpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cross_check: Option<CrossCheckSpec>,
    /// Times at which `Tr ρ̄²` must not increase.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub purity_times: Vec<f64>,
    /// Plot grid `[t_max, samples]` for the off-diagonal magnitude.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plot: Option<(f64, usize)>,
}

fn default_analytic_nodes() -> usize {
    32
}

impl EnsembleConfig {
    pub fn counts(&self) -> QuadratureCounts {
        QuadratureCounts {
            n_lam: self.n_lam,
            n_phi: self.n_phi,
            n_psi: self.n_psi,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BracketSpec {
    pub dimension: usize,
    pub seed: u64,
    /// Random states on which every bracket is evaluated.
    pub states: usize,
    /// Random nonlinear functionals paired with the Casimirs.
    pub functionals: usize,
    pub max_casimir: u32,
    pub max_average: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub directory: Option<PathBuf>,
    #[serde(default = "default_formats")]
    pub formats: Vec<OutputFormat>,
}

fn default_formats() -> Vec<OutputFormat> {
    vec![OutputFormat::Csv, OutputFormat::Json]
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self {
            directory: None,
            formats: default_formats(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub id: String,
    pub kind: ScenarioKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub system: Option<SystemSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state: Option<StateSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub integrator: Option<IntegratorConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub analysis: Option<EvolveAnalysis>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub equilibrium: Option<EquilibriumAnalysis>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ensemble: Option<EnsembleConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thermo: Option<ThermoSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bracket: Option<BracketSpec>,
    /// Overrides of named check thresholds.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub thresholds: BTreeMap<String, f64>,
    #[serde(default)]
    pub output: OutputSpec,
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| NvneError::config(json_path(&e), e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn threshold(&self, name: &str, default: f64) -> f64 {
        self.thresholds.get(name).copied().unwrap_or(default)
    }

    pub(crate) fn require<'a, T>(&self, value: &'a Option<T>, key: &str) -> Result<&'a T> {
        value
            .as_ref()
            .ok_or_else(|| NvneError::config(key, format!("required for kind {:?}", self.kind)))
    }

    pub(crate) fn system(&self) -> Result<&SystemSpec> {
        self.require(&self.system, "system")
    }

    pub(crate) fn integrator(&self) -> Result<IntegratorConfig> {
        let cfg = *self.require(&self.integrator, "integrator")?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub(crate) fn exponent(&self, key: &'static str, value: Option<f64>) -> Result<f64> {
        let q = value.ok_or_else(|| NvneError::config(key, format!("required for kind {:?}", self.kind)))?;
        if !(q.is_finite() && q > 0.0) {
            return Err(NvneError::config(key, format!("exponent must be positive, got {q}")));
        }
        Ok(q)
    }

    pub(crate) fn hamiltonian(&self) -> Result<HermitianOperator> {
        let sys = self.system()?;
        sys.hamiltonian.build("system.hamiltonian")
    }

    pub(crate) fn initial_state(&self, dim: usize) -> Result<DensityMatrix> {
        let rho = self.require(&self.state, "state")?.build("state")?;
        if rho.dim() != dim {
            return Err(NvneError::config(
                "state",
                format!("state has dimension {} but the system has {dim}", rho.dim()),
            ));
        }
        Ok(rho)
    }
}

/// A best-effort dotted key for a serde error; serde_json only reports
/// positions, so the message carries the detail.
fn json_path(e: &serde_json::Error) -> String {
    let msg = e.to_string();
    for marker in ["unknown field `", "missing field `", "unknown variant `"] {
        if let Some(start) = msg.find(marker) {
            let rest = &msg[start + marker.len()..];
            if let Some(end) = rest.find('`') {
                return rest[..end].to_string();
            }
        }
    }
    format!("line {} column {}", e.line(), e.column())
}
