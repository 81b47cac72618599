//! The nonlinearity `f` in `i dρ/dt = [H, f(ρ)]`.
//!
//! Any admissible `f` satisfies `f(0) = 0` and `f(1) = 1`, so that pure states
//! (`ρ² = ρ`) have `f(ρ) = ρ` and evolve exactly as in linear quantum mechanics.

use serde::{Deserialize, Serialize};

use crate::error::{NvneError, Result};

/// Tolerance on the normalization conditions `f(0) = 0`, `f(1) = 1`.
pub const NORMALIZATION_TOL: f64 = 1e-12;

/// Eigenvalues this far below zero are treated as zero by fractional powers.
pub const NEGATIVE_CLIP: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeformationKind {
    /// `f(x) = x^q`, the Tsallis case.
    PowerLaw { q: f64 },
    /// `f(x) = Σ_k c_k x^k`; `coefficients[k]` multiplies `x^k`.
    CoefficientSeries { coefficients: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DeformationKind", into = "DeformationKind")]
pub struct DeformationFunction {
    kind: DeformationKind,
}

impl DeformationFunction {
    pub fn power(q: f64) -> Result<Self> {
        if !(q.is_finite() && q > 0.0) {
            return Err(NvneError::OutOfDomain {
                param: "q",
                value: q,
                reason: "power-law deformation needs q > 0 so that f(0) = 0",
            });
        }
        Ok(Self {
            kind: DeformationKind::PowerLaw { q },
        })
    }

    /// The linear von Neumann case `f(x) = x`.
    pub fn identity() -> Self {
        Self {
            kind: DeformationKind::PowerLaw { q: 1.0 },
        }
    }

    pub fn series(coefficients: Vec<f64>) -> Result<Self> {
        if coefficients.is_empty() || coefficients.iter().any(|c| !c.is_finite()) {
            return Err(NvneError::domain(
                "coefficient series must be non-empty and finite",
            ));
        }
        let f = Self {
            kind: DeformationKind::CoefficientSeries { coefficients },
        };
        f.check_normalization()?;
        Ok(f)
    }

    pub fn kind(&self) -> &DeformationKind {
        &self.kind
    }

    /// The exponent, if this is a power law.
    pub fn exponent(&self) -> Option<f64> {
        match self.kind {
            DeformationKind::PowerLaw { q } => Some(q),
            DeformationKind::CoefficientSeries { .. } => None,
        }
    }

    pub fn is_identity(&self) -> bool {
        match &self.kind {
            DeformationKind::PowerLaw { q } => *q == 1.0,
            DeformationKind::CoefficientSeries { coefficients } => {
                coefficients.iter().enumerate().all(|(k, &c)| {
                    if k == 1 {
                        c == 1.0
                    } else {
                        c == 0.0
                    }
                })
            }
        }
    }

    /// Whether `f` is defined for negative arguments.
    pub fn accepts_negative(&self) -> bool {
        match self.kind {
            DeformationKind::PowerLaw { q } => q.fract() == 0.0,
            DeformationKind::CoefficientSeries { .. } => true,
        }
    }

    fn check_normalization(&self) -> Result<()> {
        let f0 = self.eval(0.0)?;
        let f1 = self.eval(1.0)?;
        if f0.abs() > NORMALIZATION_TOL || (f1 - 1.0).abs() > NORMALIZATION_TOL {
            return Err(NvneError::domain(format!(
                "deformation must satisfy f(0) = 0 and f(1) = 1, got f(0) = {f0}, f(1) = {f1}"
            )));
        }
        Ok(())
    }

    fn domain_arg(&self, x: f64) -> Result<f64> {
        if x >= 0.0 || self.accepts_negative() {
            return Ok(x);
        }
        if x >= -NEGATIVE_CLIP {
            return Ok(0.0);
        }
        Err(NvneError::domain(format!(
            "negative eigenvalue {x:e} with non-integer exponent {:?}",
            self.exponent()
        )))
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        let x = self.domain_arg(x)?;
        Ok(match &self.kind {
            DeformationKind::PowerLaw { q } => pow(x, *q),
            DeformationKind::CoefficientSeries { coefficients } => horner(coefficients, x),
        })
    }

    /// `f'(x)`. Returns `+inf` for `x^q` at `x = 0` when `q < 1`.
    pub fn derivative(&self, x: f64) -> Result<f64> {
        let x = self.domain_arg(x)?;
        Ok(match &self.kind {
            DeformationKind::PowerLaw { q } => {
                if *q == 1.0 {
                    1.0
                } else if x == 0.0 {
                    if *q < 1.0 {
                        f64::INFINITY
                    } else {
                        0.0
                    }
                } else {
                    q * pow(x, q - 1.0)
                }
            }
            DeformationKind::CoefficientSeries { coefficients } => {
                let deriv: Vec<f64> = coefficients
                    .iter()
                    .enumerate()
                    .skip(1)
                    .map(|(k, c)| k as f64 * c)
                    .collect();
                if deriv.is_empty() {
                    0.0
                } else {
                    horner(&deriv, x)
                }
            }
        })
    }

    /// First divided difference `(f(a) - f(b)) / (a - b)`, or `f'` at the
    /// midpoint when `|a - b| <= degeneracy_tol`. May be infinite in the
    /// degenerate branch.
    pub fn divided_difference(&self, a: f64, b: f64, degeneracy_tol: f64) -> Result<f64> {
        if (a - b).abs() <= degeneracy_tol {
            self.derivative(0.5 * (a + b))
        } else {
            Ok((self.eval(a)? - self.eval(b)?) / (a - b))
        }
    }
}

impl TryFrom<DeformationKind> for DeformationFunction {
    type Error = NvneError;

    fn try_from(kind: DeformationKind) -> Result<Self> {
        match kind {
            DeformationKind::PowerLaw { q } => Self::power(q),
            DeformationKind::CoefficientSeries { coefficients } => Self::series(coefficients),
        }
    }
}

impl From<DeformationFunction> for DeformationKind {
    fn from(f: DeformationFunction) -> Self {
        f.kind
    }
}

fn pow(x: f64, q: f64) -> f64 {
    if q.fract() == 0.0 && q.abs() < i32::MAX as f64 {
        x.powi(q as i32)
    } else {
        x.powf(q)
    }
}

fn horner(coefficients: &[f64], x: f64) -> f64 {
    coefficients.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}
