//! Structure-preserving simulation of the nonlinear von Neumann equation
//! `i dρ/dt = [H, f(ρ)]`, with `f(x) = x^q` as the Tsallis case.
//!
//! The crate is organized bottom-up:
//!
//! - [`hermitian`]: validated density matrices, spectral calculus, tensor
//!   products, partial traces, two-level Bloch states.
//! - [`deformation`]: the nonlinearity `f`.
//! - [`lie_poisson`]: Hamiltonian function `<H>_f`, effective Hamiltonian,
//!   commutator-equivalent generator, Lie-Poisson bracket, Casimirs.
//! - [`dynamics`]: isospectral integration by unitary conjugation.
//! - [`composite`]: two noninteracting subsystems coupled through their
//!   reduced states.
//! - [`thermo`]: Tsallis entropy, q-internal energy, free energy and the
//!   spin-1/2 equilibrium.
//! - [`ensemble`]: classical mixtures of initial conditions and dephasing.
//! - [`scenario`]: JSON-configured runs behind the `nvne` binary.

// `!(x <= tol)` is deliberate: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod composite;
pub mod deformation;
pub mod dynamics;
pub mod ensemble;
pub mod error;
pub mod hermitian;
pub mod lie_poisson;
pub mod random;
pub mod scenario;
pub mod thermo;

pub use deformation::DeformationFunction;
pub use error::{NvneError, Result};
pub use hermitian::{BlochParams, CMatrix, DensityMatrix, HermitianOperator, Operator, SpectralDecomposition, Subsystem};
