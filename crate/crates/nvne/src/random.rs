//! Seeded random states and operators for property checks and scenarios.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::hermitian::{CMatrix, DensityMatrix, HermitianOperator};

fn gaussian_complex<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

fn ginibre<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| gaussian_complex(rng))
}

/// GUE-distributed Hermitian matrix scaled to unit-order entries.
pub fn hermitian<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> HermitianOperator {
    let g = ginibre(rng, dim, dim);
    HermitianOperator::from_hermitian_unchecked((&g + g.adjoint()) * Complex64::new(0.5, 0.0))
}

/// Full-rank mixed state `G G^dag / Tr(G G^dag)` (Hilbert-Schmidt measure).
pub fn density<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> DensityMatrix {
    density_with_rank(rng, dim, dim)
}

pub fn density_with_rank<R: Rng + ?Sized>(rng: &mut R, dim: usize, rank: usize) -> DensityMatrix {
    let g = ginibre(rng, dim, rank.max(1));
    let m = &g * g.adjoint();
    let t = m.trace().re;
    DensityMatrix::from_trusted(m / Complex64::new(t, 0.0))
}

/// Haar-random pure state.
pub fn pure<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> DensityMatrix {
    let v: Vec<Complex64> = (0..dim).map(|_| gaussian_complex(rng)).collect();
    DensityMatrix::pure(&v).expect("gaussian vector is nonzero almost surely")
}

/// Seeded generator used throughout; the seed fully determines the stream.
pub fn seeded(seed: u64) -> rand_chacha::ChaCha8Rng {
    use rand::SeedableRng;
    rand_chacha::ChaCha8Rng::seed_from_u64(seed)
}
