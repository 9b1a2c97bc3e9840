//! Seeded random operators and states for tests, sweeps, and benchmarks.
//!
//! Haar-distributed unitaries come from the QR decomposition of a complex
//! Ginibre matrix with the R diagonal phase-fixed.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::operator::{
    CMat, CVec, DensityOperator, HermitianOperator, HilbertSpace, UnitaryOperator,
};
use crate::C64;

fn standard_normal(rng: &mut impl Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// Complex Ginibre matrix: i.i.d. standard complex Gaussian entries.
pub fn ginibre(dim: usize, rng: &mut impl Rng) -> CMat {
    DMatrix::from_fn(dim, dim, |_, _| {
        C64::new(standard_normal(rng), standard_normal(rng))
    })
}

/// Haar-random unitary matrix.
pub fn haar_unitary_matrix(dim: usize, rng: &mut impl Rng) -> CMat {
    let g = ginibre(dim, rng);
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    // fix the gauge so the distribution is Haar, not QR-biased
    for j in 0..dim {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 {
            d / d.norm()
        } else {
            C64::new(1.0, 0.0)
        };
        for i in 0..dim {
            q[(i, j)] *= phase;
        }
    }
    q
}

/// Haar-random unitary on a fresh single-subsystem space.
pub fn haar_unitary(dim: usize, label: &str, rng: &mut impl Rng) -> UnitaryOperator {
    UnitaryOperator::new(
        haar_unitary_matrix(dim, rng),
        HilbertSpace::single(label, dim),
    )
    .expect("QR of a Ginibre matrix is unitary")
}

/// Random Hermitian matrix (G + G†)/2 with Gaussian G.
pub fn random_hermitian_matrix(dim: usize, rng: &mut impl Rng) -> CMat {
    let g = ginibre(dim, rng);
    (&g + g.adjoint()) * C64::new(0.5, 0.0)
}

/// Random Hermitian operator on a fresh single-subsystem space.
pub fn random_hermitian(dim: usize, label: &str, rng: &mut impl Rng) -> HermitianOperator {
    HermitianOperator::new(
        random_hermitian_matrix(dim, rng),
        HilbertSpace::single(label, dim),
    )
    .expect("symmetrized Gaussian matrix is Hermitian")
}

/// Random full-rank density operator GG†/tr[GG†] on a given space.
pub fn random_density_on(space: HilbertSpace, rng: &mut impl Rng) -> DensityOperator {
    let dim = space.total_dim();
    let g = ginibre(dim, rng);
    let mut m = &g * g.adjoint();
    let trace = m.trace();
    m /= trace;
    // symmetrize away the last bits of floating-point drift
    m = (&m + m.adjoint()) * C64::new(0.5, 0.0);
    DensityOperator::new(m, space).expect("normalized Wishart matrix is a density operator")
}

/// Random density operator on a fresh single-subsystem space.
pub fn random_density(dim: usize, label: &str, rng: &mut impl Rng) -> DensityOperator {
    random_density_on(HilbertSpace::single(label, dim), rng)
}

/// Random normalized pure state.
pub fn random_pure_state(dim: usize, rng: &mut impl Rng) -> CVec {
    let mut v = CVec::from_fn(dim, |_, _| {
        C64::new(standard_normal(rng), standard_normal(rng))
    });
    let norm = v.norm();
    v /= C64::new(norm, 0.0);
    v
}
