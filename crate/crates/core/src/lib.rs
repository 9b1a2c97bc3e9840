//! Simulation library for ancilla-interferometric measurement of the heat
//! distribution of a quantum process.
//!
//! A protocol unitary acts on a reservoir-system pair whose reservoir starts
//! in a Gibbs state. The heat exchanged with the reservoir is a random
//! variable defined by two-point energy measurements; its characteristic
//! function equals the coherence of an ancilla qubit after a pair of
//! controlled reservoir evolutions sandwiching the protocol. This crate
//! provides:
//!
//! - [`operator`]: dense complex operator algebra on labeled tensor-product
//!   spaces (tensor products, partial traces, spectral decompositions,
//!   operator exponentials, controlled gates),
//! - [`thermal`]: Gibbs states, truncated thermal oscillator states, and
//!   passivity checks,
//! - [`heat`]: the two-point-measurement heat distribution, its
//!   characteristic function by direct trace and by Fourier sum, moments,
//!   and Landauer-bound reports,
//! - [`interferometer`]: the stage-by-stage ancilla circuit, phase-sensitive
//!   readout, and finite-shot emulation,
//! - [`spectroscopy`]: recovery of the discrete heat distribution from
//!   (possibly noisy) characteristic-function samples,
//! - [`ion`]: a pulse-parameter-level model of the trapped-ion realization.
//!
//! Hot loops (grids of characteristic-function samples, shot batches,
//! instance sweeps) run on rayon when the `parallel` feature is enabled
//! (default) and fall back to sequential iteration otherwise. The `*_seq`
//! variants are always available for comparison.

pub mod constants;
pub mod error;
pub mod heat;
pub mod interferometer;
pub mod ion;
pub mod operator;
pub mod parallel;
pub mod random;
pub mod spectroscopy;
pub mod thermal;

pub use error::{Error, Result};
pub use operator::{
    controlled, evolution, CMat, DensityOperator, HermitianOperator, HilbertSpace,
    SpectralDecomposition, UnitaryOperator,
};

/// Complex scalar used throughout.
pub type C64 = num_complex::Complex64;
