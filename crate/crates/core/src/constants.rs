//! Physical constants (CODATA 2018) used at the SI boundary.
//!
//! Only the ion-platform module and the thermal-oscillator constructor work
//! in SI units; everywhere else energies are angular frequencies (ħ = 1).

/// Reduced Planck constant, J s.
pub const HBAR: f64 = 1.054_571_817e-34;

/// Boltzmann constant, J/K.
pub const K_B: f64 = 1.380_649e-23;

/// Unified atomic mass unit, kg.
pub const ATOMIC_MASS: f64 = 1.660_539_066_60e-27;
