//! Gibbs states, truncated thermal oscillator states, and passivity checks.

use crate::constants::{HBAR, K_B};
use crate::error::{Error, Result};
use crate::operator::{
    cluster_sorted, CMat, CVec, DensityOperator, HermitianOperator, HilbertSpace,
};
use crate::C64;

/// Default tolerance on the truncated tail of a thermal oscillator state.
pub const DEFAULT_TAIL_TOL: f64 = 1e-6;

/// Mean occupation below which a thermal oscillator collapses to |0⟩⟨0|.
const GROUND_STATE_NBAR: f64 = 1e-12;

/// A Gibbs state together with its partition function.
#[derive(Debug, Clone)]
pub struct GibbsState {
    pub state: DensityOperator,
    pub partition_function: f64,
    pub beta: f64,
}

/// e^{−βH}/Z, diagonal in the eigenbasis of `h` with Boltzmann weights.
///
/// Weights are computed relative to the ground energy so large β never
/// overflows. Negative β (negative temperature) is rejected.
pub fn gibbs_state(h: &HermitianOperator, beta: f64) -> Result<GibbsState> {
    if !beta.is_finite() || beta < 0.0 {
        return Err(Error::Validation(format!(
            "inverse temperature must be finite and nonnegative, got {beta}"
        )));
    }
    let spectrum = h.spectrum();
    let energies = spectrum.eigenvalues();
    let e0 = energies[0];
    let shifted_weights: Vec<f64> = energies.iter().map(|&e| (-beta * (e - e0)).exp()).collect();
    let z_shifted: f64 = shifted_weights.iter().sum();
    let populations: Vec<f64> = shifted_weights.iter().map(|w| w / z_shifted).collect();

    let matrix = spectral_diagonal(spectrum.eigenvectors(), &populations);
    let state = DensityOperator::new(matrix, h.space().clone())?;
    let partition_function = z_shifted * (-beta * e0).exp();
    Ok(GibbsState {
        state,
        partition_function,
        beta,
    })
}

/// V diag(values) V†.
fn spectral_diagonal(eigenvectors: &CMat, values: &[f64]) -> CMat {
    let dim = eigenvectors.nrows();
    let mut scaled = eigenvectors.clone();
    for (col, &v) in values.iter().enumerate() {
        for row in 0..dim {
            scaled[(row, col)] *= C64::new(v, 0.0);
        }
    }
    let m = &scaled * eigenvectors.adjoint();
    // exact Hermitian symmetrization of a mathematically Hermitian product
    (&m + m.adjoint()) * C64::new(0.5, 0.0)
}

/// Thermal state of a harmonic mode on a truncated Fock space.
#[derive(Debug, Clone)]
pub struct OscillatorThermalSpec {
    /// Mode angular frequency, rad/s.
    pub mode_frequency: f64,
    /// Temperature, K.
    pub temperature: f64,
    /// Highest retained Fock level N_max (dimension N_max + 1).
    pub fock_cutoff: usize,
    /// Maximum tolerated population above the cutoff before renormalization.
    pub tail_tolerance: f64,
}

impl OscillatorThermalSpec {
    pub fn new(mode_frequency: f64, temperature: f64, fock_cutoff: usize) -> Self {
        Self {
            mode_frequency,
            temperature,
            fock_cutoff,
            tail_tolerance: DEFAULT_TAIL_TOL,
        }
    }

    /// Bose occupation 1/(e^{ħω/k_BT} − 1).
    pub fn mean_phonon_number(&self) -> f64 {
        bose_occupation(self.mode_frequency, self.temperature)
    }
}

/// Bose occupation of a mode at angular frequency ω (rad/s) and temperature T (K).
pub fn bose_occupation(mode_frequency: f64, temperature: f64) -> f64 {
    let x = HBAR * mode_frequency / (K_B * temperature);
    1.0 / (x.exp() - 1.0)
}

/// Result of a truncated thermal-oscillator construction.
#[derive(Debug, Clone)]
pub struct ThermalOscillator {
    pub state: DensityOperator,
    pub mean_phonon_number: f64,
    /// Geometric-tail population beyond the cutoff, before renormalization.
    pub tail_mass: f64,
}

/// Thermal oscillator state ∝ (n̄/(n̄+1))ⁿ on Fock levels 0..=N_max,
/// renormalized after truncation.
///
/// Fails, naming the minimal adequate cutoff, when the truncated tail
/// exceeds the tolerance; a silently leaking cutoff would corrupt every
/// downstream phase.
pub fn thermal_oscillator(spec: &OscillatorThermalSpec) -> Result<ThermalOscillator> {
    if spec.temperature <= 0.0 || !spec.temperature.is_finite() {
        return Err(Error::Validation(format!(
            "temperature must be positive and finite, got {} K",
            spec.temperature
        )));
    }
    if spec.fock_cutoff < 1 {
        return Err(Error::Validation("fock_cutoff must be at least 1".into()));
    }
    let nbar = spec.mean_phonon_number();
    let dim = spec.fock_cutoff + 1;
    let space = HilbertSpace::single("R", dim);

    if nbar < GROUND_STATE_NBAR {
        let mut populations = vec![0.0; dim];
        populations[0] = 1.0;
        let state = DensityOperator::from_populations(&populations, space)?;
        return Ok(ThermalOscillator {
            state,
            mean_phonon_number: nbar,
            tail_mass: 0.0,
        });
    }

    let ratio = nbar / (nbar + 1.0);
    let tail_mass = ratio.powi(dim as i32);
    if tail_mass > spec.tail_tolerance {
        // smallest N with ratio^(N+1) <= tol
        let required = (spec.tail_tolerance.ln() / ratio.ln()).ceil() as usize;
        return Err(Error::CutoffTooSmall {
            tail: tail_mass,
            tol: spec.tail_tolerance,
            required: required.saturating_sub(1).max(spec.fock_cutoff + 1),
        });
    }

    let unnormalized: Vec<f64> = (0..dim).map(|n| ratio.powi(n as i32)).collect();
    let total: f64 = unnormalized.iter().sum();
    let populations: Vec<f64> = unnormalized.iter().map(|p| p / total).collect();
    let state = DensityOperator::from_populations(&populations, space)?;
    Ok(ThermalOscillator {
        state,
        mean_phonon_number: nbar,
        tail_mass,
    })
}

/// Outcome of a passivity check.
#[derive(Debug, Clone)]
pub struct PassivityReport {
    pub passive: bool,
    /// ‖[ρ, H]‖_max.
    pub commutator_norm: f64,
    /// First energy pair (E_low, E_high) whose occupations increase with
    /// energy, when one exists.
    pub violation: Option<(f64, f64)>,
}

/// Commutation tolerance for passivity.
const PASSIVITY_COMMUTATOR_TOL: f64 = 1e-10;
/// Occupation-comparison slack between distinct energy clusters.
const PASSIVITY_OCCUPATION_TOL: f64 = 1e-10;
/// Energy clustering tolerance: equal-energy levels may hold any relative
/// occupation, so comparisons only run across distinct clusters.
const PASSIVITY_ENERGY_TOL: f64 = 1e-9;

/// True iff ρ commutes with H and its occupations are non-increasing with
/// energy. Within a degenerate multiplet the block eigenvalues are compared
/// as a whole (min of the lower cluster vs max of the higher).
pub fn is_passive(rho: &DensityOperator, h: &HermitianOperator) -> Result<PassivityReport> {
    if rho.dim() != h.dim() {
        return Err(Error::DimensionMismatch(format!(
            "state dim {} vs Hamiltonian dim {}",
            rho.dim(),
            h.dim()
        )));
    }
    let commutator = h.matrix() * rho.matrix() - rho.matrix() * h.matrix();
    let commutator_norm = crate::operator::max_norm(&commutator);
    if commutator_norm > PASSIVITY_COMMUTATOR_TOL {
        return Ok(PassivityReport {
            passive: false,
            commutator_norm,
            violation: None,
        });
    }

    let spectrum = h.spectrum();
    let clusters = cluster_sorted(spectrum.eigenvalues(), PASSIVITY_ENERGY_TOL);

    // occupations per cluster: eigenvalues of the block <v_i| rho |v_j>
    let mut cluster_occupations: Vec<(f64, f64, f64)> = Vec::with_capacity(clusters.len());
    for (energy, members) in &clusters {
        let g = members.len();
        let mut block = CMat::zeros(g, g);
        for (a, &i) in members.iter().enumerate() {
            let vi = spectrum.eigenvector(i);
            for (b, &j) in members.iter().enumerate() {
                let vj = spectrum.eigenvector(j);
                block[(a, b)] = (vi.adjoint() * rho.matrix() * &vj)[(0, 0)];
            }
        }
        let occupations = if g == 1 {
            vec![block[(0, 0)].re]
        } else {
            nalgebra::linalg::SymmetricEigen::new(block)
                .eigenvalues
                .iter()
                .copied()
                .collect()
        };
        let min = occupations.iter().copied().fold(f64::INFINITY, f64::min);
        let max = occupations
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        cluster_occupations.push((*energy, min, max));
    }

    for w in cluster_occupations.windows(2) {
        let (e_low, min_low, _) = w[0];
        let (e_high, _, max_high) = w[1];
        if max_high > min_low + PASSIVITY_OCCUPATION_TOL {
            return Ok(PassivityReport {
                passive: false,
                commutator_norm,
                violation: Some((e_low, e_high)),
            });
        }
    }
    Ok(PassivityReport {
        passive: true,
        commutator_norm,
        violation: None,
    })
}

/// Fock-space annihilation operator b on dimension `dim` (b|n⟩ = √n |n−1⟩).
pub fn annihilation(dim: usize) -> CMat {
    let mut b = CMat::zeros(dim, dim);
    for n in 1..dim {
        b[(n - 1, n)] = C64::new((n as f64).sqrt(), 0.0);
    }
    b
}

/// Fock-space number operator N = b†b.
pub fn number_operator(dim: usize) -> CMat {
    CMat::from_diagonal(&CVec::from_iterator(
        dim,
        (0..dim).map(|n| C64::new(n as f64, 0.0)),
    ))
}
