//! Ground-truth heat statistics of a protocol unitary.
//!
//! The reservoir starts in a Gibbs state of a fixed Hamiltonian H_R; a
//! global unitary acts on reservoir ⊗ system. Heat is the reservoir energy
//! difference between two projective energy measurements sandwiching the
//! protocol. This module computes:
//!
//! - the discrete two-point-measurement distribution P(Q) over the gap set
//!   Q = Eₙ − Eₘ, with degenerate spectra handled by completed projectors,
//! - the average heat tr[H_R ρ'_R] − tr[H_R ρ_R],
//! - the characteristic function Θ(t) both by a single trace (no projective
//!   measurements) and as the Fourier sum Σ p e^{itq} of P(Q), two
//!   independent routes that must agree,
//! - moments of P(Q), and
//! - a Landauer-bound report with the exact slack decomposition into
//!   mutual information plus relative entropy.

use crate::error::{Error, Result};
use crate::operator::{
    cluster_sorted, evolution, identity, projector, CMat, DensityOperator, HermitianOperator,
    UnitaryOperator,
};
use crate::parallel::{par_map, seq_map};
use crate::thermal::{gibbs_state, GibbsState};
use crate::C64;

/// Default absolute tolerance for merging equal energies and equal gaps.
pub const DEFAULT_GAP_TOL: f64 = 1e-9;

/// Negative-probability clipping threshold (eigenprojector noise floor).
const PROBABILITY_CLIP: f64 = 1e-12;

/// Tolerance on the distribution normalization.
const NORMALIZATION_TOL: f64 = 1e-10;

/// One heat value with its probability mass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeatAtom {
    /// Heat value Q = Eₙ − Eₘ (ħ = 1 energy units).
    pub q: f64,
    pub p: f64,
}

/// Discrete probability mass on the gap set of the reservoir Hamiltonian.
#[derive(Debug, Clone)]
pub struct HeatDistribution {
    atoms: Vec<HeatAtom>,
    gap_cluster_tol: f64,
}

impl HeatDistribution {
    /// Validate and build: probabilities are clipped to 0 when within the
    /// noise floor below zero, must sum to 1 within 1e-10, and the q values
    /// must be pairwise separated by more than the cluster tolerance.
    pub fn new(mut atoms: Vec<HeatAtom>, gap_cluster_tol: f64) -> Result<Self> {
        atoms.sort_by(|a, b| a.q.total_cmp(&b.q));
        for atom in &mut atoms {
            if atom.p < -PROBABILITY_CLIP {
                return Err(Error::Validation(format!(
                    "heat atom at q={} has probability {:.3e} below the clip floor",
                    atom.q, atom.p
                )));
            }
            atom.p = atom.p.max(0.0);
        }
        for w in atoms.windows(2) {
            if w[1].q - w[0].q <= gap_cluster_tol {
                return Err(Error::Validation(format!(
                    "heat values {} and {} are not separated by more than {gap_cluster_tol:.1e}",
                    w[0].q, w[1].q
                )));
            }
        }
        let total: f64 = atoms.iter().map(|a| a.p).sum();
        if (total - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::Validation(format!(
                "heat distribution mass {total} is not 1 within {NORMALIZATION_TOL:.0e}"
            )));
        }
        Ok(Self {
            atoms,
            gap_cluster_tol,
        })
    }

    pub fn atoms(&self) -> &[HeatAtom] {
        &self.atoms
    }

    pub fn gap_cluster_tol(&self) -> f64 {
        self.gap_cluster_tol
    }

    /// Heat values, ascending.
    pub fn gaps(&self) -> Vec<f64> {
        self.atoms.iter().map(|a| a.q).collect()
    }
}

/// Σ p qᵏ. The k = 1 moment equals [`average_heat`].
pub fn moment(dist: &HeatDistribution, k: u32) -> f64 {
    debug_assert!(k >= 1, "moments are defined for k >= 1");
    dist.atoms.iter().map(|a| a.p * a.q.powi(k as i32)).sum()
}

/// Σ p e^{itq}, the Fourier transform of the heat distribution.
pub fn characteristic_from_distribution(dist: &HeatDistribution, t: f64) -> C64 {
    dist.atoms
        .iter()
        .map(|a| C64::new(a.p, 0.0) * (C64::i() * (t * a.q)).exp())
        .sum()
}

/// A protocol unitary together with the fixed reservoir description and the
/// system input state. The reservoir state is the Gibbs state of
/// `reservoir_h` at `beta`, built once at construction.
#[derive(Debug, Clone)]
pub struct ProtocolInstance {
    protocol: UnitaryOperator,
    reservoir_h: HermitianOperator,
    beta: f64,
    system_state: DensityOperator,
    reservoir_state: DensityOperator,
    ln_partition: f64,
    gap_cluster_tol: f64,
}

impl ProtocolInstance {
    pub fn new(
        protocol: UnitaryOperator,
        reservoir_h: HermitianOperator,
        beta: f64,
        system_state: DensityOperator,
    ) -> Result<Self> {
        let joint = reservoir_h.space().join(system_state.space())?;
        if protocol.space() != &joint {
            return Err(Error::DimensionMismatch(format!(
                "protocol acts on {:?} but reservoir ⊗ system is {:?}",
                protocol.space().subsystems(),
                joint.subsystems()
            )));
        }
        let GibbsState {
            state: reservoir_state,
            partition_function,
            ..
        } = gibbs_state(&reservoir_h, beta)?;
        let ln_partition = stable_ln_partition(&reservoir_h, beta);
        debug_assert!(
            !partition_function.is_finite()
                || partition_function <= 0.0
                || (partition_function.ln() - ln_partition).abs() < 1e-9
        );
        Ok(Self {
            protocol,
            reservoir_h,
            beta,
            system_state,
            reservoir_state,
            ln_partition,
            gap_cluster_tol: DEFAULT_GAP_TOL,
        })
    }

    /// Override the energy-clustering tolerance. Callers working at
    /// energy scales far from 1 (e.g. angular frequencies in rad/s) should
    /// scale it with their energy quantum.
    pub fn with_gap_cluster_tol(mut self, tol: f64) -> Result<Self> {
        if !(tol > 0.0 && tol.is_finite()) {
            return Err(Error::Validation(format!(
                "gap tolerance must be positive, got {tol}"
            )));
        }
        self.gap_cluster_tol = tol;
        Ok(self)
    }

    pub fn gap_cluster_tol(&self) -> f64 {
        self.gap_cluster_tol
    }

    /// Build the protocol unitary from a raw matrix on reservoir ⊗ system.
    pub fn from_matrix(
        protocol: CMat,
        reservoir_h: HermitianOperator,
        beta: f64,
        system_state: DensityOperator,
    ) -> Result<Self> {
        let joint = reservoir_h.space().join(system_state.space())?;
        let protocol = UnitaryOperator::new(protocol, joint)?;
        Self::new(protocol, reservoir_h, beta, system_state)
    }

    pub fn protocol(&self) -> &UnitaryOperator {
        &self.protocol
    }

    pub fn reservoir_h(&self) -> &HermitianOperator {
        &self.reservoir_h
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn system_state(&self) -> &DensityOperator {
        &self.system_state
    }

    /// Gibbs state of the reservoir Hamiltonian at `beta`.
    pub fn reservoir_state(&self) -> &DensityOperator {
        &self.reservoir_state
    }

    pub fn reservoir_dim(&self) -> usize {
        self.reservoir_h.dim()
    }

    pub fn system_dim(&self) -> usize {
        self.system_state.dim()
    }

    /// ρ_R ⊗ ρ_S.
    pub fn joint_state(&self) -> DensityOperator {
        self.reservoir_state
            .tensor(&self.system_state)
            .expect("reservoir and system labels are disjoint by construction")
    }

    /// U (ρ_R ⊗ ρ_S) U†.
    pub fn evolved_state(&self) -> DensityOperator {
        self.joint_state()
            .evolve(&self.protocol)
            .expect("dimensions checked at construction")
    }
}

/// ln Σ e^{−βE}, evaluated against the ground energy so it never overflows.
fn stable_ln_partition(h: &HermitianOperator, beta: f64) -> f64 {
    let energies = h.spectrum().eigenvalues();
    let e0 = energies[0];
    let sum: f64 = energies.iter().map(|&e| (-beta * (e - e0)).exp()).sum();
    sum.ln() - beta * e0
}

/// The two-point-measurement heat distribution at the instance's gap
/// tolerance.
pub fn tpm_distribution(inst: &ProtocolInstance) -> Result<HeatDistribution> {
    tpm_distribution_with_tol(inst, inst.gap_cluster_tol)
}

/// P(Q): measure reservoir energy (Boltzmann-weighted outcome m), apply the
/// protocol, measure again (outcome n); each (m, n) pair contributes its
/// joint probability at q = Eₙ − Eₘ. Eigenvalues within `gap_tol` are
/// clustered and completed projectors are used, which makes the result
/// basis-independent under degeneracy; equal gaps are merged by summing.
pub fn tpm_distribution_with_tol(
    inst: &ProtocolInstance,
    gap_tol: f64,
) -> Result<HeatDistribution> {
    let spectrum = inst.reservoir_h.spectrum();
    let energies = spectrum.eigenvalues();
    let clusters = cluster_sorted(energies, gap_tol);

    // per-eigenstate Gibbs populations, shifted for stability
    let e0 = energies[0];
    let weights: Vec<f64> = energies
        .iter()
        .map(|&e| (-inst.beta * (e - e0)).exp())
        .collect();
    let z: f64 = weights.iter().sum();

    let ds = inst.system_dim();
    let id_s = identity(ds);
    let u = inst.protocol.matrix();

    // Π_n ⊗ I_S for every final cluster
    let completed: Vec<CMat> = clusters
        .iter()
        .map(|(_, members)| {
            let mut pi = CMat::zeros(inst.reservoir_dim(), inst.reservoir_dim());
            for &i in members {
                pi += projector(&spectrum.eigenvector(i));
            }
            pi.kronecker(&id_s)
        })
        .collect();

    let mut raw: Vec<HeatAtom> = Vec::with_capacity(clusters.len() * clusters.len());
    for (e_m, members_m) in &clusters {
        // Π_m ρ_R Π_m: the Gibbs-weighted block of the initial cluster
        let mut block = CMat::zeros(inst.reservoir_dim(), inst.reservoir_dim());
        for &i in members_m {
            block += projector(&spectrum.eigenvector(i)) * C64::new(weights[i] / z, 0.0);
        }
        let evolved = u * block.kronecker(inst.system_state.matrix()) * u.adjoint();
        for (n, (e_n, _)) in clusters.iter().enumerate() {
            let p = (&evolved * &completed[n]).trace().re;
            raw.push(HeatAtom { q: e_n - e_m, p });
        }
    }

    merge_gaps(raw, gap_tol)
}

/// Sort atoms by heat value, merge gaps equal within `tol` (summing
/// probabilities, probability-weighted mean location), and validate.
pub(crate) fn merge_gaps(mut raw: Vec<HeatAtom>, tol: f64) -> Result<HeatDistribution> {
    raw.sort_by(|a, b| a.q.total_cmp(&b.q));
    let qs: Vec<f64> = raw.iter().map(|a| a.q).collect();
    let clusters = cluster_sorted(&qs, tol);
    let atoms: Vec<HeatAtom> = clusters
        .iter()
        .map(|(mean, members)| {
            let p: f64 = members.iter().map(|&i| raw[i].p).sum();
            let weight: f64 = members.iter().map(|&i| raw[i].p.abs()).sum();
            let q = if weight > 1e-300 {
                members
                    .iter()
                    .map(|&i| raw[i].q * raw[i].p.abs())
                    .sum::<f64>()
                    / weight
            } else {
                *mean
            };
            HeatAtom { q, p }
        })
        .collect();
    HeatDistribution::new(atoms, tol)
}

/// tr[H_R ρ'_R] − tr[H_R ρ_R]: the reservoir energy change, equal to the
/// first moment of the two-point-measurement distribution.
pub fn average_heat(inst: &ProtocolInstance) -> f64 {
    let rho_r_prime = reduced_reservoir(inst);
    let before = (inst.reservoir_h.matrix() * inst.reservoir_state().matrix())
        .trace()
        .re;
    let after = (inst.reservoir_h.matrix() * rho_r_prime.matrix())
        .trace()
        .re;
    after - before
}

fn reservoir_labels(inst: &ProtocolInstance) -> Vec<&str> {
    inst.reservoir_h.space().labels().collect()
}

fn system_labels(inst: &ProtocolInstance) -> Vec<&str> {
    inst.system_state.space().labels().collect()
}

fn reduced_reservoir(inst: &ProtocolInstance) -> DensityOperator {
    inst.evolved_state()
        .partial_trace(&reservoir_labels(inst))
        .expect("reservoir labels exist by construction")
}

/// Θ(t) by a single trace: tr[U ρ_R v_t ⊗ ρ_S U† v_t†] with
/// v_t = e^{−iH_R t}. No projective measurements enter; this is the
/// quantity the ancilla circuit reads out, and it must agree with the
/// Fourier sum of [`tpm_distribution`].
pub fn characteristic_direct(inst: &ProtocolInstance, t: f64) -> C64 {
    let v = evolution(&inst.reservoir_h, t);
    let id_s = identity(inst.system_dim());
    let left = (inst.reservoir_state().matrix() * v.matrix()).kronecker(inst.system_state.matrix());
    let right = v.matrix().adjoint().kronecker(&id_s);
    let u = inst.protocol.matrix();
    (u * left * u.adjoint() * right).trace()
}

/// One characteristic-function sample, exact or shot-estimated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CharacteristicSample {
    pub t: f64,
    pub theta: C64,
    pub std_error_re: f64,
    pub std_error_im: f64,
}

impl CharacteristicSample {
    pub fn exact(t: f64, theta: C64) -> Self {
        Self {
            t,
            theta,
            std_error_re: 0.0,
            std_error_im: 0.0,
        }
    }
}

/// Exact Θ samples over a time grid (parallel when the feature is on).
pub fn characteristic_grid(inst: &ProtocolInstance, ts: &[f64]) -> Vec<CharacteristicSample> {
    par_map(ts.to_vec(), |t| {
        CharacteristicSample::exact(t, characteristic_direct(inst, t))
    })
}

/// Sequential variant of [`characteristic_grid`], always available.
pub fn characteristic_grid_seq(inst: &ProtocolInstance, ts: &[f64]) -> Vec<CharacteristicSample> {
    seq_map(ts.to_vec(), |t| {
        CharacteristicSample::exact(t, characteristic_direct(inst, t))
    })
}

/// Landauer-bound bookkeeping for one protocol instance. All entropies are
/// in nats.
#[derive(Debug, Clone, Copy)]
pub struct LandauerReport {
    /// ⟨Q⟩ = tr[H_R ρ'_R] − tr[H_R ρ_R].
    pub average_heat: f64,
    /// β⟨Q⟩.
    pub beta_q: f64,
    /// S(ρ_S) − S(ρ'_S).
    pub entropy_decrease: f64,
    /// β⟨Q⟩ − (S(ρ_S) − S(ρ'_S)); nonnegative up to numerical noise.
    pub slack: f64,
    /// I(S':R') of the evolved joint state.
    pub mutual_information: f64,
    /// D(ρ'_R ‖ ρ_R).
    pub relative_entropy: f64,
    /// Set at β = 0, where β⟨Q⟩ vanishes identically and the reservoir
    /// reference state is I/d.
    pub beta_zero: bool,
}

/// Von Neumann entropy −tr[ρ ln ρ] in nats.
pub fn von_neumann_entropy(rho: &DensityOperator) -> f64 {
    let eig = nalgebra::linalg::SymmetricEigen::new(rho.matrix().clone());
    -eig.eigenvalues
        .iter()
        .filter(|&&l| l > 0.0)
        .map(|&l| l * l.ln())
        .sum::<f64>()
}

/// Landauer report: the bound β⟨Q⟩ ≥ S(ρ_S) − S(ρ'_S) plus its exact slack
/// decomposition slack = I(S':R') + D(ρ'_R‖ρ_R).
///
/// D(ρ'_R‖ρ_R) uses ln ρ_R = −βH_R − ln Z, exact for a Gibbs reference and
/// immune to Boltzmann-weight underflow; at β = 0 this reduces to the
/// relative entropy to I/d and the `beta_zero` flag is set.
pub fn landauer_report(inst: &ProtocolInstance) -> LandauerReport {
    let rho_prime = inst.evolved_state();
    let rho_r_prime = rho_prime
        .partial_trace(&reservoir_labels(inst))
        .expect("labels valid");
    let rho_s_prime = rho_prime
        .partial_trace(&system_labels(inst))
        .expect("labels valid");

    let s_s = von_neumann_entropy(&inst.system_state);
    let s_s_prime = von_neumann_entropy(&rho_s_prime);
    let s_r_prime = von_neumann_entropy(&rho_r_prime);
    let s_joint_prime = von_neumann_entropy(&rho_prime);

    let q = average_heat(inst);
    let beta_q = inst.beta * q;
    let entropy_decrease = s_s - s_s_prime;
    let mutual_information = s_s_prime + s_r_prime - s_joint_prime;

    // tr[ρ'_R ln ρ_R] = −β tr[ρ'_R H_R] − ln Z
    let energy_after = (inst.reservoir_h.matrix() * rho_r_prime.matrix())
        .trace()
        .re;
    let cross = -inst.beta * energy_after - inst.ln_partition;
    let relative_entropy = -s_r_prime - cross;

    LandauerReport {
        average_heat: q,
        beta_q,
        entropy_decrease,
        slack: beta_q - entropy_decrease,
        mutual_information,
        relative_entropy,
        beta_zero: inst.beta == 0.0,
    }
}
