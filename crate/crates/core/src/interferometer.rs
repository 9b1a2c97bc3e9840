//! The ancilla interferometer: prepare |+⟩, apply a controlled reservoir
//! evolution, the protocol, the opposite controlled evolution, then read the
//! ancilla coherence.
//!
//! The upper-right ancilla matrix element after the circuit equals Θ(t)/2,
//! so `readout_theta ∘ run_circuit` must reproduce
//! [`characteristic_direct`](crate::heat::characteristic_direct) exactly.
//! Finite-shot readout emulates Ramsey-style measurement of the diagonal
//! populations at analysis phases φ = 0 and φ = π/2 with a seeded,
//! counter-based generator.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::error::{Error, Result};
use crate::heat::{characteristic_direct, ProtocolInstance};
use crate::operator::{
    controlled, evolution, plus_ket, DensityOperator, HilbertSpace, UnitaryOperator,
};
use crate::parallel::{par_map, seq_map};
use crate::C64;

/// Which controlled gate acted at a given point of the circuit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CircuitStage {
    Prepared,
    ControlledVApplied,
    ProtocolApplied,
    ControlledVDaggerApplied,
}

/// Snapshot of the full ancilla ⊗ reservoir ⊗ system state after a stage.
#[derive(Debug, Clone)]
pub struct CircuitStageState {
    pub stage: CircuitStage,
    pub state: DensityOperator,
}

/// Order of the two controlled reservoir evolutions around the protocol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GateOrder {
    /// Controlled-v† before the protocol, controlled-v after. This order
    /// makes the ancilla coherence equal Θ(t) = Σ p e^{itq}.
    #[default]
    VDaggerFirst,
    /// Controlled-v first, controlled-v† after; yields conj Θ(t). Kept as
    /// an explicit option because the two orders both appear in circuit
    /// descriptions of this protocol and differ only by this conjugation.
    VFirst,
}

/// |+⟩⟨+|_A ⊗ ρ_R ⊗ ρ_S.
pub fn prepare_initial(
    rho_r: &DensityOperator,
    rho_s: &DensityOperator,
) -> Result<CircuitStageState> {
    let plus = DensityOperator::from_pure(&plus_ket(), HilbertSpace::single("A", 2))?;
    let state = plus.tensor(rho_r)?.tensor(rho_s)?;
    Ok(CircuitStageState {
        stage: CircuitStage::Prepared,
        state,
    })
}

fn circuit_gates(
    inst: &ProtocolInstance,
    t: f64,
    order: GateOrder,
) -> Result<(UnitaryOperator, UnitaryOperator, UnitaryOperator)> {
    let v = evolution(inst.reservoir_h(), t);
    let id_s = UnitaryOperator::identity_on(inst.system_state().space().clone());
    let (first, second) = match order {
        GateOrder::VDaggerFirst => (v.adjoint(), v),
        GateOrder::VFirst => (v.clone(), v.adjoint()),
    };
    let first_full = controlled(&first)?.tensor(&id_s)?;
    let second_full = controlled(&second)?.tensor(&id_s)?;
    let id_a = UnitaryOperator::identity_on(HilbertSpace::single("A", 2));
    let protocol_full = id_a.tensor(inst.protocol())?;
    Ok((first_full, protocol_full, second_full))
}

/// Run the circuit and return the reduced ancilla state.
pub fn run_circuit(inst: &ProtocolInstance, t: f64) -> Result<DensityOperator> {
    run_circuit_with(inst, t, GateOrder::default())
}

/// [`run_circuit`] with an explicit gate order.
pub fn run_circuit_with(
    inst: &ProtocolInstance,
    t: f64,
    order: GateOrder,
) -> Result<DensityOperator> {
    let (first, protocol, second) = circuit_gates(inst, t, order)?;
    let initial = prepare_initial(inst.reservoir_state(), inst.system_state())?;
    // one validated pass over raw matrices; the staged variant validates
    // every intermediate state
    let mut m = initial.state.matrix().clone();
    for gate in [&first, &protocol, &second] {
        m = gate.matrix() * m * gate.matrix().adjoint();
    }
    let full = DensityOperator::new(m, initial.state.space().clone())?;
    full.partial_trace(&["A"])
}

/// Run the circuit with caller-supplied controlled gates on ancilla ⊗
/// reservoir in place of the ideal controlled evolutions: `first` acts
/// before the protocol, `second` after. Used to drive the circuit with
/// hardware-model gates.
pub fn run_circuit_with_controlled_gates(
    inst: &ProtocolInstance,
    first: &UnitaryOperator,
    second: &UnitaryOperator,
) -> Result<DensityOperator> {
    let id_s = UnitaryOperator::identity_on(inst.system_state().space().clone());
    let id_a = UnitaryOperator::identity_on(HilbertSpace::single("A", 2));
    let first_full = first.tensor(&id_s)?;
    let second_full = second.tensor(&id_s)?;
    let protocol_full = id_a.tensor(inst.protocol())?;
    let initial = prepare_initial(inst.reservoir_state(), inst.system_state())?;
    let mut m = initial.state.matrix().clone();
    for gate in [&first_full, &protocol_full, &second_full] {
        m = gate.matrix() * m * gate.matrix().adjoint();
    }
    let full = DensityOperator::new(m, initial.state.space().clone())?;
    full.partial_trace(&["A"])
}

/// Run the circuit validating and recording the state after every stage.
pub fn run_circuit_staged(
    inst: &ProtocolInstance,
    t: f64,
    order: GateOrder,
) -> Result<(DensityOperator, Vec<CircuitStageState>)> {
    let (first, protocol, second) = circuit_gates(inst, t, order)?;
    let (first_stage, second_stage) = match order {
        GateOrder::VDaggerFirst => (
            CircuitStage::ControlledVDaggerApplied,
            CircuitStage::ControlledVApplied,
        ),
        GateOrder::VFirst => (
            CircuitStage::ControlledVApplied,
            CircuitStage::ControlledVDaggerApplied,
        ),
    };
    let initial = prepare_initial(inst.reservoir_state(), inst.system_state())?;
    let mut stages = vec![initial];
    for (gate, stage) in [
        (first, first_stage),
        (protocol, CircuitStage::ProtocolApplied),
        (second, second_stage),
    ] {
        let state = stages.last().unwrap().state.evolve(&gate)?;
        stages.push(CircuitStageState { stage, state });
    }
    let ancilla = stages.last().unwrap().state.partial_trace(&["A"])?;
    Ok((ancilla, stages))
}

/// tr[(X − iY) ρ_A] = 2 ρ_A[0,1]: the ancilla coherence that encodes Θ(t).
pub fn readout_theta(rho_a: &DensityOperator) -> Result<C64> {
    if rho_a.dim() != 2 {
        return Err(Error::DimensionMismatch(format!(
            "ancilla readout needs a qubit state, got dimension {}",
            rho_a.dim()
        )));
    }
    Ok(rho_a.matrix()[(0, 1)] * 2.0)
}

/// Probability of measuring the ancilla in |0⟩ at analysis phase φ:
/// (1 + Im(e^{iφ} Θ))/2. φ = 0 reads Im Θ and φ = π/2 reads Re Θ.
pub fn measurement_probability(theta: C64, phase: f64) -> Result<f64> {
    if theta.norm() > 1.0 + 1e-9 {
        return Err(Error::Validation(format!(
            "|Θ| = {} exceeds 1; not a characteristic-function value",
            theta.norm()
        )));
    }
    let p = 0.5 * (1.0 + ((C64::i() * phase).exp() * theta).im);
    Ok(p.clamp(0.0, 1.0))
}

/// Shot budget for one analysis phase.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShotPlan {
    pub shots: u64,
    /// Analysis phase φ in radians.
    pub phase: f64,
    pub seed: u64,
}

impl ShotPlan {
    /// Plan measuring at φ = 0 (the Im Θ channel).
    pub fn in_phase(shots: u64, seed: u64) -> Self {
        Self {
            shots,
            phase: 0.0,
            seed,
        }
    }

    /// Plan measuring at φ = π/2 (the Re Θ channel).
    pub fn quadrature(shots: u64, seed: u64) -> Self {
        Self {
            shots,
            phase: std::f64::consts::FRAC_PI_2,
            seed,
        }
    }
}

const PHASE_MATCH_TOL: f64 = 1e-12;

/// Finite-shot estimate of Θ at one time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThetaEstimate {
    pub t: f64,
    pub theta: C64,
    /// 2·√(p̂(1−p̂)/M) per quadrature; at most 1/√M.
    pub std_error_re: f64,
    pub std_error_im: f64,
    pub shots_per_phase: u64,
}

impl From<ThetaEstimate> for crate::heat::CharacteristicSample {
    fn from(est: ThetaEstimate) -> Self {
        Self {
            t: est.t,
            theta: est.theta,
            std_error_re: est.std_error_re,
            std_error_im: est.std_error_im,
        }
    }
}

fn bernoulli_mean(p: f64, shots: u64, seed: u64, stream: u64) -> f64 {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let mut hits = 0u64;
    for _ in 0..shots {
        if rng.random::<f64>() < p {
            hits += 1;
        }
    }
    hits as f64 / shots as f64
}

/// Draw M outcomes per phase from the exact outcome probabilities and
/// assemble Θ̂ = (2p̂_{π/2} − 1) + i(2p̂_0 − 1). The two phases use
/// independent substreams of the plan seed, so a fixed (seed, M) pair gives
/// a byte-identical estimate on every run.
pub fn sample_shots(
    inst: &ProtocolInstance,
    t: f64,
    plans: (ShotPlan, ShotPlan),
) -> Result<ThetaEstimate> {
    let is_in_phase = |p: &ShotPlan| p.phase.abs() <= PHASE_MATCH_TOL;
    let is_quadrature =
        |p: &ShotPlan| (p.phase - std::f64::consts::FRAC_PI_2).abs() <= PHASE_MATCH_TOL;
    let (in_phase, quadrature) = if is_in_phase(&plans.0) && is_quadrature(&plans.1) {
        (plans.0, plans.1)
    } else if is_quadrature(&plans.0) && is_in_phase(&plans.1) {
        (plans.1, plans.0)
    } else {
        return Err(Error::Validation(
            "shot plans must pair one φ = 0 and one φ = π/2 measurement".into(),
        ));
    };
    if in_phase.shots == 0 || quadrature.shots == 0 {
        return Err(Error::Validation(
            "shot plans need at least one shot".into(),
        ));
    }
    if in_phase.shots != quadrature.shots {
        return Err(Error::Validation(
            "the two shot plans must use the same number of shots".into(),
        ));
    }

    let theta = characteristic_direct(inst, t);
    let p0 = measurement_probability(theta, 0.0)?;
    let pq = measurement_probability(theta, std::f64::consts::FRAC_PI_2)?;

    let m = in_phase.shots;
    let p0_hat = bernoulli_mean(p0, m, in_phase.seed, 0);
    let pq_hat = bernoulli_mean(pq, m, quadrature.seed, 1);

    let est = C64::new(2.0 * pq_hat - 1.0, 2.0 * p0_hat - 1.0);
    let mf = m as f64;
    Ok(ThetaEstimate {
        t,
        theta: est,
        std_error_re: 2.0 * (pq_hat * (1.0 - pq_hat) / mf).sqrt(),
        std_error_im: 2.0 * (p0_hat * (1.0 - p0_hat) / mf).sqrt(),
        shots_per_phase: m,
    })
}

/// Shot-estimated Θ over a grid; point k uses seed `base_seed + k` so the
/// whole grid is reproducible and order-independent. Parallel when the
/// `parallel` feature is on.
pub fn sample_theta_grid(
    inst: &ProtocolInstance,
    ts: &[f64],
    shots: u64,
    base_seed: u64,
) -> Result<Vec<ThetaEstimate>> {
    let indexed: Vec<(usize, f64)> = ts.iter().copied().enumerate().collect();
    par_map(indexed, |(k, t)| {
        let seed = base_seed.wrapping_add(k as u64);
        sample_shots(
            inst,
            t,
            (
                ShotPlan::in_phase(shots, seed),
                ShotPlan::quadrature(shots, seed),
            ),
        )
    })
    .into_iter()
    .collect()
}

/// Sequential variant of [`sample_theta_grid`], always available.
pub fn sample_theta_grid_seq(
    inst: &ProtocolInstance,
    ts: &[f64],
    shots: u64,
    base_seed: u64,
) -> Result<Vec<ThetaEstimate>> {
    let indexed: Vec<(usize, f64)> = ts.iter().copied().enumerate().collect();
    seq_map(indexed, |(k, t)| {
        let seed = base_seed.wrapping_add(k as u64);
        sample_shots(
            inst,
            t,
            (
                ShotPlan::in_phase(shots, seed),
                ShotPlan::quadrature(shots, seed),
            ),
        )
    })
    .into_iter()
    .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::{basis_ket, identity, max_norm};
    use crate::random;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn random_instance(
        dim_r: usize,
        dim_s: usize,
        beta: f64,
        rng: &mut ChaCha12Rng,
    ) -> ProtocolInstance {
        let reservoir_h = random::random_hermitian(dim_r, "R", rng);
        let system_state = random::random_density(dim_s, "S", rng);
        let u = random::haar_unitary_matrix(dim_r * dim_s, rng);
        ProtocolInstance::from_matrix(u, reservoir_h, beta, system_state).unwrap()
    }

    #[test]
    fn prepare_initial_pure_product_blocks() {
        let space_r = HilbertSpace::single("R", 2);
        let space_s = HilbertSpace::single("S", 2);
        let rho_r = DensityOperator::from_pure(&basis_ket(2, 0), space_r).unwrap();
        let rho_s = DensityOperator::from_pure(&basis_ket(2, 0), space_s).unwrap();
        let prepared = prepare_initial(&rho_r, &rho_s).unwrap();
        let m = prepared.state.matrix();
        // all four ancilla blocks equal |00><00| / 2
        for (block_row, block_col) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
            let block = m.view((4 * block_row, 4 * block_col), (4, 4));
            assert_abs_diff_eq!(block[(0, 0)].re, 0.5, epsilon = 1e-15);
            assert_abs_diff_eq!(
                block.iter().map(|z| z.norm()).sum::<f64>(),
                0.5,
                epsilon = 1e-14
            );
        }
        assert_abs_diff_eq!(prepared.state.trace().re, 1.0, epsilon = 1e-13);
    }

    #[test]
    fn prepare_initial_off_diagonal_block_oracle() {
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        let rho_r = random::random_density(3, "R", &mut rng);
        let rho_s = random::random_density(2, "S", &mut rng);
        let prepared = prepare_initial(&rho_r, &rho_s).unwrap();
        let m = prepared.state.matrix();
        let block = m.view((0, 6), (6, 6)).into_owned();
        let expect = rho_r.matrix().kronecker(rho_s.matrix()) * C64::new(0.5, 0.0);
        assert!(max_norm(&(block - expect)) < 1e-14);
    }

    #[test]
    fn ancilla_unchanged_at_zero_time_and_identity_protocol() {
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        let inst = random_instance(3, 2, 1.2, &mut rng);
        let rho_a = run_circuit(&inst, 0.0).unwrap();
        assert!((rho_a.matrix()[(0, 1)] - C64::new(0.5, 0.0)).norm() < 1e-13);

        // identity protocol: the controlled gates cancel through the
        // diagonal reservoir state at every t
        let reservoir_h = random::random_hermitian(3, "R", &mut rng);
        let system_state = random::random_density(2, "S", &mut rng);
        let ident =
            ProtocolInstance::from_matrix(identity(6), reservoir_h, 0.9, system_state).unwrap();
        for t in [0.3, 1.1, 4.0] {
            let rho_a = run_circuit(&ident, t).unwrap();
            assert!((rho_a.matrix()[(0, 1)] - C64::new(0.5, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn circuit_reproduces_direct_trace() {
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        for _ in 0..10 {
            let dim_r = rng.random_range(2..=4);
            let dim_s = rng.random_range(2..=3);
            let beta = rng.random_range(0.0..5.0);
            let inst = random_instance(dim_r, dim_s, beta, &mut rng);
            for k in 0..6 {
                let t = -1.5 + k as f64 * 0.6;
                let rho_a = run_circuit(&inst, t).unwrap();
                let circuit = readout_theta(&rho_a).unwrap();
                let direct = characteristic_direct(&inst, t);
                assert!(
                    (circuit - direct).norm() < 1e-12,
                    "circuit {circuit} vs direct {direct} at t={t}"
                );
                // upper-right entry is Θ/2
                assert!((rho_a.matrix()[(0, 1)] * 2.0 - direct).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn alternate_gate_order_conjugates_theta() {
        let mut rng = ChaCha12Rng::seed_from_u64(4);
        let inst = random_instance(3, 2, 1.0, &mut rng);
        let t = 0.7;
        let default_theta =
            readout_theta(&run_circuit_with(&inst, t, GateOrder::VDaggerFirst).unwrap()).unwrap();
        let swapped_theta =
            readout_theta(&run_circuit_with(&inst, t, GateOrder::VFirst).unwrap()).unwrap();
        assert!((swapped_theta - default_theta.conj()).norm() < 1e-12);
    }

    #[test]
    fn stages_preserve_trace_and_ancilla_diagonal() {
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let inst = random_instance(3, 2, 0.6, &mut rng);
        let (rho_a, stages) = run_circuit_staged(&inst, 0.9, GateOrder::default()).unwrap();
        assert_eq!(stages.len(), 4);
        assert_eq!(stages[0].stage, CircuitStage::Prepared);
        assert_eq!(stages[1].stage, CircuitStage::ControlledVDaggerApplied);
        assert_eq!(stages[2].stage, CircuitStage::ProtocolApplied);
        assert_eq!(stages[3].stage, CircuitStage::ControlledVApplied);
        for stage in &stages {
            assert_abs_diff_eq!(stage.state.trace().re, 1.0, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(rho_a.matrix()[(0, 0)].re, 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(rho_a.matrix()[(1, 1)].re, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn readout_known_states() {
        let plus = DensityOperator::from_pure(&plus_ket(), HilbertSpace::single("A", 2)).unwrap();
        assert!((readout_theta(&plus).unwrap() - C64::new(1.0, 0.0)).norm() < 1e-15);
        let mixed = DensityOperator::maximally_mixed(HilbertSpace::single("A", 2));
        assert!(readout_theta(&mixed).unwrap().norm() < 1e-15);
    }

    #[test]
    fn measurement_probability_endpoints() {
        let p = measurement_probability(C64::new(1.0, 0.0), std::f64::consts::FRAC_PI_2).unwrap();
        assert_abs_diff_eq!(p, 1.0, epsilon = 1e-15);
        for phase in [0.0, 0.4, 1.3, std::f64::consts::FRAC_PI_2] {
            let p = measurement_probability(C64::new(0.0, 0.0), phase).unwrap();
            assert_abs_diff_eq!(p, 0.5, epsilon = 1e-15);
        }
        let p = measurement_probability(C64::new(0.0, 1.0), 0.0).unwrap();
        assert_abs_diff_eq!(p, 1.0, epsilon = 1e-15);
        assert!(measurement_probability(C64::new(1.2, 0.0), 0.0).is_err());
    }

    #[test]
    fn shots_deterministic_and_exact_for_unit_theta() {
        // identity protocol has Θ = 1: the quadrature channel is a
        // zero-variance coin
        let mut rng = ChaCha12Rng::seed_from_u64(6);
        let reservoir_h = random::random_hermitian(2, "R", &mut rng);
        let system_state = random::random_density(2, "S", &mut rng);
        let inst =
            ProtocolInstance::from_matrix(identity(4), reservoir_h, 1.0, system_state).unwrap();
        let plans = (ShotPlan::in_phase(500, 9), ShotPlan::quadrature(500, 9));
        let est = sample_shots(&inst, 0.8, plans).unwrap();
        assert_abs_diff_eq!(est.theta.re, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(est.std_error_re, 0.0, epsilon = 1e-15);

        let again = sample_shots(&inst, 0.8, plans).unwrap();
        assert_eq!(est, again);
    }

    #[test]
    fn shots_converge_at_large_m() {
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        let inst = random_instance(2, 2, 1.0, &mut rng);
        let t = 0.9;
        let m = 1_000_000u64;
        let plans = (ShotPlan::in_phase(m, 42), ShotPlan::quadrature(m, 42));
        let est = sample_shots(&inst, t, plans).unwrap();
        let exact = characteristic_direct(&inst, t);
        let bound = 5.0 / (m as f64).sqrt();
        assert!(
            (est.theta - exact).norm() <= bound,
            "err {}",
            (est.theta - exact).norm()
        );
        assert!(est.std_error_re <= 1.0 / (m as f64).sqrt() + 1e-12);
        assert!(est.std_error_im <= 1.0 / (m as f64).sqrt() + 1e-12);
    }

    #[test]
    fn shot_noise_scales_as_inverse_sqrt_m() {
        let mut rng = ChaCha12Rng::seed_from_u64(8);
        let inst = random_instance(2, 2, 1.0, &mut rng);
        let t = 0.6;
        let spread = |m: u64| {
            let estimates: Vec<C64> = (0..60)
                .map(|seed| {
                    let plans = (ShotPlan::in_phase(m, seed), ShotPlan::quadrature(m, seed));
                    sample_shots(&inst, t, plans).unwrap().theta
                })
                .collect();
            let mean: C64 = estimates.iter().sum::<C64>() / estimates.len() as f64;
            (estimates.iter().map(|e| (e - mean).norm_sqr()).sum::<f64>()
                / (estimates.len() - 1) as f64)
                .sqrt()
        };
        let s100 = spread(100);
        let s400 = spread(400);
        let ratio = s100 / s400;
        assert!((1.5..=2.5).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn mismatched_plans_rejected() {
        let mut rng = ChaCha12Rng::seed_from_u64(9);
        let inst = random_instance(2, 2, 1.0, &mut rng);
        let err = sample_shots(
            &inst,
            0.1,
            (ShotPlan::in_phase(10, 1), ShotPlan::in_phase(10, 1)),
        )
        .unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
    }

    #[test]
    fn grid_sampling_matches_pointwise_sampling() {
        let mut rng = ChaCha12Rng::seed_from_u64(10);
        let inst = random_instance(2, 2, 1.0, &mut rng);
        let ts = [0.0, 0.5, 1.0];
        let grid = sample_theta_grid(&inst, &ts, 200, 77).unwrap();
        let seq = sample_theta_grid_seq(&inst, &ts, 200, 77).unwrap();
        assert_eq!(grid, seq);
        for (k, est) in grid.iter().enumerate() {
            let seed = 77 + k as u64;
            let single = sample_shots(
                &inst,
                ts[k],
                (
                    ShotPlan::in_phase(200, seed),
                    ShotPlan::quadrature(200, seed),
                ),
            )
            .unwrap();
            assert_eq!(*est, single);
        }
    }
}
