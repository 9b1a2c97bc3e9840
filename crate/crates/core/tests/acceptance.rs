//! Acceptance suite: one test per release criterion, each printing a
//! PASS/FAIL line (run with `cargo test --test acceptance -- --nocapture`
//! to see them). Criterion 10 (CLI byte-level determinism) lives in the
//! CLI crate's acceptance tests.

use std::f64::consts::TAU;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use heatline_core::heat::landauer_report;
use heatline_core::heat::{
    average_heat, characteristic_direct, characteristic_from_distribution, moment,
    tpm_distribution, CharacteristicSample, ProtocolInstance, DEFAULT_GAP_TOL,
};
use heatline_core::interferometer::{
    readout_theta, run_circuit, sample_shots, sample_theta_grid, ShotPlan,
};
use heatline_core::ion::{
    build_protocol, conditional_shift, elimination_report, leakage_bound, reference_ca40,
    IonParameters,
};
use heatline_core::operator::{basis_ket, swap_matrix, DensityOperator, HilbertSpace};
use heatline_core::spectroscopy::{reconstruct, time_grid, GapSet};
use heatline_core::thermal::{thermal_oscillator, OscillatorThermalSpec};
use heatline_core::{random, HermitianOperator, C64};

const INSTANCES: usize = 200;
const GRID_POINTS: usize = 32;

fn instance_set() -> Vec<ProtocolInstance> {
    let mut rng = ChaCha12Rng::seed_from_u64(0x5eed);
    (0..INSTANCES)
        .map(|_| {
            let dim_r = rng.random_range(2..=4);
            let dim_s = rng.random_range(2..=4);
            let beta = rng.random_range(0.0..=5.0);
            let reservoir_h = random::random_hermitian(dim_r, "R", &mut rng);
            let system_state = random::random_density(dim_s, "S", &mut rng);
            let u = random::haar_unitary_matrix(dim_r * dim_s, &mut rng);
            ProtocolInstance::from_matrix(u, reservoir_h, beta, system_state).unwrap()
        })
        .collect()
}

fn t_grid() -> Vec<f64> {
    (0..GRID_POINTS)
        .map(|k| -4.0 + 8.0 * k as f64 / (GRID_POINTS - 1) as f64)
        .collect()
}

#[test]
fn criterion_01_central_identity_circuit_vs_direct_trace() {
    let start = Instant::now();
    let instances = instance_set();
    let ts = t_grid();
    let mut worst = 0.0f64;
    for inst in &instances {
        for &t in &ts {
            let circuit = readout_theta(&run_circuit(inst, t).unwrap()).unwrap();
            let direct = characteristic_direct(inst, t);
            worst = worst.max((circuit - direct).norm());
        }
    }
    let pass = worst < 1e-10;
    println!(
        "acceptance criterion 1 (central identity, circuit vs direct trace): {} -- max deviation {worst:.3e} over {INSTANCES} instances x {GRID_POINTS} times in {:.1?}",
        if pass { "PASS" } else { "FAIL" },
        start.elapsed()
    );
    assert!(pass, "max |theta_circuit - theta_direct| = {worst:.3e}");
}

#[test]
fn criterion_02_tpm_oracle_consistency() {
    let instances = instance_set();
    let ts = t_grid();
    let mut worst_theta = 0.0f64;
    let mut worst_moment = 0.0f64;
    for inst in &instances {
        let dist = tpm_distribution(inst).unwrap();
        for &t in &ts {
            let fourier = characteristic_from_distribution(&dist, t);
            let direct = characteristic_direct(inst, t);
            worst_theta = worst_theta.max((fourier - direct).norm());
        }
        worst_moment = worst_moment.max((moment(&dist, 1) - average_heat(inst)).abs());
    }
    let pass = worst_theta < 1e-10 && worst_moment < 1e-10;
    println!(
        "acceptance criterion 2 (TPM Fourier sum vs direct trace, first moment vs average heat): {} -- worst theta gap {worst_theta:.3e}, worst moment gap {worst_moment:.3e}",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass);
}

#[test]
fn criterion_03_characteristic_function_axioms() {
    let instances = instance_set();
    let ts = t_grid();
    let mut worst_origin = 0.0f64;
    let mut worst_modulus = 0.0f64;
    let mut worst_conj = 0.0f64;
    for inst in &instances {
        worst_origin =
            worst_origin.max((characteristic_direct(inst, 0.0) - C64::new(1.0, 0.0)).norm());
        for &t in &ts {
            let theta = characteristic_direct(inst, t);
            worst_modulus = worst_modulus.max(theta.norm() - 1.0);
            worst_conj = worst_conj.max((characteristic_direct(inst, -t) - theta.conj()).norm());
        }
    }
    let pass = worst_origin < 1e-12 && worst_modulus < 1e-12 && worst_conj < 1e-12;
    println!(
        "acceptance criterion 3 (theta(0)=1, |theta|<=1, theta(-t)=conj): {} -- {worst_origin:.3e} / {worst_modulus:.3e} / {worst_conj:.3e}",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass);
}

#[test]
fn criterion_04_landauer_bound_and_slack_decomposition() {
    let instances = instance_set();
    let mut worst_slack = f64::INFINITY;
    let mut worst_identity = 0.0f64;
    for inst in &instances {
        let report = landauer_report(inst);
        worst_slack = worst_slack.min(report.slack);
        worst_identity = worst_identity
            .max((report.slack - report.mutual_information - report.relative_entropy).abs());
    }
    let pass = worst_slack >= -1e-9 && worst_identity < 1e-8;
    println!(
        "acceptance criterion 4 (Landauer slack >= 0 and slack = I + D): {} -- min slack {worst_slack:.3e}, worst identity gap {worst_identity:.3e}",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass);
}

#[test]
fn criterion_05_conditional_shift_reference_number() {
    let shift = conditional_shift(0.07, TAU * 300e3, TAU * 100e3);
    let khz = shift / TAU / 1e3;
    let pass = (1.05..=1.15).contains(&khz);
    println!(
        "acceptance criterion 5 (conditional shift at eta=0.07, delta=2pi*100kHz, Omega=2pi*300kHz): {} -- 2pi x {khz:.4} kHz per phonon",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "shift 2pi x {khz} kHz outside [1.05, 1.15]");
}

#[test]
fn criterion_06_adiabatic_elimination_leakage_and_scaling() {
    let start = Instant::now();
    let base = reference_ca40();
    // n̄ = 2 thermal mode truncated at n <= 8
    let temperature = heatline_core::constants::HBAR * base.mode_frequency
        / (heatline_core::constants::K_B * (1.5f64).ln());
    let p = IonParameters {
        temperature,
        fock_cutoff: 8,
        ..base
    };
    let thermal = thermal_oscillator(&OscillatorThermalSpec {
        tail_tolerance: 0.05,
        ..OscillatorThermalSpec::new(p.mode_frequency, p.temperature, p.fock_cutoff)
    })
    .unwrap();

    let period = TAU / p.conditional_shift().abs();
    let report = elimination_report(&p, period, &thermal.state).unwrap();
    let bound = leakage_bound(8);
    let leakage_ok = report.max_leakage <= bound;

    let stiffer = IonParameters {
        detuning_ac: 10.0 * p.detuning_ac,
        ..p
    };
    let report10 = elimination_report(&stiffer, period, &thermal.state).unwrap();
    let scaling_ok = report10.max_state_error * 5.0 <= report.max_state_error;

    let pass = leakage_ok && scaling_ok;
    println!(
        "acceptance criterion 6 (adiabatic elimination): {} -- max |a> population {:.4} <= bound {:.4}, trace-distance error {:.3e} -> {:.3e} under 10x detuning ({:.1}x better) in {:.1?}",
        if pass { "PASS" } else { "FAIL" },
        report.max_leakage,
        bound,
        report.max_state_error,
        report10.max_state_error,
        report.max_state_error / report10.max_state_error,
        start.elapsed()
    );
    assert!(
        leakage_ok,
        "leakage {} above bound {bound}",
        report.max_leakage
    );
    assert!(
        scaling_ok,
        "error only improved {}x",
        report.max_state_error / report10.max_state_error
    );
}

#[test]
fn criterion_07_reconstruction_round_trip() {
    // noiseless round trips on random instances with dim R <= 4
    let mut rng = ChaCha12Rng::seed_from_u64(0x7ec0);
    let mut worst_noiseless = 0.0f64;
    for _ in 0..20 {
        let dim_r = rng.random_range(2..=4);
        let dim_s = rng.random_range(2..=3);
        let reservoir_h = random::random_hermitian(dim_r, "R", &mut rng);
        let system_state = random::random_density(dim_s, "S", &mut rng);
        let u = random::haar_unitary_matrix(dim_r * dim_s, &mut rng);
        let inst = ProtocolInstance::from_matrix(
            u,
            reservoir_h.clone(),
            rng.random_range(0.0..4.0),
            system_state,
        )
        .unwrap();
        let dist = tpm_distribution(&inst).unwrap();
        let gaps = GapSet::from_hamiltonian(&reservoir_h, DEFAULT_GAP_TOL).unwrap();
        let grid = time_grid(&gaps, 2 * gaps.len() + 8).unwrap();
        let samples: Vec<CharacteristicSample> = grid
            .times
            .iter()
            .map(|&t| CharacteristicSample::exact(t, characteristic_from_distribution(&dist, t)))
            .collect();
        let rec = reconstruct(&samples, &gaps).unwrap();
        for atom in dist.atoms() {
            let got = rec
                .distribution
                .atoms()
                .iter()
                .find(|a| (a.q - atom.q).abs() <= DEFAULT_GAP_TOL)
                .map(|a| a.p)
                .unwrap_or(0.0);
            worst_noiseless = worst_noiseless.max((got - atom.p).abs());
        }
    }
    let noiseless_ok = worst_noiseless < 1e-8;

    // shot-noise round trip on the SWAP example at M = 1e5 per point
    let reservoir_h =
        HermitianOperator::from_diagonal(&[0.0, 1.0], HilbertSpace::single("R", 2)).unwrap();
    let system_state =
        DensityOperator::from_pure(&basis_ket(2, 1), HilbertSpace::single("S", 2)).unwrap();
    let inst =
        ProtocolInstance::from_matrix(swap_matrix(2), reservoir_h.clone(), 1.0, system_state)
            .unwrap();
    let oracle = tpm_distribution(&inst).unwrap();
    let gaps = GapSet::from_hamiltonian(&reservoir_h, DEFAULT_GAP_TOL).unwrap();
    let grid = time_grid(&gaps, 16).unwrap();
    let m = 100_000u64;
    let estimates = sample_theta_grid(&inst, &grid.times, m, 0xacce).unwrap();
    let samples: Vec<CharacteristicSample> = estimates
        .into_iter()
        .map(CharacteristicSample::from)
        .collect();
    let rec = reconstruct(&samples, &gaps).unwrap();
    let noise_bound = 5.0 * rec.condition_estimate / (m as f64).sqrt();
    let mut worst_noisy = 0.0f64;
    for atom in oracle.atoms() {
        let got = rec
            .distribution
            .atoms()
            .iter()
            .find(|a| (a.q - atom.q).abs() <= DEFAULT_GAP_TOL)
            .map(|a| a.p)
            .unwrap_or(0.0);
        worst_noisy = worst_noisy.max((got - atom.p).abs());
    }
    let noisy_ok = worst_noisy <= noise_bound;

    let pass = noiseless_ok && noisy_ok;
    println!(
        "acceptance criterion 7 (reconstruction round trip): {} -- noiseless worst {worst_noiseless:.3e} (< 1e-8), shot-noise worst {worst_noisy:.3e} <= 5*kappa/sqrt(M) = {noise_bound:.3e} (kappa {:.2})",
        if pass { "PASS" } else { "FAIL" },
        rec.condition_estimate
    );
    assert!(noiseless_ok);
    assert!(noisy_ok);
}

#[test]
fn criterion_08_shot_noise_scaling() {
    let start = Instant::now();
    let mut rng = ChaCha12Rng::seed_from_u64(0x5ca1e);
    let reservoir_h = random::random_hermitian(2, "R", &mut rng);
    let system_state = random::random_density(2, "S", &mut rng);
    let u = random::haar_unitary_matrix(4, &mut rng);
    let inst = ProtocolInstance::from_matrix(u, reservoir_h, 1.0, system_state).unwrap();
    let t = 0.7;

    let spread = |m: u64| {
        let estimates: Vec<C64> = (0..100)
            .map(|seed| {
                let plans = (ShotPlan::in_phase(m, seed), ShotPlan::quadrature(m, seed));
                sample_shots(&inst, t, plans).unwrap().theta
            })
            .collect();
        let mean: C64 = estimates.iter().sum::<C64>() / estimates.len() as f64;
        (estimates.iter().map(|e| (e - mean).norm_sqr()).sum::<f64>() / 99.0).sqrt()
    };

    let mut pass = true;
    let mut detail = String::new();
    for m in [100u64, 1_000, 10_000] {
        let ratio = spread(m) / spread(4 * m);
        let ok = (1.5..=2.5).contains(&ratio);
        pass &= ok;
        detail.push_str(&format!("M={m}: std ratio {ratio:.2}; "));
    }
    println!(
        "acceptance criterion 8 (1/sqrt(M) shot-noise scaling): {} -- {detail}in {:.1?}",
        if pass { "PASS" } else { "FAIL" },
        start.elapsed()
    );
    assert!(pass, "{detail}");
}

#[test]
fn criterion_09_ion_end_to_end_rabi_transfer() {
    let p = IonParameters {
        temperature: 1e-7,
        ..reference_ca40()
    };
    let system_state =
        DensityOperator::from_pure(&basis_ket(2, 1), HilbertSpace::single("S", 2)).unwrap();
    let g = p.lamb_dicke() * p.rabi_s;
    let drive_time = std::f64::consts::PI / g;
    let inst = build_protocol(&p, drive_time, system_state).unwrap();
    let dist = tpm_distribution(&inst).unwrap();

    let omega = p.mode_frequency;
    let got = dist
        .atoms()
        .iter()
        .find(|a| (a.q - omega).abs() < 1e-3 * omega)
        .map(|a| a.p)
        .unwrap_or(0.0);
    // ground-state block Rabi closed form: sin^2(g*sqrt(1)*t/2)
    let expect = (g * drive_time / 2.0).sin().powi(2);
    let pass = (got - expect).abs() < 1e-9;
    println!(
        "acceptance criterion 9 (ion end-to-end full transfer): {} -- P(+omega) = {got:.12} vs closed form {expect:.12}",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass);
}
