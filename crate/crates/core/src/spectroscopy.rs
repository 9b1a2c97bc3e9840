//! Recover the discrete heat distribution from characteristic-function
//! samples.
//!
//! The support of P(Q) is the gap set of the reservoir Hamiltonian, which
//! is known to whoever can build the controlled evolution in the first
//! place. Inversion is therefore a known-support least-squares fit of
//! Θ(t_j) = Σ_k p_k e^{i q_k t_j} for real p_k, followed by Euclidean
//! projection onto the probability simplex.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::heat::{CharacteristicSample, HeatAtom, HeatDistribution};
use crate::operator::{cluster_sorted, HermitianOperator};

/// Relative singular-value floor below which the design matrix counts as
/// rank deficient.
const RANK_TOL: f64 = 1e-12;

/// Ascending set of distinct heat values Eₙ − Eₘ, symmetric and containing 0.
#[derive(Debug, Clone)]
pub struct GapSet {
    gaps: Vec<f64>,
    cluster_tol: f64,
}

impl GapSet {
    /// Validate an explicit gap list.
    pub fn new(gaps: Vec<f64>, cluster_tol: f64) -> Result<Self> {
        if cluster_tol <= 0.0 {
            return Err(Error::Validation(
                "cluster tolerance must be positive".into(),
            ));
        }
        let mut sorted = gaps.clone();
        sorted.sort_by(f64::total_cmp);
        if sorted != gaps {
            return Err(Error::Validation("gaps must be ascending".into()));
        }
        if !gaps.iter().any(|&q| q.abs() <= cluster_tol) {
            return Err(Error::Validation("gap set must contain 0".into()));
        }
        for w in gaps.windows(2) {
            if w[1] - w[0] <= cluster_tol {
                return Err(Error::Validation(format!(
                    "gaps {} and {} are closer than the cluster tolerance",
                    w[0], w[1]
                )));
            }
        }
        for &q in &gaps {
            if !gaps.iter().any(|&r| (r + q).abs() <= cluster_tol) {
                return Err(Error::Validation(format!(
                    "gap set is not symmetric: missing {}",
                    -q
                )));
            }
        }
        Ok(Self { gaps, cluster_tol })
    }

    /// All pairwise eigenvalue differences of `h`, merged within
    /// `cluster_tol` and symmetrized around 0.
    pub fn from_hamiltonian(h: &HermitianOperator, cluster_tol: f64) -> Result<Self> {
        if cluster_tol <= 0.0 {
            return Err(Error::Validation(
                "cluster tolerance must be positive".into(),
            ));
        }
        let energies = h.spectrum().eigenvalues();
        let levels = cluster_sorted(energies, cluster_tol);
        let mut diffs = Vec::with_capacity(levels.len() * levels.len());
        for (e_n, _) in &levels {
            for (e_m, _) in &levels {
                diffs.push(e_n - e_m);
            }
        }
        diffs.sort_by(f64::total_cmp);
        let means: Vec<f64> = cluster_sorted(&diffs, cluster_tol)
            .into_iter()
            .map(|(m, _)| m)
            .collect();

        // mirror the positive representatives so q and −q match exactly
        let positive: Vec<f64> = means
            .iter()
            .copied()
            .filter(|&m| m > cluster_tol / 2.0)
            .collect();
        let mut gaps: Vec<f64> = positive.iter().map(|&p| -p).collect();
        gaps.reverse();
        gaps.push(0.0);
        gaps.extend(positive.iter().copied());
        Self::new(gaps, cluster_tol)
    }

    pub fn gaps(&self) -> &[f64] {
        &self.gaps
    }

    pub fn cluster_tol(&self) -> f64 {
        self.cluster_tol
    }

    pub fn len(&self) -> usize {
        self.gaps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gaps.is_empty()
    }

    /// Largest |q|.
    pub fn max_gap(&self) -> f64 {
        self.gaps.iter().fold(0.0, |acc, &q| acc.max(q.abs()))
    }

    /// Smallest separation between adjacent gaps.
    pub fn min_separation(&self) -> Option<f64> {
        self.gaps
            .windows(2)
            .map(|w| w[1] - w[0])
            .min_by(f64::total_cmp)
    }
}

/// Uniform sampling grid with the two criteria it was built to satisfy.
#[derive(Debug, Clone)]
pub struct TimeGrid {
    pub times: Vec<f64>,
    /// Achieved spacing Δt.
    pub spacing: f64,
    /// Sampling criterion Δt ≤ π/(2 q_max).
    pub max_spacing: f64,
    /// Achieved span.
    pub span: f64,
    /// Resolution criterion: span ≥ 2π/δq_min.
    pub min_span: f64,
}

/// Uniform grid from t = 0 satisfying both the sampling criterion
/// Δt ≤ π/(2·q_max) and the resolution criterion span ≥ 2π/δq_min. When
/// `points` are too few for both, the point count grows beyond the request.
pub fn time_grid(gaps: &GapSet, points: usize) -> Result<TimeGrid> {
    if points < 2 * gaps.len() {
        return Err(Error::Validation(format!(
            "need at least 2·|gaps| = {} grid points, got {points}",
            2 * gaps.len()
        )));
    }
    let q_max = gaps.max_gap();
    if q_max <= gaps.cluster_tol() {
        // single atom at 0: any two points determine the constant signal
        return Ok(TimeGrid {
            times: vec![0.0, 1.0],
            spacing: 1.0,
            max_spacing: f64::INFINITY,
            span: 1.0,
            min_span: 0.0,
        });
    }
    let max_spacing = std::f64::consts::FRAC_PI_2 / q_max;
    let min_sep = gaps.min_separation().expect("multi-gap set");
    let min_span = std::f64::consts::TAU / min_sep;

    let mut n = points;
    let mut spacing = min_span / (n - 1) as f64;
    if spacing > max_spacing {
        n = (min_span / max_spacing).ceil() as usize + 1;
        spacing = min_span / (n - 1) as f64;
    }
    let times: Vec<f64> = (0..n).map(|j| j as f64 * spacing).collect();
    let span = times[n - 1];
    Ok(TimeGrid {
        times,
        spacing,
        max_spacing,
        span,
        min_span,
    })
}

/// Output of a least-squares inversion.
#[derive(Debug, Clone)]
pub struct ReconstructionResult {
    pub distribution: HeatDistribution,
    /// RMS residual of the unconstrained solution over all real equations.
    pub residual_rms: f64,
    /// σ_max/σ_min of the design matrix.
    pub condition_estimate: f64,
}

/// Real design matrix: rows alternate Re and Im of e^{i q_k t_j}.
pub(crate) fn design_matrix(gaps: &GapSet, ts: &[f64]) -> DMatrix<f64> {
    let k = gaps.len();
    DMatrix::from_fn(2 * ts.len(), k, |row, col| {
        let phase = gaps.gaps()[col] * ts[row / 2];
        if row % 2 == 0 {
            phase.cos()
        } else {
            phase.sin()
        }
    })
}

/// Euclidean projection onto the probability simplex.
pub fn project_to_simplex(v: &[f64]) -> Vec<f64> {
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut threshold = 0.0;
    for (i, &u) in sorted.iter().enumerate() {
        cumulative += u;
        let candidate = (cumulative - 1.0) / (i + 1) as f64;
        if u - candidate > 0.0 {
            threshold = candidate;
        }
    }
    v.iter().map(|&x| (x - threshold).max(0.0)).collect()
}

/// Solve Θ(t_j) = Σ_k p_k e^{i q_k t_j} for real p_k in least squares, then
/// project onto the simplex. The reported residual and condition number
/// describe the unconstrained fit.
pub fn reconstruct(
    samples: &[CharacteristicSample],
    gaps: &GapSet,
) -> Result<ReconstructionResult> {
    if samples.len() < gaps.len() {
        return Err(Error::Validation(format!(
            "need at least {} samples for {} gaps, got {}",
            gaps.len(),
            gaps.len(),
            samples.len()
        )));
    }
    let ts: Vec<f64> = samples.iter().map(|s| s.t).collect();
    let a = design_matrix(gaps, &ts);
    let b = DVector::from_fn(2 * samples.len(), |row, _| {
        if row % 2 == 0 {
            samples[row / 2].theta.re
        } else {
            samples[row / 2].theta.im
        }
    });

    let svd = a.clone().svd(true, true);
    let sigma_max = svd.singular_values.max();
    let sigma_min = svd.singular_values.min();
    if sigma_min <= RANK_TOL * sigma_max {
        return Err(Error::IllPosedGrid(format!(
            "design matrix is rank deficient (σ_min/σ_max = {:.3e})",
            sigma_min / sigma_max
        )));
    }
    let condition_estimate = sigma_max / sigma_min;
    let unconstrained = svd
        .solve(&b, 0.0)
        .map_err(|e| Error::IllPosedGrid(format!("least-squares solve failed: {e}")))?;
    let residual = (&a * &unconstrained - &b).norm();
    let residual_rms = residual / (b.len() as f64).sqrt();

    let projected = project_to_simplex(unconstrained.as_slice());
    let atoms: Vec<HeatAtom> = gaps
        .gaps()
        .iter()
        .zip(&projected)
        .map(|(&q, &p)| HeatAtom { q, p })
        .collect();
    let distribution = HeatDistribution::new(atoms, gaps.cluster_tol())?;
    Ok(ReconstructionResult {
        distribution,
        residual_rms,
        condition_estimate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::heat::{
        characteristic_from_distribution, moment, tpm_distribution, CharacteristicSample,
        ProtocolInstance, DEFAULT_GAP_TOL,
    };
    use crate::interferometer::sample_theta_grid;
    use crate::operator::{basis_ket, swap_matrix, DensityOperator, HilbertSpace};
    use crate::random;
    use crate::C64;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn qubit_gaps() -> GapSet {
        let h =
            HermitianOperator::from_diagonal(&[0.0, 1.0], HilbertSpace::single("R", 2)).unwrap();
        GapSet::from_hamiltonian(&h, 1e-9).unwrap()
    }

    #[test]
    fn gap_set_qubit() {
        let gaps = qubit_gaps();
        assert_eq!(gaps.gaps(), &[-1.0, 0.0, 1.0]);
    }

    #[test]
    fn gap_set_equally_spaced_merges() {
        let h = HermitianOperator::from_diagonal(&[0.0, 1.0, 2.0], HilbertSpace::single("R", 3))
            .unwrap();
        let gaps = GapSet::from_hamiltonian(&h, 1e-9).unwrap();
        assert_eq!(gaps.gaps(), &[-2.0, -1.0, 0.0, 1.0, 2.0]);
    }

    // Exhaustive pair enumeration at the same tolerance.
    #[test]
    fn gap_set_matches_brute_force_count() {
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        for _ in 0..10 {
            let h = random::random_hermitian(4, "R", &mut rng);
            let tol = 1e-9;
            let gaps = GapSet::from_hamiltonian(&h, tol).unwrap();

            let vals = h.spectrum().eigenvalues();
            let mut diffs = Vec::new();
            for &a in vals {
                for &b in vals {
                    diffs.push(a - b);
                }
            }
            diffs.sort_by(f64::total_cmp);
            let mut count = 1;
            for w in diffs.windows(2) {
                if w[1] - w[0] > tol {
                    count += 1;
                }
            }
            assert_eq!(gaps.len(), count);
        }
    }

    #[test]
    fn time_grid_forced_by_criteria() {
        let grid = time_grid(&qubit_gaps(), 8).unwrap();
        assert!(grid.spacing <= std::f64::consts::FRAC_PI_2 + 1e-15);
        assert!(grid.span >= std::f64::consts::TAU - 1e-12);
        assert_eq!(grid.times.len(), 8);
        assert_abs_diff_eq!(grid.times[0], 0.0, epsilon = 1e-15);
    }

    #[test]
    fn time_grid_degenerate_single_gap() {
        let gaps = GapSet::new(vec![0.0], 1e-9).unwrap();
        let grid = time_grid(&gaps, 2).unwrap();
        assert_eq!(grid.times, vec![0.0, 1.0]);
    }

    #[test]
    fn time_grid_random_sets_satisfy_inequalities() {
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        for _ in 0..10 {
            let h = random::random_hermitian(rng.random_range(2..=4), "R", &mut rng);
            let gaps = GapSet::from_hamiltonian(&h, 1e-9).unwrap();
            let points = 2 * gaps.len() + rng.random_range(0..10);
            let grid = time_grid(&gaps, points).unwrap();
            assert!(grid.spacing <= grid.max_spacing + 1e-15);
            assert!(grid.span >= grid.min_span - 1e-9 * grid.min_span.abs());
            // uniform spacing
            for w in grid.times.windows(2) {
                assert_abs_diff_eq!(w[1] - w[0], grid.spacing, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn time_grid_rejects_too_few_points() {
        assert!(time_grid(&qubit_gaps(), 5).is_err());
    }

    #[test]
    fn reconstruct_constant_signal_gives_single_zero_atom() {
        let gaps = qubit_gaps();
        let samples: Vec<CharacteristicSample> = (0..8)
            .map(|j| CharacteristicSample::exact(j as f64 * 0.9, C64::new(1.0, 0.0)))
            .collect();
        let rec = reconstruct(&samples, &gaps).unwrap();
        for atom in rec.distribution.atoms() {
            if atom.q.abs() < 1e-12 {
                assert_abs_diff_eq!(atom.p, 1.0, epsilon = 1e-10);
            } else {
                assert_abs_diff_eq!(atom.p, 0.0, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn reconstruct_rank_deficient_grid_errors() {
        let gaps = qubit_gaps();
        // all samples at t = 0 cannot distinguish the gaps
        let samples: Vec<CharacteristicSample> = (0..6)
            .map(|_| CharacteristicSample::exact(0.0, C64::new(1.0, 0.0)))
            .collect();
        let err = reconstruct(&samples, &gaps).unwrap_err();
        assert!(matches!(err, Error::IllPosedGrid(_)));
    }

    fn forward_samples(dist: &HeatDistribution, ts: &[f64]) -> Vec<CharacteristicSample> {
        ts.iter()
            .map(|&t| CharacteristicSample::exact(t, characteristic_from_distribution(dist, t)))
            .collect()
    }

    #[test]
    fn round_trip_known_distribution() {
        let gaps = qubit_gaps();
        let truth = HeatDistribution::new(
            vec![
                crate::heat::HeatAtom { q: -1.0, p: 0.15 },
                crate::heat::HeatAtom { q: 0.0, p: 0.25 },
                crate::heat::HeatAtom { q: 1.0, p: 0.6 },
            ],
            1e-9,
        )
        .unwrap();
        let grid = time_grid(&gaps, 12).unwrap();
        let samples = forward_samples(&truth, &grid.times);
        let rec = reconstruct(&samples, &gaps).unwrap();
        for (got, want) in rec.distribution.atoms().iter().zip(truth.atoms()) {
            assert_abs_diff_eq!(got.p, want.p, epsilon = 1e-8);
        }
        assert!(rec.residual_rms < 1e-10);
    }

    #[test]
    fn round_trip_random_instances() {
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        for _ in 0..8 {
            let dim_r = rng.random_range(2..=4);
            let dim_s = rng.random_range(2..=3);
            let reservoir_h = random::random_hermitian(dim_r, "R", &mut rng);
            let system_state = random::random_density(dim_s, "S", &mut rng);
            let u = random::haar_unitary_matrix(dim_r * dim_s, &mut rng);
            let inst = ProtocolInstance::from_matrix(
                u,
                reservoir_h.clone(),
                rng.random_range(0.2..3.0),
                system_state,
            )
            .unwrap();
            let dist = tpm_distribution(&inst).unwrap();
            let gaps = GapSet::from_hamiltonian(&reservoir_h, DEFAULT_GAP_TOL).unwrap();
            let grid = time_grid(&gaps, 2 * gaps.len() + 8).unwrap();
            let samples = forward_samples(&dist, &grid.times);
            let rec = reconstruct(&samples, &gaps).unwrap();

            // every oracle atom is recovered at its gap
            for atom in dist.atoms() {
                let got = rec
                    .distribution
                    .atoms()
                    .iter()
                    .find(|a| (a.q - atom.q).abs() <= DEFAULT_GAP_TOL)
                    .map(|a| a.p)
                    .unwrap_or(0.0);
                assert_abs_diff_eq!(got, atom.p, epsilon = 1e-8);
            }
            // reconstructed moments track oracle moments
            for k in 1..=2 {
                let tolerance = 10.0 * rec.residual_rms + 1e-8;
                assert_abs_diff_eq!(
                    moment(&rec.distribution, k),
                    moment(&dist, k),
                    epsilon = tolerance
                );
            }
        }
    }

    #[test]
    fn projection_triangle_inequality() {
        // noisy samples: the projected residual obeys
        // ‖A p_proj − b‖ ≤ ‖A p* − b‖ + σ_max ‖p_proj − p*‖
        let mut rng = ChaCha12Rng::seed_from_u64(4);
        let gaps = qubit_gaps();
        let truth = HeatDistribution::new(
            vec![
                crate::heat::HeatAtom { q: -1.0, p: 0.1 },
                crate::heat::HeatAtom { q: 0.0, p: 0.5 },
                crate::heat::HeatAtom { q: 1.0, p: 0.4 },
            ],
            1e-9,
        )
        .unwrap();
        let grid = time_grid(&gaps, 10).unwrap();
        let mut samples = forward_samples(&truth, &grid.times);
        for s in &mut samples {
            s.theta += C64::new(rng.random_range(-0.02..0.02), rng.random_range(-0.02..0.02));
        }

        let a = design_matrix(&gaps, &grid.times);
        let b = DVector::from_fn(2 * samples.len(), |row, _| {
            if row % 2 == 0 {
                samples[row / 2].theta.re
            } else {
                samples[row / 2].theta.im
            }
        });
        let svd = a.clone().svd(true, true);
        let unconstrained = svd.solve(&b, 0.0).unwrap();
        let projected = DVector::from_vec(project_to_simplex(unconstrained.as_slice()));

        let base_residual = (&a * &unconstrained - &b).norm();
        let projected_residual = (&a * &projected - &b).norm();
        let sigma_max = svd.singular_values.max();
        let bound = base_residual + sigma_max * (&projected - &unconstrained).norm();
        assert!(projected_residual <= bound + 1e-12);

        let rec = reconstruct(&samples, &gaps).unwrap();
        let total: f64 = rec.distribution.atoms().iter().map(|a| a.p).sum();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn shot_noise_reconstruction_within_condition_scaled_bound() {
        // SWAP worked example sampled at M = 1e5 per grid point
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
        let estimates = sample_theta_grid(&inst, &grid.times, m, 2024).unwrap();
        let samples: Vec<CharacteristicSample> = estimates
            .iter()
            .map(|e| CharacteristicSample::from(*e))
            .collect();
        let rec = reconstruct(&samples, &gaps).unwrap();

        let bound = 5.0 * rec.condition_estimate / (m as f64).sqrt();
        for atom in oracle.atoms() {
            let got = rec
                .distribution
                .atoms()
                .iter()
                .find(|a| (a.q - atom.q).abs() <= DEFAULT_GAP_TOL)
                .map(|a| a.p)
                .unwrap_or(0.0);
            assert!(
                (got - atom.p).abs() <= bound,
                "atom at {} off by {} (bound {bound})",
                atom.q,
                (got - atom.p).abs()
            );
        }
    }

    #[test]
    fn simplex_projection_basics() {
        let p = project_to_simplex(&[0.4, 0.3, 0.3]);
        assert_abs_diff_eq!(p[0], 0.4, epsilon = 1e-15);
        let p = project_to_simplex(&[1.1, -0.05, -0.05]);
        assert_abs_diff_eq!(p.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        assert!(p.iter().all(|&x| x >= 0.0));
        let p = project_to_simplex(&[-1.0, -2.0, -3.0]);
        assert_abs_diff_eq!(p.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
    }
}
