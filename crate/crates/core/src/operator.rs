//! Dense complex operator algebra on labeled tensor-product spaces.
//!
//! Operators are plain dense matrices tagged with a [`HilbertSpace`] that
//! records the ordered subsystem composition (convention: ancilla ⊗
//! reservoir ⊗ system). Construction validates the defining invariant of
//! each wrapper (Hermiticity, unitarity, or density-operator positivity);
//! everything downstream may assume it holds.

use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::C64;

/// Dense complex matrix.
pub type CMat = DMatrix<C64>;
/// Dense complex column vector.
pub type CVec = DVector<C64>;

/// Relative Hermiticity tolerance: ‖H − H†‖_max ≤ HERMITICITY_TOL · ‖H‖_max.
pub const HERMITICITY_TOL: f64 = 1e-12;
/// Absolute unitarity tolerance: ‖U†U − I‖_max.
pub const UNITARITY_TOL: f64 = 1e-10;
/// Absolute trace tolerance for density operators.
pub const TRACE_TOL: f64 = 1e-10;
/// Lower bound on density-operator eigenvalues.
pub const EIGENVALUE_FLOOR: f64 = -1e-10;
/// Relative reconstruction tolerance for spectral decompositions.
pub const RECONSTRUCTION_TOL: f64 = 1e-10;

/// Ordered list of labeled subsystems spanning a tensor-product space.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HilbertSpace {
    subsystems: Vec<(String, usize)>,
}

impl HilbertSpace {
    /// Build a space from `(label, dim)` pairs. Labels must be unique and
    /// every dimension at least 1.
    pub fn new<L: Into<String>>(subsystems: Vec<(L, usize)>) -> Result<Self> {
        let subsystems: Vec<(String, usize)> =
            subsystems.into_iter().map(|(l, d)| (l.into(), d)).collect();
        if subsystems.is_empty() {
            return Err(Error::Validation(
                "a space needs at least one subsystem".into(),
            ));
        }
        for (label, dim) in &subsystems {
            if *dim == 0 {
                return Err(Error::Validation(format!(
                    "subsystem `{label}` has dimension 0"
                )));
            }
        }
        for (i, (label, _)) in subsystems.iter().enumerate() {
            if subsystems[i + 1..].iter().any(|(other, _)| other == label) {
                return Err(Error::Validation(format!(
                    "duplicate subsystem label `{label}`"
                )));
            }
        }
        Ok(Self { subsystems })
    }

    /// Single-subsystem space.
    pub fn single(label: impl Into<String>, dim: usize) -> Self {
        Self {
            subsystems: vec![(label.into(), dim)],
        }
    }

    pub fn total_dim(&self) -> usize {
        self.subsystems.iter().map(|(_, d)| d).product()
    }

    pub fn subsystems(&self) -> &[(String, usize)] {
        &self.subsystems
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.subsystems.iter().map(|(l, _)| l.as_str())
    }

    pub fn dims(&self) -> Vec<usize> {
        self.subsystems.iter().map(|(_, d)| *d).collect()
    }

    /// Position of `label` in the subsystem order.
    pub fn position(&self, label: &str) -> Result<usize> {
        self.subsystems
            .iter()
            .position(|(l, _)| l == label)
            .ok_or_else(|| Error::UnknownLabel(label.to_string()))
    }

    pub fn dim_of(&self, label: &str) -> Result<usize> {
        self.position(label).map(|i| self.subsystems[i].1)
    }

    /// Concatenation `self ⊗ other`; labels must stay unique.
    pub fn join(&self, other: &Self) -> Result<Self> {
        let mut subsystems = self.subsystems.clone();
        subsystems.extend(other.subsystems.iter().cloned());
        Self::new(subsystems)
    }

    /// Sub-space built from the subsystems at `positions`, keeping their order.
    fn select(&self, positions: &[usize]) -> Self {
        Self {
            subsystems: positions
                .iter()
                .map(|&i| self.subsystems[i].clone())
                .collect(),
        }
    }
}

/// Entrywise maximum modulus, the ‖·‖_max used by all validation bounds.
pub fn max_norm(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// ‖M − M†‖_max.
pub fn hermiticity_defect(m: &CMat) -> f64 {
    let mut defect = 0.0f64;
    for i in 0..m.nrows() {
        for j in i..m.ncols() {
            defect = defect.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    defect
}

fn ensure_finite(m: &CMat) -> Result<()> {
    if m.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(())
    } else {
        Err(Error::Validation(
            "matrix contains NaN or infinite entries".into(),
        ))
    }
}

fn ensure_square(m: &CMat) -> Result<()> {
    if m.nrows() == m.ncols() {
        Ok(())
    } else {
        Err(Error::DimensionMismatch(format!(
            "expected a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )))
    }
}

fn ensure_space_matches(m: &CMat, space: &HilbertSpace) -> Result<()> {
    ensure_square(m)?;
    if m.nrows() != space.total_dim() {
        return Err(Error::DimensionMismatch(format!(
            "matrix is {}x{} but the space has total dimension {}",
            m.nrows(),
            m.ncols(),
            space.total_dim()
        )));
    }
    Ok(())
}

/// `dim`-dimensional identity.
pub fn identity(dim: usize) -> CMat {
    CMat::identity(dim, dim)
}

/// Basis ket |k⟩ in `dim` dimensions.
pub fn basis_ket(dim: usize, k: usize) -> CVec {
    let mut v = CVec::zeros(dim);
    v[k] = C64::new(1.0, 0.0);
    v
}

/// Qubit |+⟩ = (|0⟩ + |1⟩)/√2.
pub fn plus_ket() -> CVec {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    CVec::from_vec(vec![C64::new(s, 0.0), C64::new(s, 0.0)])
}

/// Outer product |v⟩⟨v|.
pub fn projector(v: &CVec) -> CMat {
    v * v.adjoint()
}

/// Eigenvalue/eigenvector pair list of a Hermitian matrix, eigenvalues
/// ascending, eigenvector columns orthonormal.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    eigenvalues: Vec<f64>,
    eigenvectors: CMat,
}

impl SpectralDecomposition {
    /// Decompose `h`, assumed Hermitian. Validates the reconstruction
    /// residual ‖VΛV† − H‖_max ≤ 1e-10 · max(1, ‖H‖_max) and column
    /// orthonormality.
    fn compute(h: &CMat) -> Result<Self> {
        let eig = nalgebra::linalg::SymmetricEigen::new(h.clone());
        let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));

        let dim = h.nrows();
        let eigenvalues: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let mut eigenvectors = CMat::zeros(dim, dim);
        for (col, &i) in order.iter().enumerate() {
            eigenvectors.set_column(col, &eig.eigenvectors.column(i));
        }

        let decomposition = Self {
            eigenvalues,
            eigenvectors,
        };
        let residual = max_norm(&(&decomposition.reconstruct() - h));
        let scale = max_norm(h).max(1.0);
        if residual > RECONSTRUCTION_TOL * scale {
            return Err(Error::Validation(format!(
                "eigendecomposition residual {residual:.3e} exceeds {:.3e}",
                RECONSTRUCTION_TOL * scale
            )));
        }
        let gram = decomposition.eigenvectors.adjoint() * &decomposition.eigenvectors;
        let ortho_defect = max_norm(&(gram - identity(dim)));
        if ortho_defect > UNITARITY_TOL {
            return Err(Error::Validation(format!(
                "eigenvector columns not orthonormal: defect {ortho_defect:.3e}"
            )));
        }
        Ok(decomposition)
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &CMat {
        &self.eigenvectors
    }

    /// Column `i` as a ket.
    pub fn eigenvector(&self, i: usize) -> CVec {
        self.eigenvectors.column(i).into_owned()
    }

    /// VΛV†.
    pub fn reconstruct(&self) -> CMat {
        self.apply(|x| C64::new(x, 0.0))
    }

    /// V f(Λ) V† for a scalar function of the eigenvalues.
    pub fn apply(&self, f: impl Fn(f64) -> C64) -> CMat {
        let dim = self.eigenvalues.len();
        let mut scaled = self.eigenvectors.clone();
        for (col, &lambda) in self.eigenvalues.iter().enumerate() {
            let factor = f(lambda);
            for row in 0..dim {
                scaled[(row, col)] *= factor;
            }
        }
        scaled * self.eigenvectors.adjoint()
    }
}

/// Validated Hermitian operator with a lazily cached spectral decomposition.
#[derive(Debug)]
pub struct HermitianOperator {
    matrix: CMat,
    space: HilbertSpace,
    spectrum: OnceLock<SpectralDecomposition>,
}

impl Clone for HermitianOperator {
    fn clone(&self) -> Self {
        let spectrum = OnceLock::new();
        if let Some(s) = self.spectrum.get() {
            let _ = spectrum.set(s.clone());
        }
        Self {
            matrix: self.matrix.clone(),
            space: self.space.clone(),
            spectrum,
        }
    }
}

impl HermitianOperator {
    pub fn new(matrix: CMat, space: HilbertSpace) -> Result<Self> {
        ensure_finite(&matrix)?;
        ensure_space_matches(&matrix, &space)?;
        let defect = hermiticity_defect(&matrix);
        let scale = max_norm(&matrix);
        if defect > HERMITICITY_TOL * scale.max(f64::MIN_POSITIVE) {
            return Err(Error::Validation(format!(
                "matrix is not Hermitian: ‖H − H†‖_max = {defect:.3e} with ‖H‖_max = {scale:.3e}"
            )));
        }
        Ok(Self {
            matrix,
            space,
            spectrum: OnceLock::new(),
        })
    }

    /// Diagonal operator with the given real entries.
    pub fn from_diagonal(entries: &[f64], space: HilbertSpace) -> Result<Self> {
        let matrix = CMat::from_diagonal(&CVec::from_iterator(
            entries.len(),
            entries.iter().map(|&x| C64::new(x, 0.0)),
        ));
        Self::new(matrix, space)
    }

    pub fn matrix(&self) -> &CMat {
        &self.matrix
    }

    pub fn space(&self) -> &HilbertSpace {
        &self.space
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// Spectral decomposition, computed once and cached.
    pub fn spectrum(&self) -> &SpectralDecomposition {
        self.spectrum.get_or_init(|| {
            SpectralDecomposition::compute(&self.matrix)
                .expect("eigendecomposition of a validated Hermitian operator")
        })
    }

    /// `self ⊗ other`.
    pub fn tensor(&self, other: &Self) -> Result<Self> {
        let space = self.space.join(&other.space)?;
        Self::new(self.matrix.kronecker(&other.matrix), space)
    }
}

/// Spectral decomposition of a Hermitian operator (computed lazily, cached).
pub fn hermitian_eig(h: &HermitianOperator) -> &SpectralDecomposition {
    h.spectrum()
}

/// Validated unitary operator.
#[derive(Debug, Clone)]
pub struct UnitaryOperator {
    matrix: CMat,
    space: HilbertSpace,
}

impl UnitaryOperator {
    pub fn new(matrix: CMat, space: HilbertSpace) -> Result<Self> {
        ensure_finite(&matrix)?;
        ensure_space_matches(&matrix, &space)?;
        let dim = matrix.nrows();
        let defect = max_norm(&(matrix.adjoint() * &matrix - identity(dim)));
        if defect > UNITARITY_TOL {
            return Err(Error::Validation(format!(
                "matrix is not unitary: ‖U†U − I‖_max = {defect:.3e}"
            )));
        }
        Ok(Self { matrix, space })
    }

    pub fn identity_on(space: HilbertSpace) -> Self {
        let dim = space.total_dim();
        Self {
            matrix: identity(dim),
            space,
        }
    }

    pub fn matrix(&self) -> &CMat {
        &self.matrix
    }

    pub fn space(&self) -> &HilbertSpace {
        &self.space
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn adjoint(&self) -> Self {
        Self {
            matrix: self.matrix.adjoint(),
            space: self.space.clone(),
        }
    }

    /// `self ⊗ other`.
    pub fn tensor(&self, other: &Self) -> Result<Self> {
        let space = self.space.join(&other.space)?;
        Ok(Self {
            matrix: self.matrix.kronecker(&other.matrix),
            space,
        })
    }
}

/// Validated density operator (Hermitian, unit trace, positive up to a
/// small eigenvalue floor).
#[derive(Debug, Clone)]
pub struct DensityOperator {
    matrix: CMat,
    space: HilbertSpace,
}

impl DensityOperator {
    pub fn new(matrix: CMat, space: HilbertSpace) -> Result<Self> {
        ensure_finite(&matrix)?;
        ensure_space_matches(&matrix, &space)?;
        let defect = hermiticity_defect(&matrix);
        let scale = max_norm(&matrix);
        if defect > HERMITICITY_TOL * scale.max(f64::MIN_POSITIVE) {
            return Err(Error::Validation(format!(
                "density matrix is not Hermitian: defect {defect:.3e}"
            )));
        }
        let trace = matrix.trace();
        if (trace.re - 1.0).abs() > TRACE_TOL || trace.im.abs() > TRACE_TOL {
            return Err(Error::Validation(format!(
                "density matrix trace {trace} is not 1 within {TRACE_TOL:.0e}"
            )));
        }
        let spectral = SpectralDecomposition::compute(&matrix)?;
        let lambda_min = spectral.eigenvalues().first().copied().unwrap_or(0.0);
        if lambda_min < EIGENVALUE_FLOOR {
            return Err(Error::Validation(format!(
                "density matrix has eigenvalue {lambda_min:.3e} below {EIGENVALUE_FLOOR:.0e}"
            )));
        }
        Ok(Self { matrix, space })
    }

    /// |ψ⟩⟨ψ| from a normalized state vector.
    pub fn from_pure(state: &CVec, space: HilbertSpace) -> Result<Self> {
        Self::new(projector(state), space)
    }

    /// Diagonal density operator from a probability vector.
    pub fn from_populations(populations: &[f64], space: HilbertSpace) -> Result<Self> {
        let matrix = CMat::from_diagonal(&CVec::from_iterator(
            populations.len(),
            populations.iter().map(|&p| C64::new(p, 0.0)),
        ));
        Self::new(matrix, space)
    }

    /// I/d on `space`.
    pub fn maximally_mixed(space: HilbertSpace) -> Self {
        let dim = space.total_dim();
        let matrix = identity(dim) / C64::new(dim as f64, 0.0);
        Self { matrix, space }
    }

    pub fn matrix(&self) -> &CMat {
        &self.matrix
    }

    pub fn space(&self) -> &HilbertSpace {
        &self.space
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn trace(&self) -> C64 {
        self.matrix.trace()
    }

    /// `self ⊗ other`.
    pub fn tensor(&self, other: &Self) -> Result<Self> {
        let space = self.space.join(&other.space)?;
        Ok(Self {
            matrix: self.matrix.kronecker(&other.matrix),
            space,
        })
    }

    /// UρU†.
    pub fn evolve(&self, u: &UnitaryOperator) -> Result<Self> {
        if u.dim() != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "unitary dim {} does not match state dim {}",
                u.dim(),
                self.dim()
            )));
        }
        let matrix = u.matrix() * &self.matrix * u.matrix().adjoint();
        Ok(Self {
            matrix,
            space: self.space.clone(),
        })
    }

    /// Trace out every subsystem not named in `keep`; kept subsystems retain
    /// their original relative order.
    pub fn partial_trace(&self, keep: &[&str]) -> Result<DensityOperator> {
        if keep.is_empty() {
            return Err(Error::Validation(
                "`keep` must name at least one subsystem".into(),
            ));
        }
        let mut keep_positions: Vec<usize> = Vec::with_capacity(keep.len());
        for label in keep {
            let pos = self.space.position(label)?;
            if keep_positions.contains(&pos) {
                return Err(Error::Validation(format!("duplicate keep label `{label}`")));
            }
            keep_positions.push(pos);
        }
        keep_positions.sort_unstable();

        let dims = self.space.dims();
        let traced_positions: Vec<usize> = (0..dims.len())
            .filter(|p| !keep_positions.contains(p))
            .collect();
        let matrix = partial_trace_raw(&self.matrix, &dims, &keep_positions, &traced_positions);
        let space = self.space.select(&keep_positions);
        Ok(DensityOperator { matrix, space })
    }

    /// Population tr[ρ |k⟩⟨k|] of a basis state.
    pub fn population(&self, k: usize) -> f64 {
        self.matrix[(k, k)].re
    }
}

/// Row-major strides of a dimension list.
fn strides(dims: &[usize]) -> Vec<usize> {
    let mut strides = vec![1usize; dims.len()];
    for i in (0..dims.len().saturating_sub(1)).rev() {
        strides[i] = strides[i + 1] * dims[i + 1];
    }
    strides
}

/// Flattened offsets of every multi-index combination over `positions`.
fn enumerate_offsets(dims: &[usize], positions: &[usize], all_strides: &[usize]) -> Vec<usize> {
    let mut offsets = vec![0usize];
    for &p in positions {
        let mut next = Vec::with_capacity(offsets.len() * dims[p]);
        for &base in &offsets {
            for i in 0..dims[p] {
                next.push(base + i * all_strides[p]);
            }
        }
        offsets = next;
    }
    offsets
}

fn partial_trace_raw(
    m: &CMat,
    dims: &[usize],
    keep_positions: &[usize],
    traced_positions: &[usize],
) -> CMat {
    let all_strides = strides(dims);
    let keep_offsets = enumerate_offsets(dims, keep_positions, &all_strides);
    let traced_offsets = enumerate_offsets(dims, traced_positions, &all_strides);
    let dkeep = keep_offsets.len();

    let mut out = CMat::zeros(dkeep, dkeep);
    for (a, &ka) in keep_offsets.iter().enumerate() {
        for (b, &kb) in keep_offsets.iter().enumerate() {
            let mut sum = C64::new(0.0, 0.0);
            for &tc in &traced_offsets {
                sum += m[(ka + tc, kb + tc)];
            }
            out[(a, b)] = sum;
        }
    }
    out
}

/// exp(−iHt), computed by applying the exponential to the spectrum of `h`.
pub fn evolution(h: &HermitianOperator, t: f64) -> UnitaryOperator {
    let matrix = h
        .spectrum()
        .apply(|lambda| (-C64::i() * (lambda * t)).exp());
    UnitaryOperator {
        matrix,
        space: h.space().clone(),
    }
}

/// |0⟩⟨0| ⊗ I + |1⟩⟨1| ⊗ u on ancilla ⊗ target, ancilla labeled `A`.
pub fn controlled(u: &UnitaryOperator) -> Result<UnitaryOperator> {
    controlled_with_label(u, "A")
}

/// [`controlled`] with an explicit ancilla label.
pub fn controlled_with_label(u: &UnitaryOperator, ancilla_label: &str) -> Result<UnitaryOperator> {
    let d = u.dim();
    let mut matrix = CMat::zeros(2 * d, 2 * d);
    matrix.view_mut((0, 0), (d, d)).copy_from(&identity(d));
    matrix.view_mut((d, d), (d, d)).copy_from(u.matrix());
    let space = HilbertSpace::single(ancilla_label, 2).join(u.space())?;
    Ok(UnitaryOperator { matrix, space })
}

/// SWAP matrix on d ⊗ d: |i⟩|j⟩ → |j⟩|i⟩.
pub fn swap_matrix(d: usize) -> CMat {
    let mut m = CMat::zeros(d * d, d * d);
    for i in 0..d {
        for j in 0..d {
            m[(j * d + i, i * d + j)] = C64::new(1.0, 0.0);
        }
    }
    m
}

/// Group the entries of an ascending list into clusters whose internal gaps
/// are at most `tol`; returns `(mean, member indices)` per cluster.
pub(crate) fn cluster_sorted(values: &[f64], tol: f64) -> Vec<(f64, Vec<usize>)> {
    let mut clusters: Vec<(f64, Vec<usize>)> = Vec::new();
    let mut start = 0;
    while start < values.len() {
        let mut end = start + 1;
        while end < values.len() && values[end] - values[end - 1] <= tol {
            end += 1;
        }
        let members: Vec<usize> = (start..end).collect();
        let mean = members.iter().map(|&i| values[i]).sum::<f64>() / members.len() as f64;
        clusters.push((mean, members));
        start = end;
    }
    clusters
}
