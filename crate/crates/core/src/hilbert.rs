//! Finite-dimensional Hilbert-space primitives.
//!
//! Everything here is exact dense linear algebra on small complex spaces, in
//! units with ħ = 1. Tensor products use the standard Kronecker ordering: the
//! left factor is the slow index, so for `a ⊗ b` the basis state `|i⟩⊗|j⟩`
//! sits at index `i * dim(b) + j`.
//!
//! Operators carry [`Flags`] that are only ever set after a numerical check
//! against [`CERT_TOL`]; nothing downstream takes hermiticity or unitarity on
//! faith.

use bitflags::bitflags;
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Tolerance used when certifying operator flags.
pub const CERT_TOL: f64 = 1e-12;

/// Tolerance on the Euclidean norm of a [`StateVector`].
pub const NORM_TOL: f64 = 1e-10;

const EIGEN_EPS: f64 = 1e-15;
const EIGEN_MAX_ITER: usize = 10_000;

bitflags! {
    /// Numerically certified properties of a [`DenseOperator`].
    #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
    pub struct Flags: u8 {
        const HERMITIAN = 0b001;
        const UNITARY = 0b010;
        const PROJECTOR = 0b100;
    }
}

/// Normalized state in a finite tensor-product space.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    amplitudes: DVector<C64>,
    subsystems: Vec<usize>,
}

impl StateVector {
    /// Wraps amplitudes that are already normalized to within [`NORM_TOL`].
    pub fn new(amplitudes: DVector<C64>) -> Result<Self> {
        let norm = amplitudes.norm();
        if amplitudes.is_empty() || (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::Unnormalizable(norm));
        }
        let dim = amplitudes.len();
        Ok(Self { amplitudes, subsystems: vec![dim] })
    }

    /// Rescales arbitrary nonzero amplitudes to unit norm.
    pub fn normalized(amplitudes: DVector<C64>) -> Result<Self> {
        let norm = amplitudes.norm();
        if amplitudes.is_empty() || !norm.is_finite() || norm == 0.0 {
            return Err(Error::Unnormalizable(norm));
        }
        let dim = amplitudes.len();
        Ok(Self { amplitudes: amplitudes / C64::from(norm), subsystems: vec![dim] })
    }

    pub fn from_slice(amplitudes: &[C64]) -> Result<Self> {
        Self::new(DVector::from_column_slice(amplitudes))
    }

    /// Computational basis state `|index⟩`.
    pub fn basis(dim: usize, index: usize) -> Result<Self> {
        if index >= dim {
            return Err(Error::InvalidArgument(format!(
                "basis index {index} out of range for dimension {dim}"
            )));
        }
        let mut amplitudes = DVector::zeros(dim);
        amplitudes[index] = C64::new(1.0, 0.0);
        Ok(Self { amplitudes, subsystems: vec![dim] })
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    /// Dimensions of the tensor factors this state was built from.
    pub fn subsystems(&self) -> &[usize] {
        &self.subsystems
    }

    pub fn amplitudes(&self) -> &DVector<C64> {
        &self.amplitudes
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.norm()
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &StateVector) -> Result<C64> {
        check_dim(self.dim(), other.dim())?;
        Ok(self.amplitudes.dotc(&other.amplitudes))
    }

    /// Applies a certified unitary.
    pub fn evolve(&self, u: &DenseOperator) -> Result<StateVector> {
        u.require(Flags::UNITARY, "unitary")?;
        let amplitudes = u.apply(&self.amplitudes)?;
        Ok(Self { amplitudes, subsystems: self.subsystems.clone() })
    }
}

/// Square complex matrix with certified flags.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseOperator {
    matrix: DMatrix<C64>,
    flags: Flags,
}

impl DenseOperator {
    /// Wraps a square matrix without asserting any property.
    pub fn new(matrix: DMatrix<C64>) -> Result<Self> {
        if !matrix.is_square() || matrix.nrows() == 0 {
            return Err(Error::NotSquare { rows: matrix.nrows(), cols: matrix.ncols() });
        }
        Ok(Self { matrix, flags: Flags::empty() })
    }

    /// Wraps a matrix and certifies every requested flag, failing on the first
    /// one that does not hold.
    pub fn certified(matrix: DMatrix<C64>, flags: Flags) -> Result<Self> {
        let mut op = Self::new(matrix)?;
        for flag in flags.iter() {
            op.certify(flag)?;
        }
        Ok(op)
    }

    pub fn from_rows(dim: usize, entries: &[C64]) -> Result<Self> {
        if entries.len() != dim * dim {
            return Err(Error::DimensionMismatch { expected: dim * dim, found: entries.len() });
        }
        Self::new(DMatrix::from_row_slice(dim, dim, entries))
    }

    pub fn identity(dim: usize) -> Self {
        Self { matrix: DMatrix::identity(dim, dim), flags: Flags::all() }
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            matrix: DMatrix::zeros(dim, dim),
            flags: Flags::HERMITIAN | Flags::PROJECTOR,
        }
    }

    /// `|i⟩⟨i|` in a `dim`-dimensional space.
    pub fn basis_projector(dim: usize, index: usize) -> Result<Self> {
        let psi = StateVector::basis(dim, index)?;
        Ok(Self::ket_bra(&psi))
    }

    /// Rank-one projector onto a normalized state.
    pub fn ket_bra(psi: &StateVector) -> Self {
        let v = psi.amplitudes();
        let matrix = v * v.adjoint();
        let mut op = Self { matrix, flags: Flags::empty() };
        // a normalized outer product is a projector up to rounding
        let _ = op.certify(Flags::PROJECTOR);
        op
    }

    pub fn sigma_x() -> Self {
        let o = C64::new(0.0, 0.0);
        let l = C64::new(1.0, 0.0);
        Self { matrix: DMatrix::from_row_slice(2, 2, &[o, l, l, o]), flags: Flags::HERMITIAN | Flags::UNITARY }
    }

    pub fn sigma_y() -> Self {
        let o = C64::new(0.0, 0.0);
        let i = C64::new(0.0, 1.0);
        Self { matrix: DMatrix::from_row_slice(2, 2, &[o, -i, i, o]), flags: Flags::HERMITIAN | Flags::UNITARY }
    }

    /// `diag(1, -1)`: index 0 is spin up.
    pub fn sigma_z() -> Self {
        let o = C64::new(0.0, 0.0);
        let l = C64::new(1.0, 0.0);
        Self { matrix: DMatrix::from_row_slice(2, 2, &[l, o, o, -l]), flags: Flags::HERMITIAN | Flags::UNITARY }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn flags(&self) -> Flags {
        self.flags
    }

    pub fn is_hermitian(&self) -> bool {
        self.flags.contains(Flags::HERMITIAN)
    }

    pub fn is_unitary(&self) -> bool {
        self.flags.contains(Flags::UNITARY)
    }

    pub fn is_projector(&self) -> bool {
        self.flags.contains(Flags::PROJECTOR)
    }

    pub(crate) fn require(&self, flag: Flags, name: &'static str) -> Result<()> {
        if self.flags.contains(flag) {
            Ok(())
        } else {
            Err(Error::MissingFlag(name))
        }
    }

    /// `max |A - A†|`.
    pub fn hermitian_residual(&self) -> f64 {
        max_abs(&(&self.matrix - self.matrix.adjoint()))
    }

    /// `max |U†U - 1|`.
    pub fn unitary_residual(&self) -> f64 {
        let n = self.dim();
        max_abs(&(self.matrix.adjoint() * &self.matrix - DMatrix::<C64>::identity(n, n)))
    }

    /// `max |P² - P|`.
    pub fn idempotency_residual(&self) -> f64 {
        max_abs(&(&self.matrix * &self.matrix - &self.matrix))
    }

    /// Checks one flag numerically and sets it on success. Certifying
    /// `PROJECTOR` also certifies `HERMITIAN`.
    pub fn certify(&mut self, flag: Flags) -> Result<()> {
        let check = |what: &'static str, residual: f64| {
            if residual <= CERT_TOL {
                Ok(())
            } else {
                Err(Error::Certification { what, residual, tolerance: CERT_TOL })
            }
        };
        if flag.contains(Flags::HERMITIAN) || flag.contains(Flags::PROJECTOR) {
            check("hermitian", self.hermitian_residual())?;
            self.flags |= Flags::HERMITIAN;
        }
        if flag.contains(Flags::PROJECTOR) {
            check("projector", self.idempotency_residual())?;
            self.flags |= Flags::PROJECTOR;
        }
        if flag.contains(Flags::UNITARY) {
            check("unitary", self.unitary_residual())?;
            self.flags |= Flags::UNITARY;
        }
        Ok(())
    }

    /// Re-runs certification for every flag currently set.
    fn recertify(mut self) -> Result<Self> {
        let flags = self.flags;
        self.flags = Flags::empty();
        for flag in flags.iter() {
            self.certify(flag)?;
        }
        Ok(self)
    }

    pub fn adjoint(&self) -> DenseOperator {
        let flags = self.flags;
        Self { matrix: self.matrix.adjoint(), flags }
    }

    /// Matrix product `self · rhs`. The result carries the unitary flag when
    /// both factors do (re-certified); every other flag is dropped.
    pub fn compose(&self, rhs: &DenseOperator) -> Result<DenseOperator> {
        check_dim(self.dim(), rhs.dim())?;
        let mut out = Self { matrix: &self.matrix * &rhs.matrix, flags: Flags::empty() };
        if self.is_unitary() && rhs.is_unitary() {
            out.certify(Flags::UNITARY)?;
        }
        Ok(out)
    }

    /// `1 - self`, keeping the hermitian/projector flags.
    pub fn complement(&self) -> DenseOperator {
        let n = self.dim();
        let matrix = DMatrix::<C64>::identity(n, n) - &self.matrix;
        Self { matrix, flags: self.flags & (Flags::HERMITIAN | Flags::PROJECTOR) }
    }

    /// `s · self` for real `s`; only the hermitian flag survives.
    pub fn scaled(&self, s: f64) -> DenseOperator {
        let matrix = &self.matrix * C64::new(s, 0.0);
        Self { matrix, flags: self.flags & Flags::HERMITIAN }
    }

    /// `[self, rhs] = self·rhs - rhs·self` (unflagged).
    pub fn commutator(&self, rhs: &DenseOperator) -> Result<DenseOperator> {
        check_dim(self.dim(), rhs.dim())?;
        let matrix = &self.matrix * &rhs.matrix - &rhs.matrix * &self.matrix;
        Ok(Self { matrix, flags: Flags::empty() })
    }

    pub fn apply(&self, v: &DVector<C64>) -> Result<DVector<C64>> {
        check_dim(self.dim(), v.len())?;
        Ok(&self.matrix * v)
    }

    /// Largest singular value.
    pub fn spectral_norm(&self) -> f64 {
        if self.matrix.iter().all(|z| *z == C64::new(0.0, 0.0)) {
            return 0.0;
        }
        self.matrix.clone().svd(false, false).singular_values.max()
    }

    /// Largest entrywise modulus of `self - other`.
    pub fn max_entry_diff(&self, other: &DenseOperator) -> f64 {
        if self.dim() != other.dim() {
            return f64::INFINITY;
        }
        max_abs(&(&self.matrix - &other.matrix))
    }
}

/// Kronecker product, left factor slow.
pub trait Tensor {
    fn tensor(&self, rhs: &Self) -> Self;
}

impl Tensor for StateVector {
    fn tensor(&self, rhs: &Self) -> Self {
        let amplitudes = self.amplitudes.kronecker(&rhs.amplitudes);
        let subsystems = self.subsystems.iter().chain(&rhs.subsystems).copied().collect();
        Self { amplitudes, subsystems }
    }
}

impl Tensor for DenseOperator {
    fn tensor(&self, rhs: &Self) -> Self {
        let matrix = self.matrix.kronecker(&rhs.matrix);
        let shared = self.flags & rhs.flags;
        let mut out = Self { matrix, flags: Flags::empty() };
        for flag in shared.iter() {
            let _ = out.certify(flag);
        }
        out
    }
}

/// Time-ordered piecewise-constant Hamiltonian. Segments are half-open
/// `[start, end)`; outside all segments the generator is zero.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseHamiltonian {
    dim: usize,
    segments: Vec<Segment>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub start: f64,
    pub end: f64,
    pub generator: DenseOperator,
}

impl PiecewiseHamiltonian {
    pub fn new(dim: usize, segments: Vec<Segment>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("dimension must be positive".into()));
        }
        for (i, seg) in segments.iter().enumerate() {
            if !(seg.start.is_finite() && seg.end.is_finite() && seg.start < seg.end) {
                return Err(Error::InvalidArgument(format!(
                    "segment {i} has invalid bounds [{}, {})",
                    seg.start, seg.end
                )));
            }
            check_dim(dim, seg.generator.dim())?;
            seg.generator.require(Flags::HERMITIAN, "hermitian")?;
            if i > 0 && segments[i - 1].end > seg.start {
                return Err(Error::InvalidArgument(format!(
                    "segment {i} overlaps or precedes segment {}",
                    i - 1
                )));
            }
        }
        Ok(Self { dim, segments })
    }

    /// `H = 0` for all time.
    pub fn zero(dim: usize) -> Self {
        Self { dim, segments: Vec::new() }
    }

    /// A single generator switched on over `[start, end)`.
    pub fn constant(generator: DenseOperator, start: f64, end: f64) -> Result<Self> {
        let dim = generator.dim();
        Self::new(dim, vec![Segment { start, end, generator }])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    /// Generator active at `t`, or `None` where `H = 0`.
    pub fn generator_at(&self, t: f64) -> Option<&DenseOperator> {
        self.segments
            .iter()
            .find(|s| s.start <= t && t < s.end)
            .map(|s| &s.generator)
    }
}

/// `exp(-i s g)` for a certified hermitian `g`, via its eigendecomposition.
pub fn exp_hermitian(g: &DenseOperator, s: f64) -> Result<DenseOperator> {
    g.require(Flags::HERMITIAN, "hermitian")?;
    let n = g.dim();
    if s == 0.0 {
        return Ok(DenseOperator::identity(n));
    }
    let eig = SymmetricEigen::try_new(g.matrix.clone(), EIGEN_EPS, EIGEN_MAX_ITER)
        .ok_or(Error::EigenFailure)?;
    let v = &eig.eigenvectors;
    let phases = DVector::from_iterator(
        n,
        eig.eigenvalues.iter().map(|&lambda| C64::from_polar(1.0, -s * lambda)),
    );
    let mut scaled = v.clone();
    for (mut col, phase) in scaled.column_iter_mut().zip(phases.iter()) {
        col *= *phase;
    }
    let matrix = scaled * v.adjoint();
    DenseOperator::certified(matrix, Flags::UNITARY)
}

/// Time-ordered propagator `U(t1, t0)` of a piecewise Hamiltonian.
pub fn propagator(h: &PiecewiseHamiltonian, t0: f64, t1: f64) -> Result<DenseOperator> {
    if !(t0 <= t1) {
        return Err(Error::InvalidArgument(format!("propagator needs t0 <= t1, got {t0} > {t1}")));
    }
    let mut u = DenseOperator::identity(h.dim());
    for seg in &h.segments {
        let lo = seg.start.max(t0);
        let hi = seg.end.min(t1);
        if hi > lo {
            let step = exp_hermitian(&seg.generator, hi - lo)?;
            u = step.compose(&u)?;
        }
    }
    Ok(u)
}

/// Heisenberg-picture operator `U† op U`, re-certifying the flags of `op`.
pub fn heisenberg(op: &DenseOperator, u: &DenseOperator) -> Result<DenseOperator> {
    u.require(Flags::UNITARY, "unitary")?;
    check_dim(u.dim(), op.dim())?;
    let matrix = u.matrix.adjoint() * &op.matrix * &u.matrix;
    DenseOperator { matrix, flags: op.flags & (Flags::HERMITIAN | Flags::PROJECTOR) }.recertify()
}

/// `⟨ψ|op|ψ⟩` for a certified hermitian operator.
pub fn expectation(op: &DenseOperator, psi: &StateVector) -> Result<f64> {
    op.require(Flags::HERMITIAN, "hermitian")?;
    let value = sandwich(op, psi)?;
    if value.im.abs() > CERT_TOL {
        return Err(Error::Certification {
            what: "real expectation",
            residual: value.im.abs(),
            tolerance: CERT_TOL,
        });
    }
    Ok(value.re)
}

/// `⟨ψ|op|ψ⟩` with no hermiticity requirement.
pub(crate) fn sandwich(op: &DenseOperator, psi: &StateVector) -> Result<C64> {
    check_dim(op.dim(), psi.dim())?;
    let v = psi.amplitudes();
    Ok(v.dotc(&(&op.matrix * v)))
}

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}

fn max_abs(m: &DMatrix<C64>) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn tensor_of_basis_states() {
        let up = StateVector::basis(2, 0).unwrap();
        let psi = up.tensor(&up);
        assert_eq!(psi.dim(), 4);
        assert_eq!(psi.subsystems(), &[2, 2]);
        assert_eq!(psi.amplitudes()[0], c(1.0));
        assert!(psi.amplitudes().iter().skip(1).all(|z| z.norm() == 0.0));
    }

    #[test]
    fn tensor_of_identities_is_identity() {
        let id = DenseOperator::identity(2).tensor(&DenseOperator::identity(2));
        assert_eq!(id.max_entry_diff(&DenseOperator::identity(4)), 0.0);
        assert!(id.is_unitary() && id.is_projector());
    }

    #[test]
    fn left_factor_is_slow_index() {
        // sigma_z on the left factor, acting on |down>|up'> = index 2
        let op = DenseOperator::sigma_z().tensor(&DenseOperator::identity(2));
        let down = StateVector::basis(2, 1).unwrap();
        let up = StateVector::basis(2, 0).unwrap();
        let psi = down.tensor(&up);
        assert_eq!(psi.amplitudes()[2], c(1.0));
        let out = op.apply(psi.amplitudes()).unwrap();
        assert!((out[2] - c(-1.0)).norm() < 1e-15);
    }

    #[test]
    fn zero_hamiltonian_propagator_is_identity() {
        let u = propagator(&PiecewiseHamiltonian::zero(3), 0.0, 5.0).unwrap();
        assert_eq!(u.max_entry_diff(&DenseOperator::identity(3)), 0.0);
    }

    #[test]
    fn propagator_rejects_reversed_times() {
        let h = PiecewiseHamiltonian::zero(2);
        assert!(matches!(propagator(&h, 1.0, 0.0), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn unflagged_generator_is_rejected() {
        let g = DenseOperator::new(DenseOperator::sigma_x().matrix().clone()).unwrap();
        assert_eq!(exp_hermitian(&g, 1.0), Err(Error::MissingFlag("hermitian")));
        let seg = Segment { start: 0.0, end: 1.0, generator: g };
        assert!(PiecewiseHamiltonian::new(2, vec![seg]).is_err());
    }

    #[test]
    fn non_hermitian_matrix_fails_certification() {
        let m = DMatrix::from_row_slice(2, 2, &[c(0.0), c(1.0), c(0.0), c(0.0)]);
        let err = DenseOperator::certified(m, Flags::HERMITIAN).unwrap_err();
        assert!(err.is_numerical());
    }

    #[test]
    fn exp_of_sigma_z_at_pi_is_minus_identity() {
        let u = exp_hermitian(&DenseOperator::sigma_z(), PI).unwrap();
        let minus = DMatrix::from_diagonal_element(2, 2, c(-1.0));
        assert!(max_abs(&(u.matrix() - minus)) < 1e-15);
    }

    #[test]
    fn exp_at_zero_is_identity() {
        let u = exp_hermitian(&DenseOperator::sigma_y(), 0.0).unwrap();
        assert_eq!(u.max_entry_diff(&DenseOperator::identity(2)), 0.0);
    }

    #[test]
    fn expectation_values() {
        let plus = StateVector::normalized(DVector::from_vec(vec![c(1.0), c(1.0)])).unwrap();
        let p0 = DenseOperator::basis_projector(2, 0).unwrap();
        assert!((expectation(&p0, &plus).unwrap() - 0.5).abs() < 1e-15);
        assert!((expectation(&DenseOperator::identity(2), &plus).unwrap() - 1.0).abs() < 1e-15);
        let down = StateVector::basis(2, 1).unwrap();
        assert_eq!(expectation(&DenseOperator::sigma_z(), &down).unwrap(), -1.0);
    }

    #[test]
    fn expectation_requires_hermitian_flag() {
        let op = DenseOperator::new(DMatrix::identity(2, 2)).unwrap();
        let psi = StateVector::basis(2, 0).unwrap();
        assert_eq!(expectation(&op, &psi), Err(Error::MissingFlag("hermitian")));
    }

    #[test]
    fn heisenberg_checks_dimensions() {
        let u = DenseOperator::identity(4);
        let err = heisenberg(&DenseOperator::sigma_z(), &u).unwrap_err();
        assert_eq!(err, Error::DimensionMismatch { expected: 4, found: 2 });
    }

    #[test]
    fn overlapping_segments_are_rejected() {
        let seg = |a, b| Segment { start: a, end: b, generator: DenseOperator::sigma_x() };
        assert!(PiecewiseHamiltonian::new(2, vec![seg(0.0, 2.0), seg(1.0, 3.0)]).is_err());
        assert!(PiecewiseHamiltonian::new(2, vec![seg(1.0, 1.0)]).is_err());
        assert!(PiecewiseHamiltonian::new(2, vec![seg(0.0, 1.0), seg(1.0, 3.0)]).is_ok());
    }

    #[test]
    fn state_constructors_validate() {
        assert!(StateVector::new(DVector::from_vec(vec![c(1.0), c(1.0)])).is_err());
        assert!(StateVector::normalized(DVector::from_vec(vec![c(0.0), c(0.0)])).is_err());
        assert!(StateVector::basis(2, 2).is_err());
    }
}
