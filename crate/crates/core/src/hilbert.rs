//! Truncated Fock-space linear algebra.
//!
//! Every joint state lives on `qubit ⊗ cavity` with qubit-major ordering:
//! the basis vector `|q, n⟩` sits at index `q * cavity_dim + n`, with
//! `|g⟩ = 0` and `|e⟩ = 1`. Cavity-only objects carry `qubit = 1`.
//! The Pauli convention is `σᶻ|e⟩ = +|e⟩`, `σᶻ|g⟩ = −|g⟩`, `σ⁻ = |g⟩⟨e|`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

pub const GROUND: usize = 0;
pub const EXCITED: usize = 1;

const HERMITIAN_TOL: f64 = 1e-10;

/// Factor dimensions of a tensor basis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BasisDims {
    pub qubit: usize,
    pub cavity: usize,
}

impl BasisDims {
    pub fn cavity(cavity_dim: usize) -> Self {
        Self { qubit: 1, cavity: cavity_dim }
    }

    pub fn joint(cavity_dim: usize) -> Self {
        Self { qubit: 2, cavity: cavity_dim }
    }

    pub fn qubit() -> Self {
        Self { qubit: 2, cavity: 1 }
    }

    pub fn total(&self) -> usize {
        self.qubit * self.cavity
    }

    pub fn index(&self, qubit_level: usize, n: usize) -> usize {
        debug_assert!(qubit_level < self.qubit && n < self.cavity);
        qubit_level * self.cavity + n
    }

    fn product(&self, other: &Self) -> Self {
        Self {
            qubit: self.qubit * other.qubit,
            cavity: self.cavity * other.cavity,
        }
    }
}

/// Pure state as a complex amplitude vector.
#[derive(Clone, Debug, PartialEq)]
pub struct FockKet {
    amplitudes: CVector,
    dims: BasisDims,
}

impl FockKet {
    pub fn new(amplitudes: CVector, dims: BasisDims) -> Result<Self> {
        if amplitudes.len() != dims.total() {
            return Err(Error::DimensionMismatch {
                expected: dims.total(),
                found: amplitudes.len(),
            });
        }
        Ok(Self { amplitudes, dims })
    }

    pub fn from_slice(amplitudes: &[C64], dims: BasisDims) -> Result<Self> {
        Self::new(CVector::from_column_slice(amplitudes), dims)
    }

    pub fn basis(dims: BasisDims, index: usize) -> Result<Self> {
        if index >= dims.total() {
            return Err(Error::DimensionMismatch {
                expected: dims.total(),
                found: index + 1,
            });
        }
        let mut amplitudes = CVector::zeros(dims.total());
        amplitudes[index] = C64::new(1.0, 0.0);
        Ok(Self { amplitudes, dims })
    }

    /// Cavity-only Fock state `|n⟩`.
    pub fn fock(cavity_dim: usize, n: usize) -> Result<Self> {
        Self::basis(BasisDims::cavity(cavity_dim), n)
    }

    /// Joint basis state `|q, n⟩`.
    pub fn joint(qubit_level: usize, n: usize, cavity_dim: usize) -> Result<Self> {
        if qubit_level > EXCITED {
            return Err(Error::InvalidDimension {
                what: "qubit level",
                dim: qubit_level,
            });
        }
        Self::basis(BasisDims::joint(cavity_dim), qubit_level * cavity_dim + n)
    }

    /// `|q⟩ ⊗ |cavity⟩` for a cavity-only ket.
    pub fn with_qubit(qubit_level: usize, cavity: &FockKet) -> Result<Self> {
        if cavity.dims.qubit != 1 {
            return Err(Error::Shape("with_qubit expects a cavity-only ket".into()));
        }
        let nc = cavity.dims.cavity;
        let mut amplitudes = CVector::zeros(2 * nc);
        amplitudes
            .rows_mut(qubit_level * nc, nc)
            .copy_from(&cavity.amplitudes);
        Ok(Self {
            amplitudes,
            dims: BasisDims::joint(nc),
        })
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.amplitudes
    }

    pub fn as_slice(&self) -> &[C64] {
        self.amplitudes.as_slice()
    }

    pub fn dims(&self) -> BasisDims {
        self.dims
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.norm()
    }

    pub fn normalize(&mut self) -> Result<()> {
        let norm = self.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::UndefinedState("cannot normalize a zero vector".into()));
        }
        self.amplitudes.unscale_mut(norm);
        Ok(())
    }

    pub fn normalized(mut self) -> Result<Self> {
        self.normalize()?;
        Ok(self)
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &FockKet) -> Result<C64> {
        check_dim(self.dim(), other.dim())?;
        Ok(self.amplitudes.dotc(&other.amplitudes))
    }

    pub fn populations(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }

    pub fn to_density(&self) -> DensityOp {
        DensityOp {
            matrix: &self.amplitudes * self.amplitudes.adjoint(),
            dims: self.dims,
        }
    }

    pub fn apply(&self, op: &OpMatrix) -> Result<FockKet> {
        check_dim(op.dim(), self.dim())?;
        Ok(Self {
            amplitudes: &op.matrix * &self.amplitudes,
            dims: self.dims,
        })
    }
}

/// Density operator. Construction does not enforce the physical invariants;
/// call [`DensityOp::check`] where they must hold.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityOp {
    matrix: CMatrix,
    dims: BasisDims,
}

/// Deviations of a density operator from the physical invariants.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InvariantReport {
    pub trace_error: f64,
    pub hermiticity_defect: f64,
    pub min_eigenvalue: f64,
}

/// Tolerances used by [`DensityOp::check`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InvariantTolerance {
    pub trace: f64,
    pub hermiticity: f64,
    pub min_eigenvalue: f64,
}

impl Default for InvariantTolerance {
    fn default() -> Self {
        Self {
            trace: 1e-8,
            hermiticity: 1e-10,
            min_eigenvalue: -1e-8,
        }
    }
}

impl DensityOp {
    pub fn new(matrix: CMatrix, dims: BasisDims) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::Shape(format!(
                "density matrix must be square, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        check_dim(dims.total(), matrix.nrows())?;
        Ok(Self { matrix, dims })
    }

    pub fn from_ket(ket: &FockKet) -> Self {
        ket.to_density()
    }

    /// Row-major flat copy, the layout used by the integrators.
    pub fn to_row_major(&self) -> Vec<C64> {
        self.matrix.transpose().as_slice().to_vec()
    }

    pub fn from_row_major(data: &[C64], dims: BasisDims) -> Result<Self> {
        let d = dims.total();
        check_dim(d * d, data.len())?;
        Ok(Self {
            matrix: CMatrix::from_row_slice(d, d, data),
            dims,
        })
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn dims(&self) -> BasisDims {
        self.dims
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn trace(&self) -> C64 {
        self.matrix.trace()
    }

    pub fn purity(&self) -> f64 {
        // Tr ρ² = Σ |ρ_ij|² for Hermitian ρ
        self.matrix.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn populations(&self) -> Vec<f64> {
        self.matrix.diagonal().iter().map(|z| z.re).collect()
    }

    pub fn hermiticity_defect(&self) -> f64 {
        let d = self.dim();
        let mut worst = 0.0f64;
        for i in 0..d {
            for j in i..d {
                worst = worst.max((self.matrix[(i, j)] - self.matrix[(j, i)].conj()).norm());
            }
        }
        worst
    }

    /// Smallest eigenvalue of the Hermitian part.
    pub fn min_eigenvalue(&self) -> f64 {
        let herm = (&self.matrix + self.matrix.adjoint()).scale(0.5);
        SymmetricEigen::new(herm).eigenvalues.min()
    }

    pub fn report(&self) -> InvariantReport {
        InvariantReport {
            trace_error: (self.trace() - C64::new(1.0, 0.0)).norm(),
            hermiticity_defect: self.hermiticity_defect(),
            min_eigenvalue: self.min_eigenvalue(),
        }
    }

    pub fn check(&self, tol: &InvariantTolerance) -> Result<InvariantReport> {
        let report = self.report();
        if report.trace_error > tol.trace {
            return Err(Error::Contract(format!("trace deviates by {:.3e}", report.trace_error)));
        }
        if report.hermiticity_defect > tol.hermiticity {
            return Err(Error::Contract(format!(
                "hermiticity defect {:.3e}",
                report.hermiticity_defect
            )));
        }
        if report.min_eigenvalue < tol.min_eigenvalue {
            return Err(Error::Contract(format!(
                "negative eigenvalue {:.3e}",
                report.min_eigenvalue
            )));
        }
        Ok(report)
    }

    /// `U ρ U†`.
    pub fn conjugate_by(&self, unitary: &OpMatrix) -> Result<DensityOp> {
        check_dim(unitary.dim(), self.dim())?;
        Ok(Self {
            matrix: &unitary.matrix * &self.matrix * unitary.matrix.adjoint(),
            dims: self.dims,
        })
    }

    /// Trace distance ½‖ρ − σ‖₁.
    pub fn trace_distance(&self, other: &DensityOp) -> Result<f64> {
        check_dim(self.dim(), other.dim())?;
        let diff = &self.matrix - &other.matrix;
        let herm = (&diff + diff.adjoint()).scale(0.5);
        Ok(0.5 * SymmetricEigen::new(herm).eigenvalues.iter().map(|v| v.abs()).sum::<f64>())
    }

    /// Eigenvector belonging to the largest eigenvalue, with that eigenvalue.
    pub fn dominant_eigenvector(&self) -> (f64, FockKet) {
        let herm = (&self.matrix + self.matrix.adjoint()).scale(0.5);
        let eig = SymmetricEigen::new(herm);
        let (idx, val) = eig
            .eigenvalues
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
        let vec = eig.eigenvectors.column(idx).into_owned();
        (val, FockKet { amplitudes: vec, dims: self.dims })
    }
}

/// Dense operator with a hermiticity flag.
#[derive(Clone, Debug, PartialEq)]
pub struct OpMatrix {
    matrix: CMatrix,
    hermitian: bool,
    dims: BasisDims,
}

impl OpMatrix {
    /// Builds an operator; the flag is set when the matrix is Hermitian within 1e-10.
    pub fn new(matrix: CMatrix, dims: BasisDims) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::Shape("operator must be square".into()));
        }
        check_dim(dims.total(), matrix.nrows())?;
        let hermitian = hermiticity_defect(&matrix) <= HERMITIAN_TOL;
        Ok(Self { matrix, hermitian, dims })
    }

    /// Builds an operator that must be Hermitian.
    pub fn hermitian(matrix: CMatrix, dims: BasisDims) -> Result<Self> {
        let op = Self::new(matrix, dims)?;
        if !op.hermitian {
            return Err(Error::Contract(format!(
                "operator flagged Hermitian has defect {:.3e}",
                hermiticity_defect(&op.matrix)
            )));
        }
        Ok(op)
    }

    fn raw(matrix: CMatrix, dims: BasisDims) -> Self {
        let hermitian = hermiticity_defect(&matrix) <= HERMITIAN_TOL;
        Self { matrix, hermitian, dims }
    }

    pub fn identity(dims: BasisDims) -> Self {
        Self {
            matrix: CMatrix::identity(dims.total(), dims.total()),
            hermitian: true,
            dims,
        }
    }

    pub fn zeros(dims: BasisDims) -> Self {
        Self {
            matrix: CMatrix::zeros(dims.total(), dims.total()),
            hermitian: true,
            dims,
        }
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    pub fn dims(&self) -> BasisDims {
        self.dims
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn adjoint(&self) -> OpMatrix {
        Self {
            matrix: self.matrix.adjoint(),
            hermitian: self.hermitian,
            dims: self.dims,
        }
    }

    pub fn scale(&self, factor: C64) -> OpMatrix {
        Self::raw(self.matrix.map(|z| z * factor), self.dims)
    }

    pub fn mul(&self, other: &OpMatrix) -> Result<OpMatrix> {
        check_dim(self.dim(), other.dim())?;
        Ok(Self::raw(&self.matrix * &other.matrix, self.dims))
    }

    pub fn add(&self, other: &OpMatrix) -> Result<OpMatrix> {
        check_dim(self.dim(), other.dim())?;
        Ok(Self::raw(&self.matrix + &other.matrix, self.dims))
    }

    pub fn sub(&self, other: &OpMatrix) -> Result<OpMatrix> {
        check_dim(self.dim(), other.dim())?;
        Ok(Self::raw(&self.matrix - &other.matrix, self.dims))
    }

    pub fn commutator(&self, other: &OpMatrix) -> Result<OpMatrix> {
        self.mul(other)?.sub(&other.mul(self)?)
    }

    pub fn hermiticity_defect(&self) -> f64 {
        hermiticity_defect(&self.matrix)
    }

    /// Largest elementwise deviation from the identity.
    pub fn unitarity_defect(&self) -> f64 {
        let prod = self.matrix.adjoint() * &self.matrix;
        let d = self.dim();
        let mut worst = 0.0f64;
        for i in 0..d {
            for j in 0..d {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((prod[(i, j)] - C64::new(target, 0.0)).norm());
            }
        }
        worst
    }

    /// Operator on the cavity factor of a joint space, `I₂ ⊗ op`.
    pub fn on_cavity(&self) -> Result<OpMatrix> {
        if self.dims.qubit != 1 {
            return Err(Error::Shape("on_cavity expects a cavity-only operator".into()));
        }
        Ok(tensor_product(&qubit_identity(), self))
    }

    /// Operator on the qubit factor of a joint space, `op ⊗ I_N`.
    pub fn on_qubit(&self, cavity_dim: usize) -> Result<OpMatrix> {
        if self.dims != BasisDims::qubit() {
            return Err(Error::Shape("on_qubit expects a qubit-only operator".into()));
        }
        Ok(tensor_product(self, &cavity_identity(cavity_dim)?))
    }
}

fn hermiticity_defect(m: &CMatrix) -> f64 {
    let d = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..d {
        for j in i..d {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}

fn check_cavity_dim(cavity_dim: usize, min: usize) -> Result<()> {
    if cavity_dim < min {
        return Err(Error::InvalidDimension {
            what: "cavity_dim",
            dim: cavity_dim,
        });
    }
    Ok(())
}

/// Cavity lowering operator `â` with `⟨n−1|â|n⟩ = √n`.
pub fn annihilation_op(cavity_dim: usize) -> Result<OpMatrix> {
    check_cavity_dim(cavity_dim, 2)?;
    let mut m = CMatrix::zeros(cavity_dim, cavity_dim);
    for n in 1..cavity_dim {
        m[(n - 1, n)] = C64::new((n as f64).sqrt(), 0.0);
    }
    Ok(OpMatrix {
        matrix: m,
        hermitian: false,
        dims: BasisDims::cavity(cavity_dim),
    })
}

pub fn creation_op(cavity_dim: usize) -> Result<OpMatrix> {
    Ok(annihilation_op(cavity_dim)?.adjoint())
}

pub fn number_op(cavity_dim: usize) -> Result<OpMatrix> {
    check_cavity_dim(cavity_dim, 1)?;
    Ok(diagonal_op(cavity_dim, |n| C64::new(n as f64, 0.0)))
}

/// Photon-number parity `(−1)^{â†â}`.
pub fn parity_op(cavity_dim: usize) -> Result<OpMatrix> {
    check_cavity_dim(cavity_dim, 1)?;
    Ok(diagonal_op(cavity_dim, |n| {
        C64::new(if n % 2 == 0 { 1.0 } else { -1.0 }, 0.0)
    }))
}

pub fn cavity_identity(cavity_dim: usize) -> Result<OpMatrix> {
    check_cavity_dim(cavity_dim, 1)?;
    Ok(OpMatrix::identity(BasisDims::cavity(cavity_dim)))
}

pub(crate) fn diagonal_op(cavity_dim: usize, f: impl Fn(usize) -> C64) -> OpMatrix {
    let diag = CVector::from_iterator(cavity_dim, (0..cavity_dim).map(f));
    OpMatrix::raw(CMatrix::from_diagonal(&diag), BasisDims::cavity(cavity_dim))
}

fn qubit_op(entries: [[f64; 2]; 2]) -> OpMatrix {
    let m = CMatrix::from_fn(2, 2, |i, j| C64::new(entries[i][j], 0.0));
    OpMatrix::raw(m, BasisDims::qubit())
}

pub fn qubit_identity() -> OpMatrix {
    OpMatrix::identity(BasisDims::qubit())
}

pub fn sigma_z() -> OpMatrix {
    qubit_op([[-1.0, 0.0], [0.0, 1.0]])
}

/// `σ⁻ = |g⟩⟨e|`.
pub fn sigma_minus() -> OpMatrix {
    qubit_op([[0.0, 1.0], [0.0, 0.0]])
}

pub fn sigma_plus() -> OpMatrix {
    qubit_op([[0.0, 0.0], [1.0, 0.0]])
}

pub fn sigma_x() -> OpMatrix {
    qubit_op([[0.0, 1.0], [1.0, 0.0]])
}

/// Kronecker product in the fixed `left ⊗ right` ordering.
pub trait Tensor {
    fn tensor(&self, other: &Self) -> Self;
}

impl Tensor for OpMatrix {
    fn tensor(&self, other: &Self) -> Self {
        Self {
            matrix: self.matrix.kronecker(&other.matrix),
            hermitian: self.hermitian && other.hermitian,
            dims: self.dims.product(&other.dims),
        }
    }
}

impl Tensor for FockKet {
    fn tensor(&self, other: &Self) -> Self {
        Self {
            amplitudes: self.amplitudes.kronecker(&other.amplitudes),
            dims: self.dims.product(&other.dims),
        }
    }
}

/// Kronecker product of two operators or two kets. Dimensions multiply
/// factorwise, so a qubit-only left operand and a cavity-only right operand
/// yield a joint object in qubit-major order.
pub fn tensor_product<T: Tensor>(a: &T, b: &T) -> T {
    a.tensor(b)
}

/// Qubit ket `|g⟩` or `|e⟩` with qubit-only dims.
pub fn qubit_ket(level: usize) -> Result<FockKet> {
    FockKet::basis(BasisDims::qubit(), level)
}

/// Traces out the qubit of a joint density operator.
pub fn partial_trace_qubit(rho: &DensityOp) -> Result<DensityOp> {
    if rho.dims.qubit != 2 {
        return Err(Error::Shape(format!(
            "partial_trace_qubit needs qubit dimension 2, got {}",
            rho.dims.qubit
        )));
    }
    let nc = rho.dims.cavity;
    let m = &rho.matrix;
    let reduced = CMatrix::from_fn(nc, nc, |i, j| m[(i, j)] + m[(nc + i, nc + j)]);
    Ok(DensityOp {
        matrix: reduced,
        dims: BasisDims::cavity(nc),
    })
}

/// Traces out the cavity, leaving the 2×2 qubit state.
pub fn partial_trace_cavity(rho: &DensityOp) -> Result<DensityOp> {
    if rho.dims.qubit != 2 {
        return Err(Error::Shape(format!(
            "partial_trace_cavity needs qubit dimension 2, got {}",
            rho.dims.qubit
        )));
    }
    let nc = rho.dims.cavity;
    let m = &rho.matrix;
    let reduced = CMatrix::from_fn(2, 2, |p, q| (0..nc).map(|n| m[(p * nc + n, q * nc + n)]).sum());
    Ok(DensityOp {
        matrix: reduced,
        dims: BasisDims::qubit(),
    })
}

/// `Tr[ρ O]` or `⟨ψ|O|ψ⟩`.
pub trait Expectation {
    fn expectation(&self, op: &OpMatrix) -> Result<C64>;

    fn expectation_real(&self, op: &OpMatrix) -> Result<f64> {
        Ok(self.expectation(op)?.re)
    }
}

impl Expectation for FockKet {
    fn expectation(&self, op: &OpMatrix) -> Result<C64> {
        check_dim(op.dim(), self.dim())?;
        Ok(self.amplitudes.dotc(&(&op.matrix * &self.amplitudes)))
    }
}

impl Expectation for DensityOp {
    fn expectation(&self, op: &OpMatrix) -> Result<C64> {
        check_dim(op.dim(), self.dim())?;
        let d = self.dim();
        let mut acc = C64::new(0.0, 0.0);
        for i in 0..d {
            for j in 0..d {
                acc += self.matrix[(i, j)] * op.matrix[(j, i)];
            }
        }
        Ok(acc)
    }
}

/// Either kind of state, for APIs that accept both.
#[derive(Clone, Debug, PartialEq)]
pub enum QuantumState {
    Pure(FockKet),
    Mixed(DensityOp),
}

impl QuantumState {
    pub fn dims(&self) -> BasisDims {
        match self {
            Self::Pure(k) => k.dims(),
            Self::Mixed(r) => r.dims(),
        }
    }

    pub fn to_density(&self) -> DensityOp {
        match self {
            Self::Pure(k) => k.to_density(),
            Self::Mixed(r) => r.clone(),
        }
    }

    /// Applies a unitary `U`: `U|ψ⟩` or `UρU†`.
    pub fn transform(&self, unitary: &OpMatrix) -> Result<QuantumState> {
        Ok(match self {
            Self::Pure(k) => Self::Pure(k.apply(unitary)?),
            Self::Mixed(r) => Self::Mixed(r.conjugate_by(unitary)?),
        })
    }
}

impl Expectation for QuantumState {
    fn expectation(&self, op: &OpMatrix) -> Result<C64> {
        match self {
            Self::Pure(k) => k.expectation(op),
            Self::Mixed(r) => r.expectation(op),
        }
    }
}

/// Sparse operator in coordinate form for the integrator hot loop.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseOp {
    dim: usize,
    entries: Vec<(usize, usize, C64)>,
}

impl SparseOp {
    pub fn from_op(op: &OpMatrix) -> Self {
        Self::from_matrix(&op.matrix)
    }

    pub fn from_matrix(m: &CMatrix) -> Self {
        let mut entries = Vec::new();
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                let v = m[(i, j)];
                if v.norm_sqr() > 0.0 {
                    entries.push((i, j, v));
                }
            }
        }
        Self { dim: m.nrows(), entries }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn adjoint(&self) -> Self {
        let mut entries: Vec<_> = self.entries.iter().map(|&(i, j, v)| (j, i, v.conj())).collect();
        entries.sort_by_key(|&(i, j, _)| (i, j));
        Self { dim: self.dim, entries }
    }

    pub fn to_dense(&self) -> CMatrix {
        let mut m = CMatrix::zeros(self.dim, self.dim);
        for &(i, j, v) in &self.entries {
            m[(i, j)] += v;
        }
        m
    }

    /// `out += scale · S · V`, with `V` and `out` row-major `dim × ncols`.
    #[inline]
    pub fn apply_add(&self, scale: C64, v: &[C64], out: &mut [C64], ncols: usize) {
        debug_assert_eq!(v.len(), self.dim * ncols);
        debug_assert_eq!(out.len(), self.dim * ncols);
        if ncols == 1 {
            for &(i, j, s) in &self.entries {
                out[i] += scale * s * v[j];
            }
            return;
        }
        for &(i, j, s) in &self.entries {
            let f = scale * s;
            let src = &v[j * ncols..(j + 1) * ncols];
            let dst = &mut out[i * ncols..(i + 1) * ncols];
            for (o, x) in dst.iter_mut().zip(src) {
                *o += f * x;
            }
        }
    }
}
