//! Time-dependent Hamiltonians applied through sparse terms.

use crate::error::Result;
use crate::hilbert::{annihilation_op, BasisDims, CMatrix, OpMatrix, SparseOp, C64};
use crate::jc_model::{jc_coupling, DeviceParams, SweepSchedule};
use crate::pulses::PulseSchedule;

/// A Hermitian `H(t)` that can act on row-major blocks of vectors.
pub trait Hamiltonian: Sync {
    fn dims(&self) -> BasisDims;

    /// `out += scale · H(t) · V` for a row-major `dim × ncols` block `V`.
    fn apply_add(&self, t: f64, scale: C64, v: &[C64], out: &mut [C64], ncols: usize);

    /// Dense `H(t)`.
    fn matrix(&self, t: f64) -> OpMatrix {
        let d = self.dims().total();
        let mut m = vec![C64::new(0.0, 0.0); d * d];
        let eye: Vec<C64> = CMatrix::identity(d, d).transpose().as_slice().to_vec();
        self.apply_add(t, C64::new(1.0, 0.0), &eye, &mut m, d);
        OpMatrix::new(CMatrix::from_row_slice(d, d, &m), self.dims()).expect("square by construction")
    }
}

/// Time-independent Hamiltonian.
pub struct StaticHamiltonian {
    dims: BasisDims,
    op: SparseOp,
}

impl StaticHamiltonian {
    pub fn new(op: &OpMatrix) -> Self {
        Self {
            dims: op.dims(),
            op: SparseOp::from_op(op),
        }
    }
}

impl Hamiltonian for StaticHamiltonian {
    fn dims(&self) -> BasisDims {
        self.dims
    }

    fn apply_add(&self, _t: f64, scale: C64, v: &[C64], out: &mut [C64], ncols: usize) {
        self.op.apply_add(scale, v, out, ncols);
    }
}

/// Hamiltonian given as a closure returning a dense matrix; slow, for tests
/// and small ad-hoc problems.
pub struct DenseHamiltonian<F> {
    dims: BasisDims,
    f: F,
}

impl<F: Fn(f64) -> CMatrix + Sync> DenseHamiltonian<F> {
    pub fn new(dims: BasisDims, f: F) -> Self {
        Self { dims, f }
    }
}

impl<F: Fn(f64) -> CMatrix + Sync> Hamiltonian for DenseHamiltonian<F> {
    fn dims(&self) -> BasisDims {
        self.dims
    }

    fn apply_add(&self, t: f64, scale: C64, v: &[C64], out: &mut [C64], ncols: usize) {
        let h = (self.f)(t);
        let d = self.dims.total();
        for i in 0..d {
            for j in 0..d {
                let hij = h[(i, j)];
                if hij == C64::new(0.0, 0.0) {
                    continue;
                }
                let f = scale * hij;
                for c in 0..ncols {
                    out[i * ncols + c] += f * v[j * ncols + c];
                }
            }
        }
    }
}

/// Qubit detuning during a segment.
#[derive(Clone, Debug, PartialEq)]
pub enum Detuning {
    Constant(f64),
    /// Ramp evaluated at the segment-local time `t ∈ [0, duration]`.
    Sweep(SweepSchedule),
}

impl Detuning {
    #[inline]
    pub fn at(&self, t: f64) -> f64 {
        match self {
            Detuning::Constant(d) => *d,
            Detuning::Sweep(s) => s.delta_unchecked(t),
        }
    }
}

/// `(δ(t)/2)σᶻ + λ(â†σ̂⁻ + âσ̂⁺) + c(t)â + c̄(t)â†` in the frame rotating
/// at `ω_r`, with `c(t)` from an optional pulse schedule.
pub struct DrivenJc {
    dims: BasisDims,
    coupling: SparseOp,
    half_sz: Vec<f64>,
    lower: SparseOp,
    raise: SparseOp,
    detuning: Detuning,
    drive: Option<PulseSchedule>,
    omega_r: f64,
}

impl DrivenJc {
    pub fn new(params: &DeviceParams, detuning: Detuning, drive: Option<PulseSchedule>) -> Result<Self> {
        params.validate()?;
        let nc = params.cavity_dim;
        let coupling = jc_coupling(nc)?.scale(C64::new(params.lambda, 0.0));
        let a = annihilation_op(nc)?.on_cavity()?;
        let half_sz = (0..2 * nc).map(|i| if i < nc { -0.5 } else { 0.5 }).collect();
        Ok(Self {
            dims: params.dims(),
            coupling: SparseOp::from_op(&coupling),
            half_sz,
            lower: SparseOp::from_op(&a),
            raise: SparseOp::from_op(&a.adjoint()),
            detuning,
            drive,
            omega_r: params.omega_r,
        })
    }

    pub fn drive(&self) -> Option<&PulseSchedule> {
        self.drive.as_ref()
    }
}

impl Hamiltonian for DrivenJc {
    fn dims(&self) -> BasisDims {
        self.dims
    }

    #[inline]
    fn apply_add(&self, t: f64, scale: C64, v: &[C64], out: &mut [C64], ncols: usize) {
        self.coupling.apply_add(scale, v, out, ncols);
        let delta = self.detuning.at(t);
        if delta != 0.0 {
            for (i, hz) in self.half_sz.iter().enumerate() {
                let f = scale * (delta * hz);
                let row = i * ncols;
                for c in 0..ncols {
                    out[row + c] += f * v[row + c];
                }
            }
        }
        if let Some(schedule) = &self.drive {
            let c = schedule.drive_coefficient(t, self.omega_r);
            if c != C64::new(0.0, 0.0) {
                self.lower.apply_add(scale * c, v, out, ncols);
                self.raise.apply_add(scale * c.conj(), v, out, ncols);
            }
        }
    }
}
