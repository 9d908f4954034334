//! Lindblad master equation
//! `ρ̇ = −i[H(t), ρ] + κ𝒟[â]ρ + γ₋𝒟[σ̂⁻]ρ + (γ_φ/2)𝒟[σ̂ᶻ]ρ`
//! with `𝒟[b]ρ = bρb† − ½{b†b, ρ}`, plus a pure-state path for the
//! decoherence-free case.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonian::Hamiltonian;
use crate::hilbert::{
    annihilation_op, number_op, parity_op, partial_trace_qubit, sigma_minus, sigma_z, BasisDims, CMatrix,
    DensityOp, Expectation, FockKet, InvariantTolerance, OpMatrix, QuantumState, SparseOp, C64, EXCITED,
};
use crate::jc_model::DeviceParams;
use crate::ode::{integrate, IntegratorConfig, StepStats};
use crate::states::FidelityWith;

/// One decay channel `rate · 𝒟[b]`.
#[derive(Clone, Debug)]
pub struct Dissipator {
    pub label: String,
    pub rate: f64,
    jump: SparseOp,
    jump_diag: Option<Vec<C64>>,
    decay: SparseOp,
    decay_diag: Option<Vec<f64>>,
}

fn diagonal_of(op: &SparseOp) -> Option<Vec<C64>> {
    let m = op.to_dense();
    let d = m.nrows();
    for i in 0..d {
        for j in 0..d {
            if i != j && m[(i, j)] != C64::new(0.0, 0.0) {
                return None;
            }
        }
    }
    Some((0..d).map(|i| m[(i, i)]).collect())
}

impl Dissipator {
    pub fn new(label: impl Into<String>, rate: f64, op: &OpMatrix) -> Self {
        let jump = SparseOp::from_op(op);
        let decay = SparseOp::from_matrix(&(op.matrix().adjoint() * op.matrix()));
        let jump_diag = diagonal_of(&jump);
        let decay_diag = diagonal_of(&decay).map(|v| v.iter().map(|z| z.re).collect());
        Self {
            label: label.into(),
            rate,
            jump,
            jump_diag,
            decay,
            decay_diag,
        }
    }

    pub fn dim(&self) -> usize {
        self.jump.dim()
    }
}

/// `κ𝒟[â]`, `γ₋𝒟[σ̂⁻]` and `(γ_φ/2)𝒟[σ̂ᶻ]`, skipping zero rates. On a
/// cavity-only space only the cavity channel is built.
pub fn standard_dissipators(params: &DeviceParams, dims: BasisDims) -> Result<Vec<Dissipator>> {
    let nc = dims.cavity;
    let mut out = Vec::new();
    let joint = dims.qubit == 2;
    if dims.qubit != 1 && !joint {
        return Err(Error::Shape(format!("unsupported qubit dimension {}", dims.qubit)));
    }
    if params.kappa > 0.0 {
        let a = annihilation_op(nc)?;
        let a = if joint { a.on_cavity()? } else { a };
        out.push(Dissipator::new("kappa", params.kappa, &a));
    }
    if joint && params.gamma_minus > 0.0 {
        out.push(Dissipator::new("gamma_minus", params.gamma_minus, &sigma_minus().on_qubit(nc)?));
    }
    if joint && params.gamma_phi > 0.0 {
        out.push(Dissipator::new("gamma_phi", 0.5 * params.gamma_phi, &sigma_z().on_qubit(nc)?));
    }
    Ok(out)
}

/// Reusable buffers for the right-hand side.
struct Scratch {
    x: Vec<C64>,
    y: Vec<C64>,
    yd: Vec<C64>,
}

impl Scratch {
    fn new(d: usize) -> Self {
        let z = C64::new(0.0, 0.0);
        Self {
            x: vec![z; d * d],
            y: vec![z; d * d],
            yd: vec![z; d * d],
        }
    }
}

/// Generator of the master equation for a given Hamiltonian and channel set.
pub struct LindbladRhs<'a> {
    hamiltonian: &'a dyn Hamiltonian,
    dissipators: Vec<Dissipator>,
    dim: usize,
}

impl<'a> LindbladRhs<'a> {
    pub fn new(hamiltonian: &'a dyn Hamiltonian, dissipators: Vec<Dissipator>) -> Result<Self> {
        let dim = hamiltonian.dims().total();
        for d in &dissipators {
            if d.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: d.dim(),
                });
            }
        }
        Ok(Self {
            hamiltonian,
            dissipators,
            dim,
        })
    }

    pub fn dissipators(&self) -> &[Dissipator] {
        &self.dissipators
    }

    /// Row-major derivative. `rho` must be Hermitian; the commutator and
    /// sandwich terms use `ρ = ρ†` to halve the work.
    fn eval(&self, t: f64, rho: &[C64], out: &mut [C64], s: &mut Scratch) {
        let d = self.dim;
        let zero = C64::new(0.0, 0.0);
        s.x.fill(zero);
        self.hamiltonian.apply_add(t, C64::new(1.0, 0.0), rho, &mut s.x, d);
        // −i(Hρ − ρH) with ρH = (Hρ)†
        for i in 0..d {
            for j in 0..d {
                let v = s.x[i * d + j] - s.x[j * d + i].conj();
                out[i * d + j] = C64::new(v.im, -v.re);
            }
        }
        for diss in &self.dissipators {
            let g = diss.rate;
            match &diss.jump_diag {
                Some(sv) => {
                    for i in 0..d {
                        for j in 0..d {
                            out[i * d + j] += rho[i * d + j] * sv[i] * sv[j].conj() * g;
                        }
                    }
                }
                None => {
                    // bρb† = b (bρ)†
                    s.y.fill(zero);
                    diss.jump.apply_add(C64::new(1.0, 0.0), rho, &mut s.y, d);
                    for i in 0..d {
                        for j in 0..d {
                            s.yd[i * d + j] = s.y[j * d + i].conj();
                        }
                    }
                    diss.jump.apply_add(C64::new(g, 0.0), &s.yd, out, d);
                }
            }
            match &diss.decay_diag {
                Some(dd) => {
                    for i in 0..d {
                        for j in 0..d {
                            out[i * d + j] -= rho[i * d + j] * (0.5 * g * (dd[i] + dd[j]));
                        }
                    }
                }
                None => {
                    s.y.fill(zero);
                    diss.decay.apply_add(C64::new(1.0, 0.0), rho, &mut s.y, d);
                    for i in 0..d {
                        for j in 0..d {
                            out[i * d + j] -= (s.y[i * d + j] + s.y[j * d + i].conj()) * (0.5 * g);
                        }
                    }
                }
            }
        }
    }

    /// `ρ̇` at time `t`.
    pub fn derivative(&self, t: f64, rho: &DensityOp) -> Result<CMatrix> {
        if rho.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: rho.dim(),
            });
        }
        let flat = rho.to_row_major();
        let mut out = vec![C64::new(0.0, 0.0); flat.len()];
        let mut scratch = Scratch::new(self.dim);
        self.eval(t, &flat, &mut out, &mut scratch);
        Ok(CMatrix::from_row_slice(self.dim, self.dim, &out))
    }
}

/// Master-equation right-hand side for `rho` under `hamiltonian` and the
/// standard channels of `params`.
pub fn lindblad_rhs(rho: &DensityOp, t: f64, hamiltonian: &dyn Hamiltonian, params: &DeviceParams) -> Result<CMatrix> {
    let rhs = LindbladRhs::new(hamiltonian, standard_dissipators(params, hamiltonian.dims())?)?;
    rhs.derivative(t, rho)
}

/// Which state snapshots a trajectory keeps.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum StoreStates {
    #[default]
    FinalOnly,
    All,
}

/// Callback receiving the completed fraction of an evolution span.
#[derive(Clone)]
pub struct ProgressHook(Arc<dyn Fn(f64) + Send + Sync>);

impl ProgressHook {
    pub fn new(f: impl Fn(f64) + Send + Sync + 'static) -> Self {
        Self(Arc::new(f))
    }

    pub fn report(&self, fraction: f64) {
        (self.0)(fraction.clamp(0.0, 1.0))
    }
}

impl fmt::Debug for ProgressHook {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("ProgressHook")
    }
}

/// Options shared by [`evolve`] and [`evolve_pure`].
#[derive(Clone, Debug)]
pub struct EvolveOptions {
    pub integrator: IntegratorConfig,
    pub store: StoreStates,
    /// Cavity target for a `target_fidelity` observable.
    pub target: Option<FockKet>,
    /// Bounds enforced at every sample.
    pub tolerance: InvariantTolerance,
    /// Allowed `|‖ψ‖ − 1|` for the pure path.
    pub norm_tol: f64,
    /// Called at every observer sample.
    pub progress: Option<ProgressHook>,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        Self {
            integrator: IntegratorConfig::default(),
            store: StoreStates::FinalOnly,
            target: None,
            tolerance: InvariantTolerance {
                trace: 1e-6,
                hermiticity: 1e-8,
                min_eigenvalue: -1e-7,
            },
            norm_tol: 1e-6,
            progress: None,
        }
    }
}

impl EvolveOptions {
    pub fn with_integrator(mut self, integrator: IntegratorConfig) -> Self {
        self.integrator = integrator;
        self
    }

    pub fn with_progress(mut self, hook: ProgressHook) -> Self {
        self.progress = Some(hook);
        self
    }

    pub fn storing_all(mut self) -> Self {
        self.store = StoreStates::All;
        self
    }
}

/// Sampled integration run.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<QuantumState>,
    pub observables: BTreeMap<String, Vec<f64>>,
    pub stats: StepStats,
}

impl Trajectory {
    fn new() -> Self {
        Self {
            times: Vec::new(),
            states: Vec::new(),
            observables: BTreeMap::new(),
            stats: StepStats::default(),
        }
    }

    pub fn final_state(&self) -> &QuantumState {
        self.states.last().expect("trajectory always holds the final state")
    }

    pub fn into_final_state(mut self) -> QuantumState {
        self.states.pop().expect("trajectory always holds the final state")
    }

    pub fn observable(&self, name: &str) -> Option<&[f64]> {
        self.observables.get(name).map(|v| v.as_slice())
    }

    /// `t,<observable>...` rows with observables in name order.
    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> Result<()> {
        let names: Vec<&String> = self.observables.keys().collect();
        let mut header = String::from("t");
        for n in &names {
            header.push(',');
            header.push_str(n);
        }
        writeln!(out, "{header}")?;
        for (i, t) in self.times.iter().enumerate() {
            let mut line = format!("{t:.8e}");
            for n in &names {
                line.push_str(&format!(",{:.8e}", self.observables[*n][i]));
            }
            writeln!(out, "{line}")?;
        }
        Ok(())
    }

    /// Stored states as `[re, im]` pairs plus the observable series.
    pub fn snapshot_json(&self) -> serde_json::Value {
        let pair = |z: &C64| serde_json::json!([z.re, z.im]);
        let states: Vec<serde_json::Value> = self
            .states
            .iter()
            .map(|s| match s {
                QuantumState::Pure(k) => serde_json::json!({
                    "kind": "ket",
                    "dims": k.dims(),
                    "amplitudes": k.as_slice().iter().map(pair).collect::<Vec<_>>(),
                }),
                QuantumState::Mixed(r) => {
                    let m = r.matrix();
                    let rows: Vec<Vec<serde_json::Value>> =
                        (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| pair(&m[(i, j)])).collect()).collect();
                    serde_json::json!({ "kind": "density", "dims": r.dims(), "matrix": rows })
                }
            })
            .collect();
        serde_json::json!({
            "times": self.times,
            "observables": self.observables,
            "states": states,
        })
    }

    fn push_observable(&mut self, name: &str, value: f64) {
        self.observables.entry(name.to_string()).or_default().push(value);
    }
}

struct Probes {
    number: OpMatrix,
    parity: OpMatrix,
    excited: Option<OpMatrix>,
}

impl Probes {
    fn new(dims: BasisDims) -> Result<Self> {
        let nc = dims.cavity;
        if dims.qubit == 2 {
            let proj = crate::hilbert::diagonal_op(nc, |_| C64::new(1.0, 0.0));
            let mut pe = OpMatrix::zeros(dims).matrix().clone();
            for n in 0..nc {
                pe[(dims.index(EXCITED, n), dims.index(EXCITED, n))] = C64::new(1.0, 0.0);
            }
            let _ = proj;
            Ok(Self {
                number: number_op(nc)?.on_cavity()?,
                parity: parity_op(nc)?.on_cavity()?,
                excited: Some(OpMatrix::new(pe, dims)?),
            })
        } else {
            Ok(Self {
                number: number_op(nc)?,
                parity: parity_op(nc)?,
                excited: None,
            })
        }
    }

    fn record(&self, traj: &mut Trajectory, state: &QuantumState, target: Option<&FockKet>) -> Result<()> {
        traj.push_observable("photon_number", state.expectation_real(&self.number)?);
        traj.push_observable("parity", state.expectation_real(&self.parity)?);
        if let Some(pe) = &self.excited {
            traj.push_observable("qubit_excited", state.expectation_real(pe)?);
        }
        if let Some(target) = target {
            let rho = state.to_density();
            let cavity = if rho.dims().qubit == 2 { partial_trace_qubit(&rho)? } else { rho };
            traj.push_observable("target_fidelity", cavity.fidelity_with(target)?);
        }
        Ok(())
    }
}

fn check_span(t_span: (f64, f64)) -> Result<()> {
    if !(t_span.1 >= t_span.0) || !t_span.0.is_finite() || !t_span.1.is_finite() {
        return Err(Error::InvalidParameter(format!("invalid time span {t_span:?}")));
    }
    Ok(())
}

/// Integrates the master equation from `rho0` over `t_span`.
pub fn evolve(
    rho0: &DensityOp,
    hamiltonian: &dyn Hamiltonian,
    params: &DeviceParams,
    t_span: (f64, f64),
    options: &EvolveOptions,
) -> Result<Trajectory> {
    check_span(t_span)?;
    let dims = hamiltonian.dims();
    if rho0.dims() != dims {
        return Err(Error::DimensionMismatch {
            expected: dims.total(),
            found: rho0.dim(),
        });
    }
    rho0.check(&options.tolerance)?;
    let rhs = LindbladRhs::new(hamiltonian, standard_dissipators(params, dims)?)?;
    let probes = Probes::new(dims)?;
    let d = dims.total();
    let mut scratch = Scratch::new(d);
    let mut y = rho0.to_row_major();
    let mut traj = Trajectory::new();
    let mut pending_final = None;
    let stats = integrate(
        &mut y,
        t_span.0,
        t_span.1,
        &options.integrator,
        |t, rho, out| rhs.eval(t, rho, out, &mut scratch),
        |t, rho| {
            let state = DensityOp::from_row_major(rho, dims)?;
            let report = state.report();
            let tol = &options.tolerance;
            if report.trace_error > tol.trace
                || report.hermiticity_defect > tol.hermiticity
                || report.min_eigenvalue < tol.min_eigenvalue
                || !report.trace_error.is_finite()
            {
                return Err(Error::Diverged {
                    t,
                    reason: format!(
                        "density invariants breached: trace error {:.3e}, hermiticity {:.3e}, min eigenvalue {:.3e}",
                        report.trace_error, report.hermiticity_defect, report.min_eigenvalue
                    ),
                });
            }
            let state = QuantumState::Mixed(state);
            report_progress(options, t_span, t);
            traj.times.push(t);
            traj.push_observable("trace", 1.0 - report.trace_error);
            traj.push_observable("min_eigenvalue", report.min_eigenvalue);
            traj.push_observable("hermiticity_defect", report.hermiticity_defect);
            probes.record(&mut traj, &state, options.target.as_ref())?;
            match options.store {
                StoreStates::All => traj.states.push(state),
                StoreStates::FinalOnly => pending_final = Some(state),
            }
            Ok(())
        },
    )?;
    if let Some(state) = pending_final {
        traj.states.push(state);
    }
    traj.stats = stats;
    Ok(traj)
}

fn report_progress(options: &EvolveOptions, (t0, t1): (f64, f64), t: f64) {
    if let Some(hook) = &options.progress {
        hook.report(if t1 > t0 { (t - t0) / (t1 - t0) } else { 1.0 });
    }
}

/// Schrödinger evolution of a pure state; requires all decay rates zero.
pub fn evolve_pure(
    ket0: &FockKet,
    hamiltonian: &dyn Hamiltonian,
    params: &DeviceParams,
    t_span: (f64, f64),
    options: &EvolveOptions,
) -> Result<Trajectory> {
    if !params.decoherence_free() {
        return Err(Error::Contract(
            "pure-state evolution requires zero decoherence rates".into(),
        ));
    }
    check_span(t_span)?;
    let dims = hamiltonian.dims();
    if ket0.dims() != dims {
        return Err(Error::DimensionMismatch {
            expected: dims.total(),
            found: ket0.dim(),
        });
    }
    let probes = Probes::new(dims)?;
    let mut y = ket0.as_slice().to_vec();
    let mut traj = Trajectory::new();
    let mut pending_final = None;
    let minus_i = C64::new(0.0, -1.0);
    let stats = integrate(
        &mut y,
        t_span.0,
        t_span.1,
        &options.integrator,
        |t, psi, out| {
            out.fill(C64::new(0.0, 0.0));
            hamiltonian.apply_add(t, minus_i, psi, out, 1);
        },
        |t, psi| {
            let ket = FockKet::from_slice(psi, dims)?;
            let norm = ket.norm();
            if !((norm - 1.0).abs() <= options.norm_tol) {
                return Err(Error::Diverged {
                    t,
                    reason: format!("norm drifted to {norm:.12}"),
                });
            }
            let state = QuantumState::Pure(ket);
            report_progress(options, t_span, t);
            traj.times.push(t);
            traj.push_observable("norm", norm);
            probes.record(&mut traj, &state, options.target.as_ref())?;
            match options.store {
                StoreStates::All => traj.states.push(state),
                StoreStates::FinalOnly => pending_final = Some(state),
            }
            Ok(())
        },
    )?;
    if let Some(state) = pending_final {
        traj.states.push(state);
    }
    traj.stats = stats;
    Ok(traj)
}
