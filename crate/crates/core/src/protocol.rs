//! Amplification pipeline: sweep into the dressed basis, drive the
//! transfer sets, sweep out, reset the qubit, correct phases with SNAP and
//! score the cavity state against a larger cat.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonian::{Detuning, DrivenJc};
use crate::hilbert::{
    partial_trace_cavity, partial_trace_qubit, sigma_x, BasisDims, CMatrix, CVector, DensityOp, Expectation,
    FockKet, OpMatrix, QuantumState, C64, EXCITED, GROUND,
};
use crate::jc_model::{dressed_pair, DeviceParams, SweepSchedule};
use crate::lindblad::{evolve, evolve_pure, EvolveOptions, ProgressHook};
use crate::ode::{IntegratorConfig, StepStats};
use crate::optimize::golden_section_max;
use crate::pulses::{
    single_transfer_schedule, table1_schedule_with, EdagRound, PulseSchedule, ScheduleOptions,
};
use crate::states::{cat_ket, cat_target, shift_op, CatSpec, FidelityWith, Parity};
use crate::units::mhz;

/// Population in the top two Fock levels that trips the truncation alarm.
pub const TRUNCATION_ALARM: f64 = 1e-4;

/// Norm drift tolerated on the pure path over a full round.
pub const ROUND_NORM_TOL: f64 = 1e-4;

/// Integrator for protocol rounds and calibration.
pub fn protocol_integrator() -> IntegratorConfig {
    IntegratorConfig::adaptive(1e-9, 1e-11)
}

/// Published SNAP phases for the single-shift output, indexed by Fock `m`.
pub const TABLE2_PHASES: [f64; 9] = [0.0, -1.589, -0.716, -0.907, 3.037, -1.621, 2.009, 2.859, -0.573];

const ALPHA_PRIME_STEP: f64 = 0.005;
const ALPHA_PRIME_SPAN: f64 = 2.5;
const ALPHA_PRIME_TOL: f64 = 1e-5;
const SNAP_MAX_SWEEPS: usize = 2000;
const SNAP_TOL: f64 = 1e-14;
const SUPPORT_TOL: f64 = 1e-14;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ResetMode {
    #[default]
    Ideal,
    Skip,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SnapMode {
    /// Phases fitted against the target.
    #[default]
    Fitted,
    /// `snap_phases` from the config applied verbatim.
    Table,
    Off,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SnapPlacement {
    #[default]
    AfterEach,
    FinalOnly,
}

/// Everything a protocol run needs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolConfig {
    pub device: DeviceParams,
    pub sweep: SweepSchedule,
    pub schedule_first: PulseSchedule,
    pub schedule_second: PulseSchedule,
    #[serde(default)]
    pub snap_phases: Vec<f64>,
    #[serde(default)]
    pub snap_mode: SnapMode,
    #[serde(default)]
    pub snap_placement: SnapPlacement,
    #[serde(default)]
    pub reset_mode: ResetMode,
    #[serde(default)]
    pub decoherence_on: bool,
    /// Drive the transfer sets one after another instead of together.
    #[serde(default)]
    pub sequential: bool,
    #[serde(default)]
    pub integrator: IntegratorConfig,
}

impl ProtocolConfig {
    /// Default pipeline for `device`: table schedules built with `options`,
    /// fitted SNAP after each round, ideal reset.
    pub fn new(device: DeviceParams, options: &ScheduleOptions) -> Result<Self> {
        device.validate()?;
        let decoherence_on = !device.decoherence_free();
        Ok(Self {
            schedule_first: table1_schedule_with(EdagRound::First, &device, options)?,
            schedule_second: table1_schedule_with(EdagRound::Second, &device, options)?,
            device,
            sweep: SweepSchedule::default(),
            snap_phases: TABLE2_PHASES.to_vec(),
            snap_mode: SnapMode::Fitted,
            snap_placement: SnapPlacement::AfterEach,
            reset_mode: ResetMode::Ideal,
            decoherence_on,
            sequential: false,
            integrator: protocol_integrator(),
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.device.validate()?;
        self.sweep.validate()?;
        self.schedule_first.validate()?;
        self.schedule_second.validate()?;
        self.integrator.validate()?;
        if self.snap_phases.len() > self.device.cavity_dim {
            return Err(Error::PhaseListTooLong {
                len: self.snap_phases.len(),
                cavity_dim: self.device.cavity_dim,
            });
        }
        Ok(())
    }

    /// Device parameters with the decay rates actually simulated.
    pub fn effective_device(&self) -> DeviceParams {
        if self.decoherence_on {
            self.device.clone()
        } else {
            DeviceParams {
                kappa: 0.0,
                gamma_minus: 0.0,
                gamma_phi: 0.0,
                ..self.device.clone()
            }
        }
    }

    pub fn schedule(&self, which: EdagRound) -> &PulseSchedule {
        match which {
            EdagRound::First => &self.schedule_first,
            EdagRound::Second => &self.schedule_second,
        }
    }
}

/// `|e⟩ ⊗ |SC^±_α⟩` on the device truncation.
pub fn prepare_initial(alpha: f64, parity: Parity, config: &ProtocolConfig) -> Result<QuantumState> {
    let spec = CatSpec::real(alpha, parity)?;
    let cavity = cat_ket(&spec, config.device.cavity_dim)?;
    Ok(QuantumState::Pure(FockKet::with_qubit(EXCITED, &cavity)?))
}

/// Result of one shift round.
#[derive(Clone, Debug)]
pub struct EdagOutput {
    pub state: QuantumState,
    pub warnings: Vec<String>,
    /// Largest top-two-level population seen at a segment boundary.
    pub truncation_population: f64,
    pub qubit_ground_population: f64,
    pub stats: StepStats,
}

fn qubit_population(state: &QuantumState, level: usize) -> Result<f64> {
    let rho_q = partial_trace_cavity(&state.to_density())?;
    Ok(rho_q.matrix()[(level, level)].re)
}

fn top_population(state: &QuantumState) -> Result<f64> {
    let rho = state.to_density();
    let cavity = if rho.dims().qubit == 2 { partial_trace_qubit(&rho)? } else { rho };
    let p = cavity.populations();
    Ok(p.iter().rev().take(2).sum())
}

fn add_stats(acc: &mut StepStats, s: &StepStats) {
    acc.accepted += s.accepted;
    acc.rejected += s.rejected;
    acc.rhs_evals += s.rhs_evals;
    acc.last_dt = s.last_dt;
}

/// Position of the current segment within a whole run, for progress.
#[derive(Clone)]
struct RunClock {
    hook: ProgressHook,
    elapsed: f64,
    total: f64,
}

impl RunClock {
    fn segment(&mut self, length: f64) -> ProgressHook {
        let (hook, start, total) = (self.hook.clone(), self.elapsed, self.total);
        self.elapsed += length;
        ProgressHook::new(move |f| hook.report((start + f * length) / total))
    }
}

fn run_segment(
    state: QuantumState,
    hamiltonian: &DrivenJc,
    device: &DeviceParams,
    span: (f64, f64),
    integrator: &IntegratorConfig,
    clock: &mut Option<RunClock>,
) -> Result<(QuantumState, StepStats)> {
    let options = EvolveOptions {
        norm_tol: ROUND_NORM_TOL,
        progress: clock.as_mut().map(|c| c.segment(span.1 - span.0)),
        ..EvolveOptions::default().with_integrator(*integrator)
    };
    let traj = match state {
        QuantumState::Pure(ket) if device.decoherence_free() => evolve_pure(&ket, hamiltonian, device, span, &options)?,
        other => evolve(&other.to_density(), hamiltonian, device, span, &options)?,
    };
    let stats = traj.stats;
    Ok((traj.into_final_state(), stats))
}

/// Simulated time of one round.
fn round_duration(config: &ProtocolConfig, which: EdagRound) -> f64 {
    let schedule = config.schedule(which);
    let windows = if config.sequential { schedule.transfer_sets.len().max(1) } else { 1 };
    2.0 * config.sweep.duration + windows as f64 * schedule.duration()
}

/// One Ê† round: sweep in, drive the schedule, sweep out.
pub fn run_edag(state: QuantumState, config: &ProtocolConfig, which: EdagRound) -> Result<EdagOutput> {
    run_edag_clocked(state, config, which, &mut None)
}

fn run_edag_clocked(
    state: QuantumState,
    config: &ProtocolConfig,
    which: EdagRound,
    clock: &mut Option<RunClock>,
) -> Result<EdagOutput> {
    config.validate()?;
    let device = config.effective_device();
    if state.dims() != device.dims() {
        return Err(Error::DimensionMismatch {
            expected: device.dims().total(),
            found: state.dims().total(),
        });
    }
    let mut warnings = Vec::new();
    let excited = qubit_population(&state, EXCITED)?;
    if excited < 0.99 {
        warnings.push(format!("qubit excited population {excited:.4} below 0.99 before the sweep"));
    }
    let mut stats = StepStats::default();
    let mut worst = top_population(&state)?;
    let check = |s: &QuantumState, worst: &mut f64| -> Result<()> {
        let p = top_population(s)?;
        *worst = worst.max(p);
        if p > TRUNCATION_ALARM {
            return Err(Error::TruncationAlarm {
                population: p,
                cavity_dim: device.cavity_dim,
            });
        }
        Ok(())
    };

    let sweep_in = DrivenJc::new(&device, Detuning::Sweep(config.sweep.clone()), None)?;
    let (mut state, s) = run_segment(state, &sweep_in, &device, (0.0, config.sweep.duration), &config.integrator, clock)?;
    add_stats(&mut stats, &s);
    check(&state, &mut worst)?;

    let schedule = config.schedule(which);
    let windows: Vec<PulseSchedule> = if config.sequential {
        schedule
            .transfer_sets
            .iter()
            .map(|set| PulseSchedule {
                transfer_sets: vec![*set],
                shared_tone1: false,
                ..schedule.clone()
            })
            .collect()
    } else {
        vec![schedule.clone()]
    };
    for window in windows {
        let span = (window.t_start, window.t_end);
        let h = DrivenJc::new(&device, Detuning::Constant(0.0), Some(window))?;
        let (next, s) = run_segment(state, &h, &device, span, &config.integrator, clock)?;
        state = next;
        add_stats(&mut stats, &s);
        check(&state, &mut worst)?;
    }

    let sweep_out = DrivenJc::new(&device, Detuning::Sweep(config.sweep.reversed()), None)?;
    let (state, s) = run_segment(state, &sweep_out, &device, (0.0, config.sweep.duration), &config.integrator, clock)?;
    add_stats(&mut stats, &s);
    check(&state, &mut worst)?;

    Ok(EdagOutput {
        qubit_ground_population: qubit_population(&state, GROUND)?,
        state,
        warnings,
        truncation_population: worst,
        stats,
    })
}

/// Flips the qubit between rounds.
pub fn qubit_reset(state: &QuantumState, config: &ProtocolConfig) -> Result<QuantumState> {
    match config.reset_mode {
        ResetMode::Skip => Ok(state.clone()),
        ResetMode::Ideal => {
            let dims = state.dims();
            if dims.qubit != 2 {
                return Err(Error::Shape("qubit reset needs a joint state".into()));
            }
            state.transform(&sigma_x().on_qubit(dims.cavity)?)
        }
    }
}

/// `Σ e^{iΦ_m}|m⟩⟨m|` on the cavity, lifted to the joint space if needed.
pub fn snap_operator(phases: &[f64], dims: BasisDims) -> Result<OpMatrix> {
    if phases.len() > dims.cavity {
        return Err(Error::PhaseListTooLong {
            len: phases.len(),
            cavity_dim: dims.cavity,
        });
    }
    let d = dims.total();
    let mut m = CMatrix::zeros(d, d);
    for i in 0..d {
        let n = i % dims.cavity;
        let phi = phases.get(n).copied().unwrap_or(0.0);
        m[(i, i)] = C64::from_polar(1.0, phi);
    }
    OpMatrix::new(m, dims)
}

pub fn snap_gate(state: &QuantumState, phases: &[f64]) -> Result<QuantumState> {
    state.transform(&snap_operator(phases, state.dims())?)
}

/// Outcome of a phase fit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SnapFit {
    pub phases: Vec<f64>,
    pub fidelity: f64,
    pub initial_fidelity: f64,
    pub converged: bool,
    pub sweeps: usize,
}

fn wrap_phase(x: f64) -> f64 {
    let w = x.rem_euclid(std::f64::consts::TAU);
    if w > std::f64::consts::PI {
        w - std::f64::consts::TAU
    } else {
        w
    }
}

fn snap_fidelity(rho: &CMatrix, t: &CVector, phases: &[f64]) -> f64 {
    let b: CVector = CVector::from_iterator(t.len(), t.iter().zip(phases).map(|(ti, p)| C64::from_polar(1.0, -p) * ti));
    (b.adjoint() * rho * &b)[(0, 0)].re
}

/// SNAP phases maximizing `⟨t|SρS†|t⟩` by coordinate ascent, seeded from
/// the dominant eigenvector of `ρ`.
///
/// The global phase is fixed by zeroing the phase of the lowest Fock level
/// in the target's support; levels outside the support get `Φ = 0`.
pub fn fit_snap_phases(rho_cavity: &DensityOp, target: &FockKet) -> Result<SnapFit> {
    let dims = rho_cavity.dims();
    if dims.qubit != 1 || target.dims() != dims {
        return Err(Error::Shape("phase fit needs cavity states of equal dimension".into()));
    }
    let d = dims.cavity;
    let rho = rho_cavity.matrix();
    let t = target.amplitudes();
    let support: Vec<bool> = t.iter().map(|z| z.norm_sqr() > SUPPORT_TOL).collect();
    let initial_fidelity = snap_fidelity(rho, t, &vec![0.0; d]);

    let (_, v) = rho_cavity.dominant_eigenvector();
    let mut phases: Vec<f64> = (0..d)
        .map(|m| if support[m] { t[m].arg() - v.as_slice()[m].arg() } else { 0.0 })
        .collect();
    let mut b: Vec<C64> = (0..d).map(|m| C64::from_polar(1.0, -phases[m]) * t[m]).collect();
    let mut f = snap_fidelity(rho, t, &phases);
    let mut converged = false;
    let mut sweeps = 0;
    while sweeps < SNAP_MAX_SWEEPS {
        sweeps += 1;
        for m in 0..d {
            if !support[m] {
                continue;
            }
            let mut w = C64::new(0.0, 0.0);
            for n in 0..d {
                if n != m {
                    w += rho[(m, n)] * b[n];
                }
            }
            w *= t[m].conj();
            if w.norm() > 0.0 {
                phases[m] = -w.arg();
                b[m] = C64::from_polar(1.0, -phases[m]) * t[m];
            }
        }
        let next = snap_fidelity(rho, t, &phases);
        let gain = next - f;
        f = next;
        if gain.abs() < SNAP_TOL {
            converged = true;
            break;
        }
    }
    let anchor = support.iter().position(|&s| s).map(|m| phases[m]).unwrap_or(0.0);
    let phases: Vec<f64> = (0..d)
        .map(|m| if support[m] { wrap_phase(phases[m] - anchor) } else { 0.0 })
        .collect();
    let fidelity = snap_fidelity(rho, t, &phases);
    let (phases, fidelity) = if fidelity >= initial_fidelity {
        (phases, fidelity)
    } else {
        (vec![0.0; d], initial_fidelity)
    };
    Ok(SnapFit {
        phases,
        fidelity,
        initial_fidelity,
        converged,
        sweeps,
    })
}

/// Cavity state after a run and the fidelity it reaches against the best
/// cat of the expected parity.
#[derive(Clone, Debug, Serialize)]
pub struct AmplificationReport {
    pub alpha: f64,
    pub k: usize,
    #[serde(skip)]
    pub final_cavity_state: DensityOp,
    pub fidelity_vs_target: f64,
    pub best_alpha_prime: f64,
    pub gain: f64,
    pub parity_expectation: f64,
    pub uncorrected_fidelity: f64,
    pub snap_phases: Vec<Vec<f64>>,
    pub qubit_ground_population: f64,
    pub truncation_population: f64,
    pub warnings: Vec<String>,
    pub runtime_seconds: f64,
}

impl AmplificationReport {
    /// JSON object of the scalar fields, optionally with the final state as
    /// `re`/`im` row matrices.
    pub fn to_json(&self, include_state: bool) -> Result<serde_json::Value> {
        let mut v = serde_json::to_value(self)?;
        if include_state {
            let m = self.final_cavity_state.matrix();
            let rows = |f: fn(&C64) -> f64| -> Vec<Vec<f64>> {
                (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| f(&m[(i, j)])).collect()).collect()
            };
            v["final_cavity_state"] = serde_json::json!({ "re": rows(|z| z.re), "im": rows(|z| z.im) });
        }
        Ok(v)
    }
}

/// Applies `(Ê†)^k` to a cavity ket and renormalizes.
fn ideal_shift(ket: &FockKet, k: usize) -> Result<FockKet> {
    ket.apply(&shift_op(ket.dim(), k)?)?.normalized()
}

fn correction(config: &ProtocolConfig, cavity: &DensityOp, target: &FockKet) -> Result<(Vec<f64>, f64)> {
    match config.snap_mode {
        SnapMode::Fitted => {
            let fit = fit_snap_phases(cavity, target)?;
            Ok((fit.phases, fit.fidelity))
        }
        SnapMode::Table => {
            let s = snap_gate(&QuantumState::Mixed(cavity.clone()), &config.snap_phases)?;
            Ok((config.snap_phases.clone(), s.fidelity_with(target)?))
        }
        SnapMode::Off => Ok((Vec::new(), cavity.fidelity_with(target)?)),
    }
}

/// Fidelity against `|SC_{α′}⟩` after the configured correction, maximized
/// over `α′` on a grid in `[α, 2.5α]` and refined by golden section.
pub fn best_alpha_prime(
    cavity: &DensityOp,
    alpha: f64,
    parity: Parity,
    config: &ProtocolConfig,
) -> Result<(f64, f64, Vec<f64>)> {
    let nc = cavity.dims().cavity;
    let score = |ap: f64| -> f64 {
        let target = match CatSpec::real(ap, parity).and_then(|s| cat_target(&s, nc)) {
            Ok(t) => t,
            Err(_) => return 0.0,
        };
        correction(config, cavity, &target).map(|(_, f)| f).unwrap_or(0.0)
    };
    let steps = ((ALPHA_PRIME_SPAN - 1.0) * alpha / ALPHA_PRIME_STEP).round() as usize;
    let grid: Vec<(f64, f64)> = (0..=steps)
        .into_par_iter()
        .map(|i| {
            let ap = alpha + i as f64 * ALPHA_PRIME_STEP;
            (ap, score(ap))
        })
        .collect();
    let (i_best, _) = grid
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, &(_, f))| if f > acc.1 { (i, f) } else { acc });
    let lo = grid[i_best.saturating_sub(1)].0;
    let hi = grid[(i_best + 1).min(grid.len() - 1)].0;
    let (ap, f) = if hi > lo {
        golden_section_max(score, lo, hi, ALPHA_PRIME_TOL)
    } else {
        grid[i_best]
    };
    let (ap, f) = if f >= grid[i_best].1 { (ap, f) } else { grid[i_best] };
    let target = cat_target(&CatSpec::real(ap, parity)?, nc)?;
    let (phases, _) = correction(config, cavity, &target)?;
    Ok((ap, f, phases))
}

/// Full pipeline: prepare, `k` shift rounds with resets and SNAP, score.
pub fn amplify(alpha: f64, parity: Parity, k: usize, config: &ProtocolConfig) -> Result<AmplificationReport> {
    amplify_with_progress(alpha, parity, k, config, None)
}

/// [`amplify`] reporting the simulated fraction of all rounds to `progress`.
pub fn amplify_with_progress(
    alpha: f64,
    parity: Parity,
    k: usize,
    config: &ProtocolConfig,
    progress: Option<ProgressHook>,
) -> Result<AmplificationReport> {
    let started = Instant::now();
    if !(1..=2).contains(&k) {
        return Err(Error::InvalidParameter(format!("shift power {k} must be 1 or 2")));
    }
    if k == 2 && config.reset_mode == ResetMode::Skip {
        return Err(Error::Contract("two shift rounds need a qubit reset".into()));
    }
    config.validate()?;
    let nc = config.device.cavity_dim;
    let input = cat_ket(&CatSpec::real(alpha, parity)?, nc)?;
    let mut state = prepare_initial(alpha, parity, config)?;
    let mut warnings = Vec::new();
    let mut snap_phases = Vec::new();
    let mut truncation_population: f64 = 0.0;
    let mut qubit_ground_population = 0.0;
    let mut clock = progress.map(|hook| RunClock {
        hook,
        elapsed: 0.0,
        total: round_duration(config, EdagRound::First)
            + if k == 2 { round_duration(config, EdagRound::Second) } else { 0.0 },
    });
    for round in 1..=k {
        if round == 2 {
            state = qubit_reset(&state, config)?;
        }
        let which = if round == 1 { EdagRound::First } else { EdagRound::Second };
        let out = run_edag_clocked(state, config, which, &mut clock)?;
        warnings.extend(out.warnings);
        truncation_population = truncation_population.max(out.truncation_population);
        qubit_ground_population = out.qubit_ground_population;
        state = out.state;
        if round < k && config.snap_placement == SnapPlacement::AfterEach && config.snap_mode != SnapMode::Off {
            let cavity = partial_trace_qubit(&state.to_density())?;
            let (phases, _) = correction(config, &cavity, &ideal_shift(&input, round)?)?;
            state = snap_gate(&state, &phases)?;
            snap_phases.push(phases);
        }
    }
    let cavity = partial_trace_qubit(&state.to_density())?;
    let parity_out = parity.after_shift(k);
    let (ap, fidelity, phases) = best_alpha_prime(&cavity, alpha, parity_out, config)?;
    let uncorrected = cavity.fidelity_with(&cat_target(&CatSpec::real(ap, parity_out)?, nc)?)?;
    let corrected = snap_gate(&QuantumState::Mixed(cavity), &phases)?.to_density();
    let parity_expectation = corrected.expectation_real(&crate::hilbert::parity_op(nc)?)?;
    snap_phases.push(phases);
    Ok(AmplificationReport {
        alpha,
        k,
        final_cavity_state: corrected,
        fidelity_vs_target: fidelity.clamp(0.0, 1.0),
        best_alpha_prime: ap,
        gain: ap / alpha,
        parity_expectation,
        uncorrected_fidelity: uncorrected,
        snap_phases,
        qubit_ground_population,
        truncation_population,
        warnings,
        runtime_seconds: started.elapsed().as_secs_f64(),
    })
}

/// Search settings for [`calibrate_tone2_offsets`]; offsets in MHz.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CalibrationOptions {
    pub lo_mhz: f64,
    pub hi_mhz: f64,
    pub step_mhz: f64,
    pub refine_iters: usize,
    pub sweeps: usize,
    /// Truncation used while calibrating; capped at the device value.
    pub cavity_dim: usize,
    pub integrator: IntegratorConfig,
}

impl Default for CalibrationOptions {
    fn default() -> Self {
        Self {
            lo_mhz: -0.6,
            hi_mhz: 0.8,
            step_mhz: 0.2,
            refine_iters: 6,
            sweeps: 1,
            cavity_dim: 12,
            integrator: IntegratorConfig::default(),
        }
    }
}

/// Tone-2 offsets found by [`calibrate_tone2_offsets`], in rad/µs, with the
/// transfer efficiency of each set under the full schedule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub offsets: Vec<f64>,
    pub efficiencies: Vec<f64>,
}

/// `|⟨−,n|ψ⟩|²` after driving `|+,n⟩` with the whole schedule at `δ = 0`.
pub fn transfer_efficiency(
    schedule: &PulseSchedule,
    set: usize,
    device: &DeviceParams,
    integrator: &IntegratorConfig,
) -> Result<f64> {
    let n = schedule
        .transfer_sets
        .get(set)
        .ok_or_else(|| Error::InvalidParameter(format!("no transfer set {set}")))?
        .manifold;
    let device = DeviceParams {
        kappa: 0.0,
        gamma_minus: 0.0,
        gamma_phi: 0.0,
        ..device.clone()
    };
    let pair = dressed_pair(n, 0.0, device.lambda, device.cavity_dim)?;
    let span = (schedule.t_start, schedule.t_end);
    let h = DrivenJc::new(&device, Detuning::Constant(0.0), Some(schedule.clone()))?;
    let options = EvolveOptions {
        norm_tol: ROUND_NORM_TOL,
        ..EvolveOptions::default().with_integrator(*integrator)
    };
    let traj = evolve_pure(&pair.plus, &h, &device, span, &options)?;
    match traj.final_state() {
        QuantumState::Pure(k) => Ok(pair.minus.inner(k)?.norm_sqr()),
        QuantumState::Mixed(r) => r.fidelity_with(&pair.minus),
    }
}

/// Shifts each tone-2 frequency to maximize its own transfer while every
/// other tone plays, one set at a time: a grid scan around the exact
/// two-photon condition followed by golden section around the best point.
/// Offsets are reported relative to the input schedule.
pub fn calibrate_tone2_offsets(
    schedule: &PulseSchedule,
    device: &DeviceParams,
    options: &CalibrationOptions,
) -> Result<(PulseSchedule, Calibration)> {
    if !(options.step_mhz > 0.0) || !(options.hi_mhz >= options.lo_mhz) {
        return Err(Error::InvalidParameter("calibration needs an ordered range and a positive step".into()));
    }
    let top = schedule.transfer_sets.iter().map(|s| s.manifold).max().unwrap_or(0);
    let nc = options.cavity_dim.min(device.cavity_dim).max(top + 3);
    let device = device.clone().with_cavity_dim(nc);
    let sets = schedule.transfer_sets.len();
    let centers: Vec<f64> = schedule
        .transfer_sets
        .iter()
        .map(|s| s.two_photon_residual(device.lambda))
        .collect();
    let mut offsets = centers.clone();
    let mut efficiencies = vec![0.0; sets];
    let eval = |offs: &[f64], set: usize| -> Result<f64> {
        transfer_efficiency(&schedule.with_tone2_offsets(offs)?, set, &device, &options.integrator)
    };
    let points = ((options.hi_mhz - options.lo_mhz) / options.step_mhz).round() as usize;
    for _ in 0..options.sweeps.max(1) {
        for set in 0..sets {
            let trial = |x: f64| -> Result<f64> {
                let mut offs = offsets.clone();
                offs[set] = x;
                eval(&offs, set)
            };
            let grid: Vec<(f64, f64)> = (0..=points)
                .into_par_iter()
                .map(|i| {
                    let x = centers[set] + mhz(options.lo_mhz + i as f64 * options.step_mhz);
                    trial(x).map(|e| (x, e))
                })
                .collect::<Result<_>>()?;
            let mut best = grid.iter().copied().fold((0.0, f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a });
            let half = mhz(options.step_mhz);
            let (mut a, mut b) = (best.0 - half, best.0 + half);
            let g = 0.5 * (5f64.sqrt() - 1.0);
            let mut c = b - g * (b - a);
            let mut d = a + g * (b - a);
            let (mut fc, mut fd) = (trial(c)?, trial(d)?);
            for _ in 0..options.refine_iters {
                for (x, f) in [(c, fc), (d, fd)] {
                    if f > best.1 {
                        best = (x, f);
                    }
                }
                if fc > fd {
                    b = d;
                    d = c;
                    fd = fc;
                    c = b - g * (b - a);
                    fc = trial(c)?;
                } else {
                    a = c;
                    c = d;
                    fc = fd;
                    d = a + g * (b - a);
                    fd = trial(d)?;
                }
            }
            for (x, f) in [(c, fc), (d, fd)] {
                if f > best.1 {
                    best = (x, f);
                }
            }
            offsets[set] = best.0;
            efficiencies[set] = best.1;
        }
    }
    for (set, e) in efficiencies.iter_mut().enumerate() {
        *e = eval(&offsets, set)?;
    }
    Ok((schedule.with_tone2_offsets(&offsets)?, Calibration { offsets, efficiencies }))
}

impl ProtocolConfig {
    /// Replaces the schedules used by a `k`-round run with their calibrated
    /// versions.
    pub fn calibrate(&mut self, k: usize, options: &CalibrationOptions) -> Result<Vec<Calibration>> {
        let (first, c1) = calibrate_tone2_offsets(&self.schedule_first, &self.device, options)?;
        self.schedule_first = first;
        let mut out = vec![c1];
        if k >= 2 {
            let (second, c2) = calibrate_tone2_offsets(&self.schedule_second, &self.device, options)?;
            self.schedule_second = second;
            out.push(c2);
        }
        Ok(out)
    }
}

/// Single-manifold transfer `|+,0⟩ → |−,0⟩` driven by one Gaussian pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StirapConfig {
    pub device: DeviceParams,
    pub eps1: f64,
    pub eps2: f64,
    pub width: f64,
    pub window_margin: f64,
    pub integrator: IntegratorConfig,
}

impl Default for StirapConfig {
    fn default() -> Self {
        Self {
            device: DeviceParams::default().with_cavity_dim(6),
            eps1: mhz(10.0),
            eps2: mhz(35.0),
            width: 6.28,
            window_margin: ScheduleOptions::default().window_margin,
            integrator: IntegratorConfig::default(),
        }
    }
}

/// Transfer efficiency `|⟨−,0|ψ⟩|²` for each envelope offset; negative `τ`
/// drives tone 2 first.
pub fn stirap_scan(tau_values: &[f64], delta0: f64, config: &StirapConfig) -> Result<Vec<(f64, f64)>> {
    let device = DeviceParams {
        kappa: 0.0,
        gamma_minus: 0.0,
        gamma_phi: 0.0,
        ..config.device.clone()
    };
    device.validate()?;
    let pair = dressed_pair(0, 0.0, device.lambda, device.cavity_dim)?;
    let options = ScheduleOptions {
        window_margin: config.window_margin,
        ..ScheduleOptions::default()
    };
    tau_values
        .par_iter()
        .map(|&tau| {
            let schedule =
                single_transfer_schedule(0, delta0, config.eps1, config.eps2, tau, config.width, &device, &options)?;
            let span = (schedule.t_start, schedule.t_end);
            let h = DrivenJc::new(&device, Detuning::Constant(0.0), Some(schedule))?;
            let traj = evolve_pure(
                &pair.plus,
                &h,
                &device,
                span,
                &EvolveOptions {
                    norm_tol: ROUND_NORM_TOL,
                    ..EvolveOptions::default().with_integrator(config.integrator)
                },
            )?;
            let eff = match traj.final_state() {
                QuantumState::Pure(k) => pair.minus.inner(k)?.norm_sqr(),
                QuantumState::Mixed(r) => r.fidelity_with(&pair.minus)?,
            };
            Ok((tau, eff))
        })
        .collect()
}

/// Comparison of an output cavity state with the block-shifted input.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShiftEvidence {
    /// Largest `|ρ_out[i+k, j+k] − ρ_in[i, j]|` over entries with `|ρ_in[i, j]| > 1e-3`.
    pub residual: f64,
    /// Same with magnitudes compared.
    pub magnitude_residual: f64,
    /// Output population outside the parity sector expected after the shift.
    pub leakage: f64,
    pub compared_entries: usize,
}

pub fn shift_evidence(rho_in: &DensityOp, rho_out: &DensityOp, k: usize) -> Result<ShiftEvidence> {
    if rho_in.dims() != rho_out.dims() || rho_in.dims().qubit != 1 {
        return Err(Error::Shape("shift evidence needs cavity states of equal dimension".into()));
    }
    let d = rho_in.dim();
    let (a, b) = (rho_in.matrix(), rho_out.matrix());
    let mut residual: f64 = 0.0;
    let mut magnitude_residual: f64 = 0.0;
    let mut compared = 0;
    for i in 0..d.saturating_sub(k) {
        for j in 0..d.saturating_sub(k) {
            if a[(i, j)].norm() > 1e-3 {
                compared += 1;
                residual = residual.max((b[(i + k, j + k)] - a[(i, j)]).norm());
                magnitude_residual = magnitude_residual.max((b[(i + k, j + k)].norm() - a[(i, j)].norm()).abs());
            }
        }
    }
    let p_in = rho_in.populations();
    let even_in: f64 = p_in.iter().step_by(2).sum();
    let input_parity = if even_in >= 0.5 { Parity::Even } else { Parity::Odd };
    let expected = input_parity.after_shift(k);
    let leakage = rho_out
        .populations()
        .iter()
        .enumerate()
        .filter(|(n, _)| !expected.matches(*n))
        .map(|(_, p)| p)
        .sum();
    Ok(ShiftEvidence {
        residual,
        magnitude_residual,
        leakage,
        compared_entries: compared,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn small_config() -> ProtocolConfig {
        ProtocolConfig::new(DeviceParams::default().with_cavity_dim(16), &ScheduleOptions::default()).unwrap()
    }

    #[test]
    fn initial_state_is_excited_product() {
        let cfg = small_config();
        let s = prepare_initial(1.5, Parity::Even, &cfg).unwrap();
        let rho_q = partial_trace_cavity(&s.to_density()).unwrap();
        assert_abs_diff_eq!(rho_q.matrix()[(1, 1)].re, 1.0, epsilon = 1e-14);
        let cav = partial_trace_qubit(&s.to_density()).unwrap();
        let n = cav.expectation_real(&crate::hilbert::number_op(16).unwrap()).unwrap();
        // ⟨n⟩ = α² tanh(α²) up to the truncated tail
        assert_abs_diff_eq!(n, 2.25 * 2.25f64.tanh(), epsilon = 1e-6);
    }

    #[test]
    fn reset_flips_qubit_only() {
        let cfg = small_config();
        let s = QuantumState::Pure(FockKet::joint(GROUND, 3, 16).unwrap());
        let r = qubit_reset(&s, &cfg).unwrap();
        assert_eq!(r, QuantumState::Pure(FockKet::joint(EXCITED, 3, 16).unwrap()));

        let mut m = CMatrix::zeros(32, 32);
        m[(2, 2)] = C64::new(0.3, 0.0);
        m[(18, 18)] = C64::new(0.7, 0.0);
        let mixed = QuantumState::Mixed(DensityOp::new(m, BasisDims::joint(16)).unwrap());
        let flipped = qubit_reset(&mixed, &cfg).unwrap().to_density();
        let q = partial_trace_cavity(&flipped).unwrap();
        assert_abs_diff_eq!(q.matrix()[(0, 0)].re, 0.7, epsilon = 1e-15);
        assert_abs_diff_eq!(q.matrix()[(1, 1)].re, 0.3, epsilon = 1e-15);
        let before = partial_trace_qubit(&mixed.to_density()).unwrap();
        let after = partial_trace_qubit(&flipped).unwrap();
        assert!(before.trace_distance(&after).unwrap() < 1e-12);
    }

    #[test]
    fn snap_table_inverse_and_populations() {
        let ket = cat_ket(&CatSpec::real(1.5, Parity::Odd).unwrap(), 16).unwrap();
        let s = QuantumState::Pure(ket.clone());
        let neg: Vec<f64> = TABLE2_PHASES.iter().map(|p| -p).collect();
        let once = snap_gate(&s, &TABLE2_PHASES).unwrap();
        let back = snap_gate(&once, &neg).unwrap();
        match (&once, &back) {
            (QuantumState::Pure(o), QuantumState::Pure(b)) => {
                assert!((b.amplitudes() - ket.amplitudes()).norm() < 1e-14);
                for (x, y) in o.populations().iter().zip(ket.populations()) {
                    assert_abs_diff_eq!(*x, y, epsilon = 1e-14);
                }
            }
            _ => unreachable!(),
        }
        assert_eq!(snap_gate(&s, &[0.0; 5]).unwrap(), s);
        assert!(matches!(snap_gate(&s, &[0.0; 17]), Err(Error::PhaseListTooLong { .. })));
    }

    #[test]
    fn snap_commutes_with_parity() {
        let dims = BasisDims::joint(8);
        let s = snap_operator(&TABLE2_PHASES[..8], dims).unwrap();
        let p = crate::hilbert::parity_op(8).unwrap().on_cavity().unwrap();
        assert_eq!(s.commutator(&p).unwrap().matrix().norm(), 0.0);
    }

    #[test]
    fn fit_recovers_rotated_phase() {
        let target = cat_ket(&CatSpec::real(1.2, Parity::Even).unwrap(), 16).unwrap();
        let fit = fit_snap_phases(&target.to_density(), &target).unwrap();
        assert!(fit.phases.iter().all(|p| p.abs() < 1e-6));
        let phi = 0.83;
        let mut amps = target.amplitudes().clone();
        amps[2] *= C64::from_polar(1.0, phi);
        let rotated = FockKet::new(amps, target.dims()).unwrap();
        let fit = fit_snap_phases(&rotated.to_density(), &target).unwrap();
        assert_abs_diff_eq!(fit.phases[2], -phi, epsilon = 1e-6);
        assert!(fit.fidelity > 1.0 - 1e-8);
        assert!(fit.fidelity >= fit.initial_fidelity);
    }

    #[test]
    fn exact_shift_has_zero_residual() {
        let ket = cat_ket(&CatSpec::real(1.5, Parity::Even).unwrap(), 20).unwrap();
        let rho_in = ket.to_density();
        let out = rho_in.conjugate_by(&shift_op(20, 2).unwrap()).unwrap();
        let e = shift_evidence(&rho_in, &out, 2).unwrap();
        assert_eq!(e.residual, 0.0);
        assert_eq!(e.magnitude_residual, 0.0);
        assert_eq!(e.leakage, 0.0);
        assert!(e.compared_entries > 10);
    }

    #[test]
    fn two_rounds_need_reset() {
        let mut cfg = small_config();
        cfg.reset_mode = ResetMode::Skip;
        assert!(matches!(amplify(1.5, Parity::Even, 2, &cfg), Err(Error::Contract(_))));
    }

    #[test]
    fn config_round_trips_through_json() {
        let cfg = small_config();
        let s = serde_json::to_string(&cfg).unwrap();
        let back: ProtocolConfig = serde_json::from_str(&s).unwrap();
        assert_eq!(back, cfg);
        let mut v: serde_json::Value = serde_json::from_str(&s).unwrap();
        v["bogus"] = serde_json::json!(1);
        assert!(serde_json::from_value::<ProtocolConfig>(v).is_err());
    }
}
