//! Scenario configs and their execution.

use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use cat_amp::jc_model::SweepSchedule;
use cat_amp::lindblad::ProgressHook;
use cat_amp::ode::IntegratorConfig;
use cat_amp::protocol::{
    amplify_with_progress, stirap_scan, CalibrationOptions, ProtocolConfig, ResetMode, SnapMode, SnapPlacement,
    StirapConfig,
};
use cat_amp::pulses::ScheduleOptions;
use cat_amp::states::{cat_ket, coherent_ket, optimal_gain, shift_op, theory_curve, CatSpec, Parity, THEORY_CAVITY_DIM};
use cat_amp::wigner::{wigner, GridSpec};
use cat_amp::{DeviceParams, Error, FockKet, C64};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::output::OutputDir;

/// Why a run stopped; each maps to an exit code.
#[derive(Debug)]
pub enum Failure {
    Schema(String),
    Numerical(String),
    Io(String),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Schema(_) => 2,
            Failure::Numerical(_) => 3,
            Failure::Io(_) => 4,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            Failure::Schema(m) | Failure::Numerical(m) | Failure::Io(m) => m,
        }
    }

    /// Library error raised while checking a config.
    pub fn schema(e: Error) -> Self {
        match e {
            Error::Io(e) => Failure::Io(e.to_string()),
            other => Failure::Schema(other.to_string()),
        }
    }

    /// Library error raised while computing.
    pub fn numerical(e: Error) -> Self {
        match e {
            Error::Io(e) => Failure::Io(e.to_string()),
            other => Failure::Numerical(other.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

fn default_k() -> usize {
    1
}

fn default_theory_dim() -> usize {
    THEORY_CAVITY_DIM
}

fn default_points() -> usize {
    301
}

fn default_calibrate() -> bool {
    true
}

fn default_wigner_dim() -> usize {
    25
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TheoryGain {
    pub alpha: f64,
    pub parity: Parity,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default = "default_theory_dim")]
    pub cavity_dim: usize,
    #[serde(default)]
    pub output_path: Option<PathBuf>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TheoryCurve {
    pub alpha: f64,
    pub parity: Parity,
    #[serde(default = "default_k")]
    pub k: usize,
    /// Defaults to `α`.
    #[serde(default)]
    pub alpha_prime_min: Option<f64>,
    /// Defaults to `2.5α`.
    #[serde(default)]
    pub alpha_prime_max: Option<f64>,
    #[serde(default = "default_points")]
    pub points: usize,
    #[serde(default = "default_theory_dim")]
    pub cavity_dim: usize,
    #[serde(default)]
    pub output_path: Option<PathBuf>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Simulate {
    pub alpha: f64,
    pub parity: Parity,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default)]
    pub device: DeviceParams,
    #[serde(default)]
    pub sweep: SweepSchedule,
    #[serde(default)]
    pub schedule: ScheduleOptions,
    /// Tune each tone-2 frequency against the full schedule before running.
    #[serde(default = "default_calibrate")]
    pub calibrate: bool,
    #[serde(default)]
    pub calibration: CalibrationOptions,
    #[serde(default)]
    pub snap_mode: SnapMode,
    #[serde(default)]
    pub snap_placement: SnapPlacement,
    /// Used by `snap_mode = table`; defaults to the published phases.
    #[serde(default)]
    pub snap_phases: Option<Vec<f64>>,
    #[serde(default)]
    pub reset_mode: ResetMode,
    #[serde(default)]
    pub sequential: bool,
    /// Defaults to whether the device has non-zero rates.
    #[serde(default)]
    pub decoherence_on: Option<bool>,
    /// Defaults to the protocol integrator.
    #[serde(default)]
    pub integrator: Option<IntegratorConfig>,
    #[serde(default)]
    pub include_state: bool,
    #[serde(default)]
    pub wigner: Option<GridSpec>,
    #[serde(default)]
    pub output_path: Option<PathBuf>,
}

fn default_tau_points() -> usize {
    81
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StirapScan {
    /// Defaults to `−5T`.
    #[serde(default)]
    pub tau_min: Option<f64>,
    /// Defaults to `5T`.
    #[serde(default)]
    pub tau_max: Option<f64>,
    #[serde(default = "default_tau_points")]
    pub points: usize,
    /// Single-photon detuning `Δ₀` in rad/µs; defaults to 2π·10 MHz.
    #[serde(default)]
    pub delta0: Option<f64>,
    #[serde(default)]
    pub config: StirapConfig,
    #[serde(default)]
    pub output_path: Option<PathBuf>,
}

/// Cavity state to analyse.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum StateSpec {
    Cat { alpha: f64, parity: Parity },
    /// `(Ê†)^k` applied exactly to a cat, renormalized.
    ShiftedCat { alpha: f64, parity: Parity, k: usize },
    Coherent { re: f64, im: f64 },
    Fock(usize),
}

impl StateSpec {
    pub fn ket(&self, cavity_dim: usize) -> cat_amp::Result<FockKet> {
        match self {
            StateSpec::Cat { alpha, parity } => cat_ket(&CatSpec::real(*alpha, *parity)?, cavity_dim),
            StateSpec::ShiftedCat { alpha, parity, k } => {
                let cat = cat_ket(&CatSpec::real(*alpha, *parity)?, cavity_dim)?;
                cat.apply(&shift_op(cavity_dim, *k)?)?.normalized()
            }
            StateSpec::Coherent { re, im } => coherent_ket(C64::new(*re, *im), cavity_dim),
            StateSpec::Fock(n) => FockKet::fock(cavity_dim, *n),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WignerScenario {
    pub state: StateSpec,
    #[serde(default = "default_wigner_dim")]
    pub cavity_dim: usize,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default)]
    pub output_path: Option<PathBuf>,
}

/// A `cat-amp run` config, selected by its `mode` key.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum Scenario {
    TheoryGain(TheoryGain),
    TheoryCurve(TheoryCurve),
    Simulate(Simulate),
    StirapScan(StirapScan),
    Wigner(WignerScenario),
}

impl Scenario {
    pub fn parse(text: &str) -> Result<Self, Failure> {
        serde_json::from_str(text).map_err(|e| Failure::Schema(e.to_string()))
    }

    pub fn output_path(&self) -> Option<&PathBuf> {
        match self {
            Scenario::TheoryGain(s) => s.output_path.as_ref(),
            Scenario::TheoryCurve(s) => s.output_path.as_ref(),
            Scenario::Simulate(s) => s.output_path.as_ref(),
            Scenario::StirapScan(s) => s.output_path.as_ref(),
            Scenario::Wigner(s) => s.output_path.as_ref(),
        }
    }

    /// Overrides the cavity truncation where the mode has one.
    pub fn set_cavity_dim(&mut self, nc: usize) {
        match self {
            Scenario::TheoryGain(s) => s.cavity_dim = nc,
            Scenario::TheoryCurve(s) => s.cavity_dim = nc,
            Scenario::Simulate(s) => s.device.cavity_dim = nc,
            Scenario::StirapScan(s) => s.config.device.cavity_dim = nc,
            Scenario::Wigner(s) => s.cavity_dim = nc,
        }
    }

    /// Checks everything that can be checked without computing.
    pub fn validate(&self) -> Result<(), Failure> {
        match self {
            Scenario::TheoryGain(s) => {
                check_alpha(s.alpha, s.parity)?;
                check_k(s.k)
            }
            Scenario::TheoryCurve(s) => {
                check_alpha(s.alpha, s.parity)?;
                check_k(s.k)?;
                let (lo, hi) = s.range();
                if s.points < 2 || !(hi > lo) || !(lo > 0.0) {
                    return Err(Failure::Schema("theory-curve needs 0 < alpha_prime_min < alpha_prime_max and points >= 2".into()));
                }
                Ok(())
            }
            Scenario::Simulate(s) => {
                check_alpha(s.alpha, s.parity)?;
                check_k(s.k)?;
                s.protocol_config().map(|_| ())
            }
            Scenario::StirapScan(s) => {
                s.config.device.validate().map_err(Failure::schema)?;
                s.config.integrator.validate().map_err(Failure::schema)?;
                if s.points < 1 {
                    return Err(Failure::Schema("stirap-scan needs at least one point".into()));
                }
                Ok(())
            }
            Scenario::Wigner(s) => {
                s.grid.validate().map_err(Failure::schema)?;
                s.state.ket(s.cavity_dim).map(|_| ()).map_err(Failure::schema)
            }
        }
    }
}

fn check_alpha(alpha: f64, parity: Parity) -> Result<CatSpec, Failure> {
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(Failure::Schema(format!("alpha = {alpha} must be positive")));
    }
    CatSpec::real(alpha, parity).map_err(Failure::schema)
}

fn check_k(k: usize) -> Result<(), Failure> {
    if (1..=2).contains(&k) {
        Ok(())
    } else {
        Err(Failure::Schema(format!("k = {k} must be 1 or 2")))
    }
}

impl TheoryCurve {
    fn range(&self) -> (f64, f64) {
        (
            self.alpha_prime_min.unwrap_or(self.alpha),
            self.alpha_prime_max.unwrap_or(2.5 * self.alpha),
        )
    }
}

impl Simulate {
    pub fn protocol_config(&self) -> Result<ProtocolConfig, Failure> {
        let mut cfg = ProtocolConfig::new(self.device.clone(), &self.schedule).map_err(Failure::schema)?;
        cfg.sweep = self.sweep.clone();
        cfg.snap_mode = self.snap_mode;
        cfg.snap_placement = self.snap_placement;
        if let Some(p) = &self.snap_phases {
            cfg.snap_phases = p.clone();
        }
        cfg.reset_mode = self.reset_mode;
        cfg.sequential = self.sequential;
        if let Some(on) = self.decoherence_on {
            cfg.decoherence_on = on;
        }
        if let Some(i) = self.integrator {
            cfg.integrator = i;
        }
        cfg.validate().map_err(Failure::schema)?;
        if self.k == 2 && self.reset_mode == ResetMode::Skip {
            return Err(Failure::Schema("k = 2 needs reset_mode other than skip".into()));
        }
        Ok(cfg)
    }
}

impl StirapScan {
    pub fn taus(&self) -> Vec<f64> {
        let t = self.config.width;
        let lo = self.tau_min.unwrap_or(-5.0 * t);
        let hi = self.tau_max.unwrap_or(5.0 * t);
        if self.points == 1 {
            return vec![lo];
        }
        (0..self.points)
            .map(|i| lo + (hi - lo) * i as f64 / (self.points - 1) as f64)
            .collect()
    }
}

/// Prints `progress NN%` to stderr at every 5% step.
pub fn stderr_progress(label: &str) -> ProgressHook {
    let last = Arc::new(AtomicUsize::new(0));
    let label = label.to_string();
    ProgressHook::new(move |f| {
        let bucket = (f * 20.0).floor() as usize;
        if bucket > last.load(Ordering::Relaxed) {
            last.store(bucket, Ordering::Relaxed);
            eprintln!("{label}: {:>3}%", bucket * 5);
        }
    })
}

/// Runs a validated scenario, writing artifacts into `out`; returns the
/// small JSON summary for stdout.
pub fn execute(scenario: &Scenario, out: &mut OutputDir) -> Result<Value, Failure> {
    match scenario {
        Scenario::TheoryGain(s) => {
            let spec = check_alpha(s.alpha, s.parity)?;
            let g = optimal_gain(&spec, s.k, s.cavity_dim).map_err(Failure::numerical)?;
            let summary = json!({
                "alpha": s.alpha,
                "parity": s.parity,
                "k": s.k,
                "F_max": g.fidelity,
                "G": g.gain,
                "alpha_prime": g.alpha_prime,
            });
            out.write_json("theory_gain.json", &summary)?;
            Ok(summary)
        }
        Scenario::TheoryCurve(s) => {
            let spec = check_alpha(s.alpha, s.parity)?;
            let (lo, hi) = s.range();
            let grid: Vec<f64> = (0..s.points)
                .map(|i| lo + (hi - lo) * i as f64 / (s.points - 1) as f64)
                .collect();
            let curve = theory_curve(&spec, s.k, &grid, s.cavity_dim).map_err(Failure::numerical)?;
            let rows: Vec<Vec<f64>> = curve.iter().map(|&(ap, f)| vec![ap, ap / s.alpha, f]).collect();
            out.write_csv("theory_curve.csv", &["alpha_prime", "gain", "fidelity"], &rows)?;
            let (ap, f) = curve.iter().copied().fold((0.0, f64::MIN), |a, b| if b.1 > a.1 { b } else { a });
            Ok(json!({ "points": curve.len(), "grid_max_fidelity": f, "grid_max_alpha_prime": ap }))
        }
        Scenario::Simulate(s) => {
            let mut cfg = s.protocol_config()?;
            let calibration = if s.calibrate {
                eprintln!("calibrating tone-2 frequencies");
                Some(cfg.calibrate(s.k, &s.calibration).map_err(Failure::numerical)?)
            } else {
                None
            };
            let report = amplify_with_progress(s.alpha, s.parity, s.k, &cfg, Some(stderr_progress("simulate")))
                .map_err(Failure::numerical)?;
            let mut json_report = report.to_json(s.include_state).map_err(Failure::numerical)?;
            json_report["calibration"] = serde_json::to_value(&calibration).unwrap_or(Value::Null);
            out.write_json("report.json", &json_report)?;
            out.write_density("final_cavity_state.csv", &report.final_cavity_state)?;
            if let Some(grid) = &s.wigner {
                let w = wigner(&report.final_cavity_state, grid).map_err(Failure::numerical)?;
                write_wigner(out, "wigner.csv", &w)?;
            }
            Ok(json!({
                "fidelity_vs_target": report.fidelity_vs_target,
                "best_alpha_prime": report.best_alpha_prime,
                "gain": report.gain,
                "parity_expectation": report.parity_expectation,
                "warnings": report.warnings,
            }))
        }
        Scenario::StirapScan(s) => {
            let taus = s.taus();
            let delta0 = s.delta0.unwrap_or(cat_amp::units::mhz(10.0));
            let curve = stirap_scan(&taus, delta0, &s.config).map_err(Failure::numerical)?;
            let rows: Vec<Vec<f64>> = curve.iter().map(|&(t, e)| vec![t, e]).collect();
            out.write_csv("stirap_scan.csv", &["tau", "efficiency"], &rows)?;
            let best = curve.iter().map(|p| p.1).fold(0.0, f64::max);
            Ok(json!({ "points": curve.len(), "max_efficiency": best }))
        }
        Scenario::Wigner(s) => {
            let rho = s.state.ket(s.cavity_dim).map_err(Failure::schema)?.to_density();
            let w = wigner(&rho, &s.grid).map_err(Failure::numerical)?;
            write_wigner(out, "wigner.csv", &w)?;
            Ok(json!({
                "integral": w.integral(),
                "origin": w.nearest(0.0, 0.0),
                "points": w.x_axis.len() * w.p_axis.len(),
            }))
        }
    }
}

pub fn write_wigner(out: &mut OutputDir, name: &str, w: &cat_amp::wigner::WignerGrid) -> Result<(), Failure> {
    let mut rows = Vec::with_capacity(w.x_axis.len() * w.p_axis.len());
    for (i, x) in w.x_axis.iter().enumerate() {
        for (j, p) in w.p_axis.iter().enumerate() {
            rows.push(vec![*x, *p, w.values[i][j]]);
        }
    }
    out.write_csv(name, &["x", "p", "W"], &rows)?;
    Ok(())
}
