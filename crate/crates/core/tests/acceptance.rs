//! Acceptance criteria. Each test prints one `[PASS]`/`[FAIL]` line to the
//! real stdout, then asserts. The decoherent runs form the slow suite:
//! `cargo test --test acceptance -- --ignored`.

use std::f64::consts::PI;
use std::io::Write;
use std::sync::{Mutex, MutexGuard, OnceLock};
use std::time::{Duration, Instant};

use cat_amp::hamiltonian::{Detuning, DrivenJc, StaticHamiltonian};
use cat_amp::hilbert::{BasisDims, OpMatrix, EXCITED, GROUND};
use cat_amp::lindblad::{evolve, evolve_pure, EvolveOptions};
use cat_amp::ode::IntegratorConfig;
use cat_amp::protocol::{
    amplify, calibrate_tone2_offsets, shift_evidence, stirap_scan, AmplificationReport, CalibrationOptions, ProtocolConfig, StirapConfig,
};
use cat_amp::pulses::{table_consistency, FrequencyMode, ScheduleOptions};
use cat_amp::states::{cat_ket, coherent_ket, optimal_gain, shift_op, CatSpec, FidelityWith, Parity, THEORY_CAVITY_DIM};
use cat_amp::units::mhz;
use cat_amp::wigner::wigner_point;
use cat_amp::{DensityOp, DeviceParams, FockKet, C64};

const PROTOCOL_NC: usize = 20;
/// Converged truncation for the clean two-round run; at 20 the top levels
/// pass the truncation alarm.
const DOUBLE_NC: usize = 30;
const ALPHA: f64 = 1.5;

/// Runs criteria one at a time so wall-clock budgets are meaningful.
fn serial() -> MutexGuard<'static, ()> {
    static LOCK: Mutex<()> = Mutex::new(());
    LOCK.lock().unwrap_or_else(|e| e.into_inner())
}

fn verdict(name: &str, pass: bool, detail: &str) {
    let tag = if pass { "PASS" } else { "FAIL" };
    let mut out = std::io::stdout().lock();
    writeln!(out, "[{tag}] {name}: {detail}").unwrap();
    out.flush().unwrap();
    assert!(pass, "{name}: {detail}");
}

fn secs(d: Duration) -> f64 {
    d.as_secs_f64()
}

/// Calibrated setup: schedules and the time spent on each round's
/// calibration.
struct Calibrated {
    config: ProtocolConfig,
    first: Duration,
    second: Duration,
}

/// Derived-frequency schedules with tone-2 frequencies tuned under the full
/// drive.
fn calibrated_config(kappa_khz: f64) -> Calibrated {
    let device = DeviceParams::default().with_cavity_dim(PROTOCOL_NC).with_decoherence_khz(kappa_khz);
    let options = ScheduleOptions {
        frequencies: FrequencyMode::Derived,
        ..ScheduleOptions::default()
    };
    let mut config = ProtocolConfig::new(device, &options).unwrap();
    let calibration = CalibrationOptions::default();
    let start = Instant::now();
    config.calibrate(1, &calibration).unwrap();
    let first = start.elapsed();
    let start = Instant::now();
    let (second, _) = calibrate_tone2_offsets(&config.schedule_second, &config.device, &calibration).unwrap();
    config.schedule_second = second;
    Calibrated {
        config,
        first,
        second: start.elapsed(),
    }
}

fn clean_config() -> &'static Calibrated {
    static CFG: OnceLock<Calibrated> = OnceLock::new();
    CFG.get_or_init(|| calibrated_config(0.0))
}

/// Protocol run outcome; errors such as truncation alarms are kept as text.
type Run = Result<AmplificationReport, String>;

fn clean_run(k: usize) -> &'static Run {
    static RUNS: [OnceLock<Run>; 2] = [OnceLock::new(), OnceLock::new()];
    RUNS[k - 1].get_or_init(|| {
        let mut config = clean_config().config.clone();
        if k == 2 {
            config.device.cavity_dim = DOUBLE_NC;
        }
        amplify(ALPHA, Parity::Even, k, &config).map_err(|e| format!("k={k} run failed: {e}"))
    })
}

fn input_cat(nc: usize) -> DensityOp {
    cat_ket(&CatSpec::real(ALPHA, Parity::Even).unwrap(), nc).unwrap().to_density()
}

fn central_fringe(rho: &DensityOp) -> f64 {
    wigner_point(rho, C64::new(0.0, 0.0)).unwrap()
}

#[test]
fn theory_fidelities() {
    let _g = serial();
    let start = Instant::now();
    let alphas = [1.0, 1.5, 2.0, 2.5];
    let expected = [
        (Parity::Even, [0.854, 0.947, 0.974, 0.988], [1.725, 1.377, 1.229, 1.151]),
        (Parity::Odd, [0.681, 0.866, 0.960, 0.987], [1.902, 1.422, 1.235, 1.151]),
    ];
    let (mut worst_f, mut worst_g) = (0.0f64, 0.0f64);
    for (parity, fs, gs) in expected {
        for (i, &alpha) in alphas.iter().enumerate() {
            let r = optimal_gain(&CatSpec::real(alpha, parity).unwrap(), 2, THEORY_CAVITY_DIM).unwrap();
            worst_f = worst_f.max((r.fidelity - fs[i]).abs());
            worst_g = worst_g.max((r.gain - gs[i]).abs());
        }
    }
    let t = secs(start.elapsed());
    verdict(
        "theory fidelities",
        worst_f <= 0.002 && worst_g <= 0.01 && t < 5.0,
        &format!("max |dF| = {worst_f:.4} (tol 0.002), max |dG| = {worst_g:.4} (tol 0.01), {t:.2} s (limit 5 s)"),
    );
}

#[test]
fn single_shift_theory() {
    let _g = serial();
    let start = Instant::now();
    let r = optimal_gain(&CatSpec::real(ALPHA, Parity::Even).unwrap(), 1, THEORY_CAVITY_DIM).unwrap();
    let t = secs(start.elapsed());
    verdict(
        "single-shift theory",
        r.fidelity > 0.99 && (r.alpha_prime - 1.78).abs() <= 0.02 && t < 1.0,
        &format!("F = {:.4} (> 0.99), alpha' = {:.4} (1.78 +- 0.02), {t:.2} s (limit 1 s)", r.fidelity, r.alpha_prime),
    );
}

#[test]
fn table_internal_consistency() {
    let _g = serial();
    let start = Instant::now();
    let rows = table_consistency(&DeviceParams::default()).unwrap();
    let mut bad = Vec::new();
    for r in rows.iter().filter(|r| !r.known_outlier) {
        if r.two_photon_residual_mhz.abs() >= 2.0 {
            bad.push(format!("n={} two-photon residual {:.3} MHz", r.manifold, r.two_photon_residual_mhz));
        }
        if r.delta_error_mhz().abs() >= 1.5 {
            bad.push(format!("n={} delta error {:.3} MHz", r.manifold, r.delta_error_mhz()));
        }
    }
    let t = secs(start.elapsed());
    let detail = if bad.is_empty() {
        format!("{} rows checked, {t:.3} s", rows.len() - 1)
    } else {
        format!("{} (tol 2 MHz / 1.5 MHz)", bad.join("; "))
    };
    verdict("table internal consistency", bad.is_empty() && t < 1.0, &detail);
}

#[test]
fn decoherence_free_protocol() {
    let _g = serial();
    let calibration = secs(clean_config().first);
    let report = match clean_run(1) {
        Ok(r) => r,
        Err(e) => return verdict("decoherence-free protocol", false, e),
    };
    let t = calibration + report.runtime_seconds;
    verdict(
        "decoherence-free protocol",
        report.fidelity_vs_target >= 0.92 && t <= 300.0,
        &format!(
            "F = {:.4} at alpha' = {:.3} (>= 0.92), calibration {:.0} s, total {t:.0} s (limit 300 s)",
            report.fidelity_vs_target,
            report.best_alpha_prime,
            calibration
        ),
    );
}

#[test]
fn shift_evidence_criterion() {
    let _g = serial();
    let nc = DOUBLE_NC;
    let rho_in = input_cat(nc);
    let exact = cat_ket(&CatSpec::real(ALPHA, Parity::Even).unwrap(), nc)
        .unwrap()
        .apply(&shift_op(nc, 2).unwrap())
        .unwrap()
        .to_density();
    let oracle = shift_evidence(&rho_in, &exact, 2).unwrap();
    let oracle_ok = oracle.residual == 0.0 && oracle.leakage == 0.0;
    let oracle_text = format!("oracle residual {:e}, leakage {:e}", oracle.residual, oracle.leakage);
    match clean_run(2) {
        Ok(run) => {
            let sim = shift_evidence(&rho_in, &run.final_cavity_state, 2).unwrap();
            verdict(
                "shift evidence",
                oracle_ok && sim.magnitude_residual < 0.1,
                &format!(
                    "{oracle_text}; simulated (E+)^2 magnitude residual {:.4} (< 0.1), leakage {:.2e}",
                    sim.magnitude_residual, sim.leakage
                ),
            );
        }
        Err(e) => verdict("shift evidence", false, &format!("{oracle_text}; {e}")),
    }
}

#[test]
fn stirap_symmetry() {
    let _g = serial();
    let start = Instant::now();
    let cfg = StirapConfig::default();
    let t_w = cfg.width;
    let points = 81;
    let taus: Vec<f64> = (0..points).map(|i| -5.0 * t_w + 10.0 * t_w * i as f64 / (points - 1) as f64).collect();
    let curve = stirap_scan(&taus, mhz(10.0), &cfg).unwrap();
    let elapsed = secs(start.elapsed());
    let asym = (0..points / 2).map(|i| (curve[i].1 - curve[points - 1 - i].1).abs()).fold(0.0, f64::max);
    let lo = (2f64.sqrt() - 1.0) * t_w;
    let plateau = curve
        .iter()
        .filter(|(tau, _)| tau.abs() > lo && tau.abs() <= t_w)
        .map(|p| p.1)
        .fold(1.0, f64::min);
    let tail = curve[0].1.max(curve[points - 1].1);
    verdict(
        "STIRAP symmetry",
        plateau > 0.95 && asym <= 0.02 && tail < 0.5 && elapsed <= 180.0,
        &format!(
            "plateau min {plateau:.4} over {lo:.2} < |tau| <= {t_w:.2} (> 0.95), max |eff(tau) - eff(-tau)| = {asym:.4} (<= 0.02), eff(+-5T) = {tail:.2e} (< 0.5), {elapsed:.0} s (limit 180 s)"
        ),
    );
}

#[test]
fn property_suites() {
    let _g = serial();
    let mut failures = Vec::new();

    // Invariants on every snapshot of a decaying driven run.
    let nc = 6;
    let p = DeviceParams {
        kappa: 0.4,
        gamma_minus: 0.6,
        gamma_phi: 0.5,
        ..DeviceParams::default().with_cavity_dim(nc)
    };
    let h = DrivenJc::new(&p, Detuning::Constant(3.0), None).unwrap();
    let rho0 = FockKet::joint(EXCITED, 3, nc).unwrap().to_density();
    let opts = EvolveOptions::default()
        .with_integrator(IntegratorConfig::adaptive(1e-9, 1e-11).with_stride(10))
        .storing_all();
    let traj = evolve(&rho0, &h, &p, (0.0, 0.1), &opts).unwrap();
    let bad = traj.states.iter().filter(|s| s.to_density().check(&opts.tolerance).is_err()).count();
    if bad > 0 {
        failures.push(format!("{bad}/{} snapshots violate invariants", traj.states.len()));
    }

    // Parity flips under one shift.
    for alpha in [0.5, 1.0, 1.5, 2.0, 2.5] {
        for parity in [Parity::Even, Parity::Odd] {
            let ket = cat_ket(&CatSpec::real(alpha, parity).unwrap(), 30).unwrap();
            let out = ket.apply(&shift_op(30, 1).unwrap()).unwrap();
            let wrong: f64 = out
                .populations()
                .iter()
                .enumerate()
                .filter(|(n, _)| parity.matches(*n))
                .map(|(_, q)| q)
                .sum();
            if wrong != 0.0 {
                failures.push(format!("shift of alpha={alpha} cat leaves {wrong:e} in the input parity"));
            }
        }
    }

    // Coherent decay against the closed form.
    let nc = 20;
    let mut pk = DeviceParams::default().with_cavity_dim(nc);
    pk.kappa = 0.9;
    let alpha = C64::new(1.0, 0.0);
    let zero = StaticHamiltonian::new(&OpMatrix::zeros(BasisDims::cavity(nc)));
    let start = coherent_ket(alpha, nc).unwrap().to_density();
    let t = 1.3;
    let decayed = evolve(&start, &zero, &pk, (0.0, t), &EvolveOptions::default()).unwrap();
    let expected = coherent_ket(alpha * (-pk.kappa * t / 2.0).exp(), nc).unwrap();
    let f_decay = decayed.final_state().fidelity_with(&expected).unwrap();
    if f_decay < 1.0 - 1e-6 {
        failures.push(format!("coherent decay fidelity {f_decay}"));
    }

    // Vacuum Rabi period: |e,0> -> |g,1> at pi/(2 lambda), back at pi/lambda.
    let pv = DeviceParams::default().with_cavity_dim(4);
    let hv = DrivenJc::new(&pv, Detuning::Constant(0.0), None).unwrap();
    let tight = EvolveOptions::default().with_integrator(IntegratorConfig::adaptive(1e-10, 1e-12));
    let e0 = FockKet::joint(EXCITED, 0, 4).unwrap();
    let g1 = FockKet::joint(GROUND, 1, 4).unwrap();
    let half = evolve_pure(&e0, &hv, &pv, (0.0, PI / (2.0 * pv.lambda)), &tight).unwrap();
    let full = evolve_pure(&e0, &hv, &pv, (0.0, PI / pv.lambda), &tight).unwrap();
    let (f_half, f_full) = (
        half.final_state().fidelity_with(&g1).unwrap(),
        full.final_state().fidelity_with(&e0).unwrap(),
    );
    if f_half < 1.0 - 1e-6 || f_full < 1.0 - 1e-6 {
        failures.push(format!("vacuum Rabi fidelities {f_half}, {f_full}"));
    }

    // RK4 convergence order on a dissipative run.
    let nc = 4;
    let pr = DeviceParams {
        kappa: 0.5,
        gamma_minus: 0.3,
        gamma_phi: 0.2,
        lambda: 2.0,
        ..DeviceParams::default().with_cavity_dim(nc)
    };
    let hr = DrivenJc::new(&pr, Detuning::Constant(1.0), None).unwrap();
    let r0 = FockKet::joint(EXCITED, 1, nc).unwrap().to_density();
    let run = |cfg: IntegratorConfig| {
        evolve(&r0, &hr, &pr, (0.0, 1.0), &EvolveOptions::default().with_integrator(cfg))
            .unwrap()
            .final_state()
            .to_density()
    };
    let reference = run(IntegratorConfig::adaptive(1e-13, 1e-15));
    let err = |dt: f64| (run(IntegratorConfig::fixed_rk4(dt)).matrix() - reference.matrix()).norm();
    let order = (err(0.04) / err(0.02)).log2();
    if order < 3.8 {
        failures.push(format!("RK4 order {order:.3}"));
    }

    let detail = if failures.is_empty() {
        format!(
            "{} snapshots valid, parity flip exact, decay F = {f_decay:.9}, Rabi F = {f_half:.9}/{f_full:.9}, RK4 order {order:.2}",
            traj.states.len()
        )
    } else {
        failures.join("; ")
    };
    verdict("property suites", failures.is_empty(), &detail);
}

#[test]
fn fig4_central_fringe_signs() {
    let _g = serial();
    let a = central_fringe(&input_cat(PROTOCOL_NC));
    let fringe = |run: &'static Run| run.as_ref().map(|r| (central_fringe(&r.final_cavity_state), r.runtime_seconds));
    let (b, c) = (fringe(clean_run(1)), fringe(clean_run(2)));
    let show = |v: &Result<(f64, f64), &'static String>| match v {
        Ok((w, t)) => format!("{w:+.4} in {t:.0} s"),
        Err(e) => e.to_string(),
    };
    verdict(
        "central fringe signs (a-c)",
        a > 0.0 && matches!(b, Ok((w, _)) if w < 0.0) && matches!(c, Ok((w, _)) if w > 0.0),
        &format!(
            "W(0): a {a:+.4} (+), b {} (-), c {} (+); calibration {:.0} s",
            show(&b),
            show(&c),
            secs(clean_config().first + clean_config().second)
        ),
    );
}

#[test]
#[ignore = "slow suite: two Lindblad runs at Nc = 20"]
fn decoherent_protocol() {
    let _g = serial();
    let start = Instant::now();
    let calibrated = calibrated_config(0.25);
    let cfg = &calibrated.config;
    let single = amplify(ALPHA, Parity::Even, 1, cfg).map_err(|e| format!("k=1 run failed: {e}"));
    let double = amplify(ALPHA, Parity::Even, 2, cfg).map_err(|e| format!("k=2 run failed: {e}"));
    let t = secs(start.elapsed());
    let writer = |name: &str, pass: bool, detail: String| {
        let tag = if pass { "PASS" } else { "FAIL" };
        writeln!(std::io::stdout().lock(), "[{tag}] {name}: {detail}").unwrap();
        pass
    };
    let fringe = match &double {
        Ok(r) => {
            let d = central_fringe(&r.final_cavity_state);
            writer("central fringe sign (d)", d > 0.0, format!("W(0) = {d:+.4} (+)"))
        }
        Err(e) => writer("central fringe sign (d)", false, e.clone()),
    };
    let k1 = match &single {
        Ok(r) => ((r.fidelity_vs_target - 0.90).abs() <= 0.05, format!("k=1 F = {:.4} (0.90 +- 0.05)", r.fidelity_vs_target)),
        Err(e) => (false, e.clone()),
    };
    let k2 = match &double {
        Ok(r) => (
            (r.fidelity_vs_target - 0.80).abs() <= 0.07 && (r.gain - 1.33).abs() <= 0.07,
            format!("k=2 F = {:.4} (0.80 +- 0.07), G = {:.3} (1.33 +- 0.07)", r.fidelity_vs_target, r.gain),
        ),
        Err(e) => (false, e.clone()),
    };
    verdict(
        "decoherent protocol",
        k1.0 && k2.0 && fringe && t <= 2400.0,
        &format!(
            "{}, {}, calibration {:.0} s, total {t:.0} s (limit 2400 s)",
            k1.1,
            k2.1,
            secs(calibrated.first + calibrated.second)
        ),
    );
}
