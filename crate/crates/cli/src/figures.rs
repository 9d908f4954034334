//! Data behind the published figures.

use cat_amp::jc_model::DeviceParams;
use cat_amp::protocol::{amplify_with_progress, stirap_scan, CalibrationOptions, ProtocolConfig, StirapConfig};
use cat_amp::pulses::{FrequencyMode, ScheduleOptions};
use cat_amp::states::{cat_ket, optimal_gain, shift_op, theory_curve, CatSpec, Parity, THEORY_CAVITY_DIM};
use cat_amp::wigner::{wigner, GridSpec};
use cat_amp::DensityOp;
use clap::ValueEnum;
use serde_json::{json, Value};

use crate::output::OutputDir;
use crate::scenario::{stderr_progress, write_wigner, Failure};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Figure {
    Fig1,
    Fig3b,
    Fig4,
    Fig5,
}

impl Figure {
    pub fn name(self) -> &'static str {
        match self {
            Figure::Fig1 => "fig1",
            Figure::Fig3b => "fig3b",
            Figure::Fig4 => "fig4",
            Figure::Fig5 => "fig5",
        }
    }
}

/// Shared options of `cat-amp reproduce`.
#[derive(Clone, Copy, Debug)]
pub struct ReproduceOptions {
    pub cavity_dim: Option<usize>,
    pub fast: bool,
}

pub const FIG1_ALPHAS: [f64; 4] = [1.0, 1.5, 2.0, 2.5];

fn parity_name(p: Parity) -> &'static str {
    match p {
        Parity::Even => "even",
        Parity::Odd => "odd",
    }
}

fn gain_curve(
    out: &mut OutputDir,
    name: &str,
    alpha: f64,
    parity: Parity,
    k: usize,
    points: usize,
    nc: usize,
) -> Result<Value, Failure> {
    let spec = CatSpec::real(alpha, parity).map_err(Failure::schema)?;
    let (lo, hi) = (1.0, 2.5);
    let gains: Vec<f64> = (0..points).map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64).collect();
    let grid: Vec<f64> = gains.iter().map(|g| g * alpha).collect();
    let curve = theory_curve(&spec, k, &grid, nc).map_err(Failure::numerical)?;
    let rows: Vec<Vec<f64>> = curve.iter().map(|&(ap, f)| vec![ap / alpha, ap, f]).collect();
    out.write_csv(name, &["gain", "alpha_prime", "fidelity"], &rows)?;
    let best = optimal_gain(&spec, k, nc).map_err(Failure::numerical)?;
    Ok(json!({
        "alpha": alpha,
        "parity": parity_name(parity),
        "k": k,
        "F_max": best.fidelity,
        "G": best.gain,
        "alpha_prime": best.alpha_prime,
        "curve": name,
    }))
}

fn fig1(out: &mut OutputDir, opts: ReproduceOptions) -> Result<Value, Failure> {
    let nc = opts.cavity_dim.unwrap_or(THEORY_CAVITY_DIM);
    let points = if opts.fast { 61 } else { 301 };
    let mut curves = Vec::new();
    for parity in [Parity::Even, Parity::Odd] {
        for alpha in FIG1_ALPHAS {
            let name = format!("fig1/{}_alpha{alpha:.1}.csv", parity_name(parity));
            curves.push(gain_curve(out, &name, alpha, parity, 2, points, nc)?);
        }
    }
    let summary = json!({ "figure": "fig1", "k": 2, "curves": curves });
    out.write_json("fig1/summary.json", &summary)?;
    Ok(summary)
}

fn fig3b(out: &mut OutputDir, opts: ReproduceOptions) -> Result<Value, Failure> {
    let nc = opts.cavity_dim.unwrap_or(THEORY_CAVITY_DIM);
    let points = if opts.fast { 61 } else { 301 };
    let k1 = gain_curve(out, "fig3b/theory_k1.csv", 1.5, Parity::Even, 1, points, nc)?;
    let k2 = gain_curve(out, "fig3b/theory_k2.csv", 1.5, Parity::Even, 2, points, nc)?;
    let summary = json!({ "figure": "fig3b", "markers": [k1, k2] });
    out.write_json("fig3b/summary.json", &summary)?;
    Ok(summary)
}

struct Panel {
    label: &'static str,
    description: &'static str,
    expected_sign: f64,
    state: DensityOp,
}

fn ideal_panel(alpha: f64, k: usize, nc: usize) -> Result<DensityOp, Failure> {
    let cat = cat_ket(&CatSpec::real(alpha, Parity::Even).map_err(Failure::schema)?, nc).map_err(Failure::schema)?;
    if k == 0 {
        return Ok(cat.to_density());
    }
    let shifted = cat
        .apply(&shift_op(nc, k).map_err(Failure::numerical)?)
        .and_then(|s| s.normalized())
        .map_err(Failure::numerical)?;
    Ok(shifted.to_density())
}

fn simulated_panel(k: usize, kappa_khz: f64, nc: usize) -> Result<DensityOp, Failure> {
    let device = DeviceParams::default().with_cavity_dim(nc).with_decoherence_khz(kappa_khz);
    let schedule = ScheduleOptions {
        frequencies: FrequencyMode::Derived,
        ..ScheduleOptions::default()
    };
    let mut cfg = ProtocolConfig::new(device, &schedule).map_err(Failure::schema)?;
    eprintln!("calibrating tone-2 frequencies");
    cfg.calibrate(k, &CalibrationOptions::default()).map_err(Failure::numerical)?;
    let label = format!("k={k} kappa={kappa_khz} kHz");
    let report = amplify_with_progress(1.5, Parity::Even, k, &cfg, Some(stderr_progress(&label)))
        .map_err(Failure::numerical)?;
    Ok(report.final_cavity_state)
}

fn fig4(out: &mut OutputDir, opts: ReproduceOptions) -> Result<Value, Failure> {
    let nc = opts.cavity_dim.unwrap_or(if opts.fast { 16 } else { 20 });
    let grid = if opts.fast {
        GridSpec {
            nx: 41,
            np: 41,
            ..GridSpec::default()
        }
    } else {
        GridSpec::default()
    };
    let (b, c, d) = if opts.fast {
        (ideal_panel(1.5, 1, nc)?, ideal_panel(1.5, 2, nc)?, ideal_panel(1.5, 2, nc)?)
    } else {
        (
            simulated_panel(1, 0.0, nc)?,
            simulated_panel(2, 0.0, nc)?,
            simulated_panel(2, 0.25, nc)?,
        )
    };
    let panels = [
        Panel {
            label: "a",
            description: "input even cat, alpha = 1.5",
            expected_sign: 1.0,
            state: ideal_panel(1.5, 0, nc)?,
        },
        Panel {
            label: "b",
            description: "one shift, decoherence-free",
            expected_sign: -1.0,
            state: b,
        },
        Panel {
            label: "c",
            description: "two shifts, decoherence-free",
            expected_sign: 1.0,
            state: c,
        },
        Panel {
            label: "d",
            description: "two shifts, kappa/2pi = 0.25 kHz",
            expected_sign: 1.0,
            state: d,
        },
    ];
    let mut entries = Vec::new();
    for p in &panels {
        let w = wigner(&p.state, &grid).map_err(Failure::numerical)?;
        let dens = format!("fig4/panel_{}_density.csv", p.label);
        let wig = format!("fig4/panel_{}_wigner.csv", p.label);
        out.write_density(&dens, &p.state)?;
        write_wigner(out, &wig, &w)?;
        let center = w.nearest(0.0, 0.0);
        entries.push(json!({
            "panel": p.label,
            "description": p.description,
            "central_fringe": center,
            "expected_sign": p.expected_sign,
            "sign_ok": center * p.expected_sign > 0.0,
            "density": dens,
            "wigner": wig,
        }));
    }
    let summary = json!({
        "figure": "fig4",
        "source": if opts.fast { "exact shift operator" } else { "simulated protocol" },
        "panels": entries,
    });
    out.write_json("fig4/summary.json", &summary)?;
    Ok(summary)
}

/// `max |eff(τ) − eff(−τ)|` over a grid symmetric about zero.
pub fn asymmetry(curve: &[(f64, f64)]) -> f64 {
    let n = curve.len();
    (0..n / 2).map(|i| (curve[i].1 - curve[n - 1 - i].1).abs()).fold(0.0, f64::max)
}

fn fig5(out: &mut OutputDir, opts: ReproduceOptions) -> Result<Value, Failure> {
    let mut cfg = StirapConfig::default();
    if let Some(nc) = opts.cavity_dim {
        cfg.device.cavity_dim = nc;
    }
    let points = if opts.fast { 21 } else { 81 };
    let t = cfg.width;
    let taus: Vec<f64> = (0..points)
        .map(|i| -5.0 * t + 10.0 * t * i as f64 / (points - 1) as f64)
        .collect();
    let curve = stirap_scan(&taus, cat_amp::units::mhz(10.0), &cfg).map_err(Failure::numerical)?;
    let rows: Vec<Vec<f64>> = curve.iter().map(|&(a, b)| vec![a, b]).collect();
    out.write_csv("fig5/stirap_scan.csv", &["tau", "efficiency"], &rows)?;
    let summary = json!({
        "figure": "fig5",
        "points": points,
        "max_efficiency": curve.iter().map(|p| p.1).fold(0.0, f64::max),
        "asymmetry": asymmetry(&curve),
        "efficiency_at_plus_5T": curve.last().map(|p| p.1),
    });
    out.write_json("fig5/summary.json", &summary)?;
    Ok(summary)
}

pub fn reproduce(figure: Figure, out: &mut OutputDir, opts: ReproduceOptions) -> Result<Value, Failure> {
    match figure {
        Figure::Fig1 => fig1(out, opts),
        Figure::Fig3b => fig3b(out, opts),
        Figure::Fig4 => fig4(out, opts),
        Figure::Fig5 => fig5(out, opts),
    }
}
