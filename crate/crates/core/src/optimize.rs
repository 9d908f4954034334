//! One-dimensional maximization helpers shared by the theory and protocol
//! fidelity scans.

use crate::error::{Error, Result};

const INV_PHI: f64 = 0.618_033_988_749_894_8;

/// Golden-section search for the maximum of a unimodal `f` on `[lo, hi]`.
pub fn golden_section_max<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, tol: f64) -> (f64, f64) {
    let (mut a, mut b) = (lo, hi);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    let fx = f(x);
    // keep the best point actually evaluated
    [(x, fx), (c, fc), (d, fd)]
        .into_iter()
        .fold((x, fx), |best, p| if p.1 > best.1 { p } else { best })
}

/// Evaluates `f` on a uniform grid.
pub fn grid<F: Fn(f64) -> f64 + Sync>(f: &F, lo: f64, hi: f64, step: f64) -> Vec<(f64, f64)> {
    use rayon::prelude::*;
    let n = ((hi - lo) / step).round() as usize;
    (0..=n)
        .into_par_iter()
        .map(|i| {
            let x = if i == n { hi } else { lo + step * i as f64 };
            (x, f(x))
        })
        .collect()
}

/// Coarse grid bracket followed by golden-section refinement. Fails when the
/// grid maximum sits on either end of the range.
pub fn bracketed_max<F: Fn(f64) -> f64 + Sync>(
    f: F,
    lo: f64,
    hi: f64,
    step: f64,
    tol: f64,
) -> Result<(f64, f64)> {
    let curve = grid(&f, lo, hi, step);
    let (imax, _) = curve
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, p)| if p.1 > acc.1 { (i, p.1) } else { acc });
    if imax == 0 || imax + 1 == curve.len() {
        return Err(Error::BracketFailure { curve });
    }
    let (x, fx) = golden_section_max(&f, curve[imax - 1].0, curve[imax + 1].0, tol);
    if fx >= curve[imax].1 {
        Ok((x, fx))
    } else {
        Ok(curve[imax])
    }
}
