//! Coherent and cat states, the photon-shift operator and the ideal
//! shift-amplification analysis.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{BasisDims, CMatrix, CVector, DensityOp, FockKet, OpMatrix, QuantumState, C64};
use crate::optimize::bracketed_max;

/// Tail population allowed when building a coherent or cat ket.
pub const DEFAULT_TAIL_TOL: f64 = 1e-8;
/// Stricter tail bound applied to theory-mode inputs.
pub const THEORY_TAIL_TOL: f64 = 1e-10;
/// Cavity truncation used by the theory computations.
pub const THEORY_CAVITY_DIM: usize = 40;

const GAIN_RANGE: (f64, f64) = (1.0, 3.0);
const GAIN_GRID_STEP: f64 = 0.01;
const GAIN_TOL: f64 = 1e-4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    pub fn sign(self) -> f64 {
        match self {
            Parity::Even => 1.0,
            Parity::Odd => -1.0,
        }
    }

    pub fn flipped(self) -> Parity {
        match self {
            Parity::Even => Parity::Odd,
            Parity::Odd => Parity::Even,
        }
    }

    /// Parity after shifting the photon number by `k`.
    pub fn after_shift(self, k: usize) -> Parity {
        if k % 2 == 0 {
            self
        } else {
            self.flipped()
        }
    }

    pub fn matches(self, n: usize) -> bool {
        (n % 2 == 0) == (self == Parity::Even)
    }
}

impl std::fmt::Display for Parity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Parity::Even => "even",
            Parity::Odd => "odd",
        })
    }
}

impl std::str::FromStr for Parity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "even" | "+" => Ok(Parity::Even),
            "odd" | "-" => Ok(Parity::Odd),
            other => Err(Error::InvalidParameter(format!("unknown parity {other:?}"))),
        }
    }
}

/// Cat state `N±(|α⟩ ± |−α⟩)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CatSpec {
    pub alpha: C64,
    pub parity: Parity,
}

impl CatSpec {
    pub fn new(alpha: C64, parity: Parity) -> Result<Self> {
        let spec = Self { alpha, parity };
        spec.validate()?;
        Ok(spec)
    }

    pub fn real(alpha: f64, parity: Parity) -> Result<Self> {
        Self::new(C64::new(alpha, 0.0), parity)
    }

    fn validate(&self) -> Result<()> {
        if !self.alpha.re.is_finite() || !self.alpha.im.is_finite() {
            return Err(Error::InvalidParameter("alpha must be finite".into()));
        }
        if self.parity == Parity::Odd && self.alpha.norm() == 0.0 {
            return Err(Error::UndefinedState("odd cat state is undefined at alpha = 0".into()));
        }
        Ok(())
    }

    /// `N±_α = [2(1 ± e^{−2|α|²})]^{−1/2}`.
    pub fn normalization(&self) -> f64 {
        let overlap = (-2.0 * self.alpha.norm_sqr()).exp();
        (2.0 * (1.0 + self.parity.sign() * overlap)).powf(-0.5)
    }
}

/// Outcome of the gain optimization.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GainResult {
    pub alpha: f64,
    pub gain: f64,
    pub fidelity: f64,
    pub alpha_prime: f64,
}

/// Untruncated Poisson amplitudes `e^{−|α|²/2} αⁿ/√(n!)` for `n < len`.
fn coherent_amplitudes(alpha: C64, len: usize) -> Vec<C64> {
    let mut out = Vec::with_capacity(len);
    let mut c = C64::new((-0.5 * alpha.norm_sqr()).exp(), 0.0);
    for n in 0..len {
        if n > 0 {
            c = c * alpha / (n as f64).sqrt();
        }
        out.push(c);
    }
    out
}

/// Population of `|α⟩` on Fock levels `n ≥ cavity_dim`, and the smallest
/// truncation that brings it below `tol`.
pub fn coherent_tail(alpha: C64, cavity_dim: usize, tol: f64) -> (f64, usize) {
    let mean = alpha.norm_sqr();
    let n_max = cavity_dim.max((mean + 12.0 * mean.sqrt() + 40.0).ceil() as usize);
    let mut probs = Vec::with_capacity(n_max + 1);
    let mut c = (-0.5 * mean).exp();
    for n in 0..=n_max {
        if n > 0 {
            c *= alpha.norm() / (n as f64).sqrt();
        }
        probs.push(c * c);
    }
    let tail: f64 = probs[cavity_dim.min(n_max)..].iter().sum();
    let mut suffix = 0.0;
    let mut required = n_max + 1;
    for n in (0..=n_max).rev() {
        suffix += probs[n];
        if suffix >= tol {
            required = n + 1;
            break;
        }
        required = n;
    }
    (tail, required.max(1))
}

fn tail_guard(alpha: C64, cavity_dim: usize, tol: f64) -> Result<()> {
    let (tail, required) = coherent_tail(alpha, cavity_dim, tol);
    if tail >= tol {
        return Err(Error::TruncationTooSmall {
            tail,
            cavity_dim,
            required: required.max(cavity_dim + 1),
        });
    }
    Ok(())
}

/// Coherent state `|α⟩`, renormalized after truncation.
pub fn coherent_ket(alpha: C64, cavity_dim: usize) -> Result<FockKet> {
    coherent_ket_with_tol(alpha, cavity_dim, DEFAULT_TAIL_TOL)
}

pub fn coherent_ket_with_tol(alpha: C64, cavity_dim: usize, tail_tol: f64) -> Result<FockKet> {
    if cavity_dim == 0 {
        return Err(Error::InvalidDimension { what: "cavity_dim", dim: 0 });
    }
    tail_guard(alpha, cavity_dim, tail_tol)?;
    let amps = coherent_amplitudes(alpha, cavity_dim);
    FockKet::new(CVector::from_vec(amps), BasisDims::cavity(cavity_dim))?.normalized()
}

/// Cat amplitudes with the analytic normalization and no truncation
/// renormalization. Used as fidelity targets, where the overlap with a state
/// supported below `cavity_dim` is then exact.
pub fn cat_amplitudes(spec: &CatSpec, cavity_dim: usize) -> Result<Vec<C64>> {
    spec.validate()?;
    let norm = spec.normalization();
    Ok(coherent_amplitudes(spec.alpha, cavity_dim)
        .into_iter()
        .enumerate()
        .map(|(n, c)| {
            // c_n (1 ± (−1)ⁿ) vanishes off the parity sector
            if spec.parity.matches(n) {
                c * (2.0 * norm)
            } else {
                C64::new(0.0, 0.0)
            }
        })
        .collect())
}

/// Cat state `N±(|α⟩ ± |−α⟩)`, renormalized after truncation.
pub fn cat_ket(spec: &CatSpec, cavity_dim: usize) -> Result<FockKet> {
    cat_ket_with_tol(spec, cavity_dim, DEFAULT_TAIL_TOL)
}

pub fn cat_ket_with_tol(spec: &CatSpec, cavity_dim: usize, tail_tol: f64) -> Result<FockKet> {
    spec.validate()?;
    if cavity_dim == 0 {
        return Err(Error::InvalidDimension { what: "cavity_dim", dim: 0 });
    }
    tail_guard(spec.alpha, cavity_dim, tail_tol)?;
    let amps = cat_amplitudes(spec, cavity_dim)?;
    FockKet::new(CVector::from_vec(amps), BasisDims::cavity(cavity_dim))?.normalized()
}

/// Target ket for fidelity evaluation: analytic normalization, truncated.
pub fn cat_target(spec: &CatSpec, cavity_dim: usize) -> Result<FockKet> {
    FockKet::new(
        CVector::from_vec(cat_amplitudes(spec, cavity_dim)?),
        BasisDims::cavity(cavity_dim),
    )
}

/// Photon-shift operator `Σ_m |m+k⟩⟨m|` on the truncated space.
pub fn shift_op(cavity_dim: usize, k: usize) -> Result<OpMatrix> {
    if k == 0 {
        return Err(Error::InvalidParameter("shift power must be positive".into()));
    }
    if k >= cavity_dim {
        return Err(Error::ShiftOutOfRange { k, cavity_dim });
    }
    let mut m = CMatrix::zeros(cavity_dim, cavity_dim);
    for src in 0..cavity_dim - k {
        m[(src + k, src)] = C64::new(1.0, 0.0);
    }
    OpMatrix::new(m, BasisDims::cavity(cavity_dim))
}

/// Fidelity against a pure target: `|⟨b|a⟩|²` or `⟨b|ρ|b⟩`.
pub trait FidelityWith {
    fn fidelity_with(&self, target: &FockKet) -> Result<f64>;
}

impl FidelityWith for FockKet {
    fn fidelity_with(&self, target: &FockKet) -> Result<f64> {
        Ok(target.inner(self)?.norm_sqr())
    }
}

impl FidelityWith for DensityOp {
    fn fidelity_with(&self, target: &FockKet) -> Result<f64> {
        if self.dim() != target.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: target.dim(),
            });
        }
        let b = target.amplitudes();
        Ok(b.dotc(&(self.matrix() * b)).re)
    }
}

impl FidelityWith for QuantumState {
    fn fidelity_with(&self, target: &FockKet) -> Result<f64> {
        match self {
            QuantumState::Pure(k) => k.fidelity_with(target),
            QuantumState::Mixed(r) => r.fidelity_with(target),
        }
    }
}

pub fn fidelity<S: FidelityWith + ?Sized>(state: &S, target: &FockKet) -> Result<f64> {
    state.fidelity_with(target)
}

/// Shifted input `(Ê†)^k |SC_α⟩` evaluated on a truncation large enough
/// for the theory guard.
fn shifted_cat(spec: &CatSpec, k: usize, cavity_dim: usize) -> Result<FockKet> {
    let input = cat_ket_with_tol(spec, cavity_dim - k, THEORY_TAIL_TOL).map_err(|e| match e {
        Error::TruncationTooSmall { tail, required, .. } => Error::TruncationTooSmall {
            tail,
            cavity_dim,
            required: required + k,
        },
        other => other,
    })?;
    let mut amps = CVector::zeros(cavity_dim);
    amps.rows_mut(k, cavity_dim - k).copy_from(input.amplitudes());
    FockKet::new(amps, BasisDims::cavity(cavity_dim))
}

fn ideal_fidelity(shifted: &FockKet, parity: Parity, alpha_prime: f64) -> f64 {
    let target = CatSpec { alpha: C64::new(alpha_prime, 0.0), parity };
    match cat_target(&target, shifted.dim()) {
        Ok(t) => t.inner(shifted).map(|z| z.norm_sqr()).unwrap_or(0.0),
        Err(_) => 0.0,
    }
}

fn real_alpha(spec: &CatSpec) -> Result<f64> {
    if spec.alpha.im != 0.0 || spec.alpha.re <= 0.0 {
        return Err(Error::InvalidParameter(
            "gain analysis expects a real positive alpha".into(),
        ));
    }
    Ok(spec.alpha.re)
}

/// Gain `G = α′/α` maximizing the fidelity between `(Ê†)^k|SC_α⟩` and a cat
/// of amplitude `α′` whose parity follows the shift.
pub fn optimal_gain(spec: &CatSpec, k: usize, cavity_dim: usize) -> Result<GainResult> {
    let alpha = real_alpha(spec)?;
    let shifted = shifted_cat(spec, k, cavity_dim)?;
    let parity = spec.parity.after_shift(k);
    let (gain, fid) = bracketed_max(
        |g| ideal_fidelity(&shifted, parity, g * alpha),
        GAIN_RANGE.0,
        GAIN_RANGE.1,
        GAIN_GRID_STEP,
        GAIN_TOL,
    )?;
    Ok(GainResult {
        alpha,
        gain,
        fidelity: fid,
        alpha_prime: gain * alpha,
    })
}

/// Pointwise fidelity between `(Ê†)^k|SC_α⟩` and `|SC_{α′}⟩` on a sorted grid.
pub fn theory_curve(
    spec: &CatSpec,
    k: usize,
    alpha_prime_grid: &[f64],
    cavity_dim: usize,
) -> Result<Vec<(f64, f64)>> {
    real_alpha(spec)?;
    if alpha_prime_grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidParameter("alpha' grid must be sorted ascending".into()));
    }
    let shifted = shifted_cat(spec, k, cavity_dim)?;
    let parity = spec.parity.after_shift(k);
    Ok(alpha_prime_grid
        .par_iter()
        .map(|&ap| (ap, ideal_fidelity(&shifted, parity, ap)))
        .collect())
}
