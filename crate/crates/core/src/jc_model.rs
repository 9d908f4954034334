//! Two-level Jaynes-Cummings model in the frame rotating at the cavity
//! frequency: static Hamiltonian, dressed states and detuning sweeps.
//!
//! Dressed states of the `n`-th manifold (`n + 1` excitations):
//! `|+,n⟩ = cosθ|e,n⟩ + sinθ|g,n+1⟩`, `|−,n⟩ = −sinθ|e,n⟩ + cosθ|g,n+1⟩`
//! with `θ = ½·atan2(2λ√(n+1), δ)` and rotating-frame energies
//! `±½√(δ² + 4λ²(n+1))`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{
    annihilation_op, sigma_minus, sigma_plus, sigma_z, BasisDims, CVector, FockKet, OpMatrix, C64,
    EXCITED, GROUND,
};
use crate::units::{ghz, khz, mhz};

/// Device constants. Angular frequencies in rad/µs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceParams {
    pub lambda: f64,
    pub omega_r: f64,
    #[serde(default)]
    pub kappa: f64,
    #[serde(default)]
    pub gamma_minus: f64,
    #[serde(default)]
    pub gamma_phi: f64,
    pub cavity_dim: usize,
}

impl Default for DeviceParams {
    fn default() -> Self {
        Self {
            lambda: mhz(100.0),
            omega_r: ghz(6.0),
            kappa: 0.0,
            gamma_minus: 0.0,
            gamma_phi: 0.0,
            cavity_dim: 25,
        }
    }
}

impl DeviceParams {
    pub fn with_cavity_dim(mut self, cavity_dim: usize) -> Self {
        self.cavity_dim = cavity_dim;
        self
    }

    /// Cavity decay `κ/2π` in kHz with `γ₋ = γ_φ = 10κ`.
    pub fn with_decoherence_khz(mut self, kappa_khz: f64) -> Self {
        self.kappa = khz(kappa_khz);
        self.gamma_minus = 10.0 * self.kappa;
        self.gamma_phi = 10.0 * self.kappa;
        self
    }

    pub fn decoherence_free(&self) -> bool {
        self.kappa == 0.0 && self.gamma_minus == 0.0 && self.gamma_phi == 0.0
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0) {
            return Err(Error::InvalidParameter("lambda must be positive".into()));
        }
        for (name, v) in [
            ("kappa", self.kappa),
            ("gamma_minus", self.gamma_minus),
            ("gamma_phi", self.gamma_phi),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::InvalidParameter(format!("{name} must be a non-negative rate")));
            }
        }
        if self.cavity_dim < 2 {
            return Err(Error::InvalidDimension {
                what: "cavity_dim",
                dim: self.cavity_dim,
            });
        }
        Ok(())
    }

    pub fn dims(&self) -> BasisDims {
        BasisDims::joint(self.cavity_dim)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum SweepProfile {
    #[default]
    Linear,
    /// `3s² − 2s³` in the normalized time `s`.
    Smoothstep,
}

/// Qubit-cavity detuning ramp `δ(t) = ω_q(t) − ω_r`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSchedule {
    pub delta_start: f64,
    pub delta_end: f64,
    pub duration: f64,
    #[serde(default)]
    pub profile: SweepProfile,
}

impl Default for SweepSchedule {
    fn default() -> Self {
        Self {
            delta_start: ghz(1.0),
            delta_end: 0.0,
            duration: 6.2,
            profile: SweepProfile::Linear,
        }
    }
}

impl SweepSchedule {
    pub fn validate(&self) -> Result<()> {
        if !(self.duration > 0.0) {
            return Err(Error::InvalidParameter("sweep duration must be positive".into()));
        }
        Ok(())
    }

    /// Same ramp run backwards.
    pub fn reversed(&self) -> Self {
        Self {
            delta_start: self.delta_end,
            delta_end: self.delta_start,
            ..self.clone()
        }
    }

    fn shape(&self, s: f64) -> f64 {
        match self.profile {
            SweepProfile::Linear => s,
            SweepProfile::Smoothstep => s * s * (3.0 - 2.0 * s),
        }
    }

    /// Detuning at time `t` in `[0, duration]`, without range checks.
    pub fn delta_unchecked(&self, t: f64) -> f64 {
        let s = (t / self.duration).clamp(0.0, 1.0);
        if s == 0.0 {
            return self.delta_start;
        }
        if s == 1.0 {
            return self.delta_end;
        }
        self.delta_start + (self.delta_end - self.delta_start) * self.shape(s)
    }
}

/// Detuning of the sweep at `t ∈ [0, duration]`.
pub fn sweep_delta(schedule: &SweepSchedule, t: f64) -> Result<f64> {
    if !(0.0..=schedule.duration).contains(&t) {
        return Err(Error::TimeOutOfRange {
            t,
            start: 0.0,
            end: schedule.duration,
        });
    }
    Ok(schedule.delta_unchecked(t))
}

/// `σᶻ/2` embedded on the joint space.
pub fn half_sigma_z(cavity_dim: usize) -> Result<OpMatrix> {
    Ok(sigma_z().on_qubit(cavity_dim)?.scale(C64::new(0.5, 0.0)))
}

/// JC exchange term `â†σ̂⁻ + âσ̂⁺` (without λ).
pub fn jc_coupling(cavity_dim: usize) -> Result<OpMatrix> {
    let a = annihilation_op(cavity_dim)?.on_cavity()?;
    let sm = sigma_minus().on_qubit(cavity_dim)?;
    let sp = sigma_plus().on_qubit(cavity_dim)?;
    a.adjoint().mul(&sm)?.add(&a.mul(&sp)?)
}

/// `(δ/2)σᶻ + λ(â†σ̂⁻ + âσ̂⁺)` in the frame rotating at `ω_r`.
pub fn static_hamiltonian(params: &DeviceParams, delta: f64) -> Result<OpMatrix> {
    params.validate()?;
    let z = half_sigma_z(params.cavity_dim)?.scale(C64::new(delta, 0.0));
    let jc = jc_coupling(params.cavity_dim)?.scale(C64::new(params.lambda, 0.0));
    let h = z.add(&jc)?;
    OpMatrix::hermitian(h.matrix().clone(), params.dims())
}

/// `θ_n = ½·atan2(2λ√(n+1), δ)`, in `(0, π/2)`.
pub fn mixing_angle(n: usize, delta: f64, lambda: f64) -> f64 {
    0.5 * (2.0 * lambda * ((n + 1) as f64).sqrt()).atan2(delta)
}

/// Rotating-frame dressed energies `(E₊, E₋)` of manifold `n`.
pub fn dressed_energies(n: usize, delta: f64, lambda: f64) -> (f64, f64) {
    let half = 0.5 * (delta * delta + 4.0 * lambda * lambda * (n + 1) as f64).sqrt();
    (half, -half)
}

#[derive(Clone, Debug, PartialEq)]
pub struct DressedPair {
    pub plus: FockKet,
    pub minus: FockKet,
    pub energy_plus: f64,
    pub energy_minus: f64,
}

/// Dressed kets of manifold `n` on a joint space of the given truncation.
pub fn dressed_pair(n: usize, delta: f64, lambda: f64, cavity_dim: usize) -> Result<DressedPair> {
    if n + 1 >= cavity_dim {
        return Err(Error::ManifoldOutOfRange { n, cavity_dim });
    }
    let dims = BasisDims::joint(cavity_dim);
    let theta = mixing_angle(n, delta, lambda);
    let (s, c) = theta.sin_cos();
    let e_n = dims.index(EXCITED, n);
    let g_n1 = dims.index(GROUND, n + 1);
    let mut plus = CVector::zeros(dims.total());
    plus[e_n] = C64::new(c, 0.0);
    plus[g_n1] = C64::new(s, 0.0);
    let mut minus = CVector::zeros(dims.total());
    minus[e_n] = C64::new(-s, 0.0);
    minus[g_n1] = C64::new(c, 0.0);
    let (energy_plus, energy_minus) = dressed_energies(n, delta, lambda);
    Ok(DressedPair {
        plus: FockKet::new(plus, dims)?,
        minus: FockKet::new(minus, dims)?,
        energy_plus,
        energy_minus,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransitionKind {
    /// `|−,n⟩ ↔ |−,n+1⟩`
    MinusMinus,
    /// `|+,n⟩ ↔ |−,n+1⟩`
    PlusMinus,
}

/// Lab-frame transition frequency between dressed levels of manifolds `n`
/// and `n + 1`.
pub fn transition_frequency(kind: TransitionKind, n: usize, params: &DeviceParams, delta: f64) -> Result<f64> {
    if n + 2 >= params.cavity_dim {
        return Err(Error::ManifoldOutOfRange {
            n: n + 1,
            cavity_dim: params.cavity_dim,
        });
    }
    let (plus_n, minus_n) = dressed_energies(n, delta, params.lambda);
    let (_, minus_n1) = dressed_energies(n + 1, delta, params.lambda);
    let lower = match kind {
        TransitionKind::MinusMinus => minus_n,
        TransitionKind::PlusMinus => plus_n,
    };
    Ok(minus_n1 - lower + params.omega_r)
}
