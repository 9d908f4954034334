//! Gaussian bichromatic drive schedules for the dressed-state transfers.
//!
//! Each transfer set moves `|+,n⟩ → |−,n⟩` through `|−,n+1⟩` with a tone
//! on `|−,n⟩ ↔ |−,n+1⟩` (tone 1) and one on `|+,n⟩ ↔ |−,n+1⟩` (tone 2),
//! both sitting `Δ_n` below their transitions so that
//! `ω₁ − ω₂ = 2λ√(n+1)`.
//!
//! Drive times are measured from the midpoint of the pulse window. In the
//! frame rotating at `ω_r` a tone at `ω` contributes
//! `ε(t)(â e^{−iνt} + â† e^{iνt})` with `ν = ω_r − ω`.

use std::f64::consts::SQRT_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{annihilation_op, OpMatrix, C64};
use crate::jc_model::{transition_frequency, DeviceParams, TransitionKind};
use crate::units::{ghz, mhz, to_mhz};

/// Gaussian envelope `|ε|·exp[−(t − center)²/T²]` at a fixed frequency.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianTone {
    pub amplitude: f64,
    pub center: f64,
    pub width: f64,
    pub frequency: f64,
}

impl GaussianTone {
    pub fn validate(&self) -> Result<()> {
        if !(self.width > 0.0) {
            return Err(Error::InvalidParameter("tone width must be positive".into()));
        }
        if !(self.amplitude >= 0.0) {
            return Err(Error::InvalidParameter("tone amplitude must be non-negative".into()));
        }
        Ok(())
    }

    #[inline]
    pub fn envelope(&self, t: f64) -> f64 {
        let x = (t - self.center) / self.width;
        self.amplitude * (-x * x).exp()
    }
}

pub fn envelope(tone: &GaussianTone, t: f64) -> f64 {
    tone.envelope(t)
}

/// One Λ-type transfer in manifold `n`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransferSet {
    pub manifold: usize,
    pub tone1: GaussianTone,
    pub tone2: GaussianTone,
    /// Single-photon detuning below `|−,n+1⟩`.
    pub detuning: f64,
}

impl TransferSet {
    /// `(ω₁ − ω₂) − 2λ√(n+1)`.
    pub fn two_photon_residual(&self, lambda: f64) -> f64 {
        (self.tone1.frequency - self.tone2.frequency) - 2.0 * lambda * ((self.manifold + 1) as f64).sqrt()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseSchedule {
    pub transfer_sets: Vec<TransferSet>,
    pub t_start: f64,
    pub t_end: f64,
    /// All sets share the first set's tone 1.
    pub shared_tone1: bool,
}

impl PulseSchedule {
    pub fn validate(&self) -> Result<()> {
        if !(self.t_end > self.t_start) {
            return Err(Error::InvalidParameter("pulse window must have positive length".into()));
        }
        for set in &self.transfer_sets {
            set.tone1.validate()?;
            set.tone2.validate()?;
        }
        Ok(())
    }

    pub fn duration(&self) -> f64 {
        self.t_end - self.t_start
    }

    /// Distinct tones; a shared tone 1 appears once.
    pub fn tones(&self) -> Vec<GaussianTone> {
        let mut tones = Vec::with_capacity(2 * self.transfer_sets.len());
        for (i, set) in self.transfer_sets.iter().enumerate() {
            if !self.shared_tone1 || i == 0 {
                tones.push(set.tone1);
            }
            tones.push(set.tone2);
        }
        tones
    }

    /// Whether every set satisfies the overlap condition `τ > (√2 − 1)T`,
    /// with `τ` half the center separation.
    pub fn stirap_admissible(&self) -> bool {
        self.transfer_sets.iter().all(|s| {
            let tau = 0.5 * (s.tone2.center - s.tone1.center).abs();
            tau > (SQRT_2 - 1.0) * s.tone1.width.max(s.tone2.width)
        })
    }

    /// Largest envelope value at the window edges relative to its peak.
    pub fn edge_fraction(&self) -> f64 {
        self.tones()
            .iter()
            .map(|t| {
                let peak = t.amplitude.max(f64::MIN_POSITIVE);
                t.envelope(self.t_start).max(t.envelope(self.t_end)) / peak
            })
            .fold(0.0, f64::max)
    }

    /// Copy with `offsets[i]` added to tone 2 of set `i`.
    pub fn with_tone2_offsets(&self, offsets: &[f64]) -> Result<PulseSchedule> {
        if offsets.len() != self.transfer_sets.len() {
            return Err(Error::DimensionMismatch {
                expected: self.transfer_sets.len(),
                found: offsets.len(),
            });
        }
        let mut out = self.clone();
        for (set, off) in out.transfer_sets.iter_mut().zip(offsets) {
            set.tone2.frequency += off;
        }
        Ok(out)
    }

    /// Complex coefficient `c(t)` of `â` in the rotating-frame drive
    /// `c(t)â + c̄(t)â†`.
    #[inline]
    pub fn drive_coefficient(&self, t: f64, omega_r: f64) -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        for (i, set) in self.transfer_sets.iter().enumerate() {
            if !self.shared_tone1 || i == 0 {
                acc += tone_term(&set.tone1, t, omega_r);
            }
            acc += tone_term(&set.tone2, t, omega_r);
        }
        acc
    }
}

#[inline]
fn tone_term(tone: &GaussianTone, t: f64, omega_r: f64) -> C64 {
    let env = tone.envelope(t);
    if env == 0.0 {
        return C64::new(0.0, 0.0);
    }
    C64::from_polar(env, -(omega_r - tone.frequency) * t)
}

/// Drive frequencies for manifold `n` detuned `Δ_n` below the resonant
/// dressed transitions: `ω₁ = ω(|−,n⟩↔|−,n+1⟩) − Δ_n`, `ω₂ = ω₁ − 2λ√(n+1)`.
pub fn tone_frequencies(n: usize, delta_n: f64, params: &DeviceParams) -> Result<(f64, f64)> {
    let omega1 = transition_frequency(TransitionKind::MinusMinus, n, params, 0.0)? - delta_n;
    let omega2 = omega1 - 2.0 * params.lambda * ((n + 1) as f64).sqrt();
    Ok((omega1, omega2))
}

/// One row of the published drive table (frequencies as listed).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub manifold: usize,
    pub eps1_mhz: f64,
    pub omega1_ghz: f64,
    pub eps2_mhz: f64,
    pub omega2_ghz: f64,
    pub delta_mhz: f64,
}

const fn row(manifold: usize, eps1: f64, w1: f64, eps2: f64, w2: f64, delta: f64) -> TableRow {
    TableRow {
        manifold,
        eps1_mhz: eps1,
        omega1_ghz: w1,
        eps2_mhz: eps2,
        omega2_ghz: w2,
        delta_mhz: delta,
    }
}

/// Built-in table version, recorded in run manifests.
pub const TABLE_VERSION: &str = "table1-v1";

pub const FIRST_ROUND_ROWS: [TableRow; 4] = [
    row(0, 10.0, 5.949, 35.0, 5.749, 10.0),
    row(2, 10.0, 5.949, 38.0, 5.603, 24.0),
    row(4, 10.0, 5.949, 49.0, 5.501, 30.0),
    row(6, 10.0, 5.949, 70.0, 5.419, 33.0),
];

pub const SECOND_ROUND_ROWS: [TableRow; 4] = [
    row(1, 24.0, 5.953, 55.0, 5.679, 15.0),
    row(3, 24.0, 5.953, 36.0, 5.551, 22.0),
    row(5, 24.0, 5.953, 32.0, 5.462, 26.0),
    row(7, 24.0, 5.953, 31.0, 5.385, 29.0),
];

/// Which shift round a schedule drives.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdagRound {
    First,
    Second,
}

impl EdagRound {
    pub fn rows(self) -> &'static [TableRow; 4] {
        match self {
            EdagRound::First => &FIRST_ROUND_ROWS,
            EdagRound::Second => &SECOND_ROUND_ROWS,
        }
    }

    /// Envelope offset τ in µs.
    pub fn tau(self) -> f64 {
        match self {
            EdagRound::First => 3.58,
            EdagRound::Second => 3.14,
        }
    }

    /// Envelope width T in µs.
    pub fn width(self) -> f64 {
        6.28
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum FrequencyMode {
    /// Table frequencies as published.
    #[default]
    Verbatim,
    /// Shared `ω₁` from the first row's `Δ`, every `ω₂` placed exactly on
    /// the two-photon condition.
    Derived,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScheduleOptions {
    pub frequencies: FrequencyMode,
    /// Tone 2 peaks first instead of tone 1.
    pub reverse_order: bool,
    /// Window extends this many widths beyond the outermost envelope centers.
    pub window_margin: f64,
}

impl Default for ScheduleOptions {
    fn default() -> Self {
        Self {
            frequencies: FrequencyMode::Verbatim,
            reverse_order: false,
            window_margin: SQRT_2,
        }
    }
}

/// Builds a schedule of Gaussian pairs with centers at `∓τ` and a window of
/// `±(|τ| + margin·T)` around the midpoint.
pub fn gaussian_pair_schedule(
    sets: Vec<(usize, f64, f64, f64, f64, f64)>,
    tau: f64,
    width: f64,
    shared_tone1: bool,
    options: &ScheduleOptions,
) -> Result<PulseSchedule> {
    let (c1, c2) = if options.reverse_order { (tau, -tau) } else { (-tau, tau) };
    let transfer_sets = sets
        .into_iter()
        .map(|(manifold, eps1, w1, eps2, w2, detuning)| TransferSet {
            manifold,
            tone1: GaussianTone {
                amplitude: eps1,
                center: c1,
                width,
                frequency: w1,
            },
            tone2: GaussianTone {
                amplitude: eps2,
                center: c2,
                width,
                frequency: w2,
            },
            detuning,
        })
        .collect();
    let half = tau.abs() + options.window_margin * width;
    let schedule = PulseSchedule {
        transfer_sets,
        t_start: -half,
        t_end: half,
        shared_tone1,
    };
    schedule.validate()?;
    Ok(schedule)
}

/// Published drive schedule for one shift round.
pub fn table1_schedule(which: EdagRound, params: &DeviceParams) -> Result<PulseSchedule> {
    table1_schedule_with(which, params, &ScheduleOptions::default())
}

pub fn table1_schedule_with(which: EdagRound, params: &DeviceParams, options: &ScheduleOptions) -> Result<PulseSchedule> {
    let rows = which.rows();
    let shared_w1 = match options.frequencies {
        FrequencyMode::Verbatim => ghz(rows[0].omega1_ghz),
        FrequencyMode::Derived => tone_frequencies(rows[0].manifold, mhz(rows[0].delta_mhz), params)?.0,
    };
    let mut sets = Vec::with_capacity(rows.len());
    for r in rows {
        let (w2, detuning) = match options.frequencies {
            FrequencyMode::Verbatim => (ghz(r.omega2_ghz), mhz(r.delta_mhz)),
            FrequencyMode::Derived => {
                let w2 = shared_w1 - 2.0 * params.lambda * ((r.manifold + 1) as f64).sqrt();
                let det = transition_frequency(TransitionKind::MinusMinus, r.manifold, params, 0.0)? - shared_w1;
                (w2, det)
            }
        };
        sets.push((r.manifold, mhz(r.eps1_mhz), shared_w1, mhz(r.eps2_mhz), w2, detuning));
    }
    gaussian_pair_schedule(sets, which.tau(), which.width(), true, options)
}

/// Internal consistency of one published table row, in MHz.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RowCheck {
    pub round: EdagRound,
    pub manifold: usize,
    /// `(ω₁ − ω₂) − 2λ√(n+1)` from the listed frequencies.
    pub two_photon_residual_mhz: f64,
    /// `ω(|−,n⟩↔|−,n+1⟩) − ω₁` from the dressed spectrum.
    pub delta_recomputed_mhz: f64,
    pub delta_listed_mhz: f64,
    /// The `|1⟩→|2⟩` row, whose tone spacing misses the two-photon condition.
    pub known_outlier: bool,
}

impl RowCheck {
    pub fn delta_error_mhz(&self) -> f64 {
        self.delta_recomputed_mhz - self.delta_listed_mhz
    }
}

/// Checks every published row against the dressed spectrum of `params`.
pub fn table_consistency(params: &DeviceParams) -> Result<Vec<RowCheck>> {
    let mut out = Vec::new();
    for round in [EdagRound::First, EdagRound::Second] {
        for r in round.rows() {
            let w1 = ghz(r.omega1_ghz);
            let w2 = ghz(r.omega2_ghz);
            let split = 2.0 * params.lambda * ((r.manifold + 1) as f64).sqrt();
            let mm = transition_frequency(TransitionKind::MinusMinus, r.manifold, params, 0.0)?;
            out.push(RowCheck {
                round,
                manifold: r.manifold,
                two_photon_residual_mhz: to_mhz(w1 - w2 - split),
                delta_recomputed_mhz: to_mhz(mm - w1),
                delta_listed_mhz: r.delta_mhz,
                known_outlier: r.manifold == 1,
            });
        }
    }
    Ok(out)
}

/// Single Gaussian pair on manifold `n` placed exactly on the two-photon
/// condition, `Δ_n` below the dressed transitions.
#[allow(clippy::too_many_arguments)]
pub fn single_transfer_schedule(
    n: usize,
    delta_n: f64,
    eps1: f64,
    eps2: f64,
    tau: f64,
    width: f64,
    params: &DeviceParams,
    options: &ScheduleOptions,
) -> Result<PulseSchedule> {
    let (w1, w2) = tone_frequencies(n, delta_n, params)?;
    gaussian_pair_schedule(vec![(n, eps1, w1, eps2, w2, delta_n)], tau, width, false, options)
}

/// Dense rotating-frame drive operator on the joint space at time `t`.
pub fn drive_hamiltonian(schedule: &PulseSchedule, t: f64, params: &DeviceParams) -> Result<OpMatrix> {
    let a = annihilation_op(params.cavity_dim)?.on_cavity()?;
    let c = schedule.drive_coefficient(t, params.omega_r);
    a.scale(c).add(&a.adjoint().scale(c.conj()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::{to_ghz, to_mhz};
    use approx::assert_abs_diff_eq;

    fn tone() -> GaussianTone {
        GaussianTone {
            amplitude: 2.0,
            center: 1.5,
            width: 0.7,
            frequency: ghz(5.9),
        }
    }

    #[test]
    fn envelope_shape() {
        let t = tone();
        assert_eq!(envelope(&t, 1.5), 2.0);
        assert_abs_diff_eq!(envelope(&t, 1.5 + 0.7), 2.0 / std::f64::consts::E, epsilon = 1e-15);
        assert_abs_diff_eq!(envelope(&t, 1.5 - 0.7), 2.0 / std::f64::consts::E, epsilon = 1e-15);
        assert!(envelope(&t, 1.5 + 5.0 * 0.7) < 2e-11 * 2.0);
    }

    #[test]
    fn frequencies_for_first_manifolds() {
        let p = DeviceParams::default();
        let (w1, w2) = tone_frequencies(0, mhz(10.0), &p).unwrap();
        assert_abs_diff_eq!(to_ghz(w1), 5.9486, epsilon = 1e-4);
        assert_abs_diff_eq!(to_ghz(w2), 5.7486, epsilon = 1e-4);
        let (_, w2) = tone_frequencies(2, mhz(24.0), &p).unwrap();
        assert_abs_diff_eq!(to_ghz(w2), 5.603, epsilon = 1e-3);
        for n in 0..10 {
            let (w1, w2) = tone_frequencies(n, mhz(17.0), &p).unwrap();
            assert_abs_diff_eq!(w1 - w2, 2.0 * p.lambda * ((n + 1) as f64).sqrt(), epsilon = 1e-9);
        }
    }

    #[test]
    fn table_schedules() {
        let p = DeviceParams::default();
        let first = table1_schedule(EdagRound::First, &p).unwrap();
        assert_eq!(first.transfer_sets.len(), 4);
        let last = first.transfer_sets[3];
        assert_eq!(last.manifold, 6);
        assert_abs_diff_eq!(to_mhz(last.tone2.amplitude), 70.0, epsilon = 1e-12);
        assert_abs_diff_eq!(to_ghz(last.tone2.frequency), 5.419, epsilon = 1e-12);
        assert_abs_diff_eq!(to_mhz(last.detuning), 33.0, epsilon = 1e-12);
        // tone 1 peaks first
        assert!(last.tone1.center < last.tone2.center);
        assert_abs_diff_eq!(first.duration(), 2.0 * (3.58 + SQRT_2 * 6.28), epsilon = 1e-12);
        assert!((first.duration() - 25.0).abs() < 0.5);

        let second = table1_schedule(EdagRound::Second, &p).unwrap();
        let last = second.transfer_sets[3];
        assert_eq!(last.manifold, 7);
        assert_abs_diff_eq!(to_ghz(last.tone2.frequency), 5.385, epsilon = 1e-12);
        assert_abs_diff_eq!(to_mhz(last.detuning), 29.0, epsilon = 1e-12);

        for set in &first.transfer_sets {
            assert!(set.tone2.amplitude * set.tone2.width >= 10.0);
        }
        assert!(first.stirap_admissible() && second.stirap_admissible());
    }

    #[test]
    fn shared_tone_counted_once() {
        let p = DeviceParams::default();
        let first = table1_schedule(EdagRound::First, &p).unwrap();
        let tones = first.tones();
        assert_eq!(tones.len(), 5);
        let w1 = first.transfer_sets[0].tone1.frequency;
        assert_eq!(tones.iter().filter(|t| t.frequency == w1).count(), 1);
    }

    #[test]
    fn derived_mode_satisfies_two_photon_condition() {
        let p = DeviceParams::default();
        for round in [EdagRound::First, EdagRound::Second] {
            let opts = ScheduleOptions { frequencies: FrequencyMode::Derived, ..Default::default() };
            let s = table1_schedule_with(round, &p, &opts).unwrap();
            for set in &s.transfer_sets {
                assert!(set.two_photon_residual(p.lambda).abs() < 1e-9);
            }
        }
        let verbatim = table1_schedule(EdagRound::Second, &p).unwrap();
        // the |1⟩→|2⟩ row is ~9 MHz off the two-photon condition
        assert_abs_diff_eq!(to_mhz(verbatim.transfer_sets[0].two_photon_residual(p.lambda)), -8.84, epsilon = 0.01);
    }

    #[test]
    fn reverse_order_flag() {
        let p = DeviceParams::default();
        let opts = ScheduleOptions { reverse_order: true, ..Default::default() };
        let s = table1_schedule_with(EdagRound::First, &p, &opts).unwrap();
        assert!(s.transfer_sets[0].tone1.center > s.transfer_sets[0].tone2.center);
    }

    #[test]
    fn drive_operator_properties() {
        let p = DeviceParams::default().with_cavity_dim(6);
        let s = table1_schedule(EdagRound::First, &p).unwrap();
        let before = drive_hamiltonian(&s, s.t_start - 200.0, &p).unwrap();
        assert!(before.matrix().iter().all(|z| z.norm() <= 1e-12 * mhz(70.0)));
        for t in [-7.3, 0.11, 4.2, 9.9] {
            let h = drive_hamiltonian(&s, t, &p).unwrap();
            assert!(h.hermiticity_defect() < 1e-12);
        }
        // single tone at its center, t = 0 so the phase vanishes
        let single = gaussian_pair_schedule(
            vec![(0, mhz(3.0), ghz(5.9), 0.0, ghz(5.7), 0.0)],
            0.0,
            1.0,
            false,
            &ScheduleOptions::default(),
        )
        .unwrap();
        let h = drive_hamiltonian(&single, 0.0, &p).unwrap();
        let a = annihilation_op(6).unwrap().on_cavity().unwrap();
        let expected = a.add(&a.adjoint()).unwrap().scale(C64::new(mhz(3.0), 0.0));
        assert!((h.matrix() - expected.matrix()).norm() < 1e-12);
    }
}
